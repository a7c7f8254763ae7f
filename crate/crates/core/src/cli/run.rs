use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{sha256_file, sha256_hex, Manifest, MANIFEST_FILE};
use crate::config::Config;
use crate::error::{Error, Result};

/// An output directory under construction.
///
/// The manifest is written as incomplete on creation and rewritten as
/// complete by [`Run::finish`], so an interrupted or failed run leaves its
/// partial artifacts marked.
#[derive(Debug)]
pub struct Run {
    pub out: PathBuf,
    pub manifest: Manifest,
}

impl Run {
    pub fn start(verb: &str, cfg: &Config, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let manifest = Manifest {
            tool: format!("mfuse {}", env!("CARGO_PKG_VERSION")),
            verb: verb.to_string(),
            config: cfg.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ..Manifest::default()
        };
        let run = Self { out: out.to_path_buf(), manifest };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> Result<()> {
        self.manifest.save(&self.out.join(MANIFEST_FILE))
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn seed(&mut self, key: &str, value: u64) {
        self.manifest.seeds.insert(key.to_string(), value);
    }

    /// Records the hash of an input file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.manifest.inputs.insert(path.to_string_lossy().into_owned(), hash);
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Writes through a CSV-style writer function.
    pub fn write_with<F>(&mut self, rel: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    /// Records a file already written under the output directory.
    pub fn record(&mut self, rel: &str) -> Result<()> {
        let hash = sha256_file(&self.path(rel))?;
        self.manifest.artifacts.insert(rel.to_string(), hash);
        Ok(())
    }

    /// Records a directory of files as one artifact: the hash of its sorted
    /// `name hash` listing.
    pub fn record_dir(&mut self, rel: &str) -> Result<()> {
        let dir = self.path(rel);
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&dir, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        let mut listing = String::new();
        for p in entries {
            let name = p.file_name().expect("directory entry has a name").to_string_lossy().into_owned();
            listing.push_str(&format!("{name} {}\n", sha256_file(&p)?));
        }
        self.manifest.artifacts.insert(format!("{rel}/"), sha256_hex(listing.as_bytes()));
        Ok(())
    }

    /// Adds another run's artifacts under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: &Manifest) {
        for (k, v) in &other.artifacts {
            self.manifest.artifacts.insert(format!("{prefix}/{k}"), v.clone());
        }
        for (k, v) in &other.inputs {
            self.manifest.inputs.insert(k.clone(), v.clone());
        }
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.complete = true;
        self.save()?;
        Ok(self.manifest)
    }

    /// Saves the manifest as incomplete with the error that stopped the run.
    pub fn fail(mut self, err: &Error) {
        self.manifest.complete = false;
        self.manifest.error = Some(err.to_string());
        // the original error matters more than a failure to record it
        let _ = self.save();
    }
}
