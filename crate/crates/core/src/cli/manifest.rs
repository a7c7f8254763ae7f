use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run: everything needed to repeat it and check the result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub verb: String,
    /// Every configuration key with its resolved value.
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// sha256 of each input file read.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each output file, keyed by path relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Artifacts whose hash differs from `other`'s, or that `other` lacks.
    pub fn artifact_mismatches(&self, other: &Manifest) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|(k, v)| other.artifacts.get(*k) != Some(*v))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest { verb: "train".into(), complete: true, ..Manifest::default() };
        m.artifacts.insert("a.csv".into(), sha256_hex(b"x"));
        m.artifacts.insert("b.csv".into(), sha256_hex(b"y"));
        let path = dir.path().join(MANIFEST_FILE);
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        let mut other = m.clone();
        other.artifacts.insert("b.csv".into(), sha256_hex(b"z"));
        assert_eq!(m.artifact_mismatches(&other), vec!["b.csv".to_string()]);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
