//! The `mfuse` command line: one verb per pipeline stage, flat `key=value`
//! configuration, and a manifest per run for exact reruns.

mod manifest;
mod run;
mod verbs;

pub use manifest::{sha256_file, sha256_hex, Manifest, MANIFEST_FILE};
pub use run::Run;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::config::{Config, KEYS, SEED_ENV};
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_METRIC: i32 = 5;
pub const EXIT_IO: i32 = 6;
/// A manifest rerun produced different artifact bytes.
pub const EXIT_NOT_REPRODUCED: i32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Filter, gate, aggregate and split a raw corpus; write statistics.
    Prepare,
    /// Generate a synthetic corpus.
    Synth,
    /// Train a model on a prepared corpus.
    Train,
    /// Score a split with a checkpoint; write metrics and curves.
    Eval,
    /// Train and evaluate one model per input combination.
    Ablate,
    /// Finite-difference checks of every primitive and model variant.
    Gradcheck,
    /// Merge evaluation metrics into one table.
    Report,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Prepare => "prepare",
            Verb::Synth => "synth",
            Verb::Train => "train",
            Verb::Eval => "eval",
            Verb::Ablate => "ablate",
            Verb::Gradcheck => "gradcheck",
            Verb::Report => "report",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "mfuse", version, about = "Multimodal tweet classifiers: data preparation, training, evaluation", after_long_help = keys_help())]
pub struct Command {
    pub verb: Verb,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeat the run recorded in this manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value` overrides; these win over the file.
    pub overrides: Vec<String>,
}

fn keys_help() -> String {
    let mut s = format!("Configuration keys (run with --help for this list; {SEED_ENV} sets `seed` when no source does):\n");
    for (k, default, desc) in KEYS {
        let d = if default.is_empty() { String::new() } else { format!(" [default: {default}]") };
        s.push_str(&format!("  {k:<26} {desc}{d}\n"));
    }
    s.push_str(&format!(
        "\nExit status: {EXIT_OK} ok, {EXIT_CONFIG} usage or configuration, {EXIT_DATA} data, {EXIT_NUMERIC} numeric failure, \
         {EXIT_METRIC} metric precondition, {EXIT_IO} i/o, {EXIT_NOT_REPRODUCED} manifest rerun differs"
    ));
    s
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownPrimitive(_) | Error::Attribute { .. } => EXIT_CONFIG,
        Error::Data(_) => EXIT_DATA,
        Error::Shape { .. } | Error::Graph(_) | Error::Numeric(_) => EXIT_NUMERIC,
        Error::Metric(_) => EXIT_METRIC,
        Error::Io { .. } => EXIT_IO,
    }
}

/// Path-valued keys, made absolute so a manifest works from any directory.
const PATH_KEYS: &[&str] = &[
    "data.dir",
    "model.embeddings",
    "model.init_checkpoint",
    "prepare.input",
    "prepare.banned_terms",
    "prepare.keywords",
    "eval.checkpoint",
];

fn absolute(p: &str) -> Result<String> {
    let abs = std::path::absolute(p).map_err(|e| Error::io(p, e))?;
    Ok(abs.to_string_lossy().into_owned())
}

fn absolutize(cfg: &mut Config) -> Result<()> {
    for key in PATH_KEYS {
        let v = cfg.get(key).to_string();
        if !v.is_empty() {
            cfg.set(key, &absolute(&v)?)?;
        }
    }
    let runs = cfg.get("report.runs").to_string();
    if !runs.is_empty() {
        let abs: Vec<String> = runs
            .split(',')
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(absolute)
            .collect::<Result<_>>()?;
        cfg.set("report.runs", &abs.join(","))?;
    }
    Ok(())
}

/// Result of a finished command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: Manifest,
    /// Artifacts that differ from the reference manifest of a rerun.
    pub not_reproduced: Vec<String>,
}

/// Resolves the configuration of `cmd` and runs it.
pub fn execute(cmd: &Command) -> Result<Outcome> {
    let (mut cfg, reference) = match &cmd.manifest {
        Some(path) => {
            let m = Manifest::load(path)?;
            if m.verb != cmd.verb.as_str() {
                return Err(Error::Config(format!(
                    "manifest records `{}`, not `{}`",
                    m.verb, cmd.verb
                )));
            }
            let mut cfg = Config::default();
            for (k, v) in &m.config {
                cfg.set(k, v)?;
            }
            cfg.apply_overrides(&cmd.overrides)?;
            (cfg, Some(m))
        }
        None => (Config::from_sources(cmd.config.as_deref(), &cmd.overrides)?, None),
    };
    absolutize(&mut cfg)?;
    if let Some(m) = &reference {
        for (path, hash) in &m.inputs {
            if &sha256_file(Path::new(path))? != hash {
                return Err(Error::Data(format!("input `{path}` changed since the manifest was written")));
            }
        }
    }
    let manifest = verbs::dispatch(cmd.verb, &cfg, &cmd.out)?;
    let not_reproduced = reference.map_or_else(Vec::new, |r| r.artifact_mismatches(&manifest));
    Ok(Outcome { manifest, not_reproduced })
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = match Command::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cmd) {
        Ok(o) if o.not_reproduced.is_empty() => EXIT_OK,
        Ok(o) => {
            eprintln!("mfuse: rerun differs from the manifest in: {}", o.not_reproduced.join(", "));
            EXIT_NOT_REPRODUCED
        }
        Err(e) => {
            eprintln!("mfuse {}: {e}", cmd.verb);
            exit_code(&e)
        }
    }
}
