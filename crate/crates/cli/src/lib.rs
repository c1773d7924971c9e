//! Experiment orchestration behind the `ringpair` binary.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod platforms;

pub use config::{ExperimentConfig, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Analysis(#[from] ringpair::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(
                ringpair::Error::InsufficientAccidentals | ringpair::Error::InsufficientStatistics(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// Ordered key/value results of one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Numeric value of `key`, if present and parseable.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Kv => {
                let mut out = String::new();
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k}={v}");
                }
                out
            }
            Format::Csv => {
                let keys: Vec<&str> = self.entries.iter().map(|(k, _)| k.as_str()).collect();
                let values: Vec<&str> = self.entries.iter().map(|(_, v)| v.as_str()).collect();
                format!("{}\n{}\n", keys.join(","), values.join(","))
            }
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
    /// Set when some result could not be estimated for lack of counts.
    pub insufficient: Option<String>,
    /// Printed ahead of the report.
    pub preamble: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.insufficient.is_some() {
            2
        } else {
            0
        }
    }
}

/// Where and how a command writes.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub format: Format,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Self {
        let out_dir = PathBuf::from(&config.output.directory);
        let format = config.output.format;
        Self { config, out_dir, format }
    }

    pub(crate) fn write(&self, outcome: &mut Outcome, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        write_file(&path, contents)?;
        outcome.files.push(path);
        Ok(())
    }

    pub(crate) fn report_name(&self, stem: &str) -> String {
        match self.format {
            Format::Kv => format!("{stem}_report.txt"),
            Format::Csv => format!("{stem}_report.csv"),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
