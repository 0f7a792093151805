//! Stage-cached pipeline behind the `transport` command.
//!
//! Each stage reads the previous stages' files from the output directory and
//! writes its own:
//!
//! | stage        | writes                                                   |
//! |--------------|----------------------------------------------------------|
//! | `ingest`     | `ingest/manifest.json`, `ingest/corpora/*`, `ingest/profiles/*` |
//! | `similarity` | `similarity/<source>.{json,csv}`                         |
//! | `transport`  | `transport/reports.json`, `transport/table.txt`          |
//! | `fit`        | `fit/<study>_<predictor>.json`, `fit/*_curve.csv`, `fit/summary.json` |
//! | `report`     | `report/report.{json,txt}`, `report/plot_*.csv`          |

use std::fmt;
use std::path::Path;

pub mod config;
pub mod fit;
pub mod ingest;
pub mod output;
pub mod report;
pub mod similarity;
pub mod transport;

pub use config::{LoadedConfig, Overrides, RunConfig};

/// Exit codes.
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::data(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<transportability::Error> for CliError {
    fn from(e: transportability::Error) -> Self {
        use transportability::ErrorCategory;
        let code = match e.category() {
            ErrorCategory::Usage => EXIT_USAGE,
            ErrorCategory::Data => EXIT_DATA,
            ErrorCategory::Numerical => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Error for a stage whose inputs haven't been produced yet.
pub(crate) fn missing_stage(stage: &str, what: &str) -> CliError {
    CliError::usage(format!("missing {what}; run the `{stage}` stage first"))
}
