use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transportability::transport::{build_report, render_reports};
use transportability::{ReportRequest, ScoreTable, TransportOptions, TransportReport};

use crate::config::LoadedConfig;
use crate::output::{self, Stamp};
use crate::{missing_stage, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportsFile {
    pub reports: Vec<TransportReport>,
}

pub fn reports_path(out: &Path) -> PathBuf {
    out.join("transport").join("reports.json")
}

/// Loads the score table named by the config. `.json` files carry their own
/// metric name; anything else is read as CSV.
pub fn load_scores(cfg: &LoadedConfig) -> Result<ScoreTable, CliError> {
    let rel = cfg
        .config
        .scores
        .as_ref()
        .ok_or_else(|| CliError::usage("config has no `scores` file"))?;
    let path = cfg.resolve(rel);
    let reader = BufReader::new(File::open(&path).map_err(|e| CliError::io(&path, e))?);
    let table = if path.extension().is_some_and(|e| e == "json") {
        ScoreTable::from_json(reader)
    } else {
        ScoreTable::from_csv(&cfg.config.metric, reader)
    };
    table.map_err(|e| {
        let e = CliError::from(e);
        CliError {
            code: e.code,
            message: format!("{}: {}", path.display(), e.message),
        }
    })
}

pub fn compute(cfg: &LoadedConfig, table: &ScoreTable) -> Result<Vec<TransportReport>, CliError> {
    let options = TransportOptions {
        bias_corrected: cfg.config.transport.bias_corrected,
    };
    cfg.config
        .studies
        .iter()
        .map(|s| {
            let request = ReportRequest {
                system: s.system.clone(),
                task: s.task.clone(),
                source: s.source_key()?,
                targets: s.target_keys()?,
            };
            build_report(table, &request, &options).map_err(|e| {
                let e = CliError::from(e);
                CliError {
                    code: e.code,
                    message: format!("{} ({}): {}", s.system, s.source, e.message),
                }
            })
        })
        .collect()
}

/// Computes every study's report and writes `reports.json` and `table.txt`.
/// Returns the rendered table.
pub fn run(cfg: &LoadedConfig) -> Result<(Vec<TransportReport>, String), CliError> {
    if cfg.config.studies.is_empty() {
        return Err(CliError::usage("config has no studies"));
    }
    let table = load_scores(cfg)?;
    let reports = compute(cfg, &table)?;
    let text = render_reports(&reports);
    let out = cfg.out_dir();
    let stamp = Stamp::new(&cfg.hash);
    let file = ReportsFile { reports };
    output::write_json(&reports_path(&out), &stamp, &file)?;
    output::write_text(&out.join("transport").join("table.txt"), &stamp, &text)?;
    Ok((file.reports, text))
}

pub fn read(out: &Path) -> Result<ReportsFile, CliError> {
    let path = reports_path(out);
    if !path.exists() {
        return Err(missing_stage("transport", "transport reports"));
    }
    Ok(output::read_json::<ReportsFile>(&path)?.body)
}
