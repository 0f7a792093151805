use serde::Serialize;
use serde_json::Value;
use transportability::transport::render_reports;

use crate::config::LoadedConfig;
use crate::fit::{self, FitSummary};
use crate::output::{self, num, Stamp};
use crate::similarity::{self, SimilarityFile};
use crate::transport::{self, ReportsFile};
use crate::CliError;

const ABSENT: &str = "absent";

#[derive(Debug, Serialize)]
struct ReportBody {
    similarity: Value,
    transport: Value,
    fit: Value,
    plots: Vec<String>,
}

#[derive(Debug, Default)]
pub struct ReportOutcome {
    pub text: String,
    pub absent: Vec<&'static str>,
    pub plots: Vec<String>,
}

fn section<T: Serialize>(r: &Result<T, CliError>) -> Result<Value, CliError> {
    match r {
        Ok(v) => serde_json::to_value(v).map_err(|e| CliError::data(e.to_string())),
        Err(_) => Ok(Value::String(ABSENT.into())),
    }
}

/// Collects whatever stage outputs exist into one report. Without
/// `allow_partial`, any missing stage is an error naming it.
pub fn run(cfg: &LoadedConfig, allow_partial: bool) -> Result<ReportOutcome, CliError> {
    let out = cfg.out_dir();
    let stamp = Stamp::new(&cfg.hash);

    let sims: Result<Vec<SimilarityFile>, CliError> = similarity::plan(cfg)
        .iter()
        .map(|(source, _)| similarity::read(&out, source))
        .collect();
    let reports: Result<ReportsFile, CliError> = transport::read(&out);
    let fits: Result<FitSummary, CliError> = fit::read(&out);

    let mut outcome = ReportOutcome::default();
    for (name, missing) in [
        ("similarity", sims.is_err()),
        ("transport", reports.is_err()),
        ("fit", fits.is_err()),
    ] {
        if missing {
            outcome.absent.push(name);
        }
    }
    if !allow_partial && !outcome.absent.is_empty() {
        let first = sims
            .as_ref()
            .err()
            .or(reports.as_ref().err())
            .or(fits.as_ref().err())
            .cloned();
        return Err(first.unwrap_or_else(|| CliError::usage("missing stage outputs")));
    }

    let mut text = String::new();
    text.push_str("== similarity ==\n");
    match &sims {
        Ok(files) => files.iter().for_each(|f| {
            text.push_str(&similarity::render(f));
            text.push('\n');
        }),
        Err(_) => text.push_str("absent\n\n"),
    }
    text.push_str("== transport ==\n");
    match &reports {
        Ok(r) => text.push_str(&render_reports(&r.reports)),
        Err(_) => text.push_str("absent\n"),
    }
    text.push_str("\n== fit ==\n");
    match &fits {
        Ok(f) => text.push_str(&fit::render(f)),
        Err(_) => text.push_str("absent\n"),
    }

    // Plot data needs similarity and scores; fitted values are added when
    // present.
    if let Ok(files) = &sims {
        if let Ok(table) = transport::load_scores(cfg) {
            for study in &cfg.config.studies {
                let Some(sim) = files.iter().find(|f| f.source == study.source) else {
                    continue;
                };
                let pairs = fit::joined(study, &sim.records, &table);
                for predictor in cfg.predictors() {
                    let model = fits.as_ref().ok().and_then(|s| {
                        s.fits
                            .iter()
                            .find(|f| f.system == study.system && f.source == study.source && f.predictor == predictor)
                            .map(|f| &f.model)
                    });
                    let rows: Vec<Vec<String>> = pairs
                        .iter()
                        .map(|(r, y)| {
                            let x = fit::predictor_value(r, predictor);
                            let y_hat = model
                                .and_then(|m| transportability::regression::predict(m, x).ok())
                                .map_or_else(String::new, num);
                            vec![r.target_id.clone(), num(x), num(*y), y_hat]
                        })
                        .collect();
                    let name = format!("plot_{}_{}.csv", study.slug(), predictor);
                    output::write_csv(
                        &out.join("report").join(&name),
                        &stamp,
                        &["target", "x", "y", "y_hat"],
                        &rows,
                    )?;
                    outcome.plots.push(name);
                }
            }
        }
    }

    let body = ReportBody {
        similarity: section(&sims)?,
        transport: section(&reports)?,
        fit: section(&fits)?,
        plots: outcome.plots.clone(),
    };
    output::write_json(&out.join("report").join("report.json"), &stamp, &body)?;
    output::write_text(&out.join("report").join("report.txt"), &stamp, &text)?;
    outcome.text = text;
    Ok(outcome)
}
