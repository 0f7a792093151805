use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transportability::regression::{self, sample_curve, FitModel};
use transportability::{Predictor, ScoreKey, ScoreTable, SimilarityRecord};

use crate::config::{slug, LoadedConfig, StudySpec};
use crate::output::{self, num, Stamp};
use crate::{missing_stage, similarity, transport, CliError};

const CURVE_STEPS: usize = 100;
const POOLED: &str = "*";

/// Points gathered per (task, predictor) for pooled fits.
type Pools = Vec<((String, Predictor), Vec<(f64, f64)>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub system: String,
    pub task: String,
    pub source: String,
    pub predictor: Predictor,
    #[serde(default)]
    pub pooled: bool,
    pub model_file: String,
    pub model: FitModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFit {
    pub system: String,
    pub source: String,
    pub predictor: Predictor,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub fits: Vec<FitEntry>,
    pub skipped: Vec<SkippedFit>,
    pub skipped_count: usize,
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join("fit").join("summary.json")
}

pub fn model_file(study: &StudySpec, predictor: Predictor) -> String {
    format!("{}_{}.json", study.slug(), predictor)
}

pub fn predictor_value(r: &SimilarityRecord, p: Predictor) -> f64 {
    match p {
        Predictor::Lexical => r.lexical_difference,
        Predictor::Cosine => r.cosine_distance,
        Predictor::Kl => r.kl_divergence,
    }
}

/// `(record, score)` for every similarity record with a matching score.
pub fn joined<'a>(
    study: &StudySpec,
    records: &'a [SimilarityRecord],
    table: &ScoreTable,
) -> Vec<(&'a SimilarityRecord, f64)> {
    records
        .iter()
        .filter_map(|r| {
            let key: ScoreKey = r.target_id.parse().ok()?;
            table.get(&study.system, &study.task, &key).map(|y| (r, y))
        })
        .collect()
}

/// Fits one point set and writes the model and its curve. `Err` carries the
/// skip reason.
fn fit_and_write(
    points: &[(f64, f64)],
    predictor: Predictor,
    percentage: bool,
    dir: &Path,
    file: &str,
    stamp: &Stamp,
) -> Result<Result<FitModel, String>, CliError> {
    let model = match regression::fit(points, predictor) {
        Ok(m) if percentage => m.with_score_range(0.0, 100.0),
        Ok(m) => m,
        Err(e) => return Ok(Err(e.to_string())),
    };
    output::write_json(&dir.join(file), stamp, &model)?;
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let rows: Vec<Vec<String>> = sample_curve(&model, 0.0, hi, CURVE_STEPS)?
        .into_iter()
        .map(|(x, y)| vec![num(x), num(y)])
        .collect();
    output::write_csv(
        &dir.join(file.replace(".json", "_curve.csv")),
        stamp,
        &["x", "y_hat"],
        &rows,
    )?;
    Ok(Ok(model))
}

pub fn run(cfg: &LoadedConfig) -> Result<FitSummary, CliError> {
    let out = cfg.out_dir();
    let dir = out.join("fit");
    let stamp = Stamp::new(&cfg.hash);
    let table = transport::load_scores(cfg)?;
    let mut summary = FitSummary::default();
    let mut pools: Pools = Vec::new();

    for study in &cfg.config.studies {
        let sim = similarity::read(&out, &study.source)?;
        let pairs = joined(study, &sim.records, &table);
        for predictor in cfg.predictors() {
            let points: Vec<(f64, f64)> = pairs.iter().map(|(r, y)| (predictor_value(r, predictor), *y)).collect();
            let key = (study.task.clone(), predictor);
            match pools.iter_mut().find(|(k, _)| *k == key) {
                Some((_, pool)) => pool.extend(&points),
                None => pools.push((key, points.clone())),
            }
            let file = model_file(study, predictor);
            match fit_and_write(&points, predictor, table.is_percentage(), &dir, &file, &stamp)? {
                Ok(model) => summary.fits.push(FitEntry {
                    system: study.system.clone(),
                    task: study.task.clone(),
                    source: study.source.clone(),
                    predictor,
                    pooled: false,
                    model_file: file,
                    model,
                }),
                Err(reason) => summary.skipped.push(SkippedFit {
                    system: study.system.clone(),
                    source: study.source.clone(),
                    predictor,
                    reason,
                }),
            }
        }
    }

    if cfg.config.fit.pooled {
        for ((task, predictor), points) in pools {
            let file = format!("pooled_{}_{}.json", slug(&task), predictor);
            match fit_and_write(&points, predictor, table.is_percentage(), &dir, &file, &stamp)? {
                Ok(model) => summary.fits.push(FitEntry {
                    system: POOLED.into(),
                    task,
                    source: POOLED.into(),
                    predictor,
                    pooled: true,
                    model_file: file,
                    model,
                }),
                Err(reason) => summary.skipped.push(SkippedFit {
                    system: POOLED.into(),
                    source: task,
                    predictor,
                    reason,
                }),
            }
        }
    }
    summary.skipped_count = summary.skipped.len();
    output::write_json(&summary_path(&out), &stamp, &summary)?;
    Ok(summary)
}

pub fn read(out: &Path) -> Result<FitSummary, CliError> {
    let path = summary_path(out);
    if !path.exists() {
        return Err(missing_stage("fit", "fitted models"));
    }
    Ok(output::read_json::<FitSummary>(&path)?.body)
}

/// Predicted score from a saved model file.
pub fn predict(model_path: &Path, x: f64) -> Result<f64, CliError> {
    let model = output::read_json::<FitModel>(model_path)?.body;
    Ok(regression::predict(&model, x)?)
}

pub fn render(summary: &FitSummary) -> String {
    let mut s = format!(
        "{:<24} {:<8} {:>10} {:>10} {:>10} {:>8} {:>3}\n",
        "study", "pred", "a", "b", "c", "mae", "n"
    );
    for f in &summary.fits {
        let m = &f.model;
        s.push_str(&format!(
            "{:<24} {:<8} {:>10.4} {:>10.4} {:>10.4} {:>8.3} {:>3}\n",
            format!("{} ({})", f.system, f.source),
            f.predictor,
            m.a,
            m.b,
            m.c,
            m.mae,
            m.n_points
        ));
    }
    for k in &summary.skipped {
        s.push_str(&format!(
            "skipped {} ({}) {}: {}\n",
            k.system, k.source, k.predictor, k.reason
        ));
    }
    s
}
