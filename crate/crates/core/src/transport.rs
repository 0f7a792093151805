//! Transportability of a system's performance from a source domain to a set
//! of target domains.
//!
//! For a system trained on a source domain, the transport ratio of a target
//! is `score(target) / score(source)`. The mean of those ratios summarizes how
//! much performance survives the move. Their coefficient of variation
//! (percent) summarizes how stable that is across targets.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(dataset, split)` pair, written `dataset/split`. A missing split is
/// written `-`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScoreKey {
    pub dataset: String,
    pub split: String,
}

impl ScoreKey {
    pub fn new(dataset: impl Into<String>, split: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            split: split.into(),
        }
    }
}

impl fmt::Display for ScoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.dataset, self.split)
    }
}

impl FromStr for ScoreKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (dataset, split) = s.rsplit_once('/').unwrap_or((s, "-"));
        if dataset.is_empty() || split.is_empty() {
            return Err(Error::Config(format!("invalid dataset/split key `{s}`")));
        }
        Ok(Self::new(dataset, split))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub system: String,
    pub task: String,
    pub dataset: String,
    pub split: String,
    pub score: f64,
}

impl ScoreEntry {
    pub fn key(&self) -> ScoreKey {
        ScoreKey::new(&self.dataset, &self.split)
    }

    fn label(&self) -> String {
        format!("({}, {}, {}/{})", self.system, self.task, self.dataset, self.split)
    }
}

/// Metrics whose scores are percentages in `[0, 100]`.
pub fn is_percentage_metric(metric: &str) -> bool {
    matches!(metric.to_ascii_lowercase().as_str(), "f1" | "accuracy")
}

/// Performance measurements keyed by (system, task, dataset, split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    metric_name: String,
    entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    pub fn new(metric_name: impl Into<String>, entries: Vec<ScoreEntry>) -> Result<Self> {
        let metric_name = metric_name.into();
        let percent = is_percentage_metric(&metric_name);
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.split.is_empty() {
                return Err(Error::Config(format!("empty split in {}", e.label())));
            }
            let reason = if !e.score.is_finite() {
                Some("not finite")
            } else if e.score < 0.0 {
                Some("negative")
            } else if percent && e.score > 100.0 {
                Some("above 100 for a percentage metric")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidScore {
                    key: e.label(),
                    score: e.score,
                    reason,
                });
            }
            if !seen.insert((&e.system, &e.task, &e.dataset, &e.split)) {
                return Err(Error::DuplicateScore(e.label()));
            }
        }
        Ok(Self { metric_name, entries })
    }

    /// Reads CSV with header `system,task,dataset,split,score`.
    pub fn from_csv<R: Read>(metric_name: &str, input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let entries = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ScoreEntry>, _>>()?;
        Self::new(metric_name, entries)
    }

    /// Reads `{"metric_name": .., "entries": [..]}`.
    pub fn from_json<R: Read>(input: R) -> Result<Self> {
        let raw: ScoreTable = serde_json::from_reader(input)?;
        Self::new(raw.metric_name, raw.entries)
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn is_percentage(&self) -> bool {
        is_percentage_metric(&self.metric_name)
    }

    pub fn get(&self, system: &str, task: &str, key: &ScoreKey) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.system == system && e.task == task && e.dataset == key.dataset && e.split == key.split)
            .map(|e| e.score)
    }

    pub fn score(&self, system: &str, task: &str, key: &ScoreKey) -> Result<f64> {
        self.get(system, task, key)
            .ok_or_else(|| Error::MissingKey(format!("({system}, {task}, {key})")))
    }

    /// Distinct systems in first-appearance order.
    pub fn systems(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.system.as_str()) {
                out.push(&e.system);
            }
        }
        out
    }

    /// Returns a copy with every score multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| ScoreEntry {
                score: e.score * factor,
                ..e.clone()
            })
            .collect();
        Self {
            metric_name: self.metric_name.clone(),
            entries,
        }
    }
}

/// Transport ratio of one target: `target / source`.
pub fn tau_p_pair(source_score: f64, target_score: f64) -> Result<f64> {
    if source_score.is_nan() || source_score <= 0.0 {
        return Err(Error::ZeroSource);
    }
    if !target_score.is_finite() || target_score < 0.0 || !source_score.is_finite() {
        return Err(Error::NonFinite(format!("score pair ({source_score}, {target_score})")));
    }
    Ok(target_score / source_score)
}

fn ratios(source_score: f64, target_scores: &[f64]) -> Result<Vec<f64>> {
    target_scores.iter().map(|&t| tau_p_pair(source_score, t)).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean transport ratio over the targets.
pub fn tau_p_mean(source_score: f64, target_scores: &[f64]) -> Result<f64> {
    if target_scores.is_empty() {
        return Err(Error::NoTargets);
    }
    Ok(mean(&ratios(source_score, target_scores)?))
}

/// Sample coefficient of variation of `ratios`, in percent.
pub fn coefficient_of_variation(ratios: &[f64]) -> Result<f64> {
    let n = ratios.len();
    if n < 2 {
        return Err(Error::TooFewTargets);
    }
    let m = mean(ratios);
    if m == 0.0 {
        return Err(Error::ZeroMean);
    }
    // The rounded mean of equal values can differ from them by an ulp.
    if ratios.iter().all(|r| *r == ratios[0]) {
        return Ok(0.0);
    }
    let ss: f64 = ratios.iter().map(|r| (r - m) * (r - m)).sum();
    Ok(100.0 * (ss / (n - 1) as f64).sqrt() / m)
}

/// Performance variation over the targets, in percent.
///
/// With `bias_corrected` the coefficient of variation is scaled by
/// `1 + 1/(4n)`.
pub fn tau_var(source_score: f64, target_scores: &[f64], bias_corrected: bool) -> Result<f64> {
    if target_scores.len() < 2 {
        return Err(Error::TooFewTargets);
    }
    let cv = coefficient_of_variation(&ratios(source_score, target_scores)?)?;
    Ok(if bias_corrected {
        (1.0 + 1.0 / (4.0 * target_scores.len() as f64)) * cv
    } else {
        cv
    })
}

/// One transport ratio over an arbitrary task–domain combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub task: String,
    pub dataset: String,
    pub metric: String,
    pub ratio: f64,
}

/// Coefficient of variation (percent) of transport ratios pooled across
/// tasks and domains. No bias term is applied.
pub fn tau_var_general(records: &[RatioRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::TooFewTargets);
    }
    let metric = &records[0].metric;
    if let Some(other) = records.iter().find(|r| &r.metric != metric) {
        return Err(Error::IncomparableMetrics(metric.clone(), other.metric.clone()));
    }
    if let Some(bad) = records.iter().find(|r| !r.ratio.is_finite()) {
        return Err(Error::NonFinite(format!("ratio for {}/{}", bad.task, bad.dataset)));
    }
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    coefficient_of_variation(&ratios)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub bias_corrected: bool,
}

/// What to put in a [`TransportReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub system: String,
    pub task: String,
    pub source: ScoreKey,
    pub targets: Vec<ScoreKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRatio {
    pub target: ScoreKey,
    pub score: f64,
    pub tau_p: f64,
}

/// Mean transport ratio over the targets drawn from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMean {
    pub dataset: String,
    pub n: usize,
    pub tau_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub system: String,
    pub task: String,
    pub metric: String,
    pub source_key: ScoreKey,
    pub source_score: f64,
    pub per_target: Vec<TargetRatio>,
    /// Per-dataset means, in first-appearance order of the targets.
    pub by_dataset: Vec<DatasetMean>,
    pub tau_p_mean: f64,
    /// Percent.
    pub tau_var: f64,
    pub bias_corrected: bool,
    pub n: usize,
}

pub fn build_report(
    table: &ScoreTable,
    request: &ReportRequest,
    options: &TransportOptions,
) -> Result<TransportReport> {
    if request.targets.is_empty() {
        return Err(Error::NoTargets);
    }
    let source_score = table.score(&request.system, &request.task, &request.source)?;
    let mut per_target = Vec::with_capacity(request.targets.len());
    for key in &request.targets {
        let score = table.score(&request.system, &request.task, key)?;
        per_target.push(TargetRatio {
            target: key.clone(),
            score,
            tau_p: tau_p_pair(source_score, score)?,
        });
    }
    let scores: Vec<f64> = per_target.iter().map(|t| t.score).collect();
    let tau_var = tau_var(source_score, &scores, options.bias_corrected)?;

    let mut by_dataset: Vec<DatasetMean> = Vec::new();
    for t in &per_target {
        match by_dataset.iter_mut().find(|g| g.dataset == t.target.dataset) {
            Some(g) => {
                g.tau_p += t.tau_p;
                g.n += 1;
            }
            None => by_dataset.push(DatasetMean {
                dataset: t.target.dataset.clone(),
                n: 1,
                tau_p: t.tau_p,
            }),
        }
    }
    for g in &mut by_dataset {
        g.tau_p /= g.n as f64;
    }

    let ratios: Vec<f64> = per_target.iter().map(|t| t.tau_p).collect();
    Ok(TransportReport {
        system: request.system.clone(),
        task: request.task.clone(),
        metric: table.metric_name().to_owned(),
        source_key: request.source.clone(),
        source_score,
        n: per_target.len(),
        tau_p_mean: mean(&ratios),
        tau_var,
        bias_corrected: options.bias_corrected,
        per_target,
        by_dataset,
    })
}

/// Renders reports side by side, one column per report: a τ_p row per target
/// dataset, the overall τ_p and τ_var.
pub fn render_reports(reports: &[TransportReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    for r in reports {
        for g in &r.by_dataset {
            if !datasets.contains(&g.dataset.as_str()) {
                datasets.push(&g.dataset);
            }
        }
    }
    let unique_systems = reports.iter().map(|r| &r.system).collect::<BTreeSet<_>>().len() == reports.len();
    let headers: Vec<String> = reports
        .iter()
        .map(|r| {
            if unique_systems {
                r.system.clone()
            } else {
                format!("{} ({})", r.system, r.source_key)
            }
        })
        .collect();

    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for d in &datasets {
        let cells = reports
            .iter()
            .map(|r| {
                r.by_dataset
                    .iter()
                    .find(|g| g.dataset == *d)
                    .map_or_else(|| "-".to_owned(), |g| format!("{:.3}", g.tau_p))
            })
            .collect();
        rows.push((format!("tau_p({d})"), cells));
    }
    rows.push((
        "tau_p(all)".into(),
        reports.iter().map(|r| format!("{:.3}", r.tau_p_mean)).collect(),
    ));
    rows.push((
        "tau_var".into(),
        reports.iter().map(|r| format!("{:.3}", r.tau_var)).collect(),
    ));

    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let col_w: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            rows.iter()
                .map(|(_, c)| c[i].len())
                .chain([h.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut out = String::new();
    out.push_str(&" ".repeat(label_w));
    for (h, w) in headers.iter().zip(&col_w) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for (label, cells) in &rows {
        out.push_str(&format!("{label:<label_w$}"));
        for (c, w) in cells.iter().zip(&col_w) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pair_examples() {
        assert!(close(tau_p_pair(98.69, 66.31).unwrap(), 0.6719, 5e-5));
        assert!(close(tau_p_pair(99.32, 52.14).unwrap(), 0.5250, 5e-5));
        assert_eq!(tau_p_pair(42.0, 42.0).unwrap(), 1.0);
        assert_eq!(
            tau_p_pair(0.0, 1.0).unwrap_err().to_string(),
            "undefined transport ratio (zero-performance source)"
        );
        assert!(matches!(tau_p_pair(-1.0, 1.0), Err(Error::ZeroSource)));
    }

    #[test]
    fn mean_examples() {
        // (51.63 + 53.59 + 47.11) / 3 / 98.69 = 0.514507
        assert!(close(tau_p_mean(98.69, &[51.63, 53.59, 47.11]).unwrap(), 0.5145, 5e-5));
        assert!(close(
            tau_p_mean(98.69, &[66.31, 51.63, 53.59, 47.11]).unwrap(),
            0.5539,
            5e-5
        ));
        assert_eq!(tau_p_mean(80.0, &[80.0]).unwrap(), 1.0);
        assert!(matches!(tau_p_mean(80.0, &[]), Err(Error::NoTargets)));
    }

    #[test]
    fn variation_examples() {
        let spacy = [52.14, 27.03, 32.23, 26.28];
        assert!(close(tau_var(99.32, &spacy, false).unwrap(), 35.17, 0.005));
        // 35.1714 * (1 + 1/16)
        assert!(close(tau_var(99.32, &spacy, true).unwrap(), 37.3696, 0.001));
        assert_eq!(tau_var(90.0, &[70.0, 70.0, 70.0], false).unwrap(), 0.0);
        let mnli = [77.13, 79.05, 79.31, 66.52, 67.79, 67.26];
        assert!(close(tau_var(97.78, &mnli, false).unwrap(), 8.58, 0.005));
        assert_eq!(
            tau_var(90.0, &[70.0], false).unwrap_err().to_string(),
            "variation undefined for fewer than 2 targets"
        );
        assert!(matches!(tau_var(90.0, &[0.0, 0.0], false), Err(Error::ZeroMean)));
    }

    fn rec(task: &str, ratio: f64) -> RatioRecord {
        RatioRecord {
            task: task.into(),
            dataset: "d".into(),
            metric: "F1".into(),
            ratio,
        }
    }

    #[test]
    fn general_variation() {
        assert_eq!(
            tau_var_general(&[rec("a", 0.7), rec("b", 0.7), rec("c", 0.7)]).unwrap(),
            0.0
        );
        // mean 0.75, sd sqrt(0.125) = 0.353553, cv = 47.1405
        let cv = tau_var_general(&[rec("a", 1.0), rec("b", 0.5)]).unwrap();
        assert!(close(cv, 47.1405, 1e-4), "{cv}");
        assert!(matches!(tau_var_general(&[rec("a", 1.0)]), Err(Error::TooFewTargets)));
        let mut mixed = rec("b", 0.5);
        mixed.metric = "accuracy".into();
        assert!(matches!(
            tau_var_general(&[rec("a", 1.0), mixed]),
            Err(Error::IncomparableMetrics(..))
        ));
    }

    #[test]
    fn general_reduces_to_single_task() {
        let scores = [66.31, 51.63, 53.59, 47.11];
        let records: Vec<_> = scores.iter().map(|s| rec("ner", s / 98.69)).collect();
        let a = tau_var_general(&records).unwrap();
        let b = tau_var(98.69, &scores, false).unwrap();
        assert!(close(a, b, 1e-12));
    }

    fn entry(system: &str, dataset: &str, split: &str, score: f64) -> ScoreEntry {
        ScoreEntry {
            system: system.into(),
            task: "ner".into(),
            dataset: dataset.into(),
            split: split.into(),
            score,
        }
    }

    #[test]
    fn table_validation() {
        let dup = vec![entry("s", "d", "train", 1.0), entry("s", "d", "train", 2.0)];
        assert!(matches!(ScoreTable::new("F1", dup), Err(Error::DuplicateScore(_))));
        assert!(matches!(
            ScoreTable::new("F1", vec![entry("s", "d", "t", 101.0)]),
            Err(Error::InvalidScore { .. })
        ));
        assert!(ScoreTable::new("bleu", vec![entry("s", "d", "t", 101.0)]).is_ok());
        assert!(matches!(
            ScoreTable::new("bleu", vec![entry("s", "d", "t", f64::NAN)]),
            Err(Error::InvalidScore { .. })
        ));
        assert!(matches!(
            ScoreTable::new("bleu", vec![entry("s", "d", "t", -1.0)]),
            Err(Error::InvalidScore { .. })
        ));
        assert!(matches!(
            ScoreTable::new("F1", vec![entry("s", "d", "", 1.0)]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_and_json_input() {
        let csv = "system,task,dataset,split,score\nA,ner,conll,train,90\nA,ner,wiki,-,60\n";
        let t = ScoreTable::from_csv("F1", csv.as_bytes()).unwrap();
        assert_eq!(t.score("A", "ner", &"wiki".parse().unwrap()).unwrap(), 60.0);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(ScoreTable::from_json(json.as_bytes()).unwrap(), t);
    }

    #[test]
    fn key_parsing() {
        assert_eq!("wnut/dev".parse::<ScoreKey>().unwrap(), ScoreKey::new("wnut", "dev"));
        assert_eq!("wiki".parse::<ScoreKey>().unwrap(), ScoreKey::new("wiki", "-"));
        assert!("/dev".parse::<ScoreKey>().is_err());
        assert_eq!(ScoreKey::new("a", "b").to_string(), "a/b");
    }

    #[test]
    fn report_errors() {
        let t = ScoreTable::new("F1", vec![entry("s", "conll", "train", 90.0)]).unwrap();
        let mut req = ReportRequest {
            system: "s".into(),
            task: "ner".into(),
            source: ScoreKey::new("conll", "train"),
            targets: vec![ScoreKey::new("conll", "train")],
        };
        // Source as its own sole target: τ_p = 1 but variation is undefined.
        assert_eq!(tau_p_mean(90.0, &[90.0]).unwrap(), 1.0);
        assert!(matches!(
            build_report(&t, &req, &Default::default()),
            Err(Error::TooFewTargets)
        ));
        req.targets = vec![ScoreKey::new("wiki", "-")];
        match build_report(&t, &req, &Default::default()).unwrap_err() {
            Error::MissingKey(k) => assert!(k.contains("wiki/-")),
            e => panic!("unexpected {e}"),
        }
        req.targets.clear();
        assert!(matches!(
            build_report(&t, &req, &Default::default()),
            Err(Error::NoTargets)
        ));
    }

    #[test]
    fn report_groups_and_render() {
        let t = ScoreTable::new(
            "F1",
            vec![
                entry("s", "src", "train", 100.0),
                entry("s", "a", "x", 80.0),
                entry("s", "b", "x", 60.0),
                entry("s", "b", "y", 40.0),
            ],
        )
        .unwrap();
        let req = ReportRequest {
            system: "s".into(),
            task: "ner".into(),
            source: ScoreKey::new("src", "train"),
            targets: vec![
                ScoreKey::new("a", "x"),
                ScoreKey::new("b", "x"),
                ScoreKey::new("b", "y"),
            ],
        };
        let r = build_report(&t, &req, &Default::default()).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.by_dataset.len(), 2);
        assert!(close(r.by_dataset[1].tau_p, 0.5, 1e-15));
        assert!(close(r.tau_p_mean, 0.6, 1e-15));
        let text = render_reports(&[r]);
        assert!(text.contains("tau_p(a)"));
        assert!(text.contains("0.500"));
        assert!(text.lines().last().unwrap().starts_with("tau_var"));
    }
}
