//! Transport measures and fits on the bundled published numbers.

#[path = "support/lattice.rs"]
mod lattice;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use transportability::regression::{fit, mean_absolute_error};
use transportability::transport::build_report;
use transportability::{Predictor, ReportRequest, ScoreKey, ScoreTable, TransportOptions, TransportReport};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn table(name: &str, metric: &str) -> ScoreTable {
    ScoreTable::from_csv(metric, File::open(fixture(name)).unwrap()).unwrap()
}

fn keys(list: &[&str]) -> Vec<ScoreKey> {
    list.iter().map(|k| k.parse().unwrap()).collect()
}

fn report(t: &ScoreTable, system: &str, task: &str, source: &str, targets: &[&str], bias: bool) -> TransportReport {
    let request = ReportRequest {
        system: system.into(),
        task: task.into(),
        source: source.parse().unwrap(),
        targets: keys(targets),
    };
    build_report(t, &request, &TransportOptions { bias_corrected: bias }).unwrap()
}

const NER_TARGETS: [&str; 4] = ["wiki", "wnut/train", "wnut/dev", "wnut/test"];

fn dataset_mean(r: &TransportReport, dataset: &str) -> f64 {
    r.by_dataset.iter().find(|g| g.dataset == dataset).unwrap().tau_p
}

#[test]
fn ner_transport_table() {
    let t = table("ner_scores.csv", "F1");
    // (system, wiki, wnut, all, var)
    let expected = [
        ("Stanford", 0.671, 0.514, 0.553, 15.05),
        ("SpaCy", 0.524, 0.287, 0.346, 35.17),
        ("ELMo", 0.794, 0.477, 0.556, 32.67),
    ];
    for (system, wiki, wnut, all, var) in expected {
        let r = report(&t, system, "ner", "conll/train", &NER_TARGETS, false);
        assert!((dataset_mean(&r, "wiki") - wiki).abs() <= 0.005, "{system} wiki");
        assert!((dataset_mean(&r, "wnut") - wnut).abs() <= 0.005, "{system} wnut");
        assert!((r.tau_p_mean - all).abs() <= 0.005, "{system} all");
        assert!((r.tau_var - var).abs() <= 0.1, "{system} var {}", r.tau_var);

        let corrected = report(&t, system, "ner", "conll/train", &NER_TARGETS, true);
        assert!(
            (corrected.tau_var - var).abs() > 0.1,
            "{system} corrected should not match"
        );
    }
}

#[test]
fn nli_transport_table() {
    let t = table("nli_scores.csv", "accuracy");
    let snli = ["snli/train", "snli/dev", "snli/test"];
    let mnli = ["multinli/train", "multinli/dev"];
    let sci = ["scitail/train", "scitail/dev", "scitail/test"];
    let cases = [
        (
            "BERT-SNLI",
            "snli/train",
            [&mnli[..], &sci[..]].concat(),
            0.646,
            15.2,
            0.2,
        ),
        (
            "BERT-MultiNLI",
            "multinli/train",
            [&snli[..], &sci[..]].concat(),
            0.744,
            8.58,
            0.1,
        ),
        (
            "BERT-SciTail",
            "scitail/train",
            [&snli[..], &mnli[..]].concat(),
            0.446,
            3.92,
            0.1,
        ),
    ];
    for (system, source, targets, tau_p, var, var_tol) in cases {
        let r = report(&t, system, "nli", source, &targets, false);
        assert!((r.tau_p_mean - tau_p).abs() <= 0.005, "{system} tau_p {}", r.tau_p_mean);
        assert!((r.tau_var - var).abs() <= var_tol, "{system} tau_var {}", r.tau_var);
    }
}

/// `system -> points`, in file order.
fn figure(name: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(File::open(fixture(name)).unwrap());
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        out.entry(rec[0].to_owned())
            .or_default()
            .push((rec[1].parse().unwrap(), rec[2].parse().unwrap()));
    }
    out
}

fn mean_fit_mae(name: &str, predictor: Predictor) -> f64 {
    let fig = figure(name);
    let maes: Vec<f64> = fig
        .values()
        .map(|pts| {
            let m = fit(pts, predictor).unwrap();
            assert!((mean_absolute_error(&m, pts).unwrap() - m.mae).abs() < 1e-9);
            m.mae
        })
        .collect();
    maes.iter().sum::<f64>() / maes.len() as f64
}

#[test]
fn figure_fits_within_band() {
    for (name, p) in [
        ("figure3_kl.csv", Predictor::Kl),
        ("figure3_cosine.csv", Predictor::Cosine),
        ("figure4_kl.csv", Predictor::Kl),
        ("figure4_cosine.csv", Predictor::Cosine),
    ] {
        let mae = mean_fit_mae(name, p);
        assert!(mae <= 6.0, "{name}: {mae}");
    }
}

#[test]
fn elmo_kl_fit_matches_lattice() {
    let pts = figure("figure3_kl.csv").remove("ELMo").unwrap();
    let m = fit(&pts, Predictor::Kl).unwrap();
    let best = lattice::search(&pts);
    assert!(m.sse <= best.sse * 1.0001, "fit {} lattice {}", m.sse, best.sse);
    assert!(
        (m.mae - best.mae(&pts)).abs() <= 0.1,
        "fit {} lattice {}",
        m.mae,
        best.mae(&pts)
    );
}
