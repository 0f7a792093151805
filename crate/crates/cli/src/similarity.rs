use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transportability::divergence::{similarity_table, SimilarityRecord, SimilaritySettings};

use crate::config::{slug, LoadedConfig};
use crate::output::{self, num, Stamp};
use crate::{ingest, missing_stage, CliError};

/// Similarity of every compared target to one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFile {
    pub source: String,
    pub records: Vec<SimilarityRecord>,
}

pub fn path_for(out: &Path, source: &str) -> PathBuf {
    out.join("similarity").join(format!("{}.json", slug(source)))
}

pub fn read(out: &Path, source: &str) -> Result<SimilarityFile, CliError> {
    let path = path_for(out, source);
    if !path.exists() {
        return Err(missing_stage("similarity", &format!("similarity table for `{source}`")));
    }
    Ok(output::read_json::<SimilarityFile>(&path)?.body)
}

/// Sources in study order, each with the union of its studies' compare
/// targets.
pub fn plan(cfg: &LoadedConfig) -> Vec<(String, Vec<String>)> {
    let mut plan: Vec<(String, Vec<String>)> = Vec::new();
    for study in &cfg.config.studies {
        let idx = match plan.iter().position(|(s, _)| *s == study.source) {
            Some(i) => i,
            None => {
                plan.push((study.source.clone(), Vec::new()));
                plan.len() - 1
            }
        };
        for t in study.compare_targets() {
            if !plan[idx].1.contains(t) {
                plan[idx].1.push(t.clone());
            }
        }
    }
    plan
}

pub fn run(cfg: &LoadedConfig) -> Result<Vec<SimilarityFile>, CliError> {
    let out = cfg.out_dir();
    let manifest = ingest::read_manifest(&out)?.ok_or_else(|| missing_stage("ingest", "corpus profiles"))?;
    let stamp = Stamp::new(&cfg.hash);
    let settings = SimilaritySettings {
        kl: cfg.config.kl,
        include_self: false,
    };

    let mut files = Vec::new();
    for (source, targets) in plan(cfg) {
        let src = ingest::load_profile(&out, &manifest, &source)?;
        let profiles = targets
            .iter()
            .map(|t| ingest::load_profile(&out, &manifest, t))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<_> = profiles.iter().collect();
        let records = similarity_table(&src, &refs, &settings)?;

        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                vec![
                    r.source_id.clone(),
                    r.target_id.clone(),
                    num(r.lexical_difference),
                    num(r.cosine_distance),
                    num(r.kl_divergence),
                ]
            })
            .collect();
        let json_path = path_for(&out, &source);
        output::write_csv(
            &json_path.with_extension("csv"),
            &stamp,
            &["source", "target", "lexical", "cosine", "kl"],
            &rows,
        )?;
        let file = SimilarityFile { source, records };
        output::write_json(&json_path, &stamp, &file)?;
        files.push(file);
    }
    Ok(files)
}

/// Plain-text table: one row per target.
pub fn render(file: &SimilarityFile) -> String {
    let w = file
        .records
        .iter()
        .map(|r| r.target_id.chars().count())
        .chain(["target".len()])
        .max()
        .unwrap_or(0);
    let mut s = format!("source: {}\n", file.source);
    s.push_str(&format!(
        "{:<w$}  {:>8}  {:>8}  {:>8}\n",
        "target", "lexical", "cosine", "kl"
    ));
    for r in &file.records {
        s.push_str(&format!(
            "{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            r.target_id, r.lexical_difference, r.cosine_distance, r.kl_divergence
        ));
    }
    s
}
