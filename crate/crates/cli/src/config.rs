//! Run configuration: one TOML file plus command-line overrides.
//!
//! ```toml
//! metric = "F1"
//! scores = "scores.csv"            # CSV (system,task,dataset,split,score) or JSON
//! out = "out"
//! # external_embeddings = "emb.json"
//!
//! [tokenizer]                      # optional, defaults shown
//! lowercase = true
//! split_mode = "unicode_word"      # or "whitespace"
//! ngram_order = 1
//! strip_punctuation = true
//!
//! [embedding]                      # optional, defaults shown
//! dimension = 300
//! seed = 42
//! weighting = "tf"                 # or "tf_idf"
//! aggregation = "corpus"           # or "document_mean"
//!
//! [kl]
//! epsilon = 1e-9
//! direction = "forward"            # KL(target ‖ source); "reverse" swaps
//!
//! [transport]
//! bias_corrected = false
//!
//! [fit]
//! pooled = false                   # extra per-task fit over all studies
//!
//! [[corpus]]
//! id = "conll/train"               # dataset/split; joins corpora to scores
//! path = "corpora/conll_train.conll"
//! format = "conll"                 # conll | jsonl | plaintext | interchange
//!
//! [[study]]
//! system = "Stanford"
//! task = "ner"
//! source = "conll/train"
//! targets = ["wiki", "wnut/train"] # transport targets
//! compare = ["conll/train", "conll/dev"] # similarity targets, defaults to `targets`
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transportability::corpus::{CorpusFormat, PlaintextUnit};
use transportability::{EmbeddingConfig, KlDirection, KlSettings, Predictor, ScoreKey, TokenizerConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub id: String,
    pub path: PathBuf,
    pub format: CorpusFormat,
    /// JSON-lines text fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
    #[serde(default)]
    pub unit: PlaintextUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub system: String,
    pub task: String,
    pub source: String,
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<Vec<String>>,
}

impl StudySpec {
    pub fn compare_targets(&self) -> &[String] {
        self.compare.as_deref().unwrap_or(&self.targets)
    }

    pub fn source_key(&self) -> Result<ScoreKey, CliError> {
        self.source.parse().map_err(CliError::from)
    }

    pub fn target_keys(&self) -> Result<Vec<ScoreKey>, CliError> {
        self.targets.iter().map(|t| t.parse().map_err(CliError::from)).collect()
    }

    /// File-name stem for this study's outputs.
    pub fn slug(&self) -> String {
        slug(&format!("{}-{}", self.system, self.source))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    #[serde(default)]
    pub bias_corrected: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Also fit one curve per task over every study's points.
    #[serde(default)]
    pub pooled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_embeddings: Option<PathBuf>,
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub kl: KlSettings,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub fit: FitSection,
    /// Predictors to fit; all three when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictors: Vec<Predictor>,
    #[serde(default, rename = "corpus")]
    pub corpora: Vec<CorpusSpec>,
    #[serde(default, rename = "study")]
    pub studies: Vec<StudySpec>,
}

fn default_metric() -> String {
    "F1".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub source: Option<String>,
    pub targets: Option<Vec<String>>,
    pub predictor: Option<Predictor>,
    pub kl_direction: Option<KlDirection>,
    pub kl_epsilon: Option<f64>,
    pub bias_corrected: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A validated configuration with paths resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out)
    }

    pub fn predictors(&self) -> Vec<Predictor> {
        if self.config.predictors.is_empty() {
            Predictor::ALL.to_vec()
        } else {
            self.config.predictors.clone()
        }
    }

    pub fn corpus(&self, id: &str) -> Option<&CorpusSpec> {
        self.config.corpora.iter().find(|c| c.id == id)
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    from_config(config, base_dir, overrides)
}

pub fn from_config(mut config: RunConfig, base_dir: PathBuf, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    apply(&mut config, overrides)?;
    validate(&config, &base_dir)?;
    let hash = config_hash(&config);
    Ok(LoadedConfig { config, base_dir, hash })
}

fn apply(config: &mut RunConfig, o: &Overrides) -> Result<(), CliError> {
    if let Some(source) = &o.source {
        config.studies.retain(|s| &s.source == source);
        if config.studies.is_empty() {
            return Err(CliError::usage(format!("no study has source `{source}`")));
        }
    }
    if let Some(targets) = &o.targets {
        for s in &mut config.studies {
            s.targets = targets.clone();
            s.compare = None;
        }
    }
    if let Some(p) = o.predictor {
        config.predictors = vec![p];
    }
    if let Some(d) = o.kl_direction {
        config.kl.direction = d;
    }
    if let Some(e) = o.kl_epsilon {
        config.kl.epsilon = e;
    }
    if o.bias_corrected {
        config.transport.bias_corrected = true;
    }
    if let Some(seed) = o.seed {
        config.embedding.seed = seed;
    }
    if let Some(out) = &o.out {
        config.out = out.clone();
    }
    Ok(())
}

fn validate(config: &RunConfig, base: &Path) -> Result<(), CliError> {
    let exists = |p: &Path| {
        if p.is_absolute() {
            p.exists()
        } else {
            base.join(p).exists()
        }
    };
    config.tokenizer.validate()?;
    config.embedding.validate()?;
    config.kl.validate()?;

    let mut ids = BTreeSet::new();
    for c in &config.corpora {
        if !ids.insert(c.id.as_str()) {
            return Err(CliError::usage(format!("duplicate corpus id `{}`", c.id)));
        }
        if !exists(&c.path) {
            return Err(CliError::usage(format!(
                "corpus `{}`: path {} does not exist",
                c.id,
                c.path.display()
            )));
        }
    }
    for p in config.scores.iter().chain(&config.external_embeddings) {
        if !exists(p) {
            return Err(CliError::usage(format!("path {} does not exist", p.display())));
        }
    }
    for s in &config.studies {
        if s.targets.is_empty() {
            return Err(CliError::usage(format!("study `{}`: empty target list", s.system)));
        }
        s.source_key()?;
        s.target_keys()?;
        for t in s.compare_targets() {
            t.parse::<ScoreKey>()?;
        }
    }
    Ok(())
}

/// Hash of everything that affects outputs. The output directory is left out
/// so the same run written to two places stamps identically.
pub fn config_hash(config: &RunConfig) -> String {
    let mut hashed = config.clone();
    hashed.out = PathBuf::new();
    transportability::hash::json_hash(&hashed)
}

/// Lowercase ASCII alphanumerics, everything else collapsed to `-`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
metric = "F1"

[[study]]
system = "A"
task = "ner"
source = "conll/train"
targets = ["wiki", "wnut/dev"]
"#;

    fn parse(text: &str) -> RunConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(MINIMAL);
        assert_eq!(c.tokenizer, TokenizerConfig::default());
        assert_eq!(c.embedding, EmbeddingConfig::default());
        assert_eq!(c.kl, KlSettings::default());
        assert!(!c.transport.bias_corrected);
        assert_eq!(c.studies[0].compare_targets(), ["wiki", "wnut/dev"]);
    }

    #[test]
    fn overrides_change_hash_but_out_does_not() {
        let base = from_config(parse(MINIMAL), PathBuf::new(), &Overrides::default()).unwrap();
        let moved = from_config(
            parse(MINIMAL),
            PathBuf::new(),
            &Overrides {
                out: Some("elsewhere".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(base.hash, moved.hash);
        let seeded = from_config(
            parse(MINIMAL),
            PathBuf::new(),
            &Overrides {
                seed: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(base.hash, seeded.hash);
        assert_eq!(seeded.config.embedding.seed, 7);
    }

    #[test]
    fn empty_targets_is_usage_error() {
        let err = from_config(
            parse(MINIMAL),
            PathBuf::new(),
            &Overrides {
                targets: Some(vec![]),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(err.code, 1);
    }

    #[test]
    fn missing_path_and_duplicate_ids() {
        let text = format!("{MINIMAL}\n[[corpus]]\nid = \"x\"\npath = \"/definitely/not/here\"\nformat = \"conll\"\n");
        assert_eq!(
            from_config(parse(&text), PathBuf::new(), &Overrides::default())
                .unwrap_err()
                .code,
            1
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Stanford-conll/train"), "stanford-conll-train");
        assert_eq!(slug("BERT (SNLI)"), "bert-snli");
    }
}
