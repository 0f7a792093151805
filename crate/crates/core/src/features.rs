//! Domain profiles: vocabulary, term frequencies and a document embedding.
//!
//! The built-in embedding is a signed feature-hashing projection (see
//! [`crate::hash`] for the hash). Embeddings computed elsewhere can be loaded
//! with [`load_external_embeddings`] and attached to a profile instead.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::hash;

/// Feature → count. Ordered, so accumulation over it is deterministic.
pub type TermFreq = BTreeMap<String, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Tf,
    /// tf·idf, with idf taken over the two corpora being compared.
    TfIdf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One projection of the corpus-wide term frequencies.
    #[default]
    Corpus,
    /// Mean of per-document unit projections, renormalized.
    DocumentMean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub aggregation: Aggregation,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dimension: 300,
            seed: DEFAULT_SEED,
            weighting: Weighting::Tf,
            aggregation: Aggregation::Corpus,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        hash::json_hash(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    Builtin(EmbeddingConfig),
    External { path: String, file_hash: String },
}

/// Document frequencies over a pair of compared corpora.
#[derive(Debug, Clone, Copy)]
pub struct IdfContext<'a> {
    left: &'a TermFreq,
    right: &'a TermFreq,
}

impl<'a> IdfContext<'a> {
    pub fn pair(left: &'a TermFreq, right: &'a TermFreq) -> Self {
        Self { left, right }
    }

    /// `ln(2 / df) + 1`, where `df` is the number of the two corpora that
    /// contain the feature.
    pub fn idf(&self, feature: &str) -> f64 {
        let df = u8::from(self.left.contains_key(feature)) + u8::from(self.right.contains_key(feature));
        (2.0 / f64::from(df.max(1))).ln() + 1.0
    }
}

/// Projects term frequencies into a `dimension`-wide space by signed feature
/// hashing and returns the unit-norm result.
pub fn embed_builtin(term_freq: &TermFreq, emb: &EmbeddingConfig, idf: Option<IdfContext<'_>>) -> Result<Vec<f64>> {
    emb.validate()?;
    let mut v = vec![0.0; emb.dimension];
    let mut any_weight = false;
    for (feature, &count) in term_freq {
        let mut weight = count as f64;
        if let (Weighting::TfIdf, Some(ctx)) = (emb.weighting, idf) {
            weight *= ctx.idf(feature);
        }
        if weight == 0.0 {
            continue;
        }
        any_weight = true;
        let (index, sign) = hash::feature_slot(feature, emb.seed, emb.dimension);
        v[index] += sign * weight;
    }
    if !any_weight {
        return Err(Error::DegenerateEmbedding);
    }
    normalize(v)
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("vector component {bad}")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// The n-gram features of one token sequence, joined by single spaces.
pub fn ngrams(tokens: &[String], order: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(order.max(1)).map(|w| w.join(" "))
}

fn count_features<'a>(docs: impl Iterator<Item = &'a [String]>, order: usize) -> TermFreq {
    let mut tf = TermFreq::new();
    for tokens in docs {
        for gram in ngrams(tokens, order) {
            *tf.entry(gram).or_insert(0) += 1;
        }
    }
    tf
}

/// Extracted feature view of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainProfile {
    pub domain_id: String,
    pub term_freq: TermFreq,
    pub embedding: Vec<f64>,
    pub embedding_source: EmbeddingSource,
    /// Hash of the tokenizer and embedding settings the profile was built with.
    pub config_hash: String,
    pub tokenizer_hash: String,
}

impl DomainProfile {
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.term_freq.keys().map(String::as_str)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.term_freq.len()
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.term_freq.contains_key(feature)
    }

    pub fn feature_total(&self) -> u64 {
        self.term_freq.values().sum()
    }

    /// Replaces the embedding with an externally computed vector for this
    /// domain.
    pub fn with_external(mut self, ext: &ExternalEmbeddings) -> Result<Self> {
        let v = ext
            .vectors
            .get(&self.domain_id)
            .ok_or_else(|| Error::MissingDomain(self.domain_id.clone()))?;
        self.embedding = v.clone();
        self.embedding_source = EmbeddingSource::External {
            path: ext.path.clone(),
            file_hash: ext.file_hash.clone(),
        };
        self.config_hash = hash::json_hash(&(&self.tokenizer_hash, "external", &ext.file_hash));
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn build_profile(corpus: &Corpus, emb: &EmbeddingConfig) -> Result<DomainProfile> {
    emb.validate()?;
    let order = corpus.tokenizer().ngram_order;
    let term_freq = count_features(corpus.documents().iter().map(|d| d.tokens()), order);
    if term_freq.is_empty() {
        return Err(Error::NoFeatures);
    }
    let embedding = match emb.aggregation {
        Aggregation::Corpus => embed_builtin(&term_freq, emb, None)?,
        Aggregation::DocumentMean => {
            let mut sum = vec![0.0; emb.dimension];
            for doc in corpus.documents() {
                let tf = count_features(std::iter::once(doc.tokens()), order);
                if tf.is_empty() {
                    continue;
                }
                // Documents whose features cancel out contribute nothing.
                if let Ok(v) = embed_builtin(&tf, emb, None) {
                    sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
                }
            }
            normalize(sum)?
        }
    };
    let tokenizer_hash = corpus.tokenizer().config_hash();
    Ok(DomainProfile {
        domain_id: corpus.domain_id().to_owned(),
        config_hash: hash::json_hash(&(&tokenizer_hash, emb)),
        tokenizer_hash,
        term_freq,
        embedding,
        embedding_source: EmbeddingSource::Builtin(emb.clone()),
    })
}

/// Externally supplied unit vectors keyed by domain id.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    pub path: String,
    pub file_hash: String,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl ExternalEmbeddings {
    pub fn dimension(&self) -> usize {
        self.vectors.values().next().map_or(0, Vec::len)
    }
}

/// Loads embeddings from JSON (`{"domain": [..], ..}`) or, for `.csv` paths,
/// CSV with header `domain_id,v0,..,v{d-1}`. Vectors are validated and
/// normalized.
pub fn load_external_embeddings(path: impl AsRef<Path>, expected_domains: &[&str]) -> Result<ExternalEmbeddings> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let raw = if is_csv {
        read_csv_vectors(&bytes[..])?
    } else {
        read_json_vectors(&bytes[..])?
    };
    let vectors = validate_vectors(raw, expected_domains)?;
    Ok(ExternalEmbeddings {
        path: path.display().to_string(),
        file_hash: hash::content_hash(&bytes),
        vectors,
    })
}

pub fn read_json_vectors<R: Read>(input: R) -> Result<BTreeMap<String, Vec<f64>>> {
    Ok(serde_json::from_reader(input)?)
}

pub fn read_csv_vectors<R: Read>(input: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(Error::Config(
            "embedding CSV needs domain_id and at least one component".into(),
        ));
    }
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let id = record.get(0).unwrap_or_default().to_owned();
        let values = record
            .iter()
            .skip(1)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    message: format!("`{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(id, values);
    }
    Ok(out)
}

/// Checks presence, equal dimension and finiteness, then normalizes.
pub fn validate_vectors(
    raw: BTreeMap<String, Vec<f64>>,
    expected_domains: &[&str],
) -> Result<BTreeMap<String, Vec<f64>>> {
    if let Some(missing) = expected_domains.iter().find(|d| !raw.contains_key(**d)) {
        return Err(Error::MissingDomain((*missing).to_owned()));
    }
    let mut expected_dim = None;
    let mut out = BTreeMap::new();
    for (domain, v) in raw {
        if v.is_empty() {
            return Err(Error::EmptyVector);
        }
        match expected_dim {
            None => expected_dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::RaggedDimensions {
                    domain,
                    expected: d,
                    found: v.len(),
                })
            }
            _ => {}
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("embedding for `{domain}`")));
        }
        out.insert(domain, normalize(v)?);
    }
    Ok(out)
}
