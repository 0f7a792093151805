//! Similarity measures between a source and a target domain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{embed_builtin, DomainProfile, EmbeddingSource, IdfContext, Weighting};
use crate::hash;

/// Proportion of target feature types that never occur in the source:
/// `1 - |V_target ∩ V_source| / |V_target|`.
pub fn lexical_difference(source: &DomainProfile, target: &DomainProfile) -> Result<f64> {
    let total = target.vocabulary_size();
    if total == 0 {
        return Err(Error::EmptyVocabulary);
    }
    let shared = target.vocabulary().filter(|f| source.contains(f)).count();
    Ok(1.0 - shared as f64 / total as f64)
}

/// [`lexical_difference`] over bare vocabularies.
pub fn lexical_difference_sets<T: Ord>(source: &BTreeSet<T>, target: &BTreeSet<T>) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let shared = target.intersection(source).count();
    Ok(1.0 - shared as f64 / target.len() as f64)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyVector);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector component".into()));
    }
    Ok(())
}

/// `1 - u·v` for unit vectors, clamped to `[0, 2]`. Results within 1e-12 of
/// zero are reported as exactly zero.
pub fn cosine_distance(source: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(source, target)?;
    let dot: f64 = source.iter().zip(target).map(|(a, b)| a * b).sum();
    let d = (1.0 - dot).clamp(0.0, 2.0);
    Ok(if d.abs() < 1e-12 { 0.0 } else { d })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// KL(target ‖ source).
    #[default]
    Forward,
    /// KL(source ‖ target).
    Reverse,
}

/// How a real vector becomes a probability distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conversion {
    /// `(v_k - min(v) + ε) / Σ_j (v_j - min(v) + ε)`.
    #[default]
    ShiftNormalize,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlSettings {
    pub epsilon: f64,
    pub direction: KlDirection,
    pub conversion: Conversion,
}

impl Default for KlSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            direction: KlDirection::Forward,
            conversion: Conversion::ShiftNormalize,
        }
    }
}

impl KlSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "KL epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

pub fn to_distribution(v: &[f64], epsilon: f64, conversion: Conversion) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector component".into()));
    }
    let masses: Vec<f64> = match conversion {
        Conversion::ShiftNormalize => {
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            v.iter().map(|x| x - min + epsilon).collect()
        }
        Conversion::Softmax => {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v.iter().map(|x| (x - max).exp()).collect()
        }
    };
    let total: f64 = masses.iter().sum();
    Ok(masses.into_iter().map(|m| m / total).collect())
}

/// KL divergence between the distributions derived from two vectors.
///
/// With [`KlDirection::Forward`] this is `Σ q_k ln(q_k / p_k)` where `q`
/// comes from `target` and `p` from `source`.
pub fn kl_divergence(source: &[f64], target: &[f64], settings: &KlSettings) -> Result<f64> {
    check_pair(source, target)?;
    settings.validate()?;
    let p = to_distribution(source, settings.epsilon, settings.conversion)?;
    let q = to_distribution(target, settings.epsilon, settings.conversion)?;
    let (from, to) = match settings.direction {
        KlDirection::Forward => (&q, &p),
        KlDirection::Reverse => (&p, &q),
    };
    let kl = relative_entropy(from, to);
    if kl.is_nan() {
        return Err(Error::Numerical("KL divergence is NaN".into()));
    }
    // Rounding can leave a tiny negative sum for near-identical inputs.
    Ok(kl.max(0.0))
}

/// `Σ q_k ln(q_k / p_k)` over two probability vectors; zero-mass `q_k` terms
/// contribute nothing.
pub fn relative_entropy(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    #[serde(rename = "source")]
    pub source_id: String,
    #[serde(rename = "target")]
    pub target_id: String,
    #[serde(rename = "lexical")]
    pub lexical_difference: f64,
    #[serde(rename = "cosine")]
    pub cosine_distance: f64,
    #[serde(rename = "kl")]
    pub kl_divergence: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySettings {
    pub kl: KlSettings,
    /// Emit a source-vs-source row first, unless the source is already one of
    /// the targets.
    pub include_self: bool,
}

/// Embeddings to compare for a pair. Built-in tf·idf embeddings depend on the
/// pair, so they are recomputed here.
fn pair_embeddings(source: &DomainProfile, target: &DomainProfile) -> Result<(Vec<f64>, Vec<f64>)> {
    match &source.embedding_source {
        EmbeddingSource::Builtin(emb) if emb.weighting == Weighting::TfIdf => {
            let ctx = IdfContext::pair(&source.term_freq, &target.term_freq);
            Ok((
                embed_builtin(&source.term_freq, emb, Some(ctx))?,
                embed_builtin(&target.term_freq, emb, Some(ctx))?,
            ))
        }
        _ => Ok((source.embedding.clone(), target.embedding.clone())),
    }
}

pub fn compare(
    source: &DomainProfile,
    target: &DomainProfile,
    settings: &SimilaritySettings,
) -> Result<SimilarityRecord> {
    if source.config_hash != target.config_hash {
        return Err(Error::IncomparableProfiles {
            left: source.domain_id.clone(),
            right: target.domain_id.clone(),
        });
    }
    let (s, t) = pair_embeddings(source, target)?;
    Ok(SimilarityRecord {
        source_id: source.domain_id.clone(),
        target_id: target.domain_id.clone(),
        lexical_difference: lexical_difference(source, target)?,
        cosine_distance: cosine_distance(&s, &t)?,
        kl_divergence: kl_divergence(&s, &t, &settings.kl)?,
        config_hash: hash::json_hash(&(&source.config_hash, &settings.kl)),
    })
}

/// One record per target, in input order.
pub fn similarity_table(
    source: &DomainProfile,
    targets: &[&DomainProfile],
    settings: &SimilaritySettings,
) -> Result<Vec<SimilarityRecord>> {
    settings.kl.validate()?;
    let mut rows = Vec::with_capacity(targets.len() + 1);
    if settings.include_self && !targets.iter().any(|t| t.domain_id == source.domain_id) {
        rows.push(compare(source, source, settings)?);
    }
    for target in targets {
        rows.push(compare(source, target, settings)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, CorpusFormat, Document, TokenizerConfig};
    use crate::features::{build_profile, EmbeddingConfig};

    fn profile(id: &str, tokens: &[&str], emb: &EmbeddingConfig) -> DomainProfile {
        let doc = Document::new(tokens.iter().map(|s| s.to_string()).collect(), 0);
        let c = Corpus::new(id, TokenizerConfig::default(), vec![doc], CorpusFormat::Plaintext).unwrap();
        build_profile(&c, emb).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lexical_examples() {
        assert_eq!(
            lexical_difference_sets(&set(&["a", "b"]), &set(&["a", "b"])).unwrap(),
            0.0
        );
        assert_eq!(lexical_difference_sets(&set(&["a", "b"]), &set(&["c"])).unwrap(), 1.0);
        assert_eq!(
            lexical_difference_sets(&set(&["a", "b", "c"]), &set(&["b", "c", "d", "e"])).unwrap(),
            0.5
        );
        assert!(matches!(
            lexical_difference_sets(&set(&["a"]), &set(&[])),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn lexical_is_asymmetric() {
        let emb = EmbeddingConfig::default();
        let a = profile("a", &["a"], &emb);
        let ab = profile("ab", &["a", "b"], &emb);
        assert_eq!(lexical_difference(&a, &ab).unwrap(), 0.5);
        assert_eq!(lexical_difference(&ab, &a).unwrap(), 0.0);
    }

    #[test]
    fn cosine_examples() {
        let v = [0.6, 0.8];
        assert_eq!(cosine_distance(&v, &v).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&v, &[-0.6, -0.8]).unwrap(), 2.0);
        assert!(matches!(
            cosine_distance(&v, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cosine_distance(&v, &[f64::NAN, 1.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn kl_two_point_oracle() {
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1), by hand: 0.510825623766
        let expected = 0.510_825_623_766;
        let direct = relative_entropy(&[0.5, 0.5], &[0.9, 0.1]);
        assert!((direct - expected).abs() < 1e-12, "{direct}");

        // Shift-normalize of [9, 1, 0] is ≈[0.9, 0.1, 0] and of [1, 1, 0] is
        // ≈[0.5, 0.5, 0]; the ε-mass third component adds ~1e-9.
        let kl = kl_divergence(&[9.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &KlSettings::default()).unwrap();
        assert!((kl - expected).abs() < 1e-7, "{kl}");
    }

    #[test]
    fn kl_identity_and_direction() {
        let settings = KlSettings::default();
        let v = [0.3, -0.2, 0.9];
        assert_eq!(kl_divergence(&v, &v, &settings).unwrap(), 0.0);
        let u = [0.1, 0.5, -0.4];
        let fwd = kl_divergence(&u, &v, &settings).unwrap();
        let rev = kl_divergence(
            &u,
            &v,
            &KlSettings {
                direction: KlDirection::Reverse,
                ..settings
            },
        )
        .unwrap();
        let swapped = kl_divergence(&v, &u, &settings).unwrap();
        assert_eq!(rev, swapped);
        assert!(fwd > 0.0 && rev > 0.0);
    }

    #[test]
    fn kl_errors() {
        let s = KlSettings::default();
        assert!(matches!(kl_divergence(&[], &[], &s), Err(Error::EmptyVector)));
        assert!(matches!(
            kl_divergence(&[1.0], &[1.0, 2.0], &s),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = KlSettings { epsilon: 0.0, ..s };
        assert!(matches!(kl_divergence(&[1.0], &[1.0], &bad), Err(Error::Config(_))));
    }

    #[test]
    fn softmax_conversion() {
        let d = to_distribution(&[0.0, 0.0], 1e-9, Conversion::Softmax).unwrap();
        assert_eq!(d, vec![0.5, 0.5]);
        let s = KlSettings {
            conversion: Conversion::Softmax,
            ..Default::default()
        };
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0], &s).unwrap() > 0.0);
    }

    #[test]
    fn table_rows_and_self() {
        let emb = EmbeddingConfig::default();
        let src = profile("src", &["a", "b", "c"], &emb);
        let t1 = profile("t1", &["a", "x"], &emb);
        let t2 = profile("t2", &["b"], &emb);
        let t3 = profile("t3", &["q", "r"], &emb);
        let settings = SimilaritySettings::default();

        let rows = similarity_table(&src, &[&src], &settings).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(
            (
                rows[0].lexical_difference,
                rows[0].cosine_distance,
                rows[0].kl_divergence
            ),
            (0.0, 0.0, 0.0)
        );

        let rows = similarity_table(&src, &[&t1, &t2, &t3], &settings).unwrap();
        let ids: Vec<_> = rows.iter().map(|r| r.target_id.as_str()).collect();
        assert_eq!(ids, ["t1", "t2", "t3"]);
        assert_eq!(rows[0].lexical_difference, 0.5);
        assert_eq!(rows[2].lexical_difference, 1.0);

        let with_self = SimilaritySettings {
            include_self: true,
            ..settings
        };
        let rows = similarity_table(&src, &[&t1], &with_self).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].target_id, "src");
    }

    #[test]
    fn incomparable_profiles_rejected() {
        let src = profile("src", &["a"], &EmbeddingConfig::default());
        let other = profile(
            "t",
            &["a"],
            &EmbeddingConfig {
                seed: 7,
                ..Default::default()
            },
        );
        let err = similarity_table(&src, &[&other], &SimilaritySettings::default()).unwrap_err();
        assert!(err.to_string().starts_with("incomparable profiles"));
    }

    #[test]
    fn tfidf_pair_embeddings() {
        let emb = EmbeddingConfig {
            weighting: Weighting::TfIdf,
            ..Default::default()
        };
        let src = profile("src", &["a", "b", "c", "c"], &emb);
        let tgt = profile("tgt", &["a", "d"], &emb);
        let rec = compare(&src, &tgt, &SimilaritySettings::default()).unwrap();
        let tf_cos = cosine_distance(&src.embedding, &tgt.embedding).unwrap();
        assert!(rec.cosine_distance.is_finite());
        // idf up-weights the unshared features, pushing the pair further apart.
        assert!(rec.cosine_distance >= tf_cos - 1e-12);
        let self_rec = compare(&src, &src, &SimilaritySettings::default()).unwrap();
        assert_eq!(self_rec.cosine_distance, 0.0);
    }
}
