//! Synthetic inputs for the benchmarks.

use transportability::corpus::{Corpus, CorpusFormat, Document};
use transportability::TokenizerConfig;

/// SplitMix64 step, enough to scatter tokens without pulling in an RNG.
fn next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A corpus of `docs` documents of `doc_len` tokens drawn from a vocabulary
/// of `vocab` types. Different `seed`s give overlapping but distinct domains.
pub fn synthetic_corpus(id: &str, docs: usize, doc_len: usize, vocab: u64, seed: u64) -> Corpus {
    let mut state = seed;
    let documents = (0..docs)
        .map(|_| {
            let tokens: Vec<String> = (0..doc_len)
                .map(|_| {
                    // Skewed towards low ids, roughly Zipf-like.
                    let r = next(&mut state) % vocab;
                    let r = r * (next(&mut state) % vocab) / vocab;
                    format!("w{r}")
                })
                .collect();
            Document::new(tokens, doc_len * 6)
        })
        .collect();
    Corpus::new(id, TokenizerConfig::default(), documents, CorpusFormat::Interchange).expect("non-empty")
}

/// Points on a noisy decaying curve.
pub fn decay_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut state = seed;
    (0..n)
        .map(|i| {
            let x = 3.0 * i as f64 / n as f64;
            let noise = (next(&mut state) % 1000) as f64 / 100.0 - 5.0;
            (x, 55.0 * (-1.1 * x).exp() + 35.0 + noise)
        })
        .collect()
}

/// Target scores for transport benchmarks.
pub fn scores(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| 20.0 + (next(&mut state) % 7000) as f64 / 100.0)
        .collect()
}
