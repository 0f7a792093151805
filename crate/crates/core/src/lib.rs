//! Transportability of NLP model performance across domains.
//!
//! The crate covers four steps:
//!
//! * [`corpus`]: read CoNLL, JSON-lines and plain-text corpora into a common
//!   tokenized form.
//! * [`features`] and [`divergence`]: turn corpora into domain profiles and
//!   compare a source domain with targets by lexical feature difference,
//!   embedding cosine distance and KL divergence.
//! * [`transport`]: from a table of scores, compute how much of a system's
//!   source-domain performance survives in each target (`τ_p`) and how much
//!   that varies between targets (`τ_var`).
//! * [`regression`]: fit a three-parameter decay curve from a similarity
//!   measure to the score, so performance on an unseen domain can be
//!   estimated from cheap corpus statistics.

pub mod corpus;
pub mod divergence;
pub mod error;
pub mod features;
pub mod hash;
pub mod regression;
pub mod transport;

pub use corpus::{Corpus, Document, SplitMode, TokenizerConfig};
pub use divergence::{KlDirection, KlSettings, SimilarityRecord, SimilaritySettings};
pub use error::{Error, ErrorCategory, Result};
pub use features::{DomainProfile, EmbeddingConfig, Weighting};
pub use regression::{FitModel, Predictor};
pub use transport::{ReportRequest, ScoreEntry, ScoreKey, ScoreTable, TransportOptions, TransportReport};

/// Version stamped into every generated artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
