//! Corpus ingestion.
//!
//! Three source formats are understood: CoNLL-style column files, JSON-lines
//! sentence pairs and plain text. All of them produce a [`Corpus`], which can
//! be written to and read from a small JSON interchange format.

use std::io::Read;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};
use crate::hash;

/// How raw text is cut into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Split on whitespace only.
    Whitespace,
    /// Split on Unicode word boundaries (UAX #29): whitespace and
    /// punctuation both separate tokens.
    UnicodeWord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub split_mode: SplitMode,
    /// Order of the n-gram features extracted from each document.
    pub ngram_order: usize,
    pub strip_punctuation: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            split_mode: SplitMode::UnicodeWord,
            ngram_order: 1,
            strip_punctuation: true,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_order == 0 {
            return Err(Error::Config("ngram_order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        hash::json_hash(self)
    }

    /// Tokenizes free text.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self.split_mode {
            SplitMode::Whitespace => {
                for piece in text.split_whitespace() {
                    let piece = if self.strip_punctuation {
                        piece.trim_matches(|c: char| !c.is_alphanumeric())
                    } else {
                        piece
                    };
                    self.push_token(piece, &mut out);
                }
            }
            SplitMode::UnicodeWord => {
                for piece in text.split_word_bounds() {
                    if piece.chars().all(char::is_whitespace) {
                        continue;
                    }
                    if self.strip_punctuation && is_punctuation(piece) {
                        continue;
                    }
                    self.push_token(piece, &mut out);
                }
            }
        }
        out
    }

    /// Normalizes a token that the source format already delimits.
    ///
    /// Pre-tokenized input is never re-split; only case folding and the
    /// punctuation filter apply.
    fn normalize_token(&self, token: &str) -> Option<String> {
        if token.is_empty() || (self.strip_punctuation && is_punctuation(token)) {
            return None;
        }
        Some(self.fold(token))
    }

    fn push_token(&self, piece: &str, out: &mut Vec<String>) {
        if !piece.is_empty() {
            out.push(self.fold(piece));
        }
    }

    fn fold(&self, token: &str) -> String {
        if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_owned()
        }
    }
}

/// A token with no alphanumeric character.
fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    tokens: Vec<String>,
    raw_length: usize,
}

impl Document {
    /// Builds a document, dropping empty tokens.
    pub fn new(tokens: Vec<String>, raw_length: usize) -> Self {
        let tokens = tokens.into_iter().filter(|t| !t.is_empty()).collect();
        Self { tokens, raw_length }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Character count of the source text this document came from.
    pub fn raw_length(&self) -> usize {
        self.raw_length
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Conll,
    Jsonl,
    Plaintext,
    Interchange,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conll" => Ok(Self::Conll),
            "jsonl" => Ok(Self::Jsonl),
            "plaintext" | "text" => Ok(Self::Plaintext),
            "interchange" => Ok(Self::Interchange),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub format: CorpusFormat,
    pub tokenizer_hash: String,
}

/// A tokenized document collection belonging to one domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    domain_id: String,
    tokenizer: TokenizerConfig,
    documents: Vec<Document>,
    token_count: usize,
    provenance: Provenance,
}

impl Corpus {
    /// Assembles a corpus from already-tokenized documents. Empty documents
    /// are dropped; a corpus with no remaining documents is an error.
    pub fn new(
        domain_id: impl Into<String>,
        tokenizer: TokenizerConfig,
        documents: Vec<Document>,
        format: CorpusFormat,
    ) -> Result<Self> {
        tokenizer.validate()?;
        let documents: Vec<Document> = documents.into_iter().filter(|d| !d.is_empty()).collect();
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let token_count = documents.iter().map(Document::len).sum();
        let provenance = Provenance {
            source: "-".into(),
            format,
            tokenizer_hash: tokenizer.config_hash(),
        };
        Ok(Self {
            domain_id: domain_id.into(),
            tokenizer,
            documents,
            token_count,
            provenance,
        })
    }

    /// Records the path the corpus was read from.
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.provenance.source = source.into();
        self
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn to_interchange(&self) -> CorpusInterchange {
        CorpusInterchange {
            domain_id: self.domain_id.clone(),
            tokenizer_config: self.tokenizer.clone(),
            documents: self.documents.iter().map(|d| d.tokens.clone()).collect(),
            raw_lengths: Some(self.documents.iter().map(|d| d.raw_length).collect()),
            provenance: Some(self.provenance.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_interchange())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let interchange: CorpusInterchange = serde_json::from_str(text)?;
        Self::from_interchange(interchange)
    }

    pub fn from_interchange(ix: CorpusInterchange) -> Result<Self> {
        if let Some(lengths) = &ix.raw_lengths {
            if lengths.len() != ix.documents.len() {
                return Err(Error::Config(format!(
                    "raw_lengths has {} entries for {} documents",
                    lengths.len(),
                    ix.documents.len()
                )));
            }
        }
        if ix.documents.iter().flatten().any(String::is_empty) {
            return Err(Error::Config("interchange document contains an empty token".into()));
        }
        let documents = ix
            .documents
            .into_iter()
            .enumerate()
            .map(|(i, tokens)| {
                let raw = match &ix.raw_lengths {
                    Some(lengths) => lengths[i],
                    None => tokens.iter().map(|t| t.chars().count()).sum(),
                };
                Document::new(tokens, raw)
            })
            .collect();
        let mut corpus = Self::new(ix.domain_id, ix.tokenizer_config, documents, CorpusFormat::Interchange)?;
        if let Some(p) = ix.provenance {
            corpus.provenance = Provenance {
                tokenizer_hash: corpus.provenance.tokenizer_hash,
                ..p
            };
        }
        Ok(corpus)
    }
}

/// Serialized form of a [`Corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInterchange {
    pub domain_id: String,
    pub tokenizer_config: TokenizerConfig,
    pub documents: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_lengths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn read_utf8<R: Read>(mut input: R) -> Result<String> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Parses a CoNLL-style column file.
///
/// The first column of each non-blank line is the token; any further columns
/// are ignored. Lines starting with `-DOCSTART-` open a new document; without
/// them the whole file is one document. Tokens are used as delimited by the
/// file and are not re-split.
pub fn parse_conll<R: Read>(domain_id: &str, input: R, config: &TokenizerConfig) -> Result<Corpus> {
    config.validate()?;
    let text = read_utf8(input)?;
    let mut documents = Vec::new();
    let mut tokens = Vec::new();
    let mut raw = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            if !tokens.is_empty() {
                documents.push(Document::new(std::mem::take(&mut tokens), raw));
            }
            raw = 0;
            continue;
        }
        let first = if line.contains('\t') {
            line.split('\t').next().unwrap_or("").trim()
        } else {
            trimmed.split_whitespace().next().unwrap_or("")
        };
        if first.is_empty() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "missing token column".into(),
            });
        }
        raw += first.chars().count();
        if let Some(token) = config.normalize_token(first) {
            tokens.push(token);
        }
    }
    if !tokens.is_empty() {
        documents.push(Document::new(tokens, raw));
    }
    Corpus::new(domain_id, config.clone(), documents, CorpusFormat::Conll)
}

/// Text fields extracted from JSON-lines records when none are configured.
///
/// Covers both the `sentence1`/`sentence2` naming of the SNLI family and the
/// `premise`/`hypothesis` naming used elsewhere.
pub const DEFAULT_PAIR_FIELDS: [&str; 4] = ["sentence1", "sentence2", "premise", "hypothesis"];

/// Result of [`parse_jsonl_pairs`].
#[derive(Debug, Clone)]
pub struct JsonlParse {
    pub corpus: Corpus,
    /// Records that carried none of the requested fields.
    pub skipped: usize,
}

/// Parses JSON-lines records into one document per record, concatenating the
/// tokens of the named string fields in `fields` order.
pub fn parse_jsonl_pairs<R: Read>(
    domain_id: &str,
    input: R,
    fields: &[&str],
    config: &TokenizerConfig,
) -> Result<JsonlParse> {
    config.validate()?;
    let text = read_utf8(input)?;
    let fields: &[&str] = if fields.is_empty() {
        &DEFAULT_PAIR_FIELDS
    } else {
        fields
    };
    let mut documents = Vec::new();
    let mut skipped = 0;

    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let obj = record.as_object().ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "expected a JSON object".into(),
        })?;
        let texts: Vec<&str> = fields
            .iter()
            .filter_map(|f| obj.get(*f).and_then(serde_json::Value::as_str))
            .collect();
        if texts.is_empty() {
            skipped += 1;
            continue;
        }
        let raw = texts.iter().map(|t| t.chars().count()).sum();
        let tokens = texts.iter().flat_map(|t| config.tokenize(t)).collect();
        documents.push(Document::new(tokens, raw));
    }
    let corpus = Corpus::new(domain_id, config.clone(), documents, CorpusFormat::Jsonl)?;
    Ok(JsonlParse { corpus, skipped })
}

/// Document unit for plain-text input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaintextUnit {
    #[default]
    Line,
    /// Blank-line separated paragraphs.
    Paragraph,
}

pub fn parse_plaintext<R: Read>(
    domain_id: &str,
    input: R,
    config: &TokenizerConfig,
    unit: PlaintextUnit,
) -> Result<Corpus> {
    config.validate()?;
    let text = read_utf8(input)?;
    let mut documents = Vec::new();
    match unit {
        PlaintextUnit::Line => {
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                documents.push(Document::new(config.tokenize(line), line.chars().count()));
            }
        }
        PlaintextUnit::Paragraph => {
            let mut para: Vec<&str> = Vec::new();
            let flush = |para: &mut Vec<&str>, documents: &mut Vec<Document>| {
                if !para.is_empty() {
                    let joined = para.join("\n");
                    documents.push(Document::new(config.tokenize(&joined), joined.chars().count()));
                    para.clear();
                }
            };
            for line in text.lines() {
                if line.trim().is_empty() {
                    flush(&mut para, &mut documents);
                } else {
                    para.push(line);
                }
            }
            flush(&mut para, &mut documents);
        }
    }
    Corpus::new(domain_id, config.clone(), documents, CorpusFormat::Plaintext)
}
