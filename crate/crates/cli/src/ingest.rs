use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transportability::corpus::{self, CorpusFormat, CorpusInterchange};
use transportability::features::{self, ExternalEmbeddings};
use transportability::hash;
use transportability::{Corpus, DomainProfile};

use crate::config::{slug, CorpusSpec, LoadedConfig};
use crate::output::{self, Stamp};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub domain_id: String,
    /// Hash of the corpus bytes and how they are parsed.
    pub corpus_hash: String,
    pub tokenizer_hash: String,
    pub embedding_hash: String,
    pub corpus_file: String,
    pub profile_file: String,
    pub documents: usize,
    pub tokens: usize,
    pub skipped_records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, domain_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.domain_id == domain_id)
    }
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub built: Vec<String>,
    pub cache_hits: Vec<String>,
    pub warnings: Vec<String>,
    pub failures: Vec<(String, CliError)>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join("ingest").join("manifest.json")
}

pub fn read_manifest(out: &Path) -> Result<Option<Manifest>, CliError> {
    let path = manifest_path(out);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(output::read_json::<Manifest>(&path)?.body))
}

pub fn load_profile(out: &Path, manifest: &Manifest, domain_id: &str) -> Result<DomainProfile, CliError> {
    let entry = manifest
        .get(domain_id)
        .ok_or_else(|| CliError::data(format!("missing profile for `{domain_id}`; run `ingest`")))?;
    Ok(output::read_json::<DomainProfile>(&out.join("ingest").join(&entry.profile_file))?.body)
}

fn corpus_hash(spec: &CorpusSpec, bytes: &[u8]) -> String {
    hash::json_hash(&(hash::content_hash(bytes), spec.format, &spec.fields, spec.unit))
}

fn parse(spec: &CorpusSpec, path: &Path, cfg: &LoadedConfig, bytes: &[u8]) -> Result<(Corpus, usize), CliError> {
    let tok = &cfg.config.tokenizer;
    let corpus = match spec.format {
        CorpusFormat::Conll => (corpus::parse_conll(&spec.id, bytes, tok)?, 0),
        CorpusFormat::Jsonl => {
            let fields: Vec<&str> = spec.fields.iter().map(String::as_str).collect();
            let parsed = corpus::parse_jsonl_pairs(&spec.id, bytes, &fields, tok)?;
            (parsed.corpus, parsed.skipped)
        }
        CorpusFormat::Plaintext => (corpus::parse_plaintext(&spec.id, bytes, tok, spec.unit)?, 0),
        CorpusFormat::Interchange => {
            let ix: CorpusInterchange =
                serde_json::from_slice(bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            if ix.tokenizer_config != *tok {
                return Err(CliError::usage(format!(
                    "{}: interchange corpus was tokenized with different settings",
                    path.display()
                )));
            }
            let mut c = Corpus::from_interchange(ix)?;
            if c.domain_id() != spec.id {
                c = Corpus::new(
                    &spec.id,
                    c.tokenizer().clone(),
                    c.documents().to_vec(),
                    CorpusFormat::Interchange,
                )?;
            }
            (c, 0)
        }
    };
    Ok((corpus.0.with_source(spec.path.display().to_string()), corpus.1))
}

/// Parses every configured corpus and builds its profile, reusing cached
/// outputs whose inputs are unchanged. A failing corpus does not stop the
/// others.
pub fn run(cfg: &LoadedConfig) -> Result<IngestOutcome, CliError> {
    let out = cfg.out_dir();
    let stamp = Stamp::new(&cfg.hash);
    let old = read_manifest(&out)?.unwrap_or_default();
    let tokenizer_hash = cfg.config.tokenizer.config_hash();

    let external: Option<ExternalEmbeddings> = match &cfg.config.external_embeddings {
        Some(p) => {
            let ids: Vec<&str> = cfg.config.corpora.iter().map(|c| c.id.as_str()).collect();
            Some(features::load_external_embeddings(cfg.resolve(p), &ids)?)
        }
        None => None,
    };
    let embedding_hash = match &external {
        Some(ext) => format!("external:{}", ext.file_hash),
        None => cfg.config.embedding.config_hash(),
    };

    let mut outcome = IngestOutcome::default();
    let mut manifest = Manifest::default();
    for spec in &cfg.config.corpora {
        let path = cfg.resolve(&spec.path);
        let result = (|| -> Result<ManifestEntry, CliError> {
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let chash = corpus_hash(spec, &bytes);
            let name = slug(&spec.id);
            let corpus_file = format!("corpora/{name}.json");
            let profile_file = format!("profiles/{name}.json");

            if let Some(prev) = old.get(&spec.id) {
                let files_exist = out.join("ingest").join(&prev.corpus_file).exists()
                    && out.join("ingest").join(&prev.profile_file).exists();
                if files_exist
                    && prev.corpus_hash == chash
                    && prev.tokenizer_hash == tokenizer_hash
                    && prev.embedding_hash == embedding_hash
                {
                    outcome.cache_hits.push(spec.id.clone());
                    return Ok(prev.clone());
                }
            }

            let (corpus, skipped) = parse(spec, &path, cfg, &bytes)?;
            if skipped > 0 {
                outcome
                    .warnings
                    .push(format!("{}: skipped {skipped} record(s) without text fields", spec.id));
            }
            let mut profile = features::build_profile(&corpus, &cfg.config.embedding)?;
            if let Some(ext) = &external {
                profile = profile.with_external(ext)?;
            }
            output::write_json(&out.join("ingest").join(&corpus_file), &stamp, &corpus.to_interchange())?;
            output::write_json(&out.join("ingest").join(&profile_file), &stamp, &profile)?;
            outcome.built.push(spec.id.clone());
            Ok(ManifestEntry {
                domain_id: spec.id.clone(),
                corpus_hash: chash,
                tokenizer_hash: tokenizer_hash.clone(),
                embedding_hash: embedding_hash.clone(),
                corpus_file,
                profile_file,
                documents: corpus.documents().len(),
                tokens: corpus.token_count(),
                skipped_records: skipped,
            })
        })();
        match result {
            Ok(entry) => manifest.entries.push(entry),
            Err(e) => {
                let e = CliError {
                    code: e.code,
                    message: format!("{}: {}", path.display(), e.message),
                };
                if let Some(prev) = old.get(&spec.id) {
                    manifest.entries.push(prev.clone());
                }
                outcome.failures.push((spec.id.clone(), e));
            }
        }
    }
    output::write_json(&manifest_path(&out), &stamp, &manifest)?;
    Ok(outcome)
}

/// Reads a corpus straight from an interchange file written by `ingest`.
pub fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let reader = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let ix: CorpusInterchange =
        serde_json::from_reader(reader).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(Corpus::from_interchange(ix)?)
}
