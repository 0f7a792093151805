//! Writing stamped artifacts and guarding the output directory.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Provenance stamp carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub tool_version: String,
}

impl Stamp {
    pub fn new(config_hash: &str) -> Self {
        Self {
            config_hash: config_hash.to_owned(),
            tool_version: transportability::TOOL_VERSION.to_owned(),
        }
    }

    pub fn text_header(&self) -> String {
        format!(
            "# config_hash={} tool_version={}\n",
            self.config_hash, self.tool_version
        )
    }
}

/// A JSON payload under `data`, with the stamp fields beside it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamped<T> {
    #[serde(flatten)]
    pub stamp: Stamp,
    #[serde(rename = "data")]
    pub body: T,
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

/// Writes `bytes` unless the file already holds exactly them. Returns whether
/// the file was written.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<bool, CliError> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(true)
}

pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, body: &T) -> Result<bool, CliError> {
    let value = Stamped {
        stamp: stamp.clone(),
        body,
    };
    let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| CliError::data(e.to_string()))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Stamped<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Writes CSV rows with the stamp appended as two trailing columns.
pub fn write_csv(path: &Path, stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> Result<bool, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let mut full_header: Vec<&str> = header.to_vec();
    full_header.extend(["config_hash", "tool_version"]);
    w.write_record(&full_header)
        .map_err(|e| CliError::data(e.to_string()))?;
    for row in rows {
        let mut record = row.clone();
        record.push(stamp.config_hash.clone());
        record.push(stamp.tool_version.clone());
        w.write_record(&record).map_err(|e| CliError::data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    write_bytes(path, &bytes)
}

pub fn write_text(path: &Path, stamp: &Stamp, body: &str) -> Result<bool, CliError> {
    let mut text = stamp.text_header();
    text.push_str(body);
    write_bytes(path, text.as_bytes())
}

/// Number formatting shared by CSV and text outputs: shortest round-trip.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Advisory lock on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let path = out_dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::usage(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                out_dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_lock_fails() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputLock::acquire(dir.path()).unwrap();
        assert_eq!(OutputLock::acquire(dir.path()).unwrap_err().code, 1);
        drop(first);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn unchanged_bytes_not_rewritten() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.json");
        let stamp = Stamp::new("abc");
        assert!(write_json(&p, &stamp, &serde_json::json!({"x": 1})).unwrap());
        assert!(!write_json(&p, &stamp, &serde_json::json!({"x": 1})).unwrap());
        let back: Stamped<serde_json::Value> = read_json(&p).unwrap();
        assert_eq!(back.stamp, stamp);
        assert_eq!(back.body["x"], 1);
    }

    #[test]
    fn csv_carries_stamp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &Stamp::new("h"), &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,b,config_hash,tool_version\r\n"));
        assert!(text.contains("1,\"x,y\",h,"));
    }
}
