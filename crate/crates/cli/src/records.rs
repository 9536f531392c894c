use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = concat!("osearch ", env!("CARGO_PKG_VERSION"));
pub const RECORDS_SCHEMA: &str = "osearch.records/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Provenance embedded at the top of every output file.
#[derive(Debug, Clone)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl Meta {
    /// Hash of the effective configuration plus the digests of its input
    /// files. Inputs are keyed by file name so relocated reruns agree.
    pub fn new(command: &str, config: &impl Serialize, inputs: &BTreeMap<String, String>, seeds: Vec<u64>) -> Self {
        let mut inputs: Vec<(&str, &str)> = inputs
            .iter()
            .map(|(k, v)| (Path::new(k).file_name().and_then(|n| n.to_str()).unwrap_or(k), v.as_str()))
            .collect();
        inputs.sort_unstable();
        let canonical = json!({ "command": command, "config": config, "inputs": inputs });
        Meta {
            command: command.to_string(),
            config_hash: sha256_hex(canonical.to_string().as_bytes()),
            seeds,
        }
    }

    pub fn header(&self) -> Value {
        json!({
            "kind": "header",
            "schema": RECORDS_SCHEMA,
            "command": self.command,
            "config_hash": self.config_hash,
            "code_version": CODE_VERSION,
            "compressor": osearch::score::COMPRESSOR,
            "seeds": self.seeds,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Meta {
        Meta {
            seeds: vec![seed],
            ..self.clone()
        }
    }
}

pub fn jsonl<T: Serialize>(meta: &Meta, records: &[T]) -> Result<String> {
    let mut out = meta.header().to_string();
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, meta: &Meta, records: &[T]) -> Result<()> {
    write(path, &jsonl(meta, records)?)
}

/// CSV with a leading `#` comment line carrying the header object.
pub fn write_csv(path: &Path, meta: &Meta, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    write(path, &format!("# {}\n{body}", meta.header()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Non-header JSON objects of a line-delimited file.
pub fn read_records(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if v.get("kind").and_then(Value::as_str) == Some("header") {
            continue;
        }
        out.push(v);
    }
    Ok(out)
}
