use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use osearch::ca::Board;

/// A seed file that failed to parse.
#[derive(Debug)]
pub struct Rejected {
    pub id: String,
    pub reason: String,
}

/// Expand directories to their `*.txt` files (sorted by name).
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn seed_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub type Loaded = (Vec<(String, Board)>, Vec<Rejected>);

/// Read every seed file; unreadable or malformed files are returned
/// separately.
pub fn load_seeds(paths: &[PathBuf]) -> Result<Loaded> {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for path in expand(paths)? {
        let id = seed_id(&path);
        match fs::read_to_string(&path) {
            Ok(text) => match Board::parse_seed(&text) {
                Ok(b) => ok.push((id, b)),
                Err(e) => bad.push(Rejected { id, reason: e.to_string() }),
            },
            Err(e) => bad.push(Rejected { id, reason: e.to_string() }),
        }
    }
    Ok((ok, bad))
}

/// Like [`load_seeds`] but any rejected file is an error.
pub fn load_seeds_strict(paths: &[PathBuf]) -> Result<Vec<(String, Board)>> {
    let (ok, bad) = load_seeds(paths)?;
    if let Some(r) = bad.first() {
        bail!("seed `{}` is invalid: {}", r.id, r.reason);
    }
    if ok.is_empty() {
        bail!("no seed files found");
    }
    Ok(ok)
}
