//! Exemplar library over realised coordinates with exact nearest-neighbour
//! retrieval.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ca::Board;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::space::BoardSpace;
use crate::stats::{quantile, sq_dist};

/// Default Hamming-similarity threshold for near-duplicate detection.
pub const DUPLICATE_SIMILARITY: f64 = 0.98;

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub id: String,
    /// `None` for externally embedded items.
    pub item: Option<Board>,
    pub z: Vec<f64>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalBundle {
    pub near: [Exemplar; 2],
    pub contrast: Exemplar,
}

impl RetrievalBundle {
    pub fn items(&self) -> impl Iterator<Item = &Exemplar> {
        self.near.iter().chain(std::iter::once(&self.contrast))
    }
}

/// Outer quantile-band initial filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandFilter {
    /// Keep rows whose `|z_i|` reaches this per-axis quantile of `|z_i|` on
    /// at least one axis.
    pub quantile: f64,
}

/// Membership mask of the band filter over a set of coordinates.
///
/// A row is kept when some axis has `|z_i| >= Q_q(|z_.i|)` and `|z_i| > 0`;
/// a row sitting exactly at the origin of every axis is never in an outer
/// band.
pub fn band_mask(zs: &[Vec<f64>], filter: BandFilter) -> Vec<bool> {
    if zs.is_empty() {
        return Vec::new();
    }
    let d = zs[0].len();
    let thresholds: Vec<f64> = (0..d)
        .map(|a| {
            let col: Vec<f64> = zs.iter().map(|z| z[a].abs()).collect();
            quantile(&col, filter.quantile)
        })
        .collect();
    zs.iter()
        .map(|z| z.iter().zip(&thresholds).any(|(v, t)| v.abs() >= *t && v.abs() > 0.0))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExemplarRecord {
    id: String,
    seed: Option<String>,
    z: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Library {
    entries: Vec<Exemplar>,
    boards: HashSet<Board>,
    ids: HashSet<String>,
    growable: bool,
    rejected_duplicates: usize,
}

impl Library {
    /// Library over `entries`, optionally band-filtered.
    pub fn from_exemplars(entries: Vec<Exemplar>, filter: Option<BandFilter>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let d = entries[0].z.len();
        if let Some(e) = entries.iter().find(|e| e.z.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.z.len(),
            });
        }
        let entries = match filter {
            Some(f) => {
                let zs: Vec<Vec<f64>> = entries.iter().map(|e| e.z.clone()).collect();
                let mask = band_mask(&zs, f);
                let kept: Vec<Exemplar> = entries.into_iter().zip(mask).filter(|(_, m)| *m).map(|(e, _)| e).collect();
                if kept.is_empty() {
                    return Err(Error::EmptyAfterFilter);
                }
                kept
            }
            None => entries,
        };
        let mut lib = Library {
            entries: Vec::with_capacity(entries.len()),
            boards: HashSet::new(),
            ids: HashSet::new(),
            growable: true,
            rejected_duplicates: 0,
        };
        for e in entries {
            if !lib.ids.insert(e.id.clone()) {
                return Err(Error::DuplicateId(e.id));
            }
            if let Some(b) = &e.item {
                lib.boards.insert(b.clone());
            }
            lib.entries.push(e);
        }
        Ok(lib)
    }

    /// Evaluate every board under `space` and build the library.
    pub fn build(items: &[(String, Board)], space: &BoardSpace, filter: Option<BandFilter>, exec: Exec) -> Result<Self> {
        let evals = exec.map(items, |(_, b)| space.evaluate(b));
        let entries = items
            .iter()
            .zip(evals)
            .map(|((id, b), ev)| Exemplar {
                id: id.clone(),
                item: Some(b.clone()),
                z: ev.z.clone(),
                score: Some(ev.f()),
            })
            .collect();
        Library::from_exemplars(entries, filter)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn d_z(&self) -> usize {
        self.entries.first().map_or(0, |e| e.z.len())
    }

    pub fn entries(&self) -> &[Exemplar] {
        &self.entries
    }

    pub fn rejected_duplicates(&self) -> usize {
        self.rejected_duplicates
    }

    pub fn growable(&self) -> bool {
        self.growable
    }

    pub fn set_growable(&mut self, on: bool) {
        self.growable = on;
    }

    /// Indices of the `k` entries nearest to `q`, skipping `exclude`;
    /// ordered by distance then id.
    pub fn nearest(&self, q: &[f64], k: usize, exclude: &[usize]) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, e) in self.entries.iter().enumerate() {
            if exclude.contains(&i) {
                continue;
            }
            let d = sq_dist(q, &e.z);
            let pos = best.partition_point(|&(bd, bi)| {
                bd < d || (bd == d && self.entries[bi].id < e.id)
            });
            if pos < k {
                best.insert(pos, (d, i));
                best.truncate(k);
            }
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    /// Two entries nearest `z_star` plus the entry nearest `-z_star` among
    /// the rest.
    pub fn retrieve(&self, z_star: &[f64]) -> Result<RetrievalBundle> {
        if self.entries.len() < 3 {
            return Err(Error::LibraryTooSmall(self.entries.len()));
        }
        if z_star.len() != self.d_z() {
            return Err(Error::DimensionMismatch {
                expected: self.d_z(),
                got: z_star.len(),
            });
        }
        let near = self.nearest(z_star, 2, &[]);
        let neg: Vec<f64> = z_star.iter().map(|v| -v).collect();
        let contrast = self.nearest(&neg, 1, &near)[0];
        Ok(RetrievalBundle {
            near: [self.entries[near[0]].clone(), self.entries[near[1]].clone()],
            contrast: self.entries[contrast].clone(),
        })
    }

    /// Insert `e` unless growth is disabled or it duplicates a stored item
    /// or id. Returns whether it was inserted.
    pub fn grow(&mut self, e: Exemplar) -> bool {
        if !self.growable {
            return false;
        }
        if e.z.len() != self.d_z() {
            return false;
        }
        let dup_board = e.item.as_ref().is_some_and(|b| self.boards.contains(b));
        if dup_board || self.ids.contains(&e.id) {
            self.rejected_duplicates += 1;
            return false;
        }
        if let Some(b) = &e.item {
            self.boards.insert(b.clone());
        }
        self.ids.insert(e.id.clone());
        self.entries.push(e);
        true
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let rec = ExemplarRecord {
                id: e.id.clone(),
                seed: e.item.as_ref().map(Board::to_text),
                z: e.z.clone(),
                score: e.score,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serialises"));
            out.push('\n');
        }
        out
    }

    /// Parse library lines; blank lines and objects tagged
    /// `"kind": "header"` are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |m: String| Error::Parse { line: i + 1, message: m };
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            if value.get("kind").and_then(|k| k.as_str()) == Some("header") {
                continue;
            }
            let rec: ExemplarRecord = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
            let item = match rec.seed {
                Some(s) => Some(Board::parse_seed(&s).map_err(|e| parse_err(e.to_string()))?),
                None => None,
            };
            entries.push(Exemplar {
                id: rec.id,
                item,
                z: rec.z,
                score: rec.score,
            });
        }
        Library::from_exemplars(entries, None)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Library::from_jsonl(&text)
    }
}

/// Fraction of agreeing cells between two equal-sized boards.
pub fn hamming_similarity(a: &Board, b: &Board) -> f64 {
    1.0 - a.hamming(b) as f64 / a.cell_count() as f64
}

/// True when `candidate` is at least `threshold`-similar to any board in
/// the bundle.
pub fn near_duplicate(candidate: &Board, bundle: &RetrievalBundle, threshold: f64) -> bool {
    bundle
        .items()
        .filter_map(|e| e.item.as_ref())
        .filter(|b| b.side() == candidate.side())
        .any(|b| hamming_similarity(candidate, b) >= threshold)
}
