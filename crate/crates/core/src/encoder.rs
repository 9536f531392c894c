//! Deterministic board embeddings and external embedding import.
//!
//! The built-in encoder concatenates three blocks before l2 normalisation:
//! the 256 cells as +/-1, the 30 CA++ subscores, and 12 summary statistics
//! of the seed. External corpora come in as JSON lines
//! `{"id": ..., "vector": [...]}`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ca::{Board, SEED_SIDE};
use crate::error::{Error, Result};
use crate::score::{self, CaPlusPlusScore, FeatureVector};

pub const CELL_DIMS: usize = SEED_SIDE * SEED_SIDE;
pub const SUMMARY_DIMS: usize = 12;
/// Output dimension of [`BoardEncoder`].
pub const BOARD_DIMS: usize = CELL_DIMS + FeatureVector::LEN + SUMMARY_DIMS;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit length; zero vectors are left untouched.
    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= norm);
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-block multipliers applied before normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoardEncoder {
    pub cell_scale: f64,
    pub feature_scale: f64,
    pub summary_scale: f64,
}

impl Default for BoardEncoder {
    fn default() -> Self {
        BoardEncoder {
            cell_scale: 1.0,
            feature_scale: 1.0,
            summary_scale: 1.0,
        }
    }
}

impl BoardEncoder {
    pub fn dims(&self) -> usize {
        BOARD_DIMS
    }

    /// Skips the CA++ simulation when the feature block is scaled to zero.
    pub fn encode(&self, b: &Board) -> Embedding {
        if self.feature_scale == 0.0 {
            return self.encode_with(b, &FeatureVector([0.0; FeatureVector::LEN]));
        }
        self.encode_scored(b).0
    }

    /// Embedding together with the CA++ score computed on the way.
    pub fn encode_scored(&self, b: &Board) -> (Embedding, CaPlusPlusScore) {
        let capp = score::capp_score(b);
        (self.encode_with(b, &capp.features()), capp)
    }

    /// Embedding from precomputed CA++ features.
    pub fn encode_with(&self, b: &Board, features: &FeatureVector) -> Embedding {
        assert_eq!(b.side(), SEED_SIDE, "the board encoder expects 16x16 seeds");
        let mut v = Vec::with_capacity(BOARD_DIMS);
        for r in 0..SEED_SIDE {
            for c in 0..SEED_SIDE {
                v.push(if b.get(r, c) { self.cell_scale } else { -self.cell_scale });
            }
        }
        v.extend(features.0.iter().map(|f| f * self.feature_scale));
        v.extend(summary_stats(b).iter().map(|s| s * self.summary_scale));
        let mut e = Embedding(v);
        e.normalize();
        e
    }
}

/// live density; row/col density variance; left-right, top-bottom and
/// transpose symmetry; component count at t=0 over n^2/4 (capped at 1);
/// border-cell density; quadrant densities (NW, NE, SW, SE).
pub fn summary_stats(b: &Board) -> [f64; SUMMARY_DIMS] {
    let n = b.side();
    let nf = n as f64;
    let cells = nf * nf;
    let density = b.live_count() as f64 / cells;

    let row_d: Vec<f64> = (0..n)
        .map(|r| (0..n).filter(|&c| b.get(r, c)).count() as f64 / nf)
        .collect();
    let col_d: Vec<f64> = (0..n)
        .map(|c| (0..n).filter(|&r| b.get(r, c)).count() as f64 / nf)
        .collect();
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };

    let agree = |f: &dyn Fn(usize, usize) -> (usize, usize)| {
        let mut same = 0usize;
        for r in 0..n {
            for c in 0..n {
                let (r2, c2) = f(r, c);
                if b.get(r, c) == b.get(r2, c2) {
                    same += 1;
                }
            }
        }
        same as f64 / cells
    };
    let sym_lr = agree(&|r, c| (r, n - 1 - c));
    let sym_tb = agree(&|r, c| (n - 1 - r, c));
    let sym_diag = agree(&|r, c| (c, r));

    let comps = (score::component_count(b) as f64 / (cells / 4.0)).min(1.0);

    let mut edge_live = 0usize;
    let mut edge_cells = 0usize;
    for r in 0..n {
        for c in 0..n {
            if r == 0 || c == 0 || r == n - 1 || c == n - 1 {
                edge_cells += 1;
                edge_live += b.get(r, c) as usize;
            }
        }
    }

    let h = n / 2;
    let quad = |r0: usize, c0: usize| {
        let mut live = 0usize;
        for r in r0..r0 + h {
            for c in c0..c0 + h {
                live += b.get(r, c) as usize;
            }
        }
        live as f64 / (h * h) as f64
    };

    [
        density,
        var(&row_d),
        var(&col_d),
        sym_lr,
        sym_tb,
        sym_diag,
        comps,
        edge_live as f64 / edge_cells as f64,
        quad(0, 0),
        quad(0, h),
        quad(h, 0),
        quad(h, h),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSource {
    BuiltinBoardEncoder,
    ExternalImport,
}

/// `N x D` embeddings with unique ids, rows l2-normalised.
#[derive(Debug, Clone)]
pub struct EmbeddingCorpus {
    pub ids: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub source: CorpusSource,
}

impl EmbeddingCorpus {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    /// Assemble a corpus from rows. Rows are used as given (not normalised).
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>], source: CorpusSource) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if ids.len() != rows.len() {
            return Err(Error::Config(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        let mut seen = HashSet::new();
        for (id, row) in ids.iter().zip(rows) {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let matrix = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(EmbeddingCorpus { ids, matrix, source })
    }

    /// Encode boards with the built-in encoder.
    pub fn from_boards(encoder: &BoardEncoder, items: &[(String, Board)], exec: crate::exec::Exec) -> Result<Self> {
        let rows: Vec<Vec<f64>> = exec.map(items, |(_, b)| encoder.encode(b).0);
        let ids = items.iter().map(|(id, _)| id.clone()).collect();
        EmbeddingCorpus::from_rows(ids, &rows, CorpusSource::BuiltinBoardEncoder)
    }
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Parse JSON-lines embeddings; dimension is taken from the first record.
/// Blank lines are skipped. Rows are l2-normalised on import.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingCorpus> {
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = rows.first() {
            if rec.vector.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: rec.vector.len(),
                });
            }
        } else if rec.vector.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty vector".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        let mut e = Embedding(rec.vector);
        if e.norm() == 0.0 || !e.norm().is_finite() {
            return Err(Error::ZeroVector(rec.id));
        }
        e.normalize();
        ids.push(rec.id);
        rows.push(e.0);
    }
    EmbeddingCorpus::from_rows(ids, &rows, CorpusSource::ExternalImport)
}

pub fn import_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_unit_norm() {
        let enc = BoardEncoder::default();
        let mut b = Board::empty(16);
        b.set(3, 4, true);
        b.set(3, 5, true);
        b.set(3, 6, true);
        let e = enc.encode(&b);
        assert_eq!(e.dim(), 298);
        assert!((e.norm() - 1.0).abs() < 1e-9);
        assert_eq!(enc.encode(&b), e);
    }

    #[test]
    fn dead_board_cell_block_is_constant() {
        let e = BoardEncoder::default().encode(&Board::empty(16));
        let first = e.0[0];
        assert!(first < 0.0);
        assert!(e.0[..CELL_DIMS].iter().all(|&v| v == first));
    }

    #[test]
    fn single_flip_changes_embedding() {
        let enc = BoardEncoder::default();
        let a = Board::empty(16);
        let mut b = a.clone();
        b.set(9, 2, true);
        let (ea, eb) = (enc.encode(&a), enc.encode(&b));
        let d: f64 = ea.0.iter().zip(&eb.0).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(d > 0.0);
    }

    #[test]
    fn summary_of_symmetric_board() {
        let s = summary_stats(&Board::full(16));
        assert_eq!(s[0], 1.0);
        assert_eq!(&s[3..6], &[1.0, 1.0, 1.0]);
        assert_eq!(s[6], 1.0 / 64.0);
        assert_eq!(s[7], 1.0);
    }

    #[test]
    fn import_normalises_rows() {
        let text = r#"{"id":"a","vector":[2,0,0,0]}
{"id":"b","vector":[0,1,0,0]}
{"id":"c","vector":[0,0,3,4]}
"#;
        let c = parse_embeddings(text).unwrap();
        assert_eq!((c.len(), c.dim()), (3, 4));
        assert_eq!(c.row(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert!((c.row(2)[3] - 0.8).abs() < 1e-15);
        assert_eq!(c.source, CorpusSource::ExternalImport);
    }

    #[test]
    fn import_errors() {
        let wrong_dim = "{\"id\":\"a\",\"vector\":[1,0]}\n{\"id\":\"b\",\"vector\":[1]}\n";
        assert!(matches!(parse_embeddings(wrong_dim), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        let bad = "{\"id\":\"a\",\"vector\":[1,0]}\n\nnot json\n";
        assert!(matches!(parse_embeddings(bad), Err(Error::Parse { line: 3, .. })));
        let dup = "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}\n";
        assert!(matches!(parse_embeddings(dup), Err(Error::DuplicateId(_))));
        let zero = "{\"id\":\"z\",\"vector\":[0,0]}\n";
        assert!(matches!(parse_embeddings(zero), Err(Error::ZeroVector(_))));
    }
}
