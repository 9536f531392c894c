//! Frozen linear output space `z(x) = U^T (E(x) - mu)`.
//!
//! Fitting runs PCA to an intermediate dimension (optionally whitened),
//! picks `d_z` directions there (leading components, or an anchor axis plus
//! the leading directions of the anchor-deflated variance), maps them back
//! to encoder space, orthonormalises, and finally applies a Varimax (or
//! anchored Varimax) rotation inside the retained subspace. The rotation
//! leaves the projector `U U^T` unchanged.

mod diagnostics;
mod pca;
mod rotation;
mod select;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingCorpus;
use crate::error::{Error, Result};

pub use diagnostics::{diagnostics, hoyer, preference, Neighborhoods, PreferenceWeights, ZDiagnostics};
pub use pca::{corpus_mean, fit_pca, whitening_scales, PcaBasis, RankPolicy};
pub use rotation::{anchored_varimax, varimax, varimax_criterion, Rotation};
pub use select::{model_select, FitConfig, GridConfig, RankedConfig, SelectionConfig};

pub const ZMODEL_SCHEMA: &str = "osearch.zmodel/1";

/// Anchor projections shorter than this are rejected.
pub const ANCHOR_MIN_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSource {
    Pca,
    Anchor,
    AnchorResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub axis: usize,
    pub source: AxisSource,
    pub rotated: bool,
}

/// Directions chosen inside the intermediate space (columns, unit length).
#[derive(Debug, Clone)]
pub struct AxisChoice {
    pub directions: DMatrix<f64>,
    pub sources: Vec<AxisSource>,
}

/// Leading `d_z` intermediate coordinates.
pub fn choose_axes_plain(basis: &PcaBasis, d_z: usize) -> Result<AxisChoice> {
    let d_inter = basis.d_inter();
    if d_z == 0 || d_z > d_inter {
        return Err(Error::Config(format!("d_z = {d_z} must be in 1..={d_inter}")));
    }
    Ok(AxisChoice {
        directions: DMatrix::identity(d_inter, d_z),
        sources: vec![AxisSource::Pca; d_z],
    })
}

/// First axis toward the anchor mean, the rest maximise residual variance
/// orthogonal to it.
pub fn choose_axes_anchored(basis: &PcaBasis, anchor_mean: &[f64], d_z: usize) -> Result<AxisChoice> {
    let d_inter = basis.d_inter();
    if d_z == 0 || d_z > d_inter {
        return Err(Error::Config(format!("d_z = {d_z} must be in 1..={d_inter}")));
    }
    if anchor_mean.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: anchor_mean.len(),
        });
    }
    let a_dir = DVector::from_column_slice(anchor_mean) - &basis.mu;
    let raw = basis.components.tr_mul(&a_dir);
    if raw.norm() < ANCHOR_MIN_NORM {
        return Err(Error::DegenerateAnchor { norm: raw.norm() });
    }
    let proj = basis.to_intermediate(&a_dir);
    let w = &proj / proj.norm();

    // P Lambda P with P = I - w w^T
    let lambda = DMatrix::from_diagonal(&DVector::from_vec(basis.intermediate_variances()));
    let p = DMatrix::identity(d_inter, d_inter) - &w * w.transpose();
    let deflated = &p * lambda * &p;
    let (_, vectors) = pca::sorted_eigen(deflated);

    let mut dirs: Vec<DVector<f64>> = vec![w.clone()];
    for col in vectors.column_iter() {
        if dirs.len() == d_z {
            break;
        }
        let mut v: DVector<f64> = col.into_owned();
        for d in &dirs {
            v -= d * d.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            dirs.push(v / norm);
        }
    }
    let mut sources = vec![AxisSource::Anchor];
    sources.resize(d_z, AxisSource::AnchorResidual);
    Ok(AxisChoice {
        directions: DMatrix::from_columns(&dirs),
        sources,
    })
}

/// Modified Gram-Schmidt (two passes) over the columns, in order.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        q.column_mut(j).unscale_mut(norm);
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationKind {
    None,
    Varimax,
    AnchoredVarimax,
}

/// Frozen output-space model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ZModelFile", try_from = "ZModelFile")]
pub struct ZModel {
    mu: DVector<f64>,
    u: DMatrix<f64>,
    d_inter: usize,
    whitened: bool,
    anchored: bool,
    axis_meta: Vec<AxisMeta>,
    provenance: Option<serde_json::Value>,
}

impl ZModel {
    /// Build directly from a mean and an orthonormal basis.
    pub fn from_parts(mu: Vec<f64>, u: DMatrix<f64>, d_inter: usize) -> Result<Self> {
        if u.nrows() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: u.nrows(),
            });
        }
        let axis_meta = (0..u.ncols())
            .map(|axis| AxisMeta {
                axis,
                source: AxisSource::Pca,
                rotated: false,
            })
            .collect();
        Ok(ZModel {
            mu: DVector::from_vec(mu),
            u,
            d_inter,
            whitened: false,
            anchored: false,
            axis_meta,
            provenance: None,
        })
    }

    /// Attach run metadata stored alongside the model.
    pub fn with_provenance(mut self, meta: serde_json::Value) -> Self {
        self.provenance = Some(meta);
        self
    }

    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn d_z(&self) -> usize {
        self.u.ncols()
    }

    pub fn d_inter(&self) -> usize {
        self.d_inter
    }

    pub fn whitened(&self) -> bool {
        self.whitened
    }

    pub fn anchored(&self) -> bool {
        self.anchored
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn axis_meta(&self) -> &[AxisMeta] {
        &self.axis_meta
    }

    /// `U^T (e - mu)`.
    pub fn project(&self, e: &[f64]) -> Result<Vec<f64>> {
        if e.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: e.len(),
            });
        }
        Ok((0..self.d_z())
            .map(|k| {
                self.u
                    .column(k)
                    .iter()
                    .zip(e.iter().zip(self.mu.iter()))
                    .map(|(u, (x, m))| u * (x - m))
                    .sum()
            })
            .collect())
    }

    /// `mu + U z`.
    pub fn reconstruct(&self, z: &[f64]) -> DVector<f64> {
        &self.mu + &self.u * DVector::from_column_slice(z)
    }

    /// The same model with basis `U R` for an orthogonal `R`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> ZModel {
        let mut m = self.clone();
        m.u = &self.u * r;
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ZModel::from_json(&text)
    }
}

/// On-disk form of [`ZModel`]; `u` is column-major `d x d_z`.
#[derive(Serialize, Deserialize)]
struct ZModelFile {
    schema: String,
    d: usize,
    d_z: usize,
    d_inter: usize,
    whitened: bool,
    anchored: bool,
    mu: Vec<f64>,
    u: Vec<f64>,
    axis_meta: Vec<AxisMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl From<ZModel> for ZModelFile {
    fn from(m: ZModel) -> Self {
        ZModelFile {
            schema: ZMODEL_SCHEMA.into(),
            d: m.dim(),
            d_z: m.d_z(),
            d_inter: m.d_inter,
            whitened: m.whitened,
            anchored: m.anchored,
            mu: m.mu.as_slice().to_vec(),
            u: m.u.as_slice().to_vec(),
            axis_meta: m.axis_meta,
            provenance: m.provenance,
        }
    }
}

impl TryFrom<ZModelFile> for ZModel {
    type Error = String;

    fn try_from(f: ZModelFile) -> std::result::Result<Self, String> {
        if f.schema != ZMODEL_SCHEMA {
            return Err(format!("unsupported schema `{}`", f.schema));
        }
        if f.mu.len() != f.d || f.u.len() != f.d * f.d_z {
            return Err("mu/u lengths do not match d and d_z".into());
        }
        Ok(ZModel {
            mu: DVector::from_vec(f.mu),
            u: DMatrix::from_vec(f.d, f.d_z, f.u),
            d_inter: f.d_inter,
            whitened: f.whitened,
            anchored: f.anchored,
            axis_meta: f.axis_meta,
            provenance: f.provenance,
        })
    }
}

/// Map chosen directions to encoder space, orthonormalise, rotate, freeze.
pub fn finalize(basis: &PcaBasis, axes: &AxisChoice, rotation: RotationKind) -> ZModel {
    let cols: Vec<DVector<f64>> = axes
        .directions
        .column_iter()
        .map(|c| basis.to_encoder(&c.into_owned()))
        .collect();
    let u0 = orthonormalize(&DMatrix::from_columns(&cols));
    let rot = match rotation {
        RotationKind::None => None,
        RotationKind::Varimax => Some(varimax(&u0)),
        RotationKind::AnchoredVarimax => Some(anchored_varimax(&u0, 0)),
    };
    let mut u = match &rot {
        Some(r) => &u0 * &r.matrix,
        None => u0.clone(),
    };
    let anchored = axes.sources.first() == Some(&AxisSource::Anchor);
    for (k, mut col) in u.column_iter_mut().enumerate() {
        // anchor axis keeps the orientation of the anchor, others put their
        // largest-magnitude loading positive
        let flip = if k == 0 && anchored {
            col.dot(&u0.column(0)) < 0.0
        } else {
            let mut best = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            col[best] < 0.0
        };
        if flip {
            col.neg_mut();
        }
    }
    let rotated = rot.is_some();
    let axis_meta = axes
        .sources
        .iter()
        .enumerate()
        .map(|(axis, &source)| AxisMeta {
            axis,
            source,
            rotated: rotated && !(anchored && axis == 0 && rotation == RotationKind::AnchoredVarimax),
        })
        .collect();
    ZModel {
        mu: basis.mu.clone(),
        u,
        d_inter: basis.d_inter(),
        whitened: basis.whiten_scales.is_some(),
        anchored,
        axis_meta,
        provenance: None,
    }
}

/// Fit a model for one configuration.
pub fn fit(corpus: &EmbeddingCorpus, cfg: &FitConfig, anchor_mean: Option<&[f64]>) -> Result<ZModel> {
    let basis = fit_pca(corpus, cfg.d_inter, cfg.whiten, cfg.eps_rel, cfg.rank_policy)?;
    let (axes, rotation) = if cfg.anchored {
        let anchor = anchor_mean.ok_or_else(|| Error::Config("anchored fit without an anchor set".into()))?;
        (choose_axes_anchored(&basis, anchor, cfg.d_z)?, RotationKind::AnchoredVarimax)
    } else {
        (choose_axes_plain(&basis, cfg.d_z)?, RotationKind::Varimax)
    };
    let rotation = if cfg.rotate { rotation } else { RotationKind::None };
    Ok(finalize(&basis, &axes, rotation))
}
