use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingCorpus;
use crate::error::{Error, Result};

/// What to do when the corpus has fewer than `d_inter` non-null directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    #[default]
    Error,
    Reduce,
}

/// Eigenvalues below `RANK_TOL * largest` count as null directions.
pub const RANK_TOL: f64 = 1e-10;

/// Centered PCA basis in encoder space.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub mu: DVector<f64>,
    /// `D x d_inter`, orthonormal columns, largest-magnitude loading positive.
    pub components: DMatrix<f64>,
    /// Sample-covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `(lambda_j + eps)^(-1/2)` when whitening is enabled.
    pub whiten_scales: Option<Vec<f64>>,
}

impl PcaBasis {
    pub fn d_inter(&self) -> usize {
        self.components.ncols()
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    /// Per-coordinate scale of the intermediate space (1 without whitening).
    pub fn coord_scales(&self) -> Vec<f64> {
        self.whiten_scales
            .clone()
            .unwrap_or_else(|| vec![1.0; self.d_inter()])
    }

    /// Intermediate coordinates of an encoder-space direction.
    pub fn to_intermediate(&self, dir: &DVector<f64>) -> DVector<f64> {
        let mut y = self.components.tr_mul(dir);
        for (v, s) in y.iter_mut().zip(self.coord_scales()) {
            *v *= s;
        }
        y
    }

    /// Encoder-space vector of an intermediate-space direction (inverse of
    /// [`PcaBasis::to_intermediate`] on the retained subspace).
    pub fn to_encoder(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut unscaled = y.clone();
        for (v, s) in unscaled.iter_mut().zip(self.coord_scales()) {
            *v /= s;
        }
        &self.components * unscaled
    }

    /// Variance of each intermediate coordinate.
    pub fn intermediate_variances(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(self.coord_scales())
            .map(|(l, s)| l * s * s)
            .collect()
    }
}

pub fn whitening_scales(eigenvalues: &[f64], eps: f64) -> Vec<f64> {
    eigenvalues.iter().map(|l| (l + eps).powf(-0.5)).collect()
}

pub fn corpus_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Eigenpairs sorted by descending eigenvalue (ties keep solver order).
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Flip column signs so the largest-magnitude entry of each is positive.
pub(crate) fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// PCA of the centered corpus to `d_inter` components.
///
/// Uses the `D x D` covariance when `D <= N`, otherwise the `N x N` Gram
/// matrix. `eps_rel` is the whitening regulariser relative to the largest
/// eigenvalue.
pub fn fit_pca(
    corpus: &EmbeddingCorpus,
    d_inter: usize,
    whiten: bool,
    eps_rel: f64,
    policy: RankPolicy,
) -> Result<PcaBasis> {
    let x = &corpus.matrix;
    let (n, d) = x.shape();
    if d_inter == 0 || n <= d_inter {
        return Err(Error::Config(format!(
            "PCA needs N > d_inter >= 1 (N = {n}, d_inter = {d_inter})"
        )));
    }
    let mu = corpus_mean(x);
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= mu.transpose();
    }
    let denom = (n - 1) as f64;

    let (values, mut components) = if d <= n {
        let cov = xc.tr_mul(&xc) / denom;
        sorted_eigen(cov)
    } else {
        let gram = &xc * xc.transpose();
        let (gv, gvec) = sorted_eigen(gram);
        let mut comps = xc.tr_mul(&gvec);
        for (j, mut col) in comps.column_iter_mut().enumerate() {
            let norm = gv[j].max(0.0).sqrt();
            if norm > 0.0 {
                col /= norm;
            }
        }
        (gv.iter().map(|v| v / denom).collect(), comps)
    };

    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = values.iter().filter(|&&v| top > 0.0 && v > RANK_TOL * top).count();
    let k = if rank < d_inter {
        match policy {
            RankPolicy::Error => return Err(Error::RankDeficient { requested: d_inter, rank }),
            RankPolicy::Reduce if rank == 0 => return Err(Error::RankDeficient { requested: d_inter, rank }),
            RankPolicy::Reduce => rank,
        }
    } else {
        d_inter
    };

    components = components.columns(0, k).into_owned();
    // Gram-route columns are normalised already; re-normalise both routes.
    for mut col in components.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    fix_signs(&mut components);
    let eigenvalues: Vec<f64> = values[..k].iter().map(|v| v.max(0.0)).collect();
    let whiten_scales = whiten.then(|| whitening_scales(&eigenvalues, eps_rel * top));
    Ok(PcaBasis {
        mu,
        components,
        eigenvalues,
        whiten_scales,
    })
}
