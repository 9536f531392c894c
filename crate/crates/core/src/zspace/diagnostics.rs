use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ZModel;
use crate::encoder::EmbeddingCorpus;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZDiagnostics {
    /// Mean `||x - x_hat||_2` (reported under its conventional name).
    pub recon_rmse: f64,
    pub recon_r2: f64,
    pub knn_recall: BTreeMap<usize, f64>,
    pub trustworthiness: BTreeMap<usize, f64>,
    pub axis_variance: Vec<f64>,
    pub hoyer_mean: f64,
    pub anchor_capture: Option<f64>,
    pub anchor_on_z1: Option<f64>,
    pub preference: f64,
}

/// Weights of the model-selection preference score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceWeights {
    pub recon_r2: f64,
    pub knn_recall: f64,
    pub trustworthiness: f64,
    pub hoyer: f64,
    pub dz_penalty: f64,
}

impl Default for PreferenceWeights {
    fn default() -> Self {
        PreferenceWeights {
            recon_r2: 0.25,
            knn_recall: 0.25,
            trustworthiness: 0.25,
            hoyer: 0.15,
            dz_penalty: 0.10,
        }
    }
}

fn mean_of(m: &BTreeMap<usize, f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.values().sum::<f64>() / m.len() as f64
    }
}

pub fn preference(d: &ZDiagnostics, d_z: usize, w: &PreferenceWeights) -> f64 {
    let pen = (d_z as f64 - 3.0).powi(2);
    w.recon_r2 * d.recon_r2 + w.knn_recall * mean_of(&d.knn_recall) + w.trustworthiness * mean_of(&d.trustworthiness)
        + w.hoyer * d.hoyer_mean
        - w.dz_penalty * pen
}

/// `(sqrt(n) - |v|_1/|v|_2) / (sqrt(n) - 1)`; 0 for the zero vector.
pub fn hoyer(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if l2 == 0.0 || v.len() < 2 {
        return 0.0;
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    ((n.sqrt() - l1 / l2) / (n.sqrt() - 1.0)).clamp(0.0, 1.0)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neighbour order of every point (self excluded), nearest first, ties by
/// index.
fn neighbor_orders(points: &[Vec<f64>], exec: Exec) -> Vec<Vec<u32>> {
    let n = points.len();
    exec.map_range(n, |i| {
        let mut d: Vec<(f64, u32)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(&points[i], &points[j]), j as u32))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, j)| j).collect()
    })
}

/// Original-space neighbourhoods of a corpus, reusable across models.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    /// `order[i]` lists all other points by distance to `i`.
    order: Vec<Vec<u32>>,
    /// `rank[i][j]`: 1-based rank of `j` among `i`'s neighbours (0 for `i`).
    rank: Vec<Vec<u32>>,
}

impl Neighborhoods {
    pub fn new(corpus: &EmbeddingCorpus, exec: Exec) -> Self {
        let rows: Vec<Vec<f64>> = (0..corpus.len()).map(|i| corpus.row(i)).collect();
        Neighborhoods::from_points(&rows, exec)
    }

    pub fn from_points(points: &[Vec<f64>], exec: Exec) -> Self {
        let order = neighbor_orders(points, exec);
        let n = points.len();
        let rank = order
            .iter()
            .map(|o| {
                let mut r = vec![0u32; n];
                for (pos, &j) in o.iter().enumerate() {
                    r[j as usize] = pos as u32 + 1;
                }
                r
            })
            .collect();
        Neighborhoods { order, rank }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Mean fraction of each point's original `k`-NN recovered in `Z`.
pub fn knn_recall(original: &Neighborhoods, projected: &Neighborhoods, k: usize) -> f64 {
    let n = original.len();
    let mut total = 0.0;
    for i in 0..n {
        let hits = projected.order[i][..k]
            .iter()
            .filter(|&&j| original.rank[i][j as usize] as usize <= k)
            .count();
        total += hits as f64 / k as f64;
    }
    total / n as f64
}

/// Rank-based trustworthiness: penalises `Z`-neighbours that are far in the
/// original space.
pub fn trustworthiness(original: &Neighborhoods, projected: &Neighborhoods, k: usize) -> f64 {
    let n = original.len() as f64;
    let kf = k as f64;
    let mut penalty = 0.0;
    for i in 0..original.len() {
        for &j in &projected.order[i][..k] {
            let r = original.rank[i][j as usize] as f64;
            if r > kf {
                penalty += r - kf;
            }
        }
    }
    let norm = 2.0 / (n * kf * (2.0 * n - 3.0 * kf - 1.0));
    (1.0 - norm * penalty).clamp(0.0, 1.0)
}

/// All diagnostics of `model` on `corpus`.
///
/// `anchor_mean` enables the anchor capture fields. `original` may carry
/// precomputed original-space neighbourhoods for the same corpus.
pub fn diagnostics(
    model: &ZModel,
    corpus: &EmbeddingCorpus,
    k_list: &[usize],
    anchor_mean: Option<&[f64]>,
    weights: &PreferenceWeights,
    original: Option<&Neighborhoods>,
    exec: Exec,
) -> ZDiagnostics {
    let n = corpus.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| corpus.row(i)).collect();
    let z: Vec<Vec<f64>> = exec.map(&rows, |r| model.project(r).expect("corpus and model dims agree"));

    let mut err_sum = 0.0;
    let mut err_sq = 0.0;
    let mut tot_sq = 0.0;
    for (x, zi) in rows.iter().zip(&z) {
        let xhat = model.reconstruct(zi);
        let e2: f64 = x.iter().zip(xhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        err_sq += e2;
        err_sum += e2.sqrt();
        tot_sq += x.iter().zip(model.mu().iter()).map(|(a, m)| (a - m) * (a - m)).sum::<f64>();
    }
    let recon_r2 = if tot_sq > 0.0 { (1.0 - err_sq / tot_sq).clamp(0.0, 1.0) } else { 1.0 };

    let owned;
    let original = match original {
        Some(o) => o,
        None => {
            owned = Neighborhoods::from_points(&rows, exec);
            &owned
        }
    };
    let projected = Neighborhoods::from_points(&z, exec);
    let mut knn = BTreeMap::new();
    let mut trust = BTreeMap::new();
    for &k in k_list {
        if k >= 1 && k < n {
            knn.insert(k, knn_recall(original, &projected, k));
            trust.insert(k, trustworthiness(original, &projected, k));
        }
    }

    let d_z = model.d_z();
    let axis_variance = (0..d_z)
        .map(|a| {
            let m = z.iter().map(|v| v[a]).sum::<f64>() / n as f64;
            z.iter().map(|v| (v[a] - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64
        })
        .collect();
    let hoyer_mean = model
        .basis()
        .column_iter()
        .map(|c| hoyer(c.as_slice()))
        .sum::<f64>()
        / d_z as f64;

    let (anchor_capture, anchor_on_z1) = match anchor_mean {
        Some(a) if a.len() == model.dim() => {
            let a_dir = DVector::from_column_slice(a) - model.mu();
            let captured = model.basis().tr_mul(&a_dir);
            let an = a_dir.norm();
            let cn2 = captured.norm_squared();
            let capture = if an > 0.0 { captured.norm() / an } else { 0.0 };
            let on_z1 = if cn2 > 0.0 { captured[0] * captured[0] / cn2 } else { 0.0 };
            (Some(capture.min(1.0)), Some(on_z1))
        }
        _ => (None, None),
    };

    let mut d = ZDiagnostics {
        recon_rmse: err_sum / n as f64,
        recon_r2,
        knn_recall: knn,
        trustworthiness: trust,
        axis_variance,
        hoyer_mean,
        anchor_capture,
        anchor_on_z1,
        preference: 0.0,
    };
    d.preference = preference(&d, d_z, weights);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::CorpusSource;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hoyer_endpoints() {
        assert_eq!(hoyer(&[0.0, 0.0, 1.0, 0.0]), 1.0);
        assert_eq!(hoyer(&[0.5; 4]), 0.0);
        assert_eq!(hoyer(&[0.0; 4]), 0.0);
    }

    #[test]
    fn identity_model_is_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ids = (0..60).map(|i| i.to_string()).collect();
        let c = EmbeddingCorpus::from_rows(ids, &rows, CorpusSource::ExternalImport).unwrap();
        let mu = super::super::corpus_mean(&c.matrix);
        let m = ZModel::from_parts(mu.iter().copied().collect(), DMatrix::identity(4, 4), 4).unwrap();
        let d = diagnostics(&m, &c, &[10, 20], None, &PreferenceWeights::default(), None, Exec::Sequential);
        assert!((d.recon_r2 - 1.0).abs() < 1e-12);
        assert!(d.recon_rmse < 1e-12);
        for k in [10, 20] {
            assert_eq!(d.knn_recall[&k], 1.0);
            assert_eq!(d.trustworthiness[&k], 1.0);
        }
        assert_eq!(d.anchor_capture, None);
    }

    #[test]
    fn dz_penalty_prefers_three_axes() {
        let mk = || ZDiagnostics {
            recon_rmse: 0.1,
            recon_r2: 0.9,
            knn_recall: BTreeMap::from([(10, 0.5)]),
            trustworthiness: BTreeMap::from([(10, 0.8)]),
            axis_variance: vec![],
            hoyer_mean: 0.2,
            anchor_capture: None,
            anchor_on_z1: None,
            preference: 0.0,
        };
        let w = PreferenceWeights::default();
        assert!(preference(&mk(), 3, &w) > preference(&mk(), 8, &w));
        assert!((preference(&mk(), 3, &w) - (0.25 * 0.9 + 0.25 * 0.5 + 0.25 * 0.8 + 0.15 * 0.2)).abs() < 1e-15);
    }
}
