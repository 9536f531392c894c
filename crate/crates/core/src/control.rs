//! Target curriculum, sequence-level reward and control-quality metrics.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile;

pub const SCALE_FLOOR: f64 = 1e-4;
pub const MIN_SCALE_SAMPLES: usize = 20;

/// Frozen robust per-axis scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisScales {
    pub s: Vec<f64>,
    /// `(q10, q90)` per axis.
    pub source_quantiles: Vec<(f64, f64)>,
    pub frozen: bool,
}

impl AxisScales {
    pub fn d_z(&self) -> usize {
        self.s.len()
    }

    /// Unit scales, for synthetic settings.
    pub fn unit(d_z: usize) -> Self {
        AxisScales {
            s: vec![1.0; d_z],
            source_quantiles: vec![(-1.0, 1.0); d_z],
            frozen: true,
        }
    }
}

/// `s_i = max(|q10|, |q90|, 1e-4)` from type-7 quantiles of each column.
pub fn fit_scales(reference_z: &[Vec<f64>]) -> Result<AxisScales> {
    if reference_z.len() < MIN_SCALE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SCALE_SAMPLES,
            got: reference_z.len(),
        });
    }
    let d = reference_z[0].len();
    let mut s = Vec::with_capacity(d);
    let mut qs = Vec::with_capacity(d);
    for a in 0..d {
        let col: Vec<f64> = reference_z.iter().map(|z| z[a]).collect();
        let q10 = quantile(&col, 0.10);
        let q90 = quantile(&col, 0.90);
        s.push(q10.abs().max(q90.abs()).max(SCALE_FLOOR));
        qs.push((q10, q90));
    }
    Ok(AxisScales {
        s,
        source_quantiles: qs,
        frozen: true,
    })
}

/// Which axes a request constrains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSelection {
    Fixed(Vec<usize>),
    /// Uniform subset size in `[min, max]`, then a uniform subset.
    RandomSubset { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub band_min: f64,
    pub band_max: f64,
    pub p_proto: f64,
    /// Sign patterns over all axes with entries in `{-1, 0, 1}`; empty means
    /// every non-zero pattern.
    #[serde(default)]
    pub prototypes: Vec<Vec<i8>>,
    /// Forces the per-axis signs outside prototype mode.
    #[serde(default)]
    pub fixed_signs: Option<Vec<i8>>,
    pub axes: AxisSelection,
}

impl TargetConfig {
    pub fn all_axes(d_z: usize) -> Self {
        TargetConfig {
            band_min: 0.25,
            band_max: 1.5,
            p_proto: 0.25,
            prototypes: Vec::new(),
            fixed_signs: None,
            axes: AxisSelection::Fixed((0..d_z).collect()),
        }
    }
}

/// Every non-zero pattern over `{-1, 0, 1}^d`, in lexicographic order.
pub fn sign_patterns(d: usize) -> Vec<Vec<i8>> {
    let total = 3usize.pow(d as u32);
    (0..total)
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let v = (k % 3) as i8 - 1;
                    k /= 3;
                    v
                })
                .collect::<Vec<i8>>()
        })
        .filter(|p| p.iter().any(|&v| v != 0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRequest {
    /// Constrained axes, ascending.
    pub axes: Vec<usize>,
    pub z_star: Vec<f64>,
    pub alpha: f64,
    pub scales: AxisScales,
}

impl TargetRequest {
    /// Request constraining every axis.
    pub fn full(z_star: Vec<f64>, alpha: f64, scales: AxisScales) -> Self {
        TargetRequest {
            axes: (0..z_star.len()).collect(),
            z_star,
            alpha,
            scales,
        }
    }

    /// Worst-axis error over the constrained axes.
    pub fn joint_error(&self, z: &[f64]) -> f64 {
        self.axes
            .iter()
            .map(|&i| (z[i] - self.z_star[i]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn sample_target<R: Rng + ?Sized>(
    scales: &AxisScales,
    cfg: &TargetConfig,
    alpha: f64,
    rng: &mut R,
) -> TargetRequest {
    let d = scales.d_z();
    let proto_mode = cfg.p_proto > 0.0 && rng.random_bool(cfg.p_proto.min(1.0));
    let signs: Vec<i8> = if proto_mode {
        let pool;
        let protos = if cfg.prototypes.is_empty() {
            pool = sign_patterns(d);
            &pool
        } else {
            &cfg.prototypes
        };
        protos[rng.random_range(0..protos.len())].clone()
    } else if let Some(fixed) = &cfg.fixed_signs {
        fixed.clone()
    } else {
        (0..d).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
    };
    let z_star = (0..d)
        .map(|i| {
            let m = if cfg.band_max > cfg.band_min {
                rng.random_range(cfg.band_min..=cfg.band_max)
            } else {
                cfg.band_min
            };
            f64::from(signs[i]) * m * scales.s[i]
        })
        .collect();
    let axes = match &cfg.axes {
        AxisSelection::Fixed(a) => a.clone(),
        AxisSelection::RandomSubset { min, max } => {
            let k = rng.random_range((*min).max(1)..=(*max).min(d));
            let mut a = sample(rng, d, k).into_vec();
            a.sort_unstable();
            a
        }
    };
    TargetRequest {
        axes,
        z_star,
        alpha,
        scales: scales.clone(),
    }
}

/// Linear distance-exponent annealing that restarts every phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub start: f64,
    pub end: f64,
    pub updates_per_phase: usize,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule {
            start: 1.5,
            end: 0.8,
            updates_per_phase: 1500,
        }
    }
}

impl AlphaSchedule {
    pub fn alpha(&self, update_index: usize) -> f64 {
        let i = update_index % self.updates_per_phase;
        if self.updates_per_phase < 2 {
            return self.start;
        }
        let t = i as f64 / (self.updates_per_phase - 1) as f64;
        (1.0 - t) * self.start + t * self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub w_format: f64,
    pub w_dist: f64,
    pub w_hon: f64,
    /// Multiplier applied on a sign mismatch.
    pub sign_step: f64,
    /// Sign relevance threshold in units of `s_i`.
    pub sign_threshold: f64,
    /// Boards with fewer live cells count as degenerate.
    pub min_live_cells: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_format: 3.0,
            w_dist: 3.0,
            w_hon: 1.5,
            sign_step: 0.5,
            sign_threshold: 0.25,
            min_live_cells: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_dist: f64,
    pub r_hon: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const ZERO: RewardBreakdown = RewardBreakdown {
        r_format: 0.0,
        r_dist: 0.0,
        r_hon: 0.0,
        total: 0.0,
    };
}

/// `max(0, 1 - min(u, 1)^alpha)`.
pub fn hinge(u: f64, alpha: f64) -> f64 {
    (1.0 - u.clamp(0.0, 1.0).powf(alpha)).max(0.0)
}

/// Distance term of a single axis.
pub fn axis_dist_term(z: f64, z_star: f64, s: f64, alpha: f64, cfg: &RewardConfig) -> f64 {
    let base = hinge((z - z_star).abs() / s, alpha);
    if z_star.abs() > cfg.sign_threshold * s && z * z_star <= 0.0 {
        base * cfg.sign_step
    } else {
        base
    }
}

pub fn reward(
    valid: bool,
    z_realised: Option<&[f64]>,
    z_hat: Option<&[Option<f64>]>,
    req: &TargetRequest,
    dup: bool,
    degenerate: bool,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let z = match z_realised {
        Some(z) if valid && !dup => z,
        _ => return RewardBreakdown::ZERO,
    };
    let n = req.axes.len().max(1) as f64;
    let s = &req.scales.s;
    let mut r_dist = req
        .axes
        .iter()
        .map(|&i| axis_dist_term(z[i], req.z_star[i], s[i], req.alpha, cfg))
        .sum::<f64>()
        / n;
    let mut r_hon = match z_hat {
        Some(h) => {
            req.axes
                .iter()
                .map(|&i| h.get(i).copied().flatten().map_or(0.0, |v| hinge((v - z[i]).abs() / s[i], 1.0)))
                .sum::<f64>()
                / n
        }
        None => 0.0,
    };
    if degenerate {
        r_dist = 0.0;
        r_hon = 0.0;
    }
    RewardBreakdown {
        r_format: 1.0,
        r_dist,
        r_hon,
        total: cfg.w_format + cfg.w_dist * r_dist + cfg.w_hon * r_hon,
    }
}

/// One sample drawn for a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub valid: bool,
    #[serde(default)]
    pub z_realised: Option<Vec<f64>>,
}

/// All samples of one request, in draw order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcomes {
    pub request_id: usize,
    pub axes: Vec<usize>,
    pub z_star: Vec<f64>,
    pub samples: Vec<SampleOutcome>,
}

impl RequestOutcomes {
    fn valid_prefix(&self, k: usize) -> impl Iterator<Item = &[f64]> {
        self.samples
            .iter()
            .take(k)
            .filter(|s| s.valid)
            .filter_map(|s| s.z_realised.as_deref())
    }

    /// Minimum joint error over the valid samples among the first `k`.
    pub fn best_joint_error(&self, k: usize) -> Option<f64> {
        self.valid_prefix(k)
            .map(|z| self.axes.iter().map(|&i| (z[i] - self.z_star[i]).abs()).fold(0.0, f64::max))
            .min_by(f64::total_cmp)
    }

    /// Minimum error on `axis` over the valid samples among the first `k`.
    pub fn best_axis_error(&self, axis: usize, k: usize) -> Option<f64> {
        self.valid_prefix(k).map(|z| (z[axis] - self.z_star[axis]).abs()).min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    PerAxis,
    Joint,
}

/// Best-of-`k` success rate at tolerance `eps`; invalid samples never
/// succeed.
///
/// `Joint` averages over requests; `PerAxis` averages over constrained axis
/// instances, each taking its own best sample.
pub fn success_at(groups: &[RequestOutcomes], eps: f64, mode: SuccessMode, k: usize) -> f64 {
    let k = k.max(1);
    let (mut hits, mut total) = (0usize, 0usize);
    for g in groups {
        match mode {
            SuccessMode::Joint => {
                total += 1;
                if g.best_joint_error(k).is_some_and(|e| e <= eps) {
                    hits += 1;
                }
            }
            SuccessMode::PerAxis => {
                for &i in &g.axes {
                    total += 1;
                    if g.best_axis_error(i, k).is_some_and(|e| e <= eps) {
                        hits += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Success rate restricted to one axis (requests constraining it).
pub fn success_on_axis(groups: &[RequestOutcomes], axis: usize, eps: f64, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for g in groups.iter().filter(|g| g.axes.contains(&axis)) {
        total += 1;
        if g.best_axis_error(axis, k.max(1)).is_some_and(|e| e <= eps) {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_requested: f64,
    pub mean_realised: f64,
}

/// Equal-width bins over the requested range of `axis`, pooling every valid
/// sample of requests constraining it; empty bins are omitted.
pub fn calibration(groups: &[RequestOutcomes], axis: usize, bins: usize) -> Vec<CalibrationBin> {
    let pairs: Vec<(f64, f64)> = groups
        .iter()
        .filter(|g| g.axes.contains(&axis))
        .flat_map(|g| {
            g.valid_prefix(usize::MAX)
                .map(|z| (g.z_star[axis], z[axis]))
                .collect::<Vec<_>>()
        })
        .collect();
    if pairs.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut acc = vec![(0usize, 0.0, 0.0); bins];
    for &(req, real) in &pairs {
        let b = if width > 0.0 {
            (((req - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        acc[b].0 += 1;
        acc[b].1 += req;
        acc[b].2 += real;
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(b, (n, sr, sz))| CalibrationBin {
            lo: lo + width * b as f64,
            hi: if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 },
            count: n,
            mean_requested: sr / n as f64,
            mean_realised: sz / n as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn req3(z_star: [f64; 3], alpha: f64) -> TargetRequest {
        TargetRequest::full(z_star.to_vec(), alpha, AxisScales::unit(3))
    }

    #[test]
    fn scale_examples() {
        let mut z: Vec<Vec<f64>> = (0..21).map(|i| vec![0.0, -0.3 + i as f64 * 0.05]).collect();
        z[0][0] = 0.0;
        let s = fit_scales(&z).unwrap();
        assert_eq!(s.s[0], SCALE_FLOOR);
        let (q10, q90) = s.source_quantiles[1];
        assert!((q10 - -0.2).abs() < 1e-12 && (q90 - 0.6).abs() < 1e-12);
        assert_eq!(s.s[1], q90.abs());
        assert!(fit_scales(&z[..19]).is_err());
    }

    #[test]
    fn alpha_endpoints() {
        let a = AlphaSchedule::default();
        assert_eq!(a.alpha(0), 1.5);
        assert_eq!(a.alpha(1499), 0.8);
        assert_eq!(a.alpha(1500), 1.5);
        assert!(a.alpha(749) > 1.15 && a.alpha(750) < 1.15);
    }

    #[test]
    fn band_and_signs() {
        let scales = AxisScales {
            s: vec![0.5, 2.0, 1.0],
            source_quantiles: vec![(0.0, 0.0); 3],
            frozen: true,
        };
        let cfg = TargetConfig {
            band_min: 1.0,
            band_max: 1.0,
            p_proto: 0.0,
            prototypes: vec![],
            fixed_signs: Some(vec![1, 1, 1]),
            axes: AxisSelection::Fixed(vec![0, 1, 2]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_target(&scales, &cfg, 1.5, &mut rng).z_star, scales.s);
        let proto = TargetConfig {
            p_proto: 1.0,
            prototypes: vec![vec![1, -1, 1]],
            band_min: 0.25,
            band_max: 1.5,
            ..cfg
        };
        let r = sample_target(&scales, &proto, 1.5, &mut rng);
        assert!(r.z_star[0] > 0.0 && r.z_star[1] < 0.0 && r.z_star[2] > 0.0);
    }

    #[test]
    fn sign_patterns_exclude_origin() {
        let p = sign_patterns(3);
        assert_eq!(p.len(), 26);
        assert!(p.iter().all(|v| v.iter().any(|&x| x != 0)));
    }

    #[test]
    fn reward_endpoints() {
        let cfg = RewardConfig::default();
        let r = req3([0.5, -0.5, 1.0], 1.2);
        let z = [0.5, -0.5, 1.0];
        let hat = [Some(0.5), Some(-0.5), Some(1.0)];
        assert_eq!(reward(true, Some(&z), Some(&hat), &r, false, false, &cfg).total, 7.5);
        assert_eq!(reward(false, Some(&z), Some(&hat), &r, false, false, &cfg).total, 0.0);
        assert_eq!(reward(true, Some(&z), Some(&hat), &r, true, false, &cfg).total, 0.0);
        let degenerate = reward(true, Some(&z), Some(&hat), &r, false, true, &cfg);
        assert_eq!(degenerate.total, 3.0);
    }

    #[test]
    fn sign_step_halves() {
        let cfg = RewardConfig::default();
        let s = 1.0;
        let flipped = axis_dist_term(-0.125, 0.375, s, 1.5, &cfg);
        let same_side = axis_dist_term(0.875, 0.375, s, 1.5, &cfg);
        assert_eq!(flipped, 0.5 * same_side);
        assert_eq!(same_side, 1.0 - 0.5f64.powf(1.5));
        assert_eq!(axis_dist_term(-0.125, 0.125, s, 1.5, &cfg), 1.0 - 0.25f64.powf(1.5));
    }

    #[test]
    fn success_thresholds() {
        let g = RequestOutcomes {
            request_id: 0,
            axes: vec![0, 1],
            z_star: vec![0.0, 0.0],
            samples: vec![SampleOutcome {
                valid: true,
                z_realised: Some(vec![0.06, -0.06]),
            }],
        };
        assert_eq!(success_at(std::slice::from_ref(&g), 0.05, SuccessMode::Joint, 1), 0.0);
        assert_eq!(success_at(std::slice::from_ref(&g), 0.07, SuccessMode::Joint, 1), 1.0);
        assert_eq!(success_at(std::slice::from_ref(&g), 0.07, SuccessMode::PerAxis, 5), 1.0);
    }

    #[test]
    fn calibration_by_hand() {
        let mk = |id, zs: f64, zr: f64| RequestOutcomes {
            request_id: id,
            axes: vec![0],
            z_star: vec![zs],
            samples: vec![SampleOutcome {
                valid: true,
                z_realised: Some(vec![zr]),
            }],
        };
        let g = vec![mk(0, 0.0, 0.1), mk(1, 0.2, 0.3), mk(2, 1.0, 0.5), mk(3, 0.9, 0.7)];
        let bins = calibration(&g, 0, 2);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].count, 2);
        assert!((bins[0].mean_requested - 0.1).abs() < 1e-15);
        assert!((bins[0].mean_realised - 0.2).abs() < 1e-15);
        assert!((bins[1].mean_realised - 0.6).abs() < 1e-15);
        let three = calibration(&g, 0, 3);
        assert_eq!(three.len(), 2);
    }
}
