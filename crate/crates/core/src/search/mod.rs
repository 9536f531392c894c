//! Outer-loop target search: grid sweep, random proposals and GP-EI
//! Bayesian optimisation under a scored-valid budget.

pub mod env;
pub mod gp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{RequestOutcomes, RewardBreakdown, SampleOutcome};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::stats::mix_seed;

pub use env::{ActuatedEnv, SyntheticEnv};
pub use gp::{ei, expected_improvement, GpHyper, GpSurrogate};

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("bounds need lower < upper on every axis".into()));
        }
        Ok(Bounds { lower, upper })
    }

    /// `[-m s_i, m s_i]` per axis.
    pub fn from_scales(s: &[f64], multiplier: f64) -> Result<Self> {
        Bounds::new(s.iter().map(|v| -multiplier * v).collect(), s.iter().map(|v| multiplier * v).collect())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| (l + t.clamp(0.0, 1.0) * (h - l)).clamp(*l, *h))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..*u)).collect()
    }
}

/// One candidate produced for a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_hat: Option<Vec<Option<f64>>>,
    pub f: Option<f64>,
    pub joint_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardBreakdown>,
    #[serde(default)]
    pub near_duplicate: bool,
    pub provenance: String,
}

impl CandidateRecord {
    /// Counts toward the scored-valid budget.
    pub fn scored(&self) -> bool {
        self.valid && self.f.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warm,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: usize,
    pub phase: Phase,
    pub axes: Vec<usize>,
    pub z_star: Vec<f64>,
    pub candidates: Vec<CandidateRecord>,
    /// Highest-scoring candidate.
    pub best: Option<usize>,
    pub f_best: Option<f64>,
    pub z_best: Option<Vec<f64>>,
    pub best_so_far: Option<f64>,
    pub n_ok_after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Grid,
    Random,
    Bo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Realised,
    Requested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    pub mode: SearchMode,
    pub seed: u64,
    pub records: Vec<QueryRecord>,
    pub n_ok: usize,
}

impl SearchRun {
    fn new(mode: SearchMode, seed: u64) -> Self {
        SearchRun {
            mode,
            seed,
            records: Vec::new(),
            n_ok: 0,
        }
    }

    pub fn best_so_far(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.best_so_far)
    }

    /// Number of non-warm requests issued.
    pub fn queries(&self) -> usize {
        self.records.iter().filter(|r| r.phase == Phase::Query).count()
    }

    fn push(&mut self, phase: Phase, axes: Vec<usize>, z_star: Vec<f64>, candidates: Vec<CandidateRecord>) -> &QueryRecord {
        let mut best: Option<usize> = None;
        for (i, c) in candidates.iter().enumerate() {
            if c.scored() {
                self.n_ok += 1;
                if best.is_none_or(|b| c.f.unwrap() > candidates[b].f.unwrap()) {
                    best = Some(i);
                }
            }
        }
        let prev = self.best_so_far();
        let f_best = best.and_then(|b| candidates[b].f);
        let best_so_far = match (prev, f_best) {
            (Some(p), Some(f)) => Some(p.max(f)),
            (p, f) => p.or(f),
        };
        let record = QueryRecord {
            query: self.records.len(),
            phase,
            axes,
            z_star,
            best,
            f_best,
            z_best: best.and_then(|b| candidates[b].z.clone()),
            candidates,
            best_so_far,
            n_ok_after: self.n_ok,
            note: if best.is_none() { Some("no_valid_candidates".into()) } else { None },
        };
        self.records.push(record);
        self.records.last().unwrap()
    }

    /// Request-level outcomes of non-warm records for the control metrics.
    pub fn outcomes(&self) -> Vec<RequestOutcomes> {
        self.records
            .iter()
            .filter(|r| r.phase == Phase::Query)
            .map(|r| RequestOutcomes {
                request_id: r.query,
                axes: r.axes.clone(),
                z_star: r.z_star.clone(),
                samples: r
                    .candidates
                    .iter()
                    .map(|c| SampleOutcome {
                        valid: c.valid,
                        z_realised: c.z.clone(),
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Something that turns a target into `k` scored candidates.
pub trait QueryEnv {
    fn d_z(&self) -> usize;

    /// Constrained axes of every request.
    fn axes(&self) -> Vec<usize> {
        (0..self.d_z()).collect()
    }

    fn query(&mut self, z_star: &[f64], k: usize, seed: u64) -> Vec<CandidateRecord>;

    /// Offer the best candidate of a query for library growth.
    fn absorb(&mut self, _best: &CandidateRecord) -> bool {
        false
    }
}

/// `(n_ok, best_f)` after every scored candidate.
pub fn best_so_far_trace(run: &SearchRun) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut n = 0;
    let mut best = f64::NEG_INFINITY;
    for r in &run.records {
        for c in r.candidates.iter().filter(|c| c.scored()) {
            n += 1;
            best = best.max(c.f.unwrap());
            out.push((n, best));
        }
    }
    out
}

/// Append `next` after `first`, offsetting budgets and carrying the best.
pub fn merge_traces(first: &[(usize, f64)], next: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let (n0, b0) = first.last().copied().unwrap_or((0, f64::NEG_INFINITY));
    first
        .iter()
        .copied()
        .chain(next.iter().map(|&(n, b)| (n + n0, b.max(b0))))
        .collect()
}

/// Best value reached within the first `budget` scored candidates.
pub fn best_at(trace: &[(usize, f64)], budget: usize) -> Option<f64> {
    trace.iter().take_while(|(n, _)| *n <= budget).last().map(|(_, b)| *b)
}

/// Cartesian product of per-axis levels, first axis outermost.
pub fn grid_targets(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in levels {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn grid_sweep(levels: &[Vec<f64>], k: usize, seed: u64, env: &mut dyn QueryEnv) -> Result<SearchRun> {
    if levels.len() != env.d_z() || levels.iter().any(|l| l.is_empty()) {
        return Err(Error::Config("grid needs at least one level on every axis".into()));
    }
    let mut run = SearchRun::new(SearchMode::Grid, seed);
    for (q, z_star) in grid_targets(levels).into_iter().enumerate() {
        let cands = env.query(&z_star, k, mix_seed(seed, q as u64));
        run.push(Phase::Query, env.axes(), z_star, cands);
    }
    Ok(run)
}

pub fn random_search(bounds: &Bounds, n_requests: usize, k: usize, seed: u64, env: &mut dyn QueryEnv) -> Result<SearchRun> {
    if bounds.dim() != env.d_z() {
        return Err(Error::DimensionMismatch {
            expected: env.d_z(),
            got: bounds.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = SearchRun::new(SearchMode::Random, seed);
    for q in 0..n_requests {
        let z_star = bounds.sample(&mut rng);
        let cands = env.query(&z_star, k, mix_seed(seed, q as u64));
        run.push(Phase::Query, env.axes(), z_star, cands);
    }
    Ok(run)
}

/// A previously scored point fed to the surrogate before the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmPoint {
    pub z_star: Vec<f64>,
    pub z_realised: Vec<f64>,
    pub f: f64,
    #[serde(default)]
    pub seed: Option<String>,
}

/// Warm points from the best candidate of every scored request of `run`.
pub fn warm_pool(run: &SearchRun) -> Vec<WarmPoint> {
    run.records
        .iter()
        .filter_map(|r| {
            let b = &r.candidates[r.best?];
            Some(WarmPoint {
                z_star: r.z_star.clone(),
                z_realised: b.z.clone()?,
                f: b.f?,
                seed: b.seed.clone(),
            })
        })
        .collect()
}

/// Uniform subsample of `size` pool points, in pool order.
pub fn subsample_warm(pool: &[WarmPoint], size: usize, seed: u64) -> Vec<WarmPoint> {
    if size >= pool.len() {
        return pool.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EiConfig {
    pub starts: usize,
    pub evals_per_start: usize,
    /// Initial coordinate step as a fraction of each axis range.
    pub initial_step: f64,
}

impl Default for EiConfig {
    fn default() -> Self {
        EiConfig {
            starts: 64,
            evals_per_start: 200,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Scored-valid budget, warm start included.
    pub budget: usize,
    pub k: usize,
    pub update: UpdateMode,
    pub grow_library: bool,
    pub ei: EiConfig,
    pub refit_every: usize,
    pub hyper_restarts: usize,
    pub hyper_evals: usize,
    /// Hard cap on requests; defaults to `4 * budget + 16`.
    pub max_queries: Option<usize>,
    pub seed: u64,
}

impl BoConfig {
    pub fn new(budget: usize, k: usize, update: UpdateMode, seed: u64) -> Self {
        BoConfig {
            budget,
            k,
            update,
            grow_library: false,
            ei: EiConfig::default(),
            refit_every: 10,
            hyper_restarts: 8,
            hyper_evals: 50,
            max_queries: None,
            seed,
        }
    }
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let mut inv = 1.0 / b as f64;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * inv;
        i /= b;
        inv /= b as f64;
    }
    r
}

/// Randomly shifted Halton points in the unit box.
pub fn halton_starts(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    assert!(d <= PRIMES.len(), "Halton starts support up to {} axes", PRIMES.len());
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (1..=n as u64)
        .map(|i| (0..d).map(|a| (radical_inverse(i, PRIMES[a]) + shift[a]).fract()).collect())
        .collect()
}

fn refine(gp: &GpSurrogate, start: Vec<f64>, best_f: f64, cfg: &EiConfig) -> (Vec<f64>, f64) {
    let value = |u: &[f64]| {
        let (m, v) = gp.predict_unit(u);
        expected_improvement(m, v.sqrt(), best_f)
    };
    let mut x = start;
    let mut fx = value(&x);
    let mut evals = 1;
    let mut step = cfg.initial_step;
    while evals < cfg.evals_per_start && step > 1e-4 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evals >= cfg.evals_per_start {
                    break;
                }
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(0.0, 1.0);
                if y[i] == x[i] {
                    continue;
                }
                let fy = value(&y);
                evals += 1;
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Multi-start maximiser of EI; the result always lies inside the bounds.
pub fn maximize_ei(gp: &GpSurrogate, best_f: f64, cfg: &EiConfig, rng: &mut ChaCha8Rng, exec: Exec) -> (Vec<f64>, f64) {
    let d = gp.bounds().dim();
    let starts = halton_starts(cfg.starts.max(1), d, rng);
    let refined = exec.map(&starts, |s| refine(gp, s.clone(), best_f, cfg));
    let mut best = 0;
    for (i, r) in refined.iter().enumerate() {
        if r.1 > refined[best].1 {
            best = i;
        }
    }
    let (u, val) = &refined[best];
    (gp.bounds().from_unit(u), *val)
}

/// GP-EI loop. Warm points are logged as `warm` records, count toward the
/// budget and seed the surrogate; the loop stops once the scored-valid count
/// reaches `cfg.budget`.
pub fn bo_loop(bounds: &Bounds, warm: &[WarmPoint], cfg: &BoConfig, env: &mut dyn QueryEnv, exec: Exec) -> Result<SearchRun> {
    if bounds.dim() != env.d_z() {
        return Err(Error::DimensionMismatch {
            expected: env.d_z(),
            got: bounds.dim(),
        });
    }
    let mut run = SearchRun::new(SearchMode::Bo, cfg.seed);
    let mut gp = GpSurrogate::new(bounds.clone(), GpHyper::default_for(bounds.dim()));
    let locate = |star: &[f64], realised: &[f64]| match cfg.update {
        UpdateMode::Realised => realised.to_vec(),
        UpdateMode::Requested => star.to_vec(),
    };
    for w in warm {
        let cand = CandidateRecord {
            valid: true,
            seed: w.seed.clone(),
            z: Some(w.z_realised.clone()),
            z_hat: None,
            f: Some(w.f),
            joint_error: None,
            reward: None,
            near_duplicate: false,
            provenance: "warm-start".into(),
        };
        run.push(Phase::Warm, env.axes(), w.z_star.clone(), vec![cand]);
        gp.observe(&locate(&w.z_star, &w.z_realised), w.f);
    }
    gp.fit_hyper(cfg.hyper_restarts, cfg.hyper_evals, mix_seed(cfg.seed, u64::MAX));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_queries = cfg.max_queries.unwrap_or(4 * cfg.budget + 16);
    let mut q = 0usize;
    while run.n_ok < cfg.budget && q < max_queries {
        let z_star = match gp.best_observed() {
            Some(best_f) => maximize_ei(&gp, best_f, &cfg.ei, &mut rng, exec).0,
            None => bounds.sample(&mut rng),
        };
        let cands = env.query(&z_star, cfg.k, mix_seed(cfg.seed, q as u64));
        let rec = run.push(Phase::Query, env.axes(), z_star.clone(), cands);
        if let Some(b) = rec.best {
            let best = rec.candidates[b].clone();
            gp.observe(&locate(&z_star, best.z.as_ref().expect("scored candidate has z")), best.f.unwrap());
            if cfg.grow_library {
                env.absorb(&best);
            }
        }
        q += 1;
        if cfg.refit_every > 0 && q.is_multiple_of(cfg.refit_every) {
            gp.fit_hyper(cfg.hyper_restarts, cfg.hyper_evals, mix_seed(cfg.seed, q as u64 | 1 << 63));
        }
    }
    Ok(run)
}

/// CSV rows `n_ok,best_f,seed,mode` of a run's trace.
pub fn trace_csv(run: &SearchRun, label: &str) -> String {
    let mut out = String::from("n_ok,best_f,seed,mode\n");
    for (n, b) in best_so_far_trace(run) {
        out.push_str(&format!("{n},{b},{},{label}\n", run.seed));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_grid_order() {
        let t = grid_targets(&[vec![1.0, 2.0], vec![10.0, 20.0]]);
        assert_eq!(t, vec![vec![1.0, 10.0], vec![1.0, 20.0], vec![2.0, 10.0], vec![2.0, 20.0]]);
        let big = grid_targets(&[vec![0.0; 2], vec![0.0; 3], vec![0.0; 3]]);
        assert_eq!(big.len(), 18);
        assert_eq!(grid_targets(&[vec![1.0], vec![2.0], vec![3.0]]).len(), 1);
    }

    #[test]
    fn trace_merging() {
        let a = vec![(1, 0.2), (2, 0.5)];
        let b = vec![(1, 0.1), (2, 0.7)];
        assert_eq!(merge_traces(&a, &b), vec![(1, 0.2), (2, 0.5), (3, 0.5), (4, 0.7)]);
        assert_eq!(best_at(&merge_traces(&a, &b), 3), Some(0.5));
        assert_eq!(best_at(&[], 3), None);
    }

    #[test]
    fn halton_in_unit_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = halton_starts(64, 3, &mut rng);
        assert_eq!(pts.len(), 64);
        assert!(pts.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        assert!((radical_inverse(3, 2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![0.0], vec![0.0]).is_err());
        let b = Bounds::from_scales(&[0.5, 2.0], 2.5).unwrap();
        assert_eq!(b.lower, vec![-1.25, -5.0]);
        assert!(b.contains(&b.from_unit(&[1.3, -0.2])));
    }
}
