//! Gaussian-process surrogate with a squared-exponential ARD kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::Bounds;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    /// Per-axis lengthscales in unit-box coordinates.
    pub lengthscales: Vec<f64>,
    /// Signal variance in standardised objective units.
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    pub fn default_for(d: usize) -> Self {
        GpHyper {
            lengthscales: vec![0.3; d],
            signal_var: 1.0,
            noise_var: 1e-4,
        }
    }

    fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_var.ln());
        v.push(self.noise_var.ln());
        v
    }

    fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        GpHyper {
            lengthscales: v[..d].iter().map(|x| x.exp()).collect(),
            signal_var: v[d].exp(),
            noise_var: v[d + 1].exp(),
        }
    }
}

/// Log-space box for hyperparameter search.
fn log_bounds(d: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(0.02f64.ln(), 5.0f64.ln()); d];
    b.push((0.05f64.ln(), 20.0f64.ln()));
    b.push((1e-6f64.ln(), 1.0f64.ln()));
    b
}

/// Posterior state after conditioning on the observations.
#[derive(Debug, Clone)]
struct Posterior {
    /// Lower Cholesky factor, row-major `n x n`.
    l: Vec<f64>,
    alpha: Vec<f64>,
    lml: f64,
}

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    bounds: Bounds,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    hyper: GpHyper,
    y_mean: f64,
    y_std: f64,
    post: Option<Posterior>,
}

fn kernel(a: &[f64], b: &[f64], h: &GpHyper) -> f64 {
    let mut s = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(&h.lengthscales) {
        let d = (x - y) / l;
        s += d * d;
    }
    h.signal_var * (-0.5 * s).exp()
}

fn cholesky(k: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = k[j * n + j];
        for p in 0..j {
            d -= k[j * n + p] * k[j * n + p];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        k[j * n + j] = d;
        for i in j + 1..n {
            let mut s = k[i * n + j];
            for p in 0..j {
                s -= k[i * n + p] * k[j * n + p];
            }
            k[i * n + j] = s / d;
        }
        for p in j + 1..n {
            k[j * n + p] = 0.0;
        }
    }
    true
}

fn forward(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        let row = &l[i * n..i * n + i];
        for (p, lv) in row.iter().enumerate() {
            s -= lv * b[p];
        }
        b[i] = s / l[i * n + i];
    }
}

fn backward(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[p * n + i] * b[p];
        }
        b[i] = s / l[i * n + i];
    }
}

fn condition(xs: &[Vec<f64>], ys: &[f64], h: &GpHyper) -> Option<Posterior> {
    let n = xs.len();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&xs[i], &xs[j], h);
            base[i * n + j] = v;
            base[j * n + i] = v;
        }
    }
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut k = base.clone();
        for i in 0..n {
            k[i * n + i] += h.noise_var + jitter;
        }
        if cholesky(&mut k, n) {
            let mut alpha = ys.to_vec();
            forward(&k, n, &mut alpha);
            let fit: f64 = alpha.iter().map(|a| a * a).sum();
            backward(&k, n, &mut alpha);
            let logdet: f64 = (0..n).map(|i| k[i * n + i].ln()).sum();
            let lml = -0.5 * fit - logdet - 0.5 * n as f64 * LN_2PI;
            return Some(Posterior { l: k, alpha, lml });
        }
        jitter = if jitter == 0.0 { 1e-10 * h.signal_var } else { jitter * 10.0 };
    }
    None
}

impl GpSurrogate {
    pub fn new(bounds: Bounds, hyper: GpHyper) -> Self {
        GpSurrogate {
            bounds,
            xs: Vec::new(),
            ys: Vec::new(),
            hyper,
            y_mean: 0.0,
            y_std: 1.0,
            post: None,
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Largest observed objective value.
    pub fn best_observed(&self) -> Option<f64> {
        self.ys.iter().copied().reduce(f64::max)
    }

    fn standardized(&self) -> Vec<f64> {
        self.ys.iter().map(|y| (y - self.y_mean) / self.y_std).collect()
    }

    fn refresh(&mut self) {
        let n = self.ys.len() as f64;
        self.y_mean = self.ys.iter().sum::<f64>() / n;
        let var = self.ys.iter().map(|y| (y - self.y_mean).powi(2)).sum::<f64>() / n;
        self.y_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let ys = self.standardized();
        self.post = condition(&self.xs, &ys, &self.hyper);
    }

    /// Add an observation at `x` (objective-space coordinates).
    pub fn observe(&mut self, x: &[f64], y: f64) {
        self.xs.push(self.bounds.to_unit(x));
        self.ys.push(y);
        self.refresh();
    }

    pub fn set_hyper(&mut self, hyper: GpHyper) {
        self.hyper = hyper;
        if !self.xs.is_empty() {
            self.refresh();
        }
    }

    /// Log marginal likelihood of the standardised observations under `h`.
    pub fn log_marginal_likelihood(&self, h: &GpHyper) -> f64 {
        condition(&self.xs, &self.standardized(), h).map_or(f64::NEG_INFINITY, |p| p.lml)
    }

    /// Maximise the marginal likelihood by bounded compass search from the
    /// current hyperparameters plus `restarts` random starts.
    pub fn fit_hyper(&mut self, restarts: usize, evals_per_start: usize, seed: u64) {
        if self.xs.len() < 2 {
            return;
        }
        let d = self.bounds.dim();
        let lb = log_bounds(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys = self.standardized();
        let objective = |v: &[f64]| {
            condition(&self.xs, &ys, &GpHyper::from_log(v)).map_or(f64::NEG_INFINITY, |p| p.lml)
        };
        let clamp = |v: &mut Vec<f64>| {
            for (x, (lo, hi)) in v.iter_mut().zip(&lb) {
                *x = x.clamp(*lo, *hi);
            }
        };
        let mut starts = vec![self.hyper.to_log()];
        clamp(&mut starts[0]);
        for _ in 0..restarts {
            starts.push(lb.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect());
        }
        let mut best_v = starts[0].clone();
        let mut best_f = objective(&best_v);
        for start in starts {
            let mut x = start;
            let mut fx = objective(&x);
            let mut evals = 1;
            let mut step = 1.0;
            while evals < evals_per_start && step > 1e-3 {
                let mut improved = false;
                for i in 0..x.len() {
                    for dir in [1.0, -1.0] {
                        if evals >= evals_per_start {
                            break;
                        }
                        let mut y = x.clone();
                        y[i] += dir * step;
                        clamp(&mut y);
                        if y[i] == x[i] {
                            continue;
                        }
                        let fy = objective(&y);
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
            if fx > best_f {
                best_f = fx;
                best_v = x;
            }
        }
        self.set_hyper(GpHyper::from_log(&best_v));
    }

    /// Posterior mean and latent variance at `x`, in objective units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        self.predict_unit(&self.bounds.to_unit(x))
    }

    pub(crate) fn predict_unit(&self, u: &[f64]) -> (f64, f64) {
        let Some(post) = &self.post else {
            return (self.y_mean, self.hyper.signal_var * self.y_std * self.y_std);
        };
        let n = self.xs.len();
        let mut k: Vec<f64> = self.xs.iter().map(|x| kernel(u, x, &self.hyper)).collect();
        let mean: f64 = k.iter().zip(&post.alpha).map(|(a, b)| a * b).sum();
        forward(&post.l, n, &mut k);
        let var = (self.hyper.signal_var - k.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        (mean * self.y_std + self.y_mean, var * self.y_std * self.y_std)
    }
}

pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// Expected improvement over `best_f` for maximisation.
pub fn expected_improvement(mean: f64, sd: f64, best_f: f64) -> f64 {
    let gain = mean - best_f;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let u = gain / sd;
    (gain * normal_cdf(u) + sd * normal_pdf(u)).max(0.0)
}

pub fn ei(gp: &GpSurrogate, x: &[f64], best_f: f64) -> f64 {
    let (m, v) = gp.predict(x);
    expected_improvement(m, v.sqrt(), best_f)
}
