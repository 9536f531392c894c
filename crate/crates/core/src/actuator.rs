//! Simulated actuators mapping (retrieval bundle, target) to a candidate
//! board.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ca::Board;
use crate::control::TargetRequest;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::library::RetrievalBundle;
use crate::space::BoardSpace;
use crate::stats::{dist, mix_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActuatorKind {
    NeighborJitter,
    MutationHillclimb,
}

impl ActuatorKind {
    pub fn id(self) -> &'static str {
        match self {
            ActuatorKind::NeighborJitter => "neighbor-jitter",
            ActuatorKind::MutationHillclimb => "mutation-hillclimb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorConfig {
    pub kind: ActuatorKind,
    /// Jitter displacement scale in Z units.
    pub noise_sigma: f64,
    pub invalid_rate: f64,
    pub hillclimb_steps: usize,
    pub self_report_noise: f64,
    /// Cap on cell flips per jitter sample.
    pub max_flips: usize,
}

fn default_max_flips() -> usize {
    64
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        ActuatorConfig {
            kind: ActuatorKind::MutationHillclimb,
            noise_sigma: 0.0,
            invalid_rate: 0.0,
            hillclimb_steps: 8,
            self_report_noise: 0.05,
            max_flips: default_max_flips(),
        }
    }
}

impl ActuatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.invalid_rate) {
            return Err(Error::Config(format!("invalid_rate {} outside [0, 1]", self.invalid_rate)));
        }
        if !(self.noise_sigma >= 0.0) || !(self.self_report_noise >= 0.0) {
            return Err(Error::Config("actuator noise scales must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ActuatorOutput {
    Valid { seed: String },
    Invalid { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub actuator: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorResult {
    pub output: ActuatorOutput,
    /// Self-reported coordinates on the constrained axes, `None` elsewhere.
    pub z_hat: Option<Vec<Option<f64>>>,
    /// Realised coordinates of a valid output.
    pub z: Option<Vec<f64>>,
    /// CA++ score of a valid output.
    pub f: Option<f64>,
    pub provenance: Provenance,
}

impl ActuatorResult {
    pub fn is_valid(&self) -> bool {
        matches!(self.output, ActuatorOutput::Valid { .. })
    }

    pub fn board(&self) -> Option<Board> {
        match &self.output {
            ActuatorOutput::Valid { seed } => Board::parse_seed(seed).ok(),
            ActuatorOutput::Invalid { .. } => None,
        }
    }
}

/// Malformed rendering of `b` that `parse_seed` rejects.
fn malformed(b: &Board) -> String {
    let text = b.to_text();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    let mut out = lines.join("\n");
    out.push_str("\n0000000x\n");
    out
}

fn err_on(req: &TargetRequest, z: &[f64]) -> f64 {
    req.axes.iter().map(|&i| (z[i] - req.z_star[i]).powi(2)).sum::<f64>()
}

fn jitter(space: &BoardSpace, start: &Board, z0: &[f64], cfg: &ActuatorConfig, rng: &mut ChaCha8Rng) -> Board {
    let rho = if cfg.noise_sigma > 0.0 {
        Normal::new(0.0, cfg.noise_sigma).expect("finite sigma").sample(rng).abs()
    } else {
        0.0
    };
    let n = start.side();
    let mut cells: Vec<usize> = (0..n * n).collect();
    cells.shuffle(rng);
    let mut b = start.clone();
    let mut moved = 0.0;
    for &cell in cells.iter().take(cfg.max_flips) {
        if moved >= rho {
            break;
        }
        b.toggle(cell / n, cell % n);
        moved = dist(&space.project(&b), z0);
    }
    b
}

fn hillclimb(space: &BoardSpace, start: &Board, req: &TargetRequest, steps: usize, rng: &mut ChaCha8Rng) -> Board {
    let n = start.side();
    let mut cur = start.clone();
    let mut cur_err = err_on(req, &space.project(&cur));
    for _ in 0..steps {
        let cell = rng.random_range(0..n * n);
        cur.toggle(cell / n, cell % n);
        let e = err_on(req, &space.project(&cur));
        if e < cur_err {
            cur_err = e;
        } else {
            cur.toggle(cell / n, cell % n);
        }
    }
    cur
}

/// One actuator sample seeded by `seed`.
///
/// Starts from the nearer near-exemplar; exemplars without a board yield an
/// invalid output.
pub fn act(space: &BoardSpace, cfg: &ActuatorConfig, bundle: &RetrievalBundle, req: &TargetRequest, seed: u64) -> ActuatorResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let provenance = Provenance {
        actuator: cfg.kind.id().to_string(),
        seed,
    };
    let start = &bundle.near[0];
    let invalid = |text: String| ActuatorResult {
        output: ActuatorOutput::Invalid { text },
        z_hat: None,
        z: None,
        f: None,
        provenance: provenance.clone(),
    };
    let Some(start_board) = start.item.as_ref() else {
        return invalid(String::new());
    };
    if cfg.invalid_rate > 0.0 && rng.random_bool(cfg.invalid_rate) {
        return invalid(malformed(start_board));
    }
    let board = match cfg.kind {
        ActuatorKind::NeighborJitter => jitter(space, start_board, &start.z, cfg, &mut rng),
        ActuatorKind::MutationHillclimb => hillclimb(space, start_board, req, cfg.hillclimb_steps, &mut rng),
    };
    let text = board.to_text();
    let board = match Board::parse_seed(&text) {
        Ok(b) => b,
        Err(_) => return invalid(text),
    };
    let eval = space.evaluate(&board);
    let noise = Normal::new(0.0, cfg.self_report_noise.max(0.0)).expect("finite sigma");
    let mut z_hat = vec![None; eval.z.len()];
    for &i in &req.axes {
        let eps = if cfg.self_report_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        z_hat[i] = Some(eval.z[i] + eps);
    }
    ActuatorResult {
        output: ActuatorOutput::Valid { seed: text },
        z_hat: Some(z_hat),
        z: Some(eval.z.clone()),
        f: Some(eval.f()),
        provenance,
    }
}

/// Stream seed of candidate `k` of a request.
pub fn candidate_seed(request_seed: u64, k: usize) -> u64 {
    mix_seed(request_seed, k as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestOf {
    pub results: Vec<ActuatorResult>,
    /// Valid result with the smallest joint error, first on ties.
    pub best: Option<usize>,
}

/// `k` independent samples, candidate streams split from `request_seed`.
pub fn act_best_of(
    space: &BoardSpace,
    cfg: &ActuatorConfig,
    bundle: &RetrievalBundle,
    req: &TargetRequest,
    k: usize,
    request_seed: u64,
    exec: Exec,
) -> BestOf {
    let results = exec.map_range(k.max(1), |i| act(space, cfg, bundle, req, candidate_seed(request_seed, i)));
    let best = best_by_error(&results, req);
    BestOf { results, best }
}

pub fn best_by_error(results: &[ActuatorResult], req: &TargetRequest) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(z) = &r.z {
            let e = req.joint_error(z);
            if best.is_none_or(|(_, be)| e < be) {
                best = Some((i, e));
            }
        }
    }
    best.map(|(i, _)| i)
}
