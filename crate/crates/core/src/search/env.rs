use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CandidateRecord, QueryEnv};
use crate::actuator::{act_best_of, candidate_seed, ActuatorConfig, ActuatorOutput};
use crate::control::{reward, AxisScales, RewardConfig, TargetRequest};
use crate::exec::Exec;
use crate::library::{near_duplicate, Exemplar, Library, DUPLICATE_SIMILARITY};
use crate::space::BoardSpace;

/// Retrieval plus simulated actuator plus CA++ scoring.
pub struct ActuatedEnv<'a> {
    pub space: &'a BoardSpace,
    pub library: Library,
    pub actuator: ActuatorConfig,
    pub scales: AxisScales,
    pub axes: Vec<usize>,
    pub alpha: f64,
    pub reward: RewardConfig,
    pub dup_threshold: f64,
    pub exec: Exec,
    grown: usize,
}

impl<'a> ActuatedEnv<'a> {
    pub fn new(space: &'a BoardSpace, library: Library, actuator: ActuatorConfig, scales: AxisScales, exec: Exec) -> Self {
        let d = scales.d_z();
        ActuatedEnv {
            space,
            library,
            actuator,
            scales,
            axes: (0..d).collect(),
            alpha: 1.0,
            reward: RewardConfig::default(),
            dup_threshold: DUPLICATE_SIMILARITY,
            exec,
            grown: 0,
        }
    }

    pub fn grown(&self) -> usize {
        self.grown
    }
}

impl QueryEnv for ActuatedEnv<'_> {
    fn d_z(&self) -> usize {
        self.scales.d_z()
    }

    fn axes(&self) -> Vec<usize> {
        self.axes.clone()
    }

    fn query(&mut self, z_star: &[f64], k: usize, seed: u64) -> Vec<CandidateRecord> {
        let req = TargetRequest {
            axes: self.axes.clone(),
            z_star: z_star.to_vec(),
            alpha: self.alpha,
            scales: self.scales.clone(),
        };
        let bundle = self.library.retrieve(z_star).expect("library holds at least three entries");
        let out = act_best_of(self.space, &self.actuator, &bundle, &req, k, seed, self.exec);
        out.results
            .into_iter()
            .map(|r| {
                let board = r.board();
                let dup = board.as_ref().is_some_and(|b| near_duplicate(b, &bundle, self.dup_threshold));
                let degenerate = board.as_ref().is_some_and(|b| b.live_count() < self.reward.min_live_cells);
                let rb = reward(r.is_valid(), r.z.as_deref(), r.z_hat.as_deref(), &req, dup, degenerate, &self.reward);
                CandidateRecord {
                    valid: r.is_valid(),
                    seed: match &r.output {
                        ActuatorOutput::Valid { seed } => Some(seed.clone()),
                        ActuatorOutput::Invalid { .. } => None,
                    },
                    joint_error: r.z.as_ref().map(|z| req.joint_error(z)),
                    z: r.z,
                    z_hat: r.z_hat,
                    f: r.f,
                    reward: Some(rb),
                    near_duplicate: dup,
                    provenance: format!("{}:{}", r.provenance.actuator, r.provenance.seed),
                }
            })
            .collect()
    }

    fn absorb(&mut self, best: &CandidateRecord) -> bool {
        let (Some(text), Some(z)) = (&best.seed, &best.z) else {
            return false;
        };
        let Ok(item) = crate::ca::Board::parse_seed(text) else {
            return false;
        };
        let id = format!("grown-{:05}", self.grown);
        let inserted = self.library.grow(Exemplar {
            id,
            item: Some(item),
            z: z.clone(),
            score: best.f,
        });
        if inserted {
            self.grown += 1;
        }
        inserted
    }
}

/// Closed-form objective over `Z` with a Gaussian realisation error.
pub struct SyntheticEnv<F> {
    pub d_z: usize,
    pub objective: F,
    pub noise_sigma: f64,
    pub invalid_rate: f64,
}

impl<F: Fn(&[f64]) -> f64> SyntheticEnv<F> {
    /// Noise-free, always-valid actuator.
    pub fn perfect(d_z: usize, objective: F) -> Self {
        SyntheticEnv {
            d_z,
            objective,
            noise_sigma: 0.0,
            invalid_rate: 0.0,
        }
    }
}

impl<F: Fn(&[f64]) -> f64> QueryEnv for SyntheticEnv<F> {
    fn d_z(&self) -> usize {
        self.d_z
    }

    fn query(&mut self, z_star: &[f64], k: usize, seed: u64) -> Vec<CandidateRecord> {
        (0..k.max(1))
            .map(|i| {
                let s = candidate_seed(seed, i);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let provenance = format!("synthetic:{s}");
                if self.invalid_rate > 0.0 && rng.random_bool(self.invalid_rate.min(1.0)) {
                    return CandidateRecord {
                        valid: false,
                        seed: None,
                        z: None,
                        z_hat: None,
                        f: None,
                        joint_error: None,
                        reward: None,
                        near_duplicate: false,
                        provenance,
                    };
                }
                let z: Vec<f64> = if self.noise_sigma > 0.0 {
                    let n = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
                    z_star.iter().map(|v| v + n.sample(&mut rng)).collect()
                } else {
                    z_star.to_vec()
                };
                let err = z.iter().zip(z_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                CandidateRecord {
                    valid: true,
                    seed: None,
                    f: Some((self.objective)(&z)),
                    joint_error: Some(err),
                    z: Some(z),
                    z_hat: None,
                    reward: None,
                    near_duplicate: false,
                    provenance,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn bump(z: &[f64]) -> f64 {
        let c = [0.4, -0.3, 0.2];
        (-z.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 0.5).exp()
    }

    #[test]
    fn budget_counts_scored_valid_only() {
        let mut env = SyntheticEnv {
            d_z: 3,
            objective: bump,
            noise_sigma: 0.1,
            invalid_rate: 0.4,
        };
        let b = Bounds::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let run = random_search(&b, 40, 5, 9, &mut env).unwrap();
        let scored: usize = run.records.iter().flat_map(|r| &r.candidates).filter(|c| c.scored()).count();
        assert_eq!(scored, run.n_ok);
        assert!(run.n_ok < 200);
        let trace = best_so_far_trace(&run);
        assert_eq!(trace.len(), run.n_ok);
        assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(trace.last().unwrap().1, run.best_so_far().unwrap());
    }

    #[test]
    fn zero_budget_logs_warm_only() {
        let mut env = SyntheticEnv::perfect(3, bump);
        let b = Bounds::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let warm = vec![WarmPoint {
            z_star: vec![0.0; 3],
            z_realised: vec![0.0; 3],
            f: bump(&[0.0; 3]),
            seed: None,
        }];
        let cfg = BoConfig::new(0, 5, UpdateMode::Realised, 1);
        let run = bo_loop(&b, &warm, &cfg, &mut env, Exec::Sequential).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.records[0].phase, Phase::Warm);
        assert_eq!(run.queries(), 0);
    }

    #[test]
    fn all_invalid_stops_at_cap() {
        let mut env = SyntheticEnv {
            d_z: 2,
            objective: |_: &[f64]| 0.0,
            noise_sigma: 0.0,
            invalid_rate: 1.0,
        };
        let b = Bounds::new(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let mut cfg = BoConfig::new(5, 2, UpdateMode::Requested, 1);
        cfg.max_queries = Some(7);
        let run = bo_loop(&b, &[], &cfg, &mut env, Exec::Sequential).unwrap();
        assert_eq!(run.queries(), 7);
        assert_eq!(run.n_ok, 0);
        assert!(run.records.iter().all(|r| r.note.as_deref() == Some("no_valid_candidates")));
    }
}
