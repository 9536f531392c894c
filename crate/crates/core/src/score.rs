//! CA++ objective: five subscores per (grid, rule) run, their weighted sum,
//! the six-run composite and the 30-entry trajectory feature vector.

use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::ca::{self, Board, Rule, Trajectory, EMBED_SIDE, SEED_SIDE};
use crate::exec::Exec;

/// Weights of (act, div, pent, ccont, bal).
pub const WEIGHTS: [f64; 5] = [0.30, 0.20, 0.25, 0.20, 0.05];

/// Grid sides evaluated per seed, in run order.
pub const GRIDS: [usize; 2] = [SEED_SIDE, EMBED_SIDE];

/// DEFLATE setup behind `compression_contrast`; the ratio is compressor
/// sensitive, so this string is written into every score record.
pub const COMPRESSOR: &str = "raw-deflate(rfc1951) level=9 window=32KiB strategy=default backend=flate2-1.1/miniz_oxide-0.9";

const DEFLATE_LEVEL: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subscores {
    pub act: f64,
    pub div: f64,
    pub pent: f64,
    pub ccont: f64,
    pub bal: f64,
}

impl Subscores {
    pub fn as_array(&self) -> [f64; 5] {
        [self.act, self.div, self.pent, self.ccont, self.bal]
    }

    pub fn weighted(&self) -> f64 {
        self.as_array()
            .iter()
            .zip(WEIGHTS)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn from_trajectory(traj: &Trajectory) -> Subscores {
        Subscores {
            act: activity(traj),
            div: diversity(traj),
            pent: patch_entropy(traj),
            ccont: compression_contrast(traj),
            bal: balance(traj),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub n: usize,
    pub rule: String,
    #[serde(flatten)]
    pub sub: Subscores,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaPlusPlusScore {
    pub runs: Vec<RunScore>,
    pub f: f64,
}

impl CaPlusPlusScore {
    pub fn from_runs(runs: Vec<RunScore>) -> Self {
        let mean = runs.iter().map(|r| r.score).sum::<f64>() / runs.len() as f64;
        CaPlusPlusScore {
            runs,
            f: mean.clamp(0.0, 1.0),
        }
    }

    /// Subscores of all runs flattened in run order.
    pub fn features(&self) -> FeatureVector {
        let mut v = [0.0; FeatureVector::LEN];
        for (i, run) in self.runs.iter().enumerate() {
            v[i * 5..i * 5 + 5].copy_from_slice(&run.sub.as_array());
        }
        FeatureVector(v)
    }
}

/// 6 runs x (act, div, pent, ccont, bal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; 30]);

impl FeatureVector {
    pub const LEN: usize = 30;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean fraction of cells flipping per step.
pub fn activity(traj: &Trajectory) -> f64 {
    let t = traj.steps();
    assert!(t >= 1, "activity needs at least one step");
    let cells = traj.states[0].cell_count() as f64;
    let flips: usize = traj.states.windows(2).map(|w| w[1].hamming(&w[0])).sum();
    flips as f64 / (t as f64 * cells)
}

/// Number of 4-connected components of live cells with wraparound.
pub fn component_count(b: &Board) -> usize {
    let n = b.side();
    let mut seen = vec![0u64; n];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(64);
    let mut count = 0;
    for r in 0..n {
        loop {
            let fresh = b.rows()[r] & !seen[r];
            if fresh == 0 {
                break;
            }
            let c = fresh.trailing_zeros() as usize;
            count += 1;
            seen[r] |= 1 << c;
            stack.push((r, c));
            while let Some((r, c)) = stack.pop() {
                let nbrs = [
                    ((r + n - 1) % n, c),
                    ((r + 1) % n, c),
                    (r, (c + n - 1) % n),
                    (r, (c + 1) % n),
                ];
                for (nr, nc) in nbrs {
                    let bit = 1u64 << nc;
                    if b.rows()[nr] & bit != 0 && seen[nr] & bit == 0 {
                        seen[nr] |= bit;
                        stack.push((nr, nc));
                    }
                }
            }
        }
    }
    count
}

/// Mean component count over `x_1..x_T`, relative to `n^2/4`, capped at 1.
pub fn diversity(traj: &Trajectory) -> f64 {
    let t = traj.steps();
    assert!(t >= 1, "diversity needs at least one step");
    let n = traj.side() as f64;
    let total: usize = traj.states[1..].iter().map(component_count).sum();
    let mean = total as f64 / t as f64;
    (mean / (n * n / 4.0)).min(1.0)
}

/// Histogram of 9-bit 3x3 wraparound codes over the whole spacetime.
///
/// Bits are row-major over the window with the top-left cell most
/// significant.
pub fn patch_histogram(traj: &Trajectory) -> [u64; 512] {
    let mut hist = [0u64; 512];
    let n = traj.side();
    let mut triples = vec![0u16; n * n];
    for b in &traj.states {
        // triples[r*n + c] = (x[r][c-1], x[r][c], x[r][c+1]) as a 3-bit code
        for (r, &row) in b.rows().iter().enumerate() {
            for c in 0..n {
                let left = row >> ((c + n - 1) % n) & 1;
                let mid = row >> c & 1;
                let right = row >> ((c + 1) % n) & 1;
                triples[r * n + c] = ((left << 2) | (mid << 1) | right) as u16;
            }
        }
        for r in 0..n {
            let up = (r + n - 1) % n;
            let down = (r + 1) % n;
            for c in 0..n {
                let code = (triples[up * n + c] << 6) | (triples[r * n + c] << 3) | triples[down * n + c];
                hist[code as usize] += 1;
            }
        }
    }
    hist
}

/// Shannon entropy (bits) of a histogram, divided by 9.
pub fn normalized_entropy(hist: &[u64; 512]) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / total;
            p * p.log2()
        })
        .sum();
    (0.0 - h) / 9.0
}

pub fn patch_entropy(traj: &Trajectory) -> f64 {
    normalized_entropy(&patch_histogram(traj))
}

/// Row-major ASCII `'0'`/`'1'` serialisation of all states.
pub fn spacetime_bytes(traj: &Trajectory) -> Vec<u8> {
    let n = traj.side();
    let mut out = Vec::with_capacity(traj.states.len() * n * n);
    for b in &traj.states {
        for &row in b.rows() {
            out.extend((0..n).map(|c| b'0' + (row >> c & 1) as u8));
        }
    }
    out
}

/// Length of the raw DEFLATE stream for `bytes` under the pinned setup.
pub fn deflate_len(bytes: &[u8]) -> usize {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 4 + 64), Compression::new(DEFLATE_LEVEL));
    enc.write_all(bytes).expect("in-memory deflate");
    enc.finish().expect("in-memory deflate").len()
}

/// `2 * min(r, 1 - r)` for a compression ratio `r` (clamped to `[0, 1]`).
pub fn contrast_from_ratio(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    2.0 * r.min(1.0 - r)
}

pub fn compression_contrast(traj: &Trajectory) -> f64 {
    let raw = spacetime_bytes(traj);
    let ratio = deflate_len(&raw) as f64 / raw.len() as f64;
    contrast_from_ratio(ratio)
}

/// `4 l (1 - l)` for the mean live fraction `l` over `x_1..x_T`.
pub fn balance(traj: &Trajectory) -> f64 {
    let t = traj.steps();
    assert!(t >= 1, "balance needs at least one step");
    let cells = traj.states[0].cell_count() as f64;
    let live: usize = traj.states[1..].iter().map(Board::live_count).sum();
    let mean = live as f64 / (t as f64 * cells);
    4.0 * mean * (1.0 - mean)
}

/// Score one `(grid, rule)` run of a 16x16 seed.
pub fn score_run(seed: &Board, n: usize, rule: &Rule) -> RunScore {
    assert_eq!(seed.side(), SEED_SIDE, "seeds are 16x16");
    let start = if n == SEED_SIDE {
        seed.clone()
    } else {
        seed.embed_center(n).expect("valid embedding side")
    };
    let traj = ca::simulate(&start, rule, ca::horizon(n));
    let sub = Subscores::from_trajectory(&traj);
    RunScore {
        n,
        rule: rule.name.to_string(),
        score: sub.weighted(),
        sub,
    }
}

/// Runs in order `(16, Life), (16, HighLife), (16, Seeds), (24, ...)`.
pub fn run_order() -> impl Iterator<Item = (usize, Rule)> {
    GRIDS
        .into_iter()
        .flat_map(|n| Rule::BENCHMARK.into_iter().map(move |r| (n, r)))
}

/// Composite CA++ score of a seed.
pub fn capp_score(seed: &Board) -> CaPlusPlusScore {
    CaPlusPlusScore::from_runs(run_order().map(|(n, r)| score_run(seed, n, &r)).collect())
}

pub fn feature_vector(seed: &Board) -> FeatureVector {
    capp_score(seed).features()
}

/// Score many seeds.
pub fn score_batch(seeds: &[Board], exec: Exec) -> Vec<CaPlusPlusScore> {
    exec.map(seeds, capp_score)
}
