//! Transient/cycle decomposition of trajectories on finite tori.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ca::{self, Board, Rule};
use crate::exec::Exec;

/// Default step budget for pool analyses.
pub const DEFAULT_MAX_STEPS: usize = 4096;

/// `mu`, `lambda` and `t_repeat` are `None` when the budget ran out first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStats {
    pub mu: Option<usize>,
    pub lambda: Option<usize>,
    pub t_repeat: Option<usize>,
    pub capped: bool,
}

impl CycleStats {
    fn found(mu: usize, lambda: usize) -> Self {
        CycleStats {
            mu: Some(mu),
            lambda: Some(lambda),
            t_repeat: Some(mu + lambda),
            capped: false,
        }
    }

    const CAPPED: CycleStats = CycleStats {
        mu: None,
        lambda: None,
        t_repeat: None,
        capped: true,
    };
}

/// Simulate until the first revisit of a state, up to `max_steps` updates.
///
/// States are keyed by their packed rows; hash hits are confirmed by full
/// equality through the map's `Eq`.
pub fn decompose(seed: &Board, rule: &Rule, max_steps: usize) -> CycleStats {
    assert!(max_steps >= 1, "max_steps must be positive");
    let mut first_seen: HashMap<Board, usize> = HashMap::with_capacity(256);
    let mut cur = seed.clone();
    let mut next = Board::empty(seed.side());
    first_seen.insert(cur.clone(), 0);
    for t in 1..=max_steps {
        ca::step_into(&cur, rule, &mut next);
        std::mem::swap(&mut cur, &mut next);
        if let Some(&t0) = first_seen.get(&cur) {
            return CycleStats::found(t0, t - t0);
        }
        first_seen.insert(cur.clone(), t);
    }
    CycleStats::CAPPED
}

/// Decompose a pool of seeds.
pub fn decompose_pool(seeds: &[Board], rule: &Rule, max_steps: usize, exec: Exec) -> Vec<CycleStats> {
    exec.map(seeds, |s| decompose(s, rule, max_steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    TRepeat,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub seed_id: String,
    #[serde(flatten)]
    pub stats: CycleStats,
}

/// Top `k` by the chosen key, descending; ties by `seed_id` ascending.
/// Capped entries have no key and rank after every resolved entry.
pub fn rank_pool(entries: &[CycleRecord], key: RankKey, k: usize) -> Vec<CycleRecord> {
    let value = |e: &CycleRecord| match key {
        RankKey::TRepeat => e.stats.t_repeat,
        RankKey::Lambda => e.stats.lambda,
    };
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| match (value(a), value(b)) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.seed_id.cmp(&b.seed_id)));
    sorted.truncate(k);
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn glider(n: usize) -> Board {
        let mut b = Board::empty(n);
        for (r, c) in [(0, 1), (1, 2), (2, 0), (2, 1), (2, 2)] {
            b.set(r + 2, c + 2, true);
        }
        b
    }

    #[test]
    fn fixed_points() {
        let s = decompose(&Board::empty(16), &Rule::LIFE, 10);
        assert_eq!(s, CycleStats::found(0, 1));
        let mut block = Board::empty(16);
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            block.set(r, c, true);
        }
        assert_eq!(decompose(&block, &Rule::LIFE, 10).lambda, Some(1));
    }

    #[test]
    fn glider_period_on_16_torus() {
        let s = decompose(&glider(16), &Rule::LIFE, DEFAULT_MAX_STEPS);
        assert_eq!(s.mu, Some(0));
        assert_eq!(s.lambda, Some(64));
        assert_eq!(s.t_repeat, Some(64));
    }

    #[test]
    fn budget_exhaustion_is_capped() {
        let s = decompose(&glider(16), &Rule::LIFE, 10);
        assert!(s.capped);
        assert_eq!(s.t_repeat, None);
    }

    #[test]
    fn ranking() {
        let rec = |id: &str, mu, lambda| CycleRecord {
            seed_id: id.into(),
            stats: CycleStats::found(mu, lambda),
        };
        let pool = vec![
            rec("b", 0, 64),
            rec("a", 701, 1),
            rec("c", 0, 64),
            CycleRecord { seed_id: "0".into(), stats: CycleStats::CAPPED },
        ];
        let top = rank_pool(&pool, RankKey::TRepeat, 10);
        assert_eq!(top[0].stats.t_repeat, Some(702));
        let ids: Vec<_> = top.iter().map(|r| r.seed_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "0"]);
        let by_lambda = rank_pool(&pool, RankKey::Lambda, 2);
        assert_eq!(by_lambda.iter().map(|r| r.seed_id.as_str()).collect::<Vec<_>>(), ["b", "c"]);
        assert_eq!(rank_pool(&pool[..1], RankKey::Lambda, 5), pool[..1].to_vec());
    }
}
