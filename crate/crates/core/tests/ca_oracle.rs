mod common;

use common::*;
use osearch::ca::{horizon, simulate, step, Board, Rule};
use osearch::cycles::decompose;
use proptest::prelude::*;

pub fn glider16() -> Board {
    let mut b = Board::empty(16);
    for (r, c) in [(0, 1), (1, 2), (2, 0), (2, 1), (2, 2)] {
        b.set(r, c, true);
    }
    b
}

#[test]
fn every_3x3_board_matches_reference() {
    for rule in Rule::BENCHMARK {
        let (birth, survive) = rule_sets(&rule);
        for code in 0..512u64 {
            let b = board_from_code(3, code);
            assert_eq!(to_grid(&step(&b, &rule)), ref_step(&to_grid(&b), &birth, &survive), "{} code {code}", rule.name);
        }
    }
}

#[test]
fn horizons() {
    assert_eq!(horizon(16), 64);
    assert_eq!(horizon(24), 96);
    assert_eq!(horizon(3), 64);
}

#[test]
fn glider_returns_after_64_generations() {
    let g = glider16();
    let s = decompose(&g, &Rule::LIFE, 1000);
    assert_eq!((s.mu, s.lambda), (Some(0), Some(64)));
    let traj = simulate(&g, &Rule::LIFE, 64);
    assert_eq!(traj.states[64], g);
    assert!(traj.states[1..64].iter().all(|b| *b != g));
}

#[test]
fn still_boards_have_unit_cycles() {
    let mut block = Board::empty(16);
    for (r, c) in [(7, 7), (7, 8), (8, 7), (8, 8)] {
        block.set(r, c, true);
    }
    for b in [Board::empty(16), block] {
        let s = decompose(&b, &Rule::LIFE, 100);
        assert_eq!((s.mu, s.lambda, s.t_repeat), (Some(0), Some(1), Some(1)));
    }
}

#[test]
fn exhaustive_4x4_seeds_cycles() {
    for code in 0..1u64 << 16 {
        let b = board_from_code(4, code);
        let s = decompose(&b, &Rule::SEEDS, 1 << 16);
        let (mu, lambda) = ref_cycle(&to_grid(&b), &Rule::SEEDS, 1 << 16).expect("finite torus cycles");
        assert_eq!((s.mu, s.lambda), (Some(mu), Some(lambda)), "code {code:#06x}");
    }
}

#[test]
fn capped_budget_is_reported() {
    let s = decompose(&glider16(), &Rule::LIFE, 10);
    assert!(s.capped && s.t_repeat.is_none());
}

fn board_strategy(max_side: usize) -> impl Strategy<Value = Board> {
    sized_board(3..=max_side)
}

fn sized_board(sides: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Board> {
    sides.prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |cells| {
            let grid: Grid = cells.chunks(n).map(<[bool]>::to_vec).collect();
            from_grid(&grid)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_matches_reference_on_random_tori(b in board_strategy(20), r in 0usize..3) {
        let rule = Rule::BENCHMARK[r];
        let (birth, survive) = rule_sets(&rule);
        prop_assert_eq!(to_grid(&step(&b, &rule)), ref_step(&to_grid(&b), &birth, &survive));
    }

    #[test]
    fn step_commutes_with_translation(b in board_strategy(16), dr in 0usize..16, dc in 0usize..16, r in 0usize..3) {
        let rule = Rule::BENCHMARK[r];
        let (dr, dc) = (dr % b.side(), dc % b.side());
        prop_assert_eq!(step(&b.shifted(dr, dc), &rule), step(&b, &rule).shifted(dr, dc));
    }

    #[test]
    fn cycle_stats_replay(b in board_strategy(5), r in 0usize..3) {
        let rule = Rule::BENCHMARK[r];
        let s = decompose(&b, &rule, 1 << 20);
        let (mu, lambda) = (s.mu.unwrap(), s.lambda.unwrap());
        let traj = simulate(&b, &rule, mu + lambda);
        prop_assert_eq!(&traj.states[mu], &traj.states[mu + lambda]);
        let distinct: std::collections::HashSet<_> = traj.states[..mu + lambda].iter().collect();
        prop_assert_eq!(distinct.len(), mu + lambda);
    }

    #[test]
    fn seed_text_round_trip(b in sized_board(16..=16)) {
        prop_assert_eq!(Board::parse_seed(&b.to_text()).unwrap(), b);
    }
}
