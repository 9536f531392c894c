mod common;

use common::*;
use osearch::ca::{Board, Rule};
use osearch::corpus::generate_seed_library;
use osearch::score::{capp_score, score_run, WEIGHTS};
use proptest::prelude::*;

#[test]
fn subscores_match_reference_on_50_seeds() {
    for (id, seed) in generate_seed_library(50, 11) {
        let got = capp_score(&seed);
        let (subs, f) = ref_capp(&to_grid(&seed));
        for (run, want) in got.runs.iter().zip(&subs) {
            for (a, b) in run.sub.as_array().iter().zip(want) {
                assert!((a - b).abs() <= 1e-9, "{id} n={} {}: {a} vs {b}", run.n, run.rule);
            }
        }
        assert!((got.f - f).abs() <= 1e-9, "{id}: {} vs {f}", got.f);
    }
}

#[test]
fn run_score_is_the_weighted_sum() {
    for (_, seed) in generate_seed_library(20, 3) {
        for run in capp_score(&seed).runs {
            let w: f64 = run.sub.as_array().iter().zip(WEIGHTS).map(|(v, w)| v * w).sum();
            assert!((run.score - w).abs() <= 1e-12);
        }
    }
}

#[test]
fn all_dead_seed() {
    let s = capp_score(&Board::empty(16));
    for run in &s.runs {
        assert_eq!([run.sub.act, run.sub.div, run.sub.pent, run.sub.bal], [0.0; 4]);
    }
    let expected = s.runs.iter().map(|r| 0.20 * r.sub.ccont).sum::<f64>() / 6.0;
    assert!((s.f - expected).abs() <= 1e-15);
    assert_eq!(s.f, ALL_DEAD_F, "golden all-dead value drifted: {:?}", s.f);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn torus_translation_keeps_shift_invariant_subscores(
        cells in proptest::collection::vec(any::<bool>(), 256),
        dr in 0usize..16,
        dc in 0usize..16,
        r in 0usize..3,
    ) {
        let grid: Grid = cells.chunks(16).map(<[bool]>::to_vec).collect();
        let b = from_grid(&grid);
        let rule: Rule = Rule::BENCHMARK[r];
        let a = score_run(&b, 16, &rule).sub;
        let s = score_run(&b.shifted(dr, dc), 16, &rule).sub;
        for (x, y) in [(a.act, s.act), (a.div, s.div), (a.pent, s.pent), (a.bal, s.bal)] {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn subscores_lie_in_unit_interval(cells in proptest::collection::vec(any::<bool>(), 256)) {
        let grid: Grid = cells.chunks(16).map(<[bool]>::to_vec).collect();
        let s = capp_score(&from_grid(&grid));
        prop_assert!((0.0..=1.0).contains(&s.f));
        for run in &s.runs {
            prop_assert!(run.sub.as_array().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
