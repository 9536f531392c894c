mod common;

use common::*;
use osearch::library::{band_mask, BandFilter, Exemplar, Library};
use osearch::stats::quantile;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn retrieval_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (lattice, d) in [(false, 3), (true, 3), (true, 2), (false, 5)] {
        let lib = random_library(500, d, lattice, &mut rng);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..d)
                .map(|_| if lattice { rng.random_range(-3i32..=3) as f64 } else { rng.random_range(-3.0..3.0) })
                .collect();
            let order = brute_order(&lib, &q, &[]);
            let got: Vec<&str> = lib.nearest(&q, 5, &[]).iter().map(|&i| lib.entries()[i].id.as_str()).collect();
            assert_eq!(got, order[..5].iter().map(String::as_str).collect::<Vec<_>>());

            let bundle = lib.retrieve(&q).unwrap();
            assert_eq!([bundle.near[0].id.as_str(), bundle.near[1].id.as_str()], [order[0].as_str(), order[1].as_str()]);
            let neg: Vec<f64> = q.iter().map(|v| -v).collect();
            let contrast = &brute_order(&lib, &neg, &[&order[0], &order[1]])[0];
            assert_eq!(&bundle.contrast.id, contrast);
        }
    }
}

#[test]
fn ties_resolve_by_id() {
    let entries = ["c", "a", "b", "d"]
        .iter()
        .map(|id| Exemplar {
            id: id.to_string(),
            item: None,
            z: vec![1.0, 0.0],
            score: None,
        })
        .collect();
    let lib = Library::from_exemplars(entries, None).unwrap();
    let b = lib.retrieve(&[1.0, 0.0]).unwrap();
    assert_eq!((b.near[0].id.as_str(), b.near[1].id.as_str(), b.contrast.id.as_str()), ("a", "b", "c"));
}

proptest! {
    #[test]
    fn band_mask_keeps_exactly_the_outer_rows(
        rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..60),
        q in 0.0f64..1.0,
    ) {
        let mask = band_mask(&rows, BandFilter { quantile: q });
        for (row, kept) in rows.iter().zip(mask) {
            let expect = (0..3).any(|a| {
                let col: Vec<f64> = rows.iter().map(|r| r[a].abs()).collect();
                let t = quantile(&col, q);
                row[a].abs() >= t && row[a].abs() > 0.0
            });
            prop_assert_eq!(kept, expect);
        }
    }
}
