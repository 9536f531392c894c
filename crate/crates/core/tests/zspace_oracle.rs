mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use osearch::encoder::{CorpusSource, EmbeddingCorpus};
use osearch::error::Error;
use osearch::exec::Exec;
use osearch::zspace::{
    diagnostics, fit, model_select, varimax, FitConfig, GridConfig, PreferenceWeights, SelectionConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noisy(n: usize, d: usize, seed: u64) -> EmbeddingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let base = rank3_corpus(n, d, seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| base.row(i).iter().map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    EmbeddingCorpus::from_rows(base.ids.clone(), &rows, CorpusSource::ExternalImport).unwrap()
}

/// `1 - SSE / SST` computed directly from the basis.
fn direct_r2(c: &EmbeddingCorpus, u: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
    let (mut sse, mut sst) = (0.0, 0.0);
    for i in 0..c.len() {
        let x = DVector::from_vec(c.row(i)) - mu;
        let r = &x - u * (u.transpose() * &x);
        sse += r.norm_squared();
        sst += x.norm_squared();
    }
    1.0 - sse / sst
}

#[test]
fn rank3_corpus_is_reconstructed_exactly() {
    for seed in 0..4 {
        let c = rank3_corpus(80, 20, seed);
        assert!(matches!(fit(&c, &FitConfig::new(8, 3), None), Err(Error::RankDeficient { rank: 3, .. })));
        for cfg in [FitConfig::new(3, 3), FitConfig { whiten: true, ..FitConfig::new(3, 3) }] {
            let m = fit(&c, &cfg, None).unwrap();
            let d = diagnostics(&m, &c, &[5], None, &PreferenceWeights::default(), None, Exec::Sequential);
            assert!((d.recon_r2 - 1.0).abs() <= 1e-9, "{cfg:?}: {}", d.recon_r2);
            assert!((direct_r2(&c, m.basis(), m.mu()) - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn basis_is_orthonormal_and_projector_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let c = noisy(60, 15, seed);
        let m = fit(&c, &FitConfig::new(8, 4), None).unwrap();
        let u = m.basis();
        assert!((u.tr_mul(u) - DMatrix::identity(4, 4)).abs().max() <= 1e-9);
        let r = random_orthogonal(4, &mut rng);
        let rotated = m.rotated(&r);
        let p0 = u * u.transpose();
        let p1 = rotated.basis() * rotated.basis().transpose();
        assert!((p0 - p1).abs().max() <= 1e-9);
        let e = c.row(3);
        let z0 = DVector::from_vec(m.project(&e).unwrap());
        let z1 = DVector::from_vec(rotated.project(&e).unwrap());
        assert!((r.transpose() * z0 - z1).abs().max() <= 1e-9);
    }
}

#[test]
fn varimax_matches_gradient_ascent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let l = DMatrix::<f64>::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let rot = varimax(&l);
        assert!(rot.trace.windows(2).all(|w| w[1] >= w[0]), "{:?}", rot.trace);
        let ours = criterion(&(&l * &rot.matrix));
        let starts: Vec<DMatrix<f64>> = (0..6).map(|_| random_orthogonal(3, &mut rng)).collect();
        let oracle = varimax_gradient_oracle(&l, &starts);
        assert!((ours - oracle).abs() <= 1e-6, "{ours} vs {oracle}");
    }
}

#[test]
fn anchored_first_axis_follows_the_anchor() {
    let c = noisy(90, 12, 9);
    let anchor_rows = [0usize, 4, 9, 13, 27];
    let mut anchor = vec![0.0; c.dim()];
    for &r in &anchor_rows {
        for (a, v) in anchor.iter_mut().zip(c.row(r)) {
            *a += v / anchor_rows.len() as f64;
        }
    }
    let m = fit(&c, &FitConfig { anchored: true, ..FitConfig::new(6, 3) }, Some(&anchor)).unwrap();
    let dir = DVector::from_vec(anchor.clone()) - m.mu();
    let captured = m.basis().tr_mul(&dir);
    let on_z1 = captured[0].powi(2) / captured.norm_squared();
    assert!(on_z1 > 0.999, "{on_z1}");
    assert!(captured[0] > 0.0);
    let d = diagnostics(&m, &c, &[5], Some(&anchor), &PreferenceWeights::default(), None, Exec::Sequential);
    assert!((d.anchor_on_z1.unwrap() - on_z1).abs() <= 1e-12);
}

#[test]
fn model_select_ranks_by_independently_recomputed_preference() {
    let c = noisy(70, 14, 21);
    let grid = GridConfig {
        d_inter: vec![4, 6, 8],
        d_z: vec![2, 3, 4],
        whiten: vec![false, true],
        anchored: vec![false],
    };
    let sel = SelectionConfig::default();
    let ranked = model_select(&c, &grid, &sel, None, Exec::Parallel).unwrap();
    let mut oracle: Vec<(FitConfig, f64)> = Vec::new();
    for cfg in grid.expand(c.len()) {
        let m = fit(&c, &cfg, None).unwrap();
        let d = diagnostics(&m, &c, &sel.k_list, None, &sel.weights, None, Exec::Sequential);
        let w = sel.weights;
        let mean = |v: &std::collections::BTreeMap<usize, f64>| v.values().sum::<f64>() / v.len() as f64;
        let pref = w.recon_r2 * d.recon_r2 + w.knn_recall * mean(&d.knn_recall) + w.trustworthiness * mean(&d.trustworthiness)
            + w.hoyer * d.hoyer_mean
            - w.dz_penalty * (cfg.d_z as f64 - 3.0).powi(2);
        oracle.push((cfg, pref));
    }
    oracle.sort_by(|a, b| b.1.total_cmp(&a.1));
    assert_eq!(ranked.len(), oracle.len());
    for (r, (cfg, pref)) in ranked.iter().zip(&oracle) {
        assert_eq!(&r.config, cfg);
        assert!((r.diagnostics.preference - pref).abs() <= 1e-12);
    }
}
