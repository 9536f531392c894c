//! Varimax and anchored Varimax by pairwise (Jacobi-style) plane rotations.

use nalgebra::DMatrix;

pub const VARIMAX_TOL: f64 = 1e-10;
pub const VARIMAX_MAX_SWEEPS: usize = 1000;

/// Sum over columns of the variance of squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|col| {
            let m2 = col.iter().map(|v| v * v).sum::<f64>() / p;
            let m4 = col.iter().map(|v| v.powi(4)).sum::<f64>() / p;
            m4 - m2 * m2
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct Rotation {
    /// Orthogonal `k x k` matrix; rotated loadings are `loadings * matrix`.
    pub matrix: DMatrix<f64>,
    /// Criterion before any rotation, then after each sweep.
    pub trace: Vec<f64>,
}

impl Rotation {
    pub fn identity(k: usize, criterion: f64) -> Self {
        Rotation {
            matrix: DMatrix::identity(k, k),
            trace: vec![criterion],
        }
    }

    pub fn sweeps(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Angle maximising the criterion over the `(i, j)` column plane.
fn pair_angle(l: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let p = l.nrows() as f64;
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for r in 0..l.nrows() {
        let (x, y) = (l[(r, i)], l[(r, j)]);
        let u = x * x - y * y;
        let v = 2.0 * x * y;
        a += u;
        b += v;
        c += u * u - v * v;
        d += u * v;
    }
    let num = 2.0 * d - 2.0 * a * b / p;
    let den = c - (a * a - b * b) / p;
    0.25 * num.atan2(den)
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x + s * y;
        m[(r, j)] = -s * x + c * y;
    }
}

/// Raw Varimax rotation of a `p x k` loading matrix.
///
/// Sweeps over all column pairs until a sweep raises the criterion by less
/// than [`VARIMAX_TOL`] or [`VARIMAX_MAX_SWEEPS`] is reached.
pub fn varimax(loadings: &DMatrix<f64>) -> Rotation {
    let k = loadings.ncols();
    let mut l = loadings.clone();
    let mut rot = Rotation::identity(k, varimax_criterion(&l));
    if k < 2 {
        return rot;
    }
    for _ in 0..VARIMAX_MAX_SWEEPS {
        for i in 0..k - 1 {
            for j in i + 1..k {
                let phi = pair_angle(&l, i, j);
                if phi.abs() > 1e-15 {
                    rotate_columns(&mut l, i, j, phi);
                    rotate_columns(&mut rot.matrix, i, j, phi);
                }
            }
        }
        let now = varimax_criterion(&l);
        let before = *rot.trace.last().unwrap();
        rot.trace.push(now);
        if now - before < VARIMAX_TOL {
            break;
        }
    }
    rot
}

/// Keep column `anchor` fixed and Varimax-rotate the others.
pub fn anchored_varimax(loadings: &DMatrix<f64>, anchor: usize) -> Rotation {
    let k = loadings.ncols();
    assert!(anchor < k, "anchor axis out of range");
    let rest: Vec<usize> = (0..k).filter(|&c| c != anchor).collect();
    let sub = loadings.select_columns(&rest);
    let inner = varimax(&sub);
    let mut matrix = DMatrix::zeros(k, k);
    matrix[(anchor, anchor)] = 1.0;
    for (a, &ra) in rest.iter().enumerate() {
        for (b, &rb) in rest.iter().enumerate() {
            matrix[(ra, rb)] = inner.matrix[(a, b)];
        }
    }
    Rotation {
        matrix,
        trace: inner.trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(p, k, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn rotation_is_orthogonal_and_ascends() {
        for seed in 0..20 {
            let l = random(50, 3, seed);
            let rot = varimax(&l);
            let q = &rot.matrix;
            assert!((q.transpose() * q - DMatrix::identity(3, 3)).abs().max() < 1e-12);
            assert!(rot.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", rot.trace);
            let after = varimax_criterion(&(&l * q));
            assert!(after >= varimax_criterion(&l) - 1e-12);
            assert!((after - rot.trace.last().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_structure_is_a_signed_permutation() {
        let mut l = DMatrix::zeros(9, 3);
        for r in 0..9 {
            l[(r, r % 3)] = 0.5 + 0.05 * r as f64;
        }
        let q = varimax(&l).matrix;
        for v in q.iter() {
            assert!(v.abs() < 1e-8 || (v.abs() - 1.0).abs() < 1e-8, "{q}");
        }
    }

    #[test]
    fn anchored_keeps_column_zero() {
        let l = random(40, 3, 9);
        let rot = anchored_varimax(&l, 0);
        let rotated = &l * &rot.matrix;
        assert_eq!(rotated.column(0), l.column(0));
        let sub = l.columns(1, 2).into_owned();
        let free = varimax(&sub);
        let a = varimax_criterion(&rotated.columns(1, 2).into_owned());
        let b = varimax_criterion(&(&sub * &free.matrix));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn anchored_two_axes_is_trivial() {
        let l = random(30, 2, 4);
        let q = anchored_varimax(&l, 0).matrix;
        assert_eq!(q[(0, 0)], 1.0);
        assert_eq!(q[(1, 1)].abs(), 1.0);
        assert_eq!(q[(0, 1)], 0.0);
    }
}
