//! Hurwitz tests and positive solutions for Metzler matrices.
//!
//! A Metzler matrix `M` (non-negative off-diagonal) is Hurwitz exactly when
//! `−M` is a nonsingular M-matrix, and that holds exactly when Gaussian
//! elimination on `−M` without pivoting produces only positive pivots. In
//! that case `−M⁻¹ ≥ 0`, so `a = −M⁻¹·1` is a positive vector with `M a = −1`.

use nalgebra::{DMatrix, DVector};

/// Relative size below which a pivot counts as zero.
const PIVOT_TOL: f64 = 1e-14;

pub fn is_metzler(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] >= 0.0))
}

/// Pivots of Gaussian elimination on `−M` without row exchanges. Stops at
/// the first pivot that is not positive.
pub fn m_matrix_pivots(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut w = -m.clone();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let p = w[(k, k)];
        pivots.push(p);
        if !(p > PIVOT_TOL * scale * n as f64) {
            break;
        }
        for i in k + 1..n {
            let f = w[(i, k)] / p;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                w[(i, j)] -= f * w[(k, j)];
            }
        }
    }
    pivots
}

/// True when the Metzler matrix `m` is Hurwitz (all eigenvalues in the open
/// left half-plane).
pub fn is_hurwitz_metzler(m: &DMatrix<f64>) -> bool {
    debug_assert!(is_metzler(m));
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let pivots = m_matrix_pivots(m);
    pivots.len() == n && pivots.iter().all(|p| *p > PIVOT_TOL * scale * n as f64)
}

/// `a = −M⁻¹·1` by LU, or `None` when `M` is singular.
pub fn solve_unit_drift(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let rhs = DVector::from_element(m.nrows(), -1.0);
    let sol = m.clone().lu().solve(&rhs)?;
    if sol.iter().all(|x| x.is_finite()) {
        Some(sol.iter().copied().collect())
    } else {
        None
    }
}

/// Checks `a > 0` and `M a ≤ −1 + tol·s_i` entrywise with plain loops,
/// where `s_i = max(1, Σ_j |M_ij a_j|)` absorbs rounding when `a` is large.
pub fn satisfies_drift(m: &DMatrix<f64>, a: &[f64], tol: f64) -> bool {
    if a.len() != m.nrows() || a.iter().any(|x| !(*x > 0.0)) {
        return false;
    }
    (0..m.nrows()).all(|i| {
        let row: f64 = (0..m.ncols()).map(|j| m[(i, j)] * a[j]).sum();
        let scale: f64 = (0..m.ncols()).map(|j| (m[(i, j)] * a[j]).abs()).sum();
        row <= -1.0 + tol * scale.max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_metzler(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.gen_range(-4.0..1.0)
            } else if rng.gen_bool(0.7) {
                rng.gen_range(0.0..2.0)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn two_by_two_hand_case() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.3, 1.0, 1.0, -0.8]);
        assert!(is_hurwitz_metzler(&m));
        let a = solve_unit_drift(&m).unwrap();
        assert!((a[0] - 45.0).abs() < 1e-9);
        assert!((a[1] - 57.5).abs() < 1e-9);
        assert!(satisfies_drift(&m, &a, 1e-9));
    }

    #[test]
    fn generator_alone_is_not_hurwitz() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(!is_hurwitz_metzler(&m));
    }

    #[test]
    fn nonnegative_row_blocks_hurwitz() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, 0.5]);
        assert!(!is_hurwitz_metzler(&m));
    }

    #[test]
    fn pivot_test_agrees_with_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = [0usize; 2];
        for _ in 0..2000 {
            let n = rng.gen_range(1..=5);
            let m = random_metzler(&mut rng, n);
            let abscissa = m
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            if abscissa.abs() < 1e-8 {
                continue;
            }
            let hurwitz = is_hurwitz_metzler(&m);
            assert_eq!(hurwitz, abscissa < 0.0, "{m}");
            seen[hurwitz as usize] += 1;
            if hurwitz {
                let a = solve_unit_drift(&m).unwrap();
                assert!(satisfies_drift(&m, &a, 1e-9));
            }
        }
        assert!(seen[0] > 100 && seen[1] > 100, "{seen:?}");
    }
}
