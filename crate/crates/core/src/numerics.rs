//! Dense linear algebra shared by the basis and covariance code.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. The two factorisations the rest of
//! the crate depends on for its contracts (kernel basis and SPD solve) are
//! implemented here directly so pivoting and failure reporting are fixed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Orthonormal basis of the kernel of `m`, one column per kernel direction.
///
/// Runs Householder QR with column pivoting on `mᵀ`; the trailing columns of
/// the full `Q` factor span `range(mᵀ)⊥ = ker(m)`. Pivoting picks the largest
/// remaining column norm, lowest index on ties, so the output is deterministic.
///
/// `rank_tol` is relative to the largest column norm of `mᵀ`; the default is
/// `max(rows, cols) · ε`.
pub fn null_space(m: &DenseMatrix, rank_tol: Option<f64>) -> DenseMatrix {
    let n = m.ncols();
    let (q, rank) = pivoted_householder(&m.transpose(), rank_tol);
    q.columns(rank, n - rank).into_owned()
}

/// Numerical rank of `m`, using the same factorisation as [`null_space`].
pub fn numerical_rank(m: &DenseMatrix, rank_tol: Option<f64>) -> usize {
    pivoted_householder(&m.transpose(), rank_tol).1
}

/// Residual `b − X β̂` of the least-squares fit of `b` on the columns of `x`.
///
/// Computed as the projection of `b` onto `ker(xᵀ)`, so rank-deficient
/// designs need no special handling.
pub fn least_squares_residual(x: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = null_space(&x.transpose(), None);
    let b = DVector::from_column_slice(b);
    let r = &n * (n.transpose() * b);
    r.iter().copied().collect()
}

// Returns the full n×n orthogonal factor and the detected rank.
fn pivoted_householder(x: &DenseMatrix, rank_tol: Option<f64>) -> (DenseMatrix, usize) {
    let (n, k) = x.shape();
    let mut work = x.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::new();
    let rel = rank_tol.unwrap_or(n.max(k) as f64 * f64::EPSILON);

    let mut first_norm = None;
    let steps = n.min(k);
    let mut rank = 0;
    for j in 0..steps {
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..k {
            let norm = work.view((j, c), (n - j, 1)).norm();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        let scale = *first_norm.get_or_insert(best_norm);
        if best_norm <= rel * scale || best_norm == 0.0 {
            break;
        }
        work.swap_columns(j, best);

        let col = work.view((j, j), (n - j, 1)).clone_owned();
        let alpha = if col[0] >= 0.0 { -best_norm } else { best_norm };
        let mut v = DVector::from_iterator(n - j, col.iter().copied());
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            let mut block = work.view_mut((j, j), (n - j, k - j));
            let proj = v.transpose() * &block;
            block -= &v * proj * 2.0;
        }
        let mut full = DVector::zeros(n);
        full.rows_mut(j, n - j).copy_from(&v);
        reflectors.push(full);
        rank = j + 1;
    }

    let mut q = DMatrix::identity(n, n);
    for v in reflectors.iter().rev() {
        let proj = v.transpose() * &q;
        q -= v * proj * 2.0;
    }
    (q, rank)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// A pivot at or below `n · ε · max|diag|` is reported as a conditioning error
/// carrying the offending index and pivot value.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let max_diag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > floor) {
            return Err(Error::Conditioning { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `m x = rhs` for symmetric positive-definite `m` (any number of right-hand sides).
pub fn solve_spd(m: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    if rhs.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix has {}",
            rhs.nrows(),
            m.nrows()
        )));
    }
    let l = cholesky(m)?;
    let n = m.nrows();
    let mut x = rhs.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for p in 0..i {
                s -= l[(i, p)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for p in (i + 1)..n {
                s -= l[(p, i)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    solve_spd(m, &DMatrix::identity(m.nrows(), m.nrows()))
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ratio of largest to smallest eigenvalue of a symmetric matrix (`inf` if singular).
pub fn condition_number(m: &DenseMatrix) -> f64 {
    let ev = symmetric_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// How a finite-difference step perturbs the input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// `x ± h e_j`.
    Free,
    /// `(x ± h e_j) / (1 ± h)`: stays on the probability simplex.
    Simplex,
}

/// Central-difference Jacobian of `f` at `x`; column `j` is `(f(x+) − f(x−)) / 2h`.
pub fn finite_difference_jacobian<F, E>(
    mut f: F,
    x: &[f64],
    h: f64,
    mode: Perturbation,
) -> std::result::Result<DenseMatrix, E>
where
    F: FnMut(&[f64]) -> std::result::Result<Vec<f64>, E>,
{
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    let mut point = x.to_vec();
    for j in 0..x.len() {
        let mut eval = |sign: f64| {
            point.copy_from_slice(x);
            point[j] += sign * h;
            if mode == Perturbation::Simplex {
                let total = 1.0 + sign * h;
                point.iter_mut().for_each(|v| *v /= total);
            }
            f(&point)
        };
        let plus = eval(1.0)?;
        let minus = eval(-1.0)?;
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// Largest absolute entry.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DenseMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_orthonormal(q: &DenseMatrix) {
        let g = q.transpose() * q;
        let dev = max_abs(&(g - DMatrix::identity(q.ncols(), q.ncols())));
        assert!(dev <= 1e-10, "QᵀQ deviates from I by {dev}");
    }

    #[test]
    fn null_space_of_identity_is_empty() {
        let q = null_space(&DMatrix::identity(3, 3), None);
        assert_eq!(q.shape(), (3, 0));
    }

    #[test]
    fn null_space_of_zero_matrix_is_everything() {
        let q = null_space(&DMatrix::zeros(2, 3), None);
        assert_eq!(q.ncols(), 3);
        assert_orthonormal(&q);
    }

    #[test]
    fn null_space_of_rank_deficient_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, c, rank) in [(4, 7, 3), (6, 6, 2), (10, 5, 5), (3, 9, 1)] {
            let m = random_matrix(&mut rng, r, rank) * random_matrix(&mut rng, rank, c);
            let q = null_space(&m, None);
            assert_eq!(q.ncols(), c - rank);
            assert_orthonormal(&q);
            let resid = inf_norm(&(&m * &q));
            assert!(resid <= 1e-12 * inf_norm(&m).max(1.0) * c as f64);
            assert_eq!(numerical_rank(&m, None), rank);
        }
    }

    #[test]
    fn null_space_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 3, 8);
        assert_eq!(null_space(&m, None), null_space(&m, None));
    }

    #[test]
    fn solve_spd_identity_and_diagonal() {
        let rhs = DMatrix::from_column_slice(2, 1, &[2.0, 4.0]);
        assert_eq!(solve_spd(&DMatrix::identity(2, 2), &rhs).unwrap(), rhs);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let x = solve_spd(&d, &rhs).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_spd_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 8);
        let m = a.transpose() * &a + DMatrix::identity(8, 8);
        let rhs = random_matrix(&mut rng, 8, 2);
        // Oracle: Gauss-Jordan inverse from nalgebra's LU, independent of Cholesky.
        let oracle = m.clone().try_inverse().unwrap() * &rhs;
        let x = solve_spd(&m, &rhs).unwrap();
        assert!(max_abs(&(x - oracle)) <= 1e-9);
    }

    #[test]
    fn solve_spd_backward_error_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let n = 1 + (trial * 7) % 64;
            let a = random_matrix(&mut rng, n, n);
            let m = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
            let rhs = random_matrix(&mut rng, n, 1);
            let x = solve_spd(&m, &rhs).unwrap();
            let resid = max_abs(&(&m * &x - &rhs));
            assert!(resid <= 1e-10 * max_abs(&rhs).max(1e-300) * (n as f64).max(1.0), "n={n} resid={resid}");
        }
    }

    #[test]
    fn cholesky_reports_indefinite_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky(&m) {
            Err(Error::Conditioning { index, pivot }) => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-12);
            }
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn finite_differences_of_identity() {
        let x = [0.3, 0.5, 0.2];
        let j = finite_difference_jacobian(
            |v: &[f64]| Ok::<_, ()>(v.to_vec()),
            &x,
            1e-6,
            Perturbation::Free,
        )
        .unwrap();
        assert!(max_abs(&(j - DMatrix::identity(3, 3))) < 1e-9);
    }

    #[test]
    fn finite_differences_of_polynomial() {
        let j = finite_difference_jacobian(
            |v: &[f64]| Ok::<_, ()>(vec![v[0] * v[0], v[0] * v[1]]),
            &[1.0, 1.0],
            1e-6,
            Perturbation::Free,
        )
        .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        assert!(max_abs(&(j - expected)) < 1e-6);
    }

    #[test]
    fn simplex_mode_stays_normalised() {
        let x = [0.25, 0.25, 0.5];
        let _ = finite_difference_jacobian(
            |v: &[f64]| {
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                Ok::<_, ()>(vec![0.0])
            },
            &x,
            1e-3,
            Perturbation::Simplex,
        );
    }
}
