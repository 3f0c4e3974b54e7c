//! Small dense helpers shared by the solvers.
//!
//! Vectors are plain `&[f64]` slices; matrices are `nalgebra::DMatrix` because
//! the per-node blocks are tiny (d x d) and nalgebra's Cholesky is exact enough
//! for the symmetric positive definite systems that arise here.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Max absolute difference between a matrix and its transpose.
pub fn max_skew(m: &DMatrix<f64>) -> f64 {
    let mut skew = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            skew = skew.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    skew
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solves the symmetric block-tridiagonal system A x = rhs by block Thomas
/// elimination with a Cholesky factorization of every pivot block.
///
/// `diag` holds the n diagonal blocks, `off[j]` couples block rows j and j+1.
/// Fails if any Schur-complement pivot is not positive definite.
pub fn solve_block_tridiag(
    diag: Vec<DMatrix<f64>>,
    off: &[DMatrix<f64>],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(n >= 1, "empty block system");
    assert_eq!(off.len() + 1, n, "off-diagonal count must be n - 1");
    let d = diag[0].nrows();
    assert_eq!(rhs.len(), n * d, "rhs length mismatch");

    let indefinite = || Error::Invalid("block-tridiagonal pivot is not positive definite".into());

    // Forward elimination: pivots[j] = D_j - E_{j-1}^T S_{j-1}^{-1} E_{j-1}.
    let mut pivots = diag;
    let mut chols: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(n);
    for j in 0..n {
        if j > 0 {
            let se = chols[j - 1].solve(&off[j - 1]);
            let update = off[j - 1].tr_mul(&se);
            pivots[j] -= update;
        }
        let chol = Cholesky::new(pivots[j].clone()).ok_or_else(indefinite)?;
        chols.push(chol);
    }

    // Forward substitution: c_j = b_j - E_{j-1}^T S_{j-1}^{-1} c_{j-1}.
    let mut c: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut b = DVector::from_column_slice(&rhs[j * d..(j + 1) * d]);
        if j > 0 {
            let u = chols[j - 1].solve(&c[j - 1]);
            b -= off[j - 1].tr_mul(&u);
        }
        c.push(b);
    }

    // Back substitution: x_j = S_j^{-1} (c_j - E_j x_{j+1}).
    let mut x = vec![DVector::zeros(d); n];
    x[n - 1] = chols[n - 1].solve(&c[n - 1]);
    for j in (0..n - 1).rev() {
        let b = &c[j] - &off[j] * &x[j + 1];
        x[j] = chols[j].solve(&b);
    }

    let mut flat = Vec::with_capacity(n * d);
    for xj in &x {
        flat.extend_from_slice(xj.as_slice());
    }
    Ok(flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * (d as f64)
    }

    #[test]
    fn block_tridiag_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, d) in &[(1usize, 2usize), (4, 1), (5, 3), (12, 2)] {
            let diag: Vec<_> = (0..n).map(|_| random_spd(&mut rng, d)).collect();
            let off: Vec<_> = (0..n - 1)
                .map(|_| DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.3..0.3)))
                .collect();
            let rhs: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut dense = DMatrix::zeros(n * d, n * d);
            for j in 0..n {
                dense.view_mut((j * d, j * d), (d, d)).copy_from(&diag[j]);
                if j + 1 < n {
                    dense
                        .view_mut((j * d, (j + 1) * d), (d, d))
                        .copy_from(&off[j]);
                    dense
                        .view_mut(((j + 1) * d, j * d), (d, d))
                        .copy_from(&off[j].transpose());
                }
            }
            let want = dense
                .lu()
                .solve(&DVector::from_column_slice(&rhs))
                .expect("dense solve");
            let got = solve_block_tridiag(diag, &off, &rhs).expect("block solve");
            for i in 0..n * d {
                assert!(
                    (got[i] - want[i]).abs() < 1e-9,
                    "mismatch at {i}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn block_tridiag_rejects_indefinite_pivot() {
        let diag = vec![DMatrix::from_row_slice(1, 1, &[0.0])];
        let err = solve_block_tridiag(diag, &[], &[1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(norm_inf(&[1.0, -3.0, 2.0]), 3.0);
        assert!((norm2(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert_eq!(dist_inf(&[1.0, 2.0], &[1.0, 2.5]), 0.5);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        assert!((min_symmetric_eigenvalue(&m) - 0.5).abs() < 1e-12);
    }
}
