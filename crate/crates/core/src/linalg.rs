//! Spectral helpers shared by the lab and the finite-p DC.
//!
//! Pseudoinverse solves go through the symmetric eigendecomposition of the
//! smaller Gram matrix, with singular values recomputed directly from the
//! data matrix (`sigma_i = ||X^T u_i||`), so the relative cutoff acts on
//! true singular values rather than on their squares.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative singular-value cutoff used by every pseudoinverse in the crate.
pub(crate) const SV_CUTOFF: f64 = 1e-12;

/// Symmetric eigendecomposition with eigenvalues sorted descending and
/// deterministic tie-breaking by original index.
pub(crate) fn sym_eigen_sorted(m: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenFailed)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Outcome of a pseudoinverse least-squares solve.
pub(crate) struct PinvSolve {
    pub beta: DVector<f64>,
    /// Number of singular values above the cutoff.
    pub rank: usize,
    /// Smallest kept ratio `sigma_i / sigma_max` (1 for a zero matrix).
    pub min_ratio: f64,
}

/// Any singular-value ratio below this is indistinguishable from rounding
/// noise on the Gram-matrix route (squaring halves the resolvable digits);
/// such solves are redone with a bidiagonalization SVD of X itself.
const GRAM_NOISE_FLOOR: f64 = 1e-6;

/// `X^+ y` with relative singular-value cutoff [`SV_CUTOFF`].
///
/// Fast path: eigendecompose the Gram matrix on the smaller side and recover
/// the singular values as column norms of the rotated data matrix. For n < m
/// this yields the min-norm interpolator whenever X has full row rank; for
/// n >= m the least-squares solution (min-norm among minimizers if rank
/// deficient). If the smallest apparent ratio dips under the Gram noise
/// floor, the solve is repeated with a true SVD of X so the 1e-12 cutoff
/// acts on genuine singular values.
pub(crate) fn pinv_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<PinvSolve> {
    let (n, m) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X is {n}x{m} but y has {} entries",
            y.len()
        )));
    }
    let fast = if n < m {
        // U from eig(X X^T); columns of Z = X^T U have norms sigma_i.
        let (_, u) = sym_eigen_sorted(x * x.transpose())?;
        let z = x.transpose() * &u;
        let c = u.transpose() * y;
        combine(&z, &c, m)?
    } else {
        let (_, v) = sym_eigen_sorted(x.transpose() * x)?;
        let w = x * &v;
        let c = w.transpose() * y; // w_i^T y, rescaled below by sigma_i^2
        combine_cols(&v, &w, &c, m)?
    };
    if fast.rank == n.min(m) && fast.min_ratio > GRAM_NOISE_FLOOR {
        return Ok(fast);
    }
    svd_solve(x, y)
}

/// Bidiagonalization SVD route; accurate down to machine-precision singular
/// values, used only near rank deficiency.
fn svd_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<PinvSolve> {
    let m = x.ncols();
    let svd = nalgebra::SVD::try_new(x.clone(), true, true, f64::EPSILON, 0)
        .ok_or(Error::EigenFailed)?;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(PinvSolve { beta: DVector::zeros(m), rank: 0, min_ratio: 1.0 });
    }
    let k = svd.singular_values.len();
    let mut coeff = DVector::zeros(k);
    let mut rank = 0;
    let mut min_ratio = 1.0f64;
    for i in 0..k {
        let sigma = svd.singular_values[i];
        let ratio = sigma / sigma_max;
        if ratio > SV_CUTOFF {
            coeff[i] = u.column(i).dot(y) / sigma;
            rank += 1;
            min_ratio = min_ratio.min(ratio);
        }
    }
    Ok(PinvSolve { beta: vt.transpose() * coeff, rank, min_ratio })
}

/// beta = sum_i z_i (c_i / sigma_i^2) over kept columns, for n < m.
fn combine(z: &DMatrix<f64>, c: &DVector<f64>, m: usize) -> Result<PinvSolve> {
    let k = z.ncols();
    let norms: Vec<f64> = (0..k).map(|i| z.column(i).norm()).collect();
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(PinvSolve { beta: DVector::zeros(m), rank: 0, min_ratio: 1.0 });
    }
    let mut coeff = DVector::zeros(k);
    let mut rank = 0;
    let mut min_ratio = 1.0f64;
    for i in 0..k {
        let ratio = norms[i] / sigma_max;
        if ratio > SV_CUTOFF {
            coeff[i] = c[i] / (norms[i] * norms[i]);
            rank += 1;
            min_ratio = min_ratio.min(ratio);
        }
    }
    Ok(PinvSolve { beta: z * coeff, rank, min_ratio })
}

/// beta = sum_i v_i (c_i / sigma_i^2) with sigma_i = ||w_i||, for n >= m.
fn combine_cols(
    v: &DMatrix<f64>,
    w: &DMatrix<f64>,
    c: &DVector<f64>,
    m: usize,
) -> Result<PinvSolve> {
    let norms: Vec<f64> = (0..m).map(|i| w.column(i).norm()).collect();
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(PinvSolve { beta: DVector::zeros(m), rank: 0, min_ratio: 1.0 });
    }
    let mut coeff = DVector::zeros(m);
    let mut rank = 0;
    let mut min_ratio = 1.0f64;
    for i in 0..m {
        let ratio = norms[i] / sigma_max;
        if ratio > SV_CUTOFF {
            coeff[i] = c[i] / (norms[i] * norms[i]);
            rank += 1;
            min_ratio = min_ratio.min(ratio);
        }
    }
    Ok(PinvSolve { beta: v * coeff, rank, min_ratio })
}

/// Applies the pseudoinverse of a symmetric PSD matrix to a vector, keeping
/// eigenvalues above `cutoff_rel * lambda_max`. Returns the solution and the
/// condition number of the kept spectrum.
pub(crate) fn sym_pinv_apply(
    m: &DMatrix<f64>,
    v: &DVector<f64>,
    cutoff_rel: f64,
) -> Result<(DVector<f64>, f64)> {
    let (vals, vecs) = sym_eigen_sorted(m.clone())?;
    let max = vals[0].max(0.0);
    if max == 0.0 {
        return Ok((DVector::zeros(v.len()), 1.0));
    }
    let mut coeff = vecs.transpose() * v;
    let mut min_kept = max;
    for i in 0..vals.len() {
        if vals[i] > cutoff_rel * max {
            coeff[i] /= vals[i];
            min_kept = min_kept.min(vals[i]);
        } else {
            coeff[i] = 0.0;
        }
    }
    Ok((&vecs * coeff, max / min_kept))
}

/// Symmetric PSD square root. Eigenvalues below `-clip_rel * lambda_max` are
/// an error; everything inside `+-clip_rel * lambda_max` is rounding noise
/// and clips to zero. Zeroing the small positives matters: the square root
/// would amplify an eps-sized noise eigenvalue to sqrt(eps), turning an
/// exactly low-rank covariance into a numerically full-rank factor.
pub(crate) fn sym_sqrt(m: &DMatrix<f64>, clip_rel: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_sorted(m.clone())?;
    let max = vals[0].max(0.0);
    let mut scaled = vecs.clone();
    for i in 0..vals.len() {
        if vals[i] < -clip_rel * max {
            return Err(Error::NotPositiveDefinite(vals[i]));
        }
        let root = if vals[i] <= clip_rel * max { 0.0 } else { vals[i].sqrt() };
        scaled.column_mut(i).scale_mut(root);
    }
    Ok(&scaled * vecs.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_sorted(m.clone()).unwrap();
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 2.0).abs() < 1e-12);
        let rec = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rec - m).norm() < 1e-10);
    }

    #[test]
    fn pinv_minimum_norm_row() {
        // X = [[1, 0]], y = [3]: min-norm solution is (3, 0).
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = DVector::from_vec(vec![3.0]);
        let sol = pinv_solve(&x, &y).unwrap();
        assert!((sol.beta[0] - 3.0).abs() < 1e-12);
        assert!(sol.beta[1].abs() < 1e-12);
        assert_eq!(sol.rank, 1);
    }

    #[test]
    fn pinv_detects_exact_rank_deficiency() {
        // Rank-one 4x3 matrix: rank must come out as 1, not 3.
        let g = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let lam = DVector::from_vec(vec![3.0, 4.0, 1.0]).transpose();
        let x = g * lam;
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]) * 2.0;
        let sol = pinv_solve(&x, &y).unwrap();
        assert_eq!(sol.rank, 1);
        // Residual of the least-squares fit is zero here by construction.
        assert!((&x * &sol.beta - &y).norm() < 1e-10);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = sym_sqrt(&a, 1e-10).unwrap();
        assert!((&s * &s - a).norm() < 1e-12);
    }
}
