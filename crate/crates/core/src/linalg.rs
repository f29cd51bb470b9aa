//! Small dense helpers for symmetric positive definite matrices.
//!
//! The hot loops (pairwise overlaps, Runnalls bounds) work on raw slices with
//! stack scratch space; everything else goes through nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const STACK_DIM: usize = 8;
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Runs `f` with an `n×n` matrix buffer and an `n` vector buffer.
#[inline]
pub(crate) fn with_scratch<R>(n: usize, f: impl FnOnce(&mut [f64], &mut [f64]) -> R) -> R {
    if n <= STACK_DIM {
        let mut m = [0.0; STACK_DIM * STACK_DIM];
        let mut v = [0.0; STACK_DIM];
        f(&mut m[..n * n], &mut v[..n])
    } else {
        let mut m = vec![0.0; n * n];
        let mut v = vec![0.0; n];
        f(&mut m, &mut v)
    }
}

/// In-place lower Cholesky factor of a symmetric matrix stored densely.
/// Returns `false` when a pivot is not strictly positive.
#[inline]
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

#[inline]
pub(crate) fn cholesky_log_det(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// `xᵀ A⁻¹ x` given the Cholesky factor of `A`; `x` is overwritten.
#[inline]
pub(crate) fn cholesky_quad_form(l: &[f64], n: usize, x: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        let y = s / l[i * n + i];
        x[i] = y;
        acc += y * y;
    }
    acc
}

/// `log φ(x | mean, a + b)` where `a` and `b` are symmetric covariances.
/// `None` if the summed covariance is not positive definite.
#[inline]
pub(crate) fn log_normal_sum_cov(
    x: &[f64],
    mean: &[f64],
    a: &[f64],
    b: Option<&[f64]>,
) -> Option<f64> {
    let n = x.len();
    with_scratch(n, |m, v| {
        match b {
            Some(b) => {
                for ((dst, p), q) in m.iter_mut().zip(a).zip(b) {
                    *dst = p + q;
                }
            }
            None => m.copy_from_slice(a),
        }
        if !cholesky_in_place(m, n) {
            return None;
        }
        for i in 0..n {
            v[i] = x[i] - mean[i];
        }
        let logdet = cholesky_log_det(m, n);
        let q = cholesky_quad_form(m, n, v);
        Some(-0.5 * (n as f64 * LN_2PI + logdet + q))
    })
}

/// Log-determinant of a symmetric positive definite matrix.
pub(crate) fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    with_scratch(n, |buf, _| {
        buf.copy_from_slice(m.as_slice());
        if cholesky_in_place(buf, n) {
            Some(cholesky_log_det(buf, n))
        } else {
            None
        }
    })
}

pub(crate) fn is_cholesky_pd(m: &DMatrix<f64>) -> bool {
    log_det_spd(m).is_some()
}

pub(crate) fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::NotPositiveDefinite)
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = max_abs(m);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// Eigenvalue check with a relative tolerance of `1e-12 · trace`.
pub(crate) fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let trace = m.trace();
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 1e-12 * trace {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub(crate) fn sqrtm_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

pub(crate) fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Square matrix from nested rows; every row must have length `n`.
pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("matrix must be {n}x{n}")));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
