//! Small dense linear-algebra helpers for `r x r` blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Eigenvalues below this are treated as a genuine loss of semi-definiteness.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Numerically stable `log(sum(exp(v)))`, tolerant to `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Symmetrizes `m` in place: `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    eigen(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    eigen(m).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Square root of a symmetric PSD matrix through its eigendecomposition.
///
/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are clipped to zero; anything more
/// negative is reported as [`Error::NonPsdOrderParam`].
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        if v < -PSD_TOLERANCE {
            return Err(Error::NonPsdOrderParam(v));
        }
        return Ok(DMatrix::from_element(1, 1, v.max(0.0).sqrt()));
    }
    let e = eigen(m);
    let mut vals = e.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(Error::NonPsdOrderParam(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

/// Cholesky-based inverse and log-determinant of a symmetric matrix that
/// must be positive definite with smallest eigenvalue above `floor`.
pub fn spd_inverse_logdet(m: &DMatrix<f64>, floor: f64) -> Option<(DMatrix<f64>, f64)> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        if !(v > floor) || !v.is_finite() {
            return None;
        }
        return Some((DMatrix::from_element(1, 1, 1.0 / v), v.ln()));
    }
    if min_eigenvalue(m) <= floor {
        return None;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    let chol = s.cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some((inv, logdet))
}

pub fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}
