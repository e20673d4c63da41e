//! Small dense helpers shared by the modules. Everything here works on
//! `nalgebra::DMatrix<f64>`; the systems of interest have κ ≤ ~40.

#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn check_dims(block: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension {
            block,
            expected_rows: rows,
            expected_cols: cols,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Largest `|m_ij − m_ji|`.
pub fn symmetry_deviation(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetry check relative to the matrix scale (absolute below unit scale).
pub fn require_symmetric(what: &'static str, m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            block: what,
            expected_rows: m.nrows(),
            expected_cols: m.nrows(),
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let deviation = symmetry_deviation(m);
    let scale = m.amax().max(1.0);
    if deviation > tol * scale {
        return Err(Error::NotSymmetric { what, deviation });
    }
    Ok(())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut eig = symmetrize(m).symmetric_eigenvalues();
    eig.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    eig
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Requires symmetry and `λ_min ≥ tol` (tol is typically a small negative number).
pub fn require_psd(what: &'static str, m: &DMatrix<f64>, sym_tol: f64, psd_tol: f64) -> Result<()> {
    require_symmetric(what, m, sym_tol)?;
    let min_eig = min_eigenvalue(m);
    if m.nrows() > 0 && min_eig < psd_tol {
        return Err(Error::NotPsd { what, min_eig });
    }
    Ok(())
}

/// Returns `L` with `L·Lᵀ = cov` through the symmetric eigendecomposition, so
/// singular covariances (including zero) are accepted.
pub fn psd_factor(what: &'static str, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_symmetric(what, cov, 1e-12)?;
    let n = cov.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(cov).symmetric_eigen();
    let scale = cov.amax().max(1.0);
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-12 * scale {
            return Err(Error::NotPsd { what, min_eig: lambda });
        }
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            factor[(i, j)] *= s;
        }
    }
    Ok(factor)
}

pub fn quad_form(p: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
    let n = z.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += p[(i, j)] * z[j];
        }
        acc += z[i] * row;
    }
    acc
}

pub fn set_block(dst: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    dst.view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, a.nrows(), a.ncols(), b);
    out
}

/// Dimension of the space of symmetric `k×k` matrices.
pub fn sym_dim(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Upper-triangular entries in row-major order.
pub fn sym_to_vec(m: &DMatrix<f64>) -> DVector<f64> {
    let k = m.nrows();
    let mut out = DVector::zeros(sym_dim(k));
    let mut idx = 0;
    for i in 0..k {
        for j in i..k {
            out[idx] = m[(i, j)];
            idx += 1;
        }
    }
    out
}

pub fn vec_to_sym(v: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in i..k {
            out[(i, j)] = v[idx];
            out[(j, i)] = v[idx];
            idx += 1;
        }
    }
    out
}

/// Symmetric basis element `e_i e_jᵀ + e_j e_iᵀ` (just `e_i e_iᵀ` on the diagonal).
pub fn sym_basis(k: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(k, k);
    out[(i, j)] = 1.0;
    out[(j, i)] = 1.0;
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_factor_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let l = psd_factor("cov", &cov).unwrap();
        assert!(max_abs_diff(&(&l * l.transpose()), &cov) < 1e-12);
    }

    #[test]
    fn psd_factor_accepts_zero_and_rejects_indefinite() {
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(psd_factor("cov", &zero).unwrap().amax(), 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_factor("cov", &bad), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sym_vec_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(vec_to_sym(&sym_to_vec(&m), 3), m);
    }
}
