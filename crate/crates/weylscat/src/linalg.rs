//! Shared dense complex linear algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix used for all operator values in this crate.
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hermitian part (T + T*)/2.
pub fn herm_part(t: &CMatrix) -> CMatrix {
    (t + t.adjoint()) * cr(0.5)
}

/// Imaginary part (T - T*)/2i, a Hermitian matrix.
pub fn imag_part(t: &CMatrix) -> CMatrix {
    (t - t.adjoint()) * (cr(0.5) / I)
}

/// Frobenius norm.
pub fn fro_norm(t: &CMatrix) -> f64 {
    t.norm()
}

/// Largest absolute entry.
pub fn max_abs(t: &CMatrix) -> f64 {
    t.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn is_finite(t: &CMatrix) -> bool {
    t.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Deviation from Hermitian symmetry relative to the matrix norm.
pub fn hermitian_defect(t: &CMatrix) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    fro_norm(&(t - t.adjoint())) / (1.0 + fro_norm(t))
}

/// Eigendecomposition of a Hermitian matrix; the input is symmetrized first
/// so rounding noise in the caller cannot leak into complex eigenvalues.
pub fn herm_eigen(h: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (DVector::zeros(0), CMatrix::zeros(0, 0));
    }
    let se = herm_part(h).symmetric_eigen();
    (se.eigenvalues, se.eigenvectors)
}

/// Smallest eigenvalue of the Hermitian part of `h`.
pub fn min_herm_eigenvalue(h: &CMatrix) -> f64 {
    let (vals, _) = herm_eigen(h);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_herm_eigenvalue(h: &CMatrix) -> f64 {
    let (vals, _) = herm_eigen(h);
    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn herm_spectral_norm(h: &CMatrix) -> f64 {
    let (vals, _) = herm_eigen(h);
    vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Determinant; the empty matrix has determinant one.
pub fn determinant(t: &CMatrix) -> Complex64 {
    if t.nrows() == 0 {
        ONE
    } else {
        t.determinant()
    }
}

/// Inverse through LU, with a singularity check.
pub fn try_inverse(t: &CMatrix, context: &str) -> Result<CMatrix> {
    if t.nrows() == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    t.clone()
        .try_inverse()
        .filter(is_finite)
        .ok_or_else(|| Error::Singular(context.to_string()))
}

/// Two-norm condition number via SVD; infinite for singular matrices.
pub fn condition_number(t: &CMatrix) -> f64 {
    if t.nrows() == 0 {
        return 1.0;
    }
    let sv = t.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Checked matrix dimensions for binary operations.
pub fn require_square(t: &CMatrix, context: &str) -> Result<()> {
    if t.nrows() != t.ncols() {
        return Err(Error::Dimension(format!(
            "{context}: expected square matrix, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(())
}

pub fn require_dim(t: &CMatrix, rows: usize, cols: usize, context: &str) -> Result<()> {
    if t.nrows() != rows || t.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{context}: expected {rows}x{cols}, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(())
}

/// ‖S*S - I‖ for unitarity checks.
pub fn unitarity_defect(s: &CMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let n = s.ncols();
    fro_norm(&(s.adjoint() * s - CMatrix::identity(n, n)))
}

/// Largest singular value.
pub fn largest_singular_value(s: &CMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    s.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
}
