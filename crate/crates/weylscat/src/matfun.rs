//! Matrix functions: the integral-defined upper logarithm, PSD square roots
//! and rank-revealing spectral subspaces.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{
    self, c, condition_number, cr, herm_eigen, herm_part, imag_part, CMatrix,
    I, ONE,
};
use crate::quadrature;
use crate::{Error, Result};

/// Quadrature tolerance for the integral logarithm.
const LOG_QUAD_TOL: f64 = 1e-12;
/// Condition-number guard before attempting the resolvent integral.
const LOG_COND_LIMIT: f64 = 1e12;
/// Default relative rank cutoff for spectral subspaces.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the part of the spectrum above a cutoff.
#[derive(Debug, Clone)]
pub struct SpectralSubspace {
    pub ambient_dim: usize,
    /// ambient_dim x rank matrix with orthonormal columns.
    pub basis: CMatrix,
    pub rank: usize,
    /// Absolute eigenvalue cutoff that was actually applied.
    pub tol: f64,
}

impl SpectralSubspace {
    /// Orthogonal projector basis·basis*.
    pub fn projector(&self) -> CMatrix {
        if self.rank == 0 {
            CMatrix::zeros(self.ambient_dim, self.ambient_dim)
        } else {
            &self.basis * self.basis.adjoint()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rank == 0
    }
}

/// log T := -i∫₀^∞ ((T+it)⁻¹ - (1+it)⁻¹ I) dt for Im T ⪰ 0, 0 ∉ σ(T).
///
/// The implied branch has eigenvalue arguments in [0, π] and remains valid on
/// the boundary case Im T = 0 with negative real eigenvalues, where the limit
/// from the upper half plane applies. Normal matrices take an
/// eigendecomposition fast path with scalar logarithms on the same branch.
pub fn upper_log(t: &CMatrix) -> Result<CMatrix> {
    linalg::require_square(t, "upper_log")?;
    let n = t.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let scale = linalg::fro_norm(t);
    let min_im = linalg::min_herm_eigenvalue(&imag_part(t));
    if min_im < -1e-10 * scale.max(1.0) {
        return Err(Error::Domain(format!(
            "upper_log needs Im T ⪰ 0; smallest eigenvalue of Im T is {min_im:.3e}"
        )));
    }
    let cond = condition_number(t);
    if !cond.is_finite() || cond > LOG_COND_LIMIT {
        return Err(Error::Singular(format!(
            "upper_log: condition number {cond:.3e} exceeds {LOG_COND_LIMIT:.1e}"
        )));
    }
    if let Some(log) = normal_log(t, scale) {
        return Ok(log);
    }
    integral_log(t)
}

/// tr(log T) with the branch of [`upper_log`], so Im tr(log T) ∈ [0, π·dim].
pub fn tr_log(t: &CMatrix) -> Result<Complex64> {
    Ok(upper_log(t)?.trace())
}

/// Branch of the scalar logarithm with argument in [0, π]: the boundary value
/// from the upper half plane on the negative real axis.
pub fn upper_log_scalar(z: Complex64) -> Complex64 {
    let mut arg = z.arg();
    if arg < -std::f64::consts::FRAC_PI_2 {
        arg += 2.0 * std::f64::consts::PI;
    } else if arg < 0.0 {
        arg = 0.0;
    }
    c(z.norm().ln(), arg)
}

/// Unitary diagonalization of a numerically normal matrix via simultaneous
/// diagonalization of its commuting Hermitian and skew parts. Returns None if
/// T is not normal to working precision (then the caller integrates).
fn normal_diagonalize(t: &CMatrix, scale: f64) -> Option<(Vec<Complex64>, CMatrix)> {
    let n = t.nrows();
    if n == 1 {
        return Some((vec![t[(0, 0)]], CMatrix::identity(1, 1)));
    }
    let comm = t * t.adjoint() - t.adjoint() * t;
    if linalg::fro_norm(&comm) > 1e-12 * (1.0 + scale * scale) {
        return None;
    }
    let h = herm_part(t);
    let k = imag_part(t);
    let (h_vals, h_vecs) = herm_eigen(&h);

    // Sort H-eigenpairs so equal eigenvalues are adjacent.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h_vals[a].total_cmp(&h_vals[b]));
    let mut u = CMatrix::zeros(n, n);
    let mut hv = DVector::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        u.set_column(col, &h_vecs.column(src));
        hv[col] = h_vals[src];
    }

    // Within each (near-)eigenspace of H, diagonalize the compression of K.
    let gap_tol = 1e-8 * (1.0 + scale);
    let mut eigs = vec![Complex64::default(); n];
    let mut start = 0;
    while start < n {
        let mut stop = start + 1;
        while stop < n && (hv[stop] - hv[stop - 1]).abs() <= gap_tol {
            stop += 1;
        }
        let block = u.columns(start, stop - start).into_owned();
        let kb = block.adjoint() * &k * &block;
        let (k_vals, k_vecs) = herm_eigen(&kb);
        let rotated = &block * &k_vecs;
        for (j, col) in (start..stop).enumerate() {
            u.set_column(col, &rotated.column(j));
            eigs[col] = c(hv[col], k_vals[j]);
        }
        start = stop;
    }

    // Accept only if U really diagonalizes T.
    let d = CMatrix::from_fn(n, n, |i, j| if i == j { eigs[i] } else { Complex64::default() });
    let resid = linalg::fro_norm(&(&u * &d * u.adjoint() - t));
    if resid > 1e-11 * (1.0 + scale) {
        return None;
    }
    Some((eigs, u))
}

fn normal_log(t: &CMatrix, scale: f64) -> Option<CMatrix> {
    let (eigs, u) = normal_diagonalize(t, scale)?;
    let n = t.nrows();
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            upper_log_scalar(eigs[i])
        } else {
            Complex64::default()
        }
    });
    Some(&u * d * u.adjoint())
}

fn integral_log(t: &CMatrix) -> Result<CMatrix> {
    let n = t.nrows();
    let id = CMatrix::identity(n, n);
    let mut singular_at: Option<f64> = None;
    let integrand = |x: f64| -> CMatrix {
        let shifted = t + &id * c(0.0, x);
        match shifted.try_inverse() {
            Some(inv) => {
                let scalar = ONE / c(1.0, x);
                inv - &id * scalar
            }
            None => {
                singular_at = Some(x);
                CMatrix::zeros(n, n)
            }
        }
    };
    let (raw, _err, _evals) = quadrature::integrate_halfline_matrix(integrand, LOG_QUAD_TOL)?;
    if let Some(x) = singular_at {
        return Err(Error::Singular(format!(
            "upper_log: resolvent (T+it)⁻¹ singular at t = {x:.3e}"
        )));
    }
    let log = raw * (-I);
    if !linalg::is_finite(&log) {
        return Err(Error::Singular(
            "upper_log: integral produced non-finite entries".to_string(),
        ));
    }
    Ok(log)
}

/// Hermitian PSD square root via eigendecomposition, with negative rounding
/// noise clamped to zero.
pub fn psd_sqrt(h: &CMatrix) -> Result<CMatrix> {
    linalg::require_square(h, "psd_sqrt")?;
    let n = h.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let (vals, vecs) = herm_eigen(h);
    let norm = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = -1e-10 * norm.max(1.0);
    for v in vals.iter() {
        if *v < floor {
            return Err(Error::Domain(format!(
                "psd_sqrt: eigenvalue {v:.3e} below {floor:.3e}"
            )));
        }
    }
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            cr(vals[i].max(0.0).sqrt())
        } else {
            Complex64::default()
        }
    });
    let s = &vecs * d * vecs.adjoint();
    Ok(herm_part(&s))
}

/// Orthonormal basis of the spectral subspace of a Hermitian matrix above
/// `tol_rel`·max(1, ‖H‖), ordered by descending eigenvalue with a
/// deterministic phase fix (first significant component real positive).
pub fn range_projection(h: &CMatrix, tol_rel: f64) -> SpectralSubspace {
    let n = h.nrows();
    if n == 0 {
        return SpectralSubspace {
            ambient_dim: 0,
            basis: CMatrix::zeros(0, 0),
            rank: 0,
            tol: tol_rel,
        };
    }
    let (vals, vecs) = herm_eigen(h);
    let norm = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = tol_rel * norm.max(1.0);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let mut cols = Vec::new();
    for &idx in &order {
        if vals[idx] > tol {
            let mut col = vecs.column(idx).into_owned();
            // Phase fix: rotate so the first component of significant
            // magnitude is real positive.
            let col_norm = col.norm();
            if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8 * col_norm) {
                let phase = lead / lead.norm();
                col /= phase;
            }
            cols.push(col);
        }
    }
    let rank = cols.len();
    let mut basis = CMatrix::zeros(n, rank);
    for (j, col) in cols.into_iter().enumerate() {
        basis.set_column(j, &col);
    }
    SpectralSubspace {
        ambient_dim: n,
        basis,
        rank,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn m1(z: Complex64) -> CMatrix {
        CMatrix::from_row_slice(1, 1, &[z])
    }

    #[test]
    fn log_of_one_is_zero() {
        let l = upper_log(&m1(ONE)).unwrap();
        assert!(l[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn log_of_i_is_half_pi() {
        let l = upper_log(&m1(I)).unwrap();
        assert!((l[(0, 0)] - c(0.0, PI / 2.0)).norm() < 1e-11);
    }

    #[test]
    fn log_of_minus_two_takes_upper_branch() {
        let l = upper_log(&m1(cr(-2.0))).unwrap();
        assert!((l[(0, 0)] - c(2.0_f64.ln(), PI)).norm() < 1e-10);
    }

    #[test]
    fn integral_path_matches_scalar_branch() {
        // Rotate diag(i, -2): spectrum {i, -2} with Im T ⪰ 0, known log.
        let (s, co) = (0.6_f64, 0.8_f64);
        let u = CMatrix::from_row_slice(2, 2, &[cr(co), cr(-s), cr(s), cr(co)]);
        let d = CMatrix::from_row_slice(
            2,
            2,
            &[I, Complex64::default(), Complex64::default(), cr(-2.0)],
        );
        let t = &u * d * u.adjoint();
        let expect = {
            let dl = CMatrix::from_row_slice(
                2,
                2,
                &[
                    c(0.0, PI / 2.0),
                    Complex64::default(),
                    Complex64::default(),
                    c(2.0_f64.ln(), PI),
                ],
            );
            &u * dl * u.adjoint()
        };
        // Check both code paths: the normal fast path and the raw integral.
        let got = upper_log(&t).unwrap();
        assert!(linalg::fro_norm(&(&got - &expect)) < 1e-10);
        let got = integral_log(&t).unwrap();
        assert!(linalg::fro_norm(&(&got - &expect)) < 1e-9);
    }

    #[test]
    fn tr_log_identity_and_diag() {
        assert!(tr_log(&CMatrix::identity(2, 2)).unwrap().norm() < 1e-12);
        let t = CMatrix::from_row_slice(2, 2, &[I, Complex64::default(), Complex64::default(), I]);
        let tl = tr_log(&t).unwrap();
        assert!((tl - c(0.0, PI)).norm() < 1e-11);
    }

    #[test]
    fn tr_log_boundary_branch() {
        let tl = tr_log(&m1(cr(-2.0))).unwrap();
        assert!((tl - c(2.0_f64.ln(), PI)).norm() < 1e-10);
    }

    #[test]
    fn tr_log_imaginary_part_bounded() {
        let t = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.1), cr(0.3), cr(0.3), c(-2.0, 0.2)]);
        let tl = tr_log(&t).unwrap();
        assert!(tl.im >= -1e-12 && tl.im <= 2.0 * PI + 1e-12);
    }

    #[test]
    fn domain_error_for_lower_half_plane() {
        assert!(matches!(upper_log(&m1(c(1.0, -1.0))), Err(Error::Domain(_))));
    }

    #[test]
    fn singular_error_for_zero() {
        assert!(matches!(
            upper_log(&m1(Complex64::default())),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn psd_sqrt_identity_and_scalar() {
        let s = psd_sqrt(&CMatrix::identity(2, 2)).unwrap();
        assert!(linalg::fro_norm(&(s - CMatrix::identity(2, 2))) < 1e-14);
        let s = psd_sqrt(&m1(cr(4.0))).unwrap();
        assert!((s[(0, 0)] - cr(2.0)).norm() < 1e-14);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(2.0), cr(1.0), cr(1.0), cr(2.0)]);
        let s = psd_sqrt(&h).unwrap();
        assert!(linalg::fro_norm(&(&s * &s - &h)) < 1e-12 * linalg::fro_norm(&h));
        assert!(linalg::hermitian_defect(&s) < 1e-14);
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        assert!(psd_sqrt(&m1(cr(-1.0))).is_err());
    }

    #[test]
    fn range_projection_zero_matrix() {
        let sub = range_projection(&CMatrix::zeros(2, 2), DEFAULT_RANK_TOL);
        assert_eq!(sub.rank, 0);
    }

    #[test]
    fn range_projection_diag() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(0.0)]);
        let sub = range_projection(&h, DEFAULT_RANK_TOL);
        assert_eq!(sub.rank, 1);
        assert!((sub.basis[(0, 0)] - ONE).norm() < 1e-14);
        assert!(sub.basis[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn range_projection_rank_one() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(1.0), cr(1.0), cr(1.0)]);
        let sub = range_projection(&h, DEFAULT_RANK_TOL);
        assert_eq!(sub.rank, 1);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert!((sub.basis[(0, 0)] - cr(inv_sqrt2)).norm() < 1e-12);
        assert!((sub.basis[(1, 0)] - cr(inv_sqrt2)).norm() < 1e-12);
        let p = sub.projector();
        assert!(linalg::fro_norm(&(&p * &p - &p)) < 1e-12);
    }

    #[test]
    fn normal_fast_path_on_diagonal_models() {
        let t = CMatrix::from_row_slice(2, 2, &[I, Complex64::default(), Complex64::default(), cr(2.0) * I]);
        let l = normal_log(&t, linalg::fro_norm(&t)).unwrap();
        assert!((l[(0, 0)] - c(0.0, PI / 2.0)).norm() < 1e-13);
        assert!((l[(1, 1)] - c(2.0_f64.ln(), PI / 2.0)).norm() < 1e-13);
    }
}
