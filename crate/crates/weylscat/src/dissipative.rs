//! Dissipative scattering systems: the 2x2 block scattering matrix of the
//! selfadjoint dilation, the dissipative scattering matrix S_D, the
//! Lax-Phillips matrix S^LP, the characteristic function, the spectral shift
//! function η_D, and the modified Birman-Krein and trace formulas.

use num_complex::Complex64;

use crate::linalg::{self, cr, herm_part, imag_part, CMatrix, I};
use crate::matfun::{self, SpectralSubspace};
use crate::nevanlinna::NevanlinnaModel;
use crate::quadrature;
use crate::sa_scatter::SINGULAR_COND_LIMIT;
use crate::{Error, Result, SkippedPoint};

/// A dissipative extension parameter: a matrix D with Im D ⪯ 0 together with
/// the spectral subspace ℋ_D = ran(-Im D).
#[derive(Debug, Clone)]
pub struct DissipativeParameter {
    d: CMatrix,
    /// Basis of ran(-Im D).
    hd: SpectralSubspace,
}

impl DissipativeParameter {
    pub fn new(d: CMatrix, tol_rel: f64) -> Result<Self> {
        linalg::require_square(&d, "DissipativeParameter")?;
        let im_d = imag_part(&d);
        let norm = linalg::herm_spectral_norm(&im_d).max(linalg::fro_norm(&d));
        let largest = linalg::max_herm_eigenvalue(&im_d);
        if largest > 1e-12 * norm.max(1.0) {
            return Err(Error::Validation(format!(
                "D is not dissipative: largest eigenvalue of Im D is {largest:.3e}"
            )));
        }
        let hd = matfun::range_projection(&(-im_d), tol_rel);
        Ok(DissipativeParameter { d, hd })
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.d
    }

    /// dim(ℋ_D) = rank(-Im D).
    pub fn rank_d(&self) -> usize {
        self.hd.rank
    }

    pub fn hd(&self) -> &SpectralSubspace {
        &self.hd
    }

    /// √(-Im D), the coupling weight of the exit channel.
    fn sqrt_minus_im(&self) -> Result<CMatrix> {
        matfun::psd_sqrt(&(-imag_part(&self.d)))
    }
}

/// Per-λ bundle for the complete dilation scattering system: the four blocks,
/// the assembled unitary s_full, the two contractive corners, and both
/// spectral shift representatives.
#[derive(Debug, Clone)]
pub struct DilationScatterValue {
    pub lambda: f64,
    pub rank_m: usize,
    pub rank_d: usize,
    /// Compressed blocks in the bases of ℋ_{M(λ)} and ℋ_D.
    pub t11: CMatrix,
    pub t12: CMatrix,
    pub t21: CMatrix,
    pub t22: CMatrix,
    /// (rank_m + rank_d) square unitary; M-block first, D-block second.
    pub s_full: CMatrix,
    pub s_d: CMatrix,
    pub s_lp: CMatrix,
    pub det_sd: Complex64,
    pub det_slp: Complex64,
    pub eta_d: f64,
    pub xi_dilation: f64,
}

/// (D - M(λ+i0))⁻¹ with a condition guard.
fn resolvent_at(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    lambda: f64,
) -> Result<(CMatrix, CMatrix)> {
    let w = model.boundary_value(lambda)?;
    let shifted = &dp.d - &w;
    let cond = linalg::condition_number(&shifted);
    if !cond.is_finite() || cond > SINGULAR_COND_LIMIT {
        return Err(Error::Singular(format!(
            "D - M(λ+i0) is numerically singular (condition {cond:.3e})"
        )));
    }
    let inv = linalg::try_inverse(&shifted, "D - M(λ+i0)")?;
    Ok((w, inv))
}

/// Complete scattering matrix of the dilation: s_full = I + 2i·[T̃ᵢⱼ]
/// assembled in the orthonormal bases of ℋ_{M(λ)} (first) and ℋ_D (second).
pub fn dilation_scattering(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    lambda: f64,
    tol_rel: f64,
) -> Result<DilationScatterValue> {
    if dp.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "parameter dimension {} does not match model dimension {}",
            dp.dim(),
            model.dim()
        )));
    }
    let (w, inv) = resolvent_at(model, dp, lambda)?;
    let im_w = imag_part(&w);
    let q_m = matfun::psd_sqrt(&im_w)?;
    let q_d = dp.sqrt_minus_im()?;
    let sub_m = matfun::range_projection(&im_w, tol_rel);
    let b_m = &sub_m.basis;
    let b_d = &dp.hd.basis;
    let rank_m = sub_m.rank;
    let rank_d = dp.hd.rank;

    let t11 = b_m.adjoint() * &q_m * &inv * &q_m * b_m;
    let t12 = b_m.adjoint() * &q_m * &inv * &q_d * b_d;
    let t21 = b_d.adjoint() * &q_d * &inv * &q_m * b_m;
    let t22 = b_d.adjoint() * &q_d * &inv * &q_d * b_d;

    let n = rank_m + rank_d;
    let two_i = cr(2.0) * I;
    let s_d = CMatrix::identity(rank_m, rank_m) + &t11 * two_i;
    let s_lp = CMatrix::identity(rank_d, rank_d) + &t22 * two_i;
    let mut s_full = CMatrix::zeros(n, n);
    s_full.view_mut((0, 0), (rank_m, rank_m)).copy_from(&s_d);
    s_full
        .view_mut((0, rank_m), (rank_m, rank_d))
        .copy_from(&(&t12 * two_i));
    s_full
        .view_mut((rank_m, 0), (rank_d, rank_m))
        .copy_from(&(&t21 * two_i));
    s_full
        .view_mut((rank_m, rank_m), (rank_d, rank_d))
        .copy_from(&s_lp);
    let det_sd = linalg::determinant(&s_d);
    let det_slp = linalg::determinant(&s_lp);
    let eta = eta_d(model, dp, lambda)?;
    let xi = dilation_ssf(model, dp, lambda)?;

    Ok(DilationScatterValue {
        lambda,
        rank_m,
        rank_d,
        t11,
        t12,
        t21,
        t22,
        s_full,
        s_d,
        s_lp,
        det_sd,
        det_slp,
        eta_d: eta,
        xi_dilation: xi,
    })
}

/// S_D(λ) = I + 2i √(Im M) (D - M)⁻¹ √(Im M) on ℋ_{M(λ)}.
pub fn dissipative_scattering(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    lambda: f64,
    tol_rel: f64,
) -> Result<CMatrix> {
    let (w, inv) = resolvent_at(model, dp, lambda)?;
    let im_w = imag_part(&w);
    let q_m = matfun::psd_sqrt(&im_w)?;
    let sub_m = matfun::range_projection(&im_w, tol_rel);
    let b_m = &sub_m.basis;
    let t11 = b_m.adjoint() * &q_m * &inv * &q_m * b_m;
    Ok(CMatrix::identity(sub_m.rank, sub_m.rank) + t11 * (cr(2.0) * I))
}

/// S^LP(λ) = I + 2i √(-Im D) (D - M)⁻¹ √(-Im D) on ℋ_D.
pub fn lax_phillips_scattering(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    lambda: f64,
) -> Result<CMatrix> {
    let (_, inv) = resolvent_at(model, dp, lambda)?;
    let q_d = dp.sqrt_minus_im()?;
    let b_d = &dp.hd.basis;
    let t22 = b_d.adjoint() * &q_d * &inv * &q_d * b_d;
    Ok(CMatrix::identity(dp.hd.rank, dp.hd.rank) + t22 * (cr(2.0) * I))
}

/// Characteristic function W(μ) = I - 2i √(-Im D) (D* - M(μ))⁻¹ √(-Im D) on
/// ℋ_D, for Im μ < 0 or, at real μ, the boundary limit μ - i0.
pub fn characteristic_function(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    mu: Complex64,
) -> Result<CMatrix> {
    if mu.im > 0.0 {
        return Err(Error::Domain(
            "characteristic function lives on the closed lower half plane".to_string(),
        ));
    }
    let m = if mu.im == 0.0 {
        // M(μ - i0) = M(μ + i0)*
        model.boundary_value(mu.re)?.adjoint()
    } else {
        model.eval(mu)?
    };
    let shifted = dp.d.adjoint() - m;
    let cond = linalg::condition_number(&shifted);
    if !cond.is_finite() || cond > SINGULAR_COND_LIMIT {
        return Err(Error::Singular(format!(
            "D* - M(μ) is numerically singular (condition {cond:.3e})"
        )));
    }
    let inv = linalg::try_inverse(&shifted, "D* - M(μ)")?;
    let q_d = dp.sqrt_minus_im()?;
    let b_d = &dp.hd.basis;
    let core = b_d.adjoint() * &q_d * inv * &q_d * b_d;
    Ok(CMatrix::identity(dp.hd.rank, dp.hd.rank) - core * (cr(2.0) * I))
}

/// η_D(λ) = (1/π)·Im tr log(M(λ+i0) - D), the spectral shift function of the
/// dissipative pair, in [0, dim].
pub fn eta_d(model: &NevanlinnaModel, dp: &DissipativeParameter, lambda: f64) -> Result<f64> {
    let w = model.boundary_value(lambda)?;
    let tl = matfun::tr_log(&(w - &dp.d))?;
    Ok(tl.im / std::f64::consts::PI)
}

/// ξ_Θ̃(λ) = (1/π)·Im tr log(V (M(λ+i0) - D) V) with the dilation compression
/// weight V = (I - P_D) + P_D/√2. Differs from η_D by an even integer.
pub fn dilation_ssf(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    lambda: f64,
) -> Result<f64> {
    let w = model.boundary_value(lambda)?;
    let n = dp.dim();
    let p_d = dp.hd.projector();
    let v = CMatrix::identity(n, n) - &p_d + &p_d * cr(1.0 / 2.0_f64.sqrt());
    let v = herm_part(&v);
    let shifted = &v * (w - &dp.d) * &v;
    let tl = matfun::tr_log(&shifted)?;
    Ok(tl.im / std::f64::consts::PI)
}

/// tr((A_D - z)⁻¹ - (A_0 - z)⁻¹) = tr((D - M(z))⁻¹ M'(z)) for Im z > 0.
pub fn dissipative_resolvent_trace(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    z: Complex64,
) -> Result<Complex64> {
    if z.im <= 0.0 {
        return Err(Error::Domain(
            "dissipative resolvent trace needs Im z > 0".to_string(),
        ));
    }
    let m = model.eval(z)?;
    let dm = model.derivative(z)?;
    let shifted = &dp.d - m;
    let inv = linalg::try_inverse(&shifted, "D - M(z)")?;
    Ok((inv * dm).trace())
}

/// |tr((A_D - z)⁻¹ - (A_0 - z)⁻¹) + ∫ η_D(t)/(t-z)² dt|.
pub fn verify_modified_trace_formula(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    z: Complex64,
    quad_tol: f64,
) -> Result<f64> {
    let lhs = dissipative_resolvent_trace(model, dp, z)?;
    let bound = dp.dim() as f64;
    let rhs =
        quadrature::integrate_ssf_kernel(|t| eta_d(model, dp, t).ok(), bound, z, quad_tol)?;
    Ok((lhs - rhs.value).norm())
}

/// Residuals of the two modified Birman-Krein identities at one grid point:
/// det S_D = conj(det S^LP)·exp(-2πi η_D) and the version with the roles of
/// S_D and S^LP exchanged.
#[derive(Debug, Clone)]
pub struct ModifiedBkResidual {
    pub lambda: f64,
    pub residual_sd: f64,
    pub residual_slp: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ModifiedBkReport {
    pub residuals: Vec<ModifiedBkResidual>,
    pub skipped: Vec<SkippedPoint>,
}

impl ModifiedBkReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .fold(0.0, |m, r| m.max(r.residual_sd).max(r.residual_slp))
    }
}

pub fn modified_bk_residuals(value: &DilationScatterValue) -> ModifiedBkResidual {
    let phase = (-2.0 * std::f64::consts::PI * value.eta_d * I).exp();
    ModifiedBkResidual {
        lambda: value.lambda,
        residual_sd: (value.det_sd - value.det_slp.conj() * phase).norm(),
        residual_slp: (value.det_slp - value.det_sd.conj() * phase).norm(),
    }
}

pub fn verify_modified_bk(
    model: &NevanlinnaModel,
    dp: &DissipativeParameter,
    grid: &[f64],
    tol_rel: f64,
) -> ModifiedBkReport {
    let mut report = ModifiedBkReport::default();
    for &lambda in grid {
        match dilation_scattering(model, dp, lambda, tol_rel) {
            Ok(value) => report.residuals.push(modified_bk_residuals(&value)),
            Err(err) => report.skipped.push(SkippedPoint {
                lambda,
                reason: err.to_string(),
            }),
        }
    }
    report
}
