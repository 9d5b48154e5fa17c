//! Coupled scattering systems built from two Nevanlinna models of equal
//! dimension: an inner Weyl function M and an exit channel τ. Provides the
//! channel scattering matrices, the coupled spectral shift function, the
//! Štraus-family resolvent traces, and the modified Birman-Krein identities.

use num_complex::Complex64;

use crate::linalg::{self, cr, imag_part, CMatrix, I};
use crate::matfun;
use crate::nevanlinna::NevanlinnaModel;
use crate::quadrature;
use crate::sa_scatter::SINGULAR_COND_LIMIT;
use crate::{Error, Result, SkippedPoint};

/// The coupling of the subsystems carried by M and τ. The coupling relation
/// has zero operator part on the diagonal subspace {(v,v)}, so every derived
/// quantity reduces to expressions in M(λ) + τ(λ).
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    model_h: NevanlinnaModel,
    model_g: NevanlinnaModel,
}

/// Which channel of a coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Inner space channel (frozen parameter -τ(μ)).
    H,
    /// Exit space channel (frozen parameter -M(μ)).
    G,
}

impl CoupledSystem {
    pub fn new(model_h: NevanlinnaModel, model_g: NevanlinnaModel) -> Result<Self> {
        if model_h.dim() != model_g.dim() {
            return Err(Error::Dimension(format!(
                "coupled models must have equal dimension ({} vs {})",
                model_h.dim(),
                model_g.dim()
            )));
        }
        for (label, model) in [("M", &model_h), ("τ", &model_g)] {
            let violations = model.validate();
            if !violations.is_empty() {
                return Err(Error::Validation(format!(
                    "{label} model invalid: {}",
                    violations.join("; ")
                )));
            }
        }
        Ok(CoupledSystem { model_h, model_g })
    }

    pub fn dim(&self) -> usize {
        self.model_h.dim()
    }

    pub fn model_h(&self) -> &NevanlinnaModel {
        &self.model_h
    }

    pub fn model_g(&self) -> &NevanlinnaModel {
        &self.model_g
    }

    /// The same system with the roles of the two channels exchanged.
    pub fn swapped(&self) -> CoupledSystem {
        CoupledSystem {
            model_h: self.model_g.clone(),
            model_g: self.model_h.clone(),
        }
    }
}

/// Per-λ bundle for a coupled sweep: channel blocks, the full unitary
/// scattering matrix, and the spectral shift data.
#[derive(Debug, Clone)]
pub struct ChannelScatterValue {
    pub lambda: f64,
    pub rank_h: usize,
    pub rank_g: usize,
    pub s_h: CMatrix,
    pub s_g: CMatrix,
    /// (rank_h + rank_g) square unitary; H-block first, G-block second.
    pub s_full: CMatrix,
    pub det_sh: Complex64,
    pub det_sg: Complex64,
    pub xi_tilde: f64,
    /// η_{-τ(λ)}(λ), the H-channel spectral shift at μ = λ.
    pub eta_tau: f64,
    /// η_{-M(λ)}(λ), the G-channel spectral shift at μ = λ.
    pub eta_m: f64,
}

/// (M(λ+i0) + τ(λ+i0))⁻¹ with a condition guard.
fn sum_resolvent(sys: &CoupledSystem, lambda: f64) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let wm = sys.model_h.boundary_value(lambda)?;
    let wt = sys.model_g.boundary_value(lambda)?;
    let sum = &wm + &wt;
    let cond = linalg::condition_number(&sum);
    if !cond.is_finite() || cond > SINGULAR_COND_LIMIT {
        return Err(Error::Singular(format!(
            "M(λ+i0) + τ(λ+i0) is numerically singular (condition {cond:.3e})"
        )));
    }
    let inv = linalg::try_inverse(&sum, "M + τ")?;
    Ok((wm, wt, inv))
}

/// Scattering matrix of the coupled system in the bases of ℋ_{M(λ)} (first)
/// and ℋ_{τ(λ)} (second): s_full = I - 2i·[T̃ᵢⱼ] with blocks built from
/// (M+τ)⁻¹. Note the minus sign relative to the dilation formula.
pub fn coupled_scattering(
    sys: &CoupledSystem,
    lambda: f64,
    tol_rel: f64,
) -> Result<ChannelScatterValue> {
    let (wm, wt, inv) = sum_resolvent(sys, lambda)?;
    let im_m = imag_part(&wm);
    let im_t = imag_part(&wt);
    let q_m = matfun::psd_sqrt(&im_m)?;
    let q_t = matfun::psd_sqrt(&im_t)?;
    let sub_m = matfun::range_projection(&im_m, tol_rel);
    let sub_t = matfun::range_projection(&im_t, tol_rel);
    let b_m = &sub_m.basis;
    let b_t = &sub_t.basis;
    let rank_h = sub_m.rank;
    let rank_g = sub_t.rank;

    let t11 = b_m.adjoint() * &q_m * &inv * &q_m * b_m;
    let t12 = b_m.adjoint() * &q_m * &inv * &q_t * b_t;
    let t21 = b_t.adjoint() * &q_t * &inv * &q_m * b_m;
    let t22 = b_t.adjoint() * &q_t * &inv * &q_t * b_t;

    let minus_two_i = cr(-2.0) * I;
    let s_h = CMatrix::identity(rank_h, rank_h) + &t11 * minus_two_i;
    let s_g = CMatrix::identity(rank_g, rank_g) + &t22 * minus_two_i;
    let n = rank_h + rank_g;
    let mut s_full = CMatrix::zeros(n, n);
    s_full.view_mut((0, 0), (rank_h, rank_h)).copy_from(&s_h);
    s_full
        .view_mut((0, rank_h), (rank_h, rank_g))
        .copy_from(&(&t12 * minus_two_i));
    s_full
        .view_mut((rank_h, 0), (rank_g, rank_h))
        .copy_from(&(&t21 * minus_two_i));
    s_full
        .view_mut((rank_h, rank_h), (rank_g, rank_g))
        .copy_from(&s_g);

    let xi_tilde = coupled_ssf(sys, lambda)?;
    Ok(ChannelScatterValue {
        lambda,
        rank_h,
        rank_g,
        det_sh: linalg::determinant(&s_h),
        det_sg: linalg::determinant(&s_g),
        s_h,
        s_g,
        s_full,
        xi_tilde,
        eta_tau: eta_channel(sys, Channel::H, lambda, lambda)?,
        eta_m: eta_channel(sys, Channel::G, lambda, lambda)?,
    })
}

/// ξ̃(λ) = (1/π)·Im tr log(M(λ+i0) + τ(λ+i0)), the k = 0 representative of
/// the coupled spectral shift function, in [0, dim].
pub fn coupled_ssf(sys: &CoupledSystem, lambda: f64) -> Result<f64> {
    let wm = sys.model_h.boundary_value(lambda)?;
    let wt = sys.model_g.boundary_value(lambda)?;
    let tl = matfun::tr_log(&(wm + wt))?;
    Ok(tl.im / std::f64::consts::PI)
}

/// The two Štraus resolvent traces at non-real z:
/// tr((A_{-τ(z)} - z)⁻¹ - (A_0 - z)⁻¹) = -tr((M+τ)⁻¹ M') and the analogous
/// exit-channel trace -tr((M+τ)⁻¹ τ').
pub fn straus_traces(sys: &CoupledSystem, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z.im == 0.0 {
        return Err(Error::Domain("straus_traces needs Im z != 0".to_string()));
    }
    let m = sys.model_h.eval(z)?;
    let t = sys.model_g.eval(z)?;
    let sum = m + t;
    let inv = linalg::try_inverse(&sum, "M(z) + τ(z)")?;
    let dm = sys.model_h.derivative(z)?;
    let dt = sys.model_g.derivative(z)?;
    Ok((-(&inv * dm).trace(), -(&inv * dt).trace()))
}

/// η of one channel with the other side frozen at μ:
/// Channel::H gives (1/π)·Im tr log(M(λ+i0) + τ(μ+i0)),
/// Channel::G gives (1/π)·Im tr log(M(μ+i0) + τ(λ+i0)).
pub fn eta_channel(sys: &CoupledSystem, which: Channel, mu: f64, lambda: f64) -> Result<f64> {
    let value = match which {
        Channel::H => sys.model_h.boundary_value(lambda)? + sys.model_g.boundary_value(mu)?,
        Channel::G => sys.model_h.boundary_value(mu)? + sys.model_g.boundary_value(lambda)?,
    };
    let tl = matfun::tr_log(&value)?;
    Ok(tl.im / std::f64::consts::PI)
}

/// |trace_h + trace_g + ∫ ξ̃(t)/(t-z)² dt|, the coupled trace formula defect.
pub fn verify_coupled_trace_formula(
    sys: &CoupledSystem,
    z: Complex64,
    quad_tol: f64,
) -> Result<f64> {
    let (trace_h, trace_g) = straus_traces(sys, z)?;
    let bound = sys.dim() as f64;
    let rhs = quadrature::integrate_ssf_kernel(|t| coupled_ssf(sys, t).ok(), bound, z, quad_tol)?;
    Ok((trace_h + trace_g - rhs.value).norm())
}

/// Residuals of the two modified Birman-Krein orientations at one point:
/// det S_ℌ = conj(det S_𝔊)·exp(-2πi ξ̃) and the channel-swapped version.
#[derive(Debug, Clone)]
pub struct CoupledBkResidual {
    pub lambda: f64,
    pub residual_h: f64,
    pub residual_g: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CoupledBkReport {
    pub residuals: Vec<CoupledBkResidual>,
    pub skipped: Vec<SkippedPoint>,
}

impl CoupledBkReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .fold(0.0, |m, r| m.max(r.residual_h).max(r.residual_g))
    }
}

pub fn coupled_bk_residuals(value: &ChannelScatterValue) -> CoupledBkResidual {
    let phase = (-2.0 * std::f64::consts::PI * value.xi_tilde * I).exp();
    CoupledBkResidual {
        lambda: value.lambda,
        residual_h: (value.det_sh - value.det_sg.conj() * phase).norm(),
        residual_g: (value.det_sg - value.det_sh.conj() * phase).norm(),
    }
}

pub fn verify_coupled_bk(sys: &CoupledSystem, grid: &[f64], tol_rel: f64) -> CoupledBkReport {
    let mut report = CoupledBkReport::default();
    for &lambda in grid {
        match coupled_scattering(sys, lambda, tol_rel) {
            Ok(value) => report.residuals.push(coupled_bk_residuals(&value)),
            Err(err) => report.skipped.push(SkippedPoint {
                lambda,
                reason: err.to_string(),
            }),
        }
    }
    report
}
