//! Selfadjoint scattering systems: scattering matrices, spectral shift
//! functions, resolvent traces and the Birman-Krein identity, all expressed
//! through a Nevanlinna model M and an extension parameter Θ.

use num_complex::Complex64;

use crate::linalg::{self, cr, imag_part, CMatrix, I};
use crate::matfun::{self, SpectralSubspace};
use crate::nevanlinna::NevanlinnaModel;
use crate::quadrature;
use crate::{Error, Result, SkippedPoint};

/// Condition-number threshold beyond which Θ_op - M_op(λ+i0) is treated as
/// numerically singular and the grid point is skipped.
pub const SINGULAR_COND_LIMIT: f64 = 1e6;

/// A selfadjoint extension parameter Θ = Θ_op ⊕ Θ_∞: a Hermitian operator
/// part on the subspace spanned by `op_basis` plus the purely multivalued
/// complement. `op_rank = dim` is a plain selfadjoint matrix, `op_rank = 0`
/// the pure relation.
#[derive(Debug, Clone)]
pub struct SelfAdjointParameter {
    dim: usize,
    /// dim x r with orthonormal columns spanning the operator-part subspace.
    op_basis: CMatrix,
    /// Hermitian r x r matrix acting on that subspace.
    theta_op: CMatrix,
}

impl SelfAdjointParameter {
    /// Full-rank parameter: Θ itself a Hermitian matrix.
    pub fn full(theta: CMatrix) -> Result<Self> {
        linalg::require_square(&theta, "SelfAdjointParameter::full")?;
        let dim = theta.nrows();
        Self::from_parts(CMatrix::identity(dim, dim), theta, dim)
    }

    /// The pure relation Θ = {0} × H: no operator part at all.
    pub fn relation(dim: usize) -> Self {
        SelfAdjointParameter {
            dim,
            op_basis: CMatrix::zeros(dim, 0),
            theta_op: CMatrix::zeros(0, 0),
        }
    }

    /// Parameter with operator part `theta_op` on the column span of
    /// `op_basis` (dim x r, orthonormal columns).
    pub fn subspace(op_basis: CMatrix, theta_op: CMatrix) -> Result<Self> {
        let dim = op_basis.nrows();
        Self::from_parts(op_basis, theta_op, dim)
    }

    fn from_parts(op_basis: CMatrix, theta_op: CMatrix, dim: usize) -> Result<Self> {
        let r = op_basis.ncols();
        linalg::require_dim(&theta_op, r, r, "theta_op")?;
        if r > 0 {
            let gram = op_basis.adjoint() * &op_basis;
            if linalg::fro_norm(&(&gram - CMatrix::identity(r, r))) > 1e-12 * (r as f64) {
                return Err(Error::Validation(
                    "op_basis columns are not orthonormal".to_string(),
                ));
            }
            if linalg::hermitian_defect(&theta_op) > 1e-12 {
                return Err(Error::Validation("theta_op is not Hermitian".to_string()));
            }
        }
        Ok(SelfAdjointParameter {
            dim,
            op_basis,
            theta_op,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn op_rank(&self) -> usize {
        self.op_basis.ncols()
    }

    pub fn op_basis(&self) -> &CMatrix {
        &self.op_basis
    }

    pub fn theta_op(&self) -> &CMatrix {
        &self.theta_op
    }
}

/// Everything computed at one grid point of a selfadjoint sweep.
#[derive(Debug, Clone)]
pub struct ScatterValue {
    pub lambda: f64,
    /// Basis of ran(Im M(λ+i0)), the space the S-matrix lives on.
    pub subspace: SpectralSubspace,
    /// rank x rank scattering matrix in the subspace basis.
    pub s_matrix: CMatrix,
    pub det_s: Complex64,
    pub ssf: f64,
}

/// M_op = P_op· M ·ι_op, the compression of a Weyl-function value onto the
/// operator-part subspace of Θ.
pub fn compress_weyl(m_val: &CMatrix, theta: &SelfAdjointParameter) -> Result<CMatrix> {
    linalg::require_dim(m_val, theta.dim, theta.dim, "compress_weyl")?;
    Ok(theta.op_basis.adjoint() * m_val * &theta.op_basis)
}

/// (Θ_op - M_op)⁻¹ with condition guard; `None` when the operator part is
/// empty (the inverse acts on a zero-dimensional space).
fn op_inverse(w_op: &CMatrix, theta: &SelfAdjointParameter) -> Result<Option<CMatrix>> {
    if theta.op_rank() == 0 {
        return Ok(None);
    }
    let shifted = &theta.theta_op - w_op;
    let cond = linalg::condition_number(&shifted);
    if !cond.is_finite() || cond > SINGULAR_COND_LIMIT {
        return Err(Error::Singular(format!(
            "Θ_op - M_op is numerically singular (condition {cond:.3e})"
        )));
    }
    Ok(Some(linalg::try_inverse(&shifted, "Θ_op - M_op")?))
}

/// S_Θ(λ) = I + 2i √(Im M) (Θ - M)⁻¹ √(Im M) compressed onto ran(Im M(λ+i0)).
pub fn scattering_matrix(
    model: &NevanlinnaModel,
    theta: &SelfAdjointParameter,
    lambda: f64,
    tol_rel: f64,
) -> Result<ScatterValue> {
    if theta.dim != model.dim() {
        return Err(Error::Dimension(format!(
            "parameter dimension {} does not match model dimension {}",
            theta.dim,
            model.dim()
        )));
    }
    let w = model.boundary_value(lambda)?;
    let im_w = imag_part(&w);
    let q = matfun::psd_sqrt(&im_w)?;
    let subspace = matfun::range_projection(&im_w, tol_rel);
    let rank = subspace.rank;

    let s_matrix = if rank == 0 {
        CMatrix::zeros(0, 0)
    } else {
        let w_op = compress_weyl(&w, theta)?;
        match op_inverse(&w_op, theta)? {
            None => CMatrix::identity(rank, rank),
            Some(inv) => {
                // ι_op (Θ_op - M_op)⁻¹ P_op expanded to the ambient space.
                let resolvent = &theta.op_basis * inv * theta.op_basis.adjoint();
                let qb = &q * &subspace.basis;
                CMatrix::identity(rank, rank) + qb.adjoint() * resolvent * &qb * (cr(2.0) * I)
            }
        }
    };
    let det_s = linalg::determinant(&s_matrix);
    let ssf = spectral_shift(model, theta, lambda)?;
    Ok(ScatterValue {
        lambda,
        subspace,
        s_matrix,
        det_s,
        ssf,
    })
}

/// ξ_Θ(λ) = (1/π)·Im tr log(M_op(λ+i0) - Θ_op), in [0, op_rank].
pub fn spectral_shift(
    model: &NevanlinnaModel,
    theta: &SelfAdjointParameter,
    lambda: f64,
) -> Result<f64> {
    if theta.op_rank() == 0 {
        // Empty operator part: the trace over a zero-dimensional space.
        model.boundary_value(lambda)?;
        return Ok(0.0);
    }
    let w = model.boundary_value(lambda)?;
    let w_op = compress_weyl(&w, theta)?;
    let shifted = w_op - &theta.theta_op;
    let tl = matfun::tr_log(&shifted)?;
    Ok(tl.im / std::f64::consts::PI)
}

/// tr((A_Θ - z)⁻¹ - (A_0 - z)⁻¹) = -tr((M_op(z) - Θ_op)⁻¹ M_op'(z)).
pub fn resolvent_trace(
    model: &NevanlinnaModel,
    theta: &SelfAdjointParameter,
    z: Complex64,
) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::Domain("resolvent_trace needs Im z != 0".to_string()));
    }
    if theta.op_rank() == 0 {
        return Ok(Complex64::default());
    }
    let m = model.eval(z)?;
    let m_op = compress_weyl(&m, theta)?;
    let dm_op = compress_weyl(&model.derivative(z)?, theta)?;
    let shifted = m_op - &theta.theta_op;
    let inv = linalg::try_inverse(&shifted, "M_op(z) - Θ_op")?;
    Ok(-(inv * dm_op).trace())
}

/// Per-point residuals of |det S_Θ(λ) - exp(-2πi ξ_Θ(λ))| over a grid.
#[derive(Debug, Clone, Default)]
pub struct BirmanKreinReport {
    pub residuals: Vec<(f64, f64)>,
    pub skipped: Vec<SkippedPoint>,
}

impl BirmanKreinReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &(_, r)| m.max(r))
    }
}

pub fn bk_residual(det_s: Complex64, ssf: f64) -> f64 {
    let phase = (-2.0 * std::f64::consts::PI * ssf * I).exp();
    (det_s - phase).norm()
}

pub fn verify_birman_krein(
    model: &NevanlinnaModel,
    theta: &SelfAdjointParameter,
    grid: &[f64],
    tol_rel: f64,
) -> BirmanKreinReport {
    let mut report = BirmanKreinReport::default();
    for &lambda in grid {
        match scattering_matrix(model, theta, lambda, tol_rel) {
            Ok(value) => report
                .residuals
                .push((lambda, bk_residual(value.det_s, value.ssf))),
            Err(err) => report.skipped.push(SkippedPoint {
                lambda,
                reason: err.to_string(),
            }),
        }
    }
    report
}

/// |resolvent_trace(z) + ∫ ξ_Θ(t)/(t-z)² dt|, the defect of the trace
/// formula at one non-real z. The right-hand side comes from quadrature with
/// singular ssf points skipped.
pub fn verify_trace_formula(
    model: &NevanlinnaModel,
    theta: &SelfAdjointParameter,
    z: Complex64,
    quad_tol: f64,
) -> Result<f64> {
    let lhs = resolvent_trace(model, theta, z)?;
    let bound = theta.op_rank() as f64;
    let rhs = quadrature::integrate_ssf_kernel(
        |t| spectral_shift(model, theta, t).ok(),
        bound,
        z,
        quad_tol,
    )?;
    Ok((lhs - rhs.value).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use crate::nevanlinna::HerglotzTerm;

    fn m1(z: Complex64) -> CMatrix {
        CMatrix::from_row_slice(1, 1, &[z])
    }

    fn constant_i() -> NevanlinnaModel {
        NevanlinnaModel::new("constant-i", 1, vec![HerglotzTerm::Constant { c: m1(I) }]).unwrap()
    }

    fn affine() -> NevanlinnaModel {
        NevanlinnaModel::new(
            "affine",
            1,
            vec![HerglotzTerm::Affine {
                a: m1(cr(0.0)),
                b: m1(cr(1.0)),
            }],
        )
        .unwrap()
    }

    fn sqrt_model() -> NevanlinnaModel {
        NevanlinnaModel::new("halfline", 1, vec![HerglotzTerm::Sqrt { g: m1(cr(1.0)) }]).unwrap()
    }

    fn theta_scalar(x: f64) -> SelfAdjointParameter {
        SelfAdjointParameter::full(m1(cr(x))).unwrap()
    }

    #[test]
    fn compress_full_and_corner() {
        let theta = SelfAdjointParameter::full(CMatrix::identity(2, 2)).unwrap();
        let m = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(3.0), cr(4.0)]);
        let out = compress_weyl(&m, &theta).unwrap();
        assert!(linalg::fro_norm(&(&out - &m)) < 1e-15);

        let rel = SelfAdjointParameter::relation(2);
        let out = compress_weyl(&m, &rel).unwrap();
        assert_eq!(out.nrows(), 0);

        let e1 = CMatrix::from_row_slice(2, 1, &[ONE, Complex64::default()]);
        let sub = SelfAdjointParameter::subspace(e1, m1(cr(0.0))).unwrap();
        let out = compress_weyl(&m, &sub).unwrap();
        assert!((out[(0, 0)] - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn scattering_constant_i() {
        // M ≡ i, Θ = 0: S = 1 + 2i(0-i)⁻¹ = -1 at every λ.
        let sv = scattering_matrix(&constant_i(), &theta_scalar(0.0), 0.7, 1e-10).unwrap();
        assert_eq!(sv.subspace.rank, 1);
        assert!((sv.s_matrix[(0, 0)] + ONE).norm() < 1e-12);
        assert!((sv.det_s + ONE).norm() < 1e-12);
    }

    #[test]
    fn scattering_sqrt_theta_two() {
        // S(4) = (2+2i)/(2-2i) = i.
        let sv = scattering_matrix(&sqrt_model(), &theta_scalar(2.0), 4.0, 1e-10).unwrap();
        assert!((sv.det_s - I).norm() < 1e-12);
    }

    #[test]
    fn scattering_in_gap_is_empty() {
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }])
                .unwrap();
        let sv = scattering_matrix(&model, &theta_scalar(1.0), 2.0, 1e-10).unwrap();
        assert_eq!(sv.subspace.rank, 0);
        assert_eq!(sv.det_s, ONE);
    }

    #[test]
    fn ssf_constant_i() {
        let xi = spectral_shift(&constant_i(), &theta_scalar(0.0), 0.3).unwrap();
        assert!((xi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ssf_affine_step() {
        let theta = theta_scalar(0.25);
        let below = spectral_shift(&affine(), &theta, -1.0).unwrap();
        let above = spectral_shift(&affine(), &theta, 1.0).unwrap();
        assert!((below - 1.0).abs() < 1e-10);
        assert!(above.abs() < 1e-10);
    }

    #[test]
    fn ssf_sqrt_three_quarters() {
        let xi = spectral_shift(&sqrt_model(), &theta_scalar(2.0), 4.0).unwrap();
        assert!((xi - 0.75).abs() < 1e-12);
    }

    #[test]
    fn resolvent_trace_cases() {
        // constant model: derivative vanishes.
        let t = resolvent_trace(&constant_i(), &theta_scalar(0.4), c(0.3, 2.0)).unwrap();
        assert!(t.norm() < 1e-15);

        // M(λ) = λ: -1/(z - θ).
        let theta = 0.6;
        let t = resolvent_trace(&affine(), &theta_scalar(theta), I).unwrap();
        let expect = ONE / (cr(theta) - I);
        assert!((t - expect).norm() < 1e-14);

        // Pole model with Θ = 0: tr = 1/z.
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }])
                .unwrap();
        let z = c(0.4, 1.3);
        let t = resolvent_trace(&model, &theta_scalar(0.0), z).unwrap();
        assert!((t - ONE / z).norm() < 1e-14);
    }

    #[test]
    fn birman_krein_residuals_tiny() {
        let grid: Vec<f64> = (0..16).map(|k| 0.37 + k as f64 * 0.61).collect();
        let report = verify_birman_krein(&constant_i(), &theta_scalar(0.0), &grid, 1e-10);
        assert!(report.skipped.is_empty());
        assert!(report.max_residual() < 1e-12);

        let report = verify_birman_krein(&sqrt_model(), &theta_scalar(2.0), &grid, 1e-10);
        assert!(report.max_residual() < 1e-10);
    }

    #[test]
    fn birman_krein_in_gap_integer_ssf() {
        // Pole model in its gap: rank 0, det S = 1, ξ integer.
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }])
                .unwrap();
        let theta = theta_scalar(1.0);
        let sv = scattering_matrix(&model, &theta, 2.0, 1e-10).unwrap();
        // M(2) - Θ = 1/(0-2) - 1 = -3/2 < 0: one negative eigenvalue, ξ = 1.
        assert!((sv.ssf - 1.0).abs() < 1e-10);
        assert!(bk_residual(sv.det_s, sv.ssf) < 1e-12);
    }

    #[test]
    fn trace_formula_constant() {
        let residual =
            verify_trace_formula(&constant_i(), &theta_scalar(0.0), I, 1e-6).unwrap();
        assert!(residual < 1e-6, "residual = {residual:e}");
    }

    #[test]
    fn trace_formula_affine() {
        let residual =
            verify_trace_formula(&affine(), &theta_scalar(0.3), I, 1e-6).unwrap();
        assert!(residual < 1e-6, "residual = {residual:e}");
    }

    #[test]
    fn unitarity_on_the_subspace() {
        let grid = [0.9, 2.3, 5.8, 9.1];
        for &lambda in &grid {
            let sv = scattering_matrix(&sqrt_model(), &theta_scalar(2.0), lambda, 1e-10).unwrap();
            assert!(linalg::unitarity_defect(&sv.s_matrix) < 1e-12);
            assert!(sv.ssf >= -1e-10 && sv.ssf <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn derivative_identity_finite_difference() {
        // d/dz tr log(M_op(z) - Θ_op) == tr((M_op - Θ_op)⁻¹ M_op').
        let model = sqrt_model();
        let theta = theta_scalar(2.0);
        let z = c(1.2, 0.8);
        let h = 1e-5;
        let tl = |z: Complex64| {
            let m_op = compress_weyl(&model.eval(z).unwrap(), &theta).unwrap();
            matfun::tr_log(&(m_op - theta.theta_op())).unwrap()
        };
        let fd = (tl(z + cr(h)) - tl(z - cr(h))) / cr(2.0 * h);
        let m_op = compress_weyl(&model.eval(z).unwrap(), &theta).unwrap();
        let dm_op = compress_weyl(&model.derivative(z).unwrap(), &theta).unwrap();
        let inv = linalg::try_inverse(&(m_op - theta.theta_op()), "t").unwrap();
        let analytic = (inv * dm_op).trace();
        assert!((fd - analytic).norm() / analytic.norm() < 1e-6);
    }

    #[test]
    fn ssf_for_pure_relation_vanishes() {
        let rel = SelfAdjointParameter::relation(1);
        let xi = spectral_shift(&sqrt_model(), &rel, 2.0).unwrap();
        assert_eq!(xi, 0.0);
        let sv = scattering_matrix(&sqrt_model(), &rel, 2.0, 1e-10).unwrap();
        assert_eq!(sv.subspace.rank, 1);
        assert!((sv.det_s - ONE).norm() < 1e-14);
    }

    #[test]
    fn ssf_half_on_positive_axis() {
        let xi = spectral_shift(&sqrt_model(), &theta_scalar(0.0), 2.0).unwrap();
        assert!((xi - 0.5).abs() < 1e-12);
    }
}
