//! Matrix-valued Nevanlinna functions assembled from closed-form Herglotz
//! terms, with exact real-axis boundary values and derivatives.
//!
//! Every term maps the upper half plane into matrices with nonnegative
//! imaginary part and satisfies the symmetry M(λ̄) = M(λ)*, so any sum of
//! terms of a common dimension is again a Nevanlinna function. Working with
//! closed forms keeps boundary values and derivatives exact instead of
//! ε-extrapolated.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, c, cr, herm_spectral_norm, imag_part, CMatrix, I};
use crate::{Error, Result};

/// Eigenvalue slack allowed below zero when checking PSD coefficients.
const PSD_SLACK: f64 = 1e-12;
/// Relative guard radius around exceptional points of boundary values.
const EXCEPTIONAL_TOL: f64 = 1e-12;

/// Square root with Im √λ ≥ 0, the branch that keeps i√λ a Nevanlinna map.
fn sqrt_upper(z: Complex64) -> Complex64 {
    let p = z.sqrt();
    if p.im >= 0.0 {
        p
    } else {
        -p
    }
}

/// One closed-form Herglotz summand of a [`NevanlinnaModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum HerglotzTerm {
    /// C for Im λ > 0 and C* for Im λ < 0, with Im C ⪰ 0.
    Constant { c: CMatrix },
    /// A + λB with A Hermitian and B ⪰ 0.
    Affine { a: CMatrix, b: CMatrix },
    /// G/(t - λ) with G ⪰ 0.
    Pole { t: f64, g: CMatrix },
    /// R·Log((b-λ)/(a-λ)), the Cauchy transform of a constant density on
    /// (a, b); principal Log off the axis, +iπ jump inside (a, b).
    AcBox { a: f64, b: f64, r: CMatrix },
    /// G·i√λ with the branch Im √λ ≥ 0.
    Sqrt { g: CMatrix },
}

impl HerglotzTerm {
    pub fn dim(&self) -> usize {
        match self {
            HerglotzTerm::Constant { c } => c.nrows(),
            HerglotzTerm::Affine { a, .. } => a.nrows(),
            HerglotzTerm::Pole { g, .. } => g.nrows(),
            HerglotzTerm::AcBox { r, .. } => r.nrows(),
            HerglotzTerm::Sqrt { g } => g.nrows(),
        }
    }

    fn eval(&self, lambda: Complex64) -> CMatrix {
        match self {
            HerglotzTerm::Constant { c } => {
                if lambda.im >= 0.0 {
                    c.clone()
                } else {
                    c.adjoint()
                }
            }
            HerglotzTerm::Affine { a, b } => a + b * lambda,
            HerglotzTerm::Pole { t, g } => g * (cr(1.0) / (cr(*t) - lambda)),
            HerglotzTerm::AcBox { a, b, r } => {
                let ratio = (cr(*b) - lambda) / (cr(*a) - lambda);
                r * ratio.ln()
            }
            HerglotzTerm::Sqrt { g } => g * (I * sqrt_upper(lambda)),
        }
    }

    fn boundary_value(&self, lambda: f64) -> CMatrix {
        match self {
            HerglotzTerm::Constant { c } => c.clone(),
            HerglotzTerm::Affine { a, b } => a + b * cr(lambda),
            HerglotzTerm::Pole { t, g } => g * cr(1.0 / (t - lambda)),
            HerglotzTerm::AcBox { a, b, r } => {
                if lambda > *a && lambda < *b {
                    r * c(((b - lambda) / (lambda - a)).ln(), std::f64::consts::PI)
                } else {
                    r * cr(((b - lambda) / (a - lambda)).ln())
                }
            }
            HerglotzTerm::Sqrt { g } => {
                if lambda >= 0.0 {
                    g * (I * cr(lambda.sqrt()))
                } else {
                    g * cr(-(-lambda).sqrt())
                }
            }
        }
    }

    fn derivative(&self, lambda: Complex64) -> CMatrix {
        match self {
            HerglotzTerm::Constant { c } => CMatrix::zeros(c.nrows(), c.ncols()),
            HerglotzTerm::Affine { b, .. } => b.clone(),
            HerglotzTerm::Pole { t, g } => {
                let d = cr(*t) - lambda;
                g * (cr(1.0) / (d * d))
            }
            HerglotzTerm::AcBox { a, b, r } => {
                r * (cr(1.0) / (cr(*a) - lambda) - cr(1.0) / (cr(*b) - lambda))
            }
            HerglotzTerm::Sqrt { g } => g * (I / (cr(2.0) * sqrt_upper(lambda))),
        }
    }

    /// Real points where the boundary value formula breaks down.
    fn exceptional_points(&self) -> Vec<f64> {
        match self {
            HerglotzTerm::Constant { .. } | HerglotzTerm::Affine { .. } => Vec::new(),
            HerglotzTerm::Pole { t, .. } => vec![*t],
            HerglotzTerm::AcBox { a, b, .. } => vec![*a, *b],
            HerglotzTerm::Sqrt { .. } => vec![0.0],
        }
    }

    fn coefficient_norm(&self) -> f64 {
        match self {
            HerglotzTerm::Constant { c } => linalg::fro_norm(c),
            HerglotzTerm::Affine { a, b } => linalg::fro_norm(a).max(linalg::fro_norm(b)),
            HerglotzTerm::Pole { g, .. } => linalg::fro_norm(g),
            HerglotzTerm::AcBox { r, .. } => linalg::fro_norm(r),
            HerglotzTerm::Sqrt { g } => linalg::fro_norm(g),
        }
    }

    fn check(&self, index: usize, violations: &mut Vec<String>) {
        fn psd(m: &CMatrix, index: usize, what: &str, violations: &mut Vec<String>) {
            if linalg::hermitian_defect(m) > 1e-12 {
                violations.push(format!("term {index}: {what} = {what}* fails"));
                return;
            }
            let floor = -PSD_SLACK * herm_spectral_norm(m).max(1.0);
            if linalg::min_herm_eigenvalue(m) < floor {
                violations.push(format!("term {index}: {what} ⪰ 0 fails"));
            }
        }
        match self {
            HerglotzTerm::Constant { c } => {
                let im = imag_part(c);
                let floor = -PSD_SLACK * herm_spectral_norm(&im).max(1.0);
                if linalg::min_herm_eigenvalue(&im) < floor {
                    violations.push(format!("term {index}: Im C ⪰ 0 fails"));
                }
            }
            HerglotzTerm::Affine { a, b } => {
                if linalg::hermitian_defect(a) > 1e-12 {
                    violations.push(format!("term {index}: A = A* fails"));
                }
                psd(b, index, "B", violations);
            }
            HerglotzTerm::Pole { g, .. } => psd(g, index, "G", violations),
            HerglotzTerm::AcBox { a, b, r } => {
                if !(a < b) {
                    violations.push(format!("term {index}: interval a < b fails"));
                }
                psd(r, index, "R", violations);
            }
            HerglotzTerm::Sqrt { g } => psd(g, index, "G", violations),
        }
    }

    /// Zero-pad into a larger space at the given block offset.
    fn embed(&self, total: usize, offset: usize) -> HerglotzTerm {
        let pad = |m: &CMatrix| {
            let mut out = CMatrix::zeros(total, total);
            out.view_mut((offset, offset), (m.nrows(), m.ncols()))
                .copy_from(m);
            out
        };
        match self {
            HerglotzTerm::Constant { c } => HerglotzTerm::Constant { c: pad(c) },
            HerglotzTerm::Affine { a, b } => HerglotzTerm::Affine {
                a: pad(a),
                b: pad(b),
            },
            HerglotzTerm::Pole { t, g } => HerglotzTerm::Pole { t: *t, g: pad(g) },
            HerglotzTerm::AcBox { a, b, r } => HerglotzTerm::AcBox {
                a: *a,
                b: *b,
                r: pad(r),
            },
            HerglotzTerm::Sqrt { g } => HerglotzTerm::Sqrt { g: pad(g) },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            HerglotzTerm::Constant { .. } => "constant",
            HerglotzTerm::Affine { .. } => "affine",
            HerglotzTerm::Pole { .. } => "pole",
            HerglotzTerm::AcBox { .. } => "acbox",
            HerglotzTerm::Sqrt { .. } => "sqrt",
        }
    }
}

/// A matrix Nevanlinna function given as a finite sum of Herglotz terms.
#[derive(Debug, Clone, PartialEq)]
pub struct NevanlinnaModel {
    dim: usize,
    name: String,
    terms: Vec<HerglotzTerm>,
}

impl NevanlinnaModel {
    /// Builds a model, checking dimensions and term invariants.
    pub fn new(name: impl Into<String>, dim: usize, terms: Vec<HerglotzTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("model dimension must be positive".into()));
        }
        for (i, term) in terms.iter().enumerate() {
            if term.dim() == 0 {
                return Err(Error::Dimension(format!("term {i}: empty matrix")));
            }
            match term {
                HerglotzTerm::Constant { c: m } => linalg::require_dim(m, dim, dim, "Constant C")?,
                HerglotzTerm::Affine { a, b } => {
                    linalg::require_dim(a, dim, dim, "Affine A")?;
                    linalg::require_dim(b, dim, dim, "Affine B")?;
                }
                HerglotzTerm::Pole { g, .. } => linalg::require_dim(g, dim, dim, "Pole G")?,
                HerglotzTerm::AcBox { r, .. } => linalg::require_dim(r, dim, dim, "AcBox R")?,
                HerglotzTerm::Sqrt { g } => linalg::require_dim(g, dim, dim, "Sqrt G")?,
            }
        }
        let model = NevanlinnaModel {
            dim,
            name: name.into(),
            terms,
        };
        let violations = model.validate();
        if !violations.is_empty() {
            return Err(Error::Validation(violations.join("; ")));
        }
        Ok(model)
    }

    /// Constructs without invariant checks; used by tests that need to feed
    /// deliberately invalid models to the verifiers.
    pub fn new_unchecked(name: impl Into<String>, dim: usize, terms: Vec<HerglotzTerm>) -> Self {
        NevanlinnaModel {
            dim,
            name: name.into(),
            terms,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[HerglotzTerm] {
        &self.terms
    }

    /// M(λ) for non-real λ.
    pub fn eval(&self, lambda: Complex64) -> Result<CMatrix> {
        if lambda.im == 0.0 {
            return Err(Error::Domain(format!(
                "eval needs Im λ != 0 (got λ = {lambda}); use boundary_value on the axis"
            )));
        }
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            sum += term.eval(lambda);
        }
        Ok(sum)
    }

    /// The exact limit M(λ+i0) from the upper half plane.
    pub fn boundary_value(&self, lambda: f64) -> Result<CMatrix> {
        self.check_exceptional(lambda)?;
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            sum += term.boundary_value(lambda);
        }
        Ok(sum)
    }

    /// dM/dλ for non-real λ.
    pub fn derivative(&self, lambda: Complex64) -> Result<CMatrix> {
        if lambda.im == 0.0 {
            return Err(Error::Domain(format!(
                "derivative needs Im λ != 0 (got λ = {lambda})"
            )));
        }
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            sum += term.derivative(lambda);
        }
        Ok(sum)
    }

    /// Block-diagonal sum of two models; Pole terms at an identical location
    /// are merged so the pairwise-distinct invariant survives.
    pub fn direct_sum(&self, other: &NevanlinnaModel) -> NevanlinnaModel {
        let total = self.dim + other.dim;
        let mut terms: Vec<HerglotzTerm> = self
            .terms
            .iter()
            .map(|t| t.embed(total, 0))
            .collect();
        'outer: for term in &other.terms {
            let embedded = term.embed(total, self.dim);
            if let HerglotzTerm::Pole { t, g } = &embedded {
                for existing in terms.iter_mut() {
                    if let HerglotzTerm::Pole { t: t0, g: g0 } = existing {
                        if t0 == t {
                            *g0 += g;
                            continue 'outer;
                        }
                    }
                }
            }
            terms.push(embedded);
        }
        NevanlinnaModel {
            dim: total,
            name: format!("{}⊕{}", self.name, other.name),
            terms,
        }
    }

    /// All invariant violations: per-term coefficient checks, distinct pole
    /// locations, and Im M(λ) ⪰ 0 sampled on a fixed pseudorandom set of 32
    /// points in the upper half plane.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        for (i, term) in self.terms.iter().enumerate() {
            term.check(i, &mut violations);
        }
        let poles: Vec<f64> = self
            .terms
            .iter()
            .filter_map(|t| match t {
                HerglotzTerm::Pole { t, .. } => Some(*t),
                _ => None,
            })
            .collect();
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                if (poles[i] - poles[j]).abs() <= 1e-12 * (1.0 + poles[i].abs()) {
                    violations.push(format!(
                        "pole locations {} and {} coincide",
                        poles[i], poles[j]
                    ));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x4e65_7661);
        for _ in 0..32 {
            let lambda = c(rng.random_range(-5.0..5.0), rng.random_range(0.01..5.0));
            let value = match self.eval(lambda) {
                Ok(v) => v,
                Err(e) => {
                    violations.push(format!("eval failed at λ = {lambda}: {e}"));
                    continue;
                }
            };
            let floor = -1e-12 * (1.0 + linalg::fro_norm(&value));
            let min_im = linalg::min_herm_eigenvalue(&imag_part(&value));
            if min_im < floor {
                violations.push(format!(
                    "Im M(λ) ⪰ 0 fails at λ = {lambda}: smallest eigenvalue {min_im:.3e}"
                ));
            }
        }
        violations
    }

    /// Scale used for the relative guard around exceptional points.
    fn exceptional_scale(&self, lambda: f64) -> f64 {
        let coeff = self
            .terms
            .iter()
            .map(HerglotzTerm::coefficient_norm)
            .fold(0.0_f64, f64::max);
        1.0 + lambda.abs() + coeff
    }

    fn check_exceptional(&self, lambda: f64) -> Result<()> {
        let guard = EXCEPTIONAL_TOL * self.exceptional_scale(lambda);
        for term in &self.terms {
            for point in term.exceptional_points() {
                if (lambda - point).abs() <= guard {
                    return Err(Error::ExceptionalPoint {
                        lambda,
                        what: format!("{} point at {point}", term.kind()),
                    });
                }
            }
        }
        Ok(())
    }

    /// True when λ is inside the guard radius of the exceptional set.
    pub fn is_exceptional(&self, lambda: f64) -> bool {
        self.check_exceptional(lambda).is_err()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

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

    #[test]
    fn eval_constant() {
        let v = constant_i().eval(c(2.0, 3.0)).unwrap();
        assert!((v[(0, 0)] - I).norm() < 1e-15);
        // lower half plane sees the adjoint
        let v = constant_i().eval(c(2.0, -3.0)).unwrap();
        assert!((v[(0, 0)] + I).norm() < 1e-15);
    }

    #[test]
    fn eval_affine_identity() {
        let v = affine().eval(c(1.0, 1.0)).unwrap();
        assert!((v[(0, 0)] - c(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_pole_at_i() {
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }])
                .unwrap();
        let v = model.eval(I).unwrap();
        // 1/(0 - i) = i
        assert!((v[(0, 0)] - I).norm() < 1e-15);
    }

    #[test]
    fn eval_rejects_real_lambda() {
        assert!(matches!(
            constant_i().eval(cr(1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn boundary_acbox_inside() {
        let model = NevanlinnaModel::new(
            "box",
            1,
            vec![HerglotzTerm::AcBox {
                a: 0.0,
                b: 1.0,
                r: m1(cr(1.0)),
            }],
        )
        .unwrap();
        let v = model.boundary_value(0.5).unwrap();
        assert!((v[(0, 0)] - c(0.0, PI)).norm() < 1e-14);
        // cross-check against eval just above the axis
        let above = model.eval(c(0.5, 1e-8)).unwrap();
        assert!((v[(0, 0)] - above[(0, 0)]).norm() < 1e-6);
    }

    #[test]
    fn boundary_sqrt() {
        let v = sqrt_model().boundary_value(4.0).unwrap();
        assert!((v[(0, 0)] - c(0.0, 2.0)).norm() < 1e-15);
        let above = sqrt_model().eval(c(4.0, 1e-8)).unwrap();
        assert!((v[(0, 0)] - above[(0, 0)]).norm() < 1e-6);
        let neg = sqrt_model().boundary_value(-4.0).unwrap();
        assert!((neg[(0, 0)] - cr(-2.0)).norm() < 1e-15);
    }

    #[test]
    fn boundary_pole() {
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 2.0, g: m1(cr(1.0)) }])
                .unwrap();
        let v = model.boundary_value(3.0).unwrap();
        assert!((v[(0, 0)] - cr(-1.0)).norm() < 1e-15);
        assert!(matches!(
            model.boundary_value(2.0),
            Err(Error::ExceptionalPoint { .. })
        ));
    }

    #[test]
    fn derivative_cases() {
        let d = constant_i().derivative(I).unwrap();
        assert!(d[(0, 0)].norm() < 1e-15);
        let d = affine().derivative(c(0.3, 0.7)).unwrap();
        assert!((d[(0, 0)] - cr(1.0)).norm() < 1e-15);
        let model =
            NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }])
                .unwrap();
        let d = model.derivative(I).unwrap();
        // 1/(0-i)² = -1
        assert!((d[(0, 0)] - cr(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn direct_sum_blocks() {
        let m2 = NevanlinnaModel::new(
            "constant-2i",
            1,
            vec![HerglotzTerm::Constant { c: m1(cr(2.0) * I) }],
        )
        .unwrap();
        let sum = constant_i().direct_sum(&m2);
        assert_eq!(sum.dim(), 2);
        let v = sum.eval(c(0.3, 1.2)).unwrap();
        assert!((v[(0, 0)] - I).norm() < 1e-15);
        assert!((v[(1, 1)] - cr(2.0) * I).norm() < 1e-15);
        assert!(v[(0, 1)].norm() < 1e-15);

        let s = sqrt_model().direct_sum(&constant_i());
        let lambda = c(1.0, 1.0);
        let v = s.eval(lambda).unwrap();
        let v1 = sqrt_model().eval(lambda).unwrap();
        assert!((v[(0, 0)] - v1[(0, 0)]).norm() < 1e-15);
        assert!((v[(1, 1)] - I).norm() < 1e-15);

        let d = s.derivative(lambda).unwrap();
        let d1 = sqrt_model().derivative(lambda).unwrap();
        assert!((d[(0, 0)] - d1[(0, 0)]).norm() < 1e-15);
        assert!(d[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn direct_sum_merges_identical_poles() {
        let p1 =
            NevanlinnaModel::new("p1", 1, vec![HerglotzTerm::Pole { t: 1.0, g: m1(cr(1.0)) }])
                .unwrap();
        let p2 =
            NevanlinnaModel::new("p2", 1, vec![HerglotzTerm::Pole { t: 1.0, g: m1(cr(2.0)) }])
                .unwrap();
        let sum = p1.direct_sum(&p2);
        assert_eq!(sum.terms().len(), 1);
        assert!(sum.validate().is_empty());
    }

    #[test]
    fn validate_flags_bad_terms() {
        let bad = NevanlinnaModel::new_unchecked(
            "bad",
            1,
            vec![HerglotzTerm::Constant { c: m1(-I) }],
        );
        let violations = bad.validate();
        assert!(violations.iter().any(|v| v.contains("Im C ⪰ 0 fails")));

        let ok = affine();
        assert!(ok.validate().is_empty());

        let bad_pole = NevanlinnaModel::new_unchecked(
            "badpole",
            1,
            vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(-1.0)) }],
        );
        let violations = bad_pole.validate();
        assert!(violations.iter().any(|v| v.contains("G ⪰ 0 fails")));
    }

    #[test]
    fn symmetry_under_conjugation() {
        let model = sqrt_model();
        for &(re, im) in &[(0.5, 1.0), (-2.0, 0.25), (3.0, 4.0)] {
            let upper = model.eval(c(re, im)).unwrap();
            let lower = model.eval(c(re, -im)).unwrap();
            assert!(linalg::fro_norm(&(lower - upper.adjoint())) < 1e-14);
        }
    }
}
