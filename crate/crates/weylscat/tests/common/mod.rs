//! Shared fixtures and independent oracles for the integration suites.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weylscat::linalg::CMatrix;
use weylscat::nevanlinna::{HerglotzTerm, NevanlinnaModel};
use weylscat::sa_scatter::SelfAdjointParameter;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn m1(z: Complex64) -> CMatrix {
    CMatrix::from_row_slice(1, 1, &[z])
}

// ---------------------------------------------------------------------------
// Eigen-decomposition oracle for the matrix logarithm, independent of the
// integral implementation: Schur form, eigenvectors of the triangular factor
// by back-substitution, scalar logs with arguments in [0, π].
// ---------------------------------------------------------------------------

/// Scalar log on the branch with argument in [0, π] (limit from above on the
/// negative axis). Written out here so the oracle shares no code with the
/// implementation under test.
fn branch_log(z: Complex64) -> Complex64 {
    let mut arg = z.arg();
    if arg < -std::f64::consts::FRAC_PI_2 {
        arg += 2.0 * std::f64::consts::PI;
    } else if arg < 0.0 {
        arg = 0.0;
    }
    c(z.norm().ln(), arg)
}

/// Eigenvectors of an upper-triangular matrix by back-substitution.
fn triangular_eigenvectors(u: &CMatrix) -> CMatrix {
    let n = u.nrows();
    let mut v = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = u[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = cr(1.0);
        for i in (0..k).rev() {
            let mut s = Complex64::default();
            for j in i + 1..=k {
                s += u[(i, j)] * y[j];
            }
            let mut d = u[(i, i)] - lam;
            if d.norm() < 1e-300 {
                d = cr(1e-300);
            }
            y[i] = -s / d;
        }
        let norm = y.norm();
        v.set_column(k, &(y / cr(norm)));
    }
    v
}

fn condition_2norm(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// V·log(Λ)·V⁻¹ from a diagonalization of T, or `None` if the Schur step
/// fails or the eigenvector matrix is ill conditioned (> 1e8).
pub fn eigen_log_oracle(t: &CMatrix) -> Option<CMatrix> {
    let schur = t.clone().try_schur(1e-14, 100_000)?;
    let (q, u) = schur.unpack();
    let v = &q * triangular_eigenvectors(&u);
    if condition_2norm(&v) > 1e8 {
        return None;
    }
    let vinv = v.clone().try_inverse()?;
    let n = t.nrows();
    let logd = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            branch_log(u[(i, i)])
        } else {
            Complex64::default()
        }
    });
    Some(&v * logd * vinv)
}

/// Number of negative eigenvalues of a Hermitian matrix: the independent
/// oracle for the gap value of the spectral shift function.
pub fn negative_eigenvalue_count(h: &CMatrix) -> usize {
    if h.nrows() == 0 {
        return 0;
    }
    let herm = (h + h.adjoint()) * cr(0.5);
    herm.symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&v| v < 0.0)
        .count()
}

// ---------------------------------------------------------------------------
// Fixture models and extension parameters
// ---------------------------------------------------------------------------

pub fn constant_i_model() -> NevanlinnaModel {
    NevanlinnaModel::new("constant-i", 1, vec![HerglotzTerm::Constant { c: m1(I) }]).unwrap()
}

pub fn constant_2i_model() -> NevanlinnaModel {
    NevanlinnaModel::new(
        "constant-2i",
        1,
        vec![HerglotzTerm::Constant { c: m1(cr(2.0) * I) }],
    )
    .unwrap()
}

pub fn affine_model() -> NevanlinnaModel {
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

pub fn pole_model() -> NevanlinnaModel {
    NevanlinnaModel::new("pole", 1, vec![HerglotzTerm::Pole { t: 0.0, g: m1(cr(1.0)) }]).unwrap()
}

pub fn acbox_model() -> NevanlinnaModel {
    NevanlinnaModel::new(
        "acbox",
        1,
        vec![HerglotzTerm::AcBox {
            a: 0.0,
            b: 1.0,
            r: m1(cr(1.0)),
        }],
    )
    .unwrap()
}

pub fn sqrt_model() -> NevanlinnaModel {
    NevanlinnaModel::new("sqrt", 1, vec![HerglotzTerm::Sqrt { g: m1(cr(1.0)) }]).unwrap()
}

/// The six models of the acceptance fixture set.
pub fn fixture_models() -> Vec<NevanlinnaModel> {
    vec![
        constant_i_model(),
        affine_model(),
        pole_model(),
        acbox_model(),
        sqrt_model(),
        sqrt_model().direct_sum(&constant_i_model()),
        acbox_model().direct_sum(&pole_model()),
    ]
}

/// Full Θ, an r < dim subspace Θ (pure relation when dim = 1), and the
/// r = 0 relation, for a model of the given dimension.
pub fn fixture_parameters(dim: usize) -> Vec<SelfAdjointParameter> {
    let mut out = Vec::new();
    let theta_full = if dim == 1 {
        m1(cr(0.7))
    } else {
        let mut h = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            h[(i, i)] = cr(0.3 - 0.5 * i as f64);
        }
        h[(0, 1)] = cr(0.1);
        h[(1, 0)] = cr(0.1);
        h
    };
    out.push(SelfAdjointParameter::full(theta_full).unwrap());
    if dim > 1 {
        // span of (e1 + e2)/√2 padded with zeros
        let mut basis = CMatrix::zeros(dim, 1);
        let w = 1.0 / 2.0_f64.sqrt();
        basis[(0, 0)] = cr(w);
        basis[(1, 0)] = cr(w);
        out.push(SelfAdjointParameter::subspace(basis, m1(cr(0.4))).unwrap());
    }
    out.push(SelfAdjointParameter::relation(dim));
    out
}

/// 64-point grid chosen off the fixtures' exceptional sets.
pub fn default_grid() -> Vec<f64> {
    let (start, stop, count) = (-4.985_f64, 5.005_f64, 64usize);
    let step = (stop - start) / (count as f64 - 1.0);
    (0..count).map(|k| start + step * k as f64).collect()
}

// ---------------------------------------------------------------------------
// Seeded random generators
// ---------------------------------------------------------------------------

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &b * b.adjoint() + CMatrix::identity(n, n) * cr(ridge)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&b + b.adjoint()) * cr(0.5)
}

/// Random model of dimension ≤ 3 built from a PSD ac-box density, a pole and
/// a constant term, as in the acceptance random suite.
pub fn random_model(rng: &mut ChaCha8Rng, label: usize) -> NevanlinnaModel {
    let dim = rng.random_range(1..=3usize);
    random_model_of_dim(rng, dim, label)
}

/// As [`random_model`] with the dimension pinned (coupled systems need two
/// models of equal size).
pub fn random_model_of_dim(rng: &mut ChaCha8Rng, dim: usize, label: usize) -> NevanlinnaModel {
    let a = rng.random_range(-3.0..-0.5);
    let b = a + rng.random_range(0.8..3.0);
    let t = rng.random_range(1.5..4.0);
    let h = random_hermitian(rng, dim);
    let p = random_psd(rng, dim, 0.05);
    let terms = vec![
        HerglotzTerm::AcBox {
            a,
            b,
            r: random_psd(rng, dim, 0.02),
        },
        HerglotzTerm::Pole {
            t,
            g: random_psd(rng, dim, 0.02),
        },
        HerglotzTerm::Constant {
            c: h + p * I,
        },
    ];
    NevanlinnaModel::new(format!("random-{label}"), dim, terms).unwrap()
}

/// Random orthonormal dim x r frame.
pub fn random_frame(rng: &mut ChaCha8Rng, dim: usize, r: usize) -> CMatrix {
    if r == 0 {
        return CMatrix::zeros(dim, 0);
    }
    let m = CMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let q = m.qr().q();
    q.columns(0, r).into_owned()
}

/// Random selfadjoint parameter with operator rank drawn from {0..dim}.
pub fn random_parameter(rng: &mut ChaCha8Rng, dim: usize) -> SelfAdjointParameter {
    let r = rng.random_range(0..=dim);
    if r == 0 {
        SelfAdjointParameter::relation(dim)
    } else if r == dim {
        SelfAdjointParameter::full(random_hermitian(rng, dim)).unwrap()
    } else {
        let basis = random_frame(rng, dim, r);
        SelfAdjointParameter::subspace(basis, random_hermitian(rng, r)).unwrap()
    }
}

/// Ten seeded points in the open upper half plane.
pub fn upper_half_plane_points(seed: u64, count: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| c(rng.random_range(-4.0..4.0), rng.random_range(0.1..3.0)))
        .collect()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    DMatrix::norm(m)
}
