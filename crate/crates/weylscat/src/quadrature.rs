//! Adaptive Gauss-Kronrod (G7K15) quadrature for the two integral types used
//! in this crate: half-line matrix-log integrals and spectral-shift trace
//! kernels over the real line.

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Kronrod abscissae for the interval [-1, 1] (QUADPACK DQK15).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// 15-point Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub const MAX_SUBDIVISIONS: usize = 2000;

/// Result bundle of an adaptive integration.
#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Integrand points that had to be replaced by neighbour averages.
    pub skipped_points: Vec<f64>,
}

/// Values a panel rule can accumulate: complex scalars and complex matrices.
pub(crate) trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

impl QuadValue for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * Complex64::new(w, 0.0);
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, s: f64) -> Self {
        self * Complex64::new(s, 0.0)
    }
    fn norm(&self) -> f64 {
        nalgebra::Matrix::norm(self)
    }
}

/// QUADPACK-style error rescaling: sharpens the raw |K - G| difference using
/// the spread of the integrand over the panel.
fn rescale_error(raw: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = raw.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

/// One G7K15 panel on [a, b].
fn panel_rule<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64) -> Panel<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_kronrod = f_center.zero_like();
    res_kronrod.add_scaled(&f_center, WGK[7]);
    let mut res_gauss = f_center.zero_like();
    res_gauss.add_scaled(&f_center, WG[3]);
    let mut res_abs = WGK[7] * f_center.norm();

    let mut samples: Vec<(f64, V)> = Vec::with_capacity(15);
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let mut pair = f1.clone();
        pair.add_scaled(&f2, 1.0);
        res_kronrod.add_scaled(&pair, WGK[j]);
        if j % 2 == 1 {
            res_gauss.add_scaled(&pair, WG[j / 2]);
        }
        res_abs += WGK[j] * (f1.norm() + f2.norm());
        samples.push((WGK[j], f1));
        samples.push((WGK[j], f2));
    }
    samples.push((WGK[7], f_center));

    let mean = res_kronrod.scale(0.5);
    let mut res_asc = 0.0;
    for (w, v) in &samples {
        res_asc += w * v.sub(&mean).norm();
    }

    let value = res_kronrod.scale(half);
    let raw = res_kronrod.sub(&res_gauss).norm() * half;
    let error = rescale_error(raw, res_abs * half, res_asc * half);
    Panel { a, b, value, error }
}

struct Adaptive<V> {
    value: V,
    error: f64,
    evaluations: usize,
    converged: bool,
}

/// Worst-panel-first adaptive refinement with a deterministic tie-break
/// (leftmost panel wins), so identical inputs subdivide identically.
fn adaptive<V: QuadValue>(
    f: &mut impl FnMut(f64) -> V,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Adaptive<V> {
    let mut panels = vec![panel_rule(f, a, b)];
    let mut evaluations = 15usize;
    let mut subdivisions = 0usize;

    loop {
        let mut total = panels[0].value.zero_like();
        for p in &panels {
            total.add_scaled(&p.value, 1.0);
        }
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        let target = abs_tol.max(rel_tol * total.norm());
        if total_err <= target {
            return Adaptive {
                value: total,
                error: total_err,
                evaluations,
                converged: true,
            };
        }
        if subdivisions >= MAX_SUBDIVISIONS {
            return Adaptive {
                value: total,
                error: total_err,
                evaluations,
                converged: false,
            };
        }
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Panel is at floating-point resolution; error cannot shrink.
            let mut total = panels[0].value.zero_like();
            for p in &panels {
                total.add_scaled(&p.value, 1.0);
            }
            return Adaptive {
                value: total,
                error: total_err,
                evaluations,
                converged: total_err <= target,
            };
        }
        let left = panel_rule(f, a, mid);
        let right = panel_rule(f, mid, b);
        evaluations += 30;
        panels[worst] = left;
        panels.insert(worst + 1, right);
        subdivisions += 1;
    }
}

/// ∫₀^∞ f(t) dt for a complex integrand with an O(t⁻²) tail, computed on
/// (0,1) after the substitution t = u/(1-u).
pub fn integrate_halfline(
    mut f: impl FnMut(f64) -> Complex64,
    tol: f64,
) -> Result<QuadratureResult> {
    let mut g = |u: f64| {
        let w = 1.0 - u;
        f(u / w) / (w * w)
    };
    let out = adaptive(&mut g, 0.0, 1.0, tol, tol);
    if !out.converged {
        return Err(Error::Quadrature(format!(
            "half-line integral did not reach tol {tol:.1e} after {MAX_SUBDIVISIONS} subdivisions \
             (estimate {:.1e})",
            out.error
        )));
    }
    Ok(QuadratureResult {
        value: out.value,
        abs_error_estimate: out.error,
        evaluations: out.evaluations,
        converged: true,
        skipped_points: Vec::new(),
    })
}

/// Matrix-valued half-line integral with the same transform; shared by the
/// integral matrix logarithm.
pub(crate) fn integrate_halfline_matrix(
    mut f: impl FnMut(f64) -> CMatrix,
    tol: f64,
) -> Result<(CMatrix, f64, usize)> {
    let mut g = |u: f64| {
        let w = 1.0 - u;
        f(u / w).scale(1.0 / (w * w))
    };
    let out = adaptive(&mut g, 0.0, 1.0, tol, tol);
    if !out.converged {
        return Err(Error::Quadrature(format!(
            "matrix half-line integral did not reach tol {tol:.1e} after {MAX_SUBDIVISIONS} \
             subdivisions (estimate {:.1e})",
            out.error
        )));
    }
    Ok((out.value, out.error, out.evaluations))
}

const MAX_SKIPPED_POINTS: usize = 16;

/// -∫_ℝ ssf(t)/(t-z)² dt for a bounded spectral shift function.
///
/// `ssf` returns `None` at points where it is undefined (exceptional or
/// singular λ); such nodes are replaced by the average of the neighbouring
/// valid evaluations inside the panel and recorded in `skipped_points`.
/// `ssf_bound` is the uniform bound on |ssf| used to truncate the tails.
///
/// The truncated integral over [-T, T] is computed in the compressed
/// variable t = Re z + s·u/(1-u²): panel nodes then sample every length
/// scale around Re z, so O(1)-wide features (spectral steps) cannot hide in
/// the unsampled edge slivers of multi-decade panels.
pub fn integrate_ssf_kernel(
    mut ssf: impl FnMut(f64) -> Option<f64>,
    ssf_bound: f64,
    z: Complex64,
    tol: f64,
) -> Result<QuadratureResult> {
    if z.im == 0.0 {
        return Err(Error::Domain(
            "ssf kernel integral needs Im z != 0".to_string(),
        ));
    }
    if !(ssf_bound >= 0.0) || !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(
            "ssf kernel integral needs a nonnegative bound and positive tol".to_string(),
        ));
    }

    // Truncation radius: grow until the tail bound drops below tol/2.
    let x = z.re.abs();
    let mut t_max = 16.0_f64.max(4.0 * (1.0 + x + z.im.abs()));
    let tail_bound = |t: f64| {
        if ssf_bound == 0.0 {
            0.0
        } else {
            ssf_bound * (2.0 / t).max(1.0 / (t - x) + 1.0 / (t + x))
        }
    };
    while tail_bound(t_max) > 0.5 * tol {
        t_max *= 2.0;
        if !t_max.is_finite() {
            return Err(Error::Quadrature(
                "tail truncation radius overflow".to_string(),
            ));
        }
    }
    let tail = tail_bound(t_max);

    let center = z.re;
    let scale = 1.0 + z.im.abs();
    // u-coordinate of a signed offset d = t - center: the positive root of
    // d·u² + s·u - d = 0 for d > 0, mirrored for d < 0.
    let u_of_offset = |d: f64| -> f64 {
        if d == 0.0 {
            0.0
        } else {
            let a = d.abs();
            let u = (-scale + (scale * scale + 4.0 * a * a).sqrt()) / (2.0 * a);
            u.copysign(d)
        }
    };
    let u_hi = u_of_offset(t_max - center);
    let u_lo = u_of_offset(-t_max - center);

    let mut skipped: Vec<f64> = Vec::new();
    let mut too_many_skips = false;

    let mut eval_ssf = |t: f64, skipped: &mut Vec<f64>, too_many: &mut bool| -> f64 {
        match ssf(t) {
            Some(v) => v,
            None => {
                if !skipped.iter().any(|s| s.to_bits() == t.to_bits()) {
                    skipped.push(t);
                    if skipped.len() > MAX_SKIPPED_POINTS {
                        *too_many = true;
                    }
                }
                f64::NAN
            }
        }
    };

    // Failed nodes borrow the average of the nearest valid evaluations seen
    // in the current sweep window.
    let mut recent: Vec<(f64, f64)> = Vec::new();
    let mut g = |u: f64| -> Complex64 {
        let onemu2 = (1.0 - u) * (1.0 + u);
        let t = center + scale * u / onemu2;
        let jacobian = scale * (1.0 + u * u) / (onemu2 * onemu2);
        let mut v = eval_ssf(t, &mut skipped, &mut too_many_skips);
        if v.is_nan() {
            let mut lower: Option<(f64, f64)> = None;
            let mut upper: Option<(f64, f64)> = None;
            for &(tt, vv) in &recent {
                if tt <= t && lower.is_none_or(|(lt, _)| tt > lt) {
                    lower = Some((tt, vv));
                }
                if tt >= t && upper.is_none_or(|(ut, _)| tt < ut) {
                    upper = Some((tt, vv));
                }
            }
            v = match (lower, upper) {
                (Some((_, lv)), Some((_, uv))) => 0.5 * (lv + uv),
                (Some((_, lv)), None) => lv,
                (None, Some((_, uv))) => uv,
                (None, None) => 0.0,
            };
        } else {
            recent.push((t, v));
            if recent.len() > 64 {
                recent.remove(0);
            }
        }
        let d = Complex64::new(t, 0.0) - z;
        Complex64::new(v * jacobian, 0.0) / (d * d)
    };

    let out = adaptive(&mut g, u_lo, u_hi, 0.5 * tol, 0.0);
    if too_many_skips {
        return Err(Error::Quadrature(format!(
            "more than {MAX_SKIPPED_POINTS} undefined ssf points inside [{:-.3e}, {:.3e}]",
            -t_max, t_max
        )));
    }
    if !out.converged {
        return Err(Error::Quadrature(format!(
            "ssf kernel integral did not reach tol {tol:.1e} after {MAX_SUBDIVISIONS} \
             subdivisions (estimate {:.1e})",
            out.error
        )));
    }
    skipped.sort_by(f64::total_cmp);
    Ok(QuadratureResult {
        value: -out.value,
        abs_error_estimate: out.error + tail,
        evaluations: out.evaluations,
        converged: out.error + tail <= tol,
        skipped_points: skipped,
    })
}
