//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! A 15-point Kronrod rule (with embedded 7-point Gauss rule) is applied to
//! a worklist of segments; the segment with the largest error estimate is
//! bisected until the requested tolerance is met. Semi-infinite domains are
//! mapped onto [0, 1) with `x = scale * t / (1 - t)`, where `scale` should be
//! chosen near the decay length of the integrand so the transformed integrand
//! is well conditioned.

use super::NumericsError;

/// Tolerances and work limits for adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of segment bisections before giving up.
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self, NumericsError> {
        if !(rel_tol > 0.0) || !(abs_tol > 0.0) {
            return Err(NumericsError::Domain(format!(
                "quadrature tolerances must be strictly positive (rel {rel_tol}, abs {abs_tol})"
            )));
        }
        Ok(Self { rel_tol, abs_tol, max_subdivisions })
    }

    /// Tolerances used throughout the analytical formulas: two orders tighter
    /// than any acceptance threshold in the test suites.
    pub fn default_analysis() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, max_subdivisions: 400 }
    }

    /// Loosened tolerances for triple integrals.
    pub fn loose_3d() -> Self {
        Self { rel_tol: 1e-6, abs_tol: 1e-9, max_subdivisions: 200 }
    }

    /// A spec whose tolerances are tightened by `factor` (for inner integrals
    /// of nested quadrature).
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol * factor).max(1e-14),
            abs_tol: (self.abs_tol * factor).max(1e-300),
            max_subdivisions: self.max_subdivisions,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::default_analysis()
    }
}

/// Integration domain for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    /// Finite interval `[a, b]`.
    Finite(f64, f64),
    /// `[0, ∞)`, mapped by `x = scale * t / (1 - t)`. `scale` should match
    /// the decay length of the integrand.
    SemiInfinite { scale: f64 },
}

/// Value and error estimate returned by the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

// 15-point Kronrod abscissae/weights with embedded 7-point Gauss rule
// (QUADPACK dqk15 constants, published digits).
#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod pass over `[a, b]`; returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut result_gauss = fc * WG[3];
    let mut result_kronrod = fc * WGK[7];
    let mut result_abs = result_kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[i] = f1;
        fv[14 - i] = f2;
        result_kronrod += WGK[i] * (f1 + f2);
        result_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            result_gauss += WG[i / 2] * (f1 + f2);
        }
    }

    let mean = result_kronrod * 0.5;
    let mut result_asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        result_asc += WGK[i] * ((fv[i] - mean).abs() + (fv[14 - i] - mean).abs());
    }

    let result = result_kronrod * half;
    result_abs *= half.abs();
    result_asc *= half.abs();

    let mut err = ((result_kronrod - result_gauss) * half).abs();
    if result_asc != 0.0 && err != 0.0 {
        err = result_asc * 1.0f64.min((200.0 * err / result_asc).powf(1.5));
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * result_abs);
    }
    (result, err)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError> {
    #[derive(Debug, Clone, Copy)]
    struct Segment {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    }

    let (v0, e0) = gk15(f, a, b);
    let mut segments = vec![Segment { a, b, value: v0, error: e0 }];
    let mut total_value = v0;
    let mut total_error = e0;

    for _ in 0..spec.max_subdivisions {
        let tol = spec.abs_tol.max(spec.rel_tol * total_value.abs());
        if total_error <= tol {
            return Ok(Quadrature { value: total_value, error: total_error });
        }
        // Bisect the segment with the largest error estimate.
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if !(seg.a < mid && mid < seg.b) {
            // Interval exhausted at machine precision; keep it as it is.
            segments.push(seg);
            break;
        }
        let (vl, el) = gk15(f, seg.a, mid);
        let (vr, er) = gk15(f, mid, seg.b);
        total_value += vl + vr - seg.value;
        total_error += el + er - seg.error;
        segments.push(Segment { a: seg.a, b: mid, value: vl, error: el });
        segments.push(Segment { a: mid, b: seg.b, value: vr, error: er });
    }

    let tol = spec.abs_tol.max(spec.rel_tol * total_value.abs());
    if total_error <= tol {
        Ok(Quadrature { value: total_value, error: total_error })
    } else {
        Err(NumericsError::NonConvergence { best: total_value, error: total_error })
    }
}

/// Adaptive integral of `f` over `domain`.
///
/// The reported error is the accumulated Gauss–Kronrod error estimate; it is
/// guaranteed to be at most `max(abs_tol, rel_tol * |value|)` on success.
/// Integrable endpoint singularities are handled by subdivision.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    domain: Domain,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError> {
    match domain {
        Domain::Finite(a, b) => {
            if !a.is_finite() || !b.is_finite() {
                return Err(NumericsError::Domain(format!("non-finite bounds [{a}, {b}]")));
            }
            if a == b {
                return Ok(Quadrature { value: 0.0, error: 0.0 });
            }
            adaptive(&f, a, b, spec)
        }
        Domain::SemiInfinite { scale } => {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(NumericsError::Domain(format!(
                    "semi-infinite scale must be positive and finite, got {scale}"
                )));
            }
            let g = |t: f64| {
                let om = 1.0 - t;
                if om <= 0.0 {
                    return 0.0;
                }
                let x = scale * t / om;
                let jac = scale / (om * om);
                let v = f(x) * jac;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
    }
}

/// Iterated 2-D integral `∫ dx ∫_{lo(x)}^{hi(x)} f(x, y) dy` with the outer
/// variable on `outer`. The inner tolerance is tightened by a factor of 10.
pub fn integrate_2d<F, B>(
    f: F,
    outer: Domain,
    inner_bounds: B,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError>
where
    F: Fn(f64, f64) -> f64,
    B: Fn(f64) -> (f64, f64),
{
    let inner_spec = spec.tightened(0.1);
    integrate(
        |x| {
            let (lo, hi) = inner_bounds(x);
            if !(hi > lo) {
                return 0.0;
            }
            integrate(|y| f(x, y), Domain::Finite(lo, hi), &inner_spec)
                .map(|q| q.value)
                .unwrap_or(f64::NAN)
        },
        outer,
        spec,
    )
}

/// Iterated 3-D integral with finite inner rectangles depending on the outer
/// variables: `∫ dx ∫ dy ∫ f(x, y, z) dz`.
pub fn integrate_3d<F, B1, B2>(
    f: F,
    outer: Domain,
    mid_bounds: B1,
    inner_bounds: B2,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError>
where
    F: Fn(f64, f64, f64) -> f64,
    B1: Fn(f64) -> (f64, f64),
    B2: Fn(f64, f64) -> (f64, f64),
{
    let mid_spec = spec.tightened(0.1);
    let inner_spec = spec.tightened(0.01);
    integrate(
        |x| {
            let (lo, hi) = mid_bounds(x);
            if !(hi > lo) {
                return 0.0;
            }
            integrate(
                |y| {
                    let (zlo, zhi) = inner_bounds(x, y);
                    if !(zhi > zlo) {
                        return 0.0;
                    }
                    integrate(|z| f(x, y, z), Domain::Finite(zlo, zhi), &inner_spec)
                        .map(|q| q.value)
                        .unwrap_or(f64::NAN)
                },
                Domain::Finite(lo, hi),
                &mid_spec,
            )
            .map(|q| q.value)
            .unwrap_or(f64::NAN)
        },
        outer,
        spec,
    )
}
