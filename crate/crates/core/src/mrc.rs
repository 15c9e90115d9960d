//! Analytical STP evaluation for the MRC receiver.
//!
//! The exact per-file STP conditions on the serving distance `x` and averages
//! the Gamma(M,1) success probability over the two independent interferer
//! populations (helpers storing the requested file, beyond `x`, and helpers
//! without it, from distance 0). The conditional probability expands into
//! normalized Laplace-transform derivatives `𝓛̃ᵏ` whose Faà di Bruno partition
//! sums are polynomials in `x²` times Gaussians, so the outer integral is
//! evaluated both by adaptive quadrature and in closed form through
//! `∫0^∞ x^{2p+1} e^{-cx²} dx = p!/(2c^{p+1})`; the two routes cross-check
//! each other.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CachingDistribution, NetworkParams, Popularity};
use crate::numerics::{
    self, integrate, Domain, NumericsError, QuadratureSpec, MAX_PARTITION_K,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How an STP value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    UpperBound,
    LowerBound,
    Asymptotic,
    MonteCarlo,
}

impl EstimateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateKind::Exact => "exact",
            EstimateKind::UpperBound => "upper_bound",
            EstimateKind::LowerBound => "lower_bound",
            EstimateKind::Asymptotic => "asymptotic",
            EstimateKind::MonteCarlo => "monte_carlo",
        }
    }
}

/// STP value with provenance: numerical error bound for analytical routes,
/// 95% confidence half-width for Monte Carlo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StpEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub error: f64,
    pub per_file: Option<Vec<f64>>,
}

/// Floating-point headroom reported for closed-form evaluations.
const CLOSED_FORM_ERROR: f64 = 1e-12;

fn check_lengths(t: &CachingDistribution, pop: &Popularity) -> Result<(), AnalysisError> {
    if t.n() != pop.n() {
        return Err(AnalysisError::Domain(format!(
            "caching distribution has {} files but popularity has {}",
            t.n(),
            pop.n()
        )));
    }
    Ok(())
}

/// Normalized Laplace-transform derivative `𝓛̃ᵏ(T, x, y)` of the interference
/// from a thinned helper population of density `λ_h·T` outside distance `y`,
/// at `s = τxᵅ`. `k = 0` returns `𝓛_I(T, x, y)` itself; `y = 0` selects the
/// full-beta branch (interferers from distance 0), `y = x` the branch
/// truncated at the serving distance.
pub fn laplace_terms(
    t: f64,
    x: f64,
    y: f64,
    k: usize,
    params: &NetworkParams,
) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(AnalysisError::Domain(format!("thinning probability {t} outside [0, 1]")));
    }
    if x < 0.0 || y < 0.0 {
        return Err(AnalysisError::Domain(format!("negative distance (x = {x}, y = {y})")));
    }
    if k > MAX_PARTITION_K {
        return Err(AnalysisError::Domain(format!(
            "derivative order {k} exceeds supported maximum {MAX_PARTITION_K}"
        )));
    }
    Ok(ltilde(t, x, y, k, params))
}

/// `𝓛̃ᵏ` without input validation; shared with the PZF expressions.
pub(crate) fn ltilde(t: f64, x: f64, y: f64, k: usize, params: &NetworkParams) -> f64 {
    let a2 = 2.0 / params.alpha;
    let z = lower_limit_z(x, y, params);
    let pre = 2.0 * PI * params.lambda_h * t * params.tau.powf(a2) / params.alpha * x * x;
    let bp0 =
        if z >= 1.0 { 0.0 } else { numerics::comp_inc_beta_unchecked(a2, 1.0 - a2, z) };
    let base = (-pre * bp0).exp();
    if k == 0 {
        return base;
    }
    let gammas: Vec<f64> = (1..=k)
        .map(|j| {
            let b = if z >= 1.0 {
                0.0
            } else {
                numerics::comp_inc_beta_unchecked(a2 + 1.0, j as f64 - a2, z)
            };
            pre * b
        })
        .collect();
    base * partition_sum(k, &gammas)
}

/// Argument of the complementary incomplete beta: `1/(1 + τ(x/y)ᵅ)`, with
/// `y = 0` meaning interferers start from distance 0 (`z = 0`, full beta).
fn lower_limit_z(x: f64, y: f64, params: &NetworkParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let ratio = (x / y).powf(params.alpha);
    1.0 / (1.0 + params.tau * ratio)
}

/// `Σ over partitions of k of k!/(∏ b_j!) ∏ γ_j^{b_j}`.
fn partition_sum(k: usize, gammas: &[f64]) -> f64 {
    let mut sum = 0.0;
    for el in &numerics::partitions_cached(k).elements {
        let mut prod = numerics::factorial(k);
        for (j, &bj) in el.iter().enumerate() {
            if bj > 0 {
                prod *= gammas[j].powi(bj as i32) / numerics::factorial(bj as usize);
            }
        }
        sum += prod;
    }
    sum
}

/// Same partition sum but returning the polynomial coefficients in `w = x²`
/// when each `γ_j` carries one power of `w`: coefficient of `w^d` collects
/// the partitions with `Σ b_j = d`.
fn partition_poly(k: usize, gammas: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; k + 1];
    for el in &numerics::partitions_cached(k).elements {
        let mut prod = numerics::factorial(k);
        let mut degree = 0usize;
        for (j, &bj) in el.iter().enumerate() {
            if bj > 0 {
                prod *= gammas[j].powi(bj as i32) / numerics::factorial(bj as usize);
                degree += bj as usize;
            }
        }
        coeffs[degree] += prod;
    }
    coeffs
}

fn convolve(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Per-file exact STP via the Gaussian-moment closed form.
pub(crate) fn mrc_file_closed(t: f64, params: &NetworkParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let m = params.m;
    let a2 = 2.0 / params.alpha;
    let z_tau = 1.0 / (1.0 + params.tau);
    // Exponent and partition coefficients per unit x².
    let pre_s = 2.0 * PI * params.lambda_h * t * params.tau.powf(a2) / params.alpha;
    let pre_o = 2.0 * PI * params.lambda_h * (1.0 - t) * params.tau.powf(a2) / params.alpha;
    let c_self = pre_s * numerics::comp_inc_beta_unchecked(a2, 1.0 - a2, z_tau);
    let c_other = pre_o * numerics::beta_unchecked(a2, 1.0 - a2);
    let gam_s: Vec<f64> = (1..m)
        .map(|j| pre_s * numerics::comp_inc_beta_unchecked(a2 + 1.0, j as f64 - a2, z_tau))
        .collect();
    let gam_o: Vec<f64> = (1..m)
        .map(|j| pre_o * numerics::beta_unchecked(a2 + 1.0, j as f64 - a2))
        .collect();

    let p_polys: Vec<Vec<f64>> = (0..m).map(|k| partition_poly(k, &gam_s)).collect();
    let q_polys: Vec<Vec<f64>> = (0..m).map(|k| partition_poly(k, &gam_o)).collect();

    // Σ_{md=0}^{M-1} (1/md!) Σ_k C(md,k) P_k(w) Q_{md-k}(w)
    let mut poly = vec![0.0; m];
    for md in 0..m {
        for k in 0..=md {
            let coeff = numerics::binomial(md, k) / numerics::factorial(md);
            // conv(P_k, Q_{md-k}) has degree md ≤ M-1.
            for (d, v) in convolve(&p_polys[k], &q_polys[md - k]).iter().enumerate() {
                poly[d] += coeff * v;
            }
        }
    }

    let c_tot = PI * params.lambda_h * t + c_self + c_other;
    let mut q = 0.0;
    for (p, &coeff) in poly.iter().enumerate() {
        q += coeff * numerics::factorial(p) / c_tot.powi(p as i32 + 1);
    }
    PI * params.lambda_h * t * q
}

/// Conditional STP of a file given serving distance `x` (the integrand of the
/// exact expression, without the serving-distance density).
pub(crate) fn mrc_conditional(t: f64, x: f64, params: &NetworkParams) -> f64 {
    let m = params.m;
    let lt_self: Vec<f64> = (0..m).map(|k| ltilde(t, x, x, k, params)).collect();
    let lt_other: Vec<f64> = (0..m).map(|k| ltilde(1.0 - t, x, 0.0, k, params)).collect();
    let mut acc = 0.0;
    for md in 0..m {
        let mut inner = 0.0;
        for k in 0..=md {
            inner += numerics::binomial(md, k) * lt_self[k] * lt_other[md - k];
        }
        acc += inner / numerics::factorial(md);
    }
    acc
}

/// Per-file exact STP via outer quadrature (substituting `u = πλ_h T x²` so
/// the integrand decays like `e^{-u}`).
pub(crate) fn mrc_file_quad(t: f64, params: &NetworkParams) -> Result<(f64, f64), AnalysisError> {
    if t <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let c = PI * params.lambda_h * t;
    let spec = QuadratureSpec::default_analysis();
    let q = integrate(
        |u: f64| {
            if u > 700.0 {
                return 0.0;
            }
            (-u).exp() * mrc_conditional(t, (u / c).sqrt(), params)
        },
        Domain::SemiInfinite { scale: 1.0 },
        &spec,
    )?;
    Ok((q.value, q.error))
}

/// Exact STP with the MRC receiver, evaluated by both the closed-form
/// Gaussian-moment reduction and outer quadrature; the reported error covers
/// the disagreement between the two routes.
pub fn stp_mrc_exact(
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<StpEstimate, AnalysisError> {
    check_lengths(t, pop)?;
    let mut per_file = Vec::with_capacity(t.n());
    let mut value = 0.0;
    let mut error = 0.0;
    for (&tn, &an) in t.probs().iter().zip(pop.probs()) {
        let closed = mrc_file_closed(tn, params);
        let (quad, quad_err) = mrc_file_quad(tn, params)?;
        per_file.push(closed);
        value += an * closed;
        error += an * ((closed - quad).abs() + quad_err);
    }
    Ok(StpEstimate { value, kind: EstimateKind::Exact, error, per_file: Some(per_file) })
}

/// Closed-form STP for `M = 1`: `q_{1,n} = T_n / (c_{1,1}(1)·T_n + c_{2,1}(1))`.
pub fn stp_mrc_m1(
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<StpEstimate, AnalysisError> {
    if params.m != 1 {
        return Err(AnalysisError::Domain(format!("stp_mrc_m1 requires M = 1, got {}", params.m)));
    }
    check_lengths(t, pop)?;
    let (c1, c2) = c_coeffs(1, 1.0, params)?;
    let per_file: Vec<f64> =
        t.probs().iter().map(|&tn| if tn <= 0.0 { 0.0 } else { tn / (c1 * tn + c2) }).collect();
    let value = per_file.iter().zip(pop.probs()).map(|(q, a)| q * a).sum();
    Ok(StpEstimate {
        value,
        kind: EstimateKind::Exact,
        error: CLOSED_FORM_ERROR,
        per_file: Some(per_file),
    })
}

/// The pair `(c_{1,k}(x), c_{2,k}(x))` of closed-form coefficients.
/// `k = 0` returns `(1, 0)` so the k = 0 bound term equals `T/T = 1`.
pub fn c_coeffs(k: usize, x: f64, params: &NetworkParams) -> Result<(f64, f64), AnalysisError> {
    if k == 0 {
        return Ok((1.0, 0.0));
    }
    if !(x > 0.0) {
        return Err(AnalysisError::Domain(format!("c_coeffs requires x > 0, got {x}")));
    }
    let a2 = 2.0 / params.alpha;
    let kxt = k as f64 * x * params.tau;
    let b_full = numerics::beta_unchecked(a2, 1.0 - a2);
    let bp = numerics::comp_inc_beta_unchecked(a2, 1.0 - a2, 1.0 / (1.0 + kxt));
    let scale = a2 * kxt.powf(a2);
    let c1 = scale * (bp - b_full) + 1.0;
    let c2 = scale * b_full;
    Ok((c1, c2))
}

fn bound_per_file(t: f64, arg: f64, params: &NetworkParams) -> Result<f64, AnalysisError> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let m = params.m;
    let mut acc = 0.0;
    for k in 0..=m {
        let term = if k == 0 {
            1.0
        } else {
            let (c1, c2) = c_coeffs(k, arg, params)?;
            t / (c1 * t + c2)
        };
        let signed = if k % 2 == 0 { term } else { -term };
        acc += numerics::binomial(m, k) * signed;
    }
    Ok(1.0 - acc)
}

/// Closed-form upper and lower bounds on the MRC STP (Alzer bounds on the
/// incomplete gamma function: the upper bound evaluates the c-coefficients at
/// `S_M = Γ(M+1)^{-1/M}`, the lower bound at 1). The two coincide with the
/// exact STP at `M = 1`.
pub fn stp_mrc_bounds(
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<(StpEstimate, StpEstimate), AnalysisError> {
    check_lengths(t, pop)?;
    let s_m = numerics::s_const(params.m as f64)?;
    let mut upper_files = Vec::with_capacity(t.n());
    let mut lower_files = Vec::with_capacity(t.n());
    for &tn in t.probs() {
        upper_files.push(bound_per_file(tn, s_m, params)?);
        lower_files.push(bound_per_file(tn, 1.0, params)?);
    }
    let dot = |files: &[f64]| files.iter().zip(pop.probs()).map(|(q, a)| q * a).sum::<f64>();
    Ok((
        StpEstimate {
            value: dot(&upper_files),
            kind: EstimateKind::UpperBound,
            error: CLOSED_FORM_ERROR,
            per_file: Some(upper_files),
        },
        StpEstimate {
            value: dot(&lower_files),
            kind: EstimateKind::LowerBound,
            error: CLOSED_FORM_ERROR,
            per_file: Some(lower_files),
        },
    ))
}

/// Leading-order outage behavior as `τ → 0`.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticOutage {
    /// `e^mrc`: coefficient of `τ^{2/α}`; infinite when some requested file
    /// has zero storage probability (outage does not vanish).
    pub coefficient: f64,
    /// `2/α`, independent of `M` and `T`.
    pub order_gain: f64,
    /// `τ^{2/α} · coefficient` at the threshold in `params`.
    pub value_at_tau: f64,
}

/// `Σ_{m=M}^∞ B(2/α + 1, m - 2/α)`, summed exactly: writing each beta as its
/// defining integral and exchanging sum and integral collapses the geometric
/// tail, giving `B(2/α, M - 2/α)`.
pub(crate) fn asymptotic_series(m: usize, alpha: f64) -> f64 {
    let a2 = 2.0 / alpha;
    numerics::beta_unchecked(a2, m as f64 - a2)
}

/// Low-threshold outage asymptotics: outage `≈ τ^{2/α} e^{mrc}` with the
/// order gain `2/α`.
pub fn outage_asymptotic(
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<AsymptoticOutage, AnalysisError> {
    check_lengths(t, pop)?;
    let a2 = 2.0 / params.alpha;
    let series = asymptotic_series(params.m, params.alpha);
    let mut storage_sum = 0.0;
    for (&tn, &an) in t.probs().iter().zip(pop.probs()) {
        if tn <= 0.0 {
            if an > 0.0 {
                storage_sum = f64::INFINITY;
                break;
            }
            continue;
        }
        storage_sum += an * (1.0 / tn - 1.0);
    }
    let coefficient = a2 * series * storage_sum;
    Ok(AsymptoticOutage {
        coefficient,
        order_gain: a2,
        value_at_tau: params.tau.powf(a2) * coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(lambda: f64, alpha: f64, tau: f64, m: usize) -> NetworkParams {
        NetworkParams::new(lambda, alpha, tau, m).unwrap()
    }

    fn fig2_t() -> CachingDistribution {
        CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap()
    }

    fn fig2_pop() -> Popularity {
        Popularity::zipf(5, 1.0).unwrap()
    }

    /// Nearest-transmitter Rayleigh coverage with T = 1, M = 1, α = 4:
    /// classical closed form 1/(1 + √τ(π/2 − arctan(1/√τ))).
    fn rayleigh_coverage(tau: f64) -> f64 {
        1.0 / (1.0 + tau.sqrt() * (PI / 2.0 - (1.0 / tau.sqrt()).atan()))
    }

    #[test]
    fn laplace_zero_density_is_one() {
        let p = params(1e-3, 4.0, 1.0, 4);
        for &(x, y) in &[(0.5, 0.5), (3.0, 0.0), (10.0, 2.0)] {
            assert_relative_eq!(laplace_terms(0.0, x, y, 0, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn laplace_k0_matches_paper_formula() {
        let p = params(1e-3, 4.0, 2.0, 2);
        let x = 7.0;
        let a2 = 0.5;
        let expected = (-(2.0 * PI * p.lambda_h * p.tau.powf(a2) * x * x / p.alpha)
            * numerics::comp_inc_beta(a2, 1.0 - a2, 1.0 / (1.0 + p.tau)).unwrap())
        .exp();
        assert_relative_eq!(
            laplace_terms(1.0, x, x, 0, &p).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    /// Laplace transform of the interference from density λT beyond y, as a
    /// function of s (test-side formula for the finite-difference oracle).
    fn laplace_of_s(t: f64, y: f64, s: f64, p: &NetworkParams) -> f64 {
        let a2 = 2.0 / p.alpha;
        let z = 1.0 / (1.0 + s * y.powf(-p.alpha));
        (-(2.0 * PI * p.lambda_h * t / p.alpha)
            * s.powf(a2)
            * numerics::comp_inc_beta(a2, 1.0 - a2, z).unwrap())
        .exp()
    }

    #[test]
    fn laplace_derivatives_match_finite_differences() {
        let p = params(1e-3, 4.0, 0.8, 4);
        for &(t, x, y) in &[(0.6f64, 9.0f64, 9.0f64), (0.3, 14.0, 6.0), (0.9, 21.0, 10.0)] {
            let s = p.tau * x.powf(p.alpha);
            // k = 1: 𝓛̃¹ = -s·𝓛'(s)
            let h = s * 1e-5;
            let d1 = (laplace_of_s(t, y, s + h, &p) - laplace_of_s(t, y, s - h, &p)) / (2.0 * h);
            let lt1 = laplace_terms(t, x, y, 1, &p).unwrap();
            assert_relative_eq!(lt1, -s * d1, max_relative = 1e-5);

            // k = 2: 𝓛̃² = s²·𝓛''(s)
            let h2 = s * 3e-4;
            let d2 = (laplace_of_s(t, y, s + h2, &p) - 2.0 * laplace_of_s(t, y, s, &p)
                + laplace_of_s(t, y, s - h2, &p))
                / (h2 * h2);
            let lt2 = laplace_terms(t, x, y, 2, &p).unwrap();
            assert_relative_eq!(lt2, s * s * d2, max_relative = 1e-4);
        }
    }

    #[test]
    fn c_coeffs_k0_is_unit_pair() {
        let p = params(1e-3, 4.0, 1.0, 2);
        assert_eq!(c_coeffs(0, 1.0, &p).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn c_coeffs_half_beta() {
        // k = 1, x = 1, α = 4, τ = 1: c2 = (1/2)·B(1/2, 1/2) = π/2.
        let p = params(1e-3, 4.0, 1.0, 2);
        let (_, c2) = c_coeffs(1, 1.0, &p).unwrap();
        assert_relative_eq!(c2, PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn c_coeffs_sum_matches_quadrature_identity() {
        // c1 + c2 = 1 + (2/α)(kxτ)^{2/α} B'(2/α, 1-2/α, 1/(1+kxτ)), with the
        // complementary incomplete beta obtained from its defining integral.
        let p = params(1e-3, 3.4, 2.3, 3);
        let a2 = 2.0 / p.alpha;
        for k in 1..=3usize {
            for &x in &[0.7, 1.0, 1.3] {
                let (c1, c2) = c_coeffs(k, x, &p).unwrap();
                let kxt = k as f64 * x * p.tau;
                let z = 1.0 / (1.0 + kxt);
                // B'(a2, 1-a2, z) via its defining integral, substituting
                // v = (1-u)^{1-a2} to remove the endpoint singularity at u = 1.
                let b = 1.0 - a2;
                let bp = integrate(
                    |v: f64| (1.0 - v.powf(1.0 / b)).powf(a2 - 1.0) / b,
                    Domain::Finite(0.0, (1.0 - z).powf(b)),
                    &QuadratureSpec::default_analysis(),
                )
                .unwrap()
                .value;
                let expected = 1.0 + a2 * kxt.powf(a2) * bp;
                assert_relative_eq!(c1 + c2, expected, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn m1_exact_matches_single_antenna_closed_form() {
        let p = params(1e-3, 4.0, 1.0, 1);
        let t = fig2_t();
        let pop = fig2_pop();
        let exact = stp_mrc_exact(&t, &pop, &p).unwrap();
        let m1 = stp_mrc_m1(&t, &pop, &p).unwrap();
        assert_relative_eq!(exact.value, m1.value, max_relative = 1e-9);
        for (a, b) in exact.per_file.unwrap().iter().zip(m1.per_file.unwrap().iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn m1_full_storage_matches_rayleigh_coverage() {
        for &tau in &[0.1, 1.0, 10.0] {
            let p = params(1e-3, 4.0, tau, 1);
            assert_relative_eq!(mrc_file_closed(1.0, &p), rayleigh_coverage(tau), max_relative = 1e-9);
        }
    }

    #[test]
    fn dual_paths_agree() {
        for &m in &[1usize, 2, 3, 5] {
            for &tau in &[0.1, 1.0, 10.0] {
                let p = params(1e-3, 4.0, tau, m);
                for &t in &[0.2, 0.5, 1.0] {
                    let closed = mrc_file_closed(t, &p);
                    let (quad, _) = mrc_file_quad(t, &p).unwrap();
                    assert_relative_eq!(closed, quad, max_relative = 1e-7);
                }
            }
        }
    }

    #[test]
    fn exact_increases_with_antennas() {
        let t = fig2_t();
        let pop = fig2_pop();
        let mut prev = 0.0;
        for m in 1..=5 {
            let p = params(1e-3, 4.0, 1.0, m);
            let q = stp_mrc_exact(&t, &pop, &p).unwrap().value;
            assert!(q > prev, "STP not increasing at M = {m}");
            prev = q;
        }
    }

    #[test]
    fn per_file_increasing_in_storage() {
        let p = params(1e-3, 4.0, 1.0, 3);
        let mut prev = 0.0;
        for i in 1..=20 {
            let t = i as f64 / 20.0;
            let q = mrc_file_closed(t, &p);
            assert!(q > prev, "per-file STP not increasing at T = {t}");
            prev = q;
        }
    }

    #[test]
    fn bounds_coincide_at_m1_and_sandwich_elsewhere() {
        let t = fig2_t();
        let pop = fig2_pop();
        let p1 = params(1e-3, 4.0, 1.0, 1);
        let (u, l) = stp_mrc_bounds(&t, &pop, &p1).unwrap();
        let exact = stp_mrc_exact(&t, &pop, &p1).unwrap();
        assert_relative_eq!(u.value, exact.value, max_relative = 1e-9);
        assert_relative_eq!(l.value, exact.value, max_relative = 1e-9);

        for &m in &[2usize, 3, 4] {
            for i in 0..20 {
                let tau = 0.1 * (10.0f64 / 0.1).powf(i as f64 / 19.0);
                let p = params(1e-3, 4.0, tau, m);
                let (u, l) = stp_mrc_bounds(&t, &pop, &p).unwrap();
                let exact = stp_mrc_exact(&t, &pop, &p).unwrap();
                assert!(
                    l.value <= exact.value + 1e-9 && exact.value <= u.value + 1e-9,
                    "sandwich violated at M = {m}, τ = {tau}: {} / {} / {}",
                    l.value,
                    exact.value,
                    u.value
                );
            }
        }
    }

    #[test]
    fn bounds_vanish_with_storage() {
        let p = params(1e-3, 4.0, 1.0, 3);
        let u = bound_per_file(1e-8, numerics::s_const(3.0).unwrap(), &p).unwrap();
        let l = bound_per_file(1e-8, 1.0, &p).unwrap();
        assert!(u.abs() <= 1e-6 && l.abs() <= 1e-6);
        assert_eq!(bound_per_file(0.0, 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn asymptotic_series_matches_partial_sums() {
        // Independent route: direct partial sum of B(2/α+1, m-2/α) with the
        // integral tail bound Σ_{m>M₀} Γ(2/α+1)m^{-1-2/α} ≤ Γ(2/α+1) M₀^{-2/α}/(2/α).
        use statrs::function::gamma::gamma;
        for &(m, alpha) in &[(1usize, 4.0), (2, 4.0), (4, 3.0), (3, 5.0)] {
            let a2 = 2.0 / alpha;
            let closed = asymptotic_series(m, alpha);
            let cutoff = 2_000_000usize;
            let mut partial = 0.0;
            for i in m..cutoff {
                partial += numerics::beta(a2 + 1.0, i as f64 - a2).unwrap();
            }
            let tail_bound = gamma(a2 + 1.0) * (cutoff as f64).powf(-a2) / a2;
            assert!(partial <= closed && closed <= partial + 2.0 * tail_bound,
                "closed form {closed} vs partial {partial} (+tail ≤ {tail_bound}) at M={m}, α={alpha}");
        }
    }

    #[test]
    fn asymptotic_fully_stored_files_contribute_nothing() {
        // Files with T_n = 1 drop out of the coefficient ((1/T - 1) = 0); a
        // requested file with T_n = 0 makes it infinite.
        let pop = Popularity::zipf(4, 1.0).unwrap();
        let p = params(1e-3, 4.0, 1e-3, 2);
        let t = CachingDistribution::new(vec![1.0, 0.75, 0.75, 0.5], 3).unwrap();
        let out = outage_asymptotic(&t, &pop, &p).unwrap();
        let a = pop.probs();
        let manual = 0.5
            * asymptotic_series(2, 4.0)
            * (a[1] * (1.0 / 0.75 - 1.0) + a[2] * (1.0 / 0.75 - 1.0) + a[3] * (1.0 / 0.5 - 1.0));
        assert_relative_eq!(out.coefficient, manual, max_relative = 1e-12);

        let t_zero = CachingDistribution::new(vec![1.0, 1.0, 1.0, 0.0], 3).unwrap();
        let out = outage_asymptotic(&t_zero, &pop, &p).unwrap();
        assert!(out.coefficient.is_infinite());
    }

    #[test]
    fn asymptotic_order_gain_and_antenna_decrement() {
        let t = fig2_t();
        let pop = fig2_pop();
        let p2 = params(1e-3, 4.0, 1e-3, 2);
        let p3 = params(1e-3, 4.0, 1e-3, 3);
        let o2 = outage_asymptotic(&t, &pop, &p2).unwrap();
        let o3 = outage_asymptotic(&t, &pop, &p3).unwrap();
        assert_relative_eq!(o2.order_gain, 0.5);
        assert_relative_eq!(o3.order_gain, 0.5);
        // Coefficient decrement from M to M+1 equals (2/α)B(2/α+1, M-2/α)Σ a_n(1/T_n - 1).
        let a2 = 0.5;
        let storage_sum: f64 = t
            .probs()
            .iter()
            .zip(pop.probs())
            .map(|(&tn, &an)| an * (1.0 / tn - 1.0))
            .sum();
        let expected = a2 * numerics::beta(a2 + 1.0, 2.0 - a2).unwrap() * storage_sum;
        assert_relative_eq!(o2.coefficient - o3.coefficient, expected, max_relative = 1e-10);
        assert!(expected > 0.0);
    }

    #[test]
    fn asymptotic_ratio_approaches_one() {
        let t = fig2_t();
        let pop = fig2_pop();
        let mut prev_gap = f64::INFINITY;
        for &tau in &[1e-2, 1e-3, 1e-4] {
            let p = params(1e-3, 4.0, tau, 2);
            let outage = 1.0 - stp_mrc_exact(&t, &pop, &p).unwrap().value;
            let asym = outage_asymptotic(&t, &pop, &p).unwrap().value_at_tau;
            let ratio = outage / asym;
            let gap = (ratio - 1.0).abs();
            assert!(gap < prev_gap, "ratio not converging at τ = {tau}: {ratio}");
            prev_gap = gap;
            if tau <= 1e-4 {
                assert!(gap < 0.1, "ratio {ratio} off by more than 10% at τ = {tau}");
            }
        }
    }
}
