//! Analytical STP evaluation for the PZF receiver.
//!
//! With `K_n` of the `M` DoF boosting the signal, the `M - K_n` nearest
//! interfering helpers are canceled. The exact STP conditions on the serving
//! helper's rank: either it lies beyond the canceled set (joint density `g`
//! over serving distance and the last canceled non-storing helper) or it is
//! the m-th nearest helper overall (joint order-distance density `f`), with
//! residual interference handled by the same Laplace-derivative sums as the
//! MRC analysis.
//!
//! The upper bound replaces the Gamma(K,1) tail by its Alzer exponential
//! bound, which decouples the caching distribution from the physical-layer
//! terms `R_{M,K,m}`; those are cached in an [`RTable`] that is independent
//! of `T` and reused across optimizer iterations.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::model::{CachingDistribution, DofAllocation, NetworkParams, Popularity};
use crate::mrc::{self, AnalysisError, EstimateKind, StpEstimate};
use crate::numerics::{self, integrate, Domain, QuadratureSpec};

/// Pdf of the distance of the j-th nearest point of a homogeneous PPP with
/// density `lambda`, evaluated in log space to avoid overflow at large j.
pub(crate) fn order_distance_pdf(j: usize, x: f64, lambda: f64) -> f64 {
    if x <= 0.0 || lambda <= 0.0 {
        return 0.0;
    }
    let jf = j as f64;
    let ln = (2.0f64).ln() + jf * (PI * lambda).ln() + (2.0 * jf - 1.0) * x.ln()
        - ln_gamma(jf)
        - PI * lambda * x * x;
    ln.exp()
}

/// Joint pdf of the distances of the i-th and j-th nearest points (`j > i`)
/// of a homogeneous PPP, supported on `0 < x < y`.
pub fn joint_pdf_f(
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    lambda: f64,
) -> Result<f64, AnalysisError> {
    if i < 1 || j <= i {
        return Err(AnalysisError::Domain(format!("joint_pdf_f requires j > i >= 1, got ({i}, {j})")));
    }
    if !(lambda > 0.0) {
        return Err(AnalysisError::Domain(format!("density must be positive, got {lambda}")));
    }
    if x < 0.0 || y < 0.0 {
        return Err(AnalysisError::Domain(format!("negative distance (x = {x}, y = {y})")));
    }
    Ok(joint_pdf_f_unchecked(i, j, x, y, lambda))
}

fn joint_pdf_f_unchecked(i: usize, j: usize, x: f64, y: f64, lambda: f64) -> f64 {
    if x >= y || x <= 0.0 {
        return 0.0;
    }
    let (fi, fj) = (i as f64, j as f64);
    let mut ln = (4.0f64).ln() + fj * (PI * lambda).ln() + (2.0 * fi - 1.0) * x.ln() + y.ln()
        - ln_gamma(fi)
        - ln_gamma(fj - fi)
        - PI * lambda * y * y;
    if j - i - 1 > 0 {
        ln += (fj - fi - 1.0) * (y * y - x * x).ln();
    }
    ln.exp()
}

/// Conditional joint pdf of the serving distance `x` and the j-th nearest
/// non-storing helper distance `y`, given that the serving helper lies beyond
/// the `j` nearest helpers; supported on `0 < y < x`.
pub fn joint_pdf_g(
    t: f64,
    x: f64,
    y: f64,
    j: usize,
    lambda: f64,
) -> Result<f64, AnalysisError> {
    if j < 1 {
        return Err(AnalysisError::Domain(format!("joint_pdf_g requires j >= 1, got {j}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(AnalysisError::Domain(format!(
            "joint_pdf_g requires 0 < T < 1 (T = 1 leaves no non-storing helpers), got {t}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(AnalysisError::Domain(format!("density must be positive, got {lambda}")));
    }
    if !(y > 0.0 && y < x) {
        return Err(AnalysisError::Domain(format!(
            "joint_pdf_g requires 0 < y < x, got (x = {x}, y = {y})"
        )));
    }
    let jf = j as f64;
    let ln = (4.0f64).ln() + (jf + 1.0) * (PI * lambda).ln() + t.ln() + x.ln()
        + (2.0 * jf - 1.0) * y.ln()
        - ln_gamma(jf)
        - PI * lambda * t * x * x
        - PI * lambda * (1.0 - t) * y * y;
    Ok(ln.exp())
}

/// `[𝓛̃⁰, …, 𝓛̃^kmax](T, x, y)`.
fn ltilde_all(t: f64, x: f64, y: f64, kmax: usize, params: &NetworkParams) -> Vec<f64> {
    (0..=kmax).map(|k| mrc::ltilde(t, x, y, k, params)).collect()
}

fn check_dof(k: &DofAllocation, params: &NetworkParams) -> Result<(), AnalysisError> {
    if let Some(&bad) = k.per_file().iter().find(|&&v| v < 1 || v > params.m) {
        return Err(AnalysisError::Domain(format!(
            "DoF value {bad} outside {{1, …, {}}}",
            params.m
        )));
    }
    Ok(())
}

/// Exact per-file PZF STP for `K_n < M`.
fn pzf_file_exact(
    k_n: usize,
    t: f64,
    params: &NetworkParams,
) -> Result<(f64, f64), AnalysisError> {
    debug_assert!(k_n >= 1 && k_n < params.m);
    if t <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let m = params.m;
    let j = m - k_n; // canceled helpers
    let lam = params.lambda_h;
    let outer_spec = QuadratureSpec { rel_tol: 1e-6, abs_tol: 1e-9, max_subdivisions: 300 };
    let inner_spec = outer_spec.tightened(0.1);

    let mut value = 0.0;
    let mut error = 0.0;

    // Serving helper beyond the canceled set: all of the j nearest helpers
    // are non-storing, the serving storing helper is at x > y = d_j of the
    // non-storing population. Residual interference: storing helpers beyond
    // x, non-storing helpers beyond y.
    if t < 1.0 {
        let scale_x = ((1.0 / t + 2.0 * j as f64 / (1.0 - t)) / (PI * lam)).sqrt();
        let q = integrate(
            |x: f64| {
                if x <= 0.0 {
                    return 0.0;
                }
                let h1 = 2.0 * PI * lam * t * x * (-PI * lam * t * x * x).exp();
                if h1 == 0.0 {
                    return 0.0;
                }
                let lt_self = ltilde_all(t, x, x, k_n - 1, params);
                let inner = integrate(
                    |y: f64| {
                        let hj = order_distance_pdf(j, y, lam * (1.0 - t));
                        if hj == 0.0 {
                            return 0.0;
                        }
                        let lt_other = ltilde_all(1.0 - t, x, y, k_n - 1, params);
                        let mut s = 0.0;
                        for md in 0..k_n {
                            let mut acc = 0.0;
                            for kk in 0..=md {
                                acc += numerics::binomial(md, kk)
                                    * lt_self[kk]
                                    * lt_other[md - kk];
                            }
                            s += acc / numerics::factorial(md);
                        }
                        hj * s
                    },
                    Domain::Finite(0.0, x),
                    &inner_spec,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN);
                h1 * inner
            },
            Domain::SemiInfinite { scale: scale_x },
            &outer_spec,
        )?;
        value += q.value;
        error += q.error;
    }

    // Serving helper is the mm-th nearest overall (mm ≤ M - K_n): the
    // canceled set is {1, …, M-K_n+1} \ {mm}, so residual interference is the
    // full population beyond y = d_{M-K_n+1}.
    for mm in 1..=j {
        let weight = t * (1.0 - t).powi(mm as i32 - 1);
        if weight == 0.0 {
            continue;
        }
        let scale_y = (2.0 * (j + 1) as f64 / (PI * lam)).sqrt();
        let q = integrate(
            |y: f64| {
                if y <= 0.0 {
                    return 0.0;
                }
                integrate(
                    |x: f64| {
                        let f = joint_pdf_f_unchecked(mm, j + 1, x, y, lam);
                        if f == 0.0 {
                            return 0.0;
                        }
                        let lt = ltilde_all(1.0, x, y, k_n - 1, params);
                        let s: f64 = lt
                            .iter()
                            .enumerate()
                            .map(|(kk, v)| v / numerics::factorial(kk))
                            .sum();
                        f * s
                    },
                    Domain::Finite(0.0, y),
                    &inner_spec,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
            },
            Domain::SemiInfinite { scale: scale_y },
            &outer_spec,
        )?;
        value += weight * q.value;
        error += weight * q.error;
    }

    Ok((value, error))
}

/// Exact STP with the PZF receiver parameterized by the DoF allocation.
/// Files with `K_n = M` delegate to the MRC expression (the PZF receiver
/// reduces to MRC when nothing is canceled).
pub fn stp_pzf_exact(
    k: &DofAllocation,
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<StpEstimate, AnalysisError> {
    if k.n() != t.n() || t.n() != pop.n() {
        return Err(AnalysisError::Domain(format!(
            "length mismatch: K has {}, T has {}, popularity has {}",
            k.n(),
            t.n(),
            pop.n()
        )));
    }
    check_dof(k, params)?;
    let mut per_file = Vec::with_capacity(t.n());
    let mut value = 0.0;
    let mut error = 0.0;
    for ((&kn, &tn), &an) in k.per_file().iter().zip(t.probs()).zip(pop.probs()) {
        let (v, e) = if kn == params.m {
            let closed = mrc::mrc_file_closed(tn, params);
            let (quad, qerr) = mrc::mrc_file_quad(tn, params)?;
            (closed, (closed - quad).abs() + qerr)
        } else {
            pzf_file_exact(kn, tn, params)?
        };
        per_file.push(v);
        value += an * v;
        error += an * e;
    }
    Ok(StpEstimate { value, kind: EstimateKind::Exact, error, per_file: Some(per_file) })
}

/// Conditional-success upper bounds `R_{M,K,m}` for all `K ∈ {1..M}`,
/// `m ∈ {1..M-K+L}`, cached independently of the caching distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RTable {
    lambda_h: f64,
    alpha: f64,
    tau: f64,
    m: usize,
    l: usize,
    /// `values[k-1][m-1] = R_{M,k,m}`.
    values: Vec<Vec<f64>>,
}

impl RTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// `R_{M,K,m}` (both indices 1-based).
    pub fn value(&self, k: usize, m: usize) -> f64 {
        self.values[k - 1][m - 1]
    }

    /// Whether this table was computed for the given parameters and L.
    pub fn matches(&self, params: &NetworkParams, l: usize) -> bool {
        self.lambda_h == params.lambda_h
            && self.alpha == params.alpha
            && self.tau == params.tau
            && self.m == params.m
            && self.l == l
    }

    /// Per-file upper bound `q^{pzf,u}(K, T)`: a polynomial in `T` evaluated
    /// from the cached conditional bounds.
    pub fn per_file_upper(&self, k: usize, t: f64) -> f64 {
        let jmax = self.m - k + self.l - 1;
        let mut q = 0.0;
        let mut pw = 1.0; // (1-t)^{mm-1}
        for mm in 1..=jmax {
            q += t * pw * self.value(k, mm);
            pw *= 1.0 - t;
        }
        q + pw * self.value(k, jmax + 1)
    }

    /// Derivative of [`Self::per_file_upper`] in `T`:
    /// `Σ_m m (1-T)^{m-1} (R_m - R_{m+1})`, positive and non-increasing in `T`.
    pub fn per_file_upper_derivative(&self, k: usize, t: f64) -> f64 {
        let jmax = self.m - k + self.l - 1;
        let mut d = 0.0;
        let mut pw = 1.0; // (1-t)^{mm-1}
        for mm in 1..=jmax {
            d += mm as f64 * pw * (self.value(k, mm) - self.value(k, mm + 1));
            pw *= 1.0 - t;
        }
        d
    }

    pub fn to_writer<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer(w, self)
    }

    pub fn from_reader<R: Read>(r: R) -> serde_json::Result<Self> {
        serde_json::from_reader(r)
    }
}

/// `Σ_{k=1}^K (K choose k)(-1)^{k+1} 𝓛_I(1, (k·S_K)^{1/α}·x, y)` — the
/// Alzer-bounded Gamma(K,1) tail averaged over interference outside `y` at
/// full density, with the remaining per-interferer factors supplied by
/// `extra(k)`.
fn alzer_sum<F: Fn(usize) -> f64>(
    kdof: usize,
    s_k: f64,
    x: f64,
    y: f64,
    params: &NetworkParams,
    extra: F,
) -> f64 {
    let mut sum = 0.0;
    for k in 1..=kdof {
        let xk = (k as f64 * s_k).powf(1.0 / params.alpha) * x;
        let term = numerics::binomial(kdof, k) * mrc::ltilde(1.0, xk, y, 0, params) * extra(k);
        sum += if k % 2 == 1 { term } else { -term };
    }
    sum
}

fn r_entry(kdof: usize, m: usize, params: &NetworkParams, l: usize) -> Result<f64, AnalysisError> {
    let big_m = params.m;
    let lam = params.lambda_h;
    let j = big_m - kdof; // canceled helpers
    let s_k = numerics::s_const(kdof as f64)?;
    let spec2 = QuadratureSpec { rel_tol: 1e-7, abs_tol: 1e-10, max_subdivisions: 300 };
    let spec3 = QuadratureSpec::loose_3d();

    if m <= j {
        // Serving rank m within the canceled range: the canceled set is
        // {1..j+1} \ {m}, interference is everything beyond y = d_{j+1}.
        let scale_y = (2.0 * (j + 1) as f64 / (PI * lam)).sqrt();
        let inner_spec = spec2.tightened(0.1);
        let q = integrate(
            |y: f64| {
                if y <= 0.0 {
                    return 0.0;
                }
                integrate(
                    |x: f64| {
                        let f = joint_pdf_f_unchecked(m, j + 1, x, y, lam);
                        if f == 0.0 {
                            return 0.0;
                        }
                        f * alzer_sum(kdof, s_k, x, y, params, |_| 1.0)
                    },
                    Domain::Finite(0.0, y),
                    &inner_spec,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
            },
            Domain::SemiInfinite { scale: scale_y },
            &spec2,
        )?;
        Ok(q.value)
    } else if m == j + 1 {
        // Serving helper just past the canceled set: interference is
        // everything beyond the serving distance itself.
        let scale = (2.0 * (j + 1) as f64 / (PI * lam)).sqrt();
        let q = integrate(
            |x: f64| {
                let h = order_distance_pdf(j + 1, x, lam);
                if h == 0.0 {
                    return 0.0;
                }
                h * alzer_sum(kdof, s_k, x, x, params, |_| 1.0)
            },
            Domain::SemiInfinite { scale },
            &spec2,
        )?;
        Ok(q.value)
    } else if m <= j + l {
        // Serving rank beyond j+1: besides the population past x = d_m, the
        // uncanceled helpers between d_{j+1} = y and x interfere — the one at
        // y plus m-j-2 helpers i.i.d. uniform (in area) on the annulus.
        let extra_uniform = m - j - 2;
        let scale_x = (2.0 * m as f64 / (PI * lam)).sqrt();
        let inner_spec = if extra_uniform > 0 { spec3.tightened(0.1) } else { spec2.tightened(0.1) };
        let outer_spec = if extra_uniform > 0 { spec3 } else { spec2 };
        let annulus_spec = spec3.tightened(0.01);
        let q = integrate(
            |x: f64| {
                if x <= 0.0 {
                    return 0.0;
                }
                integrate(
                    |y: f64| {
                        let f = joint_pdf_f_unchecked(j + 1, m, y, x, lam);
                        if f == 0.0 {
                            return 0.0;
                        }
                        let fade = |k: usize, r: f64| {
                            1.0 / (1.0 + k as f64 * s_k * params.tau * (x / r).powf(params.alpha))
                        };
                        let s = alzer_sum(kdof, s_k, x, x, params, |k| {
                            // Annulus helpers are conditionally i.i.d., so the
                            // averaged fading factor enters as a power of one
                            // radial integral.
                            let annulus = if extra_uniform > 0 {
                                integrate(
                                    |r: f64| 2.0 * r / (x * x - y * y) * fade(k, r),
                                    Domain::Finite(y, x),
                                    &annulus_spec,
                                )
                                .map(|v| v.value)
                                .unwrap_or(f64::NAN)
                            } else {
                                1.0
                            };
                            annulus.powi(extra_uniform as i32) * fade(k, y)
                        });
                        f * s
                    },
                    Domain::Finite(0.0, x),
                    &inner_spec,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
            },
            Domain::SemiInfinite { scale: scale_x },
            &outer_spec,
        )?;
        Ok(q.value)
    } else {
        Err(AnalysisError::Domain(format!("rank {m} beyond M-K+L = {}", j + l)))
    }
}

/// Computes the full `R_{M,K,m}` table for the given parameters.
/// `L ∈ {1, 2, 3}` is supported (larger L would need integrals beyond three
/// dimensions); entries are computed in parallel.
pub fn r_table(params: &NetworkParams, l: usize) -> Result<RTable, AnalysisError> {
    if !(1..=3).contains(&l) {
        return Err(AnalysisError::Domain(format!("unsupported L = {l}; supported range is 1..=3")));
    }
    let jobs: Vec<(usize, usize)> = (1..=params.m)
        .flat_map(|k| (1..=(params.m - k + l)).map(move |m| (k, m)))
        .collect();
    type Entry = ((usize, usize), f64);
    let computed: Result<Vec<Entry>, AnalysisError> = jobs
        .into_par_iter()
        .map(|(k, m)| r_entry(k, m, params, l).map(|v| ((k, m), v)))
        .collect();
    let mut values: Vec<Vec<f64>> =
        (1..=params.m).map(|k| vec![0.0; params.m - k + l]).collect();
    for ((k, m), v) in computed? {
        values[k - 1][m - 1] = v;
    }
    Ok(RTable {
        lambda_h: params.lambda_h,
        alpha: params.alpha,
        tau: params.tau,
        m: params.m,
        l,
        values,
    })
}

/// Upper bound on the PZF STP from a cached table: per file a short
/// polynomial in `T_n`, `O(N(M+L))` total.
pub fn stp_pzf_upper(
    k: &DofAllocation,
    t: &CachingDistribution,
    pop: &Popularity,
    table: &RTable,
) -> Result<StpEstimate, AnalysisError> {
    if k.n() != t.n() || t.n() != pop.n() {
        return Err(AnalysisError::Domain(format!(
            "length mismatch: K has {}, T has {}, popularity has {}",
            k.n(),
            t.n(),
            pop.n()
        )));
    }
    if let Some(&bad) = k.per_file().iter().find(|&&v| v < 1 || v > table.m) {
        return Err(AnalysisError::Domain(format!(
            "DoF value {bad} incompatible with table for M = {}",
            table.m
        )));
    }
    let per_file: Vec<f64> = k
        .per_file()
        .iter()
        .zip(t.probs())
        .map(|(&kn, &tn)| table.per_file_upper(kn, tn))
        .collect();
    let value = per_file.iter().zip(pop.probs()).map(|(q, a)| q * a).sum();
    Ok(StpEstimate {
        value,
        kind: EstimateKind::UpperBound,
        error: 1e-12,
        per_file: Some(per_file),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_2d;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn params(tau: f64, m: usize) -> NetworkParams {
        NetworkParams::new(1e-3, 4.0, tau, m).unwrap()
    }

    #[test]
    fn f_vanishes_outside_support() {
        assert_eq!(joint_pdf_f(1, 2, 3.0, 2.0, 1e-3).unwrap(), 0.0);
        assert_eq!(joint_pdf_f(1, 2, 2.0, 2.0, 1e-3).unwrap(), 0.0);
        assert!(joint_pdf_f(2, 2, 1.0, 2.0, 1e-3).is_err());
    }

    #[test]
    fn f_normalizes_to_one() {
        let lam = 1e-3;
        for &(i, j) in &[(1usize, 2usize), (2, 4)] {
            let scale = (2.0 * j as f64 / (PI * lam)).sqrt();
            let q = integrate_2d(
                |y, x| joint_pdf_f_unchecked(i, j, x, y, lam),
                Domain::SemiInfinite { scale },
                |y| (0.0, y),
                &QuadratureSpec::default_analysis(),
            )
            .unwrap();
            assert_relative_eq!(q.value, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn f_marginal_matches_second_order_distance_pdf() {
        // ∫0^y f_{d1,d2}(x, y) dx = 2(πλ)² y³ e^{-πλy²}
        let lam = 1e-3;
        for &y in &[5.0, 15.0, 30.0] {
            let q = integrate(
                |x| joint_pdf_f_unchecked(1, 2, x, y, lam),
                Domain::Finite(0.0, y),
                &QuadratureSpec::default_analysis(),
            )
            .unwrap();
            let expected = 2.0 * (PI * lam).powi(2) * y.powi(3) * (-PI * lam * y * y).exp();
            assert_relative_eq!(q.value, expected, max_relative = 1e-8);
            assert_relative_eq!(q.value, order_distance_pdf(2, y, lam), max_relative = 1e-8);
        }
    }

    #[test]
    fn g_rejects_degenerate_conditioning() {
        assert!(joint_pdf_g(1.0, 2.0, 1.0, 1, 1e-3).is_err());
        assert!(joint_pdf_g(0.5, 1.0, 2.0, 1, 1e-3).is_err()); // y >= x
    }

    #[test]
    fn g_normalizes_to_one() {
        let lam = 1e-3;
        for &(t, j) in &[(0.5f64, 1usize), (0.3, 2)] {
            let scale = ((1.0 / t + 2.0 * j as f64 / (1.0 - t)) / (PI * lam)).sqrt();
            let q = integrate_2d(
                |x, y| joint_pdf_g(t, x, y, j, lam).unwrap(),
                Domain::SemiInfinite { scale },
                |x| (0.0, x),
                &QuadratureSpec::default_analysis(),
            )
            .unwrap();
            assert_relative_eq!(q.value, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn g_factorizes_into_order_distance_pdfs() {
        // g = h_{d1}(x, λT)·h_{dj}(y, λ(1-T)) / (1-T)^j
        let lam = 1e-3;
        let (t, j) = (0.4, 2usize);
        for &(x, y) in &[(20.0f64, 10.0f64), (35.0, 25.0), (50.0, 5.0)] {
            let g = joint_pdf_g(t, x, y, j, lam).unwrap();
            let h1 = 2.0 * PI * lam * t * x * (-PI * lam * t * x * x).exp();
            let hj = order_distance_pdf(j, y, lam * (1.0 - t));
            assert_relative_eq!(g * (1.0 - t).powi(j as i32), h1 * hj, max_relative = 1e-12);
        }
    }

    #[test]
    fn pzf_reduces_to_mrc_at_full_boost() {
        let p = params(1.0, 3);
        let t = CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap();
        let pop = Popularity::zipf(5, 1.0).unwrap();
        let k = DofAllocation::uniform(5, 3, 3).unwrap();
        let pzf = stp_pzf_exact(&k, &t, &pop, &p).unwrap();
        let mrc = mrc::stp_mrc_exact(&t, &pop, &p).unwrap();
        assert_relative_eq!(pzf.value, mrc.value, max_relative = 1e-6);
    }

    #[test]
    fn stp_increases_with_joint_antenna_and_dof_increment() {
        // q_{M,n}(K, T) > q_{M-1,n}(K-1, T)
        for &(m, k_n, t) in &[(3usize, 2usize, 0.5f64), (4, 2, 0.3), (4, 3, 0.8)] {
            let hi = pzf_file_exact(k_n, t, &params(1.0, m)).unwrap().0;
            let lo = if k_n - 1 == m - 1 {
                mrc::mrc_file_closed(t, &params(1.0, m - 1))
            } else {
                pzf_file_exact(k_n - 1, t, &params(1.0, m - 1)).unwrap().0
            };
            assert!(hi > lo, "no gain from (M-1={}, K-1={}) to (M={m}, K={k_n})", m - 1, k_n - 1);
        }
    }

    #[test]
    fn r_table_entries_bounded_and_decreasing() {
        let p = params(1.0, 4);
        let table = r_table(&p, 3).unwrap();
        for k in 1..=4usize {
            let mmax = 4 - k + 3;
            for m in 1..=mmax {
                let v = table.value(k, m);
                assert!((0.0..=1.0).contains(&v), "R[{k}][{m}] = {v} outside [0,1]");
                if m > 1 {
                    assert!(
                        v < table.value(k, m - 1),
                        "R[{k}][{m}] not decreasing: {v} vs {}",
                        table.value(k, m - 1)
                    );
                }
            }
        }
    }

    #[test]
    fn r_at_full_dof_matches_mrc_bound_at_full_storage() {
        // K = M, m = 1: equals the per-file MRC upper bound at T = 1.
        let p = params(1.0, 3);
        let table = r_table(&p, 2).unwrap();
        let s_m = numerics::s_const(3.0).unwrap();
        let mut acc = 0.0;
        for k in 0..=3usize {
            let term = if k == 0 {
                1.0
            } else {
                let (c1, c2) = mrc::c_coeffs(k, s_m, &p).unwrap();
                1.0 / (c1 + c2)
            };
            acc += numerics::binomial(3, k) * if k % 2 == 0 { term } else { -term };
        }
        let mrc_bound_full_storage = 1.0 - acc;
        assert_relative_eq!(table.value(3, 1), mrc_bound_full_storage, max_relative = 1e-6);
    }

    /// Conditioned Monte Carlo oracle for R_{M,K,m}: draw the PPP, place the
    /// serving helper at rank m, cancel the M-K nearest interferers, and
    /// average the Alzer-substituted success bound over interference.
    fn r_oracle_mc(
        m_ant: usize,
        kdof: usize,
        m_rank: usize,
        p: &NetworkParams,
        trials: usize,
    ) -> (f64, f64) {
        let s_k = numerics::s_const(kdof as f64).unwrap();
        let lam = p.lambda_h;
        let radius = (400.0 / (PI * lam)).sqrt();
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        while count < trials {
            let n_pts = {
                let mean = lam * PI * radius * radius;
                let mut k = 0usize;
                let mut acc = 0.0f64;
                loop {
                    let u: f64 = rng.random();
                    acc -= u.ln();
                    if acc > mean {
                        break k;
                    }
                    k += 1;
                }
            };
            if n_pts < m_rank + 4 {
                continue;
            }
            let mut d: Vec<f64> = (0..n_pts).map(|_| radius * rng.random::<f64>().sqrt()).collect();
            d.sort_by(|a, b| a.total_cmp(b));
            let serving = m_rank - 1; // 0-based
            let mut canceled = Vec::new();
            let mut idx = 0;
            while canceled.len() < m_ant - kdof {
                if idx != serving {
                    canceled.push(idx);
                }
                idx += 1;
            }
            let mut interference = 0.0;
            for (i, &di) in d.iter().enumerate() {
                if i == serving || canceled.contains(&i) {
                    continue;
                }
                let h: f64 = -(rng.random::<f64>()).ln(); // Exp(1)
                interference += h * di.powf(-p.alpha);
            }
            let s = p.tau * d[serving].powf(p.alpha);
            let mut x = 0.0;
            for k in 1..=kdof {
                let term =
                    numerics::binomial(kdof, k) * (-(k as f64) * s_k * s * interference).exp();
                x += if k % 2 == 1 { term } else { -term };
            }
            sum += x;
            sum_sq += x * x;
            count += 1;
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        (mean, (var / count as f64).sqrt())
    }

    #[test]
    fn r_entries_match_conditioned_monte_carlo() {
        let p = params(1.0, 2);
        let table = r_table(&p, 3).unwrap();
        // Case 1 (m=1), case 2 (m=2), case 3 without and with the annulus
        // integral (m=3, 4).
        for m_rank in 1..=4usize {
            let (mc, sigma) = r_oracle_mc(2, 1, m_rank, &p, 6000);
            let v = table.value(1, m_rank);
            assert!(
                (v - mc).abs() <= 3.0 * sigma + 1e-3,
                "R[1][{m_rank}] = {v} vs MC {mc} ± {sigma}"
            );
        }
    }

    #[test]
    fn r_case1_binomial_coefficient_validated_by_oracle() {
        // K = 2 exercises the (K choose k) weights in the first case.
        let p = params(1.0, 3);
        let table = r_table(&p, 2).unwrap();
        let (mc, sigma) = r_oracle_mc(3, 2, 1, &p, 6000);
        let v = table.value(2, 1);
        assert!((v - mc).abs() <= 3.0 * sigma + 1e-3, "R[2][1] = {v} vs MC {mc} ± {sigma}");
    }

    #[test]
    fn upper_bound_endpoints_collapse() {
        let p = params(1.0, 4);
        let table = r_table(&p, 3).unwrap();
        for k in 1..=4usize {
            let jmax = 4 - k + 3 - 1;
            assert_relative_eq!(table.per_file_upper(k, 1.0), table.value(k, 1));
            assert_relative_eq!(table.per_file_upper(k, 0.0), table.value(k, jmax + 1));
        }
    }

    #[test]
    fn upper_bound_rewriting_identity() {
        // q = R_1 - Σ_m (1-T)^m (R_m - R_{m+1})
        let p = params(0.5, 3);
        let table = r_table(&p, 3).unwrap();
        for k in 1..=3usize {
            let jmax = 3 - k + 3 - 1;
            for i in 0..=10 {
                let t = i as f64 / 10.0;
                let direct = table.per_file_upper(k, t);
                let mut rewritten = table.value(k, 1);
                for mm in 1..=jmax {
                    rewritten -=
                        (1.0 - t).powi(mm as i32) * (table.value(k, mm) - table.value(k, mm + 1));
                }
                assert_relative_eq!(direct, rewritten, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn larger_l_tightens_the_bound() {
        let p = params(1.0, 3);
        let t2 = r_table(&p, 2).unwrap();
        let t3 = r_table(&p, 3).unwrap();
        for k in 1..=3usize {
            for i in 0..=10 {
                let t = i as f64 / 10.0;
                assert!(
                    t3.per_file_upper(k, t) <= t2.per_file_upper(k, t) + 1e-9,
                    "L=3 not tighter at K={k}, T={t}"
                );
            }
        }
    }

    #[test]
    fn upper_bound_concave_increasing_in_storage() {
        let p = params(1.0, 4);
        let table = r_table(&p, 3).unwrap();
        let step = 1e-3;
        for k in 1..=4usize {
            let mut prev = table.per_file_upper(k, 0.0);
            let mut prev_diff = f64::INFINITY;
            let mut t = step;
            while t <= 1.0 + 1e-12 {
                let cur = table.per_file_upper(k, t);
                let diff = cur - prev;
                assert!(diff >= -1e-12, "not increasing at K={k}, T={t}");
                assert!(diff <= prev_diff + 1e-12, "not concave at K={k}, T={t}");
                prev_diff = diff;
                prev = cur;
                t += step;
            }
        }
    }

    #[test]
    fn upper_bound_dominates_exact() {
        let p = params(1.0, 3);
        let table = r_table(&p, 3).unwrap();
        let pop = Popularity::zipf(5, 1.0).unwrap();
        let t = CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap();
        for k_uniform in [1usize, 2] {
            let k = DofAllocation::uniform(5, k_uniform, 3).unwrap();
            let upper = stp_pzf_upper(&k, &t, &pop, &table).unwrap();
            let exact = stp_pzf_exact(&k, &t, &pop, &p).unwrap();
            assert!(
                upper.value >= exact.value - 1e-6,
                "upper {} below exact {} at K={k_uniform}",
                upper.value,
                exact.value
            );
        }
    }

    #[test]
    fn table_roundtrips_through_json() {
        let p = params(1.0, 2);
        let table = r_table(&p, 2).unwrap();
        let mut buf = Vec::new();
        table.to_writer(&mut buf).unwrap();
        let back = RTable::from_reader(buf.as_slice()).unwrap();
        assert!(back.matches(&p, 2));
        assert_eq!(back.value(1, 2), table.value(1, 2));
    }

    #[test]
    fn unsupported_l_is_rejected() {
        let p = params(1.0, 2);
        assert!(r_table(&p, 4).is_err());
        assert!(r_table(&p, 0).is_err());
    }
}
