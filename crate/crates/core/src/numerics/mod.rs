//! Special functions, partition enumeration, and quadrature primitives
//! shared by the analytical formulas.
//!
//! All operations here are pure and reentrant.

mod partitions;
mod quad;

pub use partitions::{partitions, PartitionSet, MAX_PARTITION_K};
pub(crate) use partitions::partitions_cached;
pub use quad::{integrate, integrate_2d, integrate_3d, Domain, Quadrature, QuadratureSpec};

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: best estimate {best}, achieved error {error}")]
    NonConvergence { best: f64, error: f64 },
}

/// Beta function `B(a, b) = ∫0^1 u^{a-1}(1-u)^{b-1} du` via the log-gamma
/// identity `B(a, b) = exp(lnΓ(a) + lnΓ(b) - lnΓ(a+b))`.
pub fn beta(a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(NumericsError::Domain(format!("beta requires a, b > 0, got ({a}, {b})")));
    }
    Ok(beta_unchecked(a, b))
}

pub(crate) fn beta_unchecked(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Complementary incomplete beta function
/// `B'(a, b, z) = ∫_z^1 u^{a-1}(1-u)^{b-1} du`, `0 < z < 1`.
///
/// Evaluated as `B(a, b) · I_{1-z}(b, a)` through the regularized incomplete
/// beta function, which keeps full relative accuracy when `z → 1` (the small
/// tail that drives the low-SIR asymptotics).
pub fn comp_inc_beta(a: f64, b: f64, z: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(NumericsError::Domain(format!(
            "comp_inc_beta requires a, b > 0, got ({a}, {b})"
        )));
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(NumericsError::Domain(format!("comp_inc_beta requires 0 < z < 1, got {z}")));
    }
    Ok(comp_inc_beta_unchecked(a, b, z))
}

/// Like [`comp_inc_beta`] but accepts the `z = 0` limit (full beta), which the
/// Laplace-transform formulas reach when interferers start from distance 0.
pub(crate) fn comp_inc_beta_unchecked(a: f64, b: f64, z: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0 && (0.0..1.0).contains(&z));
    if z <= 0.0 {
        return beta_unchecked(a, b);
    }
    beta_unchecked(a, b) * beta_reg(b, a, 1.0 - z)
}

/// `S_a = Γ(a+1)^{-1/a}`, the constant of the Alzer bounds on the incomplete
/// gamma function. `S_1 = 1` and `S_a` is strictly decreasing in `a`.
pub fn s_const(a: f64) -> Result<f64, NumericsError> {
    if !(a >= 1.0) {
        return Err(NumericsError::Domain(format!("s_const requires a >= 1, got {a}")));
    }
    Ok((-ln_gamma(a + 1.0) / a).exp())
}

/// `n!` as f64 (exact for n ≤ 22, ample for the partition orders used here).
pub(crate) fn factorial(n: usize) -> f64 {
    const TABLE: [f64; 23] = [
        1.0,
        1.0,
        2.0,
        6.0,
        24.0,
        120.0,
        720.0,
        5040.0,
        40320.0,
        362880.0,
        3628800.0,
        39916800.0,
        479001600.0,
        6227020800.0,
        87178291200.0,
        1307674368000.0,
        20922789888000.0,
        355687428096000.0,
        6402373705728000.0,
        121645100408832000.0,
        2432902008176640000.0,
        51090942171709440000.0,
        1124000727777607680000.0,
    ];
    if n < TABLE.len() {
        TABLE[n]
    } else {
        (ln_gamma(n as f64 + 1.0)).exp()
    }
}

/// Binomial coefficient as f64.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn beta_trivial_values() {
        assert_relative_eq!(beta(1.0, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(beta(0.5, 0.5).unwrap(), PI, max_relative = 1e-13);
    }

    #[test]
    fn beta_matches_quadrature_oracle() {
        // Independent route: adaptive quadrature of the defining integral.
        let (a, b) = (1.5, 3.5);
        let q = integrate(
            |u: f64| u.powf(a - 1.0) * (1.0 - u).powf(b - 1.0),
            Domain::Finite(0.0, 1.0),
            &QuadratureSpec::default_analysis(),
        )
        .unwrap();
        assert_relative_eq!(beta(a, b).unwrap(), q.value, max_relative = 1e-10);
    }

    #[test]
    fn beta_rejects_nonpositive_arguments() {
        assert!(beta(0.0, 1.0).is_err());
        assert!(beta(1.0, -2.0).is_err());
    }

    #[test]
    fn comp_inc_beta_uniform_integrand() {
        for &z in &[0.1, 0.5, 0.9] {
            assert_relative_eq!(comp_inc_beta(1.0, 1.0, z).unwrap(), 1.0 - z, max_relative = 1e-13);
        }
    }

    #[test]
    fn comp_inc_beta_full_interval_limit() {
        let (a, b) = (0.5, 0.5);
        let full = beta(a, b).unwrap();
        assert_relative_eq!(comp_inc_beta(a, b, 1e-14).unwrap(), full, max_relative = 1e-6);
    }

    /// Brute-force oracle for B'(a, b, z) with b < 1: substitute u = 1 - v²ᵖ
    /// with p = 1/b so the transformed integrand is bounded, then midpoint sum.
    fn riemann_oracle(a: f64, b: f64, z: f64, panels: usize) -> f64 {
        // ∫_z^1 u^{a-1}(1-u)^{b-1} du with v = (1-u)^b:
        //   = (1/b) ∫_0^{(1-z)^b} (1 - v^{1/b})^{a-1} dv
        let upper = (1.0 - z).powf(b);
        let h = upper / panels as f64;
        let mut sum = 0.0;
        for i in 0..panels {
            let v = (i as f64 + 0.5) * h;
            sum += (1.0 - v.powf(1.0 / b)).powf(a - 1.0);
        }
        sum * h / b
    }

    #[test]
    fn comp_inc_beta_matches_riemann_oracle() {
        // B'(1/2, 1/2, 1/2) = π - 2·asin(√½) = π/2.
        let value = comp_inc_beta(0.5, 0.5, 0.5).unwrap();
        let oracle = riemann_oracle(0.5, 0.5, 0.5, 10_000_000);
        assert_relative_eq!(value, oracle, epsilon = 1e-8);
        assert_relative_eq!(value, PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn comp_inc_beta_near_one_keeps_relative_accuracy() {
        // As z → 1: B'(a, b, z) = (1-z)^b / b + O((1-z)^{b+1}).
        let (a, b) = (0.5, 0.5);
        for &eps in &[1e-4, 1e-6, 1e-8] {
            let v = comp_inc_beta(a, b, 1.0 - eps).unwrap();
            let leading = eps.powf(b) / b;
            assert_relative_eq!(v, leading, max_relative = 2.0 * eps.sqrt());
        }
    }

    #[test]
    fn s_const_values() {
        assert_relative_eq!(s_const(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(s_const(2.0).unwrap(), 2.0f64.powf(-0.5), max_relative = 1e-14);
        assert_relative_eq!(s_const(3.0).unwrap(), 6.0f64.powf(-1.0 / 3.0), max_relative = 1e-14);
        assert!(s_const(0.5).is_err());
    }

    #[test]
    fn s_const_strictly_decreasing() {
        let mut prev = s_const(1.0).unwrap();
        for i in 1..60 {
            let a = 1.0 + i as f64 * 0.25;
            let cur = s_const(a).unwrap();
            assert!(cur < prev, "S_a not decreasing at a = {a}");
            prev = cur;
        }
    }

    proptest! {
        #[test]
        fn comp_inc_beta_bounded_and_monotone(
            a in 0.1f64..4.0,
            b in 0.1f64..4.0,
            z1 in 0.01f64..0.98,
            dz in 0.001f64..0.01,
        ) {
            let full = beta(a, b).unwrap();
            let v1 = comp_inc_beta(a, b, z1).unwrap();
            let v2 = comp_inc_beta(a, b, z1 + dz).unwrap();
            prop_assert!(v1 >= 0.0 && v1 <= full * (1.0 + 1e-12));
            prop_assert!(v2 <= v1 + 1e-14);
        }
    }
}
