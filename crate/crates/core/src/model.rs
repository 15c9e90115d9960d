//! Scenario parameters, popularity and caching distributions, DoF
//! allocations, baseline caching schemes, and exactly-C cache sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the popularity normalization.
const POPULARITY_SUM_TOL: f64 = 1e-12;
/// Tolerance on the caching-distribution sum constraint.
pub const CACHE_SUM_TOL: f64 = 1e-9;
/// Antenna counts above this are outside the supported regime (the partition
/// enumeration is capped at order M - 1 = 15).
pub const MAX_ANTENNAS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("box violation at file {index}: T = {value} outside [0, 1]")]
    BoxViolation { index: usize, value: f64 },
    #[error("sum violation: ΣT = {sum}, expected C = {expected} (off by {})", sum - expected)]
    SumViolation { sum: f64, expected: f64 },
    #[error("cache size C = {c} outside [1, {max}] for N = {n} files")]
    CacheSizeOutOfRange { c: usize, n: usize, max: usize },
    #[error("DoF K_{index} = {value} outside {{1, …, {m}}}")]
    DofOutOfRange { index: usize, value: usize, m: usize },
}

/// Physical-layer scenario: helper density, path loss, SIR threshold and
/// antenna count. `tau` is on linear scale; the CLI converts from dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub lambda_h: f64,
    pub alpha: f64,
    pub tau: f64,
    pub m: usize,
}

impl NetworkParams {
    pub fn new(lambda_h: f64, alpha: f64, tau: f64, m: usize) -> Result<Self, ModelError> {
        if !(lambda_h > 0.0) || !lambda_h.is_finite() {
            return Err(ModelError::InvalidParams(format!("helper density must be > 0, got {lambda_h}")));
        }
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "path loss exponent must be > 2 for interference convergence, got {alpha}"
            )));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(ModelError::InvalidParams(format!("SIR threshold must be > 0, got {tau}")));
        }
        if !(1..=MAX_ANTENNAS).contains(&m) {
            return Err(ModelError::InvalidParams(format!(
                "antenna count must be in [1, {MAX_ANTENNAS}], got {m}"
            )));
        }
        Ok(Self { lambda_h, alpha, tau, m })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, ModelError> {
        Self::new(self.lambda_h, self.alpha, tau, self.m)
    }

    pub fn with_m(&self, m: usize) -> Result<Self, ModelError> {
        Self::new(self.lambda_h, self.alpha, self.tau, m)
    }
}

/// File request distribution over N files. Probabilities are non-increasing;
/// ties are tolerated (needed for the uniform-popularity case) but flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    probs: Vec<f64>,
    strict: bool,
}

impl Popularity {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        let n = probs.len();
        if n < 2 {
            return Err(ModelError::InvalidParams(format!("need at least 2 files, got {n}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > POPULARITY_SUM_TOL {
            return Err(ModelError::InvalidParams(format!(
                "popularity must sum to 1 within {POPULARITY_SUM_TOL}, got {sum}"
            )));
        }
        let mut strict = true;
        for w in probs.windows(2) {
            if w[1] > w[0] {
                return Err(ModelError::InvalidParams(format!(
                    "popularity must be non-increasing, got {} before {}",
                    w[0], w[1]
                )));
            }
            if w[1] == w[0] {
                strict = false;
            }
        }
        if probs.iter().any(|&a| !(a > 0.0)) {
            return Err(ModelError::InvalidParams("popularity entries must be positive".into()));
        }
        Ok(Self { probs, strict })
    }

    /// Zipf popularity `a_n = n^{-γ} / Σ_m m^{-γ}`. `γ = 0` yields the
    /// uniform distribution (ordering is then non-strict and flagged).
    pub fn zipf(n: usize, gamma: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::InvalidParams(format!("zipf needs N >= 2, got {n}")));
        }
        if !(gamma >= 0.0) {
            return Err(ModelError::InvalidParams(format!("zipf exponent must be >= 0, got {gamma}")));
        }
        let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-gamma)).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Ok(Self { probs, strict: gamma > 0.0 })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Whether the ordering `a_1 > a_2 > …` holds strictly.
    pub fn is_strictly_ordered(&self) -> bool {
        self.strict
    }

    /// Draws a file index (0-based) by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &a) in self.probs.iter().enumerate() {
            acc += a;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Per-file storage probabilities with the box constraint and, unless
/// exempted, the cache-size sum constraint `ΣT_n = C`.
///
/// The exemption exists for the i.i.d.-popularity baseline whose effective
/// marginals satisfy only `ΣT_n ≤ C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachingDistribution {
    probs: Vec<f64>,
    cache_size: usize,
    sum_exempt: bool,
}

impl CachingDistribution {
    /// Validates the full constraint set; on failure reports which constraint
    /// is violated and by how much.
    pub fn new(probs: Vec<f64>, cache_size: usize) -> Result<Self, ModelError> {
        let n = probs.len();
        if cache_size < 1 || cache_size >= n.max(1) {
            return Err(ModelError::CacheSizeOutOfRange {
                c: cache_size,
                n,
                max: n.saturating_sub(1),
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::BoxViolation { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - cache_size as f64).abs() > CACHE_SUM_TOL {
            return Err(ModelError::SumViolation { sum, expected: cache_size as f64 });
        }
        Ok(Self { probs, cache_size, sum_exempt: false })
    }

    /// Marginal-only variant: box constraint plus `ΣT ≤ C`. Used by the
    /// i.i.d.-popularity baseline.
    pub fn marginals_only(probs: Vec<f64>, cache_size: usize) -> Result<Self, ModelError> {
        let n = probs.len();
        if cache_size < 1 || cache_size >= n.max(1) {
            return Err(ModelError::CacheSizeOutOfRange {
                c: cache_size,
                n,
                max: n.saturating_sub(1),
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::BoxViolation { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if sum > cache_size as f64 + CACHE_SUM_TOL {
            return Err(ModelError::SumViolation { sum, expected: cache_size as f64 });
        }
        Ok(Self { probs, cache_size, sum_exempt: true })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    /// True for marginal-only distributions (ΣT ≤ C instead of ΣT = C).
    pub fn is_sum_exempt(&self) -> bool {
        self.sum_exempt
    }

    /// Smallest strictly positive storage probability, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.probs.iter().copied().filter(|&t| t > 0.0).fold(None, |acc, t| {
            Some(match acc {
                Some(m) if m < t => m,
                _ => t,
            })
        })
    }
}

/// Validates a raw probability vector against the caching constraints.
pub fn validate(probs: Vec<f64>, cache_size: usize) -> Result<CachingDistribution, ModelError> {
    CachingDistribution::new(probs, cache_size)
}

/// Per-file signal-boost DoF `K_n ∈ {1, …, M}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DofAllocation {
    dof: Vec<usize>,
}

impl DofAllocation {
    pub fn new(dof: Vec<usize>, m: usize) -> Result<Self, ModelError> {
        for (index, &value) in dof.iter().enumerate() {
            if value < 1 || value > m {
                return Err(ModelError::DofOutOfRange { index, value, m });
            }
        }
        Ok(Self { dof })
    }

    pub fn uniform(n: usize, k: usize, m: usize) -> Result<Self, ModelError> {
        Self::new(vec![k; n], m)
    }

    pub fn per_file(&self) -> &[usize] {
        &self.dof
    }

    pub fn n(&self) -> usize {
        self.dof.len()
    }
}

/// Baseline caching schemes from the comparison section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Every helper stores the C most popular files.
    MostPopular,
    /// Every helper draws C files i.i.d. by popularity (duplicates possible);
    /// analysis uses the effective marginal presence probabilities.
    IidPopularity,
    /// Every helper stores C files drawn uniformly, so T_n = C/N.
    Uniform,
}

/// Caching distribution of a baseline scheme.
///
/// For `IidPopularity` the returned distribution carries the effective
/// marginals `T_n = 1 - (1 - a_n)^C` (sum-exempt); simulation should use
/// [`CacheSampler::IidPopularity`] for the literal per-draw behavior.
pub fn baseline(
    kind: BaselineKind,
    pop: &Popularity,
    cache_size: usize,
) -> Result<CachingDistribution, ModelError> {
    let n = pop.n();
    if cache_size < 1 || cache_size >= n {
        return Err(ModelError::CacheSizeOutOfRange { c: cache_size, n, max: n - 1 });
    }
    match kind {
        BaselineKind::MostPopular => {
            let probs = (0..n).map(|i| if i < cache_size { 1.0 } else { 0.0 }).collect();
            CachingDistribution::new(probs, cache_size)
        }
        BaselineKind::Uniform => {
            let t = cache_size as f64 / n as f64;
            CachingDistribution::new(vec![t; n], cache_size)
        }
        BaselineKind::IidPopularity => {
            let probs = pop
                .probs()
                .iter()
                .map(|&a| 1.0 - (1.0 - a).powi(cache_size as i32))
                .collect();
            CachingDistribution::marginals_only(probs, cache_size)
        }
    }
}

/// Draws a set of exactly C distinct file indices (0-based) whose inclusion
/// probabilities equal the marginals `T_n`.
///
/// Uses systematic (Madow) sampling: the C points `U, U+1, …, U+C-1` on the
/// cumulative-T line each select the file whose interval they land in. Since
/// every `T_n ≤ 1`, no file is selected twice.
pub fn sample_cache<R: Rng + ?Sized>(t: &CachingDistribution, rng: &mut R) -> Vec<usize> {
    let c = t.cache_size();
    let u: f64 = rng.random();
    let mut out = Vec::with_capacity(c);
    let mut cum = 0.0;
    let mut next = u; // next selection point: u + out.len()
    for (i, &p) in t.probs().iter().enumerate() {
        cum += p;
        while next < cum && out.len() < c {
            out.push(i);
            next = u + out.len() as f64;
        }
    }
    // Floating-point shortfall in Σ T_n can leave the last point uncovered.
    while out.len() < c {
        let fallback = (0..t.n()).rev().find(|i| !out.contains(i)).expect("C < N");
        out.push(fallback);
    }
    out
}

/// Cache-content sampler used by the simulator: either Madow sampling of a
/// caching distribution, or the literal i.i.d.-popularity draw.
#[derive(Debug, Clone)]
pub enum CacheSampler {
    Madow(CachingDistribution),
    IidPopularity { pop: Popularity, cache_size: usize },
}

impl CacheSampler {
    /// Marginal presence probability of file `n` under this sampler.
    pub fn marginal(&self, n: usize) -> f64 {
        match self {
            CacheSampler::Madow(t) => t.probs()[n],
            CacheSampler::IidPopularity { pop, cache_size } => {
                1.0 - (1.0 - pop.probs()[n]).powi(*cache_size as i32)
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CacheSampler::Madow(t) => t.n(),
            CacheSampler::IidPopularity { pop, .. } => pop.n(),
        }
    }

    pub fn min_positive_marginal(&self) -> Option<f64> {
        (0..self.n()).map(|n| self.marginal(n)).filter(|&t| t > 0.0).fold(None, |acc, t| {
            Some(match acc {
                Some(m) if m < t => m,
                _ => t,
            })
        })
    }

    /// Draws one helper's cache contents (distinct file indices).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            CacheSampler::Madow(t) => sample_cache(t, rng),
            CacheSampler::IidPopularity { pop, cache_size } => {
                // Literal per-draw behavior: C i.i.d. draws, duplicates collapse.
                let mut set: Vec<usize> = Vec::with_capacity(*cache_size);
                for _ in 0..*cache_size {
                    let f = pop.sample(rng);
                    if !set.contains(&f) {
                        set.push(f);
                    }
                }
                set
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zipf_gamma_zero_is_uniform() {
        let p = Popularity::zipf(5, 0.0).unwrap();
        for &a in p.probs() {
            assert_relative_eq!(a, 0.2, max_relative = 1e-14);
        }
        assert!(!p.is_strictly_ordered());
    }

    #[test]
    fn zipf_two_files_harmonic() {
        let p = Popularity::zipf(2, 1.0).unwrap();
        assert_relative_eq!(p.probs()[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(p.probs()[1], 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zipf_five_files_unit_exponent() {
        // H_5 = 137/60 by direct summation, so a_1 = 60/137.
        let p = Popularity::zipf(5, 1.0).unwrap();
        assert_relative_eq!(p.probs()[0], 60.0 / 137.0, max_relative = 1e-14);
        assert!(p.is_strictly_ordered());
    }

    #[test]
    fn zipf_rejects_bad_input() {
        assert!(Popularity::zipf(1, 1.0).is_err());
        assert!(Popularity::zipf(5, -0.5).is_err());
    }

    #[test]
    fn validate_fig2_distribution() {
        let t = validate(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap();
        assert_eq!(t.cache_size(), 3);
        assert!(!t.is_sum_exempt());
    }

    #[test]
    fn validate_reports_sum_violation() {
        let err = validate(vec![0.5, 0.5], 2).unwrap_err();
        // C = 2 with N = 2 is also out of range; check the dedicated case with N = 3.
        assert!(matches!(err, ModelError::CacheSizeOutOfRange { .. }));
        let err = validate(vec![0.5, 0.5, 0.0], 2).unwrap_err();
        match err {
            ModelError::SumViolation { sum, expected } => {
                assert_relative_eq!(sum, 1.0);
                assert_relative_eq!(expected, 2.0);
            }
            other => panic!("expected SumViolation, got {other:?}"),
        }
    }

    #[test]
    fn validate_reports_box_violation() {
        let err = validate(vec![1.2, 0.8, 1.0], 3).unwrap_err();
        // C = 3 = N is out of range first; use N = 4 to reach the box check.
        assert!(matches!(err, ModelError::CacheSizeOutOfRange { .. }));
        let err = validate(vec![1.2, 0.8, 1.0, 0.0], 3).unwrap_err();
        match err {
            ModelError::BoxViolation { index, value } => {
                assert_eq!(index, 0);
                assert_relative_eq!(value, 1.2);
            }
            other => panic!("expected BoxViolation, got {other:?}"),
        }
    }

    #[test]
    fn baselines_trivial_cases() {
        let pop = Popularity::zipf(5, 1.0).unwrap();
        let mp = baseline(BaselineKind::MostPopular, &pop, 3).unwrap();
        assert_eq!(mp.probs(), &[1.0, 1.0, 1.0, 0.0, 0.0]);

        let un = baseline(BaselineKind::Uniform, &pop, 3).unwrap();
        for &t in un.probs() {
            assert_relative_eq!(t, 0.6, max_relative = 1e-14);
        }

        let pop2 = Popularity::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let iid = baseline(BaselineKind::IidPopularity, &pop2, 1).unwrap();
        assert_relative_eq!(iid.probs()[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(iid.probs()[1], 1.0 / 3.0, max_relative = 1e-14);
        assert!(iid.is_sum_exempt());
    }

    #[test]
    fn iid_marginals_leq_cache_size() {
        let pop = Popularity::zipf(10, 0.8).unwrap();
        let iid = baseline(BaselineKind::IidPopularity, &pop, 4).unwrap();
        let sum: f64 = iid.probs().iter().sum();
        assert!(sum <= 4.0);
        assert!(iid.probs().iter().all(|&t| (0.0..=1.0).contains(&t)));
    }

    #[test]
    fn sample_cache_deterministic_marginals() {
        let t = CachingDistribution::new(vec![1.0, 1.0, 0.0], 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut s = sample_cache(&t, &mut rng);
            s.sort_unstable();
            assert_eq!(s, vec![0, 1]);
        }
    }

    #[test]
    fn sample_cache_inclusion_frequencies() {
        // Uniform T = 0.6 over N = 5: inclusion frequency 0.6 ± 0.01 at 1e5 draws,
        // which is > 3σ = 3·√(0.6·0.4/1e5) ≈ 0.0046.
        let t = CachingDistribution::new(vec![0.6; 5], 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            let s = sample_cache(&t, &mut rng);
            assert_eq!(s.len(), 3);
            for i in s {
                counts[i] += 1;
            }
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.6).abs() < 0.01, "inclusion frequency {freq} too far from 0.6");
        }
    }

    #[test]
    fn sample_cache_binomial_three_sigma() {
        // Non-uniform marginals, 3σ binomial test per file at 1e5 draws.
        let t = CachingDistribution::new(vec![0.9, 0.7, 0.25, 0.15], 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            for i in sample_cache(&t, &mut rng) {
                counts[i] += 1;
            }
        }
        for (i, (&c, &p)) in counts.iter().zip(t.probs()).enumerate() {
            let freq = c as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sigma, "file {i}: freq {freq} vs marginal {p}");
        }
    }

    #[test]
    fn iid_sampler_matches_effective_marginals() {
        let pop = Popularity::zipf(6, 1.0).unwrap();
        let c = 3;
        let sampler = CacheSampler::IidPopularity { pop: pop.clone(), cache_size: c };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let draws = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            for i in sampler.sample(&mut rng) {
                counts[i] += 1;
            }
        }
        for (n, &count) in counts.iter().enumerate() {
            let p = sampler.marginal(n);
            let freq = count as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * sigma, "file {n}: freq {freq} vs marginal {p}");
        }
    }

    proptest! {
        #[test]
        fn zipf_sums_to_one_and_is_ordered(n in 2usize..50, gamma in 0.0f64..3.0) {
            let p = Popularity::zipf(n, gamma).unwrap();
            let sum: f64 = p.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for w in p.probs().windows(2) {
                prop_assert!(w[0] >= w[1]);
                if gamma > 0.0 {
                    prop_assert!(w[0] > w[1]);
                }
            }
        }

        #[test]
        fn sample_cache_always_has_cardinality_c(
            seed in 0u64..1000,
            n in 3usize..12,
            c_frac in 0.2f64..0.8,
        ) {
            let c = ((n as f64 * c_frac) as usize).clamp(1, n - 1);
            // Random feasible T: start uniform, perturb, renormalize to sum C.
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = t.iter().sum();
            for v in t.iter_mut() {
                *v *= c as f64 / sum;
            }
            // Clip anything above 1 and redistribute onto the rest.
            for _ in 0..64 {
                let excess: f64 = t.iter().map(|&v| (v - 1.0).max(0.0)).sum();
                if excess <= 0.0 {
                    break;
                }
                let headroom: f64 = t.iter().map(|&v| if v < 1.0 { 1.0 - v } else { 0.0 }).sum();
                for v in t.iter_mut() {
                    if *v > 1.0 {
                        *v = 1.0;
                    } else {
                        *v += excess * (1.0 - *v) / headroom;
                    }
                }
            }
            let dist = CachingDistribution::new(t, c).unwrap();
            for _ in 0..20 {
                let s = sample_cache(&dist, &mut rng);
                prop_assert_eq!(s.len(), c);
                let mut uniq = s.clone();
                uniq.sort_unstable();
                uniq.dedup();
                prop_assert_eq!(uniq.len(), c);
            }
        }
    }
}
