//! Ground-truth network simulator: Poisson helper fields, random caches,
//! Rayleigh SIMO channels, content-centric association, explicit MRC/PZF
//! receive filters, and STP estimation with confidence intervals.
//!
//! Every trial derives its own RNG substream from `(seed, trial index)`, so
//! results are bit-identical regardless of how trials are distributed over
//! threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{CacheSampler, DofAllocation, NetworkParams, Popularity};
use crate::mrc::{EstimateKind, StpEstimate};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("file {file} has positive storage probability but no cacher appeared after {retries} region enlargements")]
    RegionSizingFailed { file: usize, retries: u32 },
    #[error("realization has {have} helpers but PZF cancellation of {need} requires more")]
    TooFewHelpers { have: usize, need: usize },
    #[error("PZF cancellation residual {leak:e} exceeds 1e-10 of the signal power")]
    CancellationResidual { leak: f64 },
    #[error("no helper in the realization caches file {file}")]
    NoCacher { file: usize },
    #[error("DoF allocation covers {have} files, expected {need}")]
    DofLengthMismatch { have: usize, need: usize },
}

/// Simulation controls. `region_radius: None` selects the automatic rule
/// sized so both association truncation and interference truncation stay
/// below estimator noise; `lanes: None` uses the global thread pool.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    pub region_radius: Option<f64>,
    pub lanes: Option<usize>,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self { trials, seed, region_radius: None, lanes: None }
    }
}

/// Receive filter under test.
#[derive(Debug, Clone)]
pub enum Receiver {
    Mrc,
    Pzf(DofAllocation),
}

/// One draw of the network: helper positions sorted by distance from the
/// typical user at the origin, per-helper cache contents, and per-helper
/// channel vectors (i.i.d. standard complex Gaussian entries).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    m: usize,
    distances: Vec<f64>,
    positions: Vec<[f64; 2]>,
    caches: Vec<Vec<usize>>,
    channels: Vec<Complex64>,
}

impl NetworkRealization {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn caches(&self) -> &[Vec<usize>] {
        &self.caches
    }

    /// Channel vector of helper `i` (length M).
    pub fn channel(&self, i: usize) -> &[Complex64] {
        &self.channels[i * self.m..(i + 1) * self.m]
    }

    /// Index of the nearest helper storing file `n`, if any.
    pub fn nearest_cacher(&self, n: usize) -> Option<usize> {
        self.caches.iter().position(|c| c.contains(&n))
    }
}

/// Default disk radius: large enough that the nearest cacher of the rarest
/// positive-probability file lies inside with probability 1 - 1e-6, unioned
/// with a radius holding at least 500 expected helpers (interference
/// truncation).
pub fn default_region_radius(params: &NetworkParams, sampler: &CacheSampler) -> f64 {
    let t_min = sampler.min_positive_marginal().unwrap_or(1.0);
    let assoc = ((1e6f64).ln() / (std::f64::consts::PI * params.lambda_h * t_min)).sqrt();
    let interference = (500.0 / (std::f64::consts::PI * params.lambda_h)).sqrt();
    assoc.max(interference)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_add(1));
    rng
}

fn sample_gaussian_channel(m: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    // CN(0,1): real and imaginary parts each N(0, 1/2).
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..m)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

fn realize_with_rng(
    params: &NetworkParams,
    sampler: &CacheSampler,
    radius: f64,
    rng: &mut ChaCha12Rng,
) -> NetworkRealization {
    let mean = params.lambda_h * std::f64::consts::PI * radius * radius;
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;

    let mut pts: Vec<(f64, [f64; 2])> = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let r = radius * u.sqrt();
            let theta = 2.0 * std::f64::consts::PI * v;
            (r, [r * theta.cos(), r * theta.sin()])
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let distances: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let positions: Vec<[f64; 2]> = pts.iter().map(|p| p.1).collect();
    // Caches and channels drawn in sorted order so the realization depends
    // only on (seed, trial), not on intermediate orderings.
    let caches: Vec<Vec<usize>> = (0..count).map(|_| sampler.sample(rng)).collect();
    let mut channels = Vec::with_capacity(count * params.m);
    for _ in 0..count {
        channels.extend(sample_gaussian_channel(params.m, rng));
    }
    NetworkRealization { m: params.m, distances, positions, caches, channels }
}

/// Draws the network realization for a given trial: Poisson helper count on a
/// disk, uniform positions, caches from the sampler, fresh channels. Fully
/// determined by `(cfg.seed, trial)`.
pub fn realize(
    params: &NetworkParams,
    sampler: &CacheSampler,
    cfg: &SimConfig,
    trial: u64,
) -> NetworkRealization {
    let radius = cfg.region_radius.unwrap_or_else(|| default_region_radius(params, sampler));
    let mut rng = trial_rng(cfg.seed, trial);
    realize_with_rng(params, sampler, radius, &mut rng)
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// SIR of the typical user requesting file `n` under the MRC filter
/// `w = h/‖h‖` on the direct link. Returns `+∞` when the realization carries
/// no interferer at all (empty interference sum).
pub fn sir_mrc(r: &NetworkRealization, n: usize, params: &NetworkParams) -> Result<f64, SimError> {
    let serving = r.nearest_cacher(n).ok_or(SimError::NoCacher { file: n })?;
    let h_s = r.channel(serving);
    let signal_fading = norm_sq(h_s);
    let mut interference = 0.0;
    for i in 0..r.len() {
        if i == serving {
            continue;
        }
        let cross = inner(h_s, r.channel(i)).norm_sqr() / signal_fading;
        interference += cross * r.distances[i].powf(-params.alpha);
    }
    if interference == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal_fading * r.distances[serving].powf(-params.alpha) / interference)
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
fn orthonormal_basis(vectors: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(vectors.len());
    for &v in vectors {
        let mut w: Vec<Complex64> = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let norm = norm_sq(&w).sqrt();
        if norm > 1e-12 {
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            basis.push(w);
        }
    }
    basis
}

/// SIR of the typical user requesting file `n` under the PZF filter with
/// `k_n` signal-boost DoF: the `M - k_n` nearest interfering helpers are
/// canceled exactly (their contribution is zero by construction).
pub fn sir_pzf(
    r: &NetworkRealization,
    n: usize,
    k_n: usize,
    params: &NetworkParams,
) -> Result<f64, SimError> {
    let serving = r.nearest_cacher(n).ok_or(SimError::NoCacher { file: n })?;
    let cancel_count = params.m - k_n;
    if cancel_count == 0 {
        // K_n = M: nothing to cancel, identical to MRC.
        return sir_mrc(r, n, params);
    }
    if r.len() < cancel_count + 1 {
        return Err(SimError::TooFewHelpers { have: r.len(), need: cancel_count + 1 });
    }
    // The canceled set: the cancel_count nearest interfering helpers (the
    // serving helper, when it ranks among them, is skipped and the next
    // nearest helper is pulled in).
    let mut canceled: Vec<usize> = Vec::with_capacity(cancel_count);
    let mut idx = 0;
    while canceled.len() < cancel_count {
        if idx != serving {
            canceled.push(idx);
        }
        idx += 1;
    }

    let h_s = r.channel(serving);
    let cancel_channels: Vec<&[Complex64]> = canceled.iter().map(|&i| r.channel(i)).collect();
    let basis = orthonormal_basis(&cancel_channels);

    // Project the direct-link channel onto the orthogonal complement of the
    // canceled channels.
    let mut p: Vec<Complex64> = h_s.to_vec();
    for _ in 0..2 {
        for q in &basis {
            let c = inner(q, &p);
            for (pi, qi) in p.iter_mut().zip(q) {
                *pi -= c * qi;
            }
        }
    }
    let signal_fading = norm_sq(&p);

    let mut interference = 0.0;
    let mut leak = 0.0f64;
    for i in 0..r.len() {
        if i == serving {
            continue;
        }
        let cross = inner(&p, r.channel(i)).norm_sqr() / signal_fading;
        if canceled.contains(&i) {
            leak = leak.max(cross);
        } else {
            interference += cross * r.distances[i].powf(-params.alpha);
        }
    }
    if leak > 1e-10 * signal_fading {
        return Err(SimError::CancellationResidual { leak });
    }
    if interference == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal_fading * r.distances[serving].powf(-params.alpha) / interference)
}

/// Detailed simulation output; [`estimate_stp`] returns just the estimate.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub estimate: StpEstimate,
    pub per_file_requests: Vec<u64>,
    pub per_file_successes: Vec<u64>,
    /// Trials whose first realization held no cacher of the requested file
    /// and were re-drawn on an enlarged disk (never dropped).
    pub degenerate_retries: u64,
    /// Trials with an empty interference sum (SIR = +∞), excluded from the
    /// average.
    pub infinite_sir_trials: u64,
    pub region_radius: f64,
}

enum Outcome {
    Decided(bool),
    Infinite,
}

fn run_trial(
    receiver: &Receiver,
    sampler: &CacheSampler,
    pop: &Popularity,
    params: &NetworkParams,
    cfg: &SimConfig,
    base_radius: f64,
    trial: u64,
) -> Result<(usize, Outcome, u32), SimError> {
    let mut rng = trial_rng(cfg.seed, trial);
    let file = pop.sample(&mut rng);
    if sampler.marginal(file) <= 0.0 {
        // The requested file is stored nowhere; transmission cannot succeed.
        return Ok((file, Outcome::Decided(false), 0));
    }
    let mut radius = base_radius;
    let mut retries = 0u32;
    let realization = loop {
        let r = realize_with_rng(params, sampler, radius, &mut rng);
        if r.nearest_cacher(file).is_some() {
            break r;
        }
        retries += 1;
        if retries > 40 {
            return Err(SimError::RegionSizingFailed { file, retries });
        }
        radius *= 2.0;
    };
    let sir = match receiver {
        Receiver::Mrc => sir_mrc(&realization, file, params)?,
        Receiver::Pzf(k) => {
            if k.n() != pop.n() {
                return Err(SimError::DofLengthMismatch { have: k.n(), need: pop.n() });
            }
            sir_pzf(&realization, file, k.per_file()[file], params)?
        }
    };
    let outcome = if sir.is_infinite() {
        Outcome::Infinite
    } else {
        Outcome::Decided(sir >= params.tau)
    };
    Ok((file, outcome, retries))
}

/// Full Monte Carlo run with per-file conditional estimates and bookkeeping.
pub fn simulate(
    receiver: &Receiver,
    sampler: &CacheSampler,
    pop: &Popularity,
    params: &NetworkParams,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    let base_radius = cfg.region_radius.unwrap_or_else(|| default_region_radius(params, sampler));
    let body = || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(receiver, sampler, pop, params, cfg, base_radius, trial))
            .collect::<Result<Vec<_>, _>>()
    };
    let outcomes = match cfg.lanes {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(body),
        None => body(),
    }?;

    let n_files = pop.n();
    let mut requests = vec![0u64; n_files];
    let mut successes = vec![0u64; n_files];
    let mut infinite = 0u64;
    let mut retries = 0u64;
    let mut counted = 0u64;
    let mut won = 0u64;
    for (file, outcome, r) in outcomes {
        retries += r as u64;
        match outcome {
            Outcome::Decided(ok) => {
                requests[file] += 1;
                counted += 1;
                if ok {
                    successes[file] += 1;
                    won += 1;
                }
            }
            Outcome::Infinite => infinite += 1,
        }
    }

    let n_eff = counted.max(1) as f64;
    let p = won as f64 / n_eff;
    let half_width = 1.96 * (p * (1.0 - p) / n_eff).sqrt();
    let per_file: Vec<f64> = successes
        .iter()
        .zip(&requests)
        .map(|(&s, &r)| if r == 0 { f64::NAN } else { s as f64 / r as f64 })
        .collect();

    Ok(SimReport {
        estimate: StpEstimate {
            value: p,
            kind: EstimateKind::MonteCarlo,
            error: half_width,
            per_file: Some(per_file),
        },
        per_file_requests: requests,
        per_file_successes: successes,
        degenerate_retries: retries,
        infinite_sir_trials: infinite,
        region_radius: base_radius,
    })
}

/// Monte Carlo STP estimate: per trial, draw the requested file, realize the
/// network, apply the receive filter, and compare the SIR to the threshold.
/// The reported error is the 95% normal-approximation half-width.
pub fn estimate_stp(
    receiver: &Receiver,
    sampler: &CacheSampler,
    pop: &Popularity,
    params: &NetworkParams,
    cfg: &SimConfig,
) -> Result<StpEstimate, SimError> {
    Ok(simulate(receiver, sampler, pop, params, cfg)?.estimate)
}

/// Kolmogorov–Smirnov statistic of `samples` against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov–Smirnov p-value with Stephens' finite-sample
/// correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
