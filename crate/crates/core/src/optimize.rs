//! Caching-distribution and DoF-allocation optimizers.
//!
//! MRC: the closed-form STP upper bound is a difference of convex functions
//! in `T`; CCCP linearizes the concave part and each convex subproblem is
//! solved exactly by its KKT conditions (per-coordinate root + multiplier
//! bisection). The low-threshold outage optimum has the closed form
//! `T_n = min{√(a_n/ν₀), 1}`.
//!
//! PZF: the bound objective is separable and concave increasing in `T` for
//! fixed `K` (solved by the same KKT/bisection machinery, no external solver
//! needed) and decouples over files for fixed `T` (per-file argmax over K),
//! so the mixed problem is attacked by alternating the two exact block
//! solves. An exhaustive-search oracle over all `M^N` allocations provides
//! the reference optimum at small sizes.

use thiserror::Error;

use crate::model::{CachingDistribution, DofAllocation, ModelError, NetworkParams, Popularity};
use crate::mrc::{self, AnalysisError};
use crate::numerics;
use crate::pzf::{r_table, RTable};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bisection bracket failure on [{lo}, {hi}]: residual {residual}")]
    BracketFailure { lo: f64, hi: f64, residual: f64 },
    #[error("iteration cap {cap} reached without convergence")]
    IterationCap { cap: usize },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Feasibility target on `ΣT = C` for all solvers here.
const SUM_TOL: f64 = 1e-9;

/// CCCP run record: iterates (starting from the uniform initialization),
/// their objectives, and the subproblem multipliers.
#[derive(Debug, Clone)]
pub struct CccpTrace {
    pub iterates: Vec<CachingDistribution>,
    pub objectives: Vec<f64>,
    /// Multiplier of the subproblem that produced `iterates[i+1]`.
    pub multipliers: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl CccpTrace {
    pub fn final_t(&self) -> &CachingDistribution {
        self.iterates.last().expect("non-empty trace")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("non-empty trace")
    }
}

/// Alternating-optimizer result. `continuous_solves` counts the KKT solves
/// (the dominant cost); `trace` records one `(K, T, objective)` per
/// iteration.
#[derive(Debug, Clone)]
pub struct PzfSolution {
    pub k: DofAllocation,
    pub t: CachingDistribution,
    pub objective: f64,
    pub iterations: usize,
    pub continuous_solves: usize,
    pub trace: Vec<(DofAllocation, CachingDistribution, f64)>,
}

/// The two decreasing functions whose difference is the derivative of the
/// per-file MRC upper bound: `f_o` collects the odd binomial terms, `f_e`
/// the even ones (the i = 0 term is constant in `T`, so it contributes
/// nothing to `f_e`).
pub fn dc_split_derivatives(
    x: f64,
    m: usize,
    params: &NetworkParams,
) -> Result<(f64, f64), OptimizeError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(OptimizeError::Domain(format!("storage probability {x} outside [0, 1]")));
    }
    let s_m = numerics::s_const(m as f64).map_err(AnalysisError::from)?;
    let term = |k: usize| -> Result<f64, OptimizeError> {
        let (c1, c2) = mrc::c_coeffs(k, s_m, params)?;
        Ok(c2 / (c1 * x + c2).powi(2))
    };
    let mut f_o = 0.0;
    let mut k = 1;
    while k <= m {
        f_o += numerics::binomial(m, k) * term(k)?;
        k += 2;
    }
    let mut f_e = 0.0;
    let mut k = 2;
    while k <= m {
        f_e += numerics::binomial(m, k) * term(k)?;
        k += 2;
    }
    Ok((f_o, f_e))
}

/// Root of a strictly decreasing function on [0, 1] by bisection; `g(0) > 0`
/// and `g(1) < 0` are the caller's responsibility.
fn bisect_unit_interval<G: Fn(f64) -> f64>(g: G) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One CCCP step: solves the convex subproblem obtained by linearizing the
/// even part at `t_prev`. Returns the new iterate and the multiplier `v`.
pub fn cccp_subproblem(
    t_prev: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<(CachingDistribution, f64), OptimizeError> {
    if t_prev.n() != pop.n() {
        return Err(OptimizeError::Domain(format!(
            "caching distribution has {} files but popularity has {}",
            t_prev.n(),
            pop.n()
        )));
    }
    let m = params.m;
    let c = t_prev.cache_size();
    let a = pop.probs();
    let fe_prev: Vec<f64> = t_prev
        .probs()
        .iter()
        .map(|&t| dc_split_derivatives(t, m, params).map(|(_, fe)| fe))
        .collect::<Result<_, _>>()?;
    let fo_at = |x: f64| dc_split_derivatives(x, m, params).map(|(fo, _)| fo);
    let fo0 = fo_at(0.0)?;
    let fo1 = fo_at(1.0)?;
    let (_, fe0) = dc_split_derivatives(0.0, m, params)?;
    let (_, fe1) = dc_split_derivatives(1.0, m, params)?;

    let coords_at = |v: f64| -> Result<Vec<f64>, OptimizeError> {
        (0..pop.n())
            .map(|n| {
                // T_n = 0 when even f_o(0) cannot reach the linearized slope.
                if fo0 < fe_prev[n] + v / a[n] {
                    Ok(0.0)
                } else if fo1 > fe_prev[n] + v / a[n] {
                    Ok(1.0)
                } else {
                    let target = fe_prev[n] + v / a[n];
                    Ok(bisect_unit_interval(|x| fo_at(x).unwrap_or(f64::NAN) - target))
                }
            })
            .collect()
    };

    // ΣT(v) is continuous and decreasing; the bracket covers both threshold
    // cases by monotonicity of f_o and f_e.
    let mut lo = a.iter().map(|&an| an * (fo1 - fe0)).fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = a.iter().map(|&an| an * (fo0 - fe1)).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let sum_at = |coords: &[f64]| coords.iter().sum::<f64>();
    let sum_lo = sum_at(&coords_at(lo)?);
    let sum_hi = sum_at(&coords_at(hi)?);
    if sum_lo < c as f64 - SUM_TOL || sum_hi > c as f64 + SUM_TOL {
        return Err(OptimizeError::BracketFailure {
            lo,
            hi,
            residual: (sum_lo - c as f64).abs().min((sum_hi - c as f64).abs()),
        });
    }

    let mut coords = Vec::new();
    let mut v = 0.0;
    for _ in 0..200 {
        v = 0.5 * (lo + hi);
        coords = coords_at(v)?;
        let s = sum_at(&coords);
        if (s - c as f64).abs() <= SUM_TOL {
            break;
        }
        if s > c as f64 {
            lo = v;
        } else {
            hi = v;
        }
    }
    let residual = (sum_at(&coords) - c as f64).abs();
    if residual > SUM_TOL {
        return Err(OptimizeError::BracketFailure { lo, hi, residual });
    }
    Ok((CachingDistribution::new(coords, c)?, v))
}

fn mrc_upper_objective(
    t: &CachingDistribution,
    pop: &Popularity,
    params: &NetworkParams,
) -> Result<f64, OptimizeError> {
    Ok(mrc::stp_mrc_bounds(t, pop, params)?.0.value)
}

/// CCCP ascent on the MRC upper bound from the uniform initialization
/// `T_n = C/N`; stops when the objective improves by less than `epsilon`.
pub fn cccp(
    pop: &Popularity,
    params: &NetworkParams,
    cache_size: usize,
    epsilon: f64,
    max_iterations: usize,
) -> Result<CccpTrace, OptimizeError> {
    let n = pop.n();
    let t0 = CachingDistribution::new(vec![cache_size as f64 / n as f64; n], cache_size)?;
    let mut iterates = vec![t0];
    let mut objectives = vec![mrc_upper_objective(&iterates[0], pop, params)?];
    let mut multipliers = Vec::new();
    let mut converged = false;
    for _ in 0..max_iterations {
        let (next, v) = cccp_subproblem(iterates.last().unwrap(), pop, params)?;
        let obj = mrc_upper_objective(&next, pop, params)?;
        iterates.push(next);
        objectives.push(obj);
        multipliers.push(v);
        let improvement = obj - objectives[objectives.len() - 2];
        if improvement < epsilon {
            converged = true;
            break;
        }
    }
    let iterations = multipliers.len();
    Ok(CccpTrace { iterates, objectives, multipliers, converged, iterations })
}

/// Closed-form minimizer of the low-threshold outage:
/// `T_n = min{√(a_n/ν₀), 1}` with `ν₀` from bisection on the cache budget.
/// Independent of the antenna count.
pub fn optimize_mrc_asymptotic(
    pop: &Popularity,
    cache_size: usize,
) -> Result<CachingDistribution, OptimizeError> {
    let n = pop.n();
    if cache_size < 1 || cache_size >= n {
        return Err(OptimizeError::Domain(format!(
            "cache size {cache_size} outside [1, {}]",
            n - 1
        )));
    }
    let a = pop.probs();
    let coords = |nu: f64| -> Vec<f64> {
        a.iter().map(|&an| (an / nu).sqrt().min(1.0)).collect()
    };
    let residual = |nu: f64| coords(nu).iter().sum::<f64>() - cache_size as f64;
    let mut lo = a.iter().copied().fold(f64::INFINITY, f64::min); // all clipped to 1
    let sqrt_sum: f64 = a.iter().map(|&an| an.sqrt()).sum();
    let mut hi = (sqrt_sum / cache_size as f64).powi(2) * 1.0001;
    debug_assert!(residual(lo) >= 0.0 && residual(hi) <= 0.0);
    let mut nu = lo;
    for _ in 0..300 {
        nu = 0.5 * (lo + hi);
        let r = residual(nu);
        if r.abs() <= SUM_TOL * 1e-2 {
            break;
        }
        if r > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    let r = residual(nu).abs();
    if r > SUM_TOL {
        return Err(OptimizeError::BracketFailure { lo, hi, residual: r });
    }
    Ok(CachingDistribution::new(coords(nu), cache_size)?)
}

/// Weighted separable-concave KKT solve shared by [`pzf_continuous`]; the
/// result is invariant to rescaling all weights by a positive constant.
pub(crate) fn pzf_continuous_weighted(
    k: &DofAllocation,
    weights: &[f64],
    table: &RTable,
    cache_size: usize,
) -> Result<CachingDistribution, OptimizeError> {
    let n = weights.len();
    if k.n() != n {
        return Err(OptimizeError::Domain(format!(
            "DoF allocation covers {} files, weights {}",
            k.n(),
            n
        )));
    }
    let phi = |i: usize, t: f64| weights[i] * table.per_file_upper_derivative(k.per_file()[i], t);
    let coords = |mu: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if phi(i, 1.0) >= mu {
                    1.0
                } else if phi(i, 0.0) <= mu {
                    0.0
                } else {
                    bisect_unit_interval(|t| phi(i, t) - mu)
                }
            })
            .collect()
    };
    let target = cache_size as f64;
    let mut lo = 0.0f64; // every derivative is positive at T = 1, so ΣT = N
    let mut hi = (0..n).map(|i| phi(i, 0.0)).fold(0.0, f64::max) + 1.0;
    let mut best = coords(lo);
    if (best.iter().sum::<f64>() - target).abs() > SUM_TOL {
        for _ in 0..300 {
            let mu = 0.5 * (lo + hi);
            let t = coords(mu);
            let s: f64 = t.iter().sum();
            if (s - target).abs() <= SUM_TOL {
                best = t;
                break;
            }
            if s > target {
                lo = mu;
            } else {
                hi = mu;
            }
            best = t;
        }
    }
    let mut sum: f64 = best.iter().sum();
    if (sum - target).abs() > SUM_TOL {
        // Flat-derivative coordinates (possible at L ≤ 2 where the per-file
        // bound is linear in T) make ΣT(μ) jump; any split among them is
        // optimal, so interpolate between the bracket endpoints.
        let t_lo = coords(lo);
        let t_hi = coords(hi);
        let (s_lo, s_hi) = (t_lo.iter().sum::<f64>(), t_hi.iter().sum::<f64>());
        if s_hi <= target + SUM_TOL && s_lo >= target - SUM_TOL && s_lo > s_hi {
            let theta = (target - s_hi) / (s_lo - s_hi);
            best = t_lo
                .iter()
                .zip(&t_hi)
                .map(|(&a, &b)| b + theta * (a - b))
                .collect();
            sum = best.iter().sum();
        }
        if (sum - target).abs() > SUM_TOL {
            return Err(OptimizeError::BracketFailure { lo, hi, residual: (sum - target).abs() });
        }
    }
    Ok(CachingDistribution::new(best, cache_size)?)
}

/// Exact maximizer of the PZF bound over the caching distribution for a
/// fixed DoF allocation: the objective is separable with each per-file term
/// concave increasing, so the KKT system reduces to per-coordinate roots of
/// a monotone polynomial derivative plus one multiplier bisection.
pub fn pzf_continuous(
    k: &DofAllocation,
    pop: &Popularity,
    table: &RTable,
    cache_size: usize,
) -> Result<CachingDistribution, OptimizeError> {
    if pop.n() != k.n() {
        return Err(OptimizeError::Domain(format!(
            "DoF allocation covers {} files, popularity {}",
            k.n(),
            pop.n()
        )));
    }
    pzf_continuous_weighted(k, pop.probs(), table, cache_size)
}

/// Per-file argmax of the PZF bound over `K_n ∈ {1..M}` for a fixed caching
/// distribution (exactly N·M bound-term evaluations); ties break toward
/// larger `K_n`.
pub fn pzf_discrete(t: &CachingDistribution, pop: &Popularity, table: &RTable) -> DofAllocation {
    debug_assert_eq!(t.n(), pop.n());
    let dof = t
        .probs()
        .iter()
        .map(|&tn| {
            let mut best_k = 1;
            let mut best_v = f64::NEG_INFINITY;
            for k in 1..=table.m() {
                let v = table.per_file_upper(k, tn);
                if v >= best_v {
                    best_v = v;
                    best_k = k;
                }
            }
            best_k
        })
        .collect();
    DofAllocation::new(dof, table.m()).expect("k in 1..=M by construction")
}

fn upper_objective(table: &RTable, k: &DofAllocation, t: &CachingDistribution, pop: &Popularity) -> f64 {
    k.per_file()
        .iter()
        .zip(t.probs())
        .zip(pop.probs())
        .map(|((&kn, &tn), &an)| an * table.per_file_upper(kn, tn))
        .sum()
}

/// Alternating optimization with a precomputed table (shared with the
/// exhaustive oracle so the table is built once).
pub fn pzf_alternating_with_table(
    pop: &Popularity,
    table: &RTable,
    cache_size: usize,
) -> Result<PzfSolution, OptimizeError> {
    let n = pop.n();
    let m = table.m();
    let mut continuous_solves = 0usize;
    if m == 1 {
        // Single antenna forces K = 1; only the continuous block remains.
        let k = DofAllocation::uniform(n, 1, 1)?;
        let t = pzf_continuous(&k, pop, table, cache_size)?;
        continuous_solves += 1;
        let objective = upper_objective(table, &k, &t, pop);
        return Ok(PzfSolution {
            trace: vec![(k.clone(), t.clone(), objective)],
            k,
            t,
            objective,
            iterations: 1,
            continuous_solves,
        });
    }
    let mut k = DofAllocation::uniform(n, m - 1, m)?;
    let mut trace = Vec::new();
    for iteration in 1..=100 {
        let t = pzf_continuous(&k, pop, table, cache_size)?;
        continuous_solves += 1;
        let objective = upper_objective(table, &k, &t, pop);
        trace.push((k.clone(), t.clone(), objective));
        let next_k = pzf_discrete(&t, pop, table);
        if next_k == k {
            return Ok(PzfSolution {
                k,
                t,
                objective,
                iterations: iteration,
                continuous_solves,
                trace,
            });
        }
        k = next_k;
    }
    Err(OptimizeError::IterationCap { cap: 100 })
}

/// Near-optimal joint `(K, T)` by alternating the exact continuous and
/// discrete block maximizations from `K_n = M - 1`, until the allocation
/// repeats. Each half-step is an exact block maximization, so the objective
/// never decreases and the loop terminates in finitely many iterations.
pub fn pzf_alternating(
    pop: &Popularity,
    params: &NetworkParams,
    cache_size: usize,
    l: usize,
) -> Result<PzfSolution, OptimizeError> {
    let table = r_table(params, l)?;
    pzf_alternating_with_table(pop, &table, cache_size)
}

/// Exhaustive oracle with a precomputed table.
pub fn exhaustive_pzf_with_table(
    pop: &Popularity,
    table: &RTable,
    cache_size: usize,
) -> Result<PzfSolution, OptimizeError> {
    let n = pop.n();
    let m = table.m();
    let total = (m as u64).checked_pow(n as u32).filter(|&t| t <= 100_000).ok_or_else(|| {
        OptimizeError::InstanceTooLarge(format!("{m}^{n} allocations exceed the 1e5 guard"))
    })?;
    let mut digits = vec![1usize; n];
    let mut best: Option<PzfSolution> = None;
    for _ in 0..total {
        let k = DofAllocation::new(digits.clone(), m)?;
        let t = pzf_continuous_weighted(&k, pop.probs(), table, cache_size)?;
        let objective = upper_objective(table, &k, &t, pop);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(PzfSolution {
                trace: vec![(k.clone(), t.clone(), objective)],
                k,
                t,
                objective,
                iterations: total as usize,
                continuous_solves: total as usize,
            });
        }
        // Odometer over {1..M}^N.
        for d in digits.iter_mut() {
            if *d < m {
                *d += 1;
                break;
            }
            *d = 1;
        }
    }
    best.ok_or_else(|| OptimizeError::Domain("empty allocation space".into()))
}

/// Brute-force optimum over all `M^N` DoF allocations (guarded to 1e5
/// instances), solving the continuous subproblem for each.
pub fn exhaustive_pzf(
    pop: &Popularity,
    params: &NetworkParams,
    cache_size: usize,
    l: usize,
) -> Result<PzfSolution, OptimizeError> {
    let table = r_table(params, l)?;
    exhaustive_pzf_with_table(pop, &table, cache_size)
}
