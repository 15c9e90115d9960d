//! Bundled figure presets: each id maps to a fixed scenario whose curve
//! data the tool regenerates; `desk` scale shrinks the catalogue to
//! N = 20 and Monte Carlo batches to 1e4 trials for CI-friendly runtimes.
//! Every emitted CSV follows the `sweep_value,<value>,error,kind` schema.

use std::path::{Path, PathBuf};

use cache_simo::model::{
    baseline, BaselineKind, CacheSampler, CachingDistribution, DofAllocation, NetworkParams,
    Popularity,
};
use cache_simo::montecarlo::{estimate_stp, Receiver, SimConfig};
use cache_simo::mrc::{outage_asymptotic, stp_mrc_bounds, stp_mrc_exact};
use cache_simo::optimize;
use cache_simo::pzf::{stp_pzf_exact, stp_pzf_upper};

use crate::runner::table_for;

use crate::config::db_to_linear;
use crate::runner::{ensure_dir, write_csv, write_sidecar, Row};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Paper,
    Desk,
}

pub const FIGURE_IDS: [&str; 10] = ["2", "3", "4", "5", "6", "7", "8a", "8b", "8c", "8d"];

struct FigureContext {
    dir: PathBuf,
    scale: Scale,
    seed: u64,
    files: Vec<String>,
}

impl FigureContext {
    fn trials(&self) -> usize {
        match self.scale {
            Scale::Paper => 100_000,
            Scale::Desk => 10_000,
        }
    }

    fn emit(&mut self, name: &str, value_column: &str, rows: &[Row]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{name}.csv"));
        write_csv(&path, value_column, rows)?;
        self.files.push(path.display().to_string());
        Ok(())
    }
}

pub fn run_figure(id: &str, scale: Scale, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let mut ctx = FigureContext { dir: out_dir.to_path_buf(), scale, seed, files: Vec::new() };
    ensure_dir(out_dir)?;
    match id {
        "2" => figure2(&mut ctx)?,
        "3" => figure3(&mut ctx)?,
        "4" => figure4(&mut ctx)?,
        "5" => figure5(&mut ctx)?,
        "6" => figure6(&mut ctx)?,
        "7" => figure7(&mut ctx)?,
        "8a" | "8b" | "8c" | "8d" => figure8(&mut ctx, id)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown figure id `{other}`; expected one of {FIGURE_IDS:?}"
            )))
        }
    }
    let sidecar = out_dir.join(format!("figure{id}.config.json"));
    let manifest = serde_json::json!({
        "figure": id,
        "scale": if scale == Scale::Paper { "paper" } else { "desk" },
        "seed": seed,
        "monte_carlo_trials": ctx.trials(),
        "outputs": ctx.files,
        "note": if scale == Scale::Desk {
            "desk scale substitutes N=20 and 1e4 Monte Carlo trials where applicable"
        } else {
            "full-scale preset parameters"
        },
        "units": "helper density per square meter equivalent; length unit arbitrary",
    });
    write_sidecar(&sidecar, &format!("figure {id}"), &manifest)?;
    println!("figure {id}: wrote {} file(s) into {}", ctx.files.len() + 1, out_dir.display());
    Ok(())
}

fn fig_t5() -> CachingDistribution {
    CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap()
}

/// STP with the MRC receiver vs τ at M ∈ {1, 2, 4}:
/// N=5, C=3, α=4, λ=1e-3, T=(1,.8,.6,.4,.2), Zipf γ=1.
fn figure2(ctx: &mut FigureContext) -> Result<(), CliError> {
    let t = fig_t5();
    let pop = Popularity::zipf(5, 1.0).unwrap();
    let sampler = CacheSampler::Madow(t.clone());
    for &m in &[1usize, 2, 4] {
        let mut rows = Vec::new();
        for db in (-10..=10).step_by(2) {
            let tau = db_to_linear(db as f64);
            let params = NetworkParams::new(1e-3, 4.0, tau, m)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let exact = stp_mrc_exact(&t, &pop, &params)?;
            let (u, l) = stp_mrc_bounds(&t, &pop, &params)?;
            let cfg = SimConfig {
                trials: ctx.trials(),
                seed: ctx.seed + m as u64,
                region_radius: None,
                lanes: None,
            };
            let mc = estimate_stp(&Receiver::Mrc, &sampler, &pop, &params, &cfg)?;
            for (est, kind) in
                [(exact, "exact"), (u, "upper_bound"), (l, "lower_bound"), (mc, "monte_carlo")]
            {
                rows.push(Row {
                    sweep_value: db as f64,
                    value: est.value,
                    error: est.error,
                    kind: kind.into(),
                });
            }
        }
        ctx.emit(&format!("figure2_m{m}"), "stp", &rows)?;
    }
    Ok(())
}

/// Outage probability vs τ in the low-threshold regime (general vs
/// asymptotic) at M ∈ {2, 4}; same scenario as figure 2.
fn figure3(ctx: &mut FigureContext) -> Result<(), CliError> {
    let t = fig_t5();
    let pop = Popularity::zipf(5, 1.0).unwrap();
    for &m in &[2usize, 4] {
        let mut rows = Vec::new();
        for db in (-40..=-10).step_by(5) {
            let tau = db_to_linear(db as f64);
            let params = NetworkParams::new(1e-3, 4.0, tau, m)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let exact = stp_mrc_exact(&t, &pop, &params)?;
            rows.push(Row {
                sweep_value: db as f64,
                value: 1.0 - exact.value,
                error: exact.error,
                kind: "general".into(),
            });
            let asym = outage_asymptotic(&t, &pop, &params)?;
            rows.push(Row {
                sweep_value: db as f64,
                value: asym.value_at_tau,
                error: 0.0,
                kind: "asymptotic".into(),
            });
        }
        ctx.emit(&format!("figure3_m{m}"), "outage", &rows)?;
    }
    Ok(())
}

/// Optimized caching probability T†_n vs file index at M ∈ {1, 2, 4, 8}:
/// N=5, C=2, α=4, τ=0.5, λ=1e-3, γ=0.4.
fn figure4(ctx: &mut FigureContext) -> Result<(), CliError> {
    let pop = Popularity::zipf(5, 0.4).unwrap();
    let mut rows = Vec::new();
    for &m in &[1usize, 2, 4, 8] {
        let params =
            NetworkParams::new(1e-3, 4.0, 0.5, m).map_err(|e| CliError::Config(e.to_string()))?;
        let trace = optimize::cccp(&pop, &params, 2, 1e-4, 500)?;
        for (i, &tn) in trace.final_t().probs().iter().enumerate() {
            rows.push(Row {
                sweep_value: (i + 1) as f64,
                value: tn,
                error: 0.0,
                kind: format!("cccp_m{m}"),
            });
        }
    }
    ctx.emit("figure4", "t_n", &rows)?;
    Ok(())
}

/// Outage at the CCCP point vs at the closed-form low-threshold optimum, over
/// τ, at γ ∈ {0.6, 1}: N=5, C=3, M=4, α=4, λ=1e-3. The CCCP tolerance is
/// tightened to resolve outage-scale objective differences at small τ.
fn figure5(ctx: &mut FigureContext) -> Result<(), CliError> {
    for (label, gamma) in [("06", 0.6), ("10", 1.0)] {
        let pop = Popularity::zipf(5, gamma).unwrap();
        let t_asym = optimize::optimize_mrc_asymptotic(&pop, 3)?;
        let mut rows = Vec::new();
        for db in (-40..=-10).step_by(5) {
            let tau = db_to_linear(db as f64);
            let params = NetworkParams::new(1e-3, 4.0, tau, 4)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let trace = optimize::cccp(&pop, &params, 3, 1e-8, 500)?;
            let general = 1.0 - stp_mrc_exact(trace.final_t(), &pop, &params)?.value;
            let asym = 1.0 - stp_mrc_exact(&t_asym, &pop, &params)?.value;
            rows.push(Row {
                sweep_value: db as f64,
                value: general,
                error: 0.0,
                kind: "general_optimum".into(),
            });
            rows.push(Row {
                sweep_value: db as f64,
                value: asym,
                error: 0.0,
                kind: "asymptotic_optimum".into(),
            });
        }
        ctx.emit(&format!("figure5_gamma{label}"), "outage", &rows)?;
    }
    Ok(())
}

/// STP with the PZF receiver vs τ at (M, K) ∈ {(2,1), (4,1), (4,2), (4,4)}:
/// N=5, C=3, α=4, λ=1e-3, L=3, T=(1,.8,.6,.4,.2), γ=1.
fn figure6(ctx: &mut FigureContext) -> Result<(), CliError> {
    let t = fig_t5();
    let pop = Popularity::zipf(5, 1.0).unwrap();
    let sampler = CacheSampler::Madow(t.clone());
    for &(m, k_uni) in &[(2usize, 1usize), (4, 1), (4, 2), (4, 4)] {
        let k = DofAllocation::uniform(5, k_uni, m).map_err(|e| CliError::Config(e.to_string()))?;
        let mut rows = Vec::new();
        for db in (-10..=10).step_by(5) {
            let tau = db_to_linear(db as f64);
            let params = NetworkParams::new(1e-3, 4.0, tau, m)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let exact = stp_pzf_exact(&k, &t, &pop, &params)?;
            let table = table_for(&params, 3, &ctx.dir.join("rtables"))?;
            let upper = stp_pzf_upper(&k, &t, &pop, &table)?;
            let cfg = SimConfig {
                trials: ctx.trials(),
                seed: ctx.seed + (10 * m + k_uni) as u64,
                region_radius: None,
                lanes: None,
            };
            let mc = estimate_stp(&Receiver::Pzf(k.clone()), &sampler, &pop, &params, &cfg)?;
            for (est, kind) in [(exact, "exact"), (upper, "upper_bound"), (mc, "monte_carlo")] {
                rows.push(Row {
                    sweep_value: db as f64,
                    value: est.value,
                    error: est.error,
                    kind: kind.into(),
                });
            }
        }
        ctx.emit(&format!("figure6_m{m}_k{k_uni}"), "stp", &rows)?;
    }
    Ok(())
}

/// Near-optimal (alternating) vs optimal (exhaustive) PZF design vs τ:
/// N=5, C=3, α=4, λ=1e-3, M=4, L=3, γ=1. Emits both the optimized bound
/// objectives and the exact STPs of the two solutions.
fn figure7(ctx: &mut FigureContext) -> Result<(), CliError> {
    let pop = Popularity::zipf(5, 1.0).unwrap();
    let mut rows = Vec::new();
    for db in (-10..=10).step_by(5) {
        let tau = db_to_linear(db as f64);
        let params =
            NetworkParams::new(1e-3, 4.0, tau, 4).map_err(|e| CliError::Config(e.to_string()))?;
        let table = table_for(&params, 3, &ctx.dir.join("rtables"))?;
        let alt = optimize::pzf_alternating_with_table(&pop, &table, 3)?;
        let exh = optimize::exhaustive_pzf_with_table(&pop, &table, 3)?;
        let alt_exact = stp_pzf_exact(&alt.k, &alt.t, &pop, &params)?;
        let exh_exact = stp_pzf_exact(&exh.k, &exh.t, &pop, &params)?;
        for (value, error, kind) in [
            (alt_exact.value, alt_exact.error, "near_optimal"),
            (exh_exact.value, exh_exact.error, "optimal"),
            (alt.objective, 0.0, "near_optimal_bound"),
            (exh.objective, 0.0, "optimal_bound"),
        ] {
            rows.push(Row { sweep_value: db as f64, value, error, kind: kind.into() });
        }
    }
    ctx.emit("figure7", "stp", &rows)?;
    Ok(())
}

/// Five-scheme comparison (optimized PZF, optimized MRC, three baselines) vs
/// M, C, α or γ at τ=1, λ=1e-3. Paper scale: N=100, C=30; desk scale: N=20,
/// C=6.
fn figure8(ctx: &mut FigureContext, id: &str) -> Result<(), CliError> {
    let (n, c_base) = match ctx.scale {
        Scale::Paper => (100usize, 30usize),
        Scale::Desk => (20, 6),
    };
    let (grid, label): (Vec<f64>, &str) = match (id, ctx.scale) {
        ("8a", Scale::Paper) => ((1..=8).map(|m| m as f64).collect(), "m"),
        ("8a", Scale::Desk) => (vec![1.0, 2.0, 4.0, 6.0], "m"),
        ("8b", Scale::Paper) => (vec![10.0, 30.0, 50.0, 70.0, 90.0], "c"),
        ("8b", Scale::Desk) => (vec![2.0, 6.0, 10.0], "c"),
        ("8c", _) => (vec![3.0, 3.5, 4.0, 4.5, 5.0], "alpha"),
        ("8d", _) => (vec![0.2, 0.6, 1.0, 1.4], "gamma"),
        _ => unreachable!(),
    };
    let mut rows = Vec::new();
    for &g in &grid {
        let m = if label == "m" { g as usize } else { 6 };
        let c = if label == "c" { g as usize } else { c_base };
        let alpha = if label == "alpha" { g } else { 4.0 };
        let gamma = if label == "gamma" { g } else { 0.6 };
        let pop = Popularity::zipf(n, gamma).map_err(|e| CliError::Config(e.to_string()))?;
        let params =
            NetworkParams::new(1e-3, alpha, 1.0, m).map_err(|e| CliError::Config(e.to_string()))?;

        let table = table_for(&params, 3, &ctx.dir.join("rtables"))?;
        let sol = optimize::pzf_alternating_with_table(&pop, &table, c)?;
        let pzf = stp_pzf_exact(&sol.k, &sol.t, &pop, &params)?;
        rows.push(Row { sweep_value: g, value: pzf.value, error: pzf.error, kind: "opt_pzf".into() });

        let trace = optimize::cccp(&pop, &params, c, 1e-4, 500)?;
        let mrc = stp_mrc_exact(trace.final_t(), &pop, &params)?;
        rows.push(Row { sweep_value: g, value: mrc.value, error: mrc.error, kind: "opt_mrc".into() });

        for (name, kind) in [
            ("most_popular", BaselineKind::MostPopular),
            ("iid_popularity", BaselineKind::IidPopularity),
            ("uniform", BaselineKind::Uniform),
        ] {
            let t = baseline(kind, &pop, c).map_err(|e| CliError::Config(e.to_string()))?;
            let est = stp_mrc_exact(&t, &pop, &params)?;
            rows.push(Row { sweep_value: g, value: est.value, error: est.error, kind: name.into() });
        }
    }
    ctx.emit(&format!("figure{id}"), "stp", &rows)?;
    Ok(())
}
