//! Sweep execution, optimizer commands, baseline reports, and the CSV/JSON
//! emission shared by every subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cache_simo::model::{baseline, BaselineKind, Popularity};
use cache_simo::montecarlo::{estimate_stp, Receiver, SimConfig};
use cache_simo::mrc::{stp_mrc_bounds, stp_mrc_exact};
use cache_simo::optimize;
use cache_simo::pzf::{r_table, stp_pzf_exact, stp_pzf_upper, RTable};

use crate::config::ExperimentConfig;
use crate::CliError;

/// One output row of a curve CSV.
pub struct Row {
    pub sweep_value: f64,
    pub value: f64,
    pub error: f64,
    pub kind: String,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Writes a curve CSV with the fixed schema `sweep_value,<value>,error,kind`.
pub fn write_csv(path: &Path, value_column: &str, rows: &[Row]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&format!("sweep_value,{value_column},error,kind\n"));
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.sweep_value, r.value, r.error, r.kind));
    }
    fs::write(path, out).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// JSON sidecar carrying the tool version and the fully resolved config;
/// feeding this file back as `--config` reproduces the run.
pub fn write_sidecar(
    path: &Path,
    command: &str,
    config: &impl serde::Serialize,
) -> Result<(), CliError> {
    let sidecar = serde_json::json!({
        "tool": { "name": "cache-simo", "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "config": config,
    });
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(&mut file, &sidecar)
        .map_err(|e| CliError::Config(format!("cannot serialize sidecar: {e}")))?;
    file.write_all(b"\n")
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Loads the conditional-bound table from the on-disk cache (keyed by
/// λ_h, α, τ, M, L) or computes and stores it.
pub fn table_for(
    params: &cache_simo::model::NetworkParams,
    l: usize,
    cache_dir: &Path,
) -> Result<RTable, CliError> {
    let key = format!(
        "rtable_m{}_l{l}_{:016x}{:016x}{:016x}.json",
        params.m,
        params.lambda_h.to_bits(),
        params.alpha.to_bits(),
        params.tau.to_bits()
    );
    let path = cache_dir.join(key);
    if let Ok(file) = fs::File::open(&path) {
        if let Ok(table) = RTable::from_reader(file) {
            if table.matches(params, l) {
                return Ok(table);
            }
        }
    }
    let table = r_table(params, l).map_err(CliError::from)?;
    ensure_dir(cache_dir)?;
    let file = fs::File::create(&path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    table
        .to_writer(file)
        .map_err(|e| CliError::Config(format!("cannot serialize table: {e}")))?;
    Ok(table)
}

/// Runs the sweep of an `analyze` or `simulate` command and returns the rows.
pub fn run_sweep(config: &ExperimentConfig, monte_carlo: bool) -> Result<Vec<Row>, CliError> {
    let cache_dir = PathBuf::from(&config.output.dir).join("rtables");
    let mut rows = Vec::new();
    for &value in &config.sweep.grid {
        let point = config.resolve_point(value)?;
        if monte_carlo || config.engine.kind == "monte_carlo" {
            let receiver = match &point.dof {
                Some(k) => Receiver::Pzf(k.clone()),
                None => Receiver::Mrc,
            };
            let cfg = SimConfig {
                trials: config.engine.trials,
                seed: config.engine.seed,
                region_radius: config.engine.region_radius,
                lanes: None,
            };
            let est = estimate_stp(&receiver, &point.sampler, &point.pop, &point.params, &cfg)
                .map_err(CliError::from)?;
            rows.push(Row {
                sweep_value: value,
                value: est.value,
                error: est.error,
                kind: est.kind.as_str().into(),
            });
            continue;
        }
        match &point.dof {
            None => {
                // MRC: exact plus closed-form bounds (bounds only under the
                // `bound` engine).
                if config.engine.kind == "analytic" {
                    let exact = stp_mrc_exact(&point.t, &point.pop, &point.params)
                        .map_err(CliError::from)?;
                    rows.push(Row {
                        sweep_value: value,
                        value: exact.value,
                        error: exact.error,
                        kind: "exact".into(),
                    });
                }
                let (u, l) = stp_mrc_bounds(&point.t, &point.pop, &point.params)
                    .map_err(CliError::from)?;
                rows.push(Row {
                    sweep_value: value,
                    value: u.value,
                    error: u.error,
                    kind: "upper_bound".into(),
                });
                rows.push(Row {
                    sweep_value: value,
                    value: l.value,
                    error: l.error,
                    kind: "lower_bound".into(),
                });
            }
            Some(k) => {
                let table = table_for(&point.params, point.l, &cache_dir)?;
                if config.engine.kind == "analytic" {
                    let exact = stp_pzf_exact(k, &point.t, &point.pop, &point.params)
                        .map_err(CliError::from)?;
                    rows.push(Row {
                        sweep_value: value,
                        value: exact.value,
                        error: exact.error,
                        kind: "exact".into(),
                    });
                }
                let upper =
                    stp_pzf_upper(k, &point.t, &point.pop, &table).map_err(CliError::from)?;
                rows.push(Row {
                    sweep_value: value,
                    value: upper.value,
                    error: upper.error,
                    kind: "upper_bound".into(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn output_paths(config: &ExperimentConfig) -> (PathBuf, PathBuf, PathBuf) {
    let dir = PathBuf::from(&config.output.dir);
    let csv = dir.join(format!("{}.csv", config.output.prefix));
    let sidecar = dir.join(format!("{}.config.json", config.output.prefix));
    (dir, csv, sidecar)
}

/// `analyze {mrc|pzf}` / `simulate`: evaluate the sweep and emit one CSV plus
/// the resolved-config sidecar.
pub fn cmd_run(config: &ExperimentConfig, command: &str, monte_carlo: bool) -> Result<(), CliError> {
    let rows = run_sweep(config, monte_carlo)?;
    let (dir, csv, sidecar) = output_paths(config);
    ensure_dir(&dir)?;
    write_csv(&csv, "stp", &rows)?;
    write_sidecar(&sidecar, command, config)?;
    println!("wrote {} and {}", csv.display(), sidecar.display());
    Ok(())
}

/// `optimize {mrc|mrc-asymptotic|pzf|pzf-exhaustive}` at the fixed scenario
/// (no sweep applied): trace CSV plus final JSON.
pub fn cmd_optimize(
    config: &ExperimentConfig,
    which: &str,
    epsilon: f64,
) -> Result<(), CliError> {
    // The scenario itself, untouched by the sweep grid.
    let tau = config.scenario.tau_linear()?;
    let params = cache_simo::model::NetworkParams::new(
        config.scenario.lambda_h,
        config.scenario.alpha,
        tau,
        config.scenario.m,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let pop = match &config.popularity.explicit {
        Some(p) => Popularity::new(p.clone()),
        None => Popularity::zipf(config.popularity.n.unwrap(), config.popularity.gamma.unwrap()),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let c = config.cache.c;
    let dir = PathBuf::from(&config.output.dir);
    ensure_dir(&dir)?;
    let prefix = &config.output.prefix;

    let (trace_csv, final_json): (String, serde_json::Value) = match which {
        "mrc" => {
            let trace = optimize::cccp(&pop, &params, c, epsilon, 500)?;
            let mut csv = String::from("iteration,objective,multiplier,t\n");
            for (i, (obj, it)) in trace.objectives.iter().zip(&trace.iterates).enumerate() {
                let v = if i == 0 {
                    String::new()
                } else {
                    format!("{}", trace.multipliers[i - 1])
                };
                csv.push_str(&format!("{i},{obj},{v},\"{}\"\n", join_f64(it.probs())));
            }
            let json = serde_json::json!({
                "t": trace.final_t().probs(),
                "objective": trace.final_objective(),
                "iterations": trace.iterations,
                "converged": trace.converged,
            });
            (csv, json)
        }
        "mrc-asymptotic" => {
            let t = optimize::optimize_mrc_asymptotic(&pop, c)?;
            let residual: f64 = t.probs().iter().sum::<f64>() - c as f64;
            let csv = format!("iteration,objective,multiplier,t\n0,,,\"{}\"\n", join_f64(t.probs()));
            let json = serde_json::json!({ "t": t.probs(), "budget_residual": residual });
            (csv, json)
        }
        "pzf" | "pzf-exhaustive" => {
            let table = table_for(&params, config.receiver.l, &dir.join("rtables"))?;
            let sol = if which == "pzf" {
                optimize::pzf_alternating_with_table(&pop, &table, c)?
            } else {
                optimize::exhaustive_pzf_with_table(&pop, &table, c)?
            };
            let mut csv = String::from("iteration,objective,k,t\n");
            for (i, (k, t, obj)) in sol.trace.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{obj},\"{}\",\"{}\"\n",
                    join_usize(k.per_file()),
                    join_f64(t.probs())
                ));
            }
            let json = serde_json::json!({
                "k": sol.k.per_file(),
                "t": sol.t.probs(),
                "objective": sol.objective,
                "iterations": sol.iterations,
                "continuous_solves": sol.continuous_solves,
            });
            (csv, json)
        }
        other => return Err(CliError::Config(format!("unknown optimizer command `{other}`"))),
    };

    let csv_path = dir.join(format!("{prefix}.trace.csv"));
    fs::write(&csv_path, trace_csv)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", csv_path.display())))?;
    let json_path = dir.join(format!("{prefix}.solution.json"));
    fs::write(&json_path, format!("{:#}\n", final_json))
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", json_path.display())))?;
    let sidecar = dir.join(format!("{prefix}.config.json"));
    write_sidecar(&sidecar, &format!("optimize {which}"), config)?;
    println!("wrote {}, {} and {}", csv_path.display(), json_path.display(), sidecar.display());
    Ok(())
}

/// `baselines`: caching vectors of the three baseline schemes and their
/// analytical MRC STPs.
pub fn cmd_baselines(config: &ExperimentConfig) -> Result<(), CliError> {
    let tau = config.scenario.tau_linear()?;
    let params = cache_simo::model::NetworkParams::new(
        config.scenario.lambda_h,
        config.scenario.alpha,
        tau,
        config.scenario.m,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let pop = match &config.popularity.explicit {
        Some(p) => Popularity::new(p.clone()),
        None => Popularity::zipf(config.popularity.n.unwrap(), config.popularity.gamma.unwrap()),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let c = config.cache.c;
    let dir = PathBuf::from(&config.output.dir);
    ensure_dir(&dir)?;

    let mut csv = String::from("kind,file,t\n");
    let mut stps = serde_json::Map::new();
    for (name, kind) in [
        ("most_popular", BaselineKind::MostPopular),
        ("iid_popularity", BaselineKind::IidPopularity),
        ("uniform", BaselineKind::Uniform),
    ] {
        let t = baseline(kind, &pop, c).map_err(|e| CliError::Config(e.to_string()))?;
        for (i, &v) in t.probs().iter().enumerate() {
            csv.push_str(&format!("{name},{},{v}\n", i + 1));
        }
        let stp = stp_mrc_exact(&t, &pop, &params).map_err(CliError::from)?;
        stps.insert(name.into(), serde_json::json!({ "stp": stp.value, "t": t.probs() }));
    }
    let csv_path = dir.join(format!("{}.baselines.csv", config.output.prefix));
    fs::write(&csv_path, csv)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", csv_path.display())))?;
    let json_path = dir.join(format!("{}.baselines.json", config.output.prefix));
    fs::write(&json_path, format!("{:#}\n", serde_json::Value::Object(stps)))
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", json_path.display())))?;
    let sidecar = dir.join(format!("{}.config.json", config.output.prefix));
    write_sidecar(&sidecar, "baselines", config)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn join_usize(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}
