//! Experiment configuration: TOML (or JSON) files plus `--set key=value`
//! overrides, resolved into validated library types per sweep point.

use std::path::Path;

use cache_simo::model::{
    baseline, BaselineKind, CacheSampler, CachingDistribution, DofAllocation, NetworkParams,
    Popularity,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub popularity: PopularityConfig,
    pub cache: CacheConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lambda_h: f64,
    pub alpha: f64,
    /// SIR threshold in dB; exactly one of `tau_db`/`tau` must be set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_db: Option<f64>,
    /// SIR threshold on linear scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub m: usize,
}

impl ScenarioConfig {
    pub fn tau_linear(&self) -> Result<f64, CliError> {
        match (self.tau, self.tau_db) {
            (Some(t), None) => Ok(t),
            (None, Some(db)) => Ok(db_to_linear(db)),
            _ => Err(CliError::Config(
                "scenario must set exactly one of `tau` (linear) or `tau_db`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopularityConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Explicit request probabilities (alternative to Zipf).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub c: usize,
    /// Explicit caching distribution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// One of `most_popular`, `iid_popularity`, `uniform`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    /// One of `cccp`, `asymptotic`, `pzf`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    #[serde(default = "default_receiver_kind")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_uniform: Option<usize>,
    #[serde(default)]
    pub optimize_k: bool,
    #[serde(default = "default_l")]
    pub l: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self { kind: default_receiver_kind(), k: None, k_uniform: None, optimize_k: false, l: default_l() }
    }
}

fn default_receiver_kind() -> String {
    "mrc".into()
}

fn default_l() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of `tau_db`, `m`, `c`, `alpha`, `gamma`.
    pub variable: String,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_engine_kind")]
    pub kind: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_radius: Option<f64>,
}

fn default_engine_kind() -> String {
    "analytic".into()
}

fn default_trials() -> usize {
    10_000
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { kind: default_engine_kind(), trials: default_trials(), seed: 0, region_radius: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_dir() -> String {
    "out".into()
}

fn default_prefix() -> String {
    "run".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: default_prefix() }
    }
}

/// Loads a config file (TOML, or JSON when the extension is `.json` or the
/// content starts with `{`), applies `--set` overrides, and validates.
/// Sidecar files produced by this tool (with a top-level `config` key) are
/// accepted directly, enabling exact reruns.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json")
        || raw.trim_start().starts_with('{');
    let mut value: toml::Value = if is_json {
        let mut json: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("JSON parse error in {}: {e}", path.display())))?;
        // Accept our own sidecars: unwrap the resolved config.
        if let Some(inner) = json.get("config") {
            json = inner.clone();
        }
        json_to_toml(json)?
    } else {
        let table: toml::Table = raw.parse().map_err(|e| {
            CliError::Config(format!("TOML parse error in {}: {e}", path.display()))
        })?;
        toml::Value::Table(table)
    };

    for item in overrides {
        apply_override(&mut value, item)?;
    }

    let config: ExperimentConfig = value
        .try_into()
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    validate(&config)?;
    Ok(config)
}

fn json_to_toml(v: serde_json::Value) -> Result<toml::Value, CliError> {
    toml::Value::try_from(v).map_err(|e| CliError::Config(format!("configuration structure: {e}")))
}

/// `--set section.key=value` with values parsed as bool, integer, float,
/// arrays (`[a,b,c]`), or string, in that order.
fn apply_override(root: &mut toml::Value, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let parsed = parse_override_value(raw.trim());
    let mut node = root;
    let parts: Vec<&str> = path.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path `{path}` crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if raw.starts_with('[') && raw.ends_with(']') {
        let inner = &raw[1..raw.len() - 1];
        let items: Vec<toml::Value> =
            inner.split(',').map(|s| parse_override_value(s.trim())).collect();
        return toml::Value::Array(items);
    }
    toml::Value::String(raw.trim_matches('"').to_string())
}

pub const SWEEP_VARIABLES: [&str; 5] = ["tau_db", "m", "c", "alpha", "gamma"];

fn validate(config: &ExperimentConfig) -> Result<(), CliError> {
    config.scenario.tau_linear()?;
    if !SWEEP_VARIABLES.contains(&config.sweep.variable.as_str()) {
        return Err(CliError::Config(format!(
            "unknown sweep variable `{}`; expected one of {SWEEP_VARIABLES:?}",
            config.sweep.variable
        )));
    }
    if config.sweep.grid.is_empty() {
        return Err(CliError::Config("sweep grid must be non-empty".into()));
    }
    if config.sweep.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("sweep grid must be strictly increasing".into()));
    }
    match (&config.popularity.explicit, config.popularity.n, config.popularity.gamma) {
        (Some(_), None, None) | (None, Some(_), Some(_)) => {}
        _ => {
            return Err(CliError::Config(
                "popularity must set either `explicit` or both `n` and `gamma`".into(),
            ))
        }
    }
    let sources =
        [config.cache.t.is_some(), config.cache.baseline.is_some(), config.cache.optimizer.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(CliError::Config(
            "cache must set exactly one of `t`, `baseline`, `optimizer`".into(),
        ));
    }
    if let Some(b) = &config.cache.baseline {
        parse_baseline(b)?;
    }
    if let Some(o) = &config.cache.optimizer {
        if !["cccp", "asymptotic", "pzf"].contains(&o.as_str()) {
            return Err(CliError::Config(format!(
                "unknown optimizer `{o}`; expected cccp, asymptotic or pzf"
            )));
        }
    }
    if !["mrc", "pzf"].contains(&config.receiver.kind.as_str()) {
        return Err(CliError::Config(format!(
            "unknown receiver `{}`; expected mrc or pzf",
            config.receiver.kind
        )));
    }
    if !["analytic", "bound", "monte_carlo"].contains(&config.engine.kind.as_str()) {
        return Err(CliError::Config(format!(
            "unknown engine `{}`; expected analytic, bound or monte_carlo",
            config.engine.kind
        )));
    }
    if config.sweep.variable == "c" && config.cache.t.is_some() {
        return Err(CliError::Config(
            "sweeping `c` requires a baseline or optimizer cache source, not explicit `t`".into(),
        ));
    }
    if config.sweep.variable == "gamma" && config.popularity.explicit.is_some() {
        return Err(CliError::Config(
            "sweeping `gamma` requires Zipf popularity, not an explicit vector".into(),
        ));
    }
    if config.sweep.variable == "m" {
        for &g in &config.sweep.grid {
            if g.fract() != 0.0 || g < 1.0 {
                return Err(CliError::Config(format!("antenna grid value {g} is not a positive integer")));
            }
        }
    }
    Ok(())
}

pub fn parse_baseline(name: &str) -> Result<BaselineKind, CliError> {
    match name {
        "most_popular" => Ok(BaselineKind::MostPopular),
        "iid_popularity" => Ok(BaselineKind::IidPopularity),
        "uniform" => Ok(BaselineKind::Uniform),
        other => Err(CliError::Config(format!(
            "unknown baseline `{other}`; expected most_popular, iid_popularity or uniform"
        ))),
    }
}

/// Fully resolved inputs for one sweep point.
pub struct ResolvedPoint {
    pub params: NetworkParams,
    pub pop: Popularity,
    /// Caching distribution for analytical evaluation (effective marginals
    /// for the i.i.d. baseline).
    pub t: CachingDistribution,
    /// Sampler for simulation (the literal i.i.d. draw for that baseline).
    pub sampler: CacheSampler,
    /// PZF DoF allocation when the receiver is PZF.
    pub dof: Option<DofAllocation>,
    pub l: usize,
}

impl ExperimentConfig {
    /// Applies the sweep variable at `value` and resolves every derived
    /// quantity (popularity, caching distribution, DoF allocation).
    pub fn resolve_point(&self, value: f64) -> Result<ResolvedPoint, CliError> {
        let mut tau = self.scenario.tau_linear()?;
        let mut m = self.scenario.m;
        let mut alpha = self.scenario.alpha;
        let mut c = self.cache.c;
        let mut gamma = self.popularity.gamma;
        match self.sweep.variable.as_str() {
            "tau_db" => tau = db_to_linear(value),
            "m" => m = value as usize,
            "c" => c = value as usize,
            "alpha" => alpha = value,
            "gamma" => gamma = Some(value),
            other => return Err(CliError::Config(format!("unknown sweep variable `{other}`"))),
        }
        let params = NetworkParams::new(self.scenario.lambda_h, alpha, tau, m)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let pop = match &self.popularity.explicit {
            Some(probs) => Popularity::new(probs.clone()),
            None => Popularity::zipf(self.popularity.n.unwrap(), gamma.unwrap()),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;

        let (t, sampler) = if let Some(probs) = &self.cache.t {
            let t = CachingDistribution::new(probs.clone(), c)
                .map_err(|e| CliError::Config(e.to_string()))?;
            (t.clone(), CacheSampler::Madow(t))
        } else if let Some(name) = &self.cache.baseline {
            let kind = parse_baseline(name)?;
            let t = baseline(kind, &pop, c).map_err(|e| CliError::Config(e.to_string()))?;
            let sampler = match kind {
                BaselineKind::IidPopularity => {
                    CacheSampler::IidPopularity { pop: pop.clone(), cache_size: c }
                }
                _ => CacheSampler::Madow(t.clone()),
            };
            (t, sampler)
        } else {
            let optimizer = self.cache.optimizer.as_deref().unwrap();
            let t = match optimizer {
                "cccp" => cache_simo::optimize::cccp(&pop, &params, c, 1e-4, 500)
                    .map_err(CliError::from)?
                    .final_t()
                    .clone(),
                "asymptotic" => cache_simo::optimize::optimize_mrc_asymptotic(&pop, c)
                    .map_err(CliError::from)?,
                "pzf" => cache_simo::optimize::pzf_alternating(&pop, &params, c, self.receiver.l)
                    .map_err(CliError::from)?
                    .t,
                other => return Err(CliError::Config(format!("unknown optimizer `{other}`"))),
            };
            (t.clone(), CacheSampler::Madow(t))
        };

        let dof = if self.receiver.kind == "pzf" {
            Some(self.resolve_dof(&pop, &t, &params, c)?)
        } else {
            None
        };

        Ok(ResolvedPoint { params, pop, t, sampler, dof, l: self.receiver.l })
    }

    fn resolve_dof(
        &self,
        pop: &Popularity,
        t: &CachingDistribution,
        params: &NetworkParams,
        c: usize,
    ) -> Result<DofAllocation, CliError> {
        let n = pop.n();
        if let Some(k) = &self.receiver.k {
            return DofAllocation::new(k.clone(), params.m)
                .map_err(|e| CliError::Config(e.to_string()));
        }
        if let Some(k) = self.receiver.k_uniform {
            return DofAllocation::uniform(n, k.min(params.m), params.m)
                .map_err(|e| CliError::Config(e.to_string()));
        }
        if self.receiver.optimize_k {
            // Joint optimization when the cache is optimizer-driven; for a
            // fixed caching distribution only the discrete block applies.
            if self.cache.optimizer.as_deref() == Some("pzf") {
                let sol = cache_simo::optimize::pzf_alternating(pop, params, c, self.receiver.l)
                    .map_err(CliError::from)?;
                return Ok(sol.k);
            }
            let table =
                cache_simo::pzf::r_table(params, self.receiver.l).map_err(CliError::from)?;
            return Ok(cache_simo::optimize::pzf_discrete(t, pop, &table));
        }
        Err(CliError::Config(
            "pzf receiver needs one of `k`, `k_uniform`, or `optimize_k = true`".into(),
        ))
    }
}
