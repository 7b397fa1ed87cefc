//! JSON config file support. A config file is a flat object whose keys use
//! the underscore spelling of the subcommand's long flags (for example
//! `{"vocab_size": 4096, "steps": 2000}`). Flags override config values;
//! unknown keys are rejected so typos surface instead of being ignored.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// Load the subcommand's config section, or defaults when no file was given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config file {}", p.display()))
        }
    }
}

/// Flag > config > default.
pub fn pick<T>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}

/// Flag > config, with no default.
pub fn pick_opt<T>(flag: Option<T>, cfg: Option<T>) -> Option<T> {
    flag.or(cfg)
}

/// Parse a comma-separated numeric list flag such as "0,0.25,0.5".
pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid {what} entry {tok:?}: {e}"))
        })
        .collect()
}

/// For subcommands with no config knobs: still parse the file so that
/// unknown keys are rejected rather than silently ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptyConfig {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub limit: Option<usize>,
    pub vocab_size: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: Option<usize>,
    pub ngram_orders: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub vocab_size: Option<u32>,
    pub normalize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainClassifierConfig {
    pub n_per_class: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    pub holdout_fraction: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub k: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub k: Option<f64>,
    pub tau: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecilesConfig {
    pub buckets: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermConfig {
    pub k: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfigFile {
    pub vocab_size: Option<u32>,
    pub context_window: Option<usize>,
    pub feature_dim: Option<usize>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub step_size: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningConfig {
    pub k_grid: Option<Vec<f64>>,
    pub seeds: Option<usize>,
    pub sigma_mult: Option<f64>,
    pub holdout_fraction: Option<f64>,
    #[serde(flatten)]
    pub lm: LmConfigFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingFitConfig {
    pub huber_delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasReportConfig {
    pub buckets: Option<usize>,
    pub min_len: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaConfig {
    pub out_dim: Option<usize>,
}
