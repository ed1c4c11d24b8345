//! Line-oriented `key = value` run configuration with `--set` overrides.
//!
//! Unknown keys are errors, not warnings: sweep configs are meant to be
//! auditable, and a typoed key silently falling back to a default is the
//! failure mode this format exists to prevent.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nnqe::estimator::AccuracyConfig;
use nnqe::sampler::{self, SamplerConfig};
use nnqe::trainer::{SelectionRule, TrainConfig};

use crate::CliError;

/// All recognized keys and their roles.
const KNOWN_KEYS: &[&str] = &[
    "observable",
    "dataset",
    "counts",
    "checkpoint",
    "output_dir",
    "seed",
    "shots",
    "mode",
    "budgets",
    "replicates",
    "chemical_accuracy",
    "estimate.n_mc",
    "train.learning_rate",
    "train.rms_decay",
    "train.rms_epsilon",
    "train.batch_size",
    "train.negative_samples",
    "train.epochs",
    "train.checkpoint_pool",
    "train.selection",
    "train.selection_n_mc",
    "train.n_hidden",
    "sampler.chains",
    "sampler.beta_min",
    "sampler.burn_in",
    "sampler.thinning",
];

/// Which comparison mode a sweep runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    /// Exact state available: fresh synthetic replicate datasets.
    Synthetic,
    /// Ingested measurement pool: replicates subsample it.
    Pool,
}

/// Fully parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub observable: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub shots: Option<usize>,
    pub mode: CompareMode,
    pub budgets: Vec<usize>,
    pub replicates: usize,
    pub chemical_accuracy: f64,
    pub estimate_n_mc: usize,
    pub train: TrainConfig,
    pub sampler_chains: usize,
    pub sampler_beta_min: f64,
    pub sampler_burn_in: usize,
    pub sampler_thinning: usize,
}

impl RunConfig {
    /// Parse a config file and apply `--set key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("config line {line_no}: expected `key = value`"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(CliError::usage(format!(
                    "config line {line_no}: empty key or value"
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(CliError::usage(format!(
                    "config line {line_no}: duplicate key '{key}'"
                )));
            }
        }
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CliError::usage(format!("--set expects key=value, got '{item}'"))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self, CliError> {
        for key in entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("unknown config key '{key}'")));
            }
        }
        let get = |key: &str| entries.get(key).map(String::as_str);
        let parse_usize = |key: &str| -> Result<Option<usize>, CliError> {
            get(key)
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| CliError::usage(format!("key '{key}': invalid integer '{v}'")))
                })
                .transpose()
        };
        let parse_f64 = |key: &str| -> Result<Option<f64>, CliError> {
            get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| CliError::usage(format!("key '{key}': invalid number '{v}'")))
                })
                .transpose()
        };

        let seed = get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::usage(format!("key 'seed': invalid integer '{v}'")))
            })
            .transpose()?
            .unwrap_or(0);

        let mode = match get("mode") {
            None | Some("synthetic") => CompareMode::Synthetic,
            Some("pool") => CompareMode::Pool,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "key 'mode': expected synthetic or pool, got '{other}'"
                )))
            }
        };

        let budgets = match get("budgets") {
            None => Vec::new(),
            Some(list) => {
                let mut parsed = Vec::new();
                for part in list.split(',') {
                    let part = part.trim();
                    parsed.push(part.parse::<usize>().map_err(|_| {
                        CliError::usage(format!("key 'budgets': invalid entry '{part}'"))
                    })?);
                }
                parsed.sort_unstable();
                parsed.dedup();
                parsed
            }
        };

        let selection_rule = match get("train.selection") {
            None | Some("lowest-energy") => SelectionRule::LowestEnergy,
            Some("lowest-validation-nll") => SelectionRule::LowestValidationNll,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "key 'train.selection': expected lowest-energy or lowest-validation-nll, got '{other}'"
                )))
            }
        };

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: parse_f64("train.learning_rate")?.unwrap_or(defaults.learning_rate),
            rms_decay: parse_f64("train.rms_decay")?.unwrap_or(defaults.rms_decay),
            rms_epsilon: parse_f64("train.rms_epsilon")?.unwrap_or(defaults.rms_epsilon),
            batch_size: parse_usize("train.batch_size")?.unwrap_or(defaults.batch_size),
            negative_samples: parse_usize("train.negative_samples")?,
            epochs: parse_usize("train.epochs")?.unwrap_or(defaults.epochs),
            checkpoint_pool: parse_usize("train.checkpoint_pool")?.unwrap_or(defaults.checkpoint_pool),
            selection_rule,
            selection_n_mc: parse_usize("train.selection_n_mc")?.unwrap_or(defaults.selection_n_mc),
            n_hidden: parse_usize("train.n_hidden")?,
            seed: 0, // command-specific derived seed, set at use
        };

        Ok(RunConfig {
            observable: get("observable").map(PathBuf::from),
            dataset: get("dataset").map(PathBuf::from),
            counts: get("counts").map(PathBuf::from),
            checkpoint: get("checkpoint").map(PathBuf::from),
            output_dir: get("output_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
            seed,
            shots: parse_usize("shots")?,
            mode,
            budgets,
            replicates: parse_usize("replicates")?.unwrap_or(20),
            chemical_accuracy: parse_f64("chemical_accuracy")?.unwrap_or(1.6e-3),
            estimate_n_mc: parse_usize("estimate.n_mc")?.unwrap_or(100_000),
            train,
            sampler_chains: parse_usize("sampler.chains")?.unwrap_or(sampler::DEFAULT_CHAINS),
            sampler_beta_min: parse_f64("sampler.beta_min")?.unwrap_or(sampler::DEFAULT_BETA_MIN),
            sampler_burn_in: parse_usize("sampler.burn_in")?.unwrap_or(sampler::DEFAULT_BURN_IN),
            sampler_thinning: parse_usize("sampler.thinning")?.unwrap_or(sampler::DEFAULT_THINNING),
        })
    }

    /// Sampler configuration with a caller-chosen seed.
    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig, CliError> {
        let mut cfg = SamplerConfig::new(self.sampler_chains, self.sampler_beta_min, seed)
            .map_err(|e| CliError::usage(e.to_string()))?;
        cfg.sweeps_burn_in = self.sampler_burn_in;
        cfg.sweeps_between_samples = self.sampler_thinning;
        Ok(cfg)
    }

    pub fn accuracy(&self) -> Result<AccuracyConfig, CliError> {
        AccuracyConfig::new(self.chemical_accuracy).map_err(|e| CliError::usage(e.to_string()))
    }

    /// Fetch a required path key, checking that the input file exists.
    pub fn require_input(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        let path = value
            .clone()
            .ok_or_else(|| CliError::usage(format!("config key '{key}' is required")))?;
        if !path.is_file() {
            return Err(CliError::usage(format!(
                "key '{key}': file {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    /// Fetch a required output path key (parent directories are created).
    pub fn require_output(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        let path = value
            .clone()
            .ok_or_else(|| CliError::usage(format!("config key '{key}' is required")))?;
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| {
                    CliError::usage(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
        }
        Ok(path)
    }
}
