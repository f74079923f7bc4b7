//! Run configuration: JSON schemas for the config-driven subcommands and
//! the seed resolution ladder (flag, then `PN_SEED`, then config file).

use std::path::{Path, PathBuf};

use pncrit_core::mcmc::ChainConfig;
use pncrit_core::threshold::ThresholdMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_true() -> bool {
    true
}

fn default_schema() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdModeArg {
    #[default]
    Approximate,
    Exact,
}

impl From<ThresholdModeArg> for ThresholdMode {
    fn from(arg: ThresholdModeArg) -> Self {
        match arg {
            ThresholdModeArg::Approximate => ThresholdMode::Approximate,
            ThresholdModeArg::Exact => ThresholdMode::Exact,
        }
    }
}

/// How far to carry the risk expansion.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum OrderArg {
    First,
    #[default]
    Second,
}

/// One named category level and the raw values that map onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryLevel {
    pub label: String,
    /// Raw cell values coded to this level. When several categorical
    /// columns are combined, a member is their values joined with `|`.
    pub members: Vec<String>,
}

/// Categorical coding: which columns form the key and how raw values
/// merge into ordered levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalConfig {
    pub columns: Vec<String>,
    pub levels: Vec<CategoryLevel>,
}

impl CategoricalConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.columns.is_empty() {
            return Err(CliError::Config(
                "categorical coding needs at least one column".into(),
            ));
        }
        if self.levels.is_empty() {
            return Err(CliError::Config(
                "categorical coding needs at least one level".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for level in &self.levels {
            if level.members.is_empty() {
                return Err(CliError::Config(format!(
                    "category level '{}' has no members",
                    level.label
                )));
            }
            for member in &level.members {
                if !seen.insert(member.as_str()) {
                    return Err(CliError::Config(format!(
                        "raw category value '{member}' is assigned to more than one level"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which interaction terms enter the sufficient statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_true")]
    pub singles: bool,
    #[serde(default)]
    pub pairwise: bool,
    #[serde(default)]
    pub cat_cross: bool,
    /// Drop the later of any term pair whose absolute sample correlation
    /// exceeds this value. `None` keeps every term.
    #[serde(default)]
    pub correlation_cutoff: Option<f64>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            singles: true,
            pairwise: false,
            cat_cross: false,
            correlation_cutoff: None,
        }
    }
}

/// How continuous columns are mapped into the model's (0, 1) domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleRule {
    /// Divide each column by twice its maximum.
    #[default]
    HalfMax,
    /// Use the values as they are.
    None,
}

/// The model family a run screens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Cell-probability family over coded categories.
    Multinomial { categorical: CategoricalConfig },
    /// Gaussian natural family with a fixed reference precision.
    Quadratic {
        columns: Vec<String>,
        mean: Vec<f64>,
        q: Vec<Vec<f64>>,
    },
    /// Interaction basis over a moment-matched product reference.
    Generic {
        continuous: Vec<String>,
        #[serde(default)]
        categorical: Option<CategoricalConfig>,
        #[serde(default)]
        rescale: RescaleRule,
        #[serde(default)]
        basis: BasisConfig,
    },
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            ModelConfig::Multinomial { categorical } => categorical.validate(),
            ModelConfig::Quadratic { columns, mean, q } => {
                let d = columns.len();
                if d == 0 {
                    return Err(CliError::Config(
                        "quadratic model needs at least one column".into(),
                    ));
                }
                if mean.len() != d {
                    return Err(CliError::Config(format!(
                        "quadratic mean has {} entries but {} columns are declared",
                        mean.len(),
                        d
                    )));
                }
                if q.len() != d || q.iter().any(|row| row.len() != d) {
                    return Err(CliError::Config(format!(
                        "quadratic precision matrix must be {d}x{d}"
                    )));
                }
                Ok(())
            }
            ModelConfig::Generic {
                continuous,
                categorical,
                basis,
                ..
            } => {
                if continuous.is_empty() {
                    return Err(CliError::Config(
                        "generic model needs at least one continuous column".into(),
                    ));
                }
                if let Some(cat) = categorical {
                    cat.validate()?;
                }
                if basis.cat_cross && categorical.is_none() {
                    return Err(CliError::Config(
                        "cat_cross terms need a categorical coding".into(),
                    ));
                }
                if let Some(cutoff) = basis.correlation_cutoff {
                    if !(0.0..=1.0).contains(&cutoff) {
                        return Err(CliError::Config(format!(
                            "correlation_cutoff must lie in [0, 1], got {cutoff}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// True when fitting this model draws from a sampler and therefore
    /// needs an explicit seed.
    pub fn needs_seed(&self) -> bool {
        matches!(self, ModelConfig::Generic { .. })
    }
}

/// Sampler geometry for models without closed-form expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub steps: usize,
    pub thin: usize,
    pub initial_scale: f64,
    #[serde(default = "default_true")]
    pub adapt: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            burn_in: 1_000,
            steps: 6_000,
            thin: 5,
            initial_scale: 0.2,
            adapt: true,
        }
    }
}

impl SamplerConfig {
    pub fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_chains: self.n_chains,
            burn_in: self.burn_in,
            steps: self.steps,
            thin: self.thin,
            initial_scale: self.initial_scale,
            seed,
            adapt: self.adapt,
        }
    }
}

/// Config for the `criterion` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub alpha: f64,
    #[serde(default)]
    pub threshold_mode: ThresholdModeArg,
    #[serde(default)]
    pub order: OrderArg,
    pub model: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Base seed for every sampled stage. Mandatory whenever the model
    /// has no closed-form expectations.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Fit on the first `base_rows` rows only; all rows otherwise.
    #[serde(default)]
    pub base_rows: Option<usize>,
}

/// Config for the `compare` subcommand: two candidates on one table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub alpha: f64,
    #[serde(default)]
    pub threshold_mode: ThresholdModeArg,
    pub data: PathBuf,
    pub first: ModelConfig,
    pub second: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Draws for estimating the log-normalizer of sampled models.
    #[serde(default = "default_psi_draws")]
    pub psi_draws: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub base_rows: Option<usize>,
}

fn default_psi_draws() -> usize {
    200_000
}

/// Config for the `simulate` subcommand. Mirrors the scenario spec but
/// lets the seed arrive from the command line or environment instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub kind: pncrit_verify::scenarios::ScenarioKind,
    pub p: usize,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parse a JSON config file; any failure is a config error (exit 2).
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config '{}': {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse config '{}': {e}", path.display())))
}

/// Resolve the effective seed: command-line flag beats the `PN_SEED`
/// environment variable, which beats the config file.
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("PN_SEED") {
        Ok(raw) => {
            let parsed = raw.trim().parse::<u64>().map_err(|_| {
                CliError::Config(format!(
                    "PN_SEED must be an unsigned integer, got '{raw}'"
                ))
            })?;
            Ok(Some(parsed))
        }
        Err(std::env::VarError::NotPresent) => Ok(from_config),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::Config(
            "PN_SEED is not valid unicode".into(),
        )),
    }
}

/// Demand a seed for runs that draw samples.
pub fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| {
        CliError::Config(
            "a seed is mandatory whenever any sampled path is configured; \
             pass --seed, set PN_SEED, or add \"seed\" to the config"
                .into(),
        )
    })
}
