//! `pncrit`: is your sample large enough for your model?
//!
//! Screens a model fit by comparing an asymptotic expansion of the
//! Kullback-Leibler estimation risk against a divergence budget derived
//! from the minimum Bayes error of a two-model discrimination problem.
//! Every subcommand writes one versioned JSON report; failures exit with
//! 2 (config), 3 (data), or 4 (numeric) and a JSON error on stderr.

mod config;
mod error;
mod ingest;
mod pipeline;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use pncrit_core::risk::{inverse_mass_from_counts, required_sample_size};
use pncrit_core::threshold::{threshold_for_alpha, ThresholdMode};

use config::{
    load, require_seed, resolve_seed, CompareConfig, CriterionConfig, ModelConfig, OrderArg,
    SimulateConfig,
};
use error::{classify, CliError};
use ingest::ingest_table;
use pipeline::{
    base_slice, build_and_fit, compare_fitted, multinomial_from_counts, prepare_candidate,
    read_schema, risk_for_fit, validate_cells,
};
use report::{
    emit, CandidateBlock, CompareDoc, CriterionDoc, DataBlock, ModelBlock, MultinomialData,
    MultinomialDoc, MultinomialInputs, SampleSizeDoc, SampleSizeInputs, SimulateDoc,
    ThresholdDoc, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "pncrit",
    version,
    about = "Decide whether a sample is large enough for a parametric model, \
             by weighing the estimated KL risk of the fit against a \
             Bayes-error-derived threshold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full criterion on a data table, per a JSON config.
    Criterion {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Overrides PN_SEED and the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Screen a categorical model directly from a counts file.
    Multinomial {
        /// CSV with a `label,count` header.
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = OrderArg::Second)]
        order: OrderArg,
        /// Add this to every cell before screening (zero-cell rescue).
        #[arg(long)]
        pseudo_count: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Smallest n that passes the categorical criterion at level alpha.
    SampleSize {
        /// Free parameter count (cells minus one).
        #[arg(long)]
        p: usize,
        /// Estimated inverse cell-probability mass.
        #[arg(long)]
        m_hat: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The divergence budget at a discrimination level alpha.
    Threshold {
        #[arg(long)]
        alpha: f64,
        /// Invert the exact minimum Bayes error bound instead of the
        /// closed-form 8 * alpha^2 approximation.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit two candidate models on one table and compare them, gated on
    /// the criterion.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Measure the risk of a known scenario by replication.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("{}", err.as_json());
        std::process::exit(err.exit_code());
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Threshold {
            alpha,
            exact,
            output,
        } => {
            let mode = if exact {
                ThresholdMode::Exact
            } else {
                ThresholdMode::Approximate
            };
            let threshold = threshold_for_alpha(alpha, mode).map_err(classify)?;
            emit(
                &ThresholdDoc {
                    schema: SCHEMA_VERSION,
                    command: "threshold",
                    threshold,
                },
                output.as_deref(),
            )
        }
        Command::SampleSize {
            p,
            m_hat,
            alpha,
            output,
        } => {
            let required_n = required_sample_size(p, m_hat, alpha).map_err(classify)?;
            let threshold =
                threshold_for_alpha(alpha, ThresholdMode::Approximate).map_err(classify)?;
            emit(
                &SampleSizeDoc {
                    schema: SCHEMA_VERSION,
                    command: "sample-size",
                    config: SampleSizeInputs { p, m_hat, alpha },
                    required_n,
                    threshold,
                },
                output.as_deref(),
            )
        }
        Command::Multinomial {
            counts,
            alpha,
            order,
            pseudo_count,
            output,
        } => {
            let (labels, raw_counts) = ingest::read_counts(&counts)?;
            validate_cells(&raw_counts)?;
            let n_raw: u64 = raw_counts.iter().sum();
            let screened: Option<Vec<u64>> = pseudo_count
                .map(|k| raw_counts.iter().map(|&c| c + k).collect());
            let effective = screened.as_deref().unwrap_or(&raw_counts);
            // Pseudo-counts change the mass estimate, not the sample size.
            let n_eval = screened.as_ref().map(|_| n_raw as usize);
            let (_, m_hat) = inverse_mass_from_counts(effective).map_err(classify)?;
            let threshold =
                threshold_for_alpha(alpha, ThresholdMode::Approximate).map_err(classify)?;
            let risk = multinomial_from_counts(effective, n_eval, order, &threshold)?;
            emit(
                &MultinomialDoc {
                    schema: SCHEMA_VERSION,
                    command: "multinomial",
                    config: MultinomialInputs {
                        counts: counts.display().to_string(),
                        alpha,
                        order,
                        pseudo_count,
                    },
                    data: MultinomialData {
                        cells: raw_counts.len(),
                        n: n_raw,
                        labels,
                        counts: raw_counts,
                        screened_counts: screened,
                        m_hat,
                    },
                    risk,
                },
                output.as_deref(),
            )
        }
        Command::Criterion {
            config,
            data,
            seed,
            output,
        } => run_criterion(&config, &data, seed, output.as_deref()),
        Command::Compare {
            config,
            seed,
            output,
        } => run_compare(&config, seed, output.as_deref()),
        Command::Simulate {
            config,
            seed,
            output,
        } => {
            let mut cfg: SimulateConfig = load(&config)?;
            let resolved = require_seed(resolve_seed(seed, cfg.seed)?)?;
            cfg.seed = Some(resolved);
            let spec = pncrit_verify::scenarios::ScenarioSpec {
                kind: cfg.kind.clone(),
                p: cfg.p,
                n: cfg.n,
                replications: cfg.replications,
                seed: resolved,
            };
            let result =
                pncrit_verify::scenarios::simulate_estimation_risk(&spec).map_err(classify)?;
            emit(
                &SimulateDoc {
                    schema: SCHEMA_VERSION,
                    command: "simulate",
                    config: cfg,
                    result,
                },
                output.as_deref(),
            )
        }
    }
}

fn kind_name(cfg: &ModelConfig) -> &'static str {
    match cfg {
        ModelConfig::Multinomial { .. } => "multinomial",
        ModelConfig::Quadratic { .. } => "quadratic",
        ModelConfig::Generic { .. } => "generic",
    }
}

fn run_criterion(
    config_path: &std::path::Path,
    data_path: &std::path::Path,
    seed_flag: Option<u64>,
    output: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let mut cfg: CriterionConfig = load(config_path)?;
    cfg.model.validate()?;
    let threshold =
        threshold_for_alpha(cfg.alpha, cfg.threshold_mode.into()).map_err(classify)?;

    let resolved = resolve_seed(seed_flag, cfg.seed)?;
    let seed = if cfg.model.needs_seed() {
        Some(require_seed(resolved)?)
    } else {
        resolved
    };
    cfg.seed = seed;

    let table = match &cfg.model {
        ModelConfig::Multinomial { categorical } => {
            ingest_table(data_path, &[], Some(categorical), config::RescaleRule::None)?
        }
        ModelConfig::Quadratic { columns, .. } => {
            ingest_table(data_path, columns, None, config::RescaleRule::None)?
        }
        ModelConfig::Generic {
            continuous,
            categorical,
            rescale,
            ..
        } => ingest_table(data_path, continuous, categorical.as_ref(), *rescale)?,
    };
    let base = base_slice(&table, cfg.base_rows)?;
    let data_block = DataBlock {
        path: data_path.display().to_string(),
        rows: table.n_rows(),
        base_rows: base.nrows(),
        column_scales: table.scales.clone(),
        level_labels: table.level_labels.clone(),
        level_counts: table.level_counts.clone(),
    };

    if let ModelConfig::Multinomial { .. } = &cfg.model {
        // Tally the (possibly sliced) coded levels and screen the counts.
        let mut counts = vec![0u64; table.cat_levels];
        for r in 0..base.nrows() {
            let level = base[(r, base.ncols() - 1)] as usize;
            counts[level - 1] += 1;
        }
        let risk = multinomial_from_counts(&counts, None, cfg.order, &threshold)?;
        let model_block = ModelBlock {
            kind: "multinomial",
            p: counts.len() - 1,
            raw_dim: 1,
            filter: None,
        };
        let mut data_block = data_block;
        data_block.level_counts = counts;
        return emit(
            &CriterionDoc {
                schema: SCHEMA_VERSION,
                command: "criterion",
                config: cfg,
                data: data_block,
                model: model_block,
                fit: None,
                sampling: None,
                risk,
            },
            output,
        );
    }

    let mut fitted = build_and_fit(&cfg.model, &base, &table, &cfg.sampler, seed)?;
    let risk = risk_for_fit(&mut fitted, &base, cfg.order, &cfg.sampler, &threshold)?;
    let model_block = ModelBlock {
        kind: kind_name(&cfg.model),
        p: fitted.model.p(),
        raw_dim: fitted.model.raw_dim(),
        filter: fitted.filter,
    };
    emit(
        &CriterionDoc {
            schema: SCHEMA_VERSION,
            command: "criterion",
            config: cfg,
            data: data_block,
            model: model_block,
            fit: Some(fitted.solution),
            sampling: fitted.sampling,
            risk,
        },
        output,
    )
}

fn run_compare(
    config_path: &std::path::Path,
    seed_flag: Option<u64>,
    output: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let mut cfg: CompareConfig = load(config_path)?;
    cfg.first.validate()?;
    cfg.second.validate()?;
    let threshold =
        threshold_for_alpha(cfg.alpha, cfg.threshold_mode.into()).map_err(classify)?;

    let schema_first = read_schema(&cfg.first)?;
    let schema_second = read_schema(&cfg.second)?;
    if schema_first != schema_second {
        return Err(CliError::Config(
            "compare candidates must read the same columns with the same \
             coding and rescale rule"
                .into(),
        ));
    }

    let resolved = resolve_seed(seed_flag, cfg.seed)?;
    let seed = if cfg.first.needs_seed() || cfg.second.needs_seed() {
        Some(require_seed(resolved)?)
    } else {
        resolved
    };
    cfg.seed = seed;

    let (continuous, categorical, rescale) = match &cfg.first {
        ModelConfig::Generic {
            continuous,
            categorical,
            rescale,
            ..
        } => (continuous.clone(), categorical.clone(), *rescale),
        ModelConfig::Quadratic { columns, .. } => {
            (columns.clone(), None, config::RescaleRule::None)
        }
        ModelConfig::Multinomial { .. } => unreachable!("rejected by read_schema"),
    };
    let table = ingest_table(&cfg.data, &continuous, categorical.as_ref(), rescale)?;
    let base = base_slice(&table, cfg.base_rows)?;
    let data_block = DataBlock {
        path: cfg.data.display().to_string(),
        rows: table.n_rows(),
        base_rows: base.nrows(),
        column_scales: table.scales.clone(),
        level_labels: table.level_labels.clone(),
        level_counts: table.level_counts.clone(),
    };

    let first = prepare_candidate(&cfg.first, &base, &table, &cfg.sampler, cfg.psi_draws, seed, 0)?;
    let second =
        prepare_candidate(&cfg.second, &base, &table, &cfg.sampler, cfg.psi_draws, seed, 1)?;
    let comparison = compare_fitted(&first, &second, &base, &threshold)?;

    let block = |fitted: &pipeline::FittedModel, kind: &'static str| CandidateBlock {
        model: ModelBlock {
            kind,
            p: fitted.model.p(),
            raw_dim: fitted.model.raw_dim(),
            filter: fitted.filter.clone(),
        },
        fit: fitted.solution.clone(),
        sampling: fitted.sampling.clone(),
    };
    emit(
        &CompareDoc {
            schema: SCHEMA_VERSION,
            command: "compare",
            first: block(&first.fitted, kind_name(&cfg.first)),
            second: block(&second.fitted, kind_name(&cfg.second)),
            config: cfg,
            data: data_block,
            comparison,
        },
        output,
    )
}
