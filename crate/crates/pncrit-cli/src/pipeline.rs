//! Model construction, fitting, and risk evaluation for the
//! config-driven subcommands.

use nalgebra::{DMatrix, DVector};
use pncrit_core::expfam::{
    build_generic_model, ExpFamily, FilterReport, GenericSpec, Quadratic,
};
use pncrit_core::mcmc::sample_model;
use pncrit_core::mle::{solve_mle, Method, MleSolution, SolveOptions};
use pncrit_core::modelsel::{
    compare_models, log_normalizer_by_reference_sampling, CandidateModel, ModelComparison,
};
use pncrit_core::moments::{cumulants_from_draws, empirical_xi_cumulants};
use pncrit_core::risk::{
    evaluate_criterion, first_order_expfam, multinomial_risk, second_order_expfam,
    ExpansionOrder, RiskMethod, RiskReport,
};
use pncrit_core::threshold::ThresholdSpec;
use serde::Serialize;

use crate::config::{ModelConfig, OrderArg, SamplerConfig};
use crate::error::{classify, classify_as_config, CliError};
use crate::ingest::IngestedTable;

// Offsets deriving per-stage seeds from the run seed, so that the fit,
// the curvature draws, and the log-normalizer draws never share streams.
const CURVATURE_SEED_OFFSET: u64 = 1_000_000;
const PSI_SEED_OFFSET: u64 = 2_000_000;

impl OrderArg {
    pub fn expansion(self) -> ExpansionOrder {
        match self {
            OrderArg::First => ExpansionOrder::First,
            OrderArg::Second => ExpansionOrder::Second,
        }
    }
}

/// Where each sampled stage of a run drew from.
#[derive(Debug, Clone, Serialize)]
pub struct SamplingProvenance {
    pub fit_seed: u64,
    pub curvature_seed: u64,
    /// Kept draws used for the curvature (and tensor) estimates.
    pub curvature_draws: usize,
    /// Log-normalizer sampling, `compare` runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_draws: Option<usize>,
}

/// A fitted model with everything the report wants to show about it.
pub struct FittedModel {
    pub model: ExpFamily,
    pub solution: MleSolution,
    /// Basis filter outcome, generic models only.
    pub filter: Option<FilterReport>,
    pub sampling: Option<SamplingProvenance>,
}

fn column_means(xi: &DMatrix<f64>) -> DVector<f64> {
    let n = xi.nrows() as f64;
    DVector::from_iterator(xi.ncols(), xi.column_iter().map(|c| c.sum() / n))
}

/// Symmetric p-by-p sample covariance of the rows of `xi` (divides by n).
fn sample_covariance(xi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = xi.nrows();
    let p = xi.ncols();
    let mean = column_means(xi);
    let mut cov = DMatrix::zeros(p, p);
    for r in 0..n {
        for a in 0..p {
            let da = xi[(r, a)] - mean[a];
            for b in a..p {
                cov[(a, b)] += da * (xi[(r, b)] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Restrict a table to the rows used for fitting.
pub fn base_slice(table: &IngestedTable, base_rows: Option<usize>) -> Result<DMatrix<f64>, CliError> {
    let n = table.n_rows();
    match base_rows {
        None => Ok(table.rows.clone()),
        Some(b) => {
            if b < 2 || b > n {
                return Err(CliError::Config(format!(
                    "base_rows must lie in [2, {n}], got {b}"
                )));
            }
            Ok(table.rows.rows(0, b).into_owned())
        }
    }
}

/// Build a model from its config over the given base rows. Sampled
/// fitting uses `fit_seed`; analytic families ignore it.
pub fn build_and_fit(
    model_cfg: &ModelConfig,
    base: &DMatrix<f64>,
    table: &IngestedTable,
    sampler: &SamplerConfig,
    fit_seed: Option<u64>,
) -> Result<FittedModel, CliError> {
    match model_cfg {
        ModelConfig::Multinomial { .. } => {
            Err(CliError::Config(
                "multinomial models are screened from counts; this path needs a sampled or closed-form fit"
                    .into(),
            ))
        }
        ModelConfig::Quadratic { mean, q, .. } => {
            let d = mean.len();
            let m = DVector::from_column_slice(mean);
            let qm = DMatrix::from_fn(d, d, |i, j| q[i][j]);
            let model = ExpFamily::Quadratic(Quadratic::new(m, qm).map_err(classify_as_config)?);
            let xi = model.xi_matrix(base).map_err(classify)?;
            let eta_hat = column_means(&xi);
            let solution =
                solve_mle(&model, &eta_hat, &SolveOptions::default()).map_err(classify)?;
            Ok(FittedModel {
                model,
                solution,
                filter: None,
                sampling: None,
            })
        }
        ModelConfig::Generic { basis, .. } => {
            let seed = fit_seed.expect("seed checked before any sampled path runs");
            let spec = GenericSpec {
                include_singles: basis.singles,
                include_pairwise: basis.pairwise,
                include_cat_cross: basis.cat_cross,
                correlation_cutoff: basis.correlation_cutoff,
            };
            let (generic, filter) =
                build_generic_model(base, table.n_cont, table.cat_levels, spec)
                    .map_err(classify)?;
            let model = ExpFamily::Generic(generic);
            let xi = model.xi_matrix(base).map_err(classify)?;
            let eta_hat = column_means(&xi);
            let opts = SolveOptions {
                method: Method::SampledNewton(sampler.chain_config(seed)),
                ..SolveOptions::default()
            };
            let solution = solve_mle(&model, &eta_hat, &opts).map_err(classify)?;
            Ok(FittedModel {
                model,
                solution,
                filter: Some(filter),
                sampling: Some(SamplingProvenance {
                    fit_seed: seed,
                    curvature_seed: seed.wrapping_add(CURVATURE_SEED_OFFSET),
                    curvature_draws: 0,
                    psi_seed: None,
                    psi_draws: None,
                }),
            })
        }
    }
}

/// Draws of the sufficient statistic at the fitted parameter, for
/// model-side moment estimation on families without closed forms.
fn curvature_draws(
    fitted: &FittedModel,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<DMatrix<f64>, CliError> {
    let cfg = sampler.chain_config(seed);
    let run = sample_model(&fitted.model, &fitted.solution.theta(), &cfg).map_err(classify)?;
    fitted.model.xi_matrix(&run.draws).map_err(classify)
}

/// Evaluate the risk expansion for a fitted model on its base rows.
pub fn risk_for_fit(
    fitted: &mut FittedModel,
    base: &DMatrix<f64>,
    order: OrderArg,
    sampler: &SamplerConfig,
    threshold: &ThresholdSpec,
) -> Result<RiskReport, CliError> {
    let n = base.nrows();
    let p = fitted.model.p();
    let xi = fitted.model.xi_matrix(base).map_err(classify)?;
    let mut cumulants = empirical_xi_cumulants(&xi).map_err(classify)?;
    let theta_hat = fitted.solution.theta();

    if fitted.model.has_analytic_psi() {
        let psi_dd = fitted.model.psi_dd(&theta_hat).map_err(classify)?;
        let first = first_order_expfam(&cumulants.sigma_hat, &psi_dd, n).map_err(classify)?;
        let (second, method) = match order {
            OrderArg::First => (0.0, RiskMethod::GeneralFirstOrder),
            OrderArg::Second => {
                cumulants.kappa3_star =
                    Some(fitted.model.kappa3_star(&theta_hat).map_err(classify)?);
                cumulants.kappa4_star =
                    Some(fitted.model.kappa4_star(&theta_hat).map_err(classify)?);
                let s = second_order_expfam(&cumulants, &psi_dd, n).map_err(classify)?;
                (s, RiskMethod::ExpFamSecondOrder)
            }
        };
        return Ok(evaluate_criterion(first, second, n, p, method, threshold));
    }

    // Sampled route: estimate the model-side curvature (and, at second
    // order, the model cumulant tensors) from draws at the fit.
    let seed = fitted
        .sampling
        .as_ref()
        .map(|s| s.curvature_seed)
        .expect("sampled models always carry provenance");
    let xi_draws = curvature_draws(fitted, sampler, seed)?;
    if let Some(s) = fitted.sampling.as_mut() {
        s.curvature_draws = xi_draws.nrows();
    }
    let (first, second, method) = match order {
        OrderArg::First => {
            let psi_dd = sample_covariance(&xi_draws);
            let first =
                first_order_expfam(&cumulants.sigma_hat, &psi_dd, n).map_err(classify)?;
            (first, 0.0, RiskMethod::GeneralFirstOrder)
        }
        OrderArg::Second => {
            let (psi_dd, mu3_star, kappa4_star) =
                cumulants_from_draws(&xi_draws).map_err(classify)?;
            cumulants.kappa3_star = Some(mu3_star);
            cumulants.kappa4_star = Some(kappa4_star);
            let first =
                first_order_expfam(&cumulants.sigma_hat, &psi_dd, n).map_err(classify)?;
            let second = second_order_expfam(&cumulants, &psi_dd, n).map_err(classify)?;
            (first, second, RiskMethod::ExpFamSecondOrder)
        }
    };
    Ok(evaluate_criterion(first, second, n, p, method, threshold))
}

/// Screen a multinomial model from level counts.
pub fn multinomial_from_counts(
    counts: &[u64],
    n_eval: Option<usize>,
    order: OrderArg,
    threshold: &ThresholdSpec,
) -> Result<RiskReport, CliError> {
    multinomial_risk(counts, n_eval, order.expansion(), threshold).map_err(classify)
}

/// Sanity check that a counts vector actually defines a model.
pub fn validate_cells(counts: &[u64]) -> Result<(), CliError> {
    if counts.len() < 2 {
        return Err(CliError::Data(format!(
            "need at least two cells, got {}",
            counts.len()
        )));
    }
    Ok(())
}

/// The data schema a model config reads, used to check that two compare
/// candidates can share one ingested table.
#[derive(PartialEq)]
pub struct ReadSchema<'a> {
    continuous: &'a [String],
    categorical: Option<&'a crate::config::CategoricalConfig>,
    rescale: crate::config::RescaleRule,
}

pub fn read_schema(cfg: &ModelConfig) -> Result<ReadSchema<'_>, CliError> {
    match cfg {
        ModelConfig::Generic {
            continuous,
            categorical,
            rescale,
            ..
        } => Ok(ReadSchema {
            continuous,
            categorical: categorical.as_ref(),
            rescale: *rescale,
        }),
        ModelConfig::Quadratic { columns, .. } => Ok(ReadSchema {
            continuous: columns,
            categorical: None,
            rescale: crate::config::RescaleRule::None,
        }),
        ModelConfig::Multinomial { .. } => Err(CliError::Config(
            "compare supports generic and quadratic candidates".into(),
        )),
    }
}

/// A compare candidate with its sampled scoring inputs resolved.
pub struct PreparedCandidate {
    pub fitted: FittedModel,
    /// Sampled log-normalizer, generic candidates only.
    pub psi_value: Option<f64>,
    /// Sampled curvature, generic candidates only.
    pub gtilde: Option<DMatrix<f64>>,
}

/// Fit one compare candidate and prepare its sampled scoring inputs.
pub fn prepare_candidate(
    model_cfg: &ModelConfig,
    base: &DMatrix<f64>,
    table: &IngestedTable,
    sampler: &SamplerConfig,
    psi_draws: usize,
    seed: Option<u64>,
    side: u64,
) -> Result<PreparedCandidate, CliError> {
    let fit_seed = seed.map(|s| s.wrapping_add(side));
    let mut fitted = build_and_fit(model_cfg, base, table, sampler, fit_seed)?;
    if fitted.model.has_analytic_psi() {
        return Ok(PreparedCandidate {
            fitted,
            psi_value: None,
            gtilde: None,
        });
    }
    let run_seed = fit_seed.expect("sampled candidates demand a seed");
    let curvature_seed = run_seed.wrapping_add(CURVATURE_SEED_OFFSET);
    let psi_seed = run_seed.wrapping_add(PSI_SEED_OFFSET);
    let xi_draws = curvature_draws(&fitted, sampler, curvature_seed)?;
    let gtilde = sample_covariance(&xi_draws);
    let psi_value = log_normalizer_by_reference_sampling(
        &fitted.model,
        &fitted.solution.theta(),
        psi_draws,
        psi_seed,
    )
    .map_err(classify)?;
    if let Some(s) = fitted.sampling.as_mut() {
        s.curvature_draws = xi_draws.nrows();
        s.psi_seed = Some(psi_seed);
        s.psi_draws = Some(psi_draws);
    }
    Ok(PreparedCandidate {
        fitted,
        psi_value: Some(psi_value),
        gtilde: Some(gtilde),
    })
}

/// Run the full comparison of two fitted candidates on shared rows.
pub fn compare_fitted(
    first: &PreparedCandidate,
    second: &PreparedCandidate,
    base: &DMatrix<f64>,
    threshold: &ThresholdSpec,
) -> Result<ModelComparison, CliError> {
    let a = CandidateModel {
        model: &first.fitted.model,
        theta_hat: first.fitted.solution.theta(),
        psi_value: first.psi_value,
        gtilde: first.gtilde.clone(),
    };
    let b = CandidateModel {
        model: &second.fitted.model,
        theta_hat: second.fitted.solution.theta(),
        psi_value: second.psi_value,
        gtilde: second.gtilde.clone(),
    };
    compare_models(&a, &b, base, threshold).map_err(classify)
}
