//! Maximum-likelihood fitting: solve `eta(theta) = eta_hat` for the
//! natural parameter, where `eta_hat` is the sample mean of the
//! sufficient statistic.
//!
//! Three paths exist:
//!
//! * **Closed form** for the categorical model (log count ratios) and the
//!   quadratic model (one symmetric solve).
//! * **Damped Newton** on the convex dual problem for any model with an
//!   analytic mean map: `theta <- theta - lambda PsiDD(theta)^{-1}
//!   (eta(theta) - eta_hat)`, halving `lambda` until the residual
//!   decreases.
//! * **Sampled Newton** for models without closed-form cumulants: each
//!   iteration estimates `eta(theta)` and `PsiDD(theta)` by the mean and
//!   covariance of fresh model draws, and stops once the proposed update
//!   is smaller than twice its own Monte-Carlo standard error — beyond
//!   that point further iterations only chase noise.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expfam::ExpFamily;
use crate::linalg::sym_solve_vec;
use crate::mcmc::{sample_model, ChainConfig};
use crate::moments::xi_mean_cov_mu3;

/// Which algorithm produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SolvePath {
    ClosedForm,
    AnalyticNewton,
    SampledNewton { n_per_iter: usize, seed: u64 },
}

/// A fitted natural parameter with convergence diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct MleSolution {
    pub theta_hat: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of `eta(theta_hat) - eta_hat` (on the sampled path, against
    /// the final iteration's estimated mean).
    pub residual: f64,
    pub path: SolvePath,
    /// Sampled path only: estimated standard error of each `theta_hat`
    /// coordinate from the final iteration's draws.
    pub theta_se: Option<Vec<f64>>,
}

impl MleSolution {
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_hat)
    }
}

/// Options for [`solve_mle`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Max-norm residual tolerance for the analytic paths.
    pub tol: f64,
    pub max_iter: usize,
    /// Step-halving on residual increase (analytic Newton only).
    pub damping: bool,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 100,
            damping: true,
            method: Method::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Method {
    /// Closed form where one exists, sampled Newton otherwise.
    Auto,
    ClosedForm,
    Newton,
    SampledNewton(ChainConfig),
}

/// Solve `eta(theta) = eta_hat`.
pub fn solve_mle(model: &ExpFamily, eta_hat: &DVector<f64>, opts: &SolveOptions) -> Result<MleSolution> {
    if eta_hat.len() != model.p() {
        return Err(Error::DimensionMismatch(format!(
            "eta_hat has length {}, model has p={}",
            eta_hat.len(),
            model.p()
        )));
    }
    match (&opts.method, model) {
        (Method::ClosedForm, _) => closed_form(model, eta_hat),
        (Method::Newton, _) => newton(model, eta_hat, opts),
        (Method::SampledNewton(cfg), _) => sampled_newton(model, eta_hat, opts, cfg),
        (Method::Auto, ExpFamily::Generic(_)) => {
            sampled_newton(model, eta_hat, opts, &ChainConfig::default())
        }
        (Method::Auto, _) => closed_form(model, eta_hat),
    }
}

/// Direct solutions for the two tractable families.
pub fn closed_form(model: &ExpFamily, eta_hat: &DVector<f64>) -> Result<MleSolution> {
    let theta = match model {
        ExpFamily::Multinomial(m) => {
            let p = m.p();
            let m0 = 1.0 - eta_hat.sum();
            if m0 <= 0.0 {
                return Err(Error::ZeroCell(0));
            }
            for i in 0..p {
                if eta_hat[i] <= 0.0 {
                    return Err(Error::ZeroCell(i + 1));
                }
            }
            DVector::from_fn(p, |i, _| (eta_hat[i] / m0).ln())
        }
        ExpFamily::Quadratic(q) => {
            sym_solve_vec(q.q_matrix(), &(eta_hat - q.mean_vector()))
                .map_err(|e| Error::SingularJacobian(e.to_string()))?
        }
        ExpFamily::Generic(_) => {
            return Err(Error::PsiUnavailable(
                "no closed-form mean map; use the sampled Newton path",
            ))
        }
    };
    let residual = (model.eta(&theta)? - eta_hat).amax();
    Ok(MleSolution {
        theta_hat: theta.as_slice().to_vec(),
        eta_hat: eta_hat.as_slice().to_vec(),
        iterations: 0,
        residual,
        path: SolvePath::ClosedForm,
        theta_se: None,
    })
}

/// Damped Newton iteration on the analytic mean map from `theta = 0`.
pub fn newton(model: &ExpFamily, eta_hat: &DVector<f64>, opts: &SolveOptions) -> Result<MleSolution> {
    let p = model.p();
    let mut theta = DVector::zeros(p);
    let mut r = model.eta(&theta)? - eta_hat;
    let mut res = r.amax();
    for iter in 1..=opts.max_iter {
        if res <= opts.tol {
            return Ok(MleSolution {
                theta_hat: theta.as_slice().to_vec(),
                eta_hat: eta_hat.as_slice().to_vec(),
                iterations: iter - 1,
                residual: res,
                path: SolvePath::AnalyticNewton,
                theta_se: None,
            });
        }
        let jac = model.psi_dd(&theta)?;
        let step =
            sym_solve_vec(&jac, &r).map_err(|e| Error::SingularJacobian(e.to_string()))?;
        let mut lambda = 1.0;
        loop {
            let cand = &theta - lambda * &step;
            let r_cand = model.eta(&cand)? - eta_hat;
            let res_cand = r_cand.amax();
            if res_cand < res || !opts.damping {
                theta = cand;
                r = r_cand;
                res = res_cand;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(Error::MaxIterExceeded(opts.max_iter));
            }
        }
    }
    if res <= opts.tol {
        Ok(MleSolution {
            theta_hat: theta.as_slice().to_vec(),
            eta_hat: eta_hat.as_slice().to_vec(),
            iterations: opts.max_iter,
            residual: res,
            path: SolvePath::AnalyticNewton,
            theta_se: None,
        })
    } else {
        Err(Error::MaxIterExceeded(opts.max_iter))
    }
}

/// Newton iteration with sampled mean and covariance in place of the
/// analytic `eta` and `PsiDD`. Each iteration re-seeds the sampler with
/// `cfg.seed + iteration` so draws are fresh but the whole solve stays
/// deterministic.
pub fn sampled_newton(
    model: &ExpFamily,
    eta_hat: &DVector<f64>,
    opts: &SolveOptions,
    cfg: &ChainConfig,
) -> Result<MleSolution> {
    cfg.validate()?;
    let p = model.p();
    let mut theta = DVector::zeros(p);
    let n_per_iter = cfg.total_kept();
    for iter in 1..=opts.max_iter {
        let mut iter_cfg = *cfg;
        iter_cfg.seed = cfg.seed.wrapping_add(iter as u64);
        let run = sample_model(model, &theta, &iter_cfg)?;
        let xi = model.xi_matrix(&run.draws)?;
        let (eta_tilde, sigma, _) = xi_mean_cov_mu3(&xi)?;
        let sigma = &sigma;
        let r = &eta_tilde - eta_hat;
        let step = sym_solve_vec(sigma, &r).map_err(|e| {
            Error::SingularJacobian(format!("sampled covariance not invertible: {e}"))
        })?;
        // standard error of the step: se(eta)= sqrt(diag Sigma / N) pushed
        // through the same solve
        let se_eta = DVector::from_fn(p, |i, _| (sigma[(i, i)] / n_per_iter as f64).sqrt());
        let step_se = sym_solve_vec(sigma, &se_eta)
            .map_err(|e| Error::SingularJacobian(e.to_string()))?;
        let theta_next = &theta - &step;
        let stop_noise = step.norm() <= 2.0 * step_se.norm();
        let stop_tol = r.amax() <= opts.tol;
        theta = theta_next;
        if stop_noise || stop_tol {
            let theta_se: Vec<f64> = step_se.iter().map(|v| v.abs()).collect();
            return Ok(MleSolution {
                theta_hat: theta.as_slice().to_vec(),
                eta_hat: eta_hat.as_slice().to_vec(),
                iterations: iter,
                residual: r.amax(),
                path: SolvePath::SampledNewton {
                    n_per_iter,
                    seed: cfg.seed,
                },
                theta_se: Some(theta_se),
            });
        }
    }
    Err(Error::MaxIterExceeded(opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::{Multinomial, Quadratic};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn multinomial_closed_form_is_log_count_ratio() {
        let model = ExpFamily::Multinomial(Multinomial::new(3).unwrap());
        // counts (10, 20, 70) -> frequencies (0.1, 0.2, 0.7)
        let eta_hat = DVector::from_vec(vec![0.2, 0.7]);
        let sol = closed_form(&model, &eta_hat).unwrap();
        assert_relative_eq!(sol.theta_hat[0], 2.0f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(sol.theta_hat[1], 7.0f64.ln(), epsilon = 1e-14);
        assert!(sol.residual < 1e-12);
        // empty baseline cell
        let bad = DVector::from_vec(vec![0.3, 0.7]);
        assert!(matches!(
            closed_form(&model, &bad),
            Err(Error::ZeroCell(0))
        ));
    }

    #[test]
    fn quadratic_closed_form_identity_and_general() {
        let q = Quadratic::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let model = ExpFamily::Quadratic(q);
        let eta_hat = DVector::from_vec(vec![0.3, -0.1]);
        let sol = closed_form(&model, &eta_hat).unwrap();
        assert_relative_eq!(sol.theta_hat[0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(sol.theta_hat[1], -0.1, epsilon = 1e-14);

        let q = Quadratic::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]),
        )
        .unwrap();
        let model = ExpFamily::Quadratic(q);
        let eta_hat = DVector::from_vec(vec![2.0, 3.0]);
        let sol = closed_form(&model, &eta_hat).unwrap();
        assert_relative_eq!(sol.theta_hat[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sol.theta_hat[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn newton_agrees_with_closed_form_on_both_families() {
        let opts = SolveOptions {
            method: Method::Newton,
            ..SolveOptions::default()
        };
        let model = ExpFamily::Multinomial(Multinomial::new(4).unwrap());
        let eta_hat = DVector::from_vec(vec![0.15, 0.35, 0.3]);
        let newton_sol = solve_mle(&model, &eta_hat, &opts).unwrap();
        let closed_sol = closed_form(&model, &eta_hat).unwrap();
        for i in 0..3 {
            assert!((newton_sol.theta_hat[i] - closed_sol.theta_hat[i]).abs() < 1e-10);
        }
        assert!(newton_sol.residual <= 1e-10);

        let q = Quadratic::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]),
        )
        .unwrap();
        let model = ExpFamily::Quadratic(q);
        let eta_hat = DVector::from_vec(vec![2.0, 3.0]);
        let sol = solve_mle(&model, &eta_hat, &opts).unwrap();
        // the mean map is affine, so one undamped step lands exactly
        assert_eq!(sol.iterations, 1);
        assert!(sol.residual < 1e-12);
        assert_relative_eq!(sol.theta_hat[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn newton_handles_extreme_frequencies_with_damping() {
        let model = ExpFamily::Multinomial(Multinomial::new(3).unwrap());
        let eta_hat = DVector::from_vec(vec![0.001, 0.99]);
        let opts = SolveOptions {
            method: Method::Newton,
            ..SolveOptions::default()
        };
        let sol = solve_mle(&model, &eta_hat, &opts).unwrap();
        let closed_sol = closed_form(&model, &eta_hat).unwrap();
        for i in 0..2 {
            assert!((sol.theta_hat[i] - closed_sol.theta_hat[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn sampled_newton_lands_near_exact_solution_on_quadratic() {
        let q = Quadratic::new(
            DVector::from_vec(vec![0.5, -0.2]),
            DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]),
        )
        .unwrap();
        let model = ExpFamily::Quadratic(q);
        let eta_hat = DVector::from_vec(vec![1.1, 0.3]);
        let exact = closed_form(&model, &eta_hat).unwrap();
        let cfg = ChainConfig {
            n_chains: 4,
            burn_in: 0,
            thin: 1,
            steps: 25_000,
            seed: 99,
            ..ChainConfig::default()
        };
        let opts = SolveOptions {
            method: Method::SampledNewton(cfg),
            tol: 0.0, // force the noise-based stopping rule
            ..SolveOptions::default()
        };
        let sol = solve_mle(&model, &eta_hat, &opts).unwrap();
        let se = sol.theta_se.as_ref().unwrap();
        for (i, &se_i) in se.iter().enumerate() {
            let err = (sol.theta_hat[i] - exact.theta_hat[i]).abs();
            assert!(
                err < 3.0 * se_i.max(1e-4),
                "coord {i}: err {err}, se {se_i}"
            );
        }
        assert!(matches!(
            sol.path,
            SolvePath::SampledNewton {
                n_per_iter: 100_000,
                seed: 99
            }
        ));
    }

    #[test]
    fn auto_dispatch_picks_closed_form_for_tractable_families() {
        let model = ExpFamily::Multinomial(Multinomial::new(3).unwrap());
        let eta_hat = DVector::from_vec(vec![0.2, 0.3]);
        let sol = solve_mle(&model, &eta_hat, &SolveOptions::default()).unwrap();
        assert!(matches!(sol.path, SolvePath::ClosedForm));
    }
}
