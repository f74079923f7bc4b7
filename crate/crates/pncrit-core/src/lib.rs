//! Sample-size adequacy for parametric models, decided through the
//! Kullback-Leibler estimation risk of the maximum-likelihood fit.
//!
//! The library answers one question: *given a model with `p` free parameters
//! and `n` observations, is `n` large enough for the fitted model to be
//! trusted?* It does so by estimating the expected Kullback-Leibler
//! divergence between the best member of the model (the information
//! projection of the data-generating law) and the member picked by maximum
//! likelihood, expanded in powers of `1/n`:
//!
//! * a first-order term, `tr(G~^-1 G G~^-1 G*) / (2n)`, built from the three
//!   information matrices of the fit (score covariance, negative expected
//!   Hessian, and model Fisher metric) — see [`risk::first_order_general`];
//! * a second-order `1/n^2` correction, available through two independent
//!   engines: a general one driven by score-moment tensors
//!   ([`risk::second_order_general`]) and a specialized one for
//!   exponential families driven by cumulants
//!   ([`risk::second_order_expfam`]);
//! * closed forms for multinomial models ([`risk::multinomial_risk`]).
//!
//! The estimated risk is compared against a threshold derived from the
//! minimum Bayes error of a binary discrimination problem
//! ([`threshold`]): two models closer than the threshold in KL divergence
//! cannot be told apart with useful error rates, so estimation noise of that
//! size is deemed acceptable. The default threshold is `8 * alpha^2` for a
//! discrimination error target of `1/2 - alpha`.
//!
//! Supporting machinery: exponential-family models and their cumulants
//! ([`expfam`]), maximum-likelihood solvers ([`mle`]), Markov-chain and
//! exact samplers ([`mcmc`]), empirical/model moment estimators
//! ([`moments`]), and a bias-corrected cross-entropy model-selection layer
//! gated on the adequacy criterion ([`modelsel`]).

pub mod error;
pub mod expfam;
pub mod linalg;
pub mod mcmc;
pub mod mle;
pub mod modelsel;
pub mod moments;
pub mod risk;
pub mod threshold;

pub use error::{Error, Result};
