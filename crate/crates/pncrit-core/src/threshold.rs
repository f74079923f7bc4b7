//! Convert a Bayes-error closeness standard into a KL-divergence threshold.
//!
//! Two distributions that are hard to tell apart by any classifier are
//! close in a decision-theoretic sense: if their KL divergence is at most
//! `delta`, the Bayes error rate of the optimal test between them is at
//! least [`min_bayes_error_bound`]`(delta)`. Requiring that bound to stay
//! above `1/2 - alpha` yields a divergence budget `C`; the small-`delta`
//! closed form is `C = 8 alpha^2`, and [`ThresholdMode::Exact`] instead
//! inverts the bound numerically.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::ExpFamily;
use crate::mcmc::{sample_model, ChainConfig};

/// How the divergence threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Invert the minimum-Bayes-error bound numerically.
    Exact,
    /// Closed form `C = 8 alpha^2`.
    Approximate,
}

/// A divergence budget derived from a Bayes-error standard.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdSpec {
    pub alpha: f64,
    /// The KL threshold.
    pub c: f64,
    pub mode: ThresholdMode,
    /// Minimum Bayes-error bound attained at divergence `c`.
    pub min_t: f64,
}

/// Margin keeping logarithm arguments strictly positive near the domain edge.
const EDGE: f64 = 1e-12;

/// `h(x, t) = x ln((1-2t)/x + 1) + (1-x) ln((2t-1)/(1-x) + 1)`.
///
/// For fixed `x` this is strictly increasing in `t` on `(x/2, 1/2]`, from
/// `-inf` up to `h(x, 1/2) = 0`, so `h(x, t) = -delta` has a unique root.
fn h(x: f64, t: f64) -> f64 {
    x * ((1.0 - 2.0 * t) / x + 1.0).ln() + (1.0 - x) * ((2.0 * t - 1.0) / (1.0 - x) + 1.0).ln()
}

/// Root of `h(x, t) = -delta` in `t`, by bisection.
fn t_on_curve(x: f64, delta: f64) -> f64 {
    let mut lo = 0.5 * x + EDGE;
    let mut hi = 0.5;
    if h(x, lo) > -delta {
        // delta so large the curve exits the numerical domain; clamp
        return lo;
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if h(x, mid) < -delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest possible Bayes error rate between two distributions whose KL
/// divergence is `delta`: the minimum of `t` along the curve
/// `h(x, t) = -delta` over mixing weights `x` in `(0, 1)`.
///
/// Scans a log-symmetric grid of 1024 `x` values and refines the best
/// bracket by golden-section search.
pub fn min_bayes_error_bound(delta: f64) -> Result<f64> {
    if delta < 0.0 || !delta.is_finite() {
        return Err(Error::DeltaNegative(delta));
    }
    if delta == 0.0 {
        return Ok(0.5);
    }
    // 512 log-spaced points in (1e-6, 0.5], mirrored about 1/2
    const HALF_GRID: usize = 512;
    let mut xs = Vec::with_capacity(2 * HALF_GRID);
    let lo_ln = 1e-6f64.ln();
    let hi_ln = 0.5f64.ln();
    for i in 0..HALF_GRID {
        let f = i as f64 / (HALF_GRID - 1) as f64;
        let x = (lo_ln + f * (hi_ln - lo_ln)).exp();
        xs.push(x);
        xs.push(1.0 - x);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let mut best_idx = 0;
    let mut best_t = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let t = t_on_curve(x, delta);
        if t < best_t {
            best_t = t;
            best_idx = i;
        }
    }
    // golden-section refinement between the neighbors of the grid minimum
    let mut a = xs[best_idx.saturating_sub(1)];
    let mut b = xs[(best_idx + 1).min(xs.len() - 1)];
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = t_on_curve(c, delta);
    let mut fd = t_on_curve(d, delta);
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = t_on_curve(c, delta);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = t_on_curve(d, delta);
        }
    }
    Ok(best_t.min(fc).min(fd))
}

/// Small-`delta` closed-form approximation of [`min_bayes_error_bound`].
pub fn min_bayes_error_bound_approx(delta: f64) -> Result<f64> {
    if delta < 0.0 || !delta.is_finite() {
        return Err(Error::DeltaNegative(delta));
    }
    Ok(0.5 - (delta / 8.0).sqrt())
}

/// Divergence threshold enforcing a Bayes error of at least `1/2 - alpha`.
pub fn threshold_for_alpha(alpha: f64, mode: ThresholdMode) -> Result<ThresholdSpec> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    match mode {
        ThresholdMode::Approximate => {
            let c = 8.0 * alpha * alpha;
            let min_t = min_bayes_error_bound(c)?;
            Ok(ThresholdSpec {
                alpha,
                c,
                mode,
                min_t,
            })
        }
        ThresholdMode::Exact => {
            let target = 0.5 - alpha;
            // min_bayes_error_bound is monotone decreasing in delta
            let mut lo = 0.0f64;
            let mut hi = 8.0 * alpha * alpha;
            while min_bayes_error_bound(hi)? > target {
                hi *= 2.0;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if min_bayes_error_bound(mid)? > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 * hi.max(1e-30) {
                    break;
                }
            }
            let c = 0.5 * (lo + hi);
            let min_t = min_bayes_error_bound(c)?;
            Ok(ThresholdSpec {
                alpha,
                c,
                mode,
                min_t,
            })
        }
    }
}

/// Seeded Monte-Carlo estimate of a Bayes error rate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BayesErrorEstimate {
    pub er: f64,
    /// Monte-Carlo standard error of `er`.
    pub se: f64,
    pub n_draws: usize,
}

/// Bayes error rate of the optimal test between two members of the same
/// family: `(1/2) E_{theta1}[min(1, g2/g1)]` estimated from model draws.
///
/// Likelihood ratios need only `theta . xi` and the difference of log
/// normalizers; for models without a closed-form normalizer that
/// difference is itself estimated from the same draws via
/// `ln E_{theta1}[exp((theta2-theta1) . xi)]`.
pub fn bayes_error_between_members(
    model: &ExpFamily,
    theta1: &DVector<f64>,
    theta2: &DVector<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<BayesErrorEstimate> {
    if n_draws == 0 {
        return Err(Error::NNotPositive);
    }
    let cfg = if model.has_exact_sampler() {
        ChainConfig {
            n_chains: 4,
            burn_in: 0,
            thin: 1,
            steps: n_draws.div_ceil(4),
            initial_scale: 0.25,
            seed,
            adapt: false,
        }
    } else {
        ChainConfig {
            n_chains: 4,
            burn_in: 2_000,
            thin: 1,
            steps: 2_000 + n_draws.div_ceil(4),
            initial_scale: 0.25,
            seed,
            adapt: true,
        }
    };
    let run = sample_model(model, theta1, &cfg)?;
    let xi = model.xi_matrix(&run.draws)?;
    let d = theta2 - theta1;
    let n = xi.nrows();
    let mut s = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = 0.0;
        for j in 0..xi.ncols() {
            acc += d[j] * xi[(t, j)];
        }
        s.push(acc);
    }
    let delta_psi = if model.has_analytic_psi() {
        model.psi(theta2)? - model.psi(theta1)?
    } else {
        // log-mean-exp of the statistic differences, stabilized
        let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + (s.iter().map(|v| (v - mx).exp()).sum::<f64>() / n as f64).ln()
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for v in &s {
        let y = (v - delta_psi).exp().min(1.0);
        sum += y;
        sum_sq += y * y;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok(BayesErrorEstimate {
        er: 0.5 * mean,
        se: 0.5 * (var / n as f64).sqrt(),
        n_draws: n,
    })
}
