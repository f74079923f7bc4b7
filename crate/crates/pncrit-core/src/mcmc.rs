//! Seeded sampling from `g(x; theta) ∝ exp(theta . xi(x)) r(x)`.
//!
//! Models with tractable distributions (categorical cells, Gaussian
//! sufficient statistics) are sampled exactly. The generic interaction
//! model is sampled with a component-wise random-walk Metropolis kernel
//! over the continuous coordinates — no normalizing constant is ever
//! needed, because acceptance ratios only involve `theta . xi` and the
//! reference density — plus an independence proposal from the reference
//! for the categorical block. Proposal scales adapt toward 0.44
//! acceptance during burn-in and are frozen afterwards, so the
//! post-burn-in kernel is a fixed Markov kernel with the right
//! stationary law.
//!
//! Chains are reproducible: chain `c` of a run with seed `s` uses an
//! independent counter-based stream derived from `(s, c)`, so the same
//! [`ChainConfig`] always yields the same draw matrix, regardless of how
//! chains are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expfam::{ExpFamily, GenericModel};

/// Target acceptance rate for the adaptive random-walk scales.
const TARGET_ACCEPTANCE: f64 = 0.44;
/// Acceptance rate below which a chain is reported as degenerate.
const MIN_ACCEPTANCE: f64 = 0.01;

/// Sampler run parameters. `steps` counts all kernel sweeps per chain,
/// including burn-in; kept draws are the post-burn-in states, thinned.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub steps: usize,
    /// Initial random-walk standard deviation for every continuous coordinate.
    pub initial_scale: f64,
    pub seed: u64,
    /// Adapt proposal scales during burn-in (frozen afterwards regardless).
    pub adapt: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 4,
            burn_in: 2_000,
            thin: 1,
            steps: 12_000,
            initial_scale: 0.25,
            seed: 0,
            adapt: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be at least 1".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.initial_scale <= 0.0 || self.initial_scale.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "initial_scale must be positive, got {}",
                self.initial_scale
            )));
        }
        Ok(())
    }

    /// Number of kept draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.steps - self.burn_in).div_ceil(self.thin)
    }

    /// Total kept draws across chains.
    pub fn total_kept(&self) -> usize {
        self.n_chains * self.kept_per_chain()
    }
}

/// Output of [`sample_model`]: kept draws in observation space (one raw
/// row per draw, chains concatenated in order) plus diagnostics.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub draws: DMatrix<f64>,
    /// Post-burn-in acceptance rate per chain (1.0 on exact paths).
    pub acceptance: Vec<f64>,
    /// Final per-coordinate proposal scales per chain (empty on exact paths).
    pub scales: Vec<Vec<f64>>,
    /// Whether the exact sampler was used instead of the Markov kernel.
    pub exact: bool,
    pub kept_per_chain: usize,
}

impl McmcRun {
    /// Largest absolute difference, over coordinates, between first-half and
    /// second-half means of each chain's kept draws. A cheap stationarity
    /// diagnostic: large values flag chains that were still drifting.
    pub fn split_mean_discrepancy(&self) -> Vec<f64> {
        let k = self.kept_per_chain;
        let half = k / 2;
        let cols = self.draws.ncols();
        let n_chains = self.draws.nrows().checked_div(k).unwrap_or(0);
        let mut out = Vec::with_capacity(n_chains);
        for c in 0..n_chains {
            let base = c * k;
            let mut worst = 0.0f64;
            for j in 0..cols {
                let mut a = 0.0;
                let mut b = 0.0;
                for t in 0..half {
                    a += self.draws[(base + t, j)];
                    b += self.draws[(base + k - half + t, j)];
                }
                worst = worst.max(((a - b) / half as f64).abs());
            }
            out.push(worst);
        }
        out
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Draw from the model at `theta`, delegating to exact samplers where the
/// distribution is tractable and running Metropolis chains otherwise.
pub fn sample_model(model: &ExpFamily, theta: &DVector<f64>, cfg: &ChainConfig) -> Result<McmcRun> {
    cfg.validate()?;
    if theta.len() != model.p() {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, model has p={}",
            theta.len(),
            model.p()
        )));
    }
    match model {
        ExpFamily::Multinomial(m) => {
            let probs = m.probs(theta);
            exact_run(cfg, 1, move |rng, row| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut cell = probs.len() - 1;
                for (c, &q) in probs.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        cell = c;
                        break;
                    }
                }
                row[0] = cell as f64;
            })
        }
        ExpFamily::Quadratic(q) => {
            let eta = q.eta(theta);
            let l = q.chol_l().clone();
            let p = q.p();
            exact_run(cfg, p, move |rng, row| {
                let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let x = &eta + &l * z;
                row.copy_from_slice(x.as_slice());
            })
        }
        ExpFamily::Generic(g) => generic_run(g, theta, cfg),
    }
}

/// Run the per-chain/kept-draw bookkeeping for a model with an exact sampler.
fn exact_run<F>(cfg: &ChainConfig, row_width: usize, mut draw_one: F) -> Result<McmcRun>
where
    F: FnMut(&mut ChaCha8Rng, &mut [f64]) + Send + Sync,
{
    let kept = cfg.kept_per_chain();
    let mut draws = DMatrix::zeros(cfg.n_chains * kept, row_width);
    let mut row = vec![0.0f64; row_width];
    for chain in 0..cfg.n_chains {
        let mut rng = chain_rng(cfg.seed, chain);
        for t in 0..kept {
            draw_one(&mut rng, &mut row);
            for j in 0..row_width {
                draws[(chain * kept + t, j)] = row[j];
            }
        }
    }
    Ok(McmcRun {
        draws,
        acceptance: vec![1.0; cfg.n_chains],
        scales: vec![Vec::new(); cfg.n_chains],
        exact: true,
        kept_per_chain: kept,
    })
}

struct ChainOutput {
    rows: Vec<f64>,
    acceptance: f64,
    scales: Vec<f64>,
}

fn generic_run(g: &GenericModel, theta: &DVector<f64>, cfg: &ChainConfig) -> Result<McmcRun> {
    let kept = cfg.kept_per_chain();
    let width = g.raw_dim();
    let outputs: Vec<ChainOutput> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| generic_chain(g, theta, cfg, chain))
        .collect::<Result<_>>()?;
    let mut draws = DMatrix::zeros(cfg.n_chains * kept, width);
    for (chain, out) in outputs.iter().enumerate() {
        for t in 0..kept {
            for j in 0..width {
                draws[(chain * kept + t, j)] = out.rows[t * width + j];
            }
        }
    }
    Ok(McmcRun {
        draws,
        acceptance: outputs.iter().map(|o| o.acceptance).collect(),
        scales: outputs.into_iter().map(|o| o.scales).collect(),
        exact: false,
        kept_per_chain: kept,
    })
}

fn generic_chain(
    g: &GenericModel,
    theta: &DVector<f64>,
    cfg: &ChainConfig,
    chain: usize,
) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let n_cont = g.n_cont();
    let has_cat = g.cat_levels() > 0;
    let width = g.raw_dim();

    let beta_dists: Vec<BetaDist<f64>> = g
        .betas()
        .iter()
        .map(|&(a, b)| BetaDist::new(a, b).expect("model Beta parameters are positive"))
        .collect();
    let draw_cat = |rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &q) in g.cat_probs().iter().enumerate() {
            acc += q;
            if u < acc {
                return i + 1;
            }
        }
        g.cat_levels()
    };

    // initial state from the reference measure
    let mut x = vec![0.0f64; width];
    for (j, d) in beta_dists.iter().enumerate() {
        x[j] = d.sample(&mut rng);
    }
    if has_cat {
        x[n_cont] = draw_cat(&mut rng) as f64;
    }
    let log_target = |row: &[f64]| -> f64 {
        g.theta_dot_xi(theta, row)
            + g.reference_log_density(row)
                .expect("chain state stays inside the reference support")
    };
    let mut lt = log_target(&x);

    let mut log_scales = vec![cfg.initial_scale.ln(); n_cont];
    let mut adapt_count = vec![0u64; n_cont];
    // post-burn-in acceptance tallies, per coordinate (categorical last)
    let n_blocks = n_cont + usize::from(has_cat);
    let mut tries = vec![0u64; n_blocks];
    let mut accepts = vec![0u64; n_blocks];

    let mut rows = Vec::with_capacity(cfg.kept_per_chain() * width);
    let mut prop = x.clone();
    for step in 0..cfg.steps {
        let adapting = cfg.adapt && step < cfg.burn_in;
        let counting = step >= cfg.burn_in;
        for j in 0..n_cont {
            let z: f64 = rng.sample(StandardNormal);
            let cand = x[j] + log_scales[j].exp() * z;
            let alpha = if cand > 0.0 && cand < 1.0 {
                prop.copy_from_slice(&x);
                prop[j] = cand;
                let lt_new = log_target(&prop);
                let a = (lt_new - lt).exp().min(1.0);
                if rng.gen::<f64>() < a {
                    x[j] = cand;
                    lt = lt_new;
                    if counting {
                        accepts[j] += 1;
                    }
                }
                a
            } else {
                0.0
            };
            if counting {
                tries[j] += 1;
            }
            if adapting {
                adapt_count[j] += 1;
                let gamma = (adapt_count[j] as f64).powf(-0.7);
                log_scales[j] += gamma * (alpha - TARGET_ACCEPTANCE);
            }
        }
        if has_cat {
            let cand = draw_cat(&mut rng) as f64;
            let current = x[n_cont];
            if cand != current {
                prop.copy_from_slice(&x);
                prop[n_cont] = cand;
                let lt_new = log_target(&prop);
                // independence proposal from the reference: the categorical
                // reference factor cancels against the proposal density
                let q_new = g.cat_probs()[cand as usize - 1].ln();
                let q_cur = g.cat_probs()[current as usize - 1].ln();
                let log_alpha = (lt_new - q_new) - (lt - q_cur);
                if rng.gen::<f64>().ln() < log_alpha {
                    x[n_cont] = cand;
                    lt = lt_new;
                    if counting {
                        accepts[n_cont] += 1;
                    }
                }
            } else if counting {
                // proposing the current level always "accepts"
                accepts[n_cont] += 1;
            }
            if counting {
                tries[n_cont] += 1;
            }
        }
        if step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0 {
            rows.extend_from_slice(&x);
        }
    }

    for j in 0..n_blocks {
        let rate = accepts[j] as f64 / tries[j] as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::DegenerateProposal { coord: j, rate });
        }
    }
    let total_tries: u64 = tries.iter().sum();
    let total_accepts: u64 = accepts.iter().sum();
    Ok(ChainOutput {
        rows,
        acceptance: total_accepts as f64 / total_tries as f64,
        scales: log_scales.iter().map(|s| s.exp()).collect(),
    })
}
