//! Moment and cumulant estimators feeding the risk engines.
//!
//! Two families of inputs are produced here:
//!
//! * **Score-moment tensors** ([`MomentTensors`]) for general models: the
//!   information matrices `G`, `G~`, `G*` together with every expectation of
//!   products of log-density derivatives up to total order four, plus the
//!   model-expected third and fourth derivative tensors. These drive
//!   [`crate::risk::second_order_general`].
//! * **Cumulants of the sufficient statistic** ([`CumulantSet`]) for
//!   exponential families: the empirical covariance and third central moment
//!   of `xi`, and the model-side third/fourth cumulants. These drive
//!   [`crate::risk::second_order_expfam`].
//!
//! Empirical averages divide by `n` (not `n - 1`) throughout, matching the
//! plug-in estimators the expansion is derived for.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Tensor3, Tensor4};

/// Where a set of moments came from; carried along for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MomentSource {
    Analytic,
    Sampled { n_draws: usize },
    Empirical { n: usize },
}

/// A model exposing log-density derivatives in the parameter.
///
/// `x` is one observation as a raw row slice; its layout is the model's
/// business. Derivative defaults fall back to central finite differences
/// with steps `eps^(1/(order+1)) * max(1, |theta_k|)`; models with closed
/// forms should override them.
pub trait LogDensityModel: Sync {
    /// Number of free parameters.
    fn dim(&self) -> usize;

    /// Log density of one observation at `theta` (including any reference
    /// density factor, so values are comparable across models).
    fn log_density(&self, x: &[f64], theta: &DVector<f64>) -> f64;

    /// Gradient of the log density in `theta`.
    fn grad_log(&self, x: &[f64], theta: &DVector<f64>) -> DVector<f64> {
        let p = self.dim();
        let mut g = DVector::zeros(p);
        let mut th = theta.clone();
        for k in 0..p {
            let h = fd_step(theta[k], 1);
            th[k] = theta[k] + h;
            let up = self.log_density(x, &th);
            th[k] = theta[k] - h;
            let dn = self.log_density(x, &th);
            th[k] = theta[k];
            g[k] = (up - dn) / (2.0 * h);
        }
        g
    }

    /// Hessian of the log density in `theta`.
    fn hess_log(&self, x: &[f64], theta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.dim();
        let f0 = self.log_density(x, theta);
        let mut h = DMatrix::zeros(p, p);
        let mut th = theta.clone();
        for k in 0..p {
            let hk = fd_step(theta[k], 2);
            th[k] = theta[k] + hk;
            let up = self.log_density(x, &th);
            th[k] = theta[k] - hk;
            let dn = self.log_density(x, &th);
            th[k] = theta[k];
            h[(k, k)] = (up - 2.0 * f0 + dn) / (hk * hk);
            for l in (k + 1)..p {
                let hl = fd_step(theta[l], 2);
                let mut eval = |sk: f64, sl: f64| {
                    th[k] = theta[k] + sk * hk;
                    th[l] = theta[l] + sl * hl;
                    let v = self.log_density(x, &th);
                    th[k] = theta[k];
                    th[l] = theta[l];
                    v
                };
                let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * hk * hl);
                h[(k, l)] = v;
                h[(l, k)] = v;
            }
        }
        h
    }

    /// Third derivative tensor of the log density in `theta`.
    fn d3_log(&self, x: &[f64], theta: &DVector<f64>) -> Tensor3 {
        let p = self.dim();
        let mut out = Tensor3::zeros(p);
        for i in 0..p {
            for j in i..p {
                for k in j..p {
                    let v = mixed_partial(self, x, theta, &[i, j, k]);
                    for (a, b, c) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        out.set(a, b, c, v);
                    }
                }
            }
        }
        out
    }

    /// Fourth derivative tensor of the log density in `theta`.
    fn d4_log(&self, x: &[f64], theta: &DVector<f64>) -> Tensor4 {
        let p = self.dim();
        let mut out = Tensor4::zeros(p);
        for i in 0..p {
            for j in i..p {
                for k in j..p {
                    for l in k..p {
                        let v = mixed_partial(self, x, theta, &[i, j, k, l]);
                        scatter_sym4(&mut out, [i, j, k, l], v);
                    }
                }
            }
        }
        out
    }
}

/// Write `v` into every permutation of the (possibly repeated) index tuple.
fn scatter_sym4(out: &mut Tensor4, idx: [usize; 4], v: f64) {
    const PERMS: [[usize; 4]; 24] = [
        [0, 1, 2, 3],
        [0, 1, 3, 2],
        [0, 2, 1, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
        [0, 3, 2, 1],
        [1, 0, 2, 3],
        [1, 0, 3, 2],
        [1, 2, 0, 3],
        [1, 2, 3, 0],
        [1, 3, 0, 2],
        [1, 3, 2, 0],
        [2, 0, 1, 3],
        [2, 0, 3, 1],
        [2, 1, 0, 3],
        [2, 1, 3, 0],
        [2, 3, 0, 1],
        [2, 3, 1, 0],
        [3, 0, 1, 2],
        [3, 0, 2, 1],
        [3, 1, 0, 2],
        [3, 1, 2, 0],
        [3, 2, 0, 1],
        [3, 2, 1, 0],
    ];
    for perm in PERMS {
        out.set(idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]], v);
    }
}

/// Central-difference stencil (offset multiples of `h`, weight) for a pure
/// derivative of the given order, second-order accurate.
fn central_stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Mixed partial derivative of the log density along the given axes
/// (repetitions allowed), as a tensor product of 1-D central stencils
/// applied directly to the log density. Differencing the density itself —
/// rather than nesting differences of lower-order differences — keeps the
/// round-off level at `eps / h^order` instead of compounding it.
fn mixed_partial<M: LogDensityModel + ?Sized>(
    model: &M,
    x: &[f64],
    theta: &DVector<f64>,
    axes_with_repeats: &[usize],
) -> f64 {
    let total = axes_with_repeats.len() as u32;
    // group repeated axes into (axis, multiplicity)
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &a in axes_with_repeats {
        match groups.last_mut() {
            Some((axis, count)) if *axis == a => *count += 1,
            _ => groups.push((a, 1)),
        }
    }
    let stencils: Vec<&[(i32, f64)]> = groups.iter().map(|&(_, m)| central_stencil(m)).collect();
    let steps: Vec<f64> = groups
        .iter()
        .map(|&(axis, _)| fd_step(theta[axis], total))
        .collect();
    let mut th = theta.clone();
    let mut node = vec![0usize; groups.len()];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for (g, &(axis, _)) in groups.iter().enumerate() {
            let (off, wt) = stencils[g][node[g]];
            th[axis] = theta[axis] + f64::from(off) * steps[g];
            w *= wt;
        }
        acc += w * model.log_density(x, &th);
        // odometer over the stencil nodes
        let mut g = 0;
        loop {
            if g == groups.len() {
                let denom: f64 = groups
                    .iter()
                    .zip(&steps)
                    .map(|(&(_, m), &h)| h.powi(m as i32))
                    .product();
                return acc / denom;
            }
            node[g] += 1;
            if node[g] < stencils[g].len() {
                break;
            }
            node[g] = 0;
            th[groups[g].0] = theta[groups[g].0];
            g += 1;
        }
    }
}

/// Central-difference step for a derivative of the given order.
pub fn fd_step(theta_k: f64, order: u32) -> f64 {
    f64::EPSILON.powf(1.0 / (order as f64 + 1.0)) * theta_k.abs().max(1.0)
}

/// Data-side score moments of a general model at the fitted parameter.
#[derive(Debug, Clone)]
pub struct DataSideMoments {
    pub g: DMatrix<f64>,
    pub gtilde: DMatrix<f64>,
    /// `E_n[d3 log g]`, fully symmetric.
    pub l3_sym: Tensor3,
    /// `E_n[d2 log g . d1 log g]`, symmetric in the first pair.
    pub l3_pair: Tensor3,
    /// `E_n[d1 . d1 . d1]`, fully symmetric.
    pub l3_raw: Tensor3,
    /// `E_n[d4 log g]`, fully symmetric.
    pub l4_sym: Tensor4,
    /// `E_n[d2 . d2]`, symmetric in each pair and under pair swap.
    pub l4_pair_pair: Tensor4,
    /// `E_n[d3 . d1]`, symmetric in the first triple.
    pub l4_triple: Tensor4,
    /// `E_n[d2 . d1 . d1]`, symmetric in the first and in the last pair.
    pub l4_pair: Tensor4,
    pub n: usize,
}

/// Model-side expectations at the fitted parameter.
#[derive(Debug, Clone)]
pub struct ModelSideMoments {
    /// Fisher metric of the model at `theta`: `E_theta[d1 . d1]`.
    pub gstar: DMatrix<f64>,
    /// `E_theta[d3 log g]`.
    pub tau3: Tensor3,
    /// `E_theta[d4 log g]`.
    pub tau4: Tensor4,
    pub source: MomentSource,
}

/// Everything the general second-order engine needs.
#[derive(Debug, Clone)]
pub struct MomentTensors {
    pub p: usize,
    pub g: DMatrix<f64>,
    pub gtilde: DMatrix<f64>,
    pub gstar: DMatrix<f64>,
    pub l3_sym: Tensor3,
    pub l3_pair: Tensor3,
    pub l3_raw: Tensor3,
    pub l4_sym: Tensor4,
    pub l4_pair_pair: Tensor4,
    pub l4_triple: Tensor4,
    pub l4_pair: Tensor4,
    pub tau3: Tensor3,
    pub tau4: Tensor4,
}

impl MomentTensors {
    /// Combine data-side and model-side pieces, checking dimensions.
    pub fn assemble(data: DataSideMoments, model: ModelSideMoments) -> Result<Self> {
        let p = data.g.nrows();
        if model.gstar.nrows() != p || model.tau3.p() != p || model.tau4.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "model-side moments have p={}, data-side p={p}",
                model.gstar.nrows()
            )));
        }
        Ok(MomentTensors {
            p,
            g: data.g,
            gtilde: data.gtilde,
            gstar: model.gstar,
            l3_sym: data.l3_sym,
            l3_pair: data.l3_pair,
            l3_raw: data.l3_raw,
            l4_sym: data.l4_sym,
            l4_pair_pair: data.l4_pair_pair,
            l4_triple: data.l4_triple,
            l4_pair: data.l4_pair,
            tau3: model.tau3,
            tau4: model.tau4,
        })
    }

    /// Build the tensor set for an exponential family from its cumulants.
    ///
    /// For `log g = theta . xi - Psi`, the derivative products collapse:
    /// third and fourth derivatives are constant in `x` (so the mixed kinds
    /// with an odd score factor vanish at the MLE, where the mean score is
    /// zero), `d2 = -Psi''` pulls out of expectations, and the raw score
    /// products become central moments of `xi`. `sigma_hat` and `kappa3_hat`
    /// are the data-side covariance and third central moment of `xi`;
    /// `psi_dd`, `kappa3_star`, `kappa4_star` are model-side at the fit.
    pub fn from_expfam_cumulants(
        sigma_hat: &DMatrix<f64>,
        psi_dd: &DMatrix<f64>,
        kappa3_hat: &Tensor3,
        kappa3_star: &Tensor3,
        kappa4_star: &Tensor4,
    ) -> Result<Self> {
        let p = sigma_hat.nrows();
        if psi_dd.nrows() != p
            || kappa3_hat.p() != p
            || kappa3_star.p() != p
            || kappa4_star.p() != p
        {
            return Err(Error::DimensionMismatch(
                "exponential-family cumulant dimensions disagree".into(),
            ));
        }
        let mut l3_sym = kappa3_star.clone();
        l3_sym.scale(-1.0);
        let mut l4_sym = kappa4_star.clone();
        l4_sym.scale(-1.0);
        let l4_pair_pair =
            Tensor4::from_fn(p, |i, j, k, l| psi_dd[(i, j)] * psi_dd[(k, l)]);
        let l4_pair =
            Tensor4::from_fn(p, |i, j, k, l| -psi_dd[(i, j)] * sigma_hat[(k, l)]);
        let tau3 = l3_sym.clone();
        let tau4 = l4_sym.clone();
        Ok(MomentTensors {
            p,
            g: sigma_hat.clone(),
            gtilde: psi_dd.clone(),
            gstar: psi_dd.clone(),
            l3_sym,
            l3_pair: Tensor3::zeros(p),
            l3_raw: kappa3_hat.clone(),
            l4_sym,
            l4_pair_pair,
            l4_triple: Tensor4::zeros(p),
            l4_pair,
            tau3,
            tau4,
        })
    }
}

/// Cumulants of the sufficient statistic for the exponential-family engine.
#[derive(Debug, Clone)]
pub struct CumulantSet {
    /// Empirical covariance of `xi` (divides by `n`).
    pub sigma_hat: DMatrix<f64>,
    /// Empirical third central moment of `xi`.
    pub kappa3_hat: Tensor3,
    /// Model third cumulant at the fit, once computed.
    pub kappa3_star: Option<Tensor3>,
    /// Model fourth cumulant at the fit, once computed.
    pub kappa4_star: Option<Tensor4>,
    pub n: usize,
}

/// Mean, covariance and third central moment of the rows of `xi`.
///
/// This is the shared workhorse for both the data side (`n` observations)
/// and the sampled model side (`n` draws).
pub fn xi_mean_cov_mu3(xi: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>, Tensor3)> {
    let n = xi.nrows();
    let p = xi.ncols();
    if n == 0 {
        return Err(Error::NNotPositive);
    }
    if !xi.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteDerivative("xi matrix".into()));
    }
    let mut mean = DVector::zeros(p);
    for t in 0..n {
        for a in 0..p {
            mean[a] += xi[(t, a)];
        }
    }
    mean /= n as f64;

    let mut cov = DMatrix::zeros(p, p);
    let mut mu3 = Tensor3::zeros(p);
    let mut c = vec![0.0f64; p];
    for t in 0..n {
        for a in 0..p {
            c[a] = xi[(t, a)] - mean[a];
        }
        for a in 0..p {
            let ca = c[a];
            for b in a..p {
                cov[(a, b)] += ca * c[b];
            }
            for b in a..p {
                let cab = ca * c[b];
                for (d, cd) in c.iter().enumerate().take(p).skip(b) {
                    mu3.add(a, b, d, cab * cd);
                }
            }
        }
    }
    let nf = n as f64;
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / nf;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    // scatter the sorted-index accumulation onto all permutations
    let mut full = Tensor3::zeros(p);
    for a in 0..p {
        for b in a..p {
            for d in b..p {
                let v = mu3.get(a, b, d) / nf;
                let mut seen = [[0usize; 3]; 6];
                let mut count = 0;
                for perm in [
                    [a, b, d],
                    [a, d, b],
                    [b, a, d],
                    [b, d, a],
                    [d, a, b],
                    [d, b, a],
                ] {
                    if !seen[..count].contains(&perm) {
                        seen[count] = perm;
                        count += 1;
                        full.set(perm[0], perm[1], perm[2], v);
                    }
                }
            }
        }
    }
    Ok((mean, cov, full))
}

/// Empirical fourth central moment of the rows of `xi` (divides by `n`).
///
/// The `p^4 * n` accumulation is chunked over rows and parallelized; chunk
/// partials are reduced in order, so results do not depend on thread count.
pub fn xi_mu4(xi: &DMatrix<f64>, mean: &DVector<f64>) -> Result<Tensor4> {
    let n = xi.nrows();
    let p = xi.ncols();
    if n == 0 {
        return Err(Error::NNotPositive);
    }
    let rows: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = rows
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = vec![0.0f64; p * p * p * p];
            let mut c = vec![0.0f64; p];
            for &t in chunk {
                for a in 0..p {
                    c[a] = xi[(t, a)] - mean[a];
                }
                for a in 0..p {
                    let ca = c[a];
                    for b in a..p {
                        let cab = ca * c[b];
                        for d in b..p {
                            let cabd = cab * c[d];
                            let base = ((a * p + b) * p + d) * p;
                            for e in d..p {
                                acc[base + e] += cabd * c[e];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut sorted = vec![0.0f64; p * p * p * p];
    for part in partials {
        for (s, v) in sorted.iter_mut().zip(part) {
            *s += v;
        }
    }
    let nf = n as f64;
    let mut full = Tensor4::zeros(p);
    for a in 0..p {
        for b in a..p {
            for d in b..p {
                for e in d..p {
                    let v = sorted[((a * p + b) * p + d) * p + e] / nf;
                    distribute_sym4(&mut full, [a, b, d, e], v);
                }
            }
        }
    }
    if !full.is_finite() {
        return Err(Error::NonFiniteDerivative("fourth moment of xi".into()));
    }
    Ok(full)
}

fn distribute_sym4(t: &mut Tensor4, idx: [usize; 4], v: f64) {
    let mut perms: Vec<[usize; 4]> = Vec::with_capacity(24);
    let [a, b, c, d] = idx;
    for x in [
        [a, b, c, d],
        [a, b, d, c],
        [a, c, b, d],
        [a, c, d, b],
        [a, d, b, c],
        [a, d, c, b],
        [b, a, c, d],
        [b, a, d, c],
        [b, c, a, d],
        [b, c, d, a],
        [b, d, a, c],
        [b, d, c, a],
        [c, a, b, d],
        [c, a, d, b],
        [c, b, a, d],
        [c, b, d, a],
        [c, d, a, b],
        [c, d, b, a],
        [d, a, b, c],
        [d, a, c, b],
        [d, b, a, c],
        [d, b, c, a],
        [d, c, a, b],
        [d, c, b, a],
    ] {
        if !perms.contains(&x) {
            perms.push(x);
            t.set(x[0], x[1], x[2], x[3], v);
        }
    }
}

/// Empirical covariance and third central moment of the sufficient
/// statistic; the model-side cumulants stay unset.
pub fn empirical_xi_cumulants(xi: &DMatrix<f64>) -> Result<CumulantSet> {
    let (_, sigma_hat, kappa3_hat) = xi_mean_cov_mu3(xi)?;
    Ok(CumulantSet {
        sigma_hat,
        kappa3_hat,
        kappa3_star: None,
        kappa4_star: None,
        n: xi.nrows(),
    })
}

/// Third and fourth cumulants from model draws of `xi` (rows).
///
/// `kappa3 = mu3`; `kappa4 = mu4 - three products of the covariance`.
pub fn cumulants_from_draws(xi: &DMatrix<f64>) -> Result<(DMatrix<f64>, Tensor3, Tensor4)> {
    let (mean, cov, mu3) = xi_mean_cov_mu3(xi)?;
    let mu4 = xi_mu4(xi, &mean)?;
    let p = cov.nrows();
    let kappa4 = Tensor4::from_fn(p, |i, j, k, l| {
        mu4.get(i, j, k, l)
            - cov[(i, j)] * cov[(k, l)]
            - cov[(i, k)] * cov[(j, l)]
            - cov[(i, l)] * cov[(j, k)]
    });
    Ok((cov, mu3, kappa4))
}

/// Average the score moments of a general model over observations.
///
/// Rows of `data` are raw observations in the model's layout. All eight
/// data-side tensors are accumulated in one pass at the fitted `theta`.
pub fn empirical_score_moments(
    model: &dyn LogDensityModel,
    data: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Result<DataSideMoments> {
    let n = data.nrows();
    let p = model.dim();
    if n == 0 {
        return Err(Error::NNotPositive);
    }
    let mut g = DMatrix::zeros(p, p);
    let mut gtilde = DMatrix::zeros(p, p);
    let mut l3_sym = Tensor3::zeros(p);
    let mut l3_pair = Tensor3::zeros(p);
    let mut l3_raw = Tensor3::zeros(p);
    let mut l4_sym = Tensor4::zeros(p);
    let mut l4_pair_pair = Tensor4::zeros(p);
    let mut l4_triple = Tensor4::zeros(p);
    let mut l4_pair = Tensor4::zeros(p);

    let mut row = vec![0.0f64; data.ncols()];
    for t in 0..n {
        for c in 0..data.ncols() {
            row[c] = data[(t, c)];
        }
        let s = model.grad_log(&row, theta);
        let h = model.hess_log(&row, theta);
        let t3 = model.d3_log(&row, theta);
        let t4 = model.d4_log(&row, theta);
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] += s[i] * s[j];
                gtilde[(i, j)] -= h[(i, j)];
                for k in 0..p {
                    l3_pair.add(i, j, k, h[(i, j)] * s[k]);
                    l3_raw.add(i, j, k, s[i] * s[j] * s[k]);
                    for l in 0..p {
                        l4_pair_pair.add(i, j, k, l, h[(i, j)] * h[(k, l)]);
                        l4_triple.add(i, j, k, l, t3.get(i, j, k) * s[l]);
                        l4_pair.add(i, j, k, l, h[(i, j)] * s[k] * s[l]);
                    }
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    l3_sym.add(i, j, k, t3.get(i, j, k));
                    for l in 0..p {
                        l4_sym.add(i, j, k, l, t4.get(i, j, k, l));
                    }
                }
            }
        }
    }

    let inv_n = 1.0 / n as f64;
    g.scale_mut(inv_n);
    gtilde.scale_mut(inv_n);
    l3_sym.scale(inv_n);
    l3_pair.scale(inv_n);
    l3_raw.scale(inv_n);
    l4_sym.scale(inv_n);
    l4_pair_pair.scale(inv_n);
    l4_triple.scale(inv_n);
    l4_pair.scale(inv_n);

    for (name, ok) in [
        ("G", g.iter().all(|v: &f64| v.is_finite())),
        ("Gtilde", gtilde.iter().all(|v: &f64| v.is_finite())),
        ("L3 tensors", l3_sym.is_finite() && l3_pair.is_finite() && l3_raw.is_finite()),
        (
            "L4 tensors",
            l4_sym.is_finite()
                && l4_pair_pair.is_finite()
                && l4_triple.is_finite()
                && l4_pair.is_finite(),
        ),
    ] {
        if !ok {
            return Err(Error::NonFiniteDerivative(format!(
                "empirical score moments ({name})"
            )));
        }
    }

    Ok(DataSideMoments {
        g,
        gtilde,
        l3_sym: l3_sym.symmetrize_full(),
        l3_pair: l3_pair.symmetrize_12(),
        l3_raw: l3_raw.symmetrize_full(),
        l4_sym: l4_sym.symmetrize_full(),
        l4_pair_pair,
        l4_triple,
        l4_pair,
        n,
    })
}

/// Model-side expectations for a general model, by averaging derivative
/// tensors over rows drawn from the model itself.
pub fn model_side_from_draws(
    model: &dyn LogDensityModel,
    draws: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Result<ModelSideMoments> {
    let n = draws.nrows();
    let p = model.dim();
    if n == 0 {
        return Err(Error::NNotPositive);
    }
    let mut gstar = DMatrix::zeros(p, p);
    let mut tau3 = Tensor3::zeros(p);
    let mut tau4 = Tensor4::zeros(p);
    let mut row = vec![0.0f64; draws.ncols()];
    for t in 0..n {
        for c in 0..draws.ncols() {
            row[c] = draws[(t, c)];
        }
        let s = model.grad_log(&row, theta);
        let t3 = model.d3_log(&row, theta);
        let t4 = model.d4_log(&row, theta);
        for i in 0..p {
            for j in 0..p {
                gstar[(i, j)] += s[i] * s[j];
                for k in 0..p {
                    tau3.add(i, j, k, t3.get(i, j, k));
                    for l in 0..p {
                        tau4.add(i, j, k, l, t4.get(i, j, k, l));
                    }
                }
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    gstar.scale_mut(inv_n);
    tau3.scale(inv_n);
    tau4.scale(inv_n);
    if !gstar.iter().all(|v: &f64| v.is_finite()) || !tau3.is_finite() || !tau4.is_finite() {
        return Err(Error::NonFiniteDerivative("model-side moments".into()));
    }
    Ok(ModelSideMoments {
        gstar,
        tau3: tau3.symmetrize_full(),
        tau4: tau4.symmetrize_full(),
        source: MomentSource::Sampled { n_draws: n },
    })
}
