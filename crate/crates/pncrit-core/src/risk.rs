//! Estimation-risk expansions and the sample-size decision.
//!
//! The expected KL divergence from the best model member to the fitted
//! member expands in powers of `1/n`:
//!
//! * first order: `(2n)^{-1} tr(Gtilde^{-1} G Gtilde^{-1} Gstar)`, which
//!   collapses to `p/(2n)` when the three information matrices agree
//!   (well-specified case) and to `(2n)^{-1} tr(Sigma_hat PsiDD^{-1})`
//!   for exponential families;
//! * second order: at general models, a sum of ~80 contraction terms over
//!   score-moment tensors ([`second_order_general`], evaluated from a
//!   literal coefficient table so each term is independently testable);
//!   at exponential families, a three-term cumulant contraction
//!   ([`second_order_expfam`]) evaluated by mode-wise tensor-matrix
//!   products; for the categorical model, the closed form
//!   `(M_hat - 1)/(12 n^2)` with `M_hat` the sum of inverse cell
//!   frequencies ([`multinomial_risk`]).
//!
//! The decision compares total risk against a divergence threshold `C`
//! ([`evaluate_criterion`]); [`required_sample_size`] inverts the
//! categorical criterion for planning.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{einsum, sym_inverse, sym_solve, Tensor3, Tensor4};
use crate::moments::{CumulantSet, MomentTensors};
use crate::threshold::ThresholdSpec;

/// Dimension cap for the general second-order engine (rank-4 tensors).
pub const GENERAL_ENGINE_CAP: usize = 30;
/// Dimension cap for the exponential-family second-order engine.
pub const EXPFAM_ENGINE_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Pass,
    Fail,
}

/// Which expansion produced a [`RiskReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RiskMethod {
    GeneralFirstOrder,
    GeneralSecondOrder,
    ExpFamSecondOrder,
    MultinomialClosedForm,
}

/// Risk expansion evaluated against a divergence threshold.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub first_order: f64,
    /// Zero when only the first order was requested or available.
    pub second_order: f64,
    pub total: f64,
    pub n: usize,
    pub p: usize,
    pub threshold: ThresholdSpec,
    pub decision: Decision,
    pub method: RiskMethod,
}

/// Depth of the expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionOrder {
    First,
    Second,
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::NNotPositive);
    }
    Ok(n as f64)
}

/// `(2n)^{-1} tr(Gtilde^{-1} G Gtilde^{-1} Gstar)` via two symmetric solves.
///
/// When the three matrices are identical (bitwise), returns `p/(2n)`
/// exactly rather than through the factorization.
pub fn first_order_general(
    g: &DMatrix<f64>,
    gtilde: &DMatrix<f64>,
    gstar: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let nf = check_n(n)?;
    let p = g.nrows();
    if gtilde.nrows() != p || gstar.nrows() != p || g.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "information matrices disagree: G {}x{}, Gtilde {}x{}, Gstar {}x{}",
            g.nrows(),
            g.ncols(),
            gtilde.nrows(),
            gtilde.ncols(),
            gstar.nrows(),
            gstar.ncols()
        )));
    }
    if g == gtilde && gtilde == gstar {
        return Ok(p as f64 / (2.0 * nf));
    }
    let x = sym_solve(gtilde, g)?;
    let y = sym_solve(gtilde, gstar)?;
    Ok((x * y).trace() / (2.0 * nf))
}

/// `(2n)^{-1} tr(Sigma_hat PsiDD^{-1})` — the exponential-family first
/// order, where the model metric plays both sandwich roles.
pub fn first_order_expfam(
    sigma_hat: &DMatrix<f64>,
    psi_dd: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let nf = check_n(n)?;
    let p = sigma_hat.nrows();
    if psi_dd.nrows() != p || sigma_hat.ncols() != p || psi_dd.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "Sigma_hat is {}x{}, PsiDD is {}x{}",
            sigma_hat.nrows(),
            sigma_hat.ncols(),
            psi_dd.nrows(),
            psi_dd.ncols()
        )));
    }
    if sigma_hat == psi_dd {
        return Ok(p as f64 / (2.0 * nf));
    }
    Ok(sym_solve(psi_dd, sigma_hat)?.trace() / (2.0 * nf))
}

/// The `n^2`-scaled second-order coefficient for an exponential family:
///
/// `(1/24) [ -8 <k3_hat, k3_star raised on all modes>
///           + 9 (two-k3_star sandwich with the three pairings of Sigma)
///           - 3 (k4_star raised on all modes, twice against Sigma) ]`
///
/// All raising is by `PsiDD^{-1}`; `sigma_hat` plays the data covariance
/// in the pairings. Full symmetry of the cumulants collapses the three
/// pairings of the last two groups to the closed forms used here.
pub fn second_order_coefficient_expfam(
    sigma_hat: &DMatrix<f64>,
    psi_dd: &DMatrix<f64>,
    kappa3_hat: &Tensor3,
    kappa3_star: &Tensor3,
    kappa4_star: &Tensor4,
) -> Result<f64> {
    let p = sigma_hat.nrows();
    if p > EXPFAM_ENGINE_CAP {
        return Err(Error::CapExceeded {
            p,
            cap: EXPFAM_ENGINE_CAP,
        });
    }
    if psi_dd.nrows() != p
        || kappa3_hat.p() != p
        || kappa3_star.p() != p
        || kappa4_star.p() != p
    {
        return Err(Error::DimensionMismatch(
            "cumulant tensors and matrices disagree in dimension".into(),
        ));
    }
    let a = sym_inverse(psi_dd)?;

    // raised third cumulant, all three modes
    let r1 = kappa3_star
        .mode_product(&a, 0)?
        .mode_product(&a, 1)?
        .mode_product(&a, 2)?;
    let term1 = -8.0 * kappa3_hat.frob_inner(&r1);

    // second copy raised on its first two modes only
    let r2 = kappa3_star.mode_product(&a, 0)?.mode_product(&a, 1)?;
    let mut term2 = 0.0;
    for h in 0..p {
        let m_h = DMatrix::from_fn(p, p, |u, k| r1.get(u, h, k));
        let n_h = DMatrix::from_fn(p, p, |v, w| r2.get(v, w, h));
        let mg = &m_h * sigma_hat;
        let ng = &n_h * sigma_hat;
        // pairing (ku)(vw) gives the product of traces; pairings (kv)(uw)
        // and (kw)(uv) coincide by symmetry of n_h and sigma
        term2 += mg.trace() * ng.trace() + 2.0 * (mg * ng).trace();
    }
    term2 *= 9.0;

    // fourth cumulant raised on all four modes, then closed twice with sigma
    let z = kappa4_star
        .mode_product(&a, 0)?
        .mode_product(&a, 1)?
        .mode_product(&a, 2)?
        .mode_product(&a, 3)?;
    let mut term3 = 0.0;
    for s in 0..p {
        for k in 0..p {
            let mut w = 0.0;
            for u in 0..p {
                for v in 0..p {
                    w += z.get(s, u, v, k) * sigma_hat[(u, v)];
                }
            }
            term3 += w * sigma_hat[(k, s)];
        }
    }
    term3 *= -9.0;

    Ok((term1 + term2 + term3) / 24.0)
}

/// Second-order risk term for an exponential family: the coefficient from
/// [`second_order_coefficient_expfam`] divided by `n^2`. Requires the
/// model-side cumulants to be present in the set.
pub fn second_order_expfam(
    cumulants: &CumulantSet,
    psi_dd: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let nf = check_n(n)?;
    let k3s = cumulants
        .kappa3_star
        .as_ref()
        .ok_or(Error::MissingTensor("model third cumulant"))?;
    let k4s = cumulants
        .kappa4_star
        .as_ref()
        .ok_or(Error::MissingTensor("model fourth cumulant"))?;
    let coeff = second_order_coefficient_expfam(
        &cumulants.sigma_hat,
        psi_dd,
        &cumulants.kappa3_hat,
        k3s,
        k4s,
    )?;
    Ok(coeff / (nf * nf))
}

/// One contraction term of the general second-order coefficient.
///
/// `subs` assigns index labels to each operand (comma-separated, one
/// group per operand, every label appearing exactly twice across the
/// whole term); `ops` names the operands drawn from the moment tensors.
struct TermRow {
    name: &'static str,
    coeff: f64,
    subs: &'static str,
    ops: &'static str,
}

macro_rules! rows {
    ($(($name:literal, $coeff:expr, $subs:literal, $ops:literal)),* $(,)?) => {
        &[$(TermRow { name: $name, coeff: $coeff, subs: $subs, ops: $ops }),*]
    };
}

/// The complete contraction table of the general second-order
/// coefficient. Operand key: `GS` model metric, `A` inverse of the
/// expected-Hessian matrix, `GT` expected-Hessian matrix, `G` score
/// covariance, `L3` third log-density derivative, `L21` Hessian-score
/// product, `L111` triple score product, `L4` fourth derivative, `L22`
/// Hessian-Hessian product, `L31` third-derivative-score product, `L211`
/// Hessian with two scores, `TAU3`/`TAU4` model-expected third/fourth
/// derivatives. The leading fractions of the three groups (1/2, -1/6,
/// -1/24) are folded into the coefficients.
const GENERAL_TERMS: &[TermRow] = rows![
    ("t01a", 0.5, "ij,sj,it,lm,sltm", "GS,A,A,A,L211"),
    ("t01b", 0.5, "ij,sj,it,lm,ls,tm", "GS,A,A,A,GT,G"),
    ("t02a", 0.5, "ij,si,jt,lm,sltm", "GS,A,A,A,L211"),
    ("t02b", 0.5, "ij,si,jt,lm,ls,tm", "GS,A,A,A,GT,G"),
    ("t03", 0.25, "ij,uj,ik,ls,mt,kst,lmu", "GS,A,A,A,A,L111,L3"),
    ("t04", 0.25, "ij,ui,jk,ls,mt,kst,lmu", "GS,A,A,A,A,L111,L3"),
    ("t05a", 0.5, "ij,jk,lu,is,mt,klum,st", "GS,A,A,A,A,L22,G"),
    ("t05b", -0.5, "ij,jk,lu,is,mt,kl,um,st", "GS,A,A,A,A,GT,GT,G"),
    ("t05c", 0.5, "ij,jk,lu,is,mt,kls,umt", "GS,A,A,A,A,L21,L21"),
    ("t05d", 0.5, "ij,jk,lu,is,mt,klt,ums", "GS,A,A,A,A,L21,L21"),
    ("t06a", 0.5, "ij,ik,lu,js,mt,klum,st", "GS,A,A,A,A,L22,G"),
    ("t06b", -0.5, "ij,ik,lu,js,mt,kl,um,st", "GS,A,A,A,A,GT,GT,G"),
    ("t06c", 0.5, "ij,ik,lu,js,mt,kls,umt", "GS,A,A,A,A,L21,L21"),
    ("t06d", 0.5, "ij,ik,lu,js,mt,klt,ums", "GS,A,A,A,A,L21,L21"),
    ("t07a", 0.25, "ij,jk,it,mu,sv,wl,msw,lkt,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t07b", 0.25, "ij,jk,it,mu,sv,wl,msw,lku,tv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t07c", 0.25, "ij,jk,it,mu,sv,wl,msw,lkv,tu", "GS,A,A,A,A,A,L3,L21,G"),
    ("t08a", 0.25, "ij,ik,jt,mu,sv,wl,msw,lkt,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t08b", 0.25, "ij,ik,jt,mu,sv,wl,msw,lku,tv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t08c", 0.25, "ij,ik,jt,mu,sv,wl,msw,lkv,tu", "GS,A,A,A,A,A,L3,L21,G"),
    ("t09a", 0.25, "ij,js,it,lu,mv,slmt,uv", "GS,A,A,A,A,L31,G"),
    ("t09b", 0.25, "ij,js,it,lu,mv,slmu,tv", "GS,A,A,A,A,L31,G"),
    ("t09c", 0.25, "ij,js,it,lu,mv,slmv,tu", "GS,A,A,A,A,L31,G"),
    ("t10a", 0.25, "ij,is,jt,lu,mv,slmt,uv", "GS,A,A,A,A,L31,G"),
    ("t10b", 0.25, "ij,is,jt,lu,mv,slmu,tv", "GS,A,A,A,A,L31,G"),
    ("t10c", 0.25, "ij,is,jt,lu,mv,slmv,tu", "GS,A,A,A,A,L31,G"),
    ("t11a", 0.5, "ij,mt,iu,lv,sw,kj,lmk,tsu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t11b", 0.5, "ij,mt,iu,lv,sw,kj,lmk,tsv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t11c", 0.5, "ij,mt,iu,lv,sw,kj,lmk,tsw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t12a", 0.5, "ij,mt,ju,lv,sw,ki,lmk,tsu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t12b", 0.5, "ij,mt,ju,lv,sw,ki,lmk,tsv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t12c", 0.5, "ij,mt,ju,lv,sw,ki,lmk,tsw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t13a", 0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t13b", 0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t13c", 0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t14a", 0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t14b", 0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t14c", 0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t15a", 1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,ks,uv", "GS,A,A,A,A,A,L4,G,G"),
    ("t15b", 1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,ku,sv", "GS,A,A,A,A,A,L4,G,G"),
    ("t15c", 1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,kv,su", "GS,A,A,A,A,A,L4,G,G"),
    ("t16a", 1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,ks,uv", "GS,A,A,A,A,A,L4,G,G"),
    ("t16b", 1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,ku,sv", "GS,A,A,A,A,A,L4,G,G"),
    ("t16c", 1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,kv,su", "GS,A,A,A,A,A,L4,G,G"),
    ("t17a", 0.5, "ij,ik,js,lt,mu,klsm,tu", "GS,A,A,A,A,L22,G"),
    ("t17b", -0.5, "ij,ik,js,lt,mu,kl,sm,tu", "GS,A,A,A,A,GT,GT,G"),
    ("t17c", 0.5, "ij,ik,js,lt,mu,klt,smu", "GS,A,A,A,A,L21,L21"),
    ("t17d", 0.5, "ij,ik,js,lt,mu,klu,smt", "GS,A,A,A,A,L21,L21"),
    ("t18a", 0.25, "ij,ik,lu,sv,tw,jm,stm,klu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t18b", 0.25, "ij,ik,lu,sv,tw,jm,stm,klv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t18c", 0.25, "ij,ik,lu,sv,tw,jm,stm,klw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t19a", 0.25, "ij,jk,lu,sv,tw,im,stm,klu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t19b", 0.25, "ij,jk,lu,sv,tw,im,stm,klv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    ("t19c", 0.25, "ij,jk,lu,sv,tw,im,stm,klw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    ("t20a", 0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t20b", 0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("t20c", 0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    ("u1", -1.0 / 6.0, "ijk,is,jt,ku,stu", "TAU3,A,A,A,L111"),
    ("u2a", -1.0 / 6.0, "ijk,it,su,jv,kw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    ("u2b", -1.0 / 6.0, "ijk,it,su,jv,kw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    ("u2c", -1.0 / 6.0, "ijk,it,su,jv,kw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    ("u3a", -1.0 / 6.0, "ijk,jt,su,iv,kw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    ("u3b", -1.0 / 6.0, "ijk,jt,su,iv,kw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    ("u3c", -1.0 / 6.0, "ijk,jt,su,iv,kw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    ("u4a", -1.0 / 6.0, "ijk,kt,su,iv,jw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    ("u4b", -1.0 / 6.0, "ijk,kt,su,iv,jw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    ("u4c", -1.0 / 6.0, "ijk,kt,su,iv,jw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    ("u5a", -1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u5b", -1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u5c", -1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u6a", -1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u6b", -1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u6c", -1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u7a", -1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u7b", -1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    ("u7c", -1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    ("v1", -1.0 / 24.0, "ijkl,is,jt,ku,lv,st,uv", "TAU4,A,A,A,A,G,G"),
    ("v2", -1.0 / 24.0, "ijkl,is,jt,ku,lv,su,tv", "TAU4,A,A,A,A,G,G"),
    ("v3", -1.0 / 24.0, "ijkl,is,jt,ku,lv,sv,tu", "TAU4,A,A,A,A,G,G"),
];

/// Second-order output of the general engine, with the per-term breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct GeneralSecondOrder {
    /// The risk contribution: `coefficient / n^2`.
    pub second_order: f64,
    /// The `n^2`-scaled coefficient (sum of all table terms).
    pub coefficient: f64,
    /// Every table term's value, in table order.
    pub parts: Vec<(&'static str, f64)>,
}

fn mat_tens(m: &DMatrix<f64>) -> einsum::Tens {
    let (r, c) = (m.nrows(), m.ncols());
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            data.push(m[(i, j)]);
        }
    }
    einsum::Tens {
        dims: vec![r, c],
        data,
    }
}

fn t3_tens(t: &Tensor3) -> einsum::Tens {
    einsum::Tens {
        dims: vec![t.p(); 3],
        data: t.data().to_vec(),
    }
}

fn t4_tens(t: &Tensor4) -> einsum::Tens {
    einsum::Tens {
        dims: vec![t.p(); 4],
        data: t.data().to_vec(),
    }
}

/// Full second-order coefficient for a general (non-exponential-family)
/// model from its score-moment tensors, term by term.
pub fn second_order_general(tensors: &MomentTensors, n: usize) -> Result<GeneralSecondOrder> {
    let nf = check_n(n)?;
    let p = tensors.p;
    if p > GENERAL_ENGINE_CAP {
        return Err(Error::CapExceeded {
            p,
            cap: GENERAL_ENGINE_CAP,
        });
    }
    let a = sym_inverse(&tensors.gtilde)?;
    let operand = |name: &str| -> einsum::Tens {
        match name {
            "GS" => mat_tens(&tensors.gstar),
            "A" => mat_tens(&a),
            "GT" => mat_tens(&tensors.gtilde),
            "G" => mat_tens(&tensors.g),
            "L3" => t3_tens(&tensors.l3_sym),
            "L21" => t3_tens(&tensors.l3_pair),
            "L111" => t3_tens(&tensors.l3_raw),
            "L4" => t4_tens(&tensors.l4_sym),
            "L22" => t4_tens(&tensors.l4_pair_pair),
            "L31" => t4_tens(&tensors.l4_triple),
            "L211" => t4_tens(&tensors.l4_pair),
            "TAU3" => t3_tens(&tensors.tau3),
            "TAU4" => t4_tens(&tensors.tau4),
            other => unreachable!("unknown operand {other}"),
        }
    };
    let parts: Vec<(&'static str, f64)> = GENERAL_TERMS
        .par_iter()
        .map(|row| {
            let factors: Vec<(einsum::Tens, Vec<u8>)> = row
                .subs
                .split(',')
                .zip(row.ops.split(','))
                .map(|(labels, op)| (operand(op), labels.bytes().collect()))
                .collect();
            (row.name, row.coeff * einsum::contract_all(factors))
        })
        .collect();
    let coefficient: f64 = parts.iter().map(|(_, v)| v).sum();
    Ok(GeneralSecondOrder {
        second_order: coefficient / (nf * nf),
        coefficient,
        parts,
    })
}

/// `M_hat = sum of inverse cell frequencies` and the model dimension
/// `p = cells - 1` from raw category counts.
pub fn inverse_mass_from_counts(counts: &[u64]) -> Result<(usize, f64)> {
    if counts.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least two cells, got {}",
            counts.len()
        )));
    }
    if let Some(zero) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCell(zero));
    }
    let total: u64 = counts.iter().sum();
    let m_hat = counts
        .iter()
        .map(|&c| total as f64 / c as f64)
        .sum::<f64>();
    Ok((counts.len() - 1, m_hat))
}

/// Closed-form risk for the categorical model:
/// `p/(2n) + (M_hat - 1)/(12 n^2)`.
///
/// `n_eval` allows evaluating the expansion at a hypothetical sample size
/// different from the data size (frequencies always come from `counts`).
pub fn multinomial_risk(
    counts: &[u64],
    n_eval: Option<usize>,
    order: ExpansionOrder,
    threshold: &ThresholdSpec,
) -> Result<RiskReport> {
    let (p, m_hat) = inverse_mass_from_counts(counts)?;
    let n_data: u64 = counts.iter().sum();
    let n = n_eval.unwrap_or(n_data as usize);
    let nf = check_n(n)?;
    let first_order = p as f64 / (2.0 * nf);
    let second_order = match order {
        ExpansionOrder::First => 0.0,
        ExpansionOrder::Second => (m_hat - 1.0) / (12.0 * nf * nf),
    };
    Ok(evaluate_criterion(
        first_order,
        second_order,
        n,
        p,
        RiskMethod::MultinomialClosedForm,
        threshold,
    ))
}

/// The categorical adequacy polynomial `96 n^2 alpha^2 - 6 n p - (M_hat - 1)`;
/// positive iff `n` satisfies the second-order criterion at level `alpha`.
pub fn criterion_polynomial(n: u64, p: usize, m_hat: f64, alpha: f64) -> f64 {
    let nf = n as f64;
    96.0 * nf * nf * alpha * alpha - 6.0 * nf * p as f64 - (m_hat - 1.0)
}

/// Smallest `n` making the categorical criterion hold at level `alpha`:
/// the ceiling of `(3p + sqrt(9 p^2 + 96 alpha^2 (M_hat - 1))) / (96 alpha^2)`,
/// then nudged so the polynomial sign is exact at the boundary.
pub fn required_sample_size(p: usize, m_hat: f64, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let min_mass = ((p + 1) * (p + 1)) as f64;
    if m_hat < min_mass {
        return Err(Error::InvalidConfig(format!(
            "M_hat = {m_hat} is below the minimum {min_mass} attained by uniform frequencies"
        )));
    }
    let a2 = 96.0 * alpha * alpha;
    let pf = p as f64;
    let root = (3.0 * pf + (9.0 * pf * pf + a2 * (m_hat - 1.0)).sqrt()) / a2;
    let mut n = root.ceil() as u64;
    n = n.max(1);
    while n > 1 && criterion_polynomial(n - 1, p, m_hat, alpha) > 0.0 {
        n -= 1;
    }
    while criterion_polynomial(n, p, m_hat, alpha) <= 0.0 {
        n += 1;
    }
    Ok(n)
}

/// Assemble a [`RiskReport`]: Pass iff `first + second <= threshold.c`
/// (boundary inclusive).
pub fn evaluate_criterion(
    first_order: f64,
    second_order: f64,
    n: usize,
    p: usize,
    method: RiskMethod,
    threshold: &ThresholdSpec,
) -> RiskReport {
    let total = first_order + second_order;
    let decision = if total <= threshold.c {
        Decision::Pass
    } else {
        Decision::Fail
    };
    RiskReport {
        first_order,
        second_order,
        total,
        n,
        p,
        threshold: *threshold,
        decision,
        method,
    }
}
