//! Independent reference evaluators for the second-order risk engines.
//!
//! Everything here deliberately avoids the optimized code paths of the
//! main library: contractions are evaluated by exhaustive summation over
//! all index assignments (no pairwise contraction scheduling), matrix
//! inverses go through LU instead of Cholesky, and the exponential-family
//! coefficient is computed from its raw three-pairing form rather than
//! the factorized trace form. Agreement between these evaluators and the
//! engines is what the acceptance suite checks.

use nalgebra::DMatrix;
use pncrit_core::linalg::{Tensor3, Tensor4};
use pncrit_core::moments::MomentTensors;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// One operand of a brute-force contraction.
pub enum BruteOperand<'a> {
    Mat(&'a DMatrix<f64>),
    T3(&'a Tensor3),
    T4(&'a Tensor4),
}

impl BruteOperand<'_> {
    fn rank(&self) -> usize {
        match self {
            BruteOperand::Mat(_) => 2,
            BruteOperand::T3(_) => 3,
            BruteOperand::T4(_) => 4,
        }
    }

    fn value(&self, idx: &[usize]) -> f64 {
        match self {
            BruteOperand::Mat(m) => m[(idx[0], idx[1])],
            BruteOperand::T3(t) => t.get(idx[0], idx[1], idx[2]),
            BruteOperand::T4(t) => t.get(idx[0], idx[1], idx[2], idx[3]),
        }
    }
}

/// Evaluate a closed pairwise contraction by brute force: enumerate every
/// assignment of the distinct index labels and accumulate the product of
/// operand entries. Exponential in the label count — suitable only for
/// small dimensions, which is exactly what makes it a trustworthy oracle.
pub fn brute_contract(p: usize, factors: &[(BruteOperand, &str)]) -> f64 {
    let mut labels: Vec<u8> = Vec::new();
    // slots[f][k] = position of factor f's k-th index in `labels`
    let mut slots: Vec<Vec<usize>> = Vec::with_capacity(factors.len());
    for (op, subs) in factors {
        assert_eq!(op.rank(), subs.len(), "label count must match rank");
        let mut s = Vec::with_capacity(subs.len());
        for b in subs.bytes() {
            let pos = match labels.iter().position(|&l| l == b) {
                Some(pos) => pos,
                None => {
                    labels.push(b);
                    labels.len() - 1
                }
            };
            s.push(pos);
        }
        slots.push(s);
    }
    let n_labels = labels.len();
    let mut assign = vec![0usize; n_labels];
    let mut idx_buf = [0usize; 4];
    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        for (f, (op, _)) in factors.iter().enumerate() {
            for (k, &slot) in slots[f].iter().enumerate() {
                idx_buf[k] = assign[slot];
            }
            prod *= op.value(&idx_buf[..slots[f].len()]);
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
        // odometer over label assignments
        let mut carry = n_labels;
        for d in (0..n_labels).rev() {
            assign[d] += 1;
            if assign[d] < p {
                carry = d;
                break;
            }
            assign[d] = 0;
        }
        if carry == n_labels {
            break;
        }
    }
    total
}

/// The contraction table of the general second-order coefficient, re-keyed
/// here so the acceptance comparison exercises an independently entered
/// copy evaluated by an independent algorithm.
const BRUTE_TERMS: &[(f64, &str, &str)] = &[
    (0.5, "ij,sj,it,lm,sltm", "GS,A,A,A,L211"),
    (0.5, "ij,sj,it,lm,ls,tm", "GS,A,A,A,GT,G"),
    (0.5, "ij,si,jt,lm,sltm", "GS,A,A,A,L211"),
    (0.5, "ij,si,jt,lm,ls,tm", "GS,A,A,A,GT,G"),
    (0.25, "ij,uj,ik,ls,mt,kst,lmu", "GS,A,A,A,A,L111,L3"),
    (0.25, "ij,ui,jk,ls,mt,kst,lmu", "GS,A,A,A,A,L111,L3"),
    (0.5, "ij,jk,lu,is,mt,klum,st", "GS,A,A,A,A,L22,G"),
    (-0.5, "ij,jk,lu,is,mt,kl,um,st", "GS,A,A,A,A,GT,GT,G"),
    (0.5, "ij,jk,lu,is,mt,kls,umt", "GS,A,A,A,A,L21,L21"),
    (0.5, "ij,jk,lu,is,mt,klt,ums", "GS,A,A,A,A,L21,L21"),
    (0.5, "ij,ik,lu,js,mt,klum,st", "GS,A,A,A,A,L22,G"),
    (-0.5, "ij,ik,lu,js,mt,kl,um,st", "GS,A,A,A,A,GT,GT,G"),
    (0.5, "ij,ik,lu,js,mt,kls,umt", "GS,A,A,A,A,L21,L21"),
    (0.5, "ij,ik,lu,js,mt,klt,ums", "GS,A,A,A,A,L21,L21"),
    (0.25, "ij,jk,it,mu,sv,wl,msw,lkt,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,jk,it,mu,sv,wl,msw,lku,tv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,jk,it,mu,sv,wl,msw,lkv,tu", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,jt,mu,sv,wl,msw,lkt,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,jt,mu,sv,wl,msw,lku,tv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,jt,mu,sv,wl,msw,lkv,tu", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,js,it,lu,mv,slmt,uv", "GS,A,A,A,A,L31,G"),
    (0.25, "ij,js,it,lu,mv,slmu,tv", "GS,A,A,A,A,L31,G"),
    (0.25, "ij,js,it,lu,mv,slmv,tu", "GS,A,A,A,A,L31,G"),
    (0.25, "ij,is,jt,lu,mv,slmt,uv", "GS,A,A,A,A,L31,G"),
    (0.25, "ij,is,jt,lu,mv,slmu,tv", "GS,A,A,A,A,L31,G"),
    (0.25, "ij,is,jt,lu,mv,slmv,tu", "GS,A,A,A,A,L31,G"),
    (0.5, "ij,mt,iu,lv,sw,kj,lmk,tsu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.5, "ij,mt,iu,lv,sw,kj,lmk,tsv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.5, "ij,mt,iu,lv,sw,kj,lmk,tsw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.5, "ij,mt,ju,lv,sw,ki,lmk,tsu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.5, "ij,mt,ju,lv,sw,ki,lmk,tsv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.5, "ij,mt,ju,lv,sw,ki,lmk,tsw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.25, "ij,ik,lu,sv,tw,oj,hm,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.25, "ij,jk,lu,sv,tw,oi,hm,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,ks,uv", "GS,A,A,A,A,A,L4,G,G"),
    (1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,ku,sv", "GS,A,A,A,A,A,L4,G,G"),
    (1.0 / 12.0, "ij,ik,ls,mu,tv,wj,lmtw,kv,su", "GS,A,A,A,A,A,L4,G,G"),
    (1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,ks,uv", "GS,A,A,A,A,A,L4,G,G"),
    (1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,ku,sv", "GS,A,A,A,A,A,L4,G,G"),
    (1.0 / 12.0, "ij,jk,ls,mu,tv,wi,lmtw,kv,su", "GS,A,A,A,A,A,L4,G,G"),
    (0.5, "ij,ik,js,lt,mu,klsm,tu", "GS,A,A,A,A,L22,G"),
    (-0.5, "ij,ik,js,lt,mu,kl,sm,tu", "GS,A,A,A,A,GT,GT,G"),
    (0.5, "ij,ik,js,lt,mu,klt,smu", "GS,A,A,A,A,L21,L21"),
    (0.5, "ij,ik,js,lt,mu,klu,smt", "GS,A,A,A,A,L21,L21"),
    (0.25, "ij,ik,lu,sv,tw,jm,stm,klu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,lu,sv,tw,jm,stm,klv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,ik,lu,sv,tw,jm,stm,klw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,jk,lu,sv,tw,im,stm,klu,vw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,jk,lu,sv,tw,im,stm,klv,uw", "GS,A,A,A,A,A,L3,L21,G"),
    (0.25, "ij,jk,lu,sv,tw,im,stm,klw,uv", "GS,A,A,A,A,A,L3,L21,G"),
    (0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,ku,vw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,kv,uw", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (0.125, "ij,lk,mu,sv,tw,io,jh,lmo,sth,kw,uv", "GS,A,A,A,A,A,A,L3,L3,G,G"),
    (-1.0 / 6.0, "ijk,is,jt,ku,stu", "TAU3,A,A,A,L111"),
    (-1.0 / 6.0, "ijk,it,su,jv,kw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,it,su,jv,kw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,it,su,jv,kw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,jt,su,iv,kw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,jt,su,iv,kw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,jt,su,iv,kw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,kt,su,iv,jw,stu,vw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,kt,su,iv,jw,stv,uw", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 6.0, "ijk,kt,su,iv,jw,stw,uv", "TAU3,A,A,A,A,L21,G"),
    (-1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,jw,km,il,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,km,jl,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,uv,wm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,uw,vm", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 12.0, "ijk,su,tv,iw,jm,kl,stl,um,vw", "TAU3,A,A,A,A,A,L3,G,G"),
    (-1.0 / 24.0, "ijkl,is,jt,ku,lv,st,uv", "TAU4,A,A,A,A,G,G"),
    (-1.0 / 24.0, "ijkl,is,jt,ku,lv,su,tv", "TAU4,A,A,A,A,G,G"),
    (-1.0 / 24.0, "ijkl,is,jt,ku,lv,sv,tu", "TAU4,A,A,A,A,G,G"),
];

/// LU inverse, deliberately distinct from the library's Cholesky path.
fn lu_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
        .try_inverse()
        .expect("oracle inputs are well-conditioned by construction")
}

/// Brute-force value of the general second-order coefficient.
pub fn brute_general_coefficient(t: &MomentTensors) -> f64 {
    let a = lu_inverse(&t.gtilde);
    let pick = |name: &str| -> BruteOperand<'_> {
        match name {
            "GS" => BruteOperand::Mat(&t.gstar),
            "A" => BruteOperand::Mat(&a),
            "GT" => BruteOperand::Mat(&t.gtilde),
            "G" => BruteOperand::Mat(&t.g),
            "L3" => BruteOperand::T3(&t.l3_sym),
            "L21" => BruteOperand::T3(&t.l3_pair),
            "L111" => BruteOperand::T3(&t.l3_raw),
            "L4" => BruteOperand::T4(&t.l4_sym),
            "L22" => BruteOperand::T4(&t.l4_pair_pair),
            "L31" => BruteOperand::T4(&t.l4_triple),
            "L211" => BruteOperand::T4(&t.l4_pair),
            "TAU3" => BruteOperand::T3(&t.tau3),
            "TAU4" => BruteOperand::T4(&t.tau4),
            other => unreachable!("unknown operand {other}"),
        }
    };
    BRUTE_TERMS
        .par_iter()
        .map(|(coeff, subs, ops)| {
            let factors: Vec<(BruteOperand, &str)> = subs
                .split(',')
                .zip(ops.split(','))
                .map(|(labels, op)| (pick(op), labels))
                .collect();
            coeff * brute_contract(t.p, &factors)
        })
        .sum()
}

/// Brute-force value of the exponential-family second-order coefficient
/// from its raw three-pairing form (the engine uses the factorized trace
/// form; the trace identities and pairing collapses are exactly what this
/// oracle re-derives by exhaustive summation).
pub fn brute_expfam_coefficient(
    sigma: &DMatrix<f64>,
    gtilde: &DMatrix<f64>,
    k3h: &Tensor3,
    k3s: &Tensor3,
    k4s: &Tensor4,
) -> f64 {
    let p = sigma.nrows();
    let a = lu_inverse(gtilde);

    // cross term: both third cumulants, three raising matrices
    let mut s1 = 0.0;
    for u in 0..p {
        for k in 0..p {
            for l in 0..p {
                for s in 0..p {
                    for m in 0..p {
                        for t in 0..p {
                            s1 += a[(u, k)]
                                * a[(l, s)]
                                * a[(m, t)]
                                * k3h.get(k, s, t)
                                * k3s.get(l, m, u);
                        }
                    }
                }
            }
        }
    }

    // model third cumulant squared: raise one copy on all modes, the
    // other on two, tie the free modes through the covariance pairings
    let mut r1 = Tensor3::zeros(p);
    let mut r2 = Tensor3::zeros(p);
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                let mut v1 = 0.0;
                let mut v2 = 0.0;
                for x in 0..p {
                    for y in 0..p {
                        let mut inner1 = 0.0;
                        for z in 0..p {
                            inner1 += a[(k, z)] * k3s.get(x, y, z);
                        }
                        v1 += a[(i, x)] * a[(j, y)] * inner1;
                        v2 += a[(i, x)] * a[(j, y)] * k3s.get(x, y, k);
                    }
                }
                r1.set(i, j, k, v1);
                r2.set(i, j, k, v2);
            }
        }
    }
    let mut s2 = 0.0;
    for h in 0..p {
        for u in 0..p {
            for k in 0..p {
                for v in 0..p {
                    for w in 0..p {
                        let lhs = r1.get(u, h, k) * r2.get(v, w, h);
                        s2 += lhs
                            * (sigma[(k, u)] * sigma[(w, v)]
                                + sigma[(k, v)] * sigma[(u, w)]
                                + sigma[(k, w)] * sigma[(u, v)]);
                    }
                }
            }
        }
    }

    // model fourth cumulant raised on all modes, closed with two
    // covariances over the three pairings
    let mut s3 = 0.0;
    for s in 0..p {
        for u in 0..p {
            for v in 0..p {
                for k in 0..p {
                    let mut z = 0.0;
                    for i in 0..p {
                        for j in 0..p {
                            for x in 0..p {
                                for y in 0..p {
                                    z += a[(s, i)]
                                        * a[(u, j)]
                                        * a[(v, x)]
                                        * a[(k, y)]
                                        * k4s.get(i, j, x, y);
                                }
                            }
                        }
                    }
                    s3 += z
                        * (sigma[(s, u)] * sigma[(v, k)]
                            + sigma[(s, v)] * sigma[(u, k)]
                            + sigma[(s, k)] * sigma[(u, v)]);
                }
            }
        }
    }

    (-8.0 * s1 + 9.0 * s2 - 3.0 * s3) / 24.0
}

// ---- seeded random inputs with the right symmetries ----

/// Well-conditioned random symmetric positive definite matrix.
pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        0.4 * v
    });
    let mut s = &m * m.transpose() / p as f64;
    for i in 0..p {
        s[(i, i)] += 1.0 + 0.5 * rng.gen::<f64>();
    }
    s
}

/// Fully symmetric random rank-3 tensor: entries depend only on the
/// sorted index triple.
pub fn random_sym3(p: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor3 {
    let mut canon = vec![0.0f64; p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in j..p {
                let v: f64 = rng.sample(StandardNormal);
                canon[(i * p + j) * p + k] = scale * v;
            }
        }
    }
    Tensor3::from_fn(p, |i, j, k| {
        let mut s = [i, j, k];
        s.sort_unstable();
        canon[(s[0] * p + s[1]) * p + s[2]]
    })
}

/// Fully symmetric random rank-4 tensor.
pub fn random_sym4(p: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor4 {
    let mut canon = vec![0.0f64; p * p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in j..p {
                for l in k..p {
                    let v: f64 = rng.sample(StandardNormal);
                    canon[((i * p + j) * p + k) * p + l] = scale * v;
                }
            }
        }
    }
    Tensor4::from_fn(p, |i, j, k, l| {
        let mut s = [i, j, k, l];
        s.sort_unstable();
        canon[((s[0] * p + s[1]) * p + s[2]) * p + s[3]]
    })
}

/// A random exponential-family cumulant set (data covariance, model
/// metric, empirical and model third cumulants, model fourth cumulant).
pub struct ExpFamTensors {
    pub sigma: DMatrix<f64>,
    pub gtilde: DMatrix<f64>,
    pub k3_hat: Tensor3,
    pub k3_star: Tensor3,
    pub k4_star: Tensor4,
}

pub fn random_expfam_tensors(p: usize, seed: u64) -> ExpFamTensors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ExpFamTensors {
        sigma: random_spd(p, &mut rng),
        gtilde: random_spd(p, &mut rng),
        k3_hat: random_sym3(p, 0.25, &mut rng),
        k3_star: random_sym3(p, 0.25, &mut rng),
        k4_star: random_sym4(p, 0.2, &mut rng),
    }
}

/// A full random moment-tensor set for the general engine, carrying the
/// partial symmetries each block has by construction: score products are
/// fully symmetric, Hessian blocks are symmetric within their index
/// groups, and the pair-pair block is symmetric under group exchange.
pub fn random_moment_tensors(p: usize, seed: u64) -> MomentTensors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_spd(p, &mut rng);
    let gtilde = random_spd(p, &mut rng);
    let gstar = random_spd(p, &mut rng);
    let l3_sym = random_sym3(p, 0.25, &mut rng);
    let l3_raw = random_sym3(p, 0.25, &mut rng);
    let tau3 = random_sym3(p, 0.25, &mut rng);
    let l4_sym = random_sym4(p, 0.2, &mut rng);
    let tau4 = random_sym4(p, 0.2, &mut rng);

    // symmetric in (i,j) only
    let mut raw = vec![0.0f64; p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in 0..p {
                let v: f64 = rng.sample(StandardNormal);
                raw[(i * p + j) * p + k] = 0.25 * v;
            }
        }
    }
    let l3_pair = Tensor3::from_fn(p, |i, j, k| raw[(i.min(j) * p + i.max(j)) * p + k]);

    // symmetric in (i,j), in (k,l), and under exchanging the two pairs
    let mut raw4 = vec![0.0f64; p * p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in 0..p {
                for l in k..p {
                    let v: f64 = rng.sample(StandardNormal);
                    raw4[((i * p + j) * p + k) * p + l] = 0.2 * v;
                }
            }
        }
    }
    let pair_key = |i: usize, j: usize, k: usize, l: usize| {
        let a = (i.min(j), i.max(j));
        let b = (k.min(l), k.max(l));
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        ((x.0 * p + x.1) * p + y.0) * p + y.1
    };
    let l4_pair_pair = Tensor4::from_fn(p, |i, j, k, l| raw4[pair_key(i, j, k, l)]);

    // symmetric in the leading triple
    let mut raw31 = vec![0.0f64; p * p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in j..p {
                for l in 0..p {
                    let v: f64 = rng.sample(StandardNormal);
                    raw31[((i * p + j) * p + k) * p + l] = 0.2 * v;
                }
            }
        }
    }
    let l4_triple = Tensor4::from_fn(p, |i, j, k, l| {
        let mut s = [i, j, k];
        s.sort_unstable();
        raw31[((s[0] * p + s[1]) * p + s[2]) * p + l]
    });

    // symmetric in (i,j) and in (k,l) separately
    let mut raw211 = vec![0.0f64; p * p * p * p];
    for i in 0..p {
        for j in i..p {
            for k in 0..p {
                for l in k..p {
                    let v: f64 = rng.sample(StandardNormal);
                    raw211[((i * p + j) * p + k) * p + l] = 0.2 * v;
                }
            }
        }
    }
    let l4_pair = Tensor4::from_fn(p, |i, j, k, l| {
        raw211[((i.min(j) * p + i.max(j)) * p + k.min(l)) * p + k.max(l)]
    });

    MomentTensors {
        p,
        g,
        gtilde,
        gstar,
        l3_sym,
        l3_pair,
        l3_raw,
        l4_sym,
        l4_pair_pair,
        l4_triple,
        l4_pair,
        tau3,
        tau4,
    }
}

/// The exponential-family specialization of the general moment tensors,
/// restated here independently of the library's own constructor: the
/// Hessian of an exponential-family log density is parameter-only, so
/// the mixed Hessian-score blocks vanish, the Hessian-Hessian block is
/// the metric outer product, the Hessian-scores block is minus the metric
/// against the data covariance, and the model-side derivative tensors are
/// minus the model cumulants.
pub fn substituted_tensors(e: &ExpFamTensors) -> MomentTensors {
    let p = e.sigma.nrows();
    let mut neg_k3 = e.k3_star.clone();
    neg_k3.scale(-1.0);
    let mut neg_k4 = e.k4_star.clone();
    neg_k4.scale(-1.0);
    MomentTensors {
        p,
        g: e.sigma.clone(),
        gtilde: e.gtilde.clone(),
        gstar: e.gtilde.clone(),
        l3_sym: neg_k3.clone(),
        l3_pair: Tensor3::zeros(p),
        l3_raw: e.k3_hat.clone(),
        l4_sym: neg_k4.clone(),
        l4_pair_pair: Tensor4::from_fn(p, |i, j, k, l| e.gtilde[(i, j)] * e.gtilde[(k, l)]),
        l4_triple: Tensor4::zeros(p),
        l4_pair: Tensor4::from_fn(p, |i, j, k, l| -e.gtilde[(i, j)] * e.sigma[(k, l)]),
        tau3: neg_k3,
        tau4: neg_k4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// A fully hand-written check of the brute evaluator itself on a
    /// contraction small enough to write as explicit loops.
    #[test]
    fn brute_contract_matches_explicit_loops() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m1 = random_spd(p, &mut rng);
        let m2 = random_spd(p, &mut rng);
        let t = random_sym3(p, 0.3, &mut rng);
        // sum_{i,j,k,l,m} m1[i,j] m2[k,l] t[j,k,m] t[i,l,m]
        let mut want = 0.0;
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        for m in 0..p {
                            want += m1[(i, j)] * m2[(k, l)] * t.get(j, k, m) * t.get(i, l, m);
                        }
                    }
                }
            }
        }
        let got = brute_contract(
            p,
            &[
                (BruteOperand::Mat(&m1), "ij"),
                (BruteOperand::Mat(&m2), "kl"),
                (BruteOperand::T3(&t), "jkm"),
                (BruteOperand::T3(&t), "ilm"),
            ],
        );
        assert_relative_eq!(got, want, max_relative = 1e-13);
    }

    #[test]
    fn brute_general_table_has_every_term() {
        assert_eq!(BRUTE_TERMS.len(), 79);
        // every label in every term appears exactly twice
        for (_, subs, ops) in BRUTE_TERMS {
            assert_eq!(subs.split(',').count(), ops.split(',').count());
            let mut counts = [0u8; 26];
            for b in subs.bytes().filter(|&b| b != b',') {
                counts[(b - b'a') as usize] += 1;
            }
            for (idx, &c) in counts.iter().enumerate() {
                assert!(
                    c == 0 || c == 2,
                    "label {} appears {c} times in {subs}",
                    (b'a' + idx as u8) as char
                );
            }
        }
    }

    #[test]
    fn symmetric_generators_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t3 = random_sym3(3, 0.3, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(t3.get(i, j, k), t3.get(k, j, i));
                    assert_eq!(t3.get(i, j, k), t3.get(j, i, k));
                }
            }
        }
        let t4 = random_sym4(3, 0.3, &mut rng);
        assert_eq!(t4.get(0, 1, 2, 2), t4.get(2, 2, 1, 0));
        assert_eq!(t4.get(0, 1, 0, 2), t4.get(0, 0, 1, 2));
        let t = random_moment_tensors(3, 4);
        // pair-pair block: group symmetry and exchange symmetry
        assert_eq!(t.l4_pair_pair.get(0, 1, 2, 1), t.l4_pair_pair.get(1, 0, 1, 2));
        assert_eq!(t.l4_pair_pair.get(0, 1, 2, 1), t.l4_pair_pair.get(1, 2, 0, 1));
        // leading-triple block
        assert_eq!(t.l4_triple.get(0, 2, 1, 2), t.l4_triple.get(2, 1, 0, 2));
        // two-pair block without exchange symmetry
        assert_eq!(t.l4_pair.get(0, 1, 2, 1), t.l4_pair.get(1, 0, 1, 2));
    }

    #[test]
    fn substitution_agrees_with_the_library_constructor() {
        let e = random_expfam_tensors(3, 21);
        let ours = substituted_tensors(&e);
        let theirs = MomentTensors::from_expfam_cumulants(
            &e.sigma,
            &e.gtilde,
            &e.k3_hat,
            &e.k3_star,
            &e.k4_star,
        )
        .unwrap();
        assert_eq!(ours.g, theirs.g);
        assert_eq!(ours.gstar, theirs.gstar);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(ours.l3_sym.get(i, j, k), theirs.l3_sym.get(i, j, k));
                    assert_eq!(ours.tau3.get(i, j, k), theirs.tau3.get(i, j, k));
                    for l in 0..3 {
                        assert_eq!(
                            ours.l4_pair_pair.get(i, j, k, l),
                            theirs.l4_pair_pair.get(i, j, k, l)
                        );
                        assert_eq!(
                            ours.l4_pair.get(i, j, k, l),
                            theirs.l4_pair.get(i, j, k, l)
                        );
                        assert_eq!(ours.tau4.get(i, j, k, l), theirs.tau4.get(i, j, k, l));
                    }
                }
            }
        }
    }
}
