//! Exponential-family models: `log g(x; theta) = theta . xi(x) - Psi(theta) + log r(x)`.
//!
//! Three concrete families are provided:
//!
//! * [`Multinomial`] — categorical cells with the first cell as baseline;
//!   natural parameters are log odds against cell 0.
//! * [`Quadratic`] — a family whose cumulant generating function is exactly
//!   quadratic, `Psi = m.theta + theta.Q.theta/2`, so the sufficient
//!   statistic is Gaussian, `xi ~ N(m + Q theta, Q)`, and all cumulants
//!   beyond the second vanish.
//! * [`GenericModel`] — a basis of interaction terms over a product
//!   reference density (moment-matched Betas for continuous coordinates
//!   and a categorical block), for which `Psi` has no closed form and all
//!   model-side quantities come from sampling.
//!
//! The [`ExpFamily`] enum dispatches the shared operations; methods return
//! [`Error::PsiUnavailable`] where a closed form genuinely does not exist.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{assert_pd, sym_solve_vec, Tensor3, Tensor4};

/// Categorical model on `cells` outcomes; `p = cells - 1` free log-odds.
#[derive(Debug, Clone)]
pub struct Multinomial {
    cells: usize,
}

/// Exponential family with exactly quadratic cumulant generating function.
#[derive(Debug, Clone)]
pub struct Quadratic {
    m: DVector<f64>,
    q: DMatrix<f64>,
    /// Lower Cholesky factor of `q`, for sampling and log densities.
    chol_l: DMatrix<f64>,
    log_det_q: f64,
}

/// One term of the generic interaction basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BasisTerm {
    /// A single continuous coordinate.
    Cont(usize),
    /// Product of two continuous coordinates (indices into the row).
    ContPair(usize, usize),
    /// Product of a continuous coordinate and the categorical value.
    ContCat(usize),
}

/// Interaction-basis model over a product reference density.
#[derive(Debug, Clone)]
pub struct GenericModel {
    n_cont: usize,
    /// Number of categorical levels; 0 means no categorical coordinate.
    cat_levels: usize,
    /// Beta parameters per continuous coordinate.
    betas: Vec<(f64, f64)>,
    /// Reference probabilities of the categorical levels.
    cat_probs: Vec<f64>,
    terms: Vec<BasisTerm>,
    /// Cached log normalizers of the Beta densities.
    ln_beta_norm: Vec<f64>,
}

/// A dropped basis term and the earlier term that made it redundant.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DroppedTerm {
    pub index: usize,
    pub correlated_with: usize,
    pub correlation: f64,
}

/// Outcome of correlation filtering when building a generic model.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FilterReport {
    pub initial_terms: usize,
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedTerm>,
}

/// Any of the supported exponential families.
#[derive(Debug, Clone)]
pub enum ExpFamily {
    Multinomial(Multinomial),
    Quadratic(Quadratic),
    Generic(GenericModel),
}

impl Multinomial {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::DimensionMismatch(format!(
                "a multinomial model needs at least 2 cells, got {cells}"
            )));
        }
        Ok(Multinomial { cells })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn p(&self) -> usize {
        self.cells - 1
    }

    /// Cell probabilities `(m_0, ..., m_p)` at `theta` (`theta_0 = 0`).
    pub fn probs(&self, theta: &DVector<f64>) -> Vec<f64> {
        let p = self.p();
        debug_assert_eq!(theta.len(), p);
        let mut mx = 0.0f64;
        for i in 0..p {
            mx = mx.max(theta[i]);
        }
        let mut denom = (-mx).exp();
        for i in 0..p {
            denom += (theta[i] - mx).exp();
        }
        let mut out = Vec::with_capacity(self.cells);
        out.push((-mx).exp() / denom);
        for i in 0..p {
            out.push((theta[i] - mx).exp() / denom);
        }
        out
    }

    pub fn psi(&self, theta: &DVector<f64>) -> f64 {
        let p = self.p();
        let mut mx = 0.0f64;
        for i in 0..p {
            mx = mx.max(theta[i]);
        }
        let mut s = (-mx).exp();
        for i in 0..p {
            s += (theta[i] - mx).exp();
        }
        mx + s.ln()
    }

    pub fn eta(&self, theta: &DVector<f64>) -> DVector<f64> {
        let m = self.probs(theta);
        DVector::from_iterator(self.p(), m[1..].iter().copied())
    }

    pub fn psi_dd(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.probs(theta);
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| {
            let d = if i == j { m[i + 1] } else { 0.0 };
            d - m[i + 1] * m[j + 1]
        })
    }

    /// Third cumulant of the one-hot sufficient statistic.
    pub fn kappa3_star(&self, theta: &DVector<f64>) -> Tensor3 {
        let m = self.probs(theta);
        let p = self.p();
        Tensor3::from_fn(p, |i, j, k| {
            let (mi, mj, mk) = (m[i + 1], m[j + 1], m[k + 1]);
            let s3 = if i == j && j == k { mi } else { 0.0 };
            let s2_jk = if j == k { mj } else { 0.0 };
            let s2_ik = if i == k { mi } else { 0.0 };
            let s2_ij = if i == j { mi } else { 0.0 };
            s3 - mi * s2_jk - mj * s2_ik - mk * s2_ij + 2.0 * mi * mj * mk
        })
    }

    /// Fourth cumulant of the one-hot sufficient statistic.
    pub fn kappa4_star(&self, theta: &DVector<f64>) -> Tensor4 {
        let m = self.probs(theta);
        let p = self.p();
        let sigma = self.psi_dd(theta);
        let s2 = |i: usize, j: usize| if i == j { m[i + 1] } else { 0.0 };
        let s3 = |i: usize, j: usize, k: usize| if i == j && j == k { m[i + 1] } else { 0.0 };
        Tensor4::from_fn(p, |i, j, k, l| {
            let (mi, mj, mk, ml) = (m[i + 1], m[j + 1], m[k + 1], m[l + 1]);
            let s4 = if i == j && j == k && k == l { mi } else { 0.0 };
            let mu4 = s4
                - (mi * s3(j, k, l) + mj * s3(i, k, l) + mk * s3(i, j, l) + ml * s3(i, j, k))
                + (mi * mj * s2(k, l)
                    + mi * mk * s2(j, l)
                    + mi * ml * s2(j, k)
                    + mj * mk * s2(i, l)
                    + mj * ml * s2(i, k)
                    + mk * ml * s2(i, j))
                - 3.0 * mi * mj * mk * ml;
            mu4 - sigma[(i, j)] * sigma[(k, l)]
                - sigma[(i, k)] * sigma[(j, l)]
                - sigma[(i, l)] * sigma[(j, k)]
        })
    }

    /// Maximum-likelihood natural parameters from cell counts.
    ///
    /// Fails with [`Error::ZeroCell`] if any count is zero: the MLE then
    /// sits on the boundary and the expansion is undefined.
    pub fn theta_from_counts(&self, counts: &[u64]) -> Result<DVector<f64>> {
        if counts.len() != self.cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {} counts, got {}",
                self.cells,
                counts.len()
            )));
        }
        if let Some(zero) = counts.iter().position(|&c| c == 0) {
            return Err(Error::ZeroCell(zero));
        }
        let c0 = counts[0] as f64;
        Ok(DVector::from_iterator(
            self.p(),
            counts[1..].iter().map(|&c| (c as f64 / c0).ln()),
        ))
    }
}

impl Quadratic {
    pub fn new(m: DVector<f64>, q: DMatrix<f64>) -> Result<Self> {
        let p = m.len();
        if q.nrows() != p || q.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "quadratic model: m has length {p}, Q is {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        assert_pd("quadratic model Q", &q)?;
        let chol = q
            .clone()
            .cholesky()
            .expect("positive definite by the check above");
        let chol_l = chol.l();
        let log_det_q = 2.0 * (0..p).map(|i| chol_l[(i, i)].ln()).sum::<f64>();
        Ok(Quadratic {
            m,
            q,
            chol_l,
            log_det_q,
        })
    }

    pub fn p(&self) -> usize {
        self.m.len()
    }

    pub fn mean_vector(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn psi(&self, theta: &DVector<f64>) -> f64 {
        self.m.dot(theta) + 0.5 * (theta.transpose() * &self.q * theta)[(0, 0)]
    }

    pub fn eta(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.m + &self.q * theta
    }

    /// Log density of `x = xi` against Lebesgue measure. The reference
    /// density (`theta = 0`) is `N(m, Q)`, which makes
    /// `int exp(theta.x) r(x) dx = exp(Psi)` hold exactly.
    pub fn log_density(&self, x: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let p = self.p() as f64;
        let d = x - &self.m;
        // solve L z = d, quadratic form = |z|^2
        let z = self
            .chol_l
            .clone()
            .solve_lower_triangular(&d)
            .expect("Cholesky factor is nonsingular");
        let log_ref = -0.5 * z.norm_squared()
            - 0.5 * self.log_det_q
            - 0.5 * p * (2.0 * std::f64::consts::PI).ln();
        theta.dot(x) - self.psi(theta) + log_ref
    }
}

impl GenericModel {
    /// Assemble a model directly from parts (used by tests and builders).
    pub fn from_parts(
        n_cont: usize,
        cat_levels: usize,
        betas: Vec<(f64, f64)>,
        cat_probs: Vec<f64>,
        terms: Vec<BasisTerm>,
    ) -> Result<Self> {
        if betas.len() != n_cont {
            return Err(Error::DimensionMismatch(format!(
                "{n_cont} continuous coordinates but {} Beta parameter pairs",
                betas.len()
            )));
        }
        if cat_levels == 0 && !cat_probs.is_empty() {
            return Err(Error::DimensionMismatch(
                "categorical probabilities given for a model without a categorical coordinate"
                    .into(),
            ));
        }
        if cat_levels > 0 {
            if cat_probs.len() != cat_levels {
                return Err(Error::DimensionMismatch(format!(
                    "{cat_levels} categorical levels but {} probabilities",
                    cat_probs.len()
                )));
            }
            if cat_probs.iter().any(|&q| q <= 0.0) {
                return Err(Error::ZeroCell(
                    cat_probs.iter().position(|&q| q <= 0.0).unwrap(),
                ));
            }
        }
        if terms.is_empty() {
            return Err(Error::EmptyBasis);
        }
        for t in &terms {
            let ok = match *t {
                BasisTerm::Cont(a) => a < n_cont,
                BasisTerm::ContPair(a, b) => a < n_cont && b < n_cont,
                BasisTerm::ContCat(a) => a < n_cont && cat_levels > 0,
            };
            if !ok {
                return Err(Error::DimensionMismatch(format!(
                    "basis term {t:?} out of range for {n_cont} continuous coordinates"
                )));
            }
        }
        for (col, &(a, b)) in betas.iter().enumerate() {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::BetaMomentMatchInfeasible {
                    col,
                    mean: f64::NAN,
                    var: f64::NAN,
                });
            }
        }
        let ln_beta_norm = betas
            .iter()
            .map(|&(a, b)| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
            .collect();
        Ok(GenericModel {
            n_cont,
            cat_levels,
            betas,
            cat_probs,
            terms,
            ln_beta_norm,
        })
    }

    pub fn p(&self) -> usize {
        self.terms.len()
    }

    pub fn n_cont(&self) -> usize {
        self.n_cont
    }

    pub fn cat_levels(&self) -> usize {
        self.cat_levels
    }

    pub fn cat_probs(&self) -> &[f64] {
        &self.cat_probs
    }

    pub fn betas(&self) -> &[(f64, f64)] {
        &self.betas
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    /// Expected row width: continuous coordinates plus the categorical one.
    pub fn raw_dim(&self) -> usize {
        self.n_cont + usize::from(self.cat_levels > 0)
    }

    /// Value of one basis term on a raw row.
    #[inline]
    pub fn term_value(&self, term: BasisTerm, row: &[f64]) -> f64 {
        match term {
            BasisTerm::Cont(a) => row[a],
            BasisTerm::ContPair(a, b) => row[a] * row[b],
            BasisTerm::ContCat(a) => row[a] * row[self.n_cont],
        }
    }

    pub fn xi_of_row(&self, row: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|&t| self.term_value(t, row)),
        )
    }

    /// `theta . xi(x)` without evaluating the full basis vector.
    #[inline]
    pub fn theta_dot_xi(&self, theta: &DVector<f64>, row: &[f64]) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(idx, &t)| theta[idx] * self.term_value(t, row))
            .sum()
    }

    /// Log density of the reference measure at a raw row.
    pub fn reference_log_density(&self, row: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (c, &(a, b)) in self.betas.iter().enumerate() {
            let x = row[c];
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::ValueOutOfDomain {
                    column: c,
                    row: 0,
                    value: x,
                });
            }
            total += (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - self.ln_beta_norm[c];
        }
        if self.cat_levels > 0 {
            let lvl = row[self.n_cont];
            let idx = lvl as usize;
            if lvl.fract() != 0.0 || idx < 1 || idx > self.cat_levels {
                return Err(Error::UnknownCategory {
                    column: "categorical".into(),
                    row: 0,
                    value: format!("{lvl}"),
                });
            }
            total += self.cat_probs[idx - 1].ln();
        }
        Ok(total)
    }
}

/// Moment-match a Beta density to a sample mean and variance.
///
/// Requires `0 < mean < 1` and `0 < var < mean (1 - mean)`.
pub fn beta_moment_match(col: usize, mean: f64, var: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && mean < 1.0 && var > 0.0 && var < mean * (1.0 - mean)) {
        return Err(Error::BetaMomentMatchInfeasible { col, mean, var });
    }
    let s = mean * (1.0 - mean) / var - 1.0;
    Ok((mean * s, (1.0 - mean) * s))
}

/// Greedy correlation filter over basis-term columns.
///
/// Pairs are visited in lexicographic order; when both members are still
/// kept and their absolute Pearson correlation exceeds `cutoff`, the
/// later-indexed member is dropped.
pub fn correlation_filter(values: &DMatrix<f64>, cutoff: f64) -> Result<FilterReport> {
    let n = values.nrows();
    let k = values.ncols();
    if n < 2 {
        return Err(Error::NNotPositive);
    }
    let mut mean = vec![0.0f64; k];
    for c in 0..k {
        for r in 0..n {
            mean[c] += values[(r, c)];
        }
        mean[c] /= n as f64;
    }
    let mut sd = vec![0.0f64; k];
    for c in 0..k {
        let mut s = 0.0;
        for r in 0..n {
            let d = values[(r, c)] - mean[c];
            s += d * d;
        }
        sd[c] = (s / n as f64).sqrt();
    }
    let mut alive = vec![true; k];
    let mut dropped = Vec::new();
    for i in 0..k {
        if !alive[i] {
            continue;
        }
        for j in (i + 1)..k {
            if !alive[j] {
                continue;
            }
            if sd[i] == 0.0 || sd[j] == 0.0 {
                continue;
            }
            let mut cov = 0.0;
            for r in 0..n {
                cov += (values[(r, i)] - mean[i]) * (values[(r, j)] - mean[j]);
            }
            let corr = cov / (n as f64 * sd[i] * sd[j]);
            if corr.abs() > cutoff {
                alive[j] = false;
                dropped.push(DroppedTerm {
                    index: j,
                    correlated_with: i,
                    correlation: corr,
                });
            }
        }
    }
    let kept: Vec<usize> = (0..k).filter(|&c| alive[c]).collect();
    if kept.is_empty() {
        return Err(Error::EmptyBasis);
    }
    Ok(FilterReport {
        initial_terms: k,
        kept,
        dropped,
    })
}

/// Options for [`build_generic_model`].
#[derive(Debug, Clone, Copy)]
pub struct GenericSpec {
    /// Include all pairwise products of distinct continuous coordinates.
    pub include_pairwise: bool,
    /// Include products of each continuous coordinate with the categorical
    /// value (requires a categorical coordinate).
    pub include_cat_cross: bool,
    /// Include the bare continuous coordinates as terms.
    pub include_singles: bool,
    /// Drop later-indexed terms whose absolute correlation on the base
    /// split exceeds this cutoff.
    pub correlation_cutoff: Option<f64>,
}

/// Build a [`GenericModel`] from a base split of raw rows.
///
/// Rows carry `n_cont` continuous coordinates in `(0, 1)` followed by a
/// categorical level in `1..=cat_levels` when `cat_levels > 0`. The base
/// split fixes the reference density (moment-matched Betas, empirical
/// categorical frequencies) and the correlation filter.
pub fn build_generic_model(
    base_rows: &DMatrix<f64>,
    n_cont: usize,
    cat_levels: usize,
    spec: GenericSpec,
) -> Result<(GenericModel, FilterReport)> {
    let n = base_rows.nrows();
    if n < 2 {
        return Err(Error::NNotPositive);
    }
    let want_cols = n_cont + usize::from(cat_levels > 0);
    if base_rows.ncols() != want_cols {
        return Err(Error::DimensionMismatch(format!(
            "base rows have {} columns, model needs {want_cols}",
            base_rows.ncols()
        )));
    }

    let mut betas = Vec::with_capacity(n_cont);
    for c in 0..n_cont {
        let mut mean = 0.0;
        for r in 0..n {
            let x = base_rows[(r, c)];
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::ValueOutOfDomain {
                    column: c,
                    row: r,
                    value: x,
                });
            }
            mean += x;
        }
        mean /= n as f64;
        let mut var = 0.0;
        for r in 0..n {
            let d = base_rows[(r, c)] - mean;
            var += d * d;
        }
        var /= n as f64;
        betas.push(beta_moment_match(c, mean, var)?);
    }

    let mut cat_probs = Vec::new();
    if cat_levels > 0 {
        let mut counts = vec![0usize; cat_levels];
        for r in 0..n {
            let lvl = base_rows[(r, n_cont)];
            let idx = lvl as usize;
            if lvl.fract() != 0.0 || idx < 1 || idx > cat_levels {
                return Err(Error::UnknownCategory {
                    column: "categorical".into(),
                    row: r,
                    value: format!("{lvl}"),
                });
            }
            counts[idx - 1] += 1;
        }
        if let Some(zero) = counts.iter().position(|&c| c == 0) {
            return Err(Error::ZeroCell(zero));
        }
        cat_probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    }

    let mut terms = Vec::new();
    if spec.include_singles {
        for a in 0..n_cont {
            terms.push(BasisTerm::Cont(a));
        }
    }
    if spec.include_pairwise {
        for a in 0..n_cont {
            for b in (a + 1)..n_cont {
                terms.push(BasisTerm::ContPair(a, b));
            }
        }
    }
    if spec.include_cat_cross {
        if cat_levels == 0 {
            return Err(Error::DimensionMismatch(
                "categorical cross terms requested but the model has no categorical coordinate"
                    .into(),
            ));
        }
        for a in 0..n_cont {
            terms.push(BasisTerm::ContCat(a));
        }
    }
    if terms.is_empty() {
        return Err(Error::EmptyBasis);
    }

    let probe = GenericModel::from_parts(
        n_cont,
        cat_levels,
        betas.clone(),
        cat_probs.clone(),
        terms.clone(),
    )?;
    let report = match spec.correlation_cutoff {
        Some(cutoff) => {
            let mut values = DMatrix::zeros(n, terms.len());
            let mut row = vec![0.0f64; want_cols];
            for r in 0..n {
                for c in 0..want_cols {
                    row[c] = base_rows[(r, c)];
                }
                for (c, &t) in terms.iter().enumerate() {
                    values[(r, c)] = probe.term_value(t, &row);
                }
            }
            correlation_filter(&values, cutoff)?
        }
        None => FilterReport {
            initial_terms: terms.len(),
            kept: (0..terms.len()).collect(),
            dropped: Vec::new(),
        },
    };
    let kept_terms: Vec<BasisTerm> = report.kept.iter().map(|&i| terms[i]).collect();
    let model = GenericModel::from_parts(n_cont, cat_levels, betas, cat_probs, kept_terms)?;
    Ok((model, report))
}

impl ExpFamily {
    pub fn p(&self) -> usize {
        match self {
            ExpFamily::Multinomial(m) => m.p(),
            ExpFamily::Quadratic(q) => q.p(),
            ExpFamily::Generic(g) => g.p(),
        }
    }

    /// Expected raw-row width for this model's observations.
    pub fn raw_dim(&self) -> usize {
        match self {
            ExpFamily::Multinomial(_) => 1,
            ExpFamily::Quadratic(q) => q.p(),
            ExpFamily::Generic(g) => g.raw_dim(),
        }
    }

    pub fn has_exact_sampler(&self) -> bool {
        !matches!(self, ExpFamily::Generic(_))
    }

    pub fn has_analytic_psi(&self) -> bool {
        !matches!(self, ExpFamily::Generic(_))
    }

    pub fn psi(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => Ok(m.psi(theta)),
            ExpFamily::Quadratic(q) => Ok(q.psi(theta)),
            ExpFamily::Generic(_) => Err(Error::PsiUnavailable(
                "estimate it by sampling the reference measure",
            )),
        }
    }

    pub fn eta(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => Ok(m.eta(theta)),
            ExpFamily::Quadratic(q) => Ok(q.eta(theta)),
            ExpFamily::Generic(_) => Err(Error::PsiUnavailable(
                "the mean parameter needs Markov-chain sampling",
            )),
        }
    }

    pub fn psi_dd(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => Ok(m.psi_dd(theta)),
            ExpFamily::Quadratic(q) => Ok(q.q_matrix().clone()),
            ExpFamily::Generic(_) => Err(Error::PsiUnavailable(
                "the metric needs Markov-chain sampling",
            )),
        }
    }

    pub fn kappa3_star(&self, theta: &DVector<f64>) -> Result<Tensor3> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => Ok(m.kappa3_star(theta)),
            ExpFamily::Quadratic(q) => Ok(Tensor3::zeros(q.p())),
            ExpFamily::Generic(_) => Err(Error::PsiUnavailable(
                "third cumulants need Markov-chain sampling",
            )),
        }
    }

    pub fn kappa4_star(&self, theta: &DVector<f64>) -> Result<Tensor4> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => Ok(m.kappa4_star(theta)),
            ExpFamily::Quadratic(q) => Ok(Tensor4::zeros(q.p())),
            ExpFamily::Generic(_) => Err(Error::PsiUnavailable(
                "fourth cumulants need Markov-chain sampling",
            )),
        }
    }

    /// Sufficient statistic of one raw row.
    pub fn xi_of_row(&self, row: &[f64]) -> Result<DVector<f64>> {
        if row.len() != self.raw_dim() {
            return Err(Error::DimensionMismatch(format!(
                "raw row has {} values, model expects {}",
                row.len(),
                self.raw_dim()
            )));
        }
        match self {
            ExpFamily::Multinomial(m) => {
                let cat = row[0];
                let idx = cat as usize;
                if cat.fract() != 0.0 || idx >= m.cells() {
                    return Err(Error::UnknownCategory {
                        column: "cell".into(),
                        row: 0,
                        value: format!("{cat}"),
                    });
                }
                let mut xi = DVector::zeros(m.p());
                if idx >= 1 {
                    xi[idx - 1] = 1.0;
                }
                Ok(xi)
            }
            ExpFamily::Quadratic(_) => Ok(DVector::from_column_slice(row)),
            ExpFamily::Generic(g) => Ok(g.xi_of_row(row)),
        }
    }

    /// Map raw observation rows to sufficient-statistic rows.
    pub fn xi_matrix(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = rows.nrows();
        let p = self.p();
        let mut out = DMatrix::zeros(n, p);
        let mut row = vec![0.0f64; rows.ncols()];
        for t in 0..n {
            for c in 0..rows.ncols() {
                row[c] = rows[(t, c)];
            }
            let xi = self.xi_of_row(&row)?;
            for a in 0..p {
                out[(t, a)] = xi[a];
            }
        }
        Ok(out)
    }

    /// Full log density of one raw row, including the reference factor.
    ///
    /// `psi_value` supplies the log normalizer for models without a closed
    /// form (pass `None` to use the analytic one).
    pub fn log_density(
        &self,
        row: &[f64],
        theta: &DVector<f64>,
        psi_value: Option<f64>,
    ) -> Result<f64> {
        self.check_theta(theta)?;
        match self {
            ExpFamily::Multinomial(m) => {
                let cat = row[0] as usize;
                let psi = psi_value.unwrap_or_else(|| m.psi(theta));
                let t = if cat == 0 { 0.0 } else { theta[cat - 1] };
                Ok(t - psi)
            }
            ExpFamily::Quadratic(q) => {
                let x = DVector::from_column_slice(row);
                Ok(q.log_density(&x, theta))
            }
            ExpFamily::Generic(g) => {
                let psi = psi_value.ok_or(Error::PsiUnavailable(
                    "supply a sampled log-normalizer to evaluate densities",
                ))?;
                Ok(g.theta_dot_xi(theta, row) + g.reference_log_density(row)? - psi)
            }
        }
    }

    /// KL divergence from member `theta1` to member `theta2`:
    /// `Psi(theta2) - Psi(theta1) - (theta2 - theta1) . eta(theta1)`.
    pub fn kl_between_members(
        &self,
        theta1: &DVector<f64>,
        theta2: &DVector<f64>,
    ) -> Result<f64> {
        let eta1 = self.eta(theta1)?;
        let d = theta2 - theta1;
        Ok(self.psi(theta2)? - self.psi(theta1)? - d.dot(&eta1))
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "theta has length {}, model has p={}",
                theta.len(),
                self.p()
            )));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteDerivative("theta".into()));
        }
        Ok(())
    }
}

/// Solve a quadratic model's mean equation `eta(theta) = target` exactly.
pub fn quadratic_theta_from_eta(q: &Quadratic, target: &DVector<f64>) -> Result<DVector<f64>> {
    sym_solve_vec(q.q_matrix(), &(target - q.mean_vector()))
}
