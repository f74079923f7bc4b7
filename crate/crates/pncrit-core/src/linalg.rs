//! Dense symmetric-matrix helpers and small high-order tensors.
//!
//! Everything here is deliberately simple: row-major contiguous storage,
//! Cholesky-based solves that never materialize an inverse unless one is
//! explicitly requested as a contraction operand, and mode products written
//! as plain loops. Dimensions in this crate are small (tens, not thousands),
//! so clarity wins over BLAS-grade tuning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative floor used when deciding whether a symmetric matrix counts as
/// positive definite: eigenvalues below `PD_FLOOR * trace / p` are treated
/// as zero.
pub const PD_FLOOR: f64 = 1e-10;

/// Fail if any entry of `m` is NaN or infinite.
pub fn check_finite_matrix(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteDerivative(format!("matrix {name}")))
    }
}

/// Maximum absolute asymmetry `|m - m^T|`, as a quick symmetry diagnostic.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Solve `a * x = b` for symmetric positive definite `a` via Cholesky.
///
/// The factorization is applied to the right-hand side directly; no inverse
/// is ever formed.
pub fn sym_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "sym_solve: a is {}x{}, b is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_finite_matrix("sym_solve lhs", a)?;
    let chol = a.clone().cholesky().ok_or_else(|| Error::NotPd {
        name: "sym_solve lhs",
        detail: cholesky_failure_detail(a),
    })?;
    Ok(chol.solve(b))
}

/// Vector right-hand-side convenience wrapper around [`sym_solve`].
pub fn sym_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = sym_solve(a, &m)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// Explicit inverse of a symmetric positive definite matrix.
///
/// Needed only where the raised metric appears as a contraction *operand*
/// (the second-order engines); linear systems should use [`sym_solve`].
pub fn sym_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eye = DMatrix::identity(a.nrows(), a.ncols());
    sym_solve(a, &eye)
}

fn cholesky_failure_detail(a: &DMatrix<f64>) -> String {
    match min_eigenvalue(a) {
        Some(min) => format!("smallest eigenvalue {min:.3e}"),
        None => "eigendecomposition failed".to_string(),
    }
}

fn min_eigenvalue(a: &DMatrix<f64>) -> Option<f64> {
    if a.nrows() == 0 {
        return None;
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().copied().reduce(f64::min)
}

/// Check that a symmetric matrix is positive definite with a relative
/// eigenvalue floor of `PD_FLOOR * trace / p`.
pub fn assert_pd(name: &'static str, a: &DMatrix<f64>) -> Result<()> {
    check_finite_matrix(name, a)?;
    let p = a.nrows();
    if p == 0 {
        return Err(Error::DimensionMismatch(format!("{name} is empty")));
    }
    let floor = PD_FLOOR * a.trace().abs() / p as f64;
    match min_eigenvalue(a) {
        Some(min) if min > floor => Ok(()),
        Some(min) => Err(Error::NotPd {
            name,
            detail: format!("smallest eigenvalue {min:.3e} <= floor {floor:.3e}"),
        }),
        None => Err(Error::NotPd {
            name,
            detail: "eigendecomposition failed".to_string(),
        }),
    }
}

/// Dense order-3 tensor with row-major layout, all modes of length `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    p: usize,
    data: Vec<f64>,
}

/// Dense order-4 tensor with row-major layout, all modes of length `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    p: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(p: usize) -> Self {
        Tensor3 {
            p,
            data: vec![0.0; p * p * p],
        }
    }

    /// Build from a function of the index triple.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(p);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    t.data[(i * p + j) * p + k] = f(i, j, k);
                }
            }
        }
        t
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.p + j) * self.p + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.p + j) * self.p + k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.p + j) * self.p + k] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Average over all six index permutations.
    pub fn symmetrize_full(&self) -> Tensor3 {
        let p = self.p;
        Tensor3::from_fn(p, |i, j, k| {
            (self.get(i, j, k)
                + self.get(i, k, j)
                + self.get(j, i, k)
                + self.get(j, k, i)
                + self.get(k, i, j)
                + self.get(k, j, i))
                / 6.0
        })
    }

    /// Average over swapping the first two indices only.
    pub fn symmetrize_12(&self) -> Tensor3 {
        let p = self.p;
        Tensor3::from_fn(p, |i, j, k| (self.get(i, j, k) + self.get(j, i, k)) / 2.0)
    }

    /// Contract the selected mode against the first index of `m`:
    /// `out[.., a, ..] = sum_x t[.., x, ..] * m[x, a]`.
    pub fn mode_product(&self, m: &DMatrix<f64>, mode: usize) -> Result<Tensor3> {
        let p = self.p;
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "mode_product: tensor mode length {p}, matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        assert!(mode < 3, "Tensor3 has modes 0..3");
        let mut out = Tensor3::zeros(p);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let v = self.get(i, j, k);
                    if v == 0.0 {
                        continue;
                    }
                    match mode {
                        0 => {
                            for a in 0..p {
                                out.add(a, j, k, v * m[(i, a)]);
                            }
                        }
                        1 => {
                            for a in 0..p {
                                out.add(i, a, k, v * m[(j, a)]);
                            }
                        }
                        _ => {
                            for a in 0..p {
                                out.add(i, j, a, v * m[(k, a)]);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Frobenius inner product.
    pub fn frob_inner(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl Tensor4 {
    pub fn zeros(p: usize) -> Self {
        Tensor4 {
            p,
            data: vec![0.0; p * p * p * p],
        }
    }

    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor4::zeros(p);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        t.data[((i * p + j) * p + k) * p + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.p + j) * self.p + k) * self.p + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[((i * self.p + j) * self.p + k) * self.p + l] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[((i * self.p + j) * self.p + k) * self.p + l] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Average over all 24 index permutations.
    pub fn symmetrize_full(&self) -> Tensor4 {
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
        let p = self.p;
        Tensor4::from_fn(p, |i, j, k, l| {
            let idx = [i, j, k, l];
            PERMS
                .iter()
                .map(|pm| self.get(idx[pm[0]], idx[pm[1]], idx[pm[2]], idx[pm[3]]))
                .sum::<f64>()
                / 24.0
        })
    }

    /// Contract the selected mode against the first index of `m`, as in
    /// [`Tensor3::mode_product`].
    pub fn mode_product(&self, m: &DMatrix<f64>, mode: usize) -> Result<Tensor4> {
        let p = self.p;
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "mode_product: tensor mode length {p}, matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        assert!(mode < 4, "Tensor4 has modes 0..4");
        let mut out = Tensor4::zeros(p);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        let v = self.get(i, j, k, l);
                        if v == 0.0 {
                            continue;
                        }
                        match mode {
                            0 => {
                                for a in 0..p {
                                    out.add(a, j, k, l, v * m[(i, a)]);
                                }
                            }
                            1 => {
                                for a in 0..p {
                                    out.add(i, a, k, l, v * m[(j, a)]);
                                }
                            }
                            2 => {
                                for a in 0..p {
                                    out.add(i, j, a, l, v * m[(k, a)]);
                                }
                            }
                            _ => {
                                for a in 0..p {
                                    out.add(i, j, k, a, v * m[(l, a)]);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frob_inner(&self, other: &Tensor4) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }
}

pub(crate) mod einsum {
    //! A tiny scalar-output Einstein-summation evaluator.
    //!
    //! Each operand carries a label string; every label appears exactly twice
    //! across one expression (closed pairwise contraction to a scalar).
    //! Operands are combined pairwise, smallest intermediate first, with each
    //! pairing evaluated as permute + matrix multiply.

    /// Plain row-major dense tensor of arbitrary (small) rank.
    #[derive(Debug, Clone)]
    pub struct Tens {
        pub dims: Vec<usize>,
        pub data: Vec<f64>,
    }

    impl Tens {
        pub fn len(&self) -> usize {
            self.dims.iter().product::<usize>().max(1)
        }
    }

    fn row_major_strides(dims: &[usize]) -> Vec<usize> {
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        strides
    }

    /// Reorder axes so that output axis `a` is input axis `perm[a]`.
    fn permute(t: &Tens, perm: &[usize]) -> Tens {
        let rank = t.dims.len();
        debug_assert_eq!(perm.len(), rank);
        if rank <= 1 || perm.iter().enumerate().all(|(a, &s)| a == s) {
            return t.clone();
        }
        let out_dims: Vec<usize> = perm.iter().map(|&s| t.dims[s]).collect();
        let src_strides = row_major_strides(&t.dims);
        let moved: Vec<usize> = perm.iter().map(|&s| src_strides[s]).collect();
        let total = t.len();
        let mut data = vec![0.0; total];
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        for slot in data.iter_mut() {
            *slot = t.data[src];
            // odometer increment over the output index
            for a in (0..rank).rev() {
                idx[a] += 1;
                src += moved[a];
                if idx[a] < out_dims[a] {
                    break;
                }
                src -= moved[a] * out_dims[a];
                idx[a] = 0;
            }
        }
        Tens {
            dims: out_dims,
            data,
        }
    }

    /// Contract two labelled operands over their shared labels.
    fn contract_pair(a: &Tens, la: &[u8], b: &Tens, lb: &[u8]) -> (Tens, Vec<u8>) {
        let shared: Vec<u8> = la.iter().copied().filter(|l| lb.contains(l)).collect();
        let kept_a: Vec<u8> = la.iter().copied().filter(|l| !shared.contains(l)).collect();
        let kept_b: Vec<u8> = lb.iter().copied().filter(|l| !shared.contains(l)).collect();

        let pos = |labels: &[u8], l: u8| labels.iter().position(|&x| x == l).unwrap();
        let perm_a: Vec<usize> = kept_a
            .iter()
            .chain(shared.iter())
            .map(|&l| pos(la, l))
            .collect();
        let perm_b: Vec<usize> = shared
            .iter()
            .chain(kept_b.iter())
            .map(|&l| pos(lb, l))
            .collect();
        let ta = permute(a, &perm_a);
        let tb = permute(b, &perm_b);

        let m: usize = kept_a.iter().map(|&l| a.dims[pos(la, l)]).product::<usize>().max(1);
        let kk: usize = shared.iter().map(|&l| a.dims[pos(la, l)]).product::<usize>().max(1);
        let n: usize = kept_b.iter().map(|&l| b.dims[pos(lb, l)]).product::<usize>().max(1);

        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for k in 0..kk {
                let av = ta.data[i * kk + k];
                if av == 0.0 {
                    continue;
                }
                let brow = &tb.data[k * n..(k + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                    *o += av * bv;
                }
            }
        }

        let mut dims = Vec::new();
        for &l in &kept_a {
            dims.push(a.dims[pos(la, l)]);
        }
        for &l in &kept_b {
            dims.push(b.dims[pos(lb, l)]);
        }
        let labels: Vec<u8> = kept_a.into_iter().chain(kept_b).collect();
        (Tens { dims, data: out }, labels)
    }

    /// Fully contract a labelled operand list down to a scalar.
    ///
    /// Pairs are chosen greedily by smallest intermediate size; disconnected
    /// scalar factors multiply through at the end.
    pub fn contract_all(mut ops: Vec<(Tens, Vec<u8>)>) -> f64 {
        assert!(!ops.is_empty());
        while ops.len() > 1 {
            let mut best: Option<(usize, usize, usize)> = None;
            for i in 0..ops.len() {
                for j in (i + 1)..ops.len() {
                    let (ref ti, ref li) = ops[i];
                    let (ref tj, ref lj) = ops[j];
                    let shares = li.iter().any(|l| lj.contains(l));
                    let scalar_pair = li.is_empty() || lj.is_empty();
                    if !shares && !scalar_pair {
                        continue;
                    }
                    let mut size = 1usize;
                    for (axis, &l) in li.iter().enumerate() {
                        if !lj.contains(&l) {
                            size *= ti.dims[axis];
                        }
                    }
                    for (axis, &l) in lj.iter().enumerate() {
                        if !li.contains(&l) {
                            size *= tj.dims[axis];
                        }
                    }
                    if best.map_or(true, |(s, _, _)| size < s) {
                        best = Some((size, i, j));
                    }
                }
            }
            let (_, i, j) = best.expect(
                "contraction graph disconnected with no scalar component; malformed term",
            );
            let (tj, lj) = ops.swap_remove(j);
            let (ti, li) = ops.swap_remove(i);
            let (tout, lout) = contract_pair(&ti, &li, &tj, &lj);
            ops.push((tout, lout));
        }
        let (t, l) = ops.pop().unwrap();
        assert!(l.is_empty(), "unpaired labels {l:?} left after contraction");
        t.data[0]
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(p, p) * p as f64
    }

    #[test]
    fn sym_solve_identity_returns_rhs() {
        let eye = DMatrix::<f64>::identity(4, 4);
        let b = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 + 0.5);
        let x = sym_solve(&eye, &b).unwrap();
        assert!((&x - &b).abs().max() < 1e-14);
    }

    #[test]
    fn sym_solve_diagonal_scales_rhs() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0, 8.0]));
        let b = DMatrix::from_column_slice(3, 1, &[2.0, 4.0, 8.0]);
        let x = sym_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[(i, 0)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sym_solve_multiply_back_residual_small() {
        let a = random_pd(10, 7);
        let b = DMatrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64).sin());
        let x = sym_solve(&a, &b).unwrap();
        let resid = (&a * &x - &b).abs().max();
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn sym_solve_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]); // eigenvalues 4, -2
        let b = DMatrix::identity(2, 2);
        assert!(matches!(
            sym_solve(&a, &b),
            Err(Error::NotPd { .. })
        ));
    }

    #[test]
    fn sym_inverse_times_original_is_identity() {
        let a = random_pd(6, 99);
        let inv = sym_inverse(&a).unwrap();
        let err = (&a * &inv - DMatrix::<f64>::identity(6, 6)).abs().max();
        assert!(err < 1e-10, "identity error {err}");
    }

    #[test]
    fn assert_pd_applies_relative_floor() {
        // trace ~ 2, floor ~ 1e-10; an eigenvalue at 1e-12 must fail
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1e-12]));
        assert!(assert_pd("floor test", &a).is_err());
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1e-6]));
        assert!(assert_pd("floor test", &b).is_ok());
    }

    #[test]
    fn assert_pd_rejects_non_finite() {
        let mut a = DMatrix::<f64>::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(
            assert_pd("nan test", &a),
            Err(Error::NonFiniteDerivative(_))
        ));
    }

    #[test]
    fn mode_products_commute_across_distinct_modes() {
        let p = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Tensor3::from_fn(p, |_, _, _| rng.gen_range(-1.0..1.0));
        let m0 = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let m2 = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let ab = t.mode_product(&m0, 0).unwrap().mode_product(&m2, 2).unwrap();
        let ba = t.mode_product(&m2, 2).unwrap().mode_product(&m0, 0).unwrap();
        for (x, y) in ab.data().iter().zip(ba.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor4_mode_products_commute_across_distinct_modes() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = Tensor4::from_fn(p, |_, _, _, _| rng.gen_range(-1.0..1.0));
        let m1 = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let m3 = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let ab = t.mode_product(&m1, 1).unwrap().mode_product(&m3, 3).unwrap();
        let ba = t.mode_product(&m3, 3).unwrap().mode_product(&m1, 1).unwrap();
        for (x, y) in ab.data().iter().zip(ba.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_product_matches_hand_loops() {
        let p = 3;
        let t = Tensor3::from_fn(p, |i, j, k| (i + 2 * j + 4 * k) as f64 * 0.1);
        let m = DMatrix::from_fn(p, p, |i, j| ((i + 1) * (j + 2)) as f64 * 0.05);
        let got = t.mode_product(&m, 1).unwrap();
        for i in 0..p {
            for a in 0..p {
                for k in 0..p {
                    let mut hand = 0.0;
                    for x in 0..p {
                        hand += t.get(i, x, k) * m[(x, a)];
                    }
                    assert!((got.get(i, a, k) - hand).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn symmetrize_full_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = Tensor3::from_fn(3, |_, _, _| rng.gen_range(-1.0..1.0));
        let s1 = t.symmetrize_full();
        let s2 = s1.symmetrize_full();
        for (a, b) in s1.data().iter().zip(s2.data().iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let t4 = Tensor4::from_fn(3, |_, _, _, _| rng.gen_range(-1.0..1.0));
        let u1 = t4.symmetrize_full();
        let u2 = u1.symmetrize_full();
        for (a, b) in u1.data().iter().zip(u2.data().iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetrize_12_only_touches_first_pair() {
        let t = Tensor3::from_fn(2, |i, j, k| (4 * i + 2 * j + k) as f64);
        let s = t.symmetrize_12();
        assert!((s.get(0, 1, 1) - s.get(1, 0, 1)).abs() < 1e-15);
        // third index stays distinct
        assert!((s.get(0, 1, 0) - s.get(0, 1, 1)).abs() > 0.5);
    }
}
