//! Target constraints G_i(Λ) = R_i D_k vec(Λ), whose common zero set is the
//! diagonal λ_1 = … = λ_k, and the fiber product homotopy that deforms the
//! slices L_i into them.

use serde::{Deserialize, Serialize};

use crate::densela;
use crate::error::{Error, Result};
use crate::mep::{FiberPoint, MepInstance};
use crate::startsys::{SliceSet, RETRY_BUDGET};
use crate::tracker::Homotopy;
use crate::{rng, CMat, CVec, C64};

/// Block-bidiagonal difference matrix: block row b holds I_k in block column b
/// and −I_k in block column b + 1.
pub fn build_dk(k: usize) -> CMat {
    let mut d = CMat::zeros(k * (k - 1), k * k);
    for b in 0..k - 1 {
        for r in 0..k {
            d[(b * k + r, b * k + r)] = C64::new(1.0, 0.0);
            d[(b * k + r, (b + 1) * k + r)] = C64::new(-1.0, 0.0);
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetConstraints {
    /// R_i ∈ C^{(k−1)×k(k−1)}.
    pub r: Vec<CMat>,
    pub dk: CMat,
    /// ∇G_i = R_i D_k ∈ C^{(k−1)×k²}.
    pub grad: Vec<CMat>,
    pub seed: u64,
}

impl TargetConstraints {
    pub fn from_r(r: Vec<CMat>, seed: u64) -> Result<Self> {
        let k = r.len();
        if r.iter().any(|m| m.shape() != (k - 1, k * (k - 1))) {
            return Err(Error::DimensionMismatch("R_i must be (k−1)×k(k−1)".into()));
        }
        let dk = build_dk(k);
        let grad = r.iter().map(|m| m * &dk).collect();
        Ok(Self { r, dk, grad, seed })
    }

    pub fn k(&self) -> usize {
        self.r.len()
    }

    /// The k(k−1) × k² matrix of all constraint rows.
    pub fn stacked(&self) -> CMat {
        stack_rows(&self.grad)
    }

    /// Concatenated R_i; the kernel of the stacked ∇G is the diagonal
    /// exactly when this square matrix is invertible.
    fn stacked_r(&self) -> CMat {
        stack_rows(&self.r)
    }
}

fn stack_rows(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut out = CMat::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.nrows()).copy_from(b);
        offset += b.nrows();
    }
    out
}

pub fn sample_target(k: usize, seed: u64) -> Result<TargetConstraints> {
    let mut r = rng::stream(seed, rng::TARGET);
    for _ in 0..RETRY_BUDGET {
        let rs = (0..k)
            .map(|_| rng::gaussian_matrix(&mut r, k - 1, k * (k - 1)))
            .collect();
        let target = TargetConstraints::from_r(rs, seed)?;
        let dec = densela::svd(&target.stacked_r())?;
        if dec.rank(1e-10) == k * (k - 1) {
            return Ok(target);
        }
    }
    Err(Error::RetriesExhausted("target sampling"))
}

/// blockdiag(S_1, …, S_k), the linear part of all slices.
pub fn slope_blockdiag(slices: &SliceSet) -> CMat {
    let k = slices.k();
    let mut m = CMat::zeros(k * (k - 1), k * k);
    for (i, s) in slices.slopes.iter().enumerate() {
        m.view_mut((i * (k - 1), i * k), (k - 1, k)).copy_from(s);
    }
    m
}

/// Linear part (1−t)·blockdiag(S_i) + t·∇G of the time-t constraints.
pub fn constraint_linear_part(slices: &SliceSet, target: &TargetConstraints, t: f64) -> CMat {
    slope_blockdiag(slices) * C64::new(1.0 - t, 0.0) + target.stacked() * C64::new(t, 0.0)
}

/// The homogenized constraint matrix M_t: column 0 carries the constants
/// −(1−t), the remaining k² columns the linear part.
pub fn constraint_matrix_mt(slices: &SliceSet, target: &TargetConstraints, t: f64) -> CMat {
    let k = slices.k();
    let lin = constraint_linear_part(slices, target, t);
    let mut m = CMat::zeros(k * (k - 1), k * k + 1);
    m.column_mut(0).fill(C64::new(-(1.0 - t), 0.0));
    m.columns_mut(1, k * k).copy_from(&lin);
    m
}

/// (1−t) L_i(λ_i) + t G_i(Λ), stacked over i.
pub fn homotopy_constraint_residual(
    slices: &SliceSet,
    target: &TargetConstraints,
    lambdas: &[CVec],
    t: f64,
) -> CVec {
    let k = slices.k();
    let vec_lambda = CVec::from_iterator(k * k, lambdas.iter().flat_map(|l| l.iter().copied()));
    let mut out = CVec::zeros(k * (k - 1));
    for i in 0..k {
        let l = slices.slice_residual(i, &lambdas[i]);
        let g = &target.grad[i] * &vec_lambda;
        out.rows_mut(i * (k - 1), k - 1)
            .copy_from(&(l * C64::new(1.0 - t, 0.0) + g * C64::new(t, 0.0)));
    }
    out
}

/// The fiber product homotopy over z = (vec Λ, x_1, …, x_k). Rows: the
/// bilinear blocks H_i(λ_i) x_i, the charts d_iᵀ x_i − 1, and the k(k−1)
/// time-dependent constraint rows.
pub struct FiberHomotopy<'a> {
    inst: &'a MepInstance,
    slices: &'a SliceSet,
    slope_bd: CMat,
    grad_g: CMat,
    /// Stacked R_i and D_k, kept apart so that G vanishes exactly on the diagonal.
    r_stacked: CMat,
    dk: CMat,
    x_offsets: Vec<usize>,
}

impl<'a> FiberHomotopy<'a> {
    pub fn new(inst: &'a MepInstance, slices: &'a SliceSet, target: &TargetConstraints) -> Self {
        let k = inst.k();
        let mut x_offsets = Vec::with_capacity(k);
        let mut off = k * k;
        for &n in inst.dims() {
            x_offsets.push(off);
            off += n;
        }
        Self {
            inst,
            slices,
            slope_bd: slope_blockdiag(slices),
            grad_g: target.stacked(),
            r_stacked: target.stacked_r(),
            dk: target.dk.clone(),
            x_offsets,
        }
    }

    pub fn instance(&self) -> &MepInstance {
        self.inst
    }

    fn linear_part(&self, t: f64) -> CMat {
        &self.slope_bd * C64::new(1.0 - t, 0.0) + &self.grad_g * C64::new(t, 0.0)
    }

    fn lambda(&self, z: &CVec, i: usize) -> Vec<C64> {
        let k = self.inst.k();
        z.rows(i * k, k).iter().copied().collect()
    }

    fn x(&self, z: &CVec, i: usize) -> CVec {
        z.rows(self.x_offsets[i], self.inst.dim(i)).into_owned()
    }

    fn constraint_row_offset(&self) -> usize {
        self.inst.dims().iter().sum::<usize>() + self.inst.k()
    }
}

impl Homotopy for FiberHomotopy<'_> {
    fn dim(&self) -> usize {
        self.inst.fiber_dim()
    }

    fn lambda_len(&self) -> usize {
        self.inst.k() * self.inst.k()
    }

    fn fiber_point(&self, z: &CVec, t: f64) -> FiberPoint {
        FiberPoint::from_vector(z, self.inst.k(), self.inst.dims(), t)
    }

    fn residual(&self, z: &CVec, t: f64) -> CVec {
        let k = self.inst.k();
        let mut f = CVec::zeros(self.dim());
        let mut row = 0;
        for i in 0..k {
            let n = self.inst.dim(i);
            let h = self
                .inst
                .residual(i, &self.lambda(z, i), &self.x(z, i))
                .expect("fiber point layout matches instance");
            f.rows_mut(row, n).copy_from(&h);
            row += n;
        }
        for i in 0..k {
            f[row] = self.slices.charts[i].dot(&self.x(z, i)) - C64::new(1.0, 0.0);
            row += 1;
        }
        let vec_lambda = z.rows(0, k * k);
        let slices = (&self.slope_bd * vec_lambda).add_scalar(C64::new(-1.0, 0.0));
        let target = &self.r_stacked * (&self.dk * vec_lambda);
        f.rows_mut(row, k * (k - 1))
            .copy_from(&(slices * C64::new(1.0 - t, 0.0) + target * C64::new(t, 0.0)));
        f
    }

    fn jacobian(&self, z: &CVec, t: f64) -> CMat {
        let k = self.inst.k();
        let dim = self.dim();
        let mut j = CMat::zeros(dim, dim);
        let mut row = 0;
        for i in 0..k {
            let n = self.inst.dim(i);
            let x = self.x(z, i);
            j.view_mut((row, i * k), (n, k)).copy_from(&self.inst.lambda_jacobian(i, &x));
            let h = self.inst.operator(i, &self.lambda(z, i)).expect("layout");
            j.view_mut((row, self.x_offsets[i]), (n, n)).copy_from(&h);
            row += n;
        }
        for i in 0..k {
            let n = self.inst.dim(i);
            j.view_mut((row, self.x_offsets[i]), (1, n))
                .copy_from(&self.slices.charts[i].transpose());
            row += 1;
        }
        j.view_mut((row, 0), (k * (k - 1), k * k)).copy_from(&self.linear_part(t));
        j
    }

    fn dt(&self, z: &CVec, _t: f64) -> CVec {
        // only the constraint rows move: d/dt [(1−t)(S vecΛ − 1) + t ∇G vecΛ]
        let k = self.inst.k();
        let mut d = CVec::zeros(self.dim());
        let row = self.constraint_row_offset();
        let vec_lambda = z.rows(0, k * k);
        let moving = (&self.grad_g - &self.slope_bd) * vec_lambda;
        d.rows_mut(row, k * (k - 1))
            .copy_from(&moving.add_scalar(C64::new(1.0, 0.0)));
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MaxModulus;
    use crate::problems::random_mep;
    use crate::startsys::sample_slices;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diagonal_vec(lambda: &CVec, k: usize) -> CVec {
        CVec::from_iterator(k * k, (0..k).flat_map(|_| lambda.iter().copied()))
    }

    #[test]
    fn dk_pattern() {
        let d2 = build_dk(2);
        let want = CMat::from_row_slice(
            2,
            4,
            &[c(1.0), c(0.0), c(-1.0), c(0.0), c(0.0), c(1.0), c(0.0), c(-1.0)],
        );
        assert_eq!(d2, want);
        let d3 = build_dk(3);
        assert_eq!(d3.shape(), (6, 9));
        assert_eq!(d3[(3, 3)], c(1.0));
        assert_eq!(d3[(3, 6)], c(-1.0));
        assert_eq!(d3[(0, 6)], c(0.0));
        let mut r = rng::stream(1, 0);
        for k in 2..=4 {
            let l = rng::gaussian_vector(&mut r, k);
            assert_eq!(build_dk(k) * diagonal_vec(&l, k), CVec::zeros(k * (k - 1)));
        }
    }

    #[test]
    fn target_determinism_and_kernel() {
        assert_eq!(sample_target(3, 4).unwrap(), sample_target(3, 4).unwrap());
        for k in 2..=4 {
            let t = sample_target(k, 9).unwrap();
            let g = t.stacked();
            let dec = densela::svd(&g).unwrap();
            assert_eq!(dec.rank(1e-10), k * (k - 1));
            let kernel = densela::kernel_basis(&g, 1e-10).unwrap();
            assert_eq!(kernel.ncols(), k);
            let mut r = rng::stream(2, 0);
            for _ in 0..20 {
                let v = diagonal_vec(&rng::gaussian_vector(&mut r, k), k);
                assert!((&g * &v).norm() < 1e-12 * (1.0 + v.norm()));
                let dist = (&v - &kernel * (kernel.adjoint() * &v)).norm();
                assert!(dist < 1e-12 * v.norm());
            }
        }
        let t3 = sample_target(3, 0).unwrap();
        assert_eq!(t3.stacked().shape(), (6, 9));
    }

    #[test]
    fn mt_endpoints() {
        let inst = random_mep(3, &[2, 2, 2], 1).unwrap();
        let s = sample_slices(&inst, 1).unwrap();
        let t = sample_target(3, 1).unwrap();
        let m1 = constraint_matrix_mt(&s, &t, 1.0);
        assert!(m1.column(0).iter().all(|z| *z == c(0.0)));
        assert_eq!(m1.columns(1, 9).into_owned(), t.stacked());
        let m0 = constraint_matrix_mt(&s, &t, 0.0);
        assert!(m0.column(0).iter().all(|z| *z == c(-1.0)));
        assert_eq!(m0.columns(1, 9).into_owned(), slope_blockdiag(&s));
        assert_eq!(m0[(0, 4)], c(0.0));
    }

    #[test]
    fn constraint_residual_cases() {
        let k = 3;
        let inst = random_mep(k, &[2, 2, 2], 2).unwrap();
        let s = sample_slices(&inst, 2).unwrap();
        let t = sample_target(k, 2).unwrap();
        let mut r = rng::stream(5, 0);
        let diag = rng::gaussian_vector(&mut r, k);
        let same = vec![diag.clone(); k];
        assert!(homotopy_constraint_residual(&s, &t, &same, 1.0).norm() < 1e-12);
        let on_slices: Vec<CVec> =
            (0..k).map(|i| &s.q[i] * rng::complex_gaussian(&mut r) + &s.p[i]).collect();
        assert!(homotopy_constraint_residual(&s, &t, &on_slices, 0.0).norm() < 1e-12);

        let generic: Vec<CVec> = (0..k).map(|_| rng::gaussian_vector(&mut r, k)).collect();
        let r0 = homotopy_constraint_residual(&s, &t, &generic, 0.0);
        let r1 = homotopy_constraint_residual(&s, &t, &generic, 1.0);
        let half = homotopy_constraint_residual(&s, &t, &generic, 0.5);
        assert!((&half - (r0 + r1) * c(0.5)).norm() < 1e-13);
        // and the homogenized matrix form agrees
        let mut hom = CVec::zeros(k * k + 1);
        hom[0] = c(1.0);
        for i in 0..k {
            hom.rows_mut(1 + i * k, k).copy_from(&generic[i]);
        }
        let m = constraint_matrix_mt(&s, &t, 0.5);
        assert!((&m * hom - half).norm() < 1e-13);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let inst = random_mep(3, &[2, 3, 2], 3).unwrap();
        let s = sample_slices(&inst, 3).unwrap();
        let t = sample_target(3, 3).unwrap();
        let h = FiberHomotopy::new(&inst, &s, &t);
        let mut r = rng::stream(6, 0);
        let z = rng::gaussian_vector(&mut r, h.dim());
        let tt = 0.37;
        let j = h.jacobian(&z, tt);
        let eps = 1e-7;
        let dir = rng::gaussian_vector(&mut r, h.dim());
        let fd = (h.residual(&(&z + &dir * c(eps)), tt) - h.residual(&(&z - &dir * c(eps)), tt)) / c(2.0 * eps);
        assert!((fd - &j * &dir).max_modulus() < 1e-6);
        let fdt = (h.residual(&z, tt + eps) - h.residual(&z, tt - eps)) / c(2.0 * eps);
        assert!((fdt - h.dt(&z, tt)).max_modulus() < 1e-6);
    }

    #[test]
    fn only_constraint_rows_depend_on_t() {
        let inst = random_mep(2, &[3, 2], 4).unwrap();
        let s = sample_slices(&inst, 4).unwrap();
        let t = sample_target(2, 4).unwrap();
        let h = FiberHomotopy::new(&inst, &s, &t);
        let z = rng::gaussian_vector(&mut rng::stream(8, 0), h.dim());
        let fixed = 3 + 2 + 2;
        let a = h.residual(&z, 0.2);
        let b = h.residual(&z, 0.9);
        assert_eq!(a.rows(0, fixed), b.rows(0, fixed));
        let d = h.dt(&z, 0.5);
        assert!(d.rows(0, fixed).iter().all(|v| *v == c(0.0)));
    }
}
