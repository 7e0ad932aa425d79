//! Start system: random affine slices L_i(λ_i) = S_i λ_i − 1, eigenvector
//! charts d_i, the associated pencils, and the product start set.
//!
//! On the line {β q_i + p_i} cut out by L_i, block i of the problem becomes
//! the pencil Â_i − β B̂_i, so the start solutions are products of ordinary
//! generalized eigenpairs.

use serde::{Deserialize, Serialize};

use crate::densela::{self, gep_finite_eigs};
use crate::MaxModulus;
use crate::error::{Error, Result};
use crate::mep::{FiberPoint, MepInstance};
use crate::{rng, CMat, CVec, C64};

pub const RETRY_BUDGET: usize = 5;
/// Relative rank tolerance for a slice matrix.
const SLICE_RANK_TOL: f64 = 1e-8;
/// Chart normalization fails when |d_iᵀ x_i| drops below this.
pub const CHART_TOL: f64 = 1e-12;
/// Start points must satisfy every start-system row to this accuracy.
pub const START_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSet {
    /// S_i ∈ C^{(k−1)×k}; the slice is S_i λ_i − 1 = 0.
    pub slopes: Vec<CMat>,
    /// Unit null direction of S_i.
    pub q: Vec<CVec>,
    /// A particular solution S_i p_i = 1.
    pub p: Vec<CVec>,
    /// Eigenvector charts d_iᵀ x_i = 1.
    pub charts: Vec<CVec>,
    pub seed: u64,
}

impl SliceSet {
    /// Slices from given slope matrices, with q_i the normalized unit null
    /// vector and p_i the minimum-norm solution.
    pub fn from_slopes(slopes: Vec<CMat>, charts: Vec<CVec>, seed: u64) -> Result<Self> {
        let mut q = Vec::with_capacity(slopes.len());
        let mut p = Vec::with_capacity(slopes.len());
        for s in &slopes {
            let (qi, pi) = slice_directions(s)?;
            q.push(qi);
            p.push(pi);
        }
        Self::from_parts(slopes, q, p, charts, seed)
    }

    /// Slices with caller-supplied q_i and p_i (e.g. known reference
    /// values); the slice invariants are checked.
    pub fn from_parts(
        slopes: Vec<CMat>,
        q: Vec<CVec>,
        p: Vec<CVec>,
        charts: Vec<CVec>,
        seed: u64,
    ) -> Result<Self> {
        let k = slopes.len();
        if q.len() != k || p.len() != k || charts.len() != k {
            return Err(Error::DimensionMismatch("slice set components disagree on k".into()));
        }
        for i in 0..k {
            let s = &slopes[i];
            if s.shape() != (k - 1, k) || q[i].len() != k || p[i].len() != k {
                return Err(Error::DimensionMismatch(format!("slice {} has wrong shape", i + 1)));
            }
            let scale = 1.0 + s.norm() * (1.0 + p[i].norm());
            if q[i].norm() == 0.0 || (s * &q[i]).norm() > 1e-12 * scale * q[i].norm() {
                return Err(Error::InvalidInstance(format!("q_{} is not a null direction", i + 1)));
            }
            let ones = CVec::from_element(k - 1, C64::new(1.0, 0.0));
            if (s * &p[i] - ones).norm() > 1e-12 * scale {
                return Err(Error::InvalidInstance(format!("p_{} is not on its slice", i + 1)));
            }
        }
        Ok(Self {
            slopes,
            q,
            p,
            charts,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.slopes.len()
    }

    /// L_i(λ_i) = S_i λ_i − 1.
    pub fn slice_residual(&self, i: usize, lambda: &CVec) -> CVec {
        (&self.slopes[i] * lambda).add_scalar(C64::new(-1.0, 0.0))
    }

    /// Redraw the chart of block `i` (used when a start eigenvector is
    /// nearly orthogonal to it).
    pub fn resample_chart(&mut self, i: usize, attempt: usize) {
        let mut r = rng::stream(
            self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(attempt as u64 + 1)),
            rng::CHARTS,
        );
        let n = self.charts[i].len();
        for _ in 0..i {
            rng::gaussian_vector(&mut r, n);
        }
        self.charts[i] = crate::mep::unit(&rng::gaussian_vector(&mut r, n));
    }
}

/// Unit null vector (first nonzero entry real positive) and minimum-norm
/// particular solution of S λ = 1.
pub fn slice_directions(s: &CMat) -> Result<(CVec, CVec)> {
    let k = s.ncols();
    let dec = densela::svd(s)?;
    if dec.rank(SLICE_RANK_TOL) != k - 1 {
        return Err(Error::IllConditioned {
            pivot: dec.sigma_min(),
            threshold: SLICE_RANK_TOL * dec.sigma_max(),
        });
    }
    let q = normalize_phase(&dec.v.column(k - 1).into_owned());
    let ones = CVec::from_element(k - 1, C64::new(1.0, 0.0));
    let gram = s * s.adjoint();
    let p = s.adjoint() * densela::solve_square(&gram, &ones)?;
    Ok((q, p))
}

/// Scale a vector to unit norm with its first non-negligible entry real positive.
pub fn normalize_phase(v: &CVec) -> CVec {
    let v = crate::mep::unit(v);
    let cut = 1e-12 * v.max_modulus();
    match v.iter().find(|z| z.norm() > cut) {
        Some(z) => {
            let phase = z.conj() / z.norm();
            v * phase
        }
        None => v,
    }
}

/// Draw slices and charts for `inst` from the given seed.
pub fn sample_slices(inst: &MepInstance, seed: u64) -> Result<SliceSet> {
    let k = inst.k();
    let mut slope_rng = rng::stream(seed, rng::SLICES);
    let mut chart_rng = rng::stream(seed, rng::CHARTS);
    let mut slopes = Vec::with_capacity(k);
    let mut q = Vec::with_capacity(k);
    let mut p = Vec::with_capacity(k);
    for _ in 0..k {
        let mut found = None;
        for _ in 0..RETRY_BUDGET {
            let s = rng::gaussian_matrix(&mut slope_rng, k - 1, k);
            if let Ok(dirs) = slice_directions(&s) {
                found = Some((s, dirs));
                break;
            }
        }
        let (s, (qi, pi)) = found.ok_or(Error::RetriesExhausted("slice sampling"))?;
        slopes.push(s);
        q.push(qi);
        p.push(pi);
    }
    let charts = inst
        .dims()
        .iter()
        .map(|&n| crate::mep::unit(&rng::gaussian_vector(&mut chart_rng, n)))
        .collect();
    SliceSet::from_parts(slopes, q, p, charts, seed)
}

/// (Â_i, B̂_i) with H_i(β q + p) = Â_i − β B̂_i.
pub fn associated_pencil(inst: &MepInstance, i: usize, q: &CVec, p: &CVec) -> (CMat, CMat) {
    let n = inst.dim(i);
    let mut a_hat = inst.coeff(i, 0).clone();
    let mut b_hat = CMat::zeros(n, n);
    for j in 0..inst.k() {
        let a = inst.coeff(i, j + 1);
        a_hat -= a * p[j];
        b_hat += a * q[j];
    }
    (a_hat, b_hat)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartPair {
    pub beta: C64,
    pub lambda: CVec,
    /// Chart-normalized: d_iᵀ x = 1.
    pub x: CVec,
}

/// Per-block start pairs; the start set is their Cartesian product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartSet {
    pub blocks: Vec<Vec<StartPair>>,
    /// Infinite eigenvalues filtered from each associated pencil.
    pub infinite: Vec<usize>,
}

impl StartSet {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `n`-th multi-index in lexicographic order (last block fastest).
    pub fn multi_index(&self, mut n: usize) -> Vec<usize> {
        let mut idx = vec![0; self.blocks.len()];
        for (slot, block) in idx.iter_mut().zip(&self.blocks).rev() {
            *slot = n % block.len();
            n /= block.len();
        }
        idx
    }

    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|n| self.multi_index(n))
    }

    pub fn point(&self, idx: &[usize]) -> FiberPoint {
        FiberPoint {
            lambdas: self.blocks.iter().zip(idx).map(|(b, &j)| b[j].lambda.clone()).collect(),
            xs: self.blocks.iter().zip(idx).map(|(b, &j)| b[j].x.clone()).collect(),
            t: 0.0,
        }
    }
}

/// Solve every associated pencil and chart-normalize its eigenvectors.
pub fn start_solutions(inst: &MepInstance, slices: &SliceSet) -> Result<StartSet> {
    let k = inst.k();
    let mut blocks = Vec::with_capacity(k);
    let mut infinite = Vec::with_capacity(k);
    for i in 0..k {
        let (a_hat, b_hat) = associated_pencil(inst, i, &slices.q[i], &slices.p[i]);
        let spectrum = gep_finite_eigs(&a_hat, &b_hat)?;
        let mut pairs = Vec::with_capacity(spectrum.pairs.len());
        let mut bad = Vec::new();
        let mut worst: f64 = 0.0;
        for (j, pair) in spectrum.pairs.into_iter().enumerate() {
            let dx = slices.charts[i].dot(&pair.x);
            if dx.norm() < CHART_TOL {
                return Err(Error::ChartDegenerate { block: i });
            }
            let x = pair.x / dx;
            let lambda = &slices.q[i] * pair.beta + &slices.p[i];
            let res = inst
                .residual(i, lambda.as_slice(), &x)?
                .max_modulus()
                .max(slices.slice_residual(i, &lambda).max_modulus())
                .max((slices.charts[i].dot(&x) - C64::new(1.0, 0.0)).norm());
            if res >= START_RESIDUAL_TOL {
                bad.push(j);
                worst = worst.max(res);
            }
            pairs.push(StartPair {
                beta: pair.beta,
                lambda,
                x,
            });
        }
        if !bad.is_empty() {
            return Err(Error::StartResidual {
                index: bad,
                residual: worst,
            });
        }
        blocks.push(pairs);
        infinite.push(spectrum.infinite);
    }
    Ok(StartSet { blocks, infinite })
}

/// Start set with bounded chart resampling on degenerate charts.
pub fn start_solutions_retrying(inst: &MepInstance, slices: &mut SliceSet) -> Result<StartSet> {
    for attempt in 0..RETRY_BUDGET {
        match start_solutions(inst, slices) {
            Err(Error::ChartDegenerate { block }) => slices.resample_chart(block, attempt),
            other => return other,
        }
    }
    Err(Error::RetriesExhausted("chart sampling"))
}

/// Number of finite eigenvalues of each associated pencil for a random slice,
/// i.e. the degree of det H_i restricted to a generic line.
pub fn intrinsic_dimension(inst: &MepInstance, seed: u64) -> Result<Vec<usize>> {
    let slices = sample_slices(inst, seed)?;
    (0..inst.k())
        .map(|i| {
            let (a, b) = associated_pencil(inst, i, &slices.q[i], &slices.p[i]);
            Ok(gep_finite_eigs(&a, &b)?.pairs.len())
        })
        .collect()
}
