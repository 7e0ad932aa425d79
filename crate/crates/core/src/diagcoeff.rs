//! The diagonal coefficient homotopy, kept as a baseline for comparison.
//!
//! Every block is deformed at once: (1−t)(D_i0 + λ_i D_ii) x_i + t H_i(λ) x_i
//! with random diagonal D_i0, D_ii, so the start system decouples into
//! diagonal pencils with closed-form solutions. Unlike the fiber product
//! homotopy it always launches ∏ n_i paths, even for singular problems.

use serde::{Deserialize, Serialize};

use crate::mep::{FiberPoint, MepInstance};
use crate::pool;
use crate::tracker::{track_path, Homotopy, PathResult, TrackerConfig};
use crate::{rng, CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagCoeffStart {
    /// Diagonals of D_i0.
    pub d0: Vec<CVec>,
    /// Diagonals of D_ii.
    pub d1: Vec<CVec>,
    pub charts: Vec<CVec>,
}

impl DiagCoeffStart {
    pub fn sample(inst: &MepInstance, seed: u64) -> Self {
        let mut r = rng::stream(seed, rng::DIAG_COEFF);
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        let mut charts = Vec::new();
        for &n in inst.dims() {
            d0.push(rng::gaussian_vector(&mut r, n));
            d1.push(rng::gaussian_vector(&mut r, n));
            charts.push(crate::mep::unit(&rng::gaussian_vector(&mut r, n)));
        }
        Self { d0, d1, charts }
    }

    pub fn count(&self) -> usize {
        self.d0.iter().map(|d| d.len()).product()
    }

    /// All start multi-indices, last block fastest.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        let dims: Vec<usize> = self.d0.iter().map(|d| d.len()).collect();
        (0..self.count())
            .map(|mut n| {
                let mut idx = vec![0; dims.len()];
                for (slot, &d) in idx.iter_mut().zip(&dims).rev() {
                    *slot = n % d;
                    n /= d;
                }
                idx
            })
            .collect()
    }

    /// Start point for a multi-index: λ_i = −(D_i0)_jj / (D_ii)_jj and
    /// x_i = e_j scaled onto the chart.
    pub fn start_point(&self, idx: &[usize]) -> CVec {
        let k = idx.len();
        let n_total: usize = self.d0.iter().map(|d| d.len()).sum();
        let mut z = CVec::zeros(k + n_total);
        let mut off = k;
        for (i, &j) in idx.iter().enumerate() {
            z[i] = -self.d0[i][j] / self.d1[i][j];
            z[off + j] = C64::new(1.0, 0.0) / self.charts[i][j];
            off += self.d0[i].len();
        }
        z
    }
}

pub struct DiagCoeffHomotopy<'a> {
    inst: &'a MepInstance,
    start: &'a DiagCoeffStart,
    x_offsets: Vec<usize>,
}

impl<'a> DiagCoeffHomotopy<'a> {
    pub fn new(inst: &'a MepInstance, start: &'a DiagCoeffStart) -> Self {
        let k = inst.k();
        let mut x_offsets = Vec::with_capacity(k);
        let mut off = k;
        for &n in inst.dims() {
            x_offsets.push(off);
            off += n;
        }
        Self { inst, start, x_offsets }
    }

    fn x(&self, z: &CVec, i: usize) -> CVec {
        z.rows(self.x_offsets[i], self.inst.dim(i)).into_owned()
    }

    fn lambda(&self, z: &CVec) -> Vec<C64> {
        z.rows(0, self.inst.k()).iter().copied().collect()
    }

    /// Q_i(λ_i) = D_i0 + λ_i D_ii as a diagonal.
    fn start_diag(&self, z: &CVec, i: usize) -> CVec {
        &self.start.d0[i] + &self.start.d1[i] * z[i]
    }
}

impl Homotopy for DiagCoeffHomotopy<'_> {
    fn dim(&self) -> usize {
        self.inst.k() + self.inst.dims().iter().sum::<usize>()
    }

    fn lambda_len(&self) -> usize {
        self.inst.k()
    }

    fn residual(&self, z: &CVec, t: f64) -> CVec {
        let k = self.inst.k();
        let lambda = self.lambda(z);
        let mut f = CVec::zeros(self.dim());
        let mut row = 0;
        for i in 0..k {
            let n = self.inst.dim(i);
            let x = self.x(z, i);
            let q = self.start_diag(z, i).component_mul(&x);
            let p = self.inst.residual(i, &lambda, &x).expect("layout");
            f.rows_mut(row, n)
                .copy_from(&(q * C64::new(1.0 - t, 0.0) + p * C64::new(t, 0.0)));
            row += n;
        }
        for i in 0..k {
            f[row] = self.start.charts[i].dot(&self.x(z, i)) - C64::new(1.0, 0.0);
            row += 1;
        }
        f
    }

    fn jacobian(&self, z: &CVec, t: f64) -> CMat {
        let k = self.inst.k();
        let lambda = self.lambda(z);
        let dim = self.dim();
        let s = C64::new(1.0 - t, 0.0);
        let tt = C64::new(t, 0.0);
        let mut j = CMat::zeros(dim, dim);
        let mut row = 0;
        for i in 0..k {
            let n = self.inst.dim(i);
            let x = self.x(z, i);
            // λ columns: (1−t) δ_ij D_ii x_i − t A_ij x_i
            let mut lam_cols = self.inst.lambda_jacobian(i, &x) * tt;
            let own = self.start.d1[i].component_mul(&x) * s;
            let mut col = lam_cols.column_mut(i);
            col += own;
            j.view_mut((row, 0), (n, k)).copy_from(&lam_cols);
            let mut xblock = self.inst.operator(i, &lambda).expect("layout") * tt;
            for (r, d) in self.start_diag(z, i).iter().enumerate() {
                xblock[(r, r)] += d * s;
            }
            j.view_mut((row, self.x_offsets[i]), (n, n)).copy_from(&xblock);
            row += n;
        }
        for i in 0..k {
            let n = self.inst.dim(i);
            j.view_mut((row, self.x_offsets[i]), (1, n))
                .copy_from(&self.start.charts[i].transpose());
            row += 1;
        }
        j
    }

    fn dt(&self, z: &CVec, _t: f64) -> CVec {
        let k = self.inst.k();
        let lambda = self.lambda(z);
        let mut d = CVec::zeros(self.dim());
        let mut row = 0;
        for i in 0..k {
            let n = self.inst.dim(i);
            let x = self.x(z, i);
            let p = self.inst.residual(i, &lambda, &x).expect("layout");
            let q = self.start_diag(z, i).component_mul(&x);
            d.rows_mut(row, n).copy_from(&(p - q));
            row += n;
        }
        d
    }

    /// The single eigenvalue is repeated into all k fiber copies.
    fn fiber_point(&self, z: &CVec, t: f64) -> FiberPoint {
        let k = self.inst.k();
        let lambda = z.rows(0, k).into_owned();
        FiberPoint {
            lambdas: vec![lambda; k],
            xs: (0..k).map(|i| self.x(z, i)).collect(),
            t,
        }
    }
}

/// Track every diagonal coefficient path.
pub fn track_diag_coeff(
    inst: &MepInstance,
    seed: u64,
    cfg: &TrackerConfig,
    workers: usize,
) -> (DiagCoeffStart, Vec<PathResult>) {
    let start = DiagCoeffStart::sample(inst, seed);
    let hom = DiagCoeffHomotopy::new(inst, &start);
    let endgame = cfg.endgame_iters(inst.k(), inst.dims());
    let indices = start.indices();
    let results = pool::map(&indices, workers, |idx| {
        track_path(&hom, &start.start_point(idx), idx.clone(), cfg, endgame, false)
    });
    (start, results)
}
