//! Instance generators and instance file I/O.
//!
//! Instance files are JSON:
//!
//! ```json
//! {"k": 2, "dims": [2, 2], "A": [[A_10, A_11, A_12], [A_20, A_21, A_22]]}
//! ```
//!
//! where every matrix is a list of rows and every entry an `[re, im]` pair.
//! Coefficients follow the convention H_i(λ) = A_i0 − Σ_j λ_j A_ij.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mep::{Eigenpair, MepInstance};
use crate::startsys::SliceSet;
use crate::{rng, CMat, CVec, C64};

/// The two-parameter, 2×2 worked example used throughout the tests.
pub fn integer_example() -> MepInstance {
    let m = |a: [f64; 4]| CMat::from_row_slice(2, 2, &a.map(|v| C64::new(v, 0.0)));
    MepInstance::new(vec![
        vec![m([2.0, 3.0, 5.0, 7.0]), m([11.0, 13.0, 17.0, 19.0]), m([23.0, 29.0, 31.0, 37.0])],
        vec![m([12.0, 31.0, 15.0, 71.0]), m([1.0; 4]), m([2.0; 4])],
    ])
    .expect("valid example")
}

/// Finite associated-pencil eigenvalues of the worked example under
/// [`integer_example_slices`]: two from the first block, one from the second.
pub const INTEGER_EXAMPLE_START_BETAS: [C64; 3] = [
    C64::new(-0.9978, 1.1933),
    C64::new(-0.5637, 0.3035),
    C64::new(-3.6333, -28.4804),
];

/// The fixed slices used with the worked example. The eigenvalues β of the
/// associated pencils depend on the scale and phase of q_i, so q_i is taken
/// as the null vector LAPACK's SVD returns for the 1×2 row S_i (the second
/// column of the Householder reflector that maps conj(S_i) onto a multiple of
/// e_1); p_i are the basic solutions and both charts are e_1.
pub fn integer_example_slices() -> SliceSet {
    let c = |re: f64, im: f64| C64::new(re, im);
    let rows = [[c(0.6909, 0.2745), c(0.4277, -0.1333)], [c(-0.1443, 0.5711), c(-0.0735, 1.8085)]];
    let slopes: Vec<CMat> = rows.iter().map(|r| CMat::from_row_slice(1, 2, r)).collect();
    let q = rows.iter().map(|r| householder_null_direction(r[0], r[1])).collect();
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let p = vec![CVec::from_vec(vec![one / rows[0][0], zero]), CVec::from_vec(vec![zero, one / rows[1][1]])];
    let e1 = CVec::from_vec(vec![one, zero]);
    SliceSet::from_parts(slopes, q, p, vec![e1.clone(), e1], 0).expect("valid example slices")
}

fn householder_null_direction(a: C64, b: C64) -> CVec {
    let (alpha, x1) = (a.conj(), b.conj());
    let beta = -(a.norm_sqr() + b.norm_sqr()).sqrt().copysign(alpha.re);
    let tau = (beta - alpha) / beta;
    let v1 = x1 / (alpha - beta);
    CVec::from_vec(vec![-tau * v1.conj(), C64::new(1.0, 0.0) - tau * v1.norm_sqr()])
}

/// All entries iid standard complex Gaussian.
pub fn random_mep(k: usize, dims: &[usize], seed: u64) -> Result<MepInstance> {
    if dims.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} block sizes given for k = {k}",
            dims.len()
        )));
    }
    let mut r = rng::stream(seed, rng::INSTANCE);
    let coeffs = dims
        .iter()
        .map(|&n| (0..=k).map(|_| rng::gaussian_matrix(&mut r, n, n)).collect())
        .collect();
    MepInstance::new(coeffs)
}

/// Index order of the quadratic coefficients: 00, 10, 01, 20, 11, 02.
pub const QMEP_TERMS: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Quadratic two-parameter problem Q_i(λ, μ) x_i = 0 with
/// Q_1 = B_00 + λB_10 + μB_01 + λ²B_20 + λμB_11 + μ²B_02 and Q_2 likewise in C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmepInstance {
    /// Coefficients in [`QMEP_TERMS`] order.
    pub b: Vec<CMat>,
    pub c: Vec<CMat>,
}

impl QmepInstance {
    pub fn new(b: Vec<CMat>, c: Vec<CMat>) -> Result<Self> {
        for (name, set) in [("B", &b), ("C", &c)] {
            if set.len() != 6 {
                return Err(Error::InvalidInstance(format!("{name} needs 6 coefficients")));
            }
            let n = set[0].nrows();
            if n == 0 || set.iter().any(|m| m.shape() != (n, n)) {
                return Err(Error::InvalidInstance(format!("{name} coefficients must share a square size")));
            }
        }
        Ok(Self { b, c })
    }

    fn block(&self, i: usize) -> &[CMat] {
        if i == 0 {
            &self.b
        } else {
            &self.c
        }
    }

    /// Q_i(λ, μ).
    pub fn evaluate(&self, i: usize, lambda: C64, mu: C64) -> CMat {
        let coeffs = self.block(i);
        let mut q = CMat::zeros(coeffs[0].nrows(), coeffs[0].ncols());
        for (m, &(a, b)) in coeffs.iter().zip(&QMEP_TERMS) {
            q += m * (lambda.powu(a) * mu.powu(b));
        }
        q
    }

    /// ‖Q_i(λ, μ) x‖ / (Σ‖coeffs‖_2 · max(1, |λ|, |μ|)²) for unit x.
    pub fn relative_residual(&self, i: usize, lambda: C64, mu: C64, x: &CVec) -> f64 {
        let x = crate::mep::unit(x);
        let scale: f64 = self.block(i).iter().map(crate::densela::op_norm).sum::<f64>()
            * 1f64.max(lambda.norm()).max(mu.norm()).powi(2);
        (self.evaluate(i, lambda, mu) * x).norm() / scale
    }
}

pub fn random_qmep(n1: usize, n2: usize, seed: u64) -> Result<QmepInstance> {
    let mut r = rng::stream(seed, rng::INSTANCE);
    let b = (0..6).map(|_| rng::gaussian_matrix(&mut r, n1, n1)).collect();
    let c = (0..6).map(|_| rng::gaussian_matrix(&mut r, n2, n2)).collect();
    QmepInstance::new(b, c)
}

/// Linearize to a (singular) linear two-parameter problem of sizes (3n_1, 3n_2)
/// with eigenvectors (x, λx, μx). The λ and μ blocks are negated to match
/// the H = A_0 − λA_1 − μA_2 convention.
pub fn qmep_linearize(q: &QmepInstance) -> MepInstance {
    let coeffs = (0..2)
        .map(|i| {
            let m = q.block(i);
            let n = m[0].nrows();
            let id = CMat::identity(n, n);
            let mut a0 = CMat::zeros(3 * n, 3 * n);
            let mut a1 = CMat::zeros(3 * n, 3 * n);
            let mut a2 = CMat::zeros(3 * n, 3 * n);
            a0.view_mut((0, 0), (n, n)).copy_from(&m[0]);
            a0.view_mut((0, n), (n, n)).copy_from(&m[1]);
            a0.view_mut((0, 2 * n), (n, n)).copy_from(&m[2]);
            a0.view_mut((n, n), (n, n)).copy_from(&-&id);
            a0.view_mut((2 * n, 2 * n), (n, n)).copy_from(&-&id);
            a1.view_mut((0, n), (n, n)).copy_from(&-&m[3]);
            a1.view_mut((0, 2 * n), (n, n)).copy_from(&-&m[4]);
            a1.view_mut((n, 0), (n, n)).copy_from(&-&id);
            a2.view_mut((0, 2 * n), (n, n)).copy_from(&-&m[5]);
            a2.view_mut((2 * n, 0), (n, n)).copy_from(&-&id);
            vec![a0, a1, a2]
        })
        .collect();
    MepInstance::new(coeffs).expect("linearization has consistent shapes")
}

/// A QMEP eigenpair read back from a linearized eigenpair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QmepPair {
    pub lambda: C64,
    pub mu: C64,
    pub xs: [CVec; 2],
    /// max over blocks of ‖x̃_2 − λx̃_1‖ + ‖x̃_3 − μx̃_1‖, relative to ‖x̃‖.
    pub structure_residual: f64,
    /// Relative residuals of both quadratic equations.
    pub residuals: [f64; 2],
}

pub fn recover_qmep_pair(q: &QmepInstance, pair: &Eigenpair) -> QmepPair {
    let (lambda, mu) = (pair.lambda[0], pair.lambda[1]);
    let mut structure_residual: f64 = 0.0;
    let xs = [0, 1].map(|i| {
        let xt = &pair.xs[i];
        let n = xt.len() / 3;
        let x = xt.rows(0, n).into_owned();
        let dev = (xt.rows(n, n) - &x * lambda).norm() + (xt.rows(2 * n, n) - &x * mu).norm();
        structure_residual = structure_residual.max(dev / xt.norm());
        crate::mep::unit(&x)
    });
    let residuals = [0, 1].map(|i| q.relative_residual(i, lambda, mu, &xs[i]));
    QmepPair {
        lambda,
        mu,
        xs,
        structure_residual,
        residuals,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    k: usize,
    dims: Vec<usize>,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

pub fn instance_to_json(inst: &MepInstance) -> String {
    let a = inst
        .coeffs()
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let file = InstanceFile {
        k: inst.k(),
        dims: inst.dims().to_vec(),
        a,
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

pub fn instance_from_json(text: &str) -> Result<MepInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let k = file.k;
    if k < 2 {
        return Err(Error::Parse(format!("field \"k\": need k >= 2, got {k}")));
    }
    if file.dims.len() != k {
        return Err(Error::Parse(format!("field \"dims\": expected {k} entries, got {}", file.dims.len())));
    }
    if file.a.len() != k {
        return Err(Error::Parse(format!("field \"A\": expected {k} blocks, got {}", file.a.len())));
    }
    let mut coeffs = Vec::with_capacity(k);
    for (i, block) in file.a.iter().enumerate() {
        let n = file.dims[i];
        if block.len() != k + 1 {
            return Err(Error::Parse(format!(
                "field \"A[{i}]\": expected {} matrices A_{}0..A_{}{k}, got {} (missing A_{}{})",
                k + 1,
                i + 1,
                i + 1,
                block.len(),
                i + 1,
                block.len()
            )));
        }
        let mut mats = Vec::with_capacity(k + 1);
        for (j, rows) in block.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Parse(format!(
                    "field \"A[{i}][{j}]\" (A_{}{j}): expected a {n}x{n} matrix",
                    i + 1
                )));
            }
            let m = CMat::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1]));
            mats.push(m);
        }
        coeffs.push(mats);
    }
    MepInstance::new(coeffs).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_instance(inst: &MepInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance_to_json(inst))?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<MepInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    instance_from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
