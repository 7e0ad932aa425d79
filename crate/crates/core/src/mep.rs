//! Problem and solution data model.
//!
//! A k-parameter eigenvalue problem is given by k linear matrix polynomials
//!
//! ```text
//! H_i(λ) = A_i0 − λ_1 A_i1 − … − λ_k A_ik,   A_ij ∈ C^{n_i × n_i}
//! ```
//!
//! and asks for λ ∈ C^k together with nonzero x_i satisfying H_i(λ) x_i = 0 for
//! every i. Block indices are zero-based in code: `coeff(i, 0)` is the constant
//! term of block i and `coeff(i, j)` for `j >= 1` multiplies λ_j.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct MepInstance {
    k: usize,
    dims: Vec<usize>,
    coeffs: Vec<Vec<CMat>>,
}

impl MepInstance {
    /// `coeffs[i][j]` is `A_ij`; the outer length fixes k and each inner list
    /// must hold k + 1 square matrices of a common size.
    pub fn new(coeffs: Vec<Vec<CMat>>) -> Result<Self> {
        let k = coeffs.len();
        if k < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least two parameters, got k = {k}"
            )));
        }
        let mut dims = Vec::with_capacity(k);
        for (i, block) in coeffs.iter().enumerate() {
            if block.len() != k + 1 {
                return Err(Error::InvalidInstance(format!(
                    "block {} has {} coefficient matrices, expected {}",
                    i + 1,
                    block.len(),
                    k + 1
                )));
            }
            let n = block[0].nrows();
            if n == 0 {
                return Err(Error::InvalidInstance(format!("block {} is empty", i + 1)));
            }
            for (j, a) in block.iter().enumerate() {
                if a.nrows() != n || a.ncols() != n {
                    return Err(Error::InvalidInstance(format!(
                        "A_{}{} is {}x{}, expected {n}x{n}",
                        i + 1,
                        j,
                        a.nrows(),
                        a.ncols()
                    )));
                }
                if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidInstance(format!(
                        "A_{}{} has non-finite entries",
                        i + 1,
                        j
                    )));
                }
            }
            dims.push(n);
        }
        Ok(Self { k, dims, coeffs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn coeff(&self, i: usize, j: usize) -> &CMat {
        &self.coeffs[i][j]
    }

    pub fn coeffs(&self) -> &[Vec<CMat>] {
        &self.coeffs
    }

    /// Number of unknowns of the fiber product formulation: k² eigenvalue
    /// copies plus all eigenvector entries.
    pub fn fiber_dim(&self) -> usize {
        self.k * self.k + self.dims.iter().sum::<usize>()
    }

    /// H_i(λ) = A_i0 − Σ_j λ_j A_ij.
    pub fn operator(&self, i: usize, lambda: &[C64]) -> Result<CMat> {
        if lambda.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "eigenvalue has {} coordinates, expected {}",
                lambda.len(),
                self.k
            )));
        }
        let mut h = self.coeffs[i][0].clone();
        for (j, &l) in lambda.iter().enumerate() {
            h -= &self.coeffs[i][j + 1] * l;
        }
        Ok(h)
    }

    /// H_i(λ) x.
    pub fn residual(&self, i: usize, lambda: &[C64], x: &CVec) -> Result<CVec> {
        if x.len() != self.dims[i] {
            return Err(Error::DimensionMismatch(format!(
                "eigenvector of block {} has length {}, expected {}",
                i + 1,
                x.len(),
                self.dims[i]
            )));
        }
        Ok(self.operator(i, lambda)? * x)
    }

    /// B_i(x) = −[A_i1 x, …, A_ik x], the λ-Jacobian of H_i(λ) x.
    pub fn lambda_jacobian(&self, i: usize, x: &CVec) -> CMat {
        let n = self.dims[i];
        let mut b = CMat::zeros(n, self.k);
        for j in 0..self.k {
            let col = -(&self.coeffs[i][j + 1] * x);
            b.set_column(j, &col);
        }
        b
    }

    /// True when every cross-coupling A_ij (i ≠ j, j ≥ 1) is exactly zero, in
    /// which case the problem splits into k independent pencils.
    pub fn is_decoupled(&self) -> bool {
        (0..self.k).all(|i| {
            (0..self.k)
                .filter(|&j| j != i)
                .all(|j| self.coeffs[i][j + 1].iter().all(|z| *z == C64::new(0.0, 0.0)))
        })
    }
}

/// A point of the fiber product formulation: k copies of the eigenvalue, one
/// eigenvector per block, and the path parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub lambdas: Vec<CVec>,
    pub xs: Vec<CVec>,
    pub t: f64,
}

impl FiberPoint {
    /// Flattened layout used by the tracker: vec(λ_1, …, λ_k) followed by x_1, …, x_k.
    pub fn to_vector(&self) -> CVec {
        let len: usize =
            self.lambdas.iter().map(|l| l.len()).sum::<usize>() + self.xs.iter().map(|x| x.len()).sum::<usize>();
        DVector::from_iterator(
            len,
            self.lambdas
                .iter()
                .chain(self.xs.iter())
                .flat_map(|v| v.iter().copied()),
        )
    }

    pub fn from_vector(z: &CVec, k: usize, dims: &[usize], t: f64) -> Self {
        let mut offset = 0;
        let mut take = |len: usize| {
            let v = z.rows(offset, len).into_owned();
            offset += len;
            v
        };
        let lambdas = (0..k).map(|_| take(k)).collect();
        let xs = dims.iter().map(|&n| take(n)).collect();
        Self { lambdas, xs, t }
    }

    /// max over i ≥ 2 of ‖λ_1 − λ_i‖_1.
    pub fn deviation(&self) -> f64 {
        let first = &self.lambdas[0];
        self.lambdas[1..]
            .iter()
            .map(|l| (first - l).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// A collapsed solution with unit-norm eigenvectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenpair {
    pub lambda: CVec,
    pub xs: Vec<CVec>,
    /// Number of tracked endpoints merged into this eigenpair.
    pub multiplicity: usize,
    /// Copy disagreement above the inconsistency threshold.
    pub inconsistent: bool,
    /// Multi-index of the (first) start point that produced this pair.
    pub start_index: Vec<usize>,
    pub diagnostics: DiagnosticsRecord,
}

impl Eigenpair {
    pub fn lambda_norm(&self) -> f64 {
        self.lambda.norm()
    }
}

pub(crate) fn unit(v: &CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        v.clone()
    }
}
