//! Fiber product homotopy solver for multiparameter eigenvalue problems.
//!
//! Given k linear matrix polynomials H_i(λ) = A_i0 − Σ_j λ_j A_ij, the solver
//! finds every λ ∈ C^k (with eigenvectors x_i) such that all H_i(λ) x_i = 0.
//! Each H_i is given its own copy λ_i of the eigenvalue; the copies start on
//! random affine slices, where the problem reduces to k independent pencils,
//! and are then continued to the diagonal λ_1 = … = λ_k.
//!
//! ```no_run
//! use fibermep::{problems, solver::{solve, SolveConfig}};
//!
//! let inst = problems::random_mep(2, &[3, 3], 7).unwrap();
//! let report = solve(&inst, &SolveConfig::default()).unwrap();
//! assert_eq!(report.eigenpairs.len(), 9);
//! ```

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};
use num_complex::Complex64;

pub mod bench;
pub mod densela;
pub mod diagcoeff;
pub mod diagnostics;
pub mod error;
pub mod matching;
pub mod mep;
pub mod oracle;
pub mod pool;
pub mod problems;
pub mod report;
pub mod rng;
pub mod solver;
pub mod startsys;
pub mod targetsys;
pub mod tracker;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// ‖·‖_∞ by entry modulus; nalgebra's `amax` needs an ordered scalar.
pub trait MaxModulus {
    fn max_modulus(&self) -> f64;
}

impl<R: Dim, C: Dim, S: RawStorage<C64, R, C>> MaxModulus for Matrix<C64, R, C, S> {
    fn max_modulus(&self) -> f64 {
        self.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub use error::{Error, Result};
pub use mep::{Eigenpair, FiberPoint, MepInstance};
pub use solver::{solve, SolveConfig, SolveReport};
pub use tracker::{PathResult, PathStatus, TrackerConfig};
