//! Independent reference solver for two-parameter problems via operator
//! determinants (the Delta method).
//!
//! Writing block i as V_i0 + λV_i1 + μV_i2 with V_i0 = A_i0, V_ij = −A_ij,
//! the operator determinants on C^{n_1} ⊗ C^{n_2} are
//!
//! ```text
//! Δ0 = V11⊗V22 − V12⊗V21 =   A11⊗A22 − A12⊗A21
//! Δ1 = V12⊗V20 − V10⊗V22 =   A10⊗A22 − A12⊗A20
//! Δ2 = V10⊗V21 − V11⊗V20 =   A11⊗A20 − A10⊗A21
//! ```
//!
//! and every eigenpair gives Δ1 z = λΔ0 z, Δ2 z = μΔ0 z with z = x_1 ⊗ x_2.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::densela::{self, gep_finite_eigs, LuFactorization};
use crate::diagnostics::{backward_error, CoeffNorms};
use crate::error::{Error, Result};
use crate::mep::MepInstance;
use crate::{rng, CMat, CVec};

/// Δ0 counts as singular below this relative smallest singular value.
const SINGULAR_TOL: f64 = 1e-10;
/// An eigenvector of the Δ pencil must be numerically decomposable.
const RANK_ONE_TOL: f64 = 1e-6;

pub struct DeltaMatrices {
    pub d0: CMat,
    pub d1: CMat,
    pub d2: CMat,
}

impl DeltaMatrices {
    pub fn new(inst: &MepInstance) -> Result<Self> {
        if inst.k() != 2 {
            return Err(Error::OracleDeclined(format!("needs k = 2, got k = {}", inst.k())));
        }
        let a = |i: usize, j: usize| inst.coeff(i, j);
        Ok(Self {
            d0: a(0, 1).kronecker(a(1, 2)) - a(0, 2).kronecker(a(1, 1)),
            d1: a(0, 0).kronecker(a(1, 2)) - a(0, 2).kronecker(a(1, 0)),
            d2: a(0, 1).kronecker(a(1, 0)) - a(0, 0).kronecker(a(1, 1)),
        })
    }

    /// ‖[Δ0⁻¹Δ1, Δ0⁻¹Δ2]‖_F relative to the product of the operands' norms.
    pub fn commutator_defect(&self) -> Result<f64> {
        let lu = LuFactorization::new(&self.d0)?;
        let g1 = lu.solve_matrix(&self.d1)?;
        let g2 = lu.solve_matrix(&self.d2)?;
        let comm = &g1 * &g2 - &g2 * &g1;
        Ok(comm.norm() / (g1.norm() * g2.norm()).max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OraclePair {
    pub lambda: CVec,
    pub xs: Vec<CVec>,
}

fn solve_unchecked(inst: &MepInstance) -> Result<Vec<OraclePair>> {
    let delta = DeltaMatrices::new(inst)?;
    let dec = densela::svd(&delta.d0)?;
    if !(dec.sigma_min() > SINGULAR_TOL * dec.sigma_max()) {
        return Err(Error::OracleDeclined(format!(
            "Δ0 is singular (σ_min/σ_max = {:e}); the problem is not regular",
            dec.sigma_min() / dec.sigma_max()
        )));
    }
    // a random combination separates eigenvalues that share one coordinate
    let mut r = rng::stream(0x0de17a, rng::ORACLE);
    let (c1, c2) = (rng::unit_phase(&mut r), rng::unit_phase(&mut r));
    let combined = &delta.d1 * c1 + &delta.d2 * c2;
    let spectrum = gep_finite_eigs(&combined, &delta.d0)?;
    let (n1, n2) = (inst.dim(0), inst.dim(1));
    let mut pairs = Vec::with_capacity(spectrum.pairs.len());
    for p in spectrum.pairs {
        let z = &p.x;
        let d0z = &delta.d0 * z;
        let denom = d0z.norm_squared();
        let lambda = CVec::from_vec(vec![d0z.dotc(&(&delta.d1 * z)) / denom, d0z.dotc(&(&delta.d2 * z)) / denom]);
        // z = x1 ⊗ x2 reshaped row-major into n1 × n2 is x1 x2ᵀ
        let zmat = CMat::from_fn(n1, n2, |a, b| z[a * n2 + b]);
        let f = densela::svd(&zmat)?;
        let ratio = f.singular_values.get(1).copied().unwrap_or(0.0) / f.sigma_max();
        if !(ratio < RANK_ONE_TOL) {
            return Err(Error::OracleDeclined(format!(
                "eigenvector for {} is not decomposable (σ2/σ1 = {ratio:e})",
                p.beta
            )));
        }
        let x1 = f.u.column(0).into_owned();
        let x2 = f.v.column(0).map(|v| v.conj());
        pairs.push(OraclePair { lambda, xs: vec![x1, x2] });
    }
    Ok(pairs)
}

/// Startup gate: the construction must pass its own consistency checks on a
/// fixed random problem before any result is trusted.
fn self_test() -> std::result::Result<(), String> {
    static GATE: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    GATE.get_or_init(|| {
        let inst = crate::problems::random_mep(2, &[3, 3], 0x5e1f).map_err(|e| e.to_string())?;
        let defect = DeltaMatrices::new(&inst)
            .and_then(|d| d.commutator_defect())
            .map_err(|e| e.to_string())?;
        if !(defect < 1e-8) {
            return Err(format!("Δ0⁻¹Δ1 and Δ0⁻¹Δ2 fail to commute (defect {defect:e})"));
        }
        let pairs = solve_unchecked(&inst).map_err(|e| e.to_string())?;
        if pairs.len() != 9 {
            return Err(format!("expected 9 eigenpairs, found {}", pairs.len()));
        }
        let norms = CoeffNorms::new(&inst);
        for p in &pairs {
            let eta = backward_error(&inst, &norms, p.lambda.as_slice(), &p.xs);
            if !(eta < 1e-8) {
                return Err(format!("oracle eigenpair has backward error {eta:e}"));
            }
        }
        Ok(())
    })
    .clone()
}

/// All eigenpairs of a regular two-parameter problem. Declines on k ≠ 2,
/// singular Δ0, or non-decomposable eigenvectors.
pub fn delta_solve(inst: &MepInstance) -> Result<Vec<OraclePair>> {
    self_test().map_err(|e| Error::OracleDeclined(format!("self-test failed: {e}")))?;
    solve_unchecked(inst)
}

/// Eigenvalues only, as a convenience for set comparisons.
pub fn delta_eigenvalues(inst: &MepInstance) -> Result<Vec<CVec>> {
    Ok(delta_solve(inst)?.into_iter().map(|p| p.lambda).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{integer_example, random_mep};
    use crate::C64;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn self_test_passes() {
        assert_eq!(self_test(), Ok(()));
    }

    #[test]
    fn decoupled_gives_cartesian_pairs() {
        let d = |v: [f64; 2]| CMat::from_diagonal(&CVec::from_vec(v.map(c).to_vec()));
        let z = CMat::zeros(2, 2);
        let id = CMat::identity(2, 2);
        // block 1: λ ∈ {1, 2}; block 2: μ ∈ {3, −1}
        let inst = MepInstance::new(vec![
            vec![d([1.0, 2.0]), id.clone(), z.clone()],
            vec![d([3.0, -1.0]), z, id],
        ])
        .unwrap();
        let pairs = delta_solve(&inst).unwrap();
        assert_eq!(pairs.len(), 4);
        for (l, m) in [(1.0, 3.0), (1.0, -1.0), (2.0, 3.0), (2.0, -1.0)] {
            let want = CVec::from_vec(vec![c(l), c(m)]);
            assert!(pairs.iter().any(|p| (&p.lambda - &want).norm() < 1e-12));
        }
    }

    #[test]
    fn example_is_declined_as_singular() {
        // the second block's λ and μ coefficients are both multiples of the
        // all-ones matrix, so Δ0 has rank n_1
        assert!(matches!(delta_solve(&integer_example()), Err(Error::OracleDeclined(_))));
        assert!(matches!(delta_solve(&random_mep(3, &[2, 2, 2], 0).unwrap()), Err(Error::OracleDeclined(_))));
    }

    #[test]
    fn eigenpairs_satisfy_the_delta_relations() {
        let inst = random_mep(2, &[3, 4], 5).unwrap();
        let d = DeltaMatrices::new(&inst).unwrap();
        assert!(d.commutator_defect().unwrap() < 1e-8);
        let norms = CoeffNorms::new(&inst);
        let pairs = delta_solve(&inst).unwrap();
        assert_eq!(pairs.len(), 12);
        for p in &pairs {
            let z = p.xs[0].kronecker(&p.xs[1]);
            let d0z = &d.d0 * &z;
            assert!((&d.d1 * &z - &d0z * p.lambda[0]).norm() < 1e-8 * d.d1.norm());
            assert!((&d.d2 * &z - &d0z * p.lambda[1]).norm() < 1e-8 * d.d2.norm());
            assert!(backward_error(&inst, &norms, p.lambda.as_slice(), &p.xs) < 1e-10);
        }
    }
}
