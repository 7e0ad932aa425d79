//! Dense complex linear algebra kernels: LU solves, SVD, null vectors, the
//! finite spectrum of a matrix pencil, and principal angles.

use nalgebra::{Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{rng, CMat, CVec, C64};

/// Pivots below this fraction of ‖A‖_F mark a matrix as singular to working precision.
pub const PIVOT_TOL: f64 = 1e-14;
/// Relative singular value threshold for numerical nullity.
pub const NULL_TOL: f64 = 1e-8;
/// Generalized eigenvalues beyond this modulus are treated as infinite.
pub const INFINITE_EIG: f64 = 1e8;
/// Acceptance bound on the relative residual of a returned pencil eigenpair.
pub const GEP_RESIDUAL_TOL: f64 = 1e-10;
/// B̂ is inverted directly when σ_min(B̂) > this · σ_max(B̂).
pub const GEP_DIRECT_TOL: f64 = 1e-8;

const SVD_MAX_ITERS: usize = 10_000;

pub struct LuFactorization {
    lu: LU<C64, Dyn, Dyn>,
    pub min_pivot: f64,
    pub singular_to_tol: bool,
    threshold: f64,
}

impl LuFactorization {
    pub fn new(a: &CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let threshold = PIVOT_TOL * a.norm();
        let lu = a.clone().lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        let singular_to_tol = !(min_pivot > threshold) || !min_pivot.is_finite();
        Ok(Self {
            lu,
            min_pivot,
            singular_to_tol,
            threshold,
        })
    }

    fn check(&self) -> Result<()> {
        if self.singular_to_tol {
            Err(Error::IllConditioned {
                pivot: self.min_pivot,
                threshold: self.threshold,
            })
        } else {
            Ok(())
        }
    }

    pub fn solve(&self, b: &CVec) -> Result<CVec> {
        self.check()?;
        self.lu
            .solve(b)
            .ok_or(Error::IllConditioned { pivot: 0.0, threshold: self.threshold })
    }

    pub fn solve_matrix(&self, b: &CMat) -> Result<CMat> {
        self.check()?;
        self.lu
            .solve(b)
            .ok_or(Error::IllConditioned { pivot: 0.0, threshold: self.threshold })
    }
}

/// Solve A x = b with partial pivoting. Fails when a pivot drops below
/// `PIVOT_TOL · ‖A‖_F`; callers decide what to do (the tracker rejects the step).
pub fn solve_square(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    LuFactorization::new(a)?.solve(b)
}

/// Full singular value decomposition `A = U diag(s) Vᴴ` with σ sorted
/// descending. `v` is always square (n × n) so that it carries a complete
/// basis of the domain, even for wide matrices.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

pub fn svd(a: &CMat) -> Result<Svd> {
    let (m, n) = a.shape();
    // pad wide matrices with zero rows so V comes back square
    let work = if m < n {
        let mut padded = CMat::zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let dec = jacobi_svd(&work)?;
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let r = order.len();
    let mut u = CMat::zeros(dec.u.nrows(), r);
    let mut v = CMat::zeros(dec.v.nrows(), r);
    let mut singular_values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &dec.u.column(src));
        v.set_column(dst, &dec.v.column(src));
        singular_values.push(dec.singular_values[src]);
    }
    if m < n {
        u = u.rows(0, m).into_owned();
    }
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Unsorted SVD of a tall or square matrix by one-sided (Hestenes) Jacobi
/// rotations: columns of A are rotated pairwise until mutually orthogonal,
/// the accumulated rotations form V, the column norms are the singular
/// values. nalgebra's complex bidiagonal SVD is not used because it can
/// return factors that do not reproduce rank-deficient inputs.
fn jacobi_svd(a: &CMat) -> Result<Svd> {
    const MAX_SWEEPS: usize = 80;
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = CMat::identity(n, n);
    let tol = (m as f64).sqrt() * f64::EPSILON;
    // columns this small are numerically zero; rotating them only stirs noise
    let negligible = f64::EPSILON * f64::EPSILON * a.norm_squared();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma: C64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || alpha.min(beta) <= negligible || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // phase so that the pair's inner product is real and positive
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (cc, sp) = (C64::new(c, 0.0), phase.conj() * s);
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = x * cc - y * sp;
                        mat[(r, q)] = x * s + y * phase.conj() * c;
                    }
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence("singular value decomposition"));
    }
    let singular_values: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut u = CMat::zeros(m, n);
    let mut missing = Vec::new();
    for j in 0..n {
        let s = singular_values[j];
        if s > 0.0 && s * s > negligible {
            u.set_column(j, &(w.column(j) / C64::new(s, 0.0)));
        } else {
            missing.push(j);
        }
    }
    // complete U for (numerically) zero singular values by Gram–Schmidt
    let mut candidate = 0;
    for j in missing {
        while candidate < m {
            let mut e = CVec::zeros(m);
            e[candidate] = C64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for c in 0..n {
                    if c != j {
                        let col = u.column(c).into_owned();
                        let proj = col.dotc(&e);
                        e -= col * proj;
                    }
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                u.set_column(j, &(e / C64::new(norm, 0.0)));
                break;
            }
        }
    }
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Operator 2-norm.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd(a).map(|d| d.sigma_max()).unwrap_or_else(|_| a.norm())
}

/// Right singular vector of the smallest singular value, with its σ.
pub fn smallest_singular_vector(a: &CMat) -> Result<(CVec, f64)> {
    let dec = svd(a)?;
    let last = dec.v.ncols() - 1;
    Ok((dec.v.column(last).into_owned(), dec.sigma_min()))
}

/// Unit vector minimizing ‖A v‖₂. Errors if A has no numerical null space,
/// i.e. σ_min ≥ `NULL_TOL · σ_max`.
pub fn null_vector(a: &CMat) -> Result<CVec> {
    let dec = svd(a)?;
    let smax = dec.sigma_max();
    let n = a.ncols();
    if smax == 0.0 {
        let mut e = CVec::zeros(n);
        e[0] = C64::new(1.0, 0.0);
        return Ok(e);
    }
    let smin = dec.sigma_min();
    let threshold = NULL_TOL * smax;
    if smin >= threshold {
        return Err(Error::NoNullVector {
            sigma_min: smin,
            threshold,
        });
    }
    Ok(dec.v.column(n - 1).into_owned())
}

/// Orthonormal basis (as columns) of the numerical kernel of `a`.
pub fn kernel_basis(a: &CMat, rel_tol: f64) -> Result<CMat> {
    let dec = svd(a)?;
    let rank = dec.rank(rel_tol);
    let n = a.ncols();
    Ok(dec.v.columns(rank, n - rank).into_owned())
}

/// Orthonormal basis of the column span of `a`.
pub fn orthonormal_columns(a: &CMat, rel_tol: f64) -> Result<CMat> {
    if a.ncols() == 0 {
        return Ok(a.clone());
    }
    let dec = svd(a)?;
    let rank = dec.rank(rel_tol);
    Ok(dec.u.columns(0, rank).into_owned())
}

/// Eigenvalues of a square complex matrix via the complex Schur form.
pub fn standard_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GepPair {
    pub beta: C64,
    /// Unit right eigenvector.
    pub x: CVec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GepSpectrum {
    pub pairs: Vec<GepPair>,
    /// Eigenvalues discarded as infinite (|β| > 1e8 or non-finite).
    pub infinite: usize,
}

/// All finite eigenpairs of the pencil Â − βB̂.
///
/// A well-conditioned B̂ is inverted directly. Otherwise the pencil is first
/// regularized by a Möbius change of variable β = (aμ + b)/(cμ + d) with
/// random unit-modulus coefficients, which sends the infinite eigenvalues to
/// the finite point μ = −d/c; mapping back then makes them show up as huge |β|.
pub fn gep_finite_eigs(a: &CMat, b: &CMat) -> Result<GepSpectrum> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "pencil with blocks {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.nrows();
    let b_svd = svd(b)?;
    let raw: Vec<C64> = if b_svd.sigma_max() > 0.0 && b_svd.sigma_min() > GEP_DIRECT_TOL * b_svd.sigma_max() {
        let m = LuFactorization::new(b)?.solve_matrix(a)?;
        standard_eigenvalues(&m)?
    } else {
        mobius_eigenvalues(a, b)?
    };

    let norm_a = op_norm(a);
    let norm_b = b_svd.sigma_max();
    let mut spectrum = GepSpectrum::default();
    for beta in raw {
        if !(beta.re.is_finite() && beta.im.is_finite()) || beta.norm() > INFINITE_EIG {
            spectrum.infinite += 1;
            continue;
        }
        let (beta, x) = refine_pencil_pair(a, b, beta)?;
        let scale = norm_a + beta.norm() * norm_b;
        let res = ((a - b * beta) * &x).norm();
        if !(res <= GEP_RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegeneratePencil(format!(
                "eigenvalue {beta} of a {n}x{n} pencil has relative residual {:e}",
                res / scale
            )));
        }
        spectrum.pairs.push(GepPair { beta, x });
    }
    spectrum
        .pairs
        .sort_by(|p, q| p.beta.re.total_cmp(&q.beta.re).then(p.beta.im.total_cmp(&q.beta.im)));
    Ok(spectrum)
}

fn mobius_eigenvalues(a: &CMat, b: &CMat) -> Result<Vec<C64>> {
    // fixed stream: the shift only regularizes, results must not depend on it
    let mut r = rng::stream(0x6d6f_6269_7573, rng::MOBIUS);
    for _ in 0..8 {
        let (ca, cb, cc, cd) = (
            rng::unit_phase(&mut r),
            rng::unit_phase(&mut r),
            rng::unit_phase(&mut r),
            rng::unit_phase(&mut r),
        );
        if (ca * cd - cb * cc).norm() < 0.5 {
            continue;
        }
        // Â v = β B̂ v  ⇔  (dÂ − bB̂) v = μ (aB̂ − cÂ) v
        let lhs = a * cd - b * cb;
        let rhs = b * ca - a * cc;
        let lu = LuFactorization::new(&rhs)?;
        if lu.singular_to_tol {
            continue;
        }
        let m = lu.solve_matrix(&lhs)?;
        let mus = standard_eigenvalues(&m)?;
        return Ok(mus
            .into_iter()
            .map(|mu| {
                let den = cc * mu + cd;
                if den.norm() == 0.0 {
                    C64::new(f64::INFINITY, 0.0)
                } else {
                    (ca * mu + cb) / den
                }
            })
            .collect());
    }
    Err(Error::DegeneratePencil(
        "pencil is singular for every tried shift (det(Â − βB̂) ≡ 0)".into(),
    ))
}

/// A few Newton steps on the bordered system (Â − βB̂)x = 0, cᴴx = 1.
fn refine_pencil_pair(a: &CMat, b: &CMat, beta0: C64) -> Result<(C64, CVec)> {
    let n = a.nrows();
    let (x0, _) = smallest_singular_vector(&(a - b * beta0))?;
    let c = x0.clone();
    let mut x = x0;
    let mut beta = beta0;
    let residual = |beta: C64, x: &CVec| ((a - b * beta) * x).norm() / x.norm();
    let mut best = (beta, x.clone(), residual(beta, &x));
    for _ in 0..3 {
        let mut jac = CMat::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&(a - b * beta));
        jac.view_mut((0, n), (n, 1)).copy_from(&(-(b * &x)));
        jac.view_mut((n, 0), (1, n)).copy_from(&c.adjoint());
        let mut f = CVec::zeros(n + 1);
        f.rows_mut(0, n).copy_from(&((a - b * beta) * &x));
        f[n] = c.dotc(&x) - C64::new(1.0, 0.0);
        let Ok(step) = solve_square(&jac, &(-f)) else { break };
        x += step.rows(0, n);
        beta += step[n];
        let r = residual(beta, &x);
        if r < best.2 {
            best = (beta, x.clone(), r);
        }
        if step.norm() <= 1e-15 * (1.0 + x.norm() + beta.norm()) {
            break;
        }
    }
    let (beta, x, _) = best;
    Ok((beta, crate::mep::unit(&x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAngle {
    pub angle: f64,
    pub sine: f64,
    /// One of the subspaces was empty; the angle is π/2 by convention.
    pub empty: bool,
}

/// Smallest principal angle between the column spans of `u` and `v`.
///
/// Inputs are orthonormalized internally. The sine is computed from the
/// residual of projecting the best-aligned vector of span(v) onto span(u),
/// which keeps it accurate for nearly coincident subspaces.
pub fn smallest_principal_angle(u: &CMat, v: &CMat) -> Result<PrincipalAngle> {
    if u.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of C^{} and C^{}",
            u.nrows(),
            v.nrows()
        )));
    }
    let qu = orthonormal_columns(u, 1e-12)?;
    let qv = orthonormal_columns(v, 1e-12)?;
    if qu.ncols() == 0 || qv.ncols() == 0 {
        return Ok(PrincipalAngle {
            angle: std::f64::consts::FRAC_PI_2,
            sine: 1.0,
            empty: true,
        });
    }
    let cross = qu.adjoint() * &qv;
    let dec = svd(&cross)?;
    let cos = dec.sigma_max().min(1.0);
    let w = dec.v.column(0).into_owned();
    let vw = &qv * w;
    let resid = &vw - &qu * (qu.adjoint() * &vw);
    let sine = resid.norm().min(1.0);
    Ok(PrincipalAngle {
        angle: sine.atan2(cos),
        sine,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::integer_example;
    use nalgebra::{dmatrix, dvector};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(seed: u64, m: usize, n: usize) -> CMat {
        rng::gaussian_matrix(&mut rng::stream(seed, 42), m, n)
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = dvector![c(1.0, 2.0), c(-3.0, 0.5)];
        let x = solve_square(&CMat::identity(2, 2), &b).unwrap();
        assert_eq!(x, b);
        let d = dmatrix![c(2.0, 0.0), c(0.0, 0.0); c(0.0, 0.0), c(4.0, 0.0)];
        let x = solve_square(&d, &dvector![c(2.0, 0.0), c(8.0, 0.0)]).unwrap();
        assert!((x - dvector![c(1.0, 0.0), c(2.0, 0.0)]).norm() < 1e-15);
    }

    #[test]
    fn solve_random_residual_bound() {
        let n = 20;
        let a = random(1, n, n);
        let b = rng::gaussian_vector(&mut rng::stream(2, 0), n);
        let x = solve_square(&a, &b).unwrap();
        let res = (&a * &x - &b).norm();
        assert!(res <= 10.0 * n as f64 * f64::EPSILON * op_norm(&a) * x.norm(), "{res:e}");
    }

    #[test]
    fn singular_system_is_flagged() {
        let a = dmatrix![c(1.0, 0.0), c(2.0, 0.0); c(2.0, 0.0), c(4.0, 0.0)];
        assert!(matches!(
            solve_square(&a, &dvector![c(1.0, 0.0), c(0.0, 0.0)]),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn svd_of_diagonal_and_unitary() {
        let d = dmatrix![c(-3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0);
                         c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0);
                         c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)];
        let s = svd(&d).unwrap().singular_values;
        for (got, want) in s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let q = svd(&random(3, 5, 5)).unwrap().u;
        for s in svd(&q).unwrap().singular_values {
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for (m, n) in [(10, 6), (6, 10)] {
            let a = random(4, m, n);
            let dec = svd(&a).unwrap();
            assert_eq!(dec.v.shape(), (n, n));
            let k = dec.singular_values.len();
            let s = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                k,
                dec.singular_values.iter().map(|&x| c(x, 0.0)),
            ));
            let rec = &dec.u * s * dec.v.columns(0, k).adjoint();
            assert!((rec - &a).norm() <= 1e-13 * a.norm());
            assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn null_vector_cases() {
        let a = dmatrix![c(1.0, 0.0), c(0.0, 0.0); c(0.0, 0.0), c(0.0, 0.0)];
        let v = null_vector(&a).unwrap();
        assert!(v[0].norm() < 1e-15 && (v[1].norm() - 1.0).abs() < 1e-15);

        let u = rng::gaussian_vector(&mut rng::stream(5, 0), 3);
        let w = rng::gaussian_vector(&mut rng::stream(6, 0), 3);
        let rank1 = &u * w.adjoint();
        let v = null_vector(&rank1).unwrap();
        assert!((&rank1 * &v).norm() < 1e-12);
        assert!(w.dotc(&v).norm() < 1e-12);

        assert!(matches!(null_vector(&CMat::identity(3, 3)), Err(Error::NoNullVector { .. })));
    }

    #[test]
    fn principal_angles() {
        let e1 = dmatrix![c(1.0, 0.0); c(0.0, 0.0)];
        let e2 = dmatrix![c(0.0, 0.0); c(1.0, 0.0)];
        let a = smallest_principal_angle(&e1, &e2).unwrap();
        assert!((a.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(smallest_principal_angle(&e1, &e1).unwrap().angle.abs() < 1e-15);
        let theta: f64 = 0.3;
        let rot = dmatrix![c(theta.cos(), 0.0); c(theta.sin(), 0.0)];
        let a = smallest_principal_angle(&e1, &rot).unwrap();
        assert!((a.angle - theta).abs() < 1e-12);
        let empty = CMat::zeros(2, 0);
        assert!(smallest_principal_angle(&empty, &e1).unwrap().empty);
    }

    #[test]
    fn principal_angle_symmetric_and_basis_invariant() {
        let u = random(7, 6, 2);
        let v = random(8, 6, 3);
        let a = smallest_principal_angle(&u, &v).unwrap().angle;
        let b = smallest_principal_angle(&v, &u).unwrap().angle;
        assert!((a - b).abs() < 1e-12);
        let mix = random(9, 3, 3);
        let c = smallest_principal_angle(&u, &(&v * mix)).unwrap().angle;
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn gep_diagonal() {
        let a = dmatrix![c(1.0, 0.0), c(0.0, 0.0); c(0.0, 0.0), c(2.0, 0.0)];
        let s = gep_finite_eigs(&a, &CMat::identity(2, 2)).unwrap();
        assert_eq!(s.infinite, 0);
        let betas: Vec<C64> = s.pairs.iter().map(|p| p.beta).collect();
        assert!((betas[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((betas[1] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gep_residual_bound_on_random_pencils() {
        for seed in 0..10 {
            let a = random(seed, 6, 6);
            let b = random(seed + 100, 6, 6);
            let s = gep_finite_eigs(&a, &b).unwrap();
            assert_eq!(s.pairs.len(), 6);
            for p in &s.pairs {
                let res = ((&a - &b * p.beta) * &p.x).norm();
                assert!(res <= 1e-10 * (op_norm(&a) + p.beta.norm() * op_norm(&b)));
                assert!((p.x.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gep_rank_deficient_b() {
        // det(Â − βB̂) has degree rank(B̂) = 2 for generic Â
        let a = random(11, 4, 4);
        let b = random(12, 4, 2) * random(13, 2, 4);
        let s = gep_finite_eigs(&a, &b).unwrap();
        assert_eq!(s.pairs.len(), 2);
        assert_eq!(s.infinite, 2);
    }

    #[test]
    fn gep_identically_singular_pencil() {
        let a = random(14, 3, 1) * random(15, 1, 3);
        let b = random(14, 3, 1) * random(16, 1, 3);
        assert!(gep_finite_eigs(&a, &b).is_err());
    }

    #[test]
    fn svd_of_rank_one_complex_matrices() {
        // a rank-one matrix on which an unchecked complex SVD returns factors
        // that do not reproduce it
        let e = [
            (0.1972579066075246, 8.055295623867283e-16),
            (0.22319189884202834, 0.5011782947182001),
            (0.19407349980163718, 0.20367600586020845),
            (0.09484582103697208, -0.18124412683503785),
            (0.5678071071300416, 0.03590449755847237),
            (0.28045588245878744, -0.08038645590807655),
            (0.05543636255978662, 0.09499849281838561),
            (-0.17864042163346866, 0.24833679163911154),
            (-0.043547986640807446, 0.15070496992492455),
        ];
        let hard = CMat::from_column_slice(3, 3, &e.map(|(re, im)| C64::new(re, im)));
        let mut r = crate::rng::stream(21, 0);
        let mut cases = vec![hard];
        for n in 2..6 {
            let x = crate::rng::gaussian_vector(&mut r, n);
            let y = crate::rng::gaussian_vector(&mut r, n);
            cases.push(&x * y.transpose());
        }
        for m in cases {
            let d = svd(&m).unwrap();
            let s = CMat::from_diagonal(&CVec::from_iterator(
                d.singular_values.len(),
                d.singular_values.iter().map(|&v| C64::new(v, 0.0)),
            ));
            assert!((&d.u * s * d.v.adjoint() - &m).norm() < 1e-12 * m.norm());
            assert!((d.sigma_max() - m.norm()).abs() < 1e-12 * m.norm());
            assert_eq!(d.rank(1e-10), 1);
        }
    }

    #[test]
    fn example_pencils_from_injected_slices() {
        let (slices, expected) = crate::startsys::tests::example_slices();
        let inst = integer_example();
        let mut found = Vec::new();
        let mut infinite = 0;
        for i in 0..2 {
            let (ah, bh) = crate::startsys::associated_pencil(&inst, i, &slices.q[i], &slices.p[i]);
            let s = gep_finite_eigs(&ah, &bh).unwrap();
            infinite += s.infinite;
            found.extend(s.pairs.iter().map(|p| p.beta));
        }
        assert_eq!(found.len(), 3);
        assert_eq!(infinite, 1);
        for want in expected {
            let best = found.iter().map(|b| (b - want).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 5e-3, "{want}: {best}");
        }
    }
}
