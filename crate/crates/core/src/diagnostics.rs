//! Accuracy and conditioning measures: normwise backward error, Smale's α
//! certificate, the intersection condition number κ_fp (also along the
//! homotopy), and the θ-weighted standard condition number.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densela::{self, kernel_basis, null_vector, op_norm, smallest_principal_angle, LuFactorization};
use crate::MaxModulus;
use crate::mep::{unit, FiberPoint, MepInstance};
use crate::report::{ext_f64, ext_f64_opt};
use crate::startsys::SliceSet;
use crate::targetsys::{build_dk, constraint_linear_part, TargetConstraints};
use crate::tracker::{track_segment, Homotopy, TrackState, TrackerConfig};
use crate::{rng, CMat, CVec, C64};

/// (13 − 3√17)/4: α below this certifies quadratic Newton convergence.
pub const ALPHA_THRESHOLD: f64 = 0.157_670_780_786_754_59;

/// Operator 2-norms ‖A_ij‖ of all coefficients, computed once per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffNorms(pub Vec<Vec<f64>>);

impl CoeffNorms {
    pub fn new(inst: &MepInstance) -> Self {
        Self(inst.coeffs().iter().map(|b| b.iter().map(op_norm).collect()).collect())
    }

    /// θ_i = ‖A_i0‖ + Σ_j |λ_j| ‖A_ij‖.
    pub fn theta(&self, lambda: &[C64]) -> Vec<f64> {
        self.0
            .iter()
            .map(|b| b[0] + lambda.iter().zip(&b[1..]).map(|(l, n)| l.norm() * n).sum::<f64>())
            .collect()
    }
}

/// η = max_i ‖H_i(λ) x_i‖ / θ_i with unit x_i.
pub fn backward_error(inst: &MepInstance, norms: &CoeffNorms, lambda: &[C64], xs: &[CVec]) -> f64 {
    let theta = norms.theta(lambda);
    (0..inst.k())
        .map(|i| {
            let r = inst.residual(i, lambda, &unit(&xs[i])).expect("eigenpair shape").norm();
            if theta[i] > 0.0 {
                r / theta[i]
            } else {
                r
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    #[serde(with = "ext_f64")]
    pub alpha: f64,
    #[serde(with = "ext_f64")]
    pub beta: f64,
    #[serde(with = "ext_f64")]
    pub gamma: f64,
    pub certified: bool,
}

impl AlphaResult {
    fn uncertified() -> Self {
        Self {
            alpha: f64::INFINITY,
            beta: f64::INFINITY,
            gamma: f64::INFINITY,
            certified: false,
        }
    }
}

/// Frobenius norm of the (constant) second derivative of the t = 1 fiber
/// system: each bilinear entry −(A_ij)_{rl} appears twice by symmetry.
pub fn fiber_second_derivative_norm(inst: &MepInstance) -> f64 {
    let sum: f64 = inst
        .coeffs()
        .iter()
        .flat_map(|b| b[1..].iter())
        .map(|a| a.norm_squared())
        .sum();
    (2.0 * sum).sqrt()
}

/// α = β·γ for a quadratic system with Jacobian J at z: β = ‖J⁻¹F‖₂ and
/// γ ≤ ½‖J⁻¹‖₂‖D²F‖ (higher derivatives vanish).
pub fn alpha_number<H: Homotopy + ?Sized>(hom: &H, z: &CVec, t: f64, second_derivative_norm: f64) -> AlphaResult {
    let jac = hom.jacobian(z, t);
    let Ok(lu) = LuFactorization::new(&jac) else {
        return AlphaResult::uncertified();
    };
    let Ok(step) = lu.solve(&hom.residual(z, t)) else {
        return AlphaResult::uncertified();
    };
    let Ok(dec) = densela::svd(&jac) else {
        return AlphaResult::uncertified();
    };
    let smin = dec.sigma_min();
    if !(smin > 0.0) {
        return AlphaResult::uncertified();
    }
    let beta = step.norm();
    let gamma = 0.5 * second_derivative_norm / smin;
    let alpha = beta * gamma;
    AlphaResult {
        alpha,
        beta,
        gamma,
        certified: alpha < ALPHA_THRESHOLD,
    }
}

/// κ from eigenvectors: the tangent space of the product of eigenvalue
/// hypersurfaces at Λ is ker J with row i of J equal to y_iᵀ B_i(x_i) in the
/// λ_i columns; κ = 1/sin of its smallest angle with ker(constraint).
pub fn kappa_from_vectors(
    inst: &MepInstance,
    xs: &[CVec],
    ys: &[CVec],
    constraint: &CMat,
) -> f64 {
    let k = inst.k();
    let mut jac = CMat::zeros(k, k * k);
    for i in 0..k {
        let row = ys[i].transpose() * inst.lambda_jacobian(i, &xs[i]);
        let scale = ys[i].norm() * xs[i].norm() * inst.coeffs()[i][1..].iter().map(|a| a.norm()).sum::<f64>();
        if !(row.norm() > 1e-14 * scale) {
            return f64::INFINITY;
        }
        jac.view_mut((i, i * k), (1, k)).copy_from(&row);
    }
    let (Ok(tangent), Ok(linear)) = (kernel_basis(&jac, 1e-12), kernel_basis(constraint, 1e-10)) else {
        return f64::INFINITY;
    };
    if tangent.ncols() != k * k - k || linear.ncols() != k {
        return f64::INFINITY;
    }
    match smallest_principal_angle(&tangent, &linear) {
        Ok(a) if a.sine >= 1e-14 && !a.empty => 1.0 / a.sine,
        _ => f64::INFINITY,
    }
}

/// Right null vectors x_i of H_i(λ_i) and left ones y_i with H_i(λ_i)ᵀ y_i = 0.
fn null_vectors(inst: &MepInstance, lambdas: &[CVec]) -> Option<(Vec<CVec>, Vec<CVec>)> {
    let mut xs = Vec::with_capacity(inst.k());
    let mut ys = Vec::with_capacity(inst.k());
    for (i, l) in lambdas.iter().enumerate() {
        let h = inst.operator(i, l.as_slice()).ok()?;
        xs.push(null_vector(&h).ok()?);
        ys.push(null_vector(&h.transpose()).ok()?);
    }
    Some((xs, ys))
}

/// κ at fiber copies `lambdas` against the constraint space ker(`constraint`).
pub fn kappa_at(inst: &MepInstance, lambdas: &[CVec], constraint: &CMat) -> f64 {
    match null_vectors(inst, lambdas) {
        Some((xs, ys)) => kappa_from_vectors(inst, &xs, &ys, constraint),
        None => f64::INFINITY,
    }
}

/// Intersection condition number at an eigenvalue: the constraint space is
/// the diagonal λ_1 = … = λ_k.
pub fn kappa_fp(inst: &MepInstance, lambda: &CVec) -> f64 {
    kappa_at(inst, &vec![lambda.clone(); inst.k()], &build_dk(inst.k()))
}

/// κ at an on-path point for the time-t constraint space.
pub fn kappa_along_path(
    inst: &MepInstance,
    slices: &SliceSet,
    target: &TargetConstraints,
    point: &FiberPoint,
    t: f64,
) -> f64 {
    kappa_at(inst, &point.lambdas, &constraint_linear_part(slices, target, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaSample {
    pub t: f64,
    #[serde(with = "ext_f64")]
    pub kappa: f64,
}

/// Track a path from `start` and evaluate κ exactly at each sampled t
/// (ascending, within [0, 1]). Samples past a tracking failure are +∞.
pub fn kappa_trace<H: Homotopy + ?Sized>(
    inst: &MepInstance,
    slices: &SliceSet,
    target: &TargetConstraints,
    hom: &H,
    start: &CVec,
    ts: &[f64],
    cfg: &TrackerConfig,
) -> Vec<KappaSample> {
    let endgame = cfg.endgame_iters(inst.k(), inst.dims());
    let mut state = TrackState::new(start.clone(), 0.0, cfg, false);
    let mut failed = false;
    ts.iter()
        .map(|&t| {
            if !failed && t > state.t {
                let iters = if t >= 1.0 { endgame } else { cfg.max_newton_per_step.max(endgame) };
                failed = track_segment(hom, &mut state, t, cfg, iters).is_some();
            }
            let kappa = if failed {
                f64::INFINITY
            } else {
                kappa_along_path(inst, slices, target, &hom.fiber_point(&state.z, t), t)
            };
            KappaSample { t, kappa }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaStd {
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub estimate: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

impl KappaStd {
    fn infinite() -> Self {
        Self {
            lower: f64::INFINITY,
            estimate: f64::INFINITY,
            upper: f64::INFINITY,
        }
    }
}

pub const TORUS_SAMPLES: usize = 10_000;

/// ‖M⁻¹‖_θ = max{‖M⁻¹z‖₂ : |z_i| = θ_i}. With C = M⁻¹diag(θ) this lies in
/// [‖C‖₂, √k‖C‖₂]; the estimate is the best of random torus points and a
/// phase-alignment ascent started from C's top singular vector.
pub fn kappa_std_from_matrix(m: &CMat, theta: &[f64], samples: usize, seed: u64) -> KappaStd {
    let k = m.nrows();
    let Ok(lu) = LuFactorization::new(m) else {
        return KappaStd::infinite();
    };
    let diag = CMat::from_diagonal(&CVec::from_iterator(k, theta.iter().map(|&t| C64::new(t, 0.0))));
    let Ok(c) = lu.solve_matrix(&diag) else {
        return KappaStd::infinite();
    };
    let Ok(dec) = densela::svd(&c) else {
        return KappaStd::infinite();
    };
    let lower = dec.sigma_max();
    let upper = (k as f64).sqrt() * lower;
    if !lower.is_finite() {
        return KappaStd::infinite();
    }
    let phases = |v: &CVec| {
        CVec::from_iterator(
            k,
            v.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) }),
        )
    };
    let mut best = lower;
    // ascent: u ← phase(CᴴC u) never decreases ‖Cu‖ on the torus
    let gram = c.adjoint() * &c;
    let mut u = phases(&dec.v.column(0).into_owned());
    for _ in 0..50 {
        let value = (&c * &u).norm();
        best = best.max(value);
        let next = phases(&(&gram * &u));
        if (&next - &u).max_modulus() < 1e-15 {
            break;
        }
        u = next;
    }
    let mut r = rng::stream(seed, rng::TORUS);
    let mut z = CVec::zeros(k);
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = C64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU));
        }
        best = best.max((&c * &z).norm());
    }
    KappaStd {
        lower,
        estimate: best.clamp(lower, upper),
        upper,
    }
}

/// The standard θ-weighted condition number with M_ij = y_iᴴ A_ij x_i, x_i and
/// y_i unit right and left eigenvectors (y_iᴴ H_i(λ) = 0).
pub fn kappa_standard(inst: &MepInstance, norms: &CoeffNorms, lambda: &CVec, seed: u64) -> KappaStd {
    let k = inst.k();
    let mut m = CMat::zeros(k, k);
    for i in 0..k {
        let Ok(h) = inst.operator(i, lambda.as_slice()) else {
            return KappaStd::infinite();
        };
        let (Ok(x), Ok(y)) = (null_vector(&h), null_vector(&h.adjoint())) else {
            return KappaStd::infinite();
        };
        for j in 0..k {
            m[(i, j)] = y.dotc(&(inst.coeff(i, j + 1) * &x));
        }
    }
    kappa_std_from_matrix(&m, &norms.theta(lambda.as_slice()), TORUS_SAMPLES, seed)
}

/// Per-eigenpair diagnostics; optional measures are filled on request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    #[serde(with = "ext_f64")]
    pub backward_error: f64,
    /// max over i ≥ 2 of ‖λ_1 − λ_i‖_1 at the tracked endpoint.
    pub deviation: f64,
    pub newton_iters: usize,
    pub euler_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaResult>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ext_f64_opt")]
    pub kappa_fp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_std: Option<KappaStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_trace: Option<Vec<KappaSample>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::random_mep;
    use crate::solver::{solve, SolveConfig};
    use crate::targetsys::FiberHomotopy;
    use nalgebra::dvector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    /// λ = (1, 2) with eigenvectors e_1, e_2 of a decoupled diagonal instance.
    fn decoupled() -> MepInstance {
        let z = CMat::zeros(2, 2);
        let id = CMat::identity(2, 2);
        MepInstance::new(vec![
            vec![diag(&[1.0, 3.0]), id.clone(), z.clone()],
            vec![diag(&[5.0, 2.0]), z, id],
        ])
        .unwrap()
    }

    #[test]
    fn threshold_constant() {
        assert!((ALPHA_THRESHOLD - (13.0 - 3.0 * 17f64.sqrt()) / 4.0).abs() < 1e-15);
        // tabulated reference value 0.1576707807867545876…
        assert_eq!(ALPHA_THRESHOLD, 0.157_670_780_786_754_587_6);
    }

    #[test]
    fn backward_error_cases() {
        let inst = decoupled();
        let norms = CoeffNorms::new(&inst);
        let lambda = [c(1.0), c(2.0)];
        let xs = [dvector![c(1.0), c(0.0)], dvector![c(0.0), c(1.0)]];
        assert!(backward_error(&inst, &norms, &lambda, &xs) < 1e-14);
        // invariant under rescaling eigenvectors
        let scaled = [&xs[0] * C64::new(3.0, -4.0), &xs[1] * c(1e-3)];
        assert_eq!(backward_error(&inst, &norms, &lambda, &scaled), backward_error(&inst, &norms, &lambda, &xs));
        // first-order bound for a perturbed eigenvalue
        let delta = 1e-6;
        let moved = [c(1.0 + delta), c(2.0)];
        let eta = backward_error(&inst, &norms, &moved, &xs);
        let theta = norms.theta(&moved);
        assert!(eta <= delta * 1.0 / theta[0] + 1e-15);
        assert!(eta > 0.5 * delta / theta[0]);
    }

    #[test]
    fn backward_error_unitary_invariance() {
        let inst = random_mep(2, &[3, 3], 4).unwrap();
        let report = solve(&inst, &SolveConfig::default()).unwrap();
        let pair = &report.eigenpairs[0];
        let q = densela::svd(&rng::gaussian_matrix(&mut rng::stream(1, 0), 3, 3)).unwrap().u;
        let w = densela::svd(&rng::gaussian_matrix(&mut rng::stream(2, 0), 3, 3)).unwrap().u;
        // A_0j ← Q A_0j W for block 0, with x_0 ← Wᴴ x_0
        let mut coeffs = inst.coeffs().to_vec();
        for a in coeffs[0].iter_mut() {
            *a = &q * &*a * &w;
        }
        let rotated = MepInstance::new(coeffs).unwrap();
        let mut xs = pair.xs.clone();
        xs[0] = w.adjoint() * &xs[0];
        let a = backward_error(&inst, &CoeffNorms::new(&inst), pair.lambda.as_slice(), &pair.xs);
        let b = backward_error(&rotated, &CoeffNorms::new(&rotated), pair.lambda.as_slice(), &xs);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_zero_at_exact_solution() {
        let inst = decoupled();
        let charts = vec![dvector![c(1.0), c(0.0)], dvector![c(0.0), c(1.0)]];
        let slopes = vec![CMat::from_row_slice(1, 2, &[c(1.0), c(0.0)]); 2];
        let slices = SliceSet::from_slopes(slopes, charts, 0).unwrap();
        let target = crate::targetsys::sample_target(2, 0).unwrap();
        let hom = FiberHomotopy::new(&inst, &slices, &target);
        let fp = FiberPoint {
            lambdas: vec![dvector![c(1.0), c(2.0)]; 2],
            xs: vec![dvector![c(1.0), c(0.0)], dvector![c(0.0), c(1.0)]],
            t: 1.0,
        };
        let a = alpha_number(&hom, &fp.to_vector(), 1.0, fiber_second_derivative_norm(&inst));
        assert_eq!(a.beta, 0.0);
        assert_eq!(a.alpha, 0.0);
        assert!(a.certified);
    }

    #[test]
    fn kappa_closed_form_oracle() {
        // sin of the angle between the diagonal and ker J reduces to
        // σ_min(N)/√k with N the row-normalized matrix (y_iᵀ A_ij x_i)
        for seed in 0..5 {
            let inst = random_mep(2, &[4, 4], seed).unwrap();
            let report = solve(&inst, &SolveConfig::default()).unwrap();
            for pair in &report.eigenpairs {
                let kappa = kappa_fp(&inst, &pair.lambda);
                let mut n = CMat::zeros(2, 2);
                for i in 0..2 {
                    let h = inst.operator(i, pair.lambda.as_slice()).unwrap();
                    let x = null_vector(&h).unwrap();
                    let y = null_vector(&h.transpose()).unwrap();
                    for j in 0..2 {
                        n[(i, j)] = y.dot(&(inst.coeff(i, j + 1) * &x));
                    }
                    let norm = n.row(i).norm();
                    let normalized = n.row(i) / c(norm);
                    n.set_row(i, &normalized);
                }
                let closed = 2f64.sqrt() / densela::svd(&n).unwrap().sigma_min();
                assert!(kappa >= 1.0);
                assert!((kappa - closed).abs() < 1e-8 * closed, "{kappa} vs {closed}");
            }
        }
    }

    #[test]
    fn kappa_invariant_under_vector_rescaling() {
        let inst = random_mep(2, &[3, 3], 8).unwrap();
        let report = solve(&inst, &SolveConfig::default()).unwrap();
        let lambda = &report.eigenpairs[0].lambda;
        let lambdas = vec![lambda.clone(); 2];
        let (xs, ys) = null_vectors(&inst, &lambdas).unwrap();
        let dk = build_dk(2);
        let base = kappa_from_vectors(&inst, &xs, &ys, &dk);
        let mut r = rng::stream(3, 0);
        for _ in 0..5 {
            let xs2: Vec<CVec> = xs.iter().map(|x| x * rng::complex_gaussian(&mut r)).collect();
            let ys2: Vec<CVec> = ys.iter().map(|y| y * rng::complex_gaussian(&mut r)).collect();
            assert!((kappa_from_vectors(&inst, &xs2, &ys2, &dk) - base).abs() < 1e-10 * base);
        }
    }

    #[test]
    fn kappa_std_diagonal_cases() {
        let theta = [2.0, 5.0, 0.5];
        let k = diag(&theta);
        let s = kappa_std_from_matrix(&k, &theta, TORUS_SAMPLES, 1);
        assert!((s.estimate - 3f64.sqrt()).abs() < 0.01 * 3f64.sqrt());
        assert!(s.lower <= s.estimate && s.estimate <= s.upper);

        let theta = [1.5, 0.7];
        let m = diag(&[1.5, 1.4]);
        let s = kappa_std_from_matrix(&m, &theta, TORUS_SAMPLES, 2);
        let exact = 1.25f64.sqrt();
        assert!(s.lower <= exact + 1e-12 && exact <= s.upper + 1e-12);
        assert!((s.estimate - exact).abs() < 1e-12);
    }

    #[test]
    fn kappa_std_bracket_on_random_matrices() {
        let mut r = rng::stream(11, 0);
        for k in 2..=5 {
            let m = rng::gaussian_matrix(&mut r, k, k);
            let theta: Vec<f64> = (0..k).map(|_| r.random_range(0.5..3.0)).collect();
            let s = kappa_std_from_matrix(&m, &theta, 1000, 3);
            assert!(s.lower <= s.estimate && s.estimate <= s.upper);
            assert!(s.upper <= (k as f64).sqrt() * s.lower * (1.0 + 1e-15));
        }
        let singular = CMat::zeros(2, 2);
        assert!(kappa_std_from_matrix(&singular, &[1.0, 1.0], 10, 0).lower.is_infinite());
    }

    #[test]
    fn standard_kappa_dwarfs_fp_kappa_when_m_is_tiny() {
        // rows of M well separated in direction (κ_fp small) but tiny against
        // θ: the θ-weighted number blows up while the angle stays benign
        let eps = 1e-6;
        let m = diag(&[eps, eps]);
        let std = kappa_std_from_matrix(&m, &[1.0, 1.0], 100, 0);
        let normalized = diag(&[1.0, 1.0]);
        let fp = 2f64.sqrt() / densela::svd(&normalized).unwrap().sigma_min();
        assert!(std.lower > 1e5 * fp);
    }
}
