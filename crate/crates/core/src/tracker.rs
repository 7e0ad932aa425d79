//! Euler–Newton predictor-corrector path tracking with adaptive step size.
//!
//! The tracker is generic over a square homotopy F(z, t) = 0 supplied through
//! the [`Homotopy`] trait; the fiber product homotopy and the diagonal
//! coefficient homotopy both plug in.

use serde::{Deserialize, Serialize};

use crate::densela::LuFactorization;
use crate::MaxModulus;
use crate::error::Result;
use crate::mep::FiberPoint;
use crate::{CMat, CVec, C64};

/// A square polynomial homotopy in z ∈ C^dim and t ∈ [0, 1].
pub trait Homotopy {
    fn dim(&self) -> usize;
    /// Leading entries of z that hold eigenvalue coordinates.
    fn lambda_len(&self) -> usize;
    fn residual(&self, z: &CVec, t: f64) -> CVec;
    fn jacobian(&self, z: &CVec, t: f64) -> CMat;
    /// ∂F/∂t.
    fn dt(&self, z: &CVec, t: f64) -> CVec;
    fn fiber_point(&self, z: &CVec, t: f64) -> FiberPoint;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// Corrector stops once ‖Δ‖_∞ drops below this.
    pub newton_tol: f64,
    pub max_newton_per_step: usize,
    /// Newton budget at t = 1; `None` picks max(20, k·max n_i + 5).
    pub endgame_max_iters: Option<usize>,
    pub divergence_norm_cap: f64,
    pub max_total_steps: usize,
    /// Endpoints must satisfy ‖F(z, 1)‖_∞ below this to count as converged.
    pub endpoint_residual_tol: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            h_init: 1e-3,
            h_max: 1e-2,
            h_min: 1e-6,
            newton_tol: 1e-9,
            max_newton_per_step: 8,
            endgame_max_iters: None,
            divergence_norm_cap: 1e10,
            max_total_steps: 10_000,
            endpoint_residual_tol: 1e-8,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0 < self.h_min && self.h_min <= self.h_init && self.h_init <= self.h_max && self.h_max < 1.0) {
            return Err(format!(
                "step sizes must satisfy 0 < h_min ≤ h_init ≤ h_max < 1 (got {}, {}, {})",
                self.h_min, self.h_init, self.h_max
            ));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_per_step == 0 || self.max_total_steps == 0 {
            return Err("Newton tolerance and iteration budgets must be positive".into());
        }
        if self.endgame_max_iters == Some(0) {
            return Err("endgame iteration budget must be positive".into());
        }
        Ok(())
    }

    pub fn endgame_iters(&self, k: usize, dims: &[usize]) -> usize {
        self.endgame_max_iters
            .unwrap_or_else(|| 20.max(k * dims.iter().copied().max().unwrap_or(0) + 5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathStatus {
    Converged,
    Diverged,
    StepFloorHit,
    MaxStepsHit,
}

impl PathStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PathStatus::Converged => "converged",
            PathStatus::Diverged => "diverged",
            PathStatus::StepFloorHit => "step_floor_hit",
            PathStatus::MaxStepsHit => "max_steps_hit",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub euler_steps: usize,
    pub rejected_steps: usize,
    pub newton_iters: usize,
    pub h_min_used: f64,
    pub h_max_used: f64,
    pub final_corrector_norm: f64,
    pub final_residual: f64,
    /// Wall time of this path in seconds; not serialized so that result files
    /// stay reproducible.
    #[serde(skip)]
    pub elapsed: f64,
}

/// One accepted step of a traced path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub h: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub tangent_norm: f64,
    /// ‖z_new − z_old‖_∞ over the step.
    pub step_norm: f64,
    pub lambda: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub start_index: Vec<usize>,
    pub status: PathStatus,
    /// Point reached at the last accepted t (the endpoint at t = 1 when converged).
    pub endpoint: Option<FiberPoint>,
    pub stats: PathStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

impl PathResult {
    pub fn converged(&self) -> bool {
        self.status == PathStatus::Converged
    }
}

/// Solve J ż = −∂F/∂t.
pub fn euler_tangent<H: Homotopy + ?Sized>(hom: &H, z: &CVec, t: f64) -> Result<CVec> {
    let lu = LuFactorization::new(&hom.jacobian(z, t))?;
    lu.solve(&(-hom.dt(z, t)))
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub z: CVec,
    pub iters: usize,
    pub converged: bool,
    /// ‖Δ‖_∞ of each corrector step taken.
    pub corrections: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_correction(&self) -> f64 {
        self.corrections.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Every correction at most half the one before. A corrector that has to
    /// wander before settling has likely been captured by another path, so
    /// such steps are rejected even when they end up converging.
    pub fn contracts(&self) -> bool {
        self.corrections.windows(2).all(|w| w[1] <= 0.5 * w[0])
    }
}

/// Newton's method on F(·, t) from `z`, stopping once ‖Δ‖_∞ < tol·max(1, ‖z‖_∞)
/// or after `max_iters` corrections. The scale factor keeps the test above the
/// rounding floor when an eigenvector grows large near its chart's hyperplane
/// at infinity. A singular Jacobian ends the iteration unconverged.
pub fn newton_refine<H: Homotopy + ?Sized>(
    hom: &H,
    z: &CVec,
    t: f64,
    tol: f64,
    max_iters: usize,
) -> NewtonOutcome {
    let mut z = z.clone();
    let mut corrections = Vec::with_capacity(max_iters);
    let mut converged = false;
    for _ in 0..max_iters {
        let f = hom.residual(&z, t);
        let Ok(delta) = LuFactorization::new(&hom.jacobian(&z, t)).and_then(|lu| lu.solve(&(-f))) else {
            break;
        };
        let norm = delta.max_modulus();
        if !norm.is_finite() {
            break;
        }
        z += delta;
        corrections.push(norm);
        if norm < tol * z.max_modulus().max(1.0) {
            converged = true;
            break;
        }
    }
    NewtonOutcome {
        iters: corrections.len(),
        z,
        converged,
        corrections,
    }
}

/// Exactly `steps` Newton corrections at t (fewer only if the Jacobian is singular).
pub fn polish<H: Homotopy + ?Sized>(hom: &H, z: &CVec, t: f64, steps: usize) -> CVec {
    newton_refine(hom, z, t, 0.0, steps).z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDecision {
    /// Keep the corrected point and continue with the new step size.
    Accept(f64),
    /// Discard the step and retry from the last accepted point.
    Reject(f64),
    /// The step size fell below h_min.
    Floor,
}

pub fn step_control(cfg: &TrackerConfig, newton_iters: usize, converged: bool, h: f64) -> StepDecision {
    if !converged {
        let h = h / 2.0;
        return if h < cfg.h_min { StepDecision::Floor } else { StepDecision::Reject(h) };
    }
    if newton_iters <= 2 {
        StepDecision::Accept((2.0 * h).min(cfg.h_max))
    } else {
        StepDecision::Accept(h)
    }
}

/// Mutable state of a path in progress.
#[derive(Debug, Clone)]
pub struct TrackState {
    pub z: CVec,
    pub t: f64,
    pub h: f64,
    pub stats: PathStats,
    pub trace: Option<Vec<TraceRow>>,
}

impl TrackState {
    pub fn new(z: CVec, t: f64, cfg: &TrackerConfig, trace: bool) -> Self {
        Self {
            z,
            t,
            h: cfg.h_init,
            stats: PathStats {
                h_min_used: f64::INFINITY,
                h_max_used: 0.0,
                ..PathStats::default()
            },
            trace: trace.then(Vec::new),
        }
    }
}

/// Track from `state.t` to `t_end`, landing exactly on `t_end`. The last step
/// gets `final_iters` Newton corrections. Returns `None` while healthy and
/// the failure status otherwise.
pub fn track_segment<H: Homotopy + ?Sized>(
    hom: &H,
    state: &mut TrackState,
    t_end: f64,
    cfg: &TrackerConfig,
    final_iters: usize,
) -> Option<PathStatus> {
    while state.t < t_end {
        if state.stats.euler_steps + state.stats.rejected_steps >= cfg.max_total_steps {
            return Some(PathStatus::MaxStepsHit);
        }
        let last = state.t + state.h >= t_end;
        let h = if last { t_end - state.t } else { state.h };
        let t_next = if last { t_end } else { state.t + h };
        let Ok(tangent) = euler_tangent(hom, &state.z, state.t) else {
            return Some(PathStatus::StepFloorHit);
        };
        let predicted = &state.z + &tangent * C64::new(h, 0.0);
        let budget = if last { final_iters } else { cfg.max_newton_per_step };
        let newton = newton_refine(hom, &predicted, t_next, cfg.newton_tol, budget);
        state.stats.newton_iters += newton.iters;
        match step_control(cfg, newton.iters, newton.converged && newton.contracts(), state.h) {
            StepDecision::Floor => return Some(PathStatus::StepFloorHit),
            StepDecision::Reject(h_new) => {
                state.stats.rejected_steps += 1;
                state.h = h_new;
            }
            StepDecision::Accept(h_new) => {
                state.stats.euler_steps += 1;
                state.stats.h_min_used = state.stats.h_min_used.min(h);
                state.stats.h_max_used = state.stats.h_max_used.max(h);
                state.stats.final_corrector_norm = newton.final_correction();
                if let Some(trace) = state.trace.as_mut() {
                    trace.push(TraceRow {
                        t: t_next,
                        h,
                        newton_iters: newton.iters,
                        residual: hom.residual(&newton.z, t_next).max_modulus(),
                        tangent_norm: tangent.max_modulus(),
                        step_norm: (&newton.z - &state.z).max_modulus(),
                        lambda: newton.z.rows(0, hom.lambda_len()).iter().copied().collect(),
                    });
                }
                state.z = newton.z;
                state.t = t_next;
                state.h = h_new;
                if !(state.z.max_modulus() <= cfg.divergence_norm_cap) {
                    return Some(PathStatus::Diverged);
                }
            }
        }
    }
    None
}

/// Track one path from t = 0 to t = 1.
pub fn track_path<H: Homotopy + ?Sized>(
    hom: &H,
    start: &CVec,
    start_index: Vec<usize>,
    cfg: &TrackerConfig,
    endgame_iters: usize,
    trace: bool,
) -> PathResult {
    #[cfg(not(target_arch = "wasm32"))]
    let clock = std::time::Instant::now();
    let mut state = TrackState::new(start.clone(), 0.0, cfg, trace);
    let mut status = track_segment(hom, &mut state, 1.0, cfg, endgame_iters).unwrap_or(PathStatus::Converged);
    state.stats.final_residual = hom.residual(&state.z, state.t).max_modulus();
    if status == PathStatus::Converged && !(state.stats.final_residual < cfg.endpoint_residual_tol) {
        status = PathStatus::Diverged;
    }
    #[cfg(not(target_arch = "wasm32"))]
    {
        state.stats.elapsed = clock.elapsed().as_secs_f64();
    }
    if state.stats.euler_steps == 0 {
        state.stats.h_min_used = 0.0;
    }
    PathResult {
        start_index,
        status,
        endpoint: Some(hom.fiber_point(&state.z, state.t)),
        stats: state.stats,
        trace: state.trace,
    }
}
