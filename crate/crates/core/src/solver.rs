//! The full fiber product pipeline: slices, targets, start set, parallel
//! tracking, collapse of the fiber copies, clustering and diagnostics.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    alpha_number, backward_error, fiber_second_derivative_norm, kappa_fp, kappa_standard, kappa_trace,
    CoeffNorms, DiagnosticsRecord,
};
use crate::error::{Error, Result};
use crate::mep::{unit, Eigenpair, FiberPoint, MepInstance};
use crate::pool;
use crate::startsys::{sample_slices, start_solutions_retrying, SliceSet, StartSet};
use crate::targetsys::{sample_target, FiberHomotopy, TargetConstraints};
use crate::tracker::{polish, track_path, PathResult, TrackerConfig};
use crate::CVec;

/// Copies disagreeing by more than this are kept but flagged.
pub const INCONSISTENCY_TOL: f64 = 1e-4;
/// Every reported eigenpair must have backward error below this.
pub const RESIDUAL_CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub seed: u64,
    pub tracker: TrackerConfig,
    /// Worker threads for path tracking; 0 uses the available parallelism.
    /// Not serialized: results must not depend on it.
    #[serde(skip)]
    pub workers: usize,
    /// Record every accepted step of every path.
    pub trace_paths: bool,
    /// Newton corrections applied at t = 1 before diagnostics.
    pub polish_steps: usize,
    pub alpha: bool,
    /// κ_fp and the θ-weighted standard condition number.
    pub kappa: bool,
    /// κ sampled along each path at `kappa_trace_ts`.
    pub kappa_trace: bool,
    pub kappa_trace_ts: Vec<f64>,
    pub cluster_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tracker: TrackerConfig::default(),
            workers: 0,
            trace_paths: false,
            polish_steps: 1,
            alpha: false,
            kappa: false,
            kappa_trace: false,
            kappa_trace_ts: (0..=10).map(|i| i as f64 / 10.0).collect(),
            cluster_tol: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.tracker.validate().map_err(Error::InvalidConfig)?;
        if !(self.cluster_tol >= 0.0) {
            return Err(Error::InvalidConfig("cluster tolerance must be non-negative".into()));
        }
        if self.kappa_trace_ts.iter().any(|t| !(0.0..=1.0).contains(t))
            || self.kappa_trace_ts.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::InvalidConfig("κ trace times must be ascending within [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub k: usize,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub config: SolveConfig,
    pub slices: SliceSet,
    pub target: TargetConstraints,
    /// Finite start pairs of each associated pencil.
    pub start_block_sizes: Vec<usize>,
    /// Infinite eigenvalues filtered from each associated pencil.
    pub infinite_eigenvalues: Vec<usize>,
    pub start_count: usize,
    pub converged: usize,
    pub divergent: usize,
    /// Converged endpoints merged into another eigenpair by clustering.
    pub clustered: usize,
    pub max_deviation: f64,
    pub max_backward_error: f64,
    pub eigenpairs: Vec<Eigenpair>,
    pub paths: Vec<PathResult>,
    /// Seconds for the whole solve; not serialized (timings vary run to run).
    #[serde(skip)]
    pub wall_time: f64,
    /// Longest single path in seconds.
    #[serde(skip)]
    pub t_path: f64,
}

impl SolveReport {
    /// Every eigenpair passes the residual certificate.
    pub fn certificates_pass(&self) -> bool {
        self.eigenpairs
            .iter()
            .all(|p| p.diagnostics.backward_error < RESIDUAL_CERTIFICATE_TOL)
    }

    /// Zero divergent paths and all certificates pass.
    pub fn healthy(&self) -> bool {
        self.divergent == 0 && self.certificates_pass()
    }

    /// Average Newton corrections per path.
    pub fn newton_per_path(&self) -> f64 {
        if self.paths.is_empty() {
            return 0.0;
        }
        self.paths.iter().map(|p| p.stats.newton_iters).sum::<usize>() as f64 / self.paths.len() as f64
    }
}

/// The random data a solve is built from.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub slices: SliceSet,
    pub target: TargetConstraints,
    pub starts: StartSet,
}

pub fn prepare(inst: &MepInstance, seed: u64) -> Result<Prepared> {
    if inst.k() < 2 {
        return Err(Error::InvalidInstance("the fiber product method needs k ≥ 2".into()));
    }
    let mut slices = sample_slices(inst, seed)?;
    let starts = start_solutions_retrying(inst, &mut slices)?;
    let target = sample_target(inst.k(), seed)?;
    Ok(Prepared { slices, target, starts })
}

/// Solve with slices, target and start set drawn from `cfg.seed`.
pub fn solve(inst: &MepInstance, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let prepared = prepare(inst, cfg.seed)?;
    let order: Vec<Vec<usize>> = prepared.starts.indices().collect();
    Ok(solve_prepared(inst, &prepared, order, cfg))
}

/// Track the given start multi-indices (in any order, repeats allowed) and
/// assemble the report. Results are ordered by start multi-index, so the
/// dispatch order never shows in the output.
pub fn solve_prepared(inst: &MepInstance, prepared: &Prepared, order: Vec<Vec<usize>>, cfg: &SolveConfig) -> SolveReport {
    #[cfg(not(target_arch = "wasm32"))]
    let clock = std::time::Instant::now();
    let Prepared { slices, target, starts } = prepared;
    let hom = FiberHomotopy::new(inst, slices, target);
    let endgame = cfg.tracker.endgame_iters(inst.k(), inst.dims());
    let mut paths = pool::map(&order, cfg.workers, |idx| {
        track_path(
            &hom,
            &starts.point(idx).to_vector(),
            idx.clone(),
            &cfg.tracker,
            endgame,
            cfg.trace_paths,
        )
    });
    paths.sort_by(|a, b| a.start_index.cmp(&b.start_index));

    let norms = CoeffNorms::new(inst);
    let d2 = fiber_second_derivative_norm(inst);
    let converged: Vec<(usize, &PathResult)> = paths.iter().enumerate().filter(|(_, p)| p.converged()).collect();
    let candidates = pool::map(&converged, cfg.workers, |&(ordinal, path)| {
        let endpoint = path.endpoint.as_ref().expect("converged paths carry endpoints");
        let mut z = endpoint.to_vector();
        if cfg.polish_steps > 0 {
            z = polish(&hom, &z, 1.0, cfg.polish_steps);
        }
        let fp = FiberPoint::from_vector(&z, inst.k(), inst.dims(), 1.0);
        let mut pair = collapse_fiber_point(&fp);
        pair.start_index = path.start_index.clone();
        let d = &mut pair.diagnostics;
        d.backward_error = backward_error(inst, &norms, pair.lambda.as_slice(), &pair.xs);
        d.newton_iters = path.stats.newton_iters;
        d.euler_steps = path.stats.euler_steps;
        if cfg.alpha {
            d.alpha = Some(alpha_number(&hom, &z, 1.0, d2));
        }
        if cfg.kappa {
            d.kappa_fp = Some(kappa_fp(inst, &pair.lambda));
            d.kappa_std = Some(kappa_standard(inst, &norms, &pair.lambda, cfg.seed.wrapping_add(ordinal as u64)));
        }
        if cfg.kappa_trace {
            let start = starts.point(&path.start_index).to_vector();
            d.kappa_trace = Some(kappa_trace(inst, slices, target, &hom, &start, &cfg.kappa_trace_ts, &cfg.tracker));
        }
        pair
    });
    let converged_count = candidates.len();
    let mut eigenpairs = cluster_eigenvalues(candidates, cfg.cluster_tol);
    for pair in eigenpairs.iter_mut().filter(|p| p.multiplicity > 1) {
        pair.diagnostics.backward_error = backward_error(inst, &norms, pair.lambda.as_slice(), &pair.xs);
    }

    let t_path = paths.iter().map(|p| p.stats.elapsed).fold(0.0, f64::max);
    #[cfg(not(target_arch = "wasm32"))]
    let wall_time = clock.elapsed().as_secs_f64();
    #[cfg(target_arch = "wasm32")]
    let wall_time = 0.0;
    SolveReport {
        k: inst.k(),
        dims: inst.dims().to_vec(),
        seed: cfg.seed,
        config: cfg.clone(),
        slices: slices.clone(),
        target: target.clone(),
        start_block_sizes: starts.block_sizes(),
        infinite_eigenvalues: starts.infinite.clone(),
        start_count: order.len(),
        converged: converged_count,
        divergent: order.len() - converged_count,
        clustered: converged_count - eigenpairs.len(),
        max_deviation: eigenpairs.iter().map(|p| p.diagnostics.deviation).fold(0.0, f64::max),
        max_backward_error: eigenpairs.iter().map(|p| p.diagnostics.backward_error).fold(0.0, f64::max),
        eigenpairs,
        paths,
        wall_time,
        t_path,
    }
}

/// λ = λ_1, unit eigenvectors, and the copy deviation; pairs whose copies
/// disagree by more than [`INCONSISTENCY_TOL`] are flagged, not dropped.
pub fn collapse_fiber_point(fp: &FiberPoint) -> Eigenpair {
    let deviation = fp.deviation();
    Eigenpair {
        lambda: fp.lambdas[0].clone(),
        xs: fp.xs.iter().map(unit).collect(),
        multiplicity: 1,
        inconsistent: !(deviation <= INCONSISTENCY_TOL),
        start_index: Vec::new(),
        diagnostics: DiagnosticsRecord {
            deviation,
            ..Default::default()
        },
    }
}

fn relative_gap(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

/// Single-linkage clustering of eigenvalues under ‖λ − λ'‖₂/(1 + ‖λ‖₂).
/// Each cluster keeps its first member (in input order) with λ replaced by
/// the componentwise mean, the largest member deviation, and multiplicity
/// equal to the cluster size.
pub fn cluster_eigenvalues(pairs: Vec<Eigenpair>, rel_tol: f64) -> Vec<Eigenpair> {
    let n = pairs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if relative_gap(&pairs[i].lambda, &pairs[j].lambda) <= rel_tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| root(&mut parent, i)).collect();
    let mut out: Vec<Eigenpair> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for (i, pair) in pairs.into_iter().enumerate() {
        let r = roots[i];
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(pair);
        } else {
            let rep = &mut out[slot[r]];
            rep.lambda += &pair.lambda;
            rep.multiplicity += 1;
            rep.inconsistent |= pair.inconsistent;
            rep.diagnostics.deviation = rep.diagnostics.deviation.max(pair.diagnostics.deviation);
        }
    }
    for rep in out.iter_mut().filter(|p| p.multiplicity > 1) {
        rep.lambda /= crate::C64::new(rep.multiplicity as f64, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::random_mep;
    use crate::{CMat, C64};
    use nalgebra::dvector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn pair(l: [f64; 2]) -> Eigenpair {
        collapse_fiber_point(&FiberPoint {
            lambdas: vec![dvector![c(l[0]), c(l[1])]; 2],
            xs: vec![dvector![c(2.0), c(0.0)], dvector![c(0.0), c(1.0)]],
            t: 1.0,
        })
    }

    #[test]
    fn collapse_rules() {
        let p = pair([1.0, 2.0]);
        assert_eq!(p.diagnostics.deviation, 0.0);
        assert_eq!(p.xs[0], dvector![c(1.0), c(0.0)]);
        let mut fp = FiberPoint {
            lambdas: vec![dvector![c(1.0), c(2.0)], dvector![c(1.0 + 1e-13), c(2.0)]],
            xs: vec![dvector![c(1.0)], dvector![c(1.0)]],
            t: 1.0,
        };
        let close = collapse_fiber_point(&fp);
        assert!(close.diagnostics.deviation < 2e-13 && !close.inconsistent);
        assert_eq!(close.lambda, fp.lambdas[0]);
        fp.lambdas[1][0] = c(1.0 + 1e-3);
        assert!(collapse_fiber_point(&fp).inconsistent);
    }

    #[test]
    fn clustering_merges_chains_and_averages() {
        let pairs = vec![
            pair([1.0, 2.0]),
            pair([5.0, 0.0]),
            pair([1.0 + 1e-9, 2.0]),
            pair([1.0 + 2e-9, 2.0]),
        ];
        let out = cluster_eigenvalues(pairs, 1e-8);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].multiplicity, 3);
        assert!((out[0].lambda[0] - c(1.0 + 1e-9)).norm() < 1e-15);
        assert_eq!(out[1].multiplicity, 1);
        assert_eq!(cluster_eigenvalues(vec![pair([1.0, 2.0]), pair([1.0, 2.1])], 1e-8).len(), 2);
    }

    #[test]
    fn generic_instances_give_full_counts() {
        let inst = random_mep(2, &[3, 3], 7).unwrap();
        let report = solve(&inst, &SolveConfig::default()).unwrap();
        assert_eq!(report.start_count, 9);
        assert_eq!(report.divergent, 0);
        assert_eq!(report.eigenpairs.len(), 9);
        assert!(report.eigenpairs.iter().all(|p| p.multiplicity == 1));
        assert!(report.max_backward_error < 1e-10);
        assert!(report.healthy());

        let inst = random_mep(3, &[2, 2, 2], 3).unwrap();
        let report = solve(&inst, &SolveConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(report.eigenpairs.len(), 8);
        assert_eq!(report.divergent, 0);
    }

    #[test]
    fn start_order_does_not_matter() {
        let inst = random_mep(2, &[3, 2], 5).unwrap();
        let cfg = SolveConfig { seed: 5, workers: 1, ..Default::default() };
        let prepared = prepare(&inst, cfg.seed).unwrap();
        let forward: Vec<Vec<usize>> = prepared.starts.indices().collect();
        let mut backward = forward.clone();
        backward.reverse();
        backward.swap(0, 3);
        let a = solve_prepared(&inst, &prepared, forward, &cfg);
        let b = solve_prepared(&inst, &prepared, backward, &cfg);
        assert_eq!(crate::report::to_json(&a.eigenpairs), crate::report::to_json(&b.eigenpairs));
    }

    #[test]
    fn repeated_start_forms_one_cluster() {
        let inst = random_mep(2, &[2, 2], 9).unwrap();
        let cfg = SolveConfig { seed: 9, ..Default::default() };
        let prepared = prepare(&inst, cfg.seed).unwrap();
        let report = solve_prepared(&inst, &prepared, vec![vec![1, 0], vec![1, 0]], &cfg);
        assert_eq!(report.converged, 2);
        assert_eq!(report.eigenpairs.len(), 1);
        assert_eq!(report.eigenpairs[0].multiplicity, 2);
        assert_eq!(report.clustered, 1);
    }

    #[test]
    fn planted_repeated_eigenvalue_is_clustered() {
        // A decoupled instance reduces to one pencil per block. Block 1 is the
        // pencil diag(1, 1) − λI with the double eigenvalue 1, block 2 has
        // μ ∈ {2, −3}. A double eigenvalue has a 2-dimensional eigenspace, so
        // its fiber solutions are not isolated and cannot be tracked; the
        // Cartesian eigenpairs are formed from the block spectra instead.
        let d = |v: [f64; 2]| CMat::from_diagonal(&dvector![c(v[0]), c(v[1])]);
        let id = CMat::identity(2, 2);
        let block1 = crate::densela::gep_finite_eigs(&d([1.0, 1.0]), &id).unwrap();
        let block2 = crate::densela::gep_finite_eigs(&d([2.0, -3.0]), &id).unwrap();
        let mut pairs = Vec::new();
        for a in &block1.pairs {
            for b in &block2.pairs {
                pairs.push(collapse_fiber_point(&FiberPoint {
                    lambdas: vec![dvector![a.beta, b.beta]; 2],
                    xs: vec![a.x.clone(), b.x.clone()],
                    t: 1.0,
                }));
            }
        }
        let out = cluster_eigenvalues(pairs, 1e-8);
        let mut sizes: Vec<usize> = out.iter().map(|p| p.multiplicity).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2]);
        for p in &out {
            assert!((p.lambda[0] - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = random_mep(2, &[2, 2], 0).unwrap();
        let mut cfg = SolveConfig::default();
        cfg.tracker.h_min = 1.0;
        assert!(matches!(solve(&inst, &cfg), Err(Error::InvalidConfig(_))));
        let cfg = SolveConfig { kappa_trace_ts: vec![0.5, 0.2], ..Default::default() };
        assert!(matches!(solve(&inst, &cfg), Err(Error::InvalidConfig(_))));
    }
}
