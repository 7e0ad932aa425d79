//! Browser bindings for the solver demo page (`www/index.html`).
//!
//! Each exported function takes small integer parameters, solves a seeded
//! random instance, and returns a JSON string for the page to draw. The
//! `*_json` functions hold the logic so they can be tested natively.

use fibermep::problems::random_mep;
use fibermep::{solve, MepInstance, SolveConfig, SolveReport};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps a single solve interactive on the page's main thread.
const MAX_PATHS: usize = 64;

fn instance(k: usize, n: usize, seed: u32) -> Result<MepInstance, String> {
    if !(2..=3).contains(&k) {
        return Err(format!("k must be 2 or 3, got {k}"));
    }
    if n == 0 || n.pow(k as u32) > MAX_PATHS {
        return Err(format!("n^k must lie in 1..={MAX_PATHS}, got n = {n}, k = {k}"));
    }
    random_mep(k, &vec![n; k], seed as u64).map_err(|e| e.to_string())
}

fn run(k: usize, n: usize, seed: u32, cfg: SolveConfig) -> Result<SolveReport, String> {
    let inst = instance(k, n, seed)?;
    solve(&inst, &SolveConfig { seed: seed as u64, workers: 1, ..cfg }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Pair {
    /// (re, im) of each coordinate.
    lambda: Vec<[f64; 2]>,
    eta: f64,
    kappa_fp: Option<f64>,
    certified: Option<bool>,
}

#[derive(Serialize)]
struct SolveSummary {
    k: usize,
    n: usize,
    seed: u32,
    starts: usize,
    divergent: usize,
    healthy: bool,
    pairs: Vec<Pair>,
}

pub fn solve_random_json(k: usize, n: usize, seed: u32) -> Result<String, String> {
    let report = run(k, n, seed, SolveConfig { alpha: true, kappa: true, ..SolveConfig::default() })?;
    let pairs = report
        .eigenpairs
        .iter()
        .map(|p| Pair {
            lambda: p.lambda.iter().map(|z| [z.re, z.im]).collect(),
            eta: p.diagnostics.backward_error,
            // κ is +∞ only for degenerate eigenpairs, which JSON cannot carry
            kappa_fp: p.diagnostics.kappa_fp.filter(|x| x.is_finite()),
            certified: p.diagnostics.alpha.map(|a| a.certified),
        })
        .collect();
    let summary = SolveSummary {
        k,
        n,
        seed,
        starts: report.start_count,
        divergent: report.divergent,
        healthy: report.healthy(),
        pairs,
    };
    Ok(serde_json::to_string(&summary).expect("summary serializes"))
}

#[derive(Serialize)]
struct Projection {
    status: &'static str,
    /// (t, re λ_1, im λ_1) at each accepted step; t = 0 is not recorded.
    points: Vec<[f64; 3]>,
}

pub fn path_projection_json(k: usize, n: usize, seed: u32) -> Result<String, String> {
    let report = run(k, n, seed, SolveConfig { trace_paths: true, polish_steps: 0, ..SolveConfig::default() })?;
    let paths: Vec<Projection> = report
        .paths
        .iter()
        .map(|p| Projection {
            status: p.status.as_str(),
            points: p
                .trace
                .iter()
                .flatten()
                .map(|row| [row.t, row.lambda[0].re, row.lambda[0].im])
                .collect(),
        })
        .collect();
    Ok(serde_json::to_string(&paths).expect("projection serializes"))
}

#[derive(Serialize)]
struct KappaCurves {
    ts: Vec<f64>,
    /// One curve per eigenpair; non-finite samples become null.
    curves: Vec<Vec<Option<f64>>>,
}

pub fn kappa_trace_json(k: usize, n: usize, seed: u32) -> Result<String, String> {
    let cfg = SolveConfig { kappa_trace: true, ..SolveConfig::default() };
    let ts = cfg.kappa_trace_ts.clone();
    let report = run(k, n, seed, cfg)?;
    let curves = report
        .eigenpairs
        .iter()
        .filter_map(|p| p.diagnostics.kappa_trace.as_ref())
        .map(|trace| trace.iter().map(|s| Some(s.kappa).filter(|x| x.is_finite())).collect())
        .collect();
    Ok(serde_json::to_string(&KappaCurves { ts, curves }).expect("curves serialize"))
}

/// Eigenvalues, backward errors, κ_fp and α certificates of a random instance.
#[wasm_bindgen]
pub fn solve_random(k: usize, n: usize, seed: u32) -> Result<String, JsError> {
    solve_random_json(k, n, seed).map_err(|e| JsError::new(&e))
}

/// Every tracked path projected to the first eigenvalue coordinate.
#[wasm_bindgen]
pub fn path_projection(k: usize, n: usize, seed: u32) -> Result<String, JsError> {
    path_projection_json(k, n, seed).map_err(|e| JsError::new(&e))
}

/// κ sampled along every path at t = 0, 0.1, …, 1.
#[wasm_bindgen]
pub fn kappa_trace(k: usize, n: usize, seed: u32) -> Result<String, JsError> {
    kappa_trace_json(k, n, seed).map_err(|e| JsError::new(&e))
}
