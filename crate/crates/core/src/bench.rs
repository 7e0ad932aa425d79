//! Benchmark harness: repeated solves over seeds with one summary row per run,
//! in the shape of the usual timing tables (wall time, longest path, average
//! Newton count per path, counts, accuracy statistics).

use serde::{Deserialize, Serialize};

use crate::diagcoeff::track_diag_coeff;
use crate::error::Result;
use crate::mep::MepInstance;
use crate::problems::{qmep_linearize, random_mep, random_qmep, recover_qmep_pair};
use crate::solver::{solve, SolveConfig, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BenchProblem {
    /// Random dense instance with the given block sizes.
    Random { dims: Vec<usize> },
    /// Linearized random quadratic two-parameter problem with n×n blocks.
    Qmep { n: usize },
}

impl BenchProblem {
    pub fn kind(&self) -> &'static str {
        match self {
            BenchProblem::Random { .. } => "random",
            BenchProblem::Qmep { .. } => "qmep",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            BenchProblem::Random { dims } => dims.len(),
            BenchProblem::Qmep { .. } => 2,
        }
    }

    /// Block sizes as written in tables, e.g. "3x3".
    pub fn dims_label(&self) -> String {
        let dims = match self {
            BenchProblem::Random { dims } => dims.clone(),
            BenchProblem::Qmep { n } => vec![*n, *n],
        };
        dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub kind: String,
    pub k: usize,
    pub dims: String,
    pub seed: u64,
    pub starts: usize,
    pub converged: usize,
    pub divergent: usize,
    pub eigenpairs: usize,
    /// Seconds for the whole solve.
    pub wall_time: f64,
    /// Longest single path in seconds.
    pub t_path: f64,
    /// Average Newton corrections per path.
    pub phi: f64,
    pub max_deviation: f64,
    pub eta_mean: f64,
    pub eta_max: f64,
    /// Largest relative quadratic residual of recovered QMEP eigenpairs.
    pub qmep_residual_max: Option<f64>,
    pub diag_starts: Option<usize>,
    pub diag_divergent: Option<usize>,
    pub error: Option<String>,
}

fn instance(problem: &BenchProblem, seed: u64) -> Result<(MepInstance, Option<crate::problems::QmepInstance>)> {
    Ok(match problem {
        BenchProblem::Random { dims } => (random_mep(dims.len(), dims, seed)?, None),
        BenchProblem::Qmep { n } => {
            let q = random_qmep(*n, *n, seed)?;
            (qmep_linearize(&q), Some(q))
        }
    })
}

fn summarize(row: &mut BenchRow, report: &SolveReport) {
    let etas: Vec<f64> = report.eigenpairs.iter().map(|p| p.diagnostics.backward_error).collect();
    row.starts = report.start_count;
    row.converged = report.converged;
    row.divergent = report.divergent;
    row.eigenpairs = report.eigenpairs.len();
    row.wall_time = report.wall_time;
    row.t_path = report.t_path;
    row.phi = report.newton_per_path();
    row.max_deviation = report.max_deviation;
    row.eta_max = report.max_backward_error;
    row.eta_mean = if etas.is_empty() { 0.0 } else { etas.iter().sum::<f64>() / etas.len() as f64 };
}

/// One solve of `problem` at `seed`; failures are recorded in the row.
pub fn bench_run(problem: &BenchProblem, seed: u64, cfg: &SolveConfig, compare_diag: bool) -> BenchRow {
    let mut row = BenchRow {
        kind: problem.kind().into(),
        k: problem.k(),
        dims: problem.dims_label(),
        seed,
        ..Default::default()
    };
    let (inst, qmep) = match instance(problem, seed) {
        Ok(v) => v,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match solve(&inst, &SolveConfig { seed, ..cfg.clone() }) {
        Ok(report) => {
            summarize(&mut row, &report);
            if let Some(q) = &qmep {
                row.qmep_residual_max = Some(
                    report
                        .eigenpairs
                        .iter()
                        .map(|p| {
                            let r = recover_qmep_pair(q, p);
                            r.residuals[0].max(r.residuals[1])
                        })
                        .fold(0.0, f64::max),
                );
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if compare_diag {
        let (start, paths) = track_diag_coeff(&inst, seed, &cfg.tracker, cfg.workers);
        row.diag_starts = Some(start.count());
        row.diag_divergent = Some(paths.iter().filter(|p| !p.converged()).count());
    }
    row
}

pub fn bench(problems: &[BenchProblem], seeds: &[u64], cfg: &SolveConfig, compare_diag: bool) -> Vec<BenchRow> {
    problems
        .iter()
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .map(|(p, s)| bench_run(p, s, cfg, compare_diag))
        .collect()
}

pub fn write_bench_csv<W: std::io::Write>(out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

/// Means over the rows of one (kind, dims) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub kind: String,
    pub dims: String,
    pub runs: usize,
    pub failed: usize,
    pub mean_wall_time: f64,
    pub mean_t_path: f64,
    pub mean_phi: f64,
    pub total_divergent: usize,
    pub max_deviation: f64,
    pub max_eta: f64,
}

pub fn summarize_rows(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut groups: Vec<(String, String, Vec<&BenchRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.kind && g.1 == r.dims) {
            Some(g) => g.2.push(r),
            None => groups.push((r.kind.clone(), r.dims.clone(), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(kind, dims, rs)| {
            let ok: Vec<&&BenchRow> = rs.iter().filter(|r| r.error.is_none()).collect();
            let mean = |f: fn(&BenchRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            BenchSummary {
                runs: rs.len(),
                failed: rs.len() - ok.len(),
                mean_wall_time: mean(|r| r.wall_time),
                mean_t_path: mean(|r| r.t_path),
                mean_phi: mean(|r| r.phi),
                total_divergent: ok.iter().map(|r| r.divergent).sum(),
                max_deviation: ok.iter().map(|r| r.max_deviation).fold(0.0, f64::max),
                max_eta: ok.iter().map(|r| r.eta_max).fold(0.0, f64::max),
                kind,
                dims,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_summary() {
        let problems = [BenchProblem::Random { dims: vec![2, 3] }, BenchProblem::Qmep { n: 2 }];
        let rows = bench(&problems, &[1, 2], &SolveConfig::default(), false);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.error.is_none() && r.divergent == 0));
        assert_eq!(rows[0].eigenpairs, 6);
        assert_eq!(rows[2].starts, 16);
        assert!(rows[2].qmep_residual_max.unwrap() < 1e-6);
        assert!(rows.iter().all(|r| r.phi > 0.0));
        let summary = summarize_rows(&rows);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[1].dims, "2x2");
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("kind,k,dims,seed,"));
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let row = bench_run(&BenchProblem::Random { dims: vec![2] }, 0, &SolveConfig::default(), false);
        assert!(row.error.is_some());
    }
}
