//! `fibermep` command-line tool.
//!
//! Exit codes: 0 when every path converged and every certificate passed,
//! 1 when the run completed but is not healthy, 2 on errors (with a JSON
//! error object on stderr).

mod args;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use fibermep::bench::{bench, summarize_rows, write_bench_csv, BenchProblem};
use fibermep::diagcoeff::track_diag_coeff;
use fibermep::matching::match_sets;
use fibermep::oracle::delta_solve;
use fibermep::problems::{instance_to_json, recover_qmep_pair};
use fibermep::report::{to_json, write_certify_csv, write_condition_csv, write_eigenpair_csv, write_trace_csv};
use fibermep::{solve, CVec, Error, MepInstance, Result, SolveConfig, SolveReport};
use serde_json::{json, Value};

use args::{BenchArgs, Cli, Command, CompareArgs, ConditionArgs, GenArgs, Problem, RunCommon, SolveArgs};

/// Largest optimal-matching distance accepted against the Delta method.
const DELTA_MATCH_TOL: f64 = 1e-6;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Condition(a) => cmd_condition(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::from(2)
        }
    }
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_summary(summary: &Value) {
    let text = serde_json::to_string_pretty(summary).expect("summaries serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn summary(report: &SolveReport, problem: &Problem) -> Value {
    let mut s = json!({
        "k": report.k,
        "dims": report.dims,
        "seed": report.seed,
        "starts": report.start_count,
        "converged": report.converged,
        "divergent": report.divergent,
        "eigenpairs": report.eigenpairs.len(),
        "clustered": report.clustered,
        "max_backward_error": report.max_backward_error,
        "max_deviation": report.max_deviation,
        "healthy": report.healthy(),
        "wall_time": report.wall_time,
    });
    if let Problem::Qmep(q, _) = problem {
        let worst = report
            .eigenpairs
            .iter()
            .map(|p| {
                let r = recover_qmep_pair(q, p);
                r.residuals[0].max(r.residuals[1])
            })
            .fold(0.0, f64::max);
        s["qmep_residual_max"] = json!(worst);
    }
    s
}

/// Solve and write report.json plus eigenpairs.csv.
fn run_and_write(common: &RunCommon, cfg: &SolveConfig) -> Result<(Problem, SolveReport)> {
    let problem = common.instance.load()?;
    let report = solve(problem.instance(), cfg)?;
    let dir = out_dir(&common.out)?;
    write_text(&dir.join("report.json"), &to_json(&report))?;
    write_csv(&dir.join("eigenpairs.csv"), |w| write_eigenpair_csv(w, report.k, &report.eigenpairs))?;
    Ok((problem, report))
}

fn delta_comparison(inst: &MepInstance, report: &SolveReport) -> (Value, bool) {
    match delta_solve(inst) {
        Ok(pairs) => {
            let computed: Vec<CVec> = report.eigenpairs.iter().map(|p| p.lambda.clone()).collect();
            let reference: Vec<CVec> = pairs.into_iter().map(|p| p.lambda).collect();
            let m = match_sets(&computed, &reference);
            let pass = m.unmatched_computed.is_empty() && m.unmatched_reference.is_empty() && m.max_relative < DELTA_MATCH_TOL;
            let value = json!({
                "oracle_eigenpairs": reference.len(),
                "solver_eigenpairs": computed.len(),
                "max_relative_distance": m.max_relative,
                "unmatched_solver": m.unmatched_computed,
                "unmatched_oracle": m.unmatched_reference,
                "agree": pass,
            });
            (value, pass)
        }
        Err(e) => (json!({ "declined": e.to_string() }), false),
    }
}

fn diag_comparison(inst: &MepInstance, cfg: &SolveConfig) -> Value {
    let (start, paths) = track_diag_coeff(inst, cfg.seed, &cfg.tracker, cfg.workers);
    let converged = paths.iter().filter(|p| p.converged()).count();
    json!({
        "starts": start.count(),
        "converged": converged,
        "divergent": paths.len() - converged,
    })
}

fn cmd_solve(a: &SolveArgs) -> Result<bool> {
    let cfg = SolveConfig {
        trace_paths: a.trace_paths,
        alpha: a.certify,
        kappa: a.condition || a.trace_kappa,
        kappa_trace: a.trace_kappa,
        ..a.common.solve_config()?
    };
    let (problem, report) = run_and_write(&a.common, &cfg)?;
    let dir = &a.common.out;
    if cfg.alpha {
        write_csv(&dir.join("certify.csv"), |w| write_certify_csv(w, report.k, &report.eigenpairs))?;
    }
    if cfg.kappa {
        write_csv(&dir.join("condition.csv"), |w| write_condition_csv(w, report.k, &report.eigenpairs))?;
    }
    if cfg.trace_paths {
        let paths_dir = dir.join("paths");
        out_dir(&paths_dir)?;
        for p in &report.paths {
            let name: Vec<String> = p.start_index.iter().map(|i| i.to_string()).collect();
            write_csv(&paths_dir.join(format!("path_{}.csv", name.join("_"))), |w| write_trace_csv(w, p))?;
        }
    }
    let mut s = summary(&report, &problem);
    if cfg.alpha {
        s["certified"] = json!(certified_count(&report));
    }
    if a.compare_delta || a.compare_diag {
        let mut compare = json!({});
        if a.compare_delta {
            compare["delta"] = delta_comparison(problem.instance(), &report).0;
        }
        if a.compare_diag {
            compare["diag"] = diag_comparison(problem.instance(), &cfg);
        }
        write_text(&dir.join("compare.json"), &serde_json::to_string_pretty(&compare).expect("serializable"))?;
        s["compare"] = compare;
    }
    print_summary(&s);
    Ok(report.healthy())
}

fn certified_count(report: &SolveReport) -> usize {
    report
        .eigenpairs
        .iter()
        .filter(|p| p.diagnostics.alpha.is_some_and(|a| a.certified))
        .count()
}

fn cmd_certify(a: &RunCommon) -> Result<bool> {
    let cfg = SolveConfig { alpha: true, ..a.solve_config()? };
    let (problem, report) = run_and_write(a, &cfg)?;
    write_csv(&a.out.join("certify.csv"), |w| write_certify_csv(w, report.k, &report.eigenpairs))?;
    let mut s = summary(&report, &problem);
    let certified = certified_count(&report);
    s["certified"] = json!(certified);
    s["certified_fraction"] = json!(certified as f64 / report.eigenpairs.len().max(1) as f64);
    print_summary(&s);
    Ok(report.healthy())
}

fn cmd_condition(a: &ConditionArgs) -> Result<bool> {
    let cfg = SolveConfig { kappa: true, kappa_trace: a.trace_kappa, ..a.common.solve_config()? };
    let (problem, report) = run_and_write(&a.common, &cfg)?;
    write_csv(&a.common.out.join("condition.csv"), |w| write_condition_csv(w, report.k, &report.eigenpairs))?;
    let kfp: Vec<f64> = report.eigenpairs.iter().filter_map(|p| p.diagnostics.kappa_fp).collect();
    let mut s = summary(&report, &problem);
    s["kappa_fp_min"] = json!(kfp.iter().copied().fold(f64::INFINITY, f64::min));
    s["kappa_fp_max"] = json!(kfp.iter().copied().fold(0.0, f64::max));
    if a.trace_kappa {
        let trace_max = report
            .eigenpairs
            .iter()
            .filter_map(|p| p.diagnostics.kappa_trace.as_ref())
            .flatten()
            .map(|s| s.kappa)
            .fold(0.0, f64::max);
        // +∞ is not representable in JSON numbers
        s["kappa_trace_max"] = if trace_max.is_finite() { json!(trace_max) } else { json!("inf") };
    }
    print_summary(&s);
    Ok(report.healthy())
}

fn cmd_compare(a: &CompareArgs) -> Result<bool> {
    let cfg = a.common.solve_config()?;
    let (problem, report) = run_and_write(&a.common, &cfg)?;
    let mut compare = json!({
        "fiber": { "starts": report.start_count, "converged": report.converged, "divergent": report.divergent },
    });
    let mut pass = report.healthy();
    if a.delta || !a.diag {
        let (value, agree) = delta_comparison(problem.instance(), &report);
        compare["delta"] = value;
        pass &= agree;
    }
    if a.diag {
        compare["diag"] = diag_comparison(problem.instance(), &cfg);
    }
    write_text(&a.common.out.join("compare.json"), &serde_json::to_string_pretty(&compare).expect("serializable"))?;
    print_summary(&compare);
    Ok(pass)
}

fn cmd_bench(a: &BenchArgs) -> Result<bool> {
    if a.kind.qmep && a.k != 2 {
        return Err(Error::InvalidConfig("--qmep benchmarks have k = 2".into()));
    }
    let problems: Vec<BenchProblem> = a
        .n
        .iter()
        .map(|&n| if a.kind.qmep { BenchProblem::Qmep { n } } else { BenchProblem::Random { dims: vec![n; a.k] } })
        .collect();
    let seeds: Vec<u64> = (a.first_seed..a.first_seed + a.seeds).collect();
    let cfg = SolveConfig { tracker: a.tracker.config(), workers: a.workers, ..SolveConfig::default() };
    cfg.validate()?;
    let rows = bench(&problems, &seeds, &cfg, a.compare_diag);
    let dir = out_dir(&a.out)?;
    write_csv(&dir.join("bench.csv"), |w| write_bench_csv(w, &rows))?;
    let summary = serde_json::to_value(summarize_rows(&rows)).expect("summaries serialize");
    write_text(&dir.join("bench_summary.json"), &serde_json::to_string_pretty(&summary).expect("serializable"))?;
    print_summary(&summary);
    Ok(rows.iter().all(|r| r.error.is_none() && r.divergent == 0))
}

fn cmd_gen(a: &GenArgs) -> Result<bool> {
    let problem = a.instance.load()?;
    let text = instance_to_json(problem.instance());
    match &a.output {
        Some(path) => write_text(path, &text)?,
        None => {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    Ok(true)
}
