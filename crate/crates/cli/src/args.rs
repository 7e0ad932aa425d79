//! Command-line surface. Everything here is validated into library types
//! before any computation starts.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fibermep::problems::{load_instance, qmep_linearize, random_mep, random_qmep, QmepInstance};
use fibermep::{Error, MepInstance, Result, SolveConfig, TrackerConfig};

#[derive(Debug, Parser)]
#[command(name = "fibermep", version, about = "Multiparameter eigenvalue problems by fiber product homotopy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance; writes report.json and eigenpairs.csv.
    Solve(SolveArgs),
    /// Solve and α-certify every eigenpair; writes certify.csv.
    Certify(RunCommon),
    /// Solve and compute condition numbers; writes condition.csv.
    Condition(ConditionArgs),
    /// Cross-check the solver against the Delta method and/or the diagonal
    /// coefficient homotopy; writes compare.json.
    Compare(CompareArgs),
    /// Repeated solves over seeds; writes bench.csv and bench_summary.json.
    Bench(BenchArgs),
    /// Write a random instance as JSON.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct Source {
    /// Read the instance from a JSON file.
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    /// Random dense instance with complex Gaussian coefficients.
    #[arg(long)]
    pub random: bool,
    /// Linearized random quadratic two-parameter problem.
    #[arg(long)]
    pub qmep: bool,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub source: Source,
    /// Number of parameters (random instances).
    #[arg(long)]
    pub k: Option<usize>,
    /// Block size used for every block.
    #[arg(long)]
    pub n: Option<usize>,
    /// Explicit block sizes, e.g. 3,4 (random instances).
    #[arg(long, value_delimiter = ',', conflicts_with = "n")]
    pub dims: Option<Vec<usize>>,
    /// Seed for the instance and for the solver's random choices.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub enum Problem {
    Plain(MepInstance),
    Qmep(QmepInstance, MepInstance),
}

impl Problem {
    pub fn instance(&self) -> &MepInstance {
        match self {
            Problem::Plain(i) | Problem::Qmep(_, i) => i,
        }
    }
}

impl InstanceArgs {
    pub fn load(&self) -> Result<Problem> {
        if let Some(path) = &self.source.file {
            if self.k.is_some() || self.n.is_some() || self.dims.is_some() {
                return Err(Error::InvalidConfig("--k, --n and --dims do not apply to --file".into()));
            }
            return Ok(Problem::Plain(load_instance(path)?));
        }
        if self.source.qmep {
            if self.k.is_some_and(|k| k != 2) || self.dims.is_some() {
                return Err(Error::InvalidConfig("--qmep takes --n only (k is 2)".into()));
            }
            let n = self.n.unwrap_or(2);
            let q = random_qmep(n, n, self.seed)?;
            let inst = qmep_linearize(&q);
            return Ok(Problem::Qmep(q, inst));
        }
        let k = self.k.unwrap_or(2);
        let dims = match &self.dims {
            Some(d) => d.clone(),
            None => vec![self.n.unwrap_or(3); k],
        };
        if dims.len() != k {
            return Err(Error::InvalidConfig(format!("--dims lists {} sizes for k = {k}", dims.len())));
        }
        Ok(Problem::Plain(random_mep(k, &dims, self.seed)?))
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrackerArgs {
    #[arg(long)]
    pub h_init: Option<f64>,
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub h_min: Option<f64>,
    /// Corrector tolerance on ‖Δ‖_∞ (scaled by max(1, ‖z‖_∞)).
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub max_newton: Option<usize>,
    /// Newton budget at t = 1 (default max(20, k·max n_i + 5)).
    #[arg(long)]
    pub endgame_iters: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub divergence_cap: Option<f64>,
    #[arg(long)]
    pub endpoint_tol: Option<f64>,
}

impl TrackerArgs {
    pub fn config(&self) -> TrackerConfig {
        let d = TrackerConfig::default();
        TrackerConfig {
            h_init: self.h_init.unwrap_or(d.h_init),
            h_max: self.h_max.unwrap_or(d.h_max),
            h_min: self.h_min.unwrap_or(d.h_min),
            newton_tol: self.newton_tol.unwrap_or(d.newton_tol),
            max_newton_per_step: self.max_newton.unwrap_or(d.max_newton_per_step),
            endgame_max_iters: self.endgame_iters.or(d.endgame_max_iters),
            divergence_norm_cap: self.divergence_cap.unwrap_or(d.divergence_norm_cap),
            max_total_steps: self.max_steps.unwrap_or(d.max_total_steps),
            endpoint_residual_tol: self.endpoint_tol.unwrap_or(d.endpoint_residual_tol),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunCommon {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    /// Worker threads for path tracking (0 = all cores). Results do not
    /// depend on it.
    #[arg(long, env = "FIBERMEP_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Newton corrections at t = 1 before diagnostics.
    #[arg(long, default_value_t = 1)]
    pub polish: usize,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "fibermep-out")]
    pub out: PathBuf,
}

impl RunCommon {
    pub fn solve_config(&self) -> Result<SolveConfig> {
        let cfg = SolveConfig {
            seed: self.instance.seed,
            tracker: self.tracker.config(),
            workers: self.workers,
            polish_steps: self.polish,
            ..SolveConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: RunCommon,
    /// Record every accepted step; writes paths/path_<index>.csv.
    #[arg(long)]
    pub trace_paths: bool,
    /// Also α-certify (certify.csv).
    #[arg(long)]
    pub certify: bool,
    /// Also compute condition numbers (condition.csv).
    #[arg(long)]
    pub condition: bool,
    /// Sample κ along every path at t = 0, 0.1, …, 1 (implies --condition).
    #[arg(long)]
    pub trace_kappa: bool,
    /// Compare against the Delta method (k = 2 only).
    #[arg(long)]
    pub compare_delta: bool,
    /// Also run the diagonal coefficient homotopy and report its path counts.
    #[arg(long)]
    pub compare_diag: bool,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub common: RunCommon,
    /// Sample κ along every path at t = 0, 0.1, …, 1.
    #[arg(long)]
    pub trace_kappa: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: RunCommon,
    /// Delta method comparison (the default when no comparison is named).
    #[arg(long)]
    pub delta: bool,
    /// Diagonal coefficient homotopy comparison.
    #[arg(long)]
    pub diag: bool,
}

#[derive(Debug, Args)]
#[group(id = "kind", required = true, multiple = false)]
pub struct BenchKind {
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub qmep: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub kind: BenchKind,
    /// Number of parameters for random instances.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Block sizes to sweep, e.g. 3,4,5.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub n: Vec<usize>,
    /// Number of seeds per size.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    /// Also run the diagonal coefficient homotopy on every instance.
    #[arg(long)]
    pub compare_diag: bool,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    #[arg(long, env = "FIBERMEP_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[arg(long, value_name = "DIR", default_value = "fibermep-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Destination file (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}
