use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphere_descent::harness::{
    self, CriticalParams, ExperimentConfig, FluctuationParams, PrIdentityParams, Problem, ProjectionParams, Table,
    VolumeParams,
};
use sphere_descent::Error;

#[derive(Parser)]
#[command(
    name = "sphere-descent",
    version,
    about = "Riemannian gradient descent experiments on the sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded runs on the separable objective.
    RunSep(RunArgs),
    /// Seeded dictionary-learning runs.
    RunDl(RunArgs),
    /// Seeded population phase-retrieval runs.
    RunPr(RunArgs),
    /// Monte Carlo volume of the section C_zeta.
    ProbeVolume(VolumeArgs),
    /// Separable projection along u at points on the boundary of C_zeta.
    ProbeProjection(ProjectionArgs),
    /// Finite-sample deviation of the dictionary-learning projection.
    ProbeFluctuation(FluctuationArgs),
    /// Enumerate and classify the separable critical points.
    ProbeCritical(CriticalArgs),
    /// Check the exact phase-retrieval step recurrences along a trajectory.
    ProbePrIdentities(PrIdentityArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides seed_base.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    save_traces: bool,
    /// Exit with status 3 when the success gate fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ProbeOut {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VolumeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "zeta", value_delimiter = ',', default_value = "0")]
    zetas: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[command(flatten)]
    out: ProbeOut,
}

#[derive(Args)]
struct ProjectionArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    mu: f64,
    #[arg(long = "zeta", value_delimiter = ',', default_value = "0.1,0.5,1")]
    zetas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[command(flatten)]
    out: ProbeOut,
}

#[derive(Args)]
struct FluctuationArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    mu: f64,
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    #[arg(long = "p", value_delimiter = ',', default_value = "100,1000,10000")]
    p_list: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 200_000)]
    reference_samples: usize,
    #[command(flatten)]
    out: ProbeOut,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    mu: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PrIdentityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Step size in units of 1/|x|^2.
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[command(flatten)]
    out: ProbeOut,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalAbort { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn run(problem: Problem, args: RunArgs) -> Result<(), Failure> {
    let mut raw = ExperimentConfig::from_path(&args.config)?;
    match raw.problem {
        Some(p) if p != problem => {
            return Err(Failure::Usage(format!("config is for {p:?}, not {problem:?}")));
        }
        _ => raw.problem = Some(problem),
    }
    if let Some(seed) = args.seed {
        raw.seed_base = Some(seed);
    }
    let out = args
        .out
        .or_else(|| raw.output_dir.clone())
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set output_dir".into()))?;
    let save_traces = args.save_traces || raw.save_traces.unwrap_or(false);
    let cfg = raw.resolve()?;
    let batch = harness::run_batch(&cfg, args.jobs, save_traces)?;
    batch.write(&out)?;
    let agg = &batch.aggregates;
    println!(
        "{} runs, success {:.4} ± {:.4}, median iterations {}, summary in {}",
        agg.runs,
        agg.success_fraction.mean,
        agg.success_fraction.std_error,
        agg.iterations_median,
        out.join("summary.json").display()
    );
    if batch.any_numerical_abort() {
        return Err(Failure::Numerical(format!(
            "{} runs aborted on non-finite values",
            agg.numerical_aborts
        )));
    }
    if args.check && !batch.gate.passed {
        return Err(Failure::Gate(format!(
            "gate failed: {} (observed {:.4}, threshold {:.4})",
            batch.gate.rule, batch.gate.observed, batch.gate.threshold
        )));
    }
    Ok(())
}

fn emit(table: &Table, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, table.to_csv()).map_err(|e| Failure::Usage(e.to_string())),
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RunSep(a) => run(Problem::Separable, a),
        Command::RunDl(a) => run(Problem::Dictionary, a),
        Command::RunPr(a) => run(Problem::PhaseRetrieval, a),
        Command::ProbeVolume(a) => {
            let t = harness::probe_volume(&VolumeParams {
                n: a.n,
                zetas: a.zetas,
                samples: a.samples,
                seed: a.out.seed,
            })?;
            emit(&t, a.out.out.as_deref())
        }
        Command::ProbeProjection(a) => {
            let t = harness::probe_projection(&ProjectionParams {
                n: a.n,
                mu: a.mu,
                zetas: a.zetas,
                samples: a.samples,
                seed: a.out.seed,
            })?;
            emit(&t, a.out.out.as_deref())
        }
        Command::ProbeFluctuation(a) => {
            if a.n < 2 {
                return Err(Failure::Usage("n must be at least 2".into()));
            }
            let t = harness::probe_fluctuation(&FluctuationParams {
                n: a.n,
                mu: a.mu,
                theta: a.theta,
                zeta: a.zeta,
                p_list: a.p_list,
                trials: a.trials,
                reference_samples: a.reference_samples,
                seed: a.out.seed,
            })?;
            emit(&t, a.out.out.as_deref())
        }
        Command::ProbeCritical(a) => {
            let t = harness::probe_critical(&CriticalParams { n: a.n, mu: a.mu })?;
            emit(&t, a.out.as_deref())
        }
        Command::ProbePrIdentities(a) => {
            let t = harness::probe_pr_identities(&PrIdentityParams {
                n: a.n,
                steps: a.steps,
                eta: a.eta,
                seed: a.out.seed,
            })?;
            emit(&t, a.out.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical abort: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Gate(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}
