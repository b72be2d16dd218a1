//! Command-line front end: simulate systems, estimate ranks and spectra,
//! query the recoverability oracle, run experiment grids and fit linear
//! models to recorded data.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray_linalg::Eig;

use spectrace::estimators::{self, EstimatorConfig, Method};
use spectrace::eval;
use spectrace::hankel;
use spectrace::io;
use spectrace::recoverability;
use spectrace::systems::{
    build_from_jordan, difference_transform, observe, simulate_continuous, simulate_discrete,
    StepKind,
};
use spectrace::{Error, Result};

#[derive(Parser)]
#[command(name = "spectrace", version, about = "Eigenvalue recovery from partially observed dynamical systems")]
struct Cli {
    /// Cap the worker-thread count for parallel experiment grids.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a system from a spec JSON and write an observed trajectory CSV.
    Simulate(SimulateArgs),
    /// Estimate the number of recoverable eigenvalues from a trajectory CSV.
    Rank(RankArgs),
    /// Recover eigenvalues from a trajectory CSV.
    Estimate(EstimateArgs),
    /// Predict which eigenvalues a coordinate set can recover.
    Oracle(OracleArgs),
    /// Run a full experiment grid from a config JSON.
    Experiment(ExperimentArgs),
    /// Fit a one-step linear model to a snapshot CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// System spec JSON ({eigenvalues, blocks, U, b, c}).
    #[arg(long)]
    spec: PathBuf,
    /// Number of samples.
    #[arg(long, short)]
    m: usize,
    /// Observed coordinates, comma-separated 1-based indices.
    #[arg(long, value_delimiter = ',')]
    omega: Vec<usize>,
    /// Continuous-time sampling step (omit for discrete time).
    #[arg(long)]
    dt: Option<f64>,
    /// Apply the one-step difference transform before writing.
    #[arg(long)]
    difference: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Trajectory CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Hankel window length (default floor(M/2)).
    #[arg(long)]
    l: Option<usize>,
    /// Relative singular-value threshold for the absolute criterion.
    #[arg(long, default_value_t = 1e-8)]
    eps_rel: f64,
    /// Difference the series first.
    #[arg(long)]
    difference: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trajectory CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// prony_ls | prony_tls | mp_ls | mp_tls | mp_svd | esprit
    #[arg(long)]
    method: String,
    /// Number of eigenvalues, or "auto" to take it from the rank estimate.
    #[arg(long, default_value = "auto")]
    r: String,
    /// Hankel window length (default floor(M/2)).
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    eps_rel: f64,
    #[arg(long, default_value_t = 1e-8)]
    eta_rel: f64,
    #[arg(long, default_value_t = 1e-12)]
    pinv_rel: f64,
    /// Difference the series first.
    #[arg(long)]
    difference: bool,
    /// Map multipliers back through the principal logarithm (continuous data).
    #[arg(long)]
    map_log: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// System spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Observed coordinates, comma-separated 1-based indices.
    #[arg(long, value_delimiter = ',')]
    omega: Vec<usize>,
    /// Continuous-time step for the effective vector (omit for discrete).
    #[arg(long)]
    dt: Option<f64>,
    /// Use the raw initial state instead of the differencing vector.
    #[arg(long)]
    raw_initial: bool,
    /// Also test whether omega is universal (works for every initial vector).
    #[arg(long)]
    universal: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long, short)]
    config: PathBuf,
    /// Output path for the metrics CSV (JSON always goes to stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Snapshot matrix CSV (rows are consecutive states).
    #[arg(long, short)]
    input: PathBuf,
    /// Standardize channels to mean 0, std 1 first.
    #[arg(long)]
    normalize: bool,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::Singular(_) => "singular",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::InsufficientData(_) => "insufficient_data",
        Error::Numerical(_) => "numerical",
        Error::LinAlg(_) => "linear_algebra",
        Error::Shape(_) => "shape",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Err(e) = run(cli.command) {
        let obj = serde_json::json!({
            "error": { "kind": error_kind(&e), "message": e.to_string() }
        });
        eprintln!("{obj}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let (spec, b, c) = io::read_spec_file(&args.spec)?;
            let sys = build_from_jordan(&spec, b, c)?;
            let traj = match args.dt {
                Some(dt) => simulate_continuous(&sys, dt, args.m)?,
                None => simulate_discrete(&sys, args.m)?,
            };
            let mut series = observe(&traj, &args.omega)?;
            if args.difference {
                series = difference_transform(&series)?;
            }
            match args.output {
                Some(path) => io::write_trajectory_file(&series, &path)?,
                None => io::write_trajectory(&series, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Rank(args) => {
            let mut series = io::read_trajectory_file(&args.input)?;
            if args.difference {
                series = difference_transform(&series)?;
            }
            let l = args.l.unwrap_or_else(|| hankel::default_window(series.len()));
            let pair = hankel::build_hankel(&series, l)?;
            let est = hankel::estimate_rank(&pair, args.eps_rel)?;
            let criterion = match est.criterion_used {
                hankel::RankCriterion::Absolute => "absolute",
                hankel::RankCriterion::Quotient => "quotient",
                hankel::RankCriterion::Gap => "gap",
            };
            println!(
                "{}",
                serde_json::json!({
                    "r_hat": est.chosen,
                    "criterion": criterion,
                    "r_absolute": est.r_abs,
                    "r_quotient": est.r_quot,
                    "r_gap": est.r_gap,
                    "singular_values": est.singular_values,
                    "L": l,
                    "M": series.len(),
                })
            );
            Ok(())
        }
        Command::Estimate(args) => {
            let mut series = io::read_trajectory_file(&args.input)?;
            if args.difference {
                series = difference_transform(&series)?;
            }
            let method = Method::parse(&args.method)?;
            let r = match args.r.as_str() {
                "auto" => None,
                text => Some(text.parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("--r must be a positive integer or 'auto', got '{text}'"))
                })?),
            };
            let cfg = EstimatorConfig {
                l: args.l,
                r,
                eps_rel: args.eps_rel,
                eta_rel: args.eta_rel,
                pinv_rel: args.pinv_rel,
            };
            let mut est = estimators::estimate(&series, method, &cfg)?;
            if args.map_log {
                let dt = match series.step_kind() {
                    StepKind::Continuous { dt } => dt,
                    StepKind::Discrete => 1.0,
                };
                est = estimators::continuous_log_map(&est, dt)?;
            }
            println!("{}", io::estimate_to_json(&est, None, None));
            Ok(())
        }
        Command::Oracle(args) => {
            let (spec, b, c) = io::read_spec_file(&args.spec)?;
            let sys = build_from_jordan(&spec, b, c)?;
            let mode = match args.dt {
                Some(dt) => StepKind::Continuous { dt },
                None => StepKind::Discrete,
            };
            let v = if args.raw_initial {
                sys.initial_state().clone()
            } else if sys.is_homogeneous() && matches!(mode, StepKind::Discrete) {
                sys.initial_state().clone()
            } else {
                recoverability::effective_vector(&sys, mode)?
            };
            let report = recoverability::recoverable_set_jordan(&spec, &v, &args.omega)?;
            let mut json = io::report_to_json(&report);
            if args.universal {
                let cert = recoverability::is_universal(&spec, &args.omega)?;
                json["universal"] = serde_json::json!({
                    "universal": cert.universal,
                    "krylov_criterion": cert.krylov_criterion,
                    "krylov_rank": cert.krylov_rank,
                    "span_criterion": cert.span_criterion,
                    "disagreement": cert.disagreement,
                });
            }
            println!("{json}");
            Ok(())
        }
        Command::Experiment(args) => {
            let config: eval::ExperimentConfig =
                serde_json::from_reader(std::fs::File::open(&args.config)?)?;
            let rows = eval::run_experiment(&config)?;
            let csv_path = args.output.clone().or_else(|| config.output.clone());
            if let Some(path) = csv_path {
                std::fs::write(&path, eval::rows_to_csv(&rows)?)?;
            }
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(())
        }
        Command::Fit(args) => {
            let mut snapshots = io::read_matrix_csv_file(&args.input)?;
            let mut constant_channels = Vec::new();
            if args.normalize {
                let normalized = eval::normalize_columns(&snapshots);
                snapshots = normalized.data;
                constant_channels = normalized.constant_channels;
            }
            let fit = eval::fit_linear_system(&snapshots)?;
            let a_c = fit.a.mapv(|x| ndarray_linalg::c64::new(x, 0.0));
            let (vals, _) = a_c.eig()?;
            let eigenvalues: Vec<serde_json::Value> =
                vals.iter().map(|z| serde_json::json!({"re": z.re, "im": z.im})).collect();
            let a_rows: Vec<Vec<f64>> =
                fit.a.rows().into_iter().map(|r| r.to_vec()).collect();
            println!(
                "{}",
                serde_json::json!({
                    "A": a_rows,
                    "residual_rel": fit.residual_rel,
                    "rank_deficient": fit.rank_deficient,
                    "eigenvalues": eigenvalues,
                    "constant_channels": constant_channels,
                })
            );
            Ok(())
        }
    }
}
