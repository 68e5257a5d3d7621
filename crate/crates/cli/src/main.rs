//! Command-line runner: `rdsir {simulate, optimize, sweep}` over a preset or
//! a JSON configuration file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 optimizer non-convergence (results are still written), 1 other I/O.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdsir_core::report::exit_code_for;
use rdsir_core::{preset, run_experiment, ExperimentConfig, InitMode, Mode, RunOutcome};

#[derive(Parser)]
#[command(
    name = "rdsir",
    about = "Reaction-diffusion SIR epidemics with noncompliance: simulation and optimal control",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward simulation with constant controls (uncontrolled by default).
    Simulate(RunArgs),
    /// Projected gradient descent for the optimal control maps.
    Optimize(RunArgs),
    /// A family of optimizations over one cost weight, collated into sweep.csv.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Named preset (see `--preset help` for the list).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON configuration file; missing keys fall back to the baseline.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random control initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Square grid resolution override.
    #[arg(long)]
    nx: Option<usize>,
    /// Time step override.
    #[arg(long)]
    dt: Option<f64>,
    /// Control initialization mode.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Maximum number of sweep members run concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Midpoint,
    Uncontrolled,
}

impl From<InitArg> for InitMode {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Random => InitMode::Random,
            InitArg::Midpoint => InitMode::Midpoint,
            InitArg::Uncontrolled => InitMode::Uncontrolled,
        }
    }
}

fn load(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig, rdsir_core::CoreError> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => rdsir_core::load_config(path)?,
        (None, None) => Err(rdsir_core::CoreError::Validation {
            field: "--preset/--config".into(),
            message: "exactly one of --preset or --config is required".into(),
        })?,
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    cfg.mode = mode;
    if let Some(out) = &args.out {
        cfg.outputs.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = args.seed {
        cfg.optim.seed = seed;
    }
    if let Some(nx) = args.nx {
        cfg.grid.nx = nx;
        if cfg.grid.dim == 2 {
            cfg.grid.ny = nx;
        }
    }
    if let Some(dt) = args.dt {
        cfg.time.dt = dt;
    }
    if let Some(init) = args.init {
        cfg.optim.init = init.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, quiet: bool) -> Result<ExitCode, rdsir_core::CoreError> {
    if !quiet {
        let mode = match cfg.mode {
            Mode::Simulate => "simulate",
            Mode::Optimize => "optimize",
            Mode::Sweep => "sweep",
        };
        eprintln!(
            "rdsir {mode}: grid {}x{}, T = {}, dt = {} -> {}",
            cfg.grid.nx, cfg.grid.ny, cfg.time.t_final, cfg.time.dt, cfg.outputs.dir
        );
    }
    let outcome = run_experiment(cfg)?;
    match &outcome {
        RunOutcome::Single(summary) => {
            if !quiet {
                eprintln!(
                    "J = {:.6} (I {:.4}, N* {:.4}, C {:.4})",
                    summary.cost.j_total,
                    summary.cost.i_total,
                    summary.cost.n_star_total,
                    summary.cost.c_total
                );
                if let Some(j_unc) = summary.j_uncontrolled {
                    eprintln!(
                        "uncontrolled J = {:.6}, RelCR = {:.2}%, {} iterations, converged: {}",
                        j_unc, summary.relcr_percent, summary.iterations, summary.converged
                    );
                }
            }
            if cfg.mode == Mode::Optimize && !summary.converged {
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        RunOutcome::Sweep(rows) => {
            if !quiet {
                for row in rows {
                    eprintln!(
                        "value {:>8}: J_unc = {:.6}, J_opt = {:.6}, RelCR = {:.2}%",
                        row.value, row.j_uncontrolled, row.j_optimal, row.relcr_percent
                    );
                }
            }
            if rows.iter().any(|r| !r.converged) {
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, mode, jobs) = match &cli.command {
        Command::Simulate(a) => (a, Mode::Simulate, None),
        Command::Optimize(a) => (a, Mode::Optimize, None),
        Command::Sweep(s) => (&s.run, Mode::Sweep, s.jobs),
    };
    let cfg = match load(args, mode) {
        Ok(mut cfg) => {
            if let Some(jobs) = jobs {
                cfg.sweep.jobs = jobs;
                if let Err(e) = cfg.validate() {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e) as u8);
                }
            }
            cfg
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };
    match execute(&cfg, args.quiet) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
