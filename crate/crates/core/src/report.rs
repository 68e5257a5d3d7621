//! Experiment execution and artifact emission: time series CSV, heatmap
//! snapshots (ASCII PGM plus raw CSV matrices), and a JSON run summary.
//!
//! All numeric output is written with 17 significant digits and fixed
//! ordering, so reruns with equal seed and configuration are byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bundles::StateField;
use crate::config::{ExperimentConfig, Mode, SweepParameter};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::forward::simulate_forward_observed;
use crate::objective::{evaluate_cost, relative_cost_reduction, CostBreakdown};
use crate::optimizer::optimize;
use crate::oracles::Problem;
use crate::trajectory::{ControlTrajectory, StateTrajectory};

/// Run summary serialized to `summary.json`. Contains no wall-clock data, so
/// deterministic runs serialize identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub cost: CostBreakdown,
    /// Cost of the uncontrolled reference (optimize and sweep runs).
    pub j_uncontrolled: Option<f64>,
    /// Relative cost reduction against the uncontrolled reference, percent.
    pub relcr_percent: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stationarity: Option<f64>,
    pub cost_history: Vec<CostBreakdown>,
    pub change_history: Vec<f64>,
    /// Minimum state value seen over all frames of the reported run.
    pub min_state_value: f64,
    pub config: ExperimentConfig,
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub j_uncontrolled: f64,
    pub j_optimal: f64,
    pub relcr_percent: f64,
    /// Not part of the CSV; drives the process exit code.
    #[serde(skip)]
    pub converged: bool,
}

/// Outcome of `run_experiment`.
#[derive(Debug)]
pub enum RunOutcome {
    Single(Box<Summary>),
    Sweep(Vec<SweepRow>),
}

impl RunOutcome {
    pub fn summary(&self) -> Option<&Summary> {
        match self {
            RunOutcome::Single(s) => Some(s),
            RunOutcome::Sweep(_) => None,
        }
    }
}

/// Runs the configured experiment and writes its artifact bundle under
/// `config.outputs.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Simulate => run_single(cfg, false).map(|s| RunOutcome::Single(Box::new(s))),
        Mode::Optimize => run_single(cfg, true).map(|s| RunOutcome::Single(Box::new(s))),
        Mode::Sweep => run_sweep(cfg).map(RunOutcome::Sweep),
    }
}

fn run_single(cfg: &ExperimentConfig, optimize_mode: bool) -> Result<Summary> {
    let problem = cfg.build_problem()?;
    let out_dir = PathBuf::from(&cfg.outputs.dir);
    fs::create_dir_all(&out_dir)?;

    let summary = if optimize_mode {
        let optim_cfg = cfg.build_optim()?;
        let result = optimize(
            &optim_cfg,
            &problem.params,
            &problem.weights,
            &problem.y0,
            problem.time,
            &problem.opts,
        )?;

        // Uncontrolled reference for the relative cost reduction.
        let u_ref = ControlTrajectory::uncontrolled(problem.grid, problem.time, &problem.params);
        let ref_traj = crate::forward::simulate_forward(
            &problem.y0,
            &u_ref,
            &problem.params,
            problem.time,
            &problem.opts,
        )?;
        let j_unc = evaluate_cost(&ref_traj, &u_ref, &problem.weights).j_total;
        let cost = *result.final_cost();
        let relcr = relative_cost_reduction(j_unc, cost.j_total)?;

        let (traj, snapshots) = resimulate_with_snapshots(&problem, &result.controls, cfg)?;
        write_timeseries(&out_dir, &traj, &result.controls, cfg.outputs.normalize)?;
        write_snapshots(&out_dir, &result.controls, &snapshots)?;

        Summary {
            schema_version: cfg.schema_version,
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: cfg.mode,
            seed: optim_cfg.seed,
            cost,
            j_uncontrolled: Some(j_unc),
            relcr_percent: 100.0 * relcr,
            iterations: result.iterations,
            converged: result.converged,
            stationarity: Some(result.stationarity),
            cost_history: result.cost_history.clone(),
            change_history: result.change_history.clone(),
            min_state_value: traj.min_value().min(result.states.min_value()),
            config: cfg.clone(),
        }
    } else {
        let [alpha, mu, nu] = cfg.controls.values(&problem.params);
        let controls = ControlTrajectory::constant(problem.grid, problem.time, alpha, mu, nu);
        let (traj, snapshots) = resimulate_with_snapshots(&problem, &controls, cfg)?;
        let cost = evaluate_cost(&traj, &controls, &problem.weights);
        write_timeseries(&out_dir, &traj, &controls, cfg.outputs.normalize)?;
        write_snapshots(&out_dir, &controls, &snapshots)?;

        Summary {
            schema_version: cfg.schema_version,
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: cfg.mode,
            seed: cfg.optim.seed,
            cost,
            j_uncontrolled: None,
            // A plain simulation is its own reference.
            relcr_percent: 0.0,
            iterations: 0,
            converged: true,
            stationarity: None,
            cost_history: vec![cost],
            change_history: Vec::new(),
            min_state_value: traj.min_value(),
            config: cfg.clone(),
        }
    };

    write_summary(&out_dir, &summary)?;
    Ok(summary)
}

fn resimulate_with_snapshots(
    problem: &Problem,
    controls: &ControlTrajectory,
    cfg: &ExperimentConfig,
) -> Result<(StateTrajectory, Vec<(f64, usize, StateField)>)> {
    let mut wanted: Vec<(usize, f64)> = cfg
        .outputs
        .snapshot_times
        .iter()
        .map(|&t| (problem.time.nearest_level(t), t))
        .collect();
    wanted.sort_by_key(|(l, _)| *l);
    wanted.dedup_by_key(|(l, _)| *l);

    let mut snapshots = Vec::with_capacity(wanted.len());
    let traj = simulate_forward_observed(
        &problem.y0,
        controls,
        &problem.params,
        problem.time,
        &problem.opts,
        |level, frame| {
            if let Some(&(_, t)) = wanted.iter().find(|(l, _)| *l == level) {
                snapshots.push((t, level, frame.clone()));
            }
        },
    )?;
    Ok((traj, snapshots))
}

fn format_full(x: f64) -> String {
    format!("{:.16e}", x)
}

fn format_time_label(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Writes `timeseries.csv`: one row per time level with the aggregated
/// populations and control masses. RFC 4180 formatting (CRLF, header row).
fn write_timeseries(
    out_dir: &Path,
    traj: &StateTrajectory,
    controls: &ControlTrajectory,
    normalize: bool,
) -> Result<()> {
    let time = traj.time();
    let mut text = String::new();
    text.push_str(
        "time,susceptible_total,infected_total,compliant_total,noncompliant_total,alpha_l1,mu_l1,nu_l1\r\n",
    );
    // Constant control storage: the per-level masses never change.
    let constant_controls = (!controls.is_dense()).then(|| {
        let f = controls.frame(0);
        [
            f.alpha().integral(),
            f.mu().integral(),
            f.nu().integral(),
        ]
    });
    for level in 0..time.n_levels() {
        let ints = traj.integrals()[level];
        let susceptible = ints[0] + ints[3];
        let infected = ints[1] + ints[4];
        let compliant = ints[0] + ints[1] + ints[2];
        let noncompliant = ints[3] + ints[4] + ints[5];
        let total = compliant + noncompliant;
        let scale = if normalize && total > 0.0 {
            1.0 / total
        } else {
            1.0
        };
        let [a_l1, m_l1, n_l1] = match constant_controls {
            Some(v) => v,
            None => {
                let f = controls.frame(level);
                [
                    f.alpha().integral(),
                    f.mu().integral(),
                    f.nu().integral(),
                ]
            }
        };
        let row = [
            time.time(level),
            susceptible * scale,
            infected * scale,
            compliant * scale,
            noncompliant * scale,
            a_l1,
            m_l1,
            n_l1,
        ];
        let cells: Vec<String> = row.iter().map(|v| format_full(*v)).collect();
        text.push_str(&cells.join(","));
        text.push_str("\r\n");
    }
    fs::write(out_dir.join("timeseries.csv"), text)?;
    Ok(())
}

/// Writes one field as ASCII P2 PGM (min-max scaled to 0..255), a sidecar
/// JSON with the scale, and the raw values as a CSV matrix. Rows run from
/// the top of the domain down (j descending); columns are i ascending.
fn write_field_artifacts(dir: &Path, stem: &str, field: &Field) -> Result<()> {
    let grid = field.grid();
    let (min, max) = (field.min(), field.max());
    let span = max - min;

    let mut pgm = String::new();
    pgm.push_str("P2\n");
    pgm.push_str(&format!("{} {}\n255\n", grid.nx(), grid.ny()));
    let mut csv = String::new();
    for jj in 0..grid.ny() {
        let j = grid.ny() - 1 - jj;
        let mut pgm_row = Vec::with_capacity(grid.nx());
        let mut csv_row = Vec::with_capacity(grid.nx());
        for i in 0..grid.nx() {
            let v = field.values()[[i, j]];
            let level = if span > 0.0 {
                ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            pgm_row.push(level.to_string());
            csv_row.push(format_full(v));
        }
        pgm.push_str(&pgm_row.join(" "));
        pgm.push('\n');
        csv.push_str(&csv_row.join(","));
        csv.push_str("\r\n");
    }
    fs::write(dir.join(format!("{stem}.pgm")), pgm)?;
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let scale = serde_json::json!({ "min": min, "max": max });
    fs::write(
        dir.join(format!("{stem}.scale.json")),
        serde_json::to_string_pretty(&scale)? + "\n",
    )?;
    Ok(())
}

fn write_snapshots(
    out_dir: &Path,
    controls: &ControlTrajectory,
    snapshots: &[(f64, usize, StateField)],
) -> Result<()> {
    let dir = out_dir.join("snapshots");
    fs::create_dir_all(&dir)?;
    let species = ["s", "i", "r", "s_star", "i_star", "r_star"];
    let control_names = ["alpha", "mu", "nu"];
    for (t, level, frame) in snapshots {
        let label = format_time_label(*t);
        for (k, name) in species.iter().enumerate() {
            write_field_artifacts(&dir, &format!("{name}_t{label}"), frame.component(k))?;
        }
        let uf = controls.frame(*level);
        for (k, name) in control_names.iter().enumerate() {
            write_field_artifacts(&dir, &format!("{name}_t{label}"), uf.component(k))?;
        }
    }
    Ok(())
}

fn write_summary(out_dir: &Path, summary: &Summary) -> Result<()> {
    let mut file = fs::File::create(out_dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut file, summary)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Runs the sweep: one optimization per parameter value (plus its
/// uncontrolled reference), each writing into its own subdirectory, with at
/// most `sweep.jobs` members in flight. Collates `sweep.csv`.
fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let out_dir = PathBuf::from(&cfg.outputs.dir);
    fs::create_dir_all(&out_dir)?;
    let param_name = match cfg.sweep.parameter {
        SweepParameter::Zeta => "zeta",
        SweepParameter::Lambda1 => "lambda1",
        SweepParameter::Lambda2 => "lambda2",
    };

    let members: Vec<ExperimentConfig> = cfg
        .sweep
        .values
        .iter()
        .map(|&v| {
            let mut member = cfg.clone();
            member.mode = Mode::Optimize;
            match cfg.sweep.parameter {
                SweepParameter::Zeta => member.weights.zeta = v,
                SweepParameter::Lambda1 => member.weights.lambda1 = v,
                SweepParameter::Lambda2 => member.weights.lambda2 = v,
            }
            member.outputs.dir = out_dir
                .join(format!("{param_name}_{}", format_time_label(v)))
                .to_string_lossy()
                .into_owned();
            member
        })
        .collect();

    let results: Mutex<Vec<Option<Result<Summary>>>> =
        Mutex::new((0..members.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = cfg.sweep.jobs.min(members.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= members.len() {
                    break;
                }
                let outcome = run_single(&members[idx], true);
                results.lock().expect("sweep results lock")[idx] = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(members.len());
    for (value, outcome) in cfg
        .sweep
        .values
        .iter()
        .zip(results.into_inner().expect("sweep results lock"))
    {
        let summary = outcome.expect("every sweep member ran")?;
        rows.push(SweepRow {
            value: *value,
            j_uncontrolled: summary
                .j_uncontrolled
                .expect("optimize members report the reference cost"),
            j_optimal: summary.cost.j_total,
            relcr_percent: summary.relcr_percent,
            converged: summary.converged,
        });
    }

    let mut text = String::new();
    text.push_str(&format!(
        "{param_name},j_uncontrolled,j_optimal,relcr_percent\r\n"
    ));
    for row in &rows {
        let cells = [
            format_full(row.value),
            format_full(row.j_uncontrolled),
            format_full(row.j_optimal),
            format_full(row.relcr_percent),
        ];
        text.push_str(&cells.join(","));
        text.push_str("\r\n");
    }
    fs::write(out_dir.join("sweep.csv"), text)?;
    Ok(rows)
}

/// Maps an error to the process exit code contract: 2 for configuration
/// problems, 3 for solver failures, 1 otherwise (4, optimizer
/// non-convergence, is decided by the caller from the summary).
pub fn exit_code_for(err: &CoreError) -> i32 {
    match err {
        CoreError::Validation { .. }
        | CoreError::ParseError(_)
        | CoreError::UnknownPreset { .. } => 2,
        CoreError::NonConvergence { .. }
        | CoreError::StateNegative { .. }
        | CoreError::AdjointBlowup { .. }
        | CoreError::MisalignedTrajectories(_)
        | CoreError::InfeasiblePerturbation(_)
        | CoreError::DomainError(_) => 3,
        CoreError::Io(_) | CoreError::Json(_) => 1,
    }
}
