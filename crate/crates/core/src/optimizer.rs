//! Projected gradient descent over the admissible control box.
//!
//! Per iteration: forward solve, backward gradient sweep, pointwise step
//! `u - eta g`, projection onto the box, then the CHANGE test
//! `max(sup |y - y_prev|, sup |u - u_prev|) < tol`. The step size decays by
//! the factor `decay_c` every `decay_k` iterations.

use crate::adjoint::CostWeights;
use crate::bundles::StateField;
use crate::error::{CoreError, Result};
use crate::forward::{simulate_forward, SolverOptions};
use crate::grid::TimeGrid;
use crate::model::{ModelParams, N_CONTROLS};
use crate::objective::{
    assemble_gradient_checkpointed, evaluate_cost, stationarity_residual, CostBreakdown,
};
use crate::trajectory::{ControlTrajectory, GradientTrajectory, StateTrajectory};

/// How the initial control maps are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// I.i.d. uniform over the admissible box (seeded).
    Random,
    /// Box midpoints.
    Midpoint,
    /// The uncontrolled reference `(alpha_lower, 0, 0)`.
    Uncontrolled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    /// CHANGE threshold.
    pub tol: f64,
    /// Iteration cap `N`.
    pub max_iter: usize,
    /// Initial descent rate `eta`.
    pub eta0: f64,
    /// Decay factor `c` applied to `eta` every `decay_k` iterations.
    pub decay_c: f64,
    /// Decay period `k` in iterations.
    pub decay_k: usize,
    /// Seed for the random control initialization.
    pub seed: u64,
    pub init: InitMode,
    /// Optional Armijo backtracking on the projected step (extension, off by
    /// default; the plain scheduled-decay update is the reference behavior).
    pub armijo: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 200,
            eta0: 0.1,
            decay_c: 0.2,
            decay_k: 10,
            seed: 42,
            init: InitMode::Random,
            armijo: false,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(CoreError::Validation {
                field: "optim.tol".into(),
                message: format!("must be > 0 (got {})", self.tol),
            });
        }
        if !(self.eta0 > 0.0) {
            return Err(CoreError::Validation {
                field: "optim.eta0".into(),
                message: format!("must be > 0 (got {})", self.eta0),
            });
        }
        if !(self.decay_c > 0.0 && self.decay_c < 1.0) {
            return Err(CoreError::Validation {
                field: "optim.decay_c".into(),
                message: format!("must lie in (0, 1) (got {})", self.decay_c),
            });
        }
        if self.decay_k == 0 {
            return Err(CoreError::Validation {
                field: "optim.decay_k".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(CoreError::Validation {
                field: "optim.max_iter".into(),
                message: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    /// Final (projected) control trajectory.
    pub controls: ControlTrajectory,
    /// Forward trajectory of the final controls.
    pub states: StateTrajectory,
    /// `cost_history[i]` is the cost of iterate `u(i)`, including the final one.
    pub cost_history: Vec<CostBreakdown>,
    /// CHANGE value per iteration.
    pub change_history: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
    /// Whether CHANGE dropped below the tolerance before `max_iter`.
    pub converged: bool,
    /// Stationarity residual of the final iterate.
    pub stationarity: f64,
}

impl OptimResult {
    pub fn final_cost(&self) -> &CostBreakdown {
        self.cost_history
            .last()
            .expect("cost history is never empty")
    }
}

/// Componentwise projection onto the admissible box; idempotent and
/// non-expansive.
pub fn project(u: &ControlTrajectory, p: &ModelParams) -> ControlTrajectory {
    let mut out = u.clone();
    project_in_place(&mut out, p);
    out
}

pub fn project_in_place(u: &mut ControlTrajectory, p: &ModelParams) {
    u.for_each_frame_mut(|frame| frame.project_in_place(p));
}

/// CHANGE metric of Algorithm-style convergence: sup-norm over stored state
/// frames and all control frames of the respective deltas.
pub fn change_metric(
    y_n: &StateTrajectory,
    y_prev: &StateTrajectory,
    u_n: &ControlTrajectory,
    u_prev: &ControlTrajectory,
) -> f64 {
    assert!(
        y_n.time() == y_prev.time() && y_n.stride() == y_prev.stride(),
        "state trajectories must share the time grid and stride"
    );
    assert!(
        u_n.time() == u_prev.time(),
        "control trajectories must share the time grid"
    );
    let mut change = 0.0f64;
    for ((la, fa), (lb, fb)) in y_n.stored().zip(y_prev.stored()) {
        debug_assert_eq!(la, lb);
        change = change.max(fa.sup_diff(fb));
    }
    change.max(u_n.sup_diff(u_prev))
}

fn descend(
    u: &ControlTrajectory,
    g: &GradientTrajectory,
    eta: f64,
    p: &ModelParams,
) -> ControlTrajectory {
    let mut out = u.to_dense();
    for (level, frame) in out.frames_mut().iter_mut().enumerate() {
        let gf = g.frame(level);
        for k in 0..N_CONTROLS {
            for (uv, gv) in frame
                .component_mut(k)
                .as_mut_slice()
                .iter_mut()
                .zip(gf.component(k).as_slice())
            {
                *uv -= eta * gv;
            }
        }
        frame.project_in_place(p);
    }
    out
}

/// Projected gradient descent with scheduled step decay.
pub fn optimize(
    cfg: &OptimConfig,
    p: &ModelParams,
    w: &CostWeights,
    y0: &StateField,
    time: TimeGrid,
    opts: &SolverOptions,
) -> Result<OptimResult> {
    cfg.validate()?;
    p.validate()?;
    w.validate()?;
    let grid = y0.grid();

    let mut u = match cfg.init {
        InitMode::Random => ControlTrajectory::random_in_box(grid, time, p, cfg.seed),
        InitMode::Midpoint => ControlTrajectory::midpoint(grid, time, p),
        InitMode::Uncontrolled => ControlTrajectory::uncontrolled(grid, time, p),
    };
    project_in_place(&mut u, p);
    debug_assert!(u.check_in_box(p).is_ok());

    // y(0): the state of the initial controls, used by the first CHANGE test.
    let mut y_prev = simulate_forward(y0, &u, p, time, opts)?;
    let mut u_prev = u.clone();

    let mut eta = cfg.eta0;
    let mut cost_history = Vec::new();
    let mut change_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for n in 1..=cfg.max_iter {
        let y = if n == 1 {
            // u has not moved yet, so y(1) = y(0); skip the repeated solve.
            y_prev.clone()
        } else {
            simulate_forward(y0, &u, p, time, opts)?
        };
        let cost = evaluate_cost(&y, &u, w);
        cost_history.push(cost);

        let g = assemble_gradient_checkpointed(&y, &u, w, p, opts)?;
        let mut u_new = descend(&u, &g, eta, p);
        if cfg.armijo {
            u_new = armijo_refine(&u, &g, eta, cost.j_total, y0, p, w, time, opts)?;
        }
        debug_assert!(u_new.check_in_box(p).is_ok());

        let change = change_metric(&y, &y_prev, &u_new, &u_prev);
        change_history.push(change);
        iterations = n;

        u_prev = std::mem::replace(&mut u, u_new);
        y_prev = y;

        if change < cfg.tol {
            converged = true;
            break;
        }
        if n % cfg.decay_k == 0 {
            eta *= cfg.decay_c;
        }
    }

    let states = simulate_forward(y0, &u, p, time, opts)?;
    cost_history.push(evaluate_cost(&states, &u, w));
    let g_final = assemble_gradient_checkpointed(&states, &u, w, p, opts)?;
    let stationarity = stationarity_residual(&u, &g_final, p);

    Ok(OptimResult {
        controls: u,
        states,
        cost_history,
        change_history,
        iterations,
        converged,
        stationarity,
    })
}

/// Proximal-style Armijo backtracking: shrink the trial step until the
/// projected point achieves sufficient decrease, measured against the step
/// displacement.
#[allow(clippy::too_many_arguments)]
fn armijo_refine(
    u: &ControlTrajectory,
    g: &GradientTrajectory,
    eta: f64,
    j_current: f64,
    y0: &StateField,
    p: &ModelParams,
    w: &CostWeights,
    time: TimeGrid,
    opts: &SolverOptions,
) -> Result<ControlTrajectory> {
    const SIGMA: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 8;
    let mut step = eta;
    let mut candidate = descend(u, g, step, p);
    for _ in 0..MAX_BACKTRACKS {
        let y_try = simulate_forward(y0, &candidate, p, time, opts)?;
        let j_try = evaluate_cost(&y_try, &candidate, w).j_total;
        let displacement = candidate.sup_diff(u);
        if j_try <= j_current - SIGMA / step * displacement * displacement || displacement == 0.0 {
            return Ok(candidate);
        }
        step *= 0.5;
        candidate = descend(u, g, step, p);
    }
    Ok(candidate)
}

/// Runs `optimize` from `n_starts` seeds (`seed, seed+1, ...`) to probe local
/// minima; results come back in seed order.
pub fn optimize_multi_start(
    cfg: &OptimConfig,
    n_starts: u64,
    p: &ModelParams,
    w: &CostWeights,
    y0: &StateField,
    time: TimeGrid,
    opts: &SolverOptions,
) -> Result<Vec<OptimResult>> {
    (0..n_starts)
        .map(|k| {
            let mut c = *cfg;
            c.seed = cfg.seed + k;
            optimize(&c, p, w, y0, time, opts)
        })
        .collect()
}
