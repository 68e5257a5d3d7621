//! Independent verification machinery: the ODE reduction of the system for
//! spatially homogeneous data, a central finite-difference oracle for
//! directional cost derivatives, and the linearized sensitivity system.
//!
//! Three routes compute the same directional derivative dJ(u) h - the adjoint
//! gradient, central finite differences of J, and the sensitivity system -
//! and their pairwise agreement is the decisive correctness check of the
//! whole pipeline. The oracles here never call into the adjoint path.

use rand::Rng;

use crate::adjoint::CostWeights;
use crate::bundles::{ControlField, StateField, TangentField};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::forward::{explicit_reaction_rhs, implicit_diffusion, simulate_forward, SolverOptions};
use crate::grid::{Grid, TimeGrid};
use crate::model::{
    jacobian_control_apply, jacobian_state_apply, jacobian_state_transpose_apply, reaction_rhs,
    ModelParams, PointControl, PointState, N_CONTROLS, N_SPECIES,
};
use crate::objective::evaluate_cost;
use crate::trajectory::{ControlTrajectory, TangentTrajectory};

/// Substeps of the RK4 oracle per coarse time step.
const RK4_REFINEMENT: usize = 10;

fn rhs6(y: [f64; N_SPECIES], u: [f64; N_CONTROLS], b: f64, p: &ModelParams) -> [f64; N_SPECIES] {
    reaction_rhs(
        &PointState::from_array(y),
        &PointControl::from_array(u),
        b,
        p,
    )
}

fn rk4_step(
    y: [f64; N_SPECIES],
    h: f64,
    f: impl Fn([f64; N_SPECIES]) -> [f64; N_SPECIES],
) -> [f64; N_SPECIES] {
    let k1 = f(y);
    let k2 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
    let k3 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
    let k4 = f(std::array::from_fn(|i| y[i] + h * k3[i]));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// RK4 integration (at `dt / 10`) of the spatially homogeneous reduction:
/// dropping the Laplacians turns the system into a 6-dimensional ODE.
/// Returns the state at every coarse time level.
pub fn ode_reduction_simulate(
    y0: [f64; N_SPECIES],
    u: [f64; N_CONTROLS],
    b: f64,
    p: &ModelParams,
    time: TimeGrid,
) -> Vec<[f64; N_SPECIES]> {
    let h = time.dt() / RK4_REFINEMENT as f64;
    let f = |y: [f64; N_SPECIES]| rhs6(y, u, b, p);
    let mut out = Vec::with_capacity(time.n_levels());
    let mut y = y0;
    out.push(y);
    for _ in 0..time.n_steps() {
        for _ in 0..RK4_REFINEMENT {
            y = rk4_step(y, h, f);
        }
        out.push(y);
    }
    out
}

/// RK4 integration of the homogeneous backward adjoint reduction
/// `-phi' = J_F(y(t), u)^T phi + source`, `phi(T) = 0`, using a fine forward
/// solve of the state ODE (linear interpolation supplies the half-step
/// stage values). Returns the adjoint at every coarse time level.
pub fn ode_reduction_adjoint(
    y0: [f64; N_SPECIES],
    u: [f64; N_CONTROLS],
    b: f64,
    p: &ModelParams,
    w: &CostWeights,
    time: TimeGrid,
) -> Vec<[f64; N_SPECIES]> {
    let n_fine = time.n_steps() * RK4_REFINEMENT;
    let h = time.dt() / RK4_REFINEMENT as f64;
    let f = |y: [f64; N_SPECIES]| rhs6(y, u, b, p);

    let mut states = Vec::with_capacity(n_fine + 1);
    let mut y = y0;
    states.push(y);
    for _ in 0..n_fine {
        y = rk4_step(y, h, f);
        states.push(y);
    }

    let state_at = |idx_times_two: usize| -> [f64; N_SPECIES] {
        // Index in half-step units; odd values interpolate midpoints.
        let i = idx_times_two / 2;
        if idx_times_two % 2 == 0 {
            states[i]
        } else {
            std::array::from_fn(|k| 0.5 * (states[i][k] + states[i + 1][k]))
        }
    };

    let u_pt = PointControl::from_array(u);
    let source = crate::adjoint::adjoint_source(w);
    let coupling = |y: [f64; N_SPECIES], phi: [f64; N_SPECIES]| -> [f64; N_SPECIES] {
        let g = jacobian_state_transpose_apply(&PointState::from_array(y), &u_pt, p, phi);
        std::array::from_fn(|k| g[k] + source[k])
    };

    // March in reversed time tau = T - t; phi' = J^T phi + source.
    let mut phi = [0.0; N_SPECIES];
    let mut out = vec![[0.0; N_SPECIES]; time.n_levels()];
    out[time.n_steps()] = phi;
    for step in (0..n_fine).rev() {
        // RK4 stages at tau, tau + h/2, tau + h use y at t = step+1, step+1/2, step.
        let y_hi = state_at(2 * (step + 1));
        let y_mid = state_at(2 * step + 1);
        let y_lo = state_at(2 * step);
        let k1 = coupling(y_hi, phi);
        let k2 = coupling(y_mid, std::array::from_fn(|i| phi[i] + 0.5 * h * k1[i]));
        let k3 = coupling(y_mid, std::array::from_fn(|i| phi[i] + 0.5 * h * k2[i]));
        let k4 = coupling(y_lo, std::array::from_fn(|i| phi[i] + h * k3[i]));
        phi = std::array::from_fn(|i| {
            phi[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        });
        if step % RK4_REFINEMENT == 0 {
            out[step / RK4_REFINEMENT] = phi;
        }
    }
    out
}

/// A self-contained forward problem: everything needed to evaluate J(u).
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub time: TimeGrid,
    pub params: ModelParams,
    pub weights: CostWeights,
    pub y0: StateField,
    pub opts: SolverOptions,
}

impl Problem {
    /// The small verification problem: 16 x 16 cells on [-5, 5]^2, horizon
    /// T = 5 at dt = 0.01, baseline rates and Gaussian initial data.
    pub fn small_test() -> Self {
        let grid = Grid::default_square(16).expect("valid grid");
        let params = ModelParams::baseline(grid);
        let time = TimeGrid::from_dt(5.0, 0.01).expect("valid time grid");
        let y0 = gaussian_initial_state(grid);
        Self {
            grid,
            time,
            params,
            weights: CostWeights::default(),
            y0,
            opts: SolverOptions::default().dense(),
        }
    }

    /// Full forward solve and cost of a control trajectory.
    pub fn cost_of(&self, u: &ControlTrajectory) -> Result<f64> {
        let traj = simulate_forward(&self.y0, u, &self.params, self.time, &self.opts)?;
        Ok(evaluate_cost(&traj, u, &self.weights).j_total)
    }
}

/// Table-style Gaussian initial data: `S0 = exp(-(x^2+y^2))`, `I0 = 0.1 S0`,
/// `S*0 = 0.05 S0`, `I*0 = 0.05 I0`, recovered compartments empty.
pub fn gaussian_initial_state(grid: Grid) -> StateField {
    let s0 = Field::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
    let scaled = |c: f64| {
        let mut f = s0.clone();
        for v in f.as_mut_slice() {
            *v *= c;
        }
        f
    };
    StateField::from_fields([
        s0.clone(),
        scaled(0.1),
        Field::zeros(grid),
        scaled(0.05),
        scaled(0.005),
        Field::zeros(grid),
    ])
}

/// Central finite-difference directional derivative
/// `(J(u + eps h) - J(u - eps h)) / (2 eps)`, each cost via a full forward
/// solve. Errors if either perturbation leaves the admissible box.
pub fn fd_directional_derivative(
    problem: &Problem,
    u: &ControlTrajectory,
    h: &ControlTrajectory,
    eps: f64,
) -> Result<f64> {
    let plus = add_scaled(u, h, eps)?;
    let minus = add_scaled(u, h, -eps)?;
    for (which, traj) in [("u + eps h", &plus), ("u - eps h", &minus)] {
        traj.check_in_box(&problem.params).map_err(|_| {
            CoreError::InfeasiblePerturbation(format!("{which} leaves the admissible box"))
        })?;
    }
    let j_plus = problem.cost_of(&plus)?;
    let j_minus = problem.cost_of(&minus)?;
    Ok((j_plus - j_minus) / (2.0 * eps))
}

fn add_scaled(u: &ControlTrajectory, h: &ControlTrajectory, scale: f64) -> Result<ControlTrajectory> {
    if u.time() != h.time() {
        return Err(CoreError::MisalignedTrajectories(
            "direction and base control have different time grids".into(),
        ));
    }
    let mut out = u.to_dense();
    for (level, frame) in out.frames_mut().iter_mut().enumerate() {
        let hf = h.frame(level);
        for k in 0..N_CONTROLS {
            for (uv, hv) in frame
                .component_mut(k)
                .as_mut_slice()
                .iter_mut()
                .zip(hf.component(k).as_slice())
            {
                *uv += scale * hv;
            }
        }
    }
    Ok(out)
}

/// Solves the linearized sensitivity system
/// `w_t - D Lap(w) = F_y(y, u) w + F_u(y, u) h`, `w(0) = 0`, with the same
/// IMEX stepping as the forward solve (this is the exact tangent of the
/// discrete forward map). The forward state is co-stepped internally.
pub fn linearized_sensitivity(
    problem: &Problem,
    u: &ControlTrajectory,
    h: &ControlTrajectory,
) -> Result<TangentTrajectory> {
    let time = problem.time;
    u.check_aligned(&time, "sensitivity base control")?;
    if h.time() != time {
        return Err(CoreError::MisalignedTrajectories(
            "sensitivity direction time grid differs".into(),
        ));
    }
    let p = &problem.params;
    let opts = &problem.opts;
    let grid = problem.grid;
    let dt = time.dt();

    let mut y = problem.y0.clone();
    let mut w = TangentField::zeros(grid);
    let mut frames = Vec::with_capacity(time.n_levels());
    frames.push(w.clone());

    for n in 0..time.n_steps() {
        let uf = u.frame(n);
        let hf = h.frame(n);
        // Tangent right-hand side w + dt (J_F w + F_u h), explicit like the
        // forward reaction.
        let mut rhs: [Field; N_SPECIES] = std::array::from_fn(|_| Field::zeros(grid));
        {
            let mut slices: Vec<&mut [f64]> = rhs.iter_mut().map(|f| f.as_mut_slice()).collect();
            for idx in 0..grid.len() {
                let y_pt = y.point(idx);
                let u_pt = uf.point(idx);
                let jw = jacobian_state_apply(&y_pt, &u_pt, p, w.point_values(idx));
                let jh = jacobian_control_apply(&y_pt, &u_pt, p, hf.point_values(idx));
                let w_pt = w.point_values(idx);
                for k in 0..N_SPECIES {
                    slices[k][idx] = w_pt[k] + dt * (jw[k] + jh[k]);
                }
            }
        }
        let solved = implicit_diffusion(rhs, &p.diffusion, dt, opts)?;
        w = TangentField::from_fields(solved);
        frames.push(w.clone());

        // Advance the base state with the ordinary IMEX step.
        let y_rhs = explicit_reaction_rhs(&y, uf, dt, p);
        let y_fields = implicit_diffusion(y_rhs, &p.diffusion, dt, opts)?;
        y = StateField::from_fields(y_fields);
        y.check_nonnegative(opts.nonneg_tol, n + 1)?;
    }
    Ok(TangentTrajectory::new(time, frames))
}

/// Directional derivative via the sensitivity route: the lambda-weighted
/// space-time integral of the tangent state plus the control-cost term.
pub fn sensitivity_directional_derivative(
    problem: &Problem,
    u: &ControlTrajectory,
    h: &ControlTrajectory,
) -> Result<f64> {
    let tangent = linearized_sensitivity(problem, u, h)?;
    let time = problem.time;
    let w = &problem.weights;
    let area = problem.grid.cell_area();
    let dt = time.dt();
    let mut tot = 0.0;
    for level in 0..time.n_levels() {
        let wt = time.trapezoid_weight(level) * dt;
        let tf = tangent.frame(level);
        let ints = tf.integrals();
        tot += wt * (w.lambda1 * (ints[1] + ints[4]) + w.lambda2 * (ints[3] + ints[4] + ints[5]));

        let uf = u.frame(level);
        let hf = h.frame(level);
        let q_alpha = uf.alpha().as_slice();
        let mut dot = 0.0;
        for (idx, ha) in hf.alpha().as_slice().iter().enumerate() {
            dot += (q_alpha[idx] - w.alpha_cost_offset) * ha;
        }
        for (uv, hv) in uf.mu().as_slice().iter().zip(hf.mu().as_slice()) {
            dot += uv * hv;
        }
        for (uv, hv) in uf.nu().as_slice().iter().zip(hf.nu().as_slice()) {
            dot += uv * hv;
        }
        tot += wt * w.zeta * dot * area;
    }
    Ok(tot)
}

/// Draws a spatially and temporally coherent random control direction: a few
/// Gaussian bumps per component modulated by a cosine profile in time. White
/// noise directions pair degenerately with smooth gradients; coherent ones
/// keep the directional derivative well scaled.
pub fn smooth_random_direction(
    grid: Grid,
    time: TimeGrid,
    rng: &mut impl Rng,
) -> ControlTrajectory {
    let mut spatial: Vec<Field> = Vec::with_capacity(N_CONTROLS);
    let mut profiles: Vec<(f64, f64)> = Vec::with_capacity(N_CONTROLS);
    for _ in 0..N_CONTROLS {
        let mut f = Field::zeros(grid);
        for _ in 0..3 {
            let cx = rng.random_range(-4.0..4.0);
            let cy = if grid.dim() == 2 {
                rng.random_range(-4.0..4.0)
            } else {
                0.5
            };
            let width: f64 = rng.random_range(1.2..3.0);
            let amp = rng.random_range(-1.0..1.0);
            let inv_w2 = 1.0 / (width * width);
            for i in 0..grid.nx() {
                for j in 0..grid.ny() {
                    let (x, y) = grid.cell_center(i, j);
                    let d2 = (x - cx) * (x - cx)
                        + if grid.dim() == 2 {
                            (y - cy) * (y - cy)
                        } else {
                            0.0
                        };
                    f.values_mut()[[i, j]] += amp * (-d2 * inv_w2).exp();
                }
            }
        }
        spatial.push(f);
        profiles.push((rng.random_range(0.0..2.0), rng.random_range(0.0..std::f64::consts::TAU)));
    }

    let frames = (0..time.n_levels())
        .map(|level| {
            let t = time.time(level);
            let fields: [Field; N_CONTROLS] = std::array::from_fn(|k| {
                let (omega, phase) = profiles[k];
                let scale = (omega * t + phase).cos();
                let mut f = spatial[k].clone();
                for v in f.as_mut_slice() {
                    *v *= scale;
                }
                f
            });
            ControlField::from_fields(fields)
        })
        .collect();
    ControlTrajectory::from_frames(time, frames).expect("frame count matches by construction")
}
