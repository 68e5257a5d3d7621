//! IMEX time stepping and forward trajectory simulation.
//!
//! Each step treats the reaction terms explicitly at the old time level and
//! the diffusion implicitly: for species `i`,
//! `y_new_i = (I - d_i dt Laplacian)^{-1} (y_i + dt F_i(y, u))`.

use rayon::prelude::*;

use crate::bundles::{ControlField, StateField};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::TimeGrid;
use crate::helmholtz::{helmholtz_solve_into, CgWorkspace};
use crate::model::{reaction_rhs, ModelParams, N_SPECIES};
use crate::trajectory::{ControlTrajectory, StateTrajectory};

/// Numerical options shared by the forward and adjoint solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target of the conjugate gradient solve.
    pub cg_tol: f64,
    /// CG iteration cap as a multiple of the cell count.
    pub cg_max_iter_factor: usize,
    /// Store a state frame every this many steps (plus the final frame);
    /// the adjoint sweep recomputes the frames in between.
    pub checkpoint_stride: usize,
    /// Tolerated undershoot of state nonnegativity.
    pub nonneg_tol: f64,
    /// Abort threshold for the adjoint magnitude.
    pub adjoint_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-12,
            cg_max_iter_factor: 10,
            checkpoint_stride: 50,
            nonneg_tol: 1e-12,
            adjoint_bound: 1e8,
        }
    }
}

impl SolverOptions {
    /// Dense frame storage; used by small verification problems.
    pub fn dense(mut self) -> Self {
        self.checkpoint_stride = 1;
        self
    }

    pub fn cg_max_iter(&self, n_cells: usize) -> usize {
        self.cg_max_iter_factor * n_cells
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol <= 1e-10) {
            return Err(CoreError::Validation {
                field: "solver.cg_tol".into(),
                message: format!("must lie in (0, 1e-10] (got {})", self.cg_tol),
            });
        }
        if self.checkpoint_stride == 0 {
            return Err(CoreError::Validation {
                field: "solver.checkpoint_stride".into(),
                message: "must be >= 1".into(),
            });
        }
        if !(self.nonneg_tol >= 0.0) {
            return Err(CoreError::Validation {
                field: "solver.nonneg_tol".into(),
                message: "must be >= 0".into(),
            });
        }
        if !(self.adjoint_bound > 0.0) {
            return Err(CoreError::Validation {
                field: "solver.adjoint_bound".into(),
                message: "must be > 0".into(),
            });
        }
        Ok(())
    }
}

/// Evaluates `y + dt F(y, u)` cellwise into six rhs fields.
pub(crate) fn explicit_reaction_rhs(
    y: &StateField,
    u: &ControlField,
    dt: f64,
    p: &ModelParams,
) -> [Field; N_SPECIES] {
    let grid = y.grid();
    let mut rhs: [Field; N_SPECIES] = std::array::from_fn(|_| Field::zeros(grid));
    let b = p.birth_rate.as_slice();
    {
        // Split the output array so each species slice can be written in one pass.
        let mut slices: Vec<&mut [f64]> = rhs.iter_mut().map(|f| f.as_mut_slice()).collect();
        for idx in 0..grid.len() {
            let y_pt = y.point(idx);
            let u_pt = u.point(idx);
            let f = reaction_rhs(&y_pt, &u_pt, b[idx], p);
            let y_arr = y_pt.as_array();
            for k in 0..N_SPECIES {
                slices[k][idx] = y_arr[k] + dt * f[k];
            }
        }
    }
    rhs
}

/// Cell count below which the per-species solves run sequentially; at small
/// grids the fork-join overhead exceeds the solve itself.
const PARALLEL_CELL_THRESHOLD: usize = 2048;

/// Per-species implicit diffusion solves, run in parallel on large grids.
/// Species are independent, so the result is bitwise identical to
/// sequential execution.
pub(crate) fn implicit_diffusion<const N: usize>(
    rhs: [Field; N],
    diffusion: &[f64; N],
    dt: f64,
    opts: &SolverOptions,
) -> Result<[Field; N]> {
    let grid = rhs[0].grid();
    let max_iter = opts.cg_max_iter(grid.len());
    let solve_one = |(r, d): (Field, f64)| -> Result<Field> {
        let mut out = Field::zeros(grid);
        let mut ws = CgWorkspace::new(grid.len());
        helmholtz_solve_into(
            grid,
            r.as_slice(),
            d * dt,
            opts.cg_tol,
            max_iter,
            &mut ws,
            out.as_mut_slice(),
        )?;
        Ok(out)
    };
    let solved: Vec<Field> = if grid.len() >= PARALLEL_CELL_THRESHOLD {
        rhs.into_par_iter()
            .zip(diffusion.par_iter().copied())
            .map(solve_one)
            .collect::<Result<_>>()?
    } else {
        rhs.into_iter()
            .zip(diffusion.iter().copied())
            .map(solve_one)
            .collect::<Result<_>>()?
    };
    Ok(solved
        .try_into()
        .unwrap_or_else(|_| unreachable!("species count preserved")))
}

/// One IMEX step: explicit reaction at the old level, implicit diffusion at
/// the new level. Errors with `StateNegative` if any component undershoots
/// `-nonneg_tol` afterwards.
pub fn imex_step(
    y: &StateField,
    u: &ControlField,
    t_index: usize,
    dt: f64,
    p: &ModelParams,
    opts: &SolverOptions,
) -> Result<StateField> {
    let rhs = explicit_reaction_rhs(y, u, dt, p);
    let fields = implicit_diffusion(rhs, &p.diffusion, dt, opts)?;
    let out = StateField::from_fields(fields);
    out.check_nonnegative(opts.nonneg_tol, t_index + 1)?;
    Ok(out)
}

/// Full forward simulation from `y0` under the given control trajectory.
pub fn simulate_forward(
    y0: &StateField,
    controls: &ControlTrajectory,
    p: &ModelParams,
    time: TimeGrid,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    simulate_forward_observed(y0, controls, p, time, opts, |_, _| {})
}

/// Forward simulation invoking `observe(level, frame)` at every time level,
/// including the initial one. Heatmap snapshots and dense co-processing hook
/// in here without forcing dense trajectory storage.
pub fn simulate_forward_observed(
    y0: &StateField,
    controls: &ControlTrajectory,
    p: &ModelParams,
    time: TimeGrid,
    opts: &SolverOptions,
    mut observe: impl FnMut(usize, &StateField),
) -> Result<StateTrajectory> {
    controls.check_aligned(&time, "simulate_forward controls")?;
    if controls.grid() != y0.grid() {
        return Err(CoreError::MisalignedTrajectories(
            "controls and initial state live on different grids".into(),
        ));
    }
    if y0.grid() != p.birth_rate.grid() {
        return Err(CoreError::MisalignedTrajectories(
            "initial state and birth-rate field live on different grids".into(),
        ));
    }
    controls.check_in_box(p)?;
    y0.check_nonnegative(opts.nonneg_tol, 0)?;

    let mut traj = StateTrajectory::with_capacity(time, opts.checkpoint_stride);
    let mut y = y0.clone();
    traj.record(0, &y);
    observe(0, &y);
    for n in 0..time.n_steps() {
        y = imex_step(&y, controls.frame(n), n, time.dt(), p, opts)?;
        traj.record(n + 1, &y);
        observe(n + 1, &y);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::PointControl;
    use crate::oracles::ode_reduction_simulate;

    fn gaussian_initial(grid: Grid) -> StateField {
        let s0 = Field::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
        let scale = |c: f64| {
            let mut f = s0.clone();
            for v in f.as_mut_slice() {
                *v *= c;
            }
            f
        };
        StateField::from_fields([
            s0.clone(),
            scale(0.1),
            Field::zeros(grid),
            scale(0.05),
            scale(0.005),
            Field::zeros(grid),
        ])
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let grid = Grid::default_square(16).unwrap();
        let mut p = ModelParams::baseline(grid);
        // All rates off, no births: the step is pure diffusion.
        p.beta = 1e-300;
        p.gamma = 1e-300;
        p.delta = 1e-300;
        p.mu_bar = 1e-300;
        p.birth_rate = Field::zeros(grid);
        let y = gaussian_initial(grid);
        let u = ControlField::constant(grid, 0.1, 0.0, 0.0);
        let opts = SolverOptions {
            cg_tol: 1e-13,
            ..Default::default()
        };
        let y1 = imex_step(&y, &u, 0, 0.05, &p, &opts).unwrap();
        let rel = (y1.total_mass() - y.total_mass()).abs() / y.total_mass();
        assert!(rel < 1e-12, "mass drift {rel}");
    }

    #[test]
    fn homogeneous_step_matches_forward_euler() {
        let grid = Grid::default_square(8).unwrap();
        let mut p = ModelParams::baseline(grid);
        p.birth_rate = Field::constant(grid, 0.1);
        let point = [1.0, 0.1, 0.0, 0.05, 0.005, 0.0];
        let y = StateField::from_fields(std::array::from_fn(|k| Field::constant(grid, point[k])));
        let u = ControlField::constant(grid, 0.3, 0.2, 0.1);
        let dt = 0.05;
        let y1 = imex_step(&y, &u, 0, dt, &p, &SolverOptions::default()).unwrap();
        let f = reaction_rhs(
            &crate::model::PointState::from_array(point),
            &PointControl {
                alpha: 0.3,
                mu: 0.2,
                nu: 0.1,
            },
            0.1,
            &p,
        );
        for k in 0..N_SPECIES {
            let expected = point[k] + dt * f[k];
            let field = y1.component(k);
            assert!((field.max() - field.min()).abs() < 1e-14, "not constant");
            assert!(
                (field.max() - expected).abs() < 1e-12,
                "species {k}: {} vs Euler {expected}",
                field.max()
            );
        }
    }

    /// One step at dt against two half steps from the baseline initial data:
    /// the one-step difference is the local truncation error, which must
    /// shrink at second order (first-order consistency of the step).
    #[test]
    fn step_halving_consistency() {
        let grid = Grid::default_square(16).unwrap();
        let p = ModelParams::baseline(grid);
        let y = gaussian_initial(grid);
        let u = ControlField::constant(grid, 0.1, 0.0, 0.0);
        let opts = SolverOptions::default();

        let mut diffs = Vec::new();
        for dt in [0.05, 0.025] {
            let full = imex_step(&y, &u, 0, dt, &p, &opts).unwrap();
            let half = imex_step(&y, &u, 0, 0.5 * dt, &p, &opts).unwrap();
            let half2 = imex_step(&half, &u, 0, 0.5 * dt, &p, &opts).unwrap();
            diffs.push(full.sup_diff(&half2));
        }
        let ratio = diffs[0] / diffs[1];
        assert!(
            (3.0..5.0).contains(&ratio),
            "local error ratio {ratio}, diffs {diffs:?}"
        );
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = Grid::default_square(8).unwrap();
        let mut p = ModelParams::baseline(grid);
        p.birth_rate = Field::zeros(grid);
        let time = TimeGrid::new(1.0, 20).unwrap();
        let y0 = StateField::zeros(grid);
        let u = ControlTrajectory::uncontrolled(grid, time, &p);
        let traj = simulate_forward(&y0, &u, &p, time, &SolverOptions::default()).unwrap();
        assert_eq!(traj.final_frame().max_abs(), 0.0);
        assert_eq!(traj.min_value(), 0.0);
    }

    #[test]
    fn spatial_homogeneity_is_preserved() {
        let grid = Grid::default_square(12).unwrap();
        let mut p = ModelParams::baseline(grid);
        p.birth_rate = Field::constant(grid, 0.1);
        let point = [1.0, 0.1, 0.0, 0.05, 0.005, 0.0];
        let y0 = StateField::from_fields(std::array::from_fn(|k| Field::constant(grid, point[k])));
        let time = TimeGrid::new(5.0, 100).unwrap();
        let u = ControlTrajectory::constant(grid, time, 0.2, 0.1, 0.3);
        let traj = simulate_forward(&y0, &u, &p, time, &SolverOptions::default().dense()).unwrap();
        for (_, frame) in traj.stored() {
            for k in 0..N_SPECIES {
                let f = frame.component(k);
                assert!(f.max() - f.min() < 1e-10, "lost homogeneity");
            }
        }
    }

    /// Spatially homogeneous run against the RK4 reduction of the reaction
    /// system; forward Euler incurs O(dt) error, calibrated to pass at 1e-3
    /// with dt = 0.005 over [0, 20].
    #[test]
    fn homogeneous_run_matches_ode_oracle() {
        let grid = Grid::default_square(4).unwrap();
        let mut p = ModelParams::baseline(grid);
        p.birth_rate = Field::constant(grid, 0.1);
        let point = [1.0, 0.1, 0.0, 0.05, 0.005, 0.0];
        let y0 = StateField::from_fields(std::array::from_fn(|k| Field::constant(grid, point[k])));
        let time = TimeGrid::from_dt(20.0, 0.005).unwrap();
        let u_const = [0.1, 0.0, 0.0];
        let u = ControlTrajectory::constant(grid, time, u_const[0], u_const[1], u_const[2]);
        let opts = SolverOptions {
            checkpoint_stride: 200,
            ..Default::default()
        };
        let traj = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
        let oracle = ode_reduction_simulate(point, u_const, 0.1, &p, time);

        let area = grid.cell_area() * grid.len() as f64;
        let mut sup_err = 0.0f64;
        let mut sup_ref = 0.0f64;
        for (l, ode) in oracle.iter().enumerate() {
            for k in 0..N_SPECIES {
                // Homogeneous fields: integral / area recovers the point value.
                let v = traj.integrals()[l][k] / area;
                sup_err = sup_err.max((v - ode[k]).abs());
                sup_ref = sup_ref.max(ode[k].abs());
            }
        }
        let rel = sup_err / sup_ref;
        assert!(rel < 1e-3, "ODE oracle mismatch: rel sup err {rel}");
    }
}
