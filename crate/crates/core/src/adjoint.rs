//! Backward-in-time adjoint solve.
//!
//! The adjoint system `-phi_t - D Lap(phi) = J_F(y, u)^T phi + source` with
//! terminal condition `phi(T) = 0` is discretized with the same IMEX family
//! as the forward solve: in reversed time the coupling term is explicit and
//! the diffusion implicit. The backward step from level `n+1` to `n` evaluates
//! the coupling at the forward frame of level `n+1`.

use crate::bundles::{AdjointField, ControlField, StateField};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::forward::{imex_step, implicit_diffusion, SolverOptions};
use crate::model::{jacobian_state_transpose_apply, ModelParams, N_SPECIES};
use crate::trajectory::{AdjointTrajectory, ControlTrajectory, StateTrajectory};

/// Weights of the cost functional: `lambda1` on total infections, `lambda2`
/// on total noncompliance, `zeta` on the quadratic control cost. The alpha
/// cost may optionally be charged against the offset `alpha - alpha_offset`
/// instead of `alpha` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub zeta: f64,
    /// Offset subtracted from alpha inside the control cost (0 by default).
    pub alpha_cost_offset: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            lambda1: 3.0,
            lambda2: 0.02,
            zeta: 0.2,
            alpha_cost_offset: 0.0,
        }
    }
}

impl CostWeights {
    pub fn new(lambda1: f64, lambda2: f64, zeta: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            zeta,
            alpha_cost_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("zeta", self.zeta),
        ] {
            if !(v >= 0.0) {
                return Err(CoreError::Validation {
                    field: format!("weights.{name}"),
                    message: format!("must be >= 0 (got {v})"),
                });
            }
        }
        Ok(())
    }

    /// Control-cost polynomials `q(u) = (alpha - offset, mu, nu)`.
    pub fn control_cost(&self, u: [f64; 3]) -> [f64; 3] {
        [u[0] - self.alpha_cost_offset, u[1], u[2]]
    }
}

/// Constant source vector of the adjoint system for the simulated cost:
/// `(0, lambda1, 0, lambda2, lambda1 + lambda2, lambda2)`.
pub fn adjoint_source(w: &CostWeights) -> [f64; N_SPECIES] {
    [
        0.0,
        w.lambda1,
        0.0,
        w.lambda2,
        w.lambda1 + w.lambda2,
        w.lambda2,
    ]
}

/// One backward IMEX step from level `n+1` to `n`; `y` and `u` are the
/// forward frames at level `n+1` and `source` the source vector there.
pub fn adjoint_step(
    phi: &AdjointField,
    y: &StateField,
    u: &ControlField,
    t_index: usize,
    dt: f64,
    p: &ModelParams,
    source: &[f64; N_SPECIES],
    opts: &SolverOptions,
) -> Result<AdjointField> {
    let grid = phi.grid();
    let mut rhs: [Field; N_SPECIES] = std::array::from_fn(|_| Field::zeros(grid));
    {
        let mut slices: Vec<&mut [f64]> = rhs.iter_mut().map(|f| f.as_mut_slice()).collect();
        for idx in 0..grid.len() {
            let y_pt = y.point(idx);
            let u_pt = u.point(idx);
            let coupling = jacobian_state_transpose_apply(&y_pt, &u_pt, p, phi.point_values(idx));
            let phi_pt = phi.point_values(idx);
            for k in 0..N_SPECIES {
                slices[k][idx] = phi_pt[k] + dt * (coupling[k] + source[k]);
            }
        }
    }
    let fields = implicit_diffusion(rhs, &p.diffusion, dt, opts)?;
    let out = AdjointField::from_fields(fields);
    out.check_bounded(opts.adjoint_bound, t_index)?;
    Ok(out)
}

/// Drives the backward sweep, recomputing forward frames between checkpoints,
/// and invokes `visit(level, phi, y)` at every level from `n_steps` down to 0.
///
/// `source(level)` supplies the adjoint source per frame; the simulated cost
/// uses a constant source, but the general affine-cost form is reachable here.
pub fn adjoint_sweep_with_source(
    forward: &StateTrajectory,
    controls: &ControlTrajectory,
    p: &ModelParams,
    source: impl Fn(usize) -> [f64; N_SPECIES],
    opts: &SolverOptions,
    mut visit: impl FnMut(usize, &AdjointField, &StateField) -> Result<()>,
) -> Result<()> {
    let time = forward.time();
    controls.check_aligned(&time, "adjoint controls")?;
    let n = time.n_steps();
    let dt = time.dt();
    let stride = forward.stride();

    let mut phi = AdjointField::zeros(forward.grid());
    {
        let top = forward
            .frame_at(n)
            .ok_or_else(|| CoreError::MisalignedTrajectories("missing final frame".into()))?;
        visit(n, &phi, top)?;
    }

    let mut hi = n;
    while hi > 0 {
        let lo = ((hi - 1) / stride) * stride;
        // Materialize forward frames lo..=hi, stepping only where no frame
        // is stored; stepping reproduces the original frames bitwise.
        let mut segment: Vec<StateField> = Vec::with_capacity(hi - lo + 1);
        for level in lo..=hi {
            let frame = match forward.frame_at(level) {
                Some(f) => f.clone(),
                None => imex_step(
                    segment
                        .last()
                        .expect("checkpoint level opens every segment"),
                    controls.frame(level - 1),
                    level - 1,
                    dt,
                    p,
                    opts,
                )?,
            };
            segment.push(frame);
        }
        for level in (lo..hi).rev() {
            let y_next = &segment[level + 1 - lo];
            phi = adjoint_step(
                &phi,
                y_next,
                controls.frame(level + 1),
                level,
                dt,
                p,
                &source(level + 1),
                opts,
            )?;
            visit(level, &phi, &segment[level - lo])?;
        }
        hi = lo;
    }
    Ok(())
}

/// Backward sweep with the constant source of the simulated cost.
pub fn adjoint_sweep(
    forward: &StateTrajectory,
    controls: &ControlTrajectory,
    p: &ModelParams,
    w: &CostWeights,
    opts: &SolverOptions,
    visit: impl FnMut(usize, &AdjointField, &StateField) -> Result<()>,
) -> Result<()> {
    let source = adjoint_source(w);
    adjoint_sweep_with_source(forward, controls, p, |_| source, opts, visit)
}

/// Full backward solve; frames are stored with the forward stride and the
/// terminal frame is exactly zero.
pub fn simulate_adjoint(
    forward: &StateTrajectory,
    controls: &ControlTrajectory,
    p: &ModelParams,
    w: &CostWeights,
    opts: &SolverOptions,
) -> Result<AdjointTrajectory> {
    let mut traj = AdjointTrajectory::with_capacity(forward.time(), forward.stride());
    adjoint_sweep(forward, controls, p, w, opts, |level, phi, _| {
        traj.record_backward(level, phi);
        Ok(())
    })?;
    traj.finish_backward();
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::simulate_forward;
    use crate::grid::{Grid, TimeGrid};

    #[test]
    fn adjoint_source_examples() {
        let w = CostWeights::new(3.0, 0.02, 0.2);
        assert_eq!(adjoint_source(&w), [0.0, 3.0, 0.0, 0.02, 3.02, 0.02]);
        let w0 = CostWeights::new(0.0, 0.0, 1.0);
        assert_eq!(adjoint_source(&w0), [0.0; 6]);
        let w1 = CostWeights::new(1.0, 1.0, 0.0);
        assert_eq!(adjoint_source(&w1), [0.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
    }

    fn small_setup() -> (
        Grid,
        ModelParams,
        TimeGrid,
        StateField,
        ControlTrajectory,
    ) {
        let grid = Grid::default_square(8).unwrap();
        let p = ModelParams::baseline(grid);
        let time = TimeGrid::new(1.0, 50).unwrap();
        let s0 = Field::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
        let scale = |c: f64| {
            let mut f = s0.clone();
            for v in f.as_mut_slice() {
                *v *= c;
            }
            f
        };
        let y0 = StateField::from_fields([
            s0.clone(),
            scale(0.1),
            Field::zeros(grid),
            scale(0.05),
            scale(0.005),
            Field::zeros(grid),
        ]);
        let u = ControlTrajectory::constant(grid, time, 0.2, 0.1, 0.3);
        (grid, p, time, y0, u)
    }

    #[test]
    fn zero_weights_give_zero_adjoint() {
        let (_, p, time, y0, u) = small_setup();
        let opts = SolverOptions::default().dense();
        let fwd = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
        let w = CostWeights::new(0.0, 0.0, 1.0);
        let adj = simulate_adjoint(&fwd, &u, &p, &w, &opts).unwrap();
        for (_, frame) in adj.stored() {
            assert_eq!(frame.max_abs(), 0.0);
        }
    }

    #[test]
    fn terminal_frame_is_exactly_zero() {
        let (_, p, time, y0, u) = small_setup();
        let opts = SolverOptions::default().dense();
        let fwd = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
        let adj = simulate_adjoint(&fwd, &u, &p, &CostWeights::default(), &opts).unwrap();
        assert_eq!(adj.terminal().max_abs(), 0.0);
        assert_eq!(adj.frame_at(time.n_steps()).unwrap().max_abs(), 0.0);
    }

    /// One backward step from phi = 0: the coupling vanishes, the source is
    /// spatially constant, and constants pass through the implicit solve, so
    /// phi after one step equals dt * source exactly.
    #[test]
    fn one_step_from_zero_is_dt_source() {
        let (grid, p, time, y0, u) = small_setup();
        let opts = SolverOptions::default();
        let w = CostWeights::default();
        let phi = AdjointField::zeros(grid);
        let src = adjoint_source(&w);
        let fwd = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
        let stepped = adjoint_step(
            &phi,
            fwd.final_frame(),
            u.frame(time.n_steps()),
            time.n_steps() - 1,
            time.dt(),
            &p,
            &src,
            &opts,
        )
        .unwrap();
        for k in 0..N_SPECIES {
            let f = stepped.component(k);
            assert!((f.max() - f.min()).abs() < 1e-15);
            assert!(
                (f.max() - time.dt() * src[k]).abs() < 1e-15,
                "component {k}: {} vs {}",
                f.max(),
                time.dt() * src[k]
            );
        }
    }

    /// The adjoint is linear in the cost weights with fixed forward data.
    #[test]
    fn adjoint_linear_in_weights() {
        let (_, p, time, y0, u) = small_setup();
        let opts = SolverOptions::default().dense();
        let fwd = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
        let w1 = CostWeights::new(3.0, 0.02, 0.2);
        let w2 = CostWeights::new(6.0, 0.04, 0.2);
        let a1 = simulate_adjoint(&fwd, &u, &p, &w1, &opts).unwrap();
        let a2 = simulate_adjoint(&fwd, &u, &p, &w2, &opts).unwrap();
        let mut max_rel = 0.0f64;
        for level in 0..=time.n_steps() {
            let f1 = a1.frame_at(level).unwrap();
            let f2 = a2.frame_at(level).unwrap();
            for k in 0..N_SPECIES {
                for (v1, v2) in f1
                    .component(k)
                    .as_slice()
                    .iter()
                    .zip(f2.component(k).as_slice())
                {
                    let scale = v2.abs().max(1e-30);
                    max_rel = max_rel.max((2.0 * v1 - v2).abs() / scale.max(1.0));
                }
            }
        }
        assert!(max_rel < 1e-10, "linearity violated: {max_rel}");
    }

    /// Checkpointed sweep reproduces the dense sweep bitwise: recomputation
    /// replays the identical arithmetic.
    #[test]
    fn checkpointed_sweep_matches_dense() {
        let (_, p, time, y0, u) = small_setup();
        let w = CostWeights::default();
        let dense_opts = SolverOptions::default().dense();
        let strided_opts = SolverOptions {
            checkpoint_stride: 7,
            ..Default::default()
        };
        let fwd_dense = simulate_forward(&y0, &u, &p, time, &dense_opts).unwrap();
        let fwd_strided = simulate_forward(&y0, &u, &p, time, &strided_opts).unwrap();
        let adj_dense = simulate_adjoint(&fwd_dense, &u, &p, &w, &dense_opts).unwrap();
        let adj_strided = simulate_adjoint(&fwd_strided, &u, &p, &w, &strided_opts).unwrap();
        for (level, frame) in adj_strided.stored() {
            let dense_frame = adj_dense.frame_at(level).unwrap();
            assert_eq!(frame, dense_frame, "level {level} differs");
        }
    }
}
