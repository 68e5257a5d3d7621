//! Cost functional evaluation, gradient assembly, relative cost reduction,
//! and the first-order stationarity residual.
//!
//! Quadrature is trapezoid in time and cell sums times cell measure in space,
//! consistent with the finite-difference state representation and exact for
//! constants.

use serde::{Deserialize, Serialize};

use crate::adjoint::{adjoint_sweep, CostWeights};
use crate::bundles::GradientField;
use crate::error::{CoreError, Result};
use crate::forward::SolverOptions;
use crate::model::{jacobian_control_transpose_apply, ModelParams, N_CONTROLS};
use crate::trajectory::{
    AdjointTrajectory, ControlTrajectory, GradientTrajectory, StateTrajectory,
};

/// The three cost terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Integral of `I + I*` over space and time.
    pub i_total: f64,
    /// Integral of `S* + I* + R*` over space and time.
    pub n_star_total: f64,
    /// Integral of the squared control cost polynomials.
    pub c_total: f64,
    /// `lambda1 i_total + lambda2 n_star_total + zeta/2 c_total`.
    pub j_total: f64,
}

/// Evaluates the cost functional. State terms use the per-level spatial
/// integrals recorded densely by the forward solve, so checkpointed
/// trajectories evaluate exactly.
pub fn evaluate_cost(
    states: &StateTrajectory,
    controls: &ControlTrajectory,
    w: &CostWeights,
) -> CostBreakdown {
    let time = states.time();
    assert!(
        controls.time() == time,
        "evaluate_cost requires aligned trajectories"
    );
    let dt = time.dt();
    let area = controls.grid().cell_area();

    let mut i_total = 0.0;
    let mut n_star_total = 0.0;
    let mut c_total = 0.0;
    for level in 0..time.n_levels() {
        let wt = time.trapezoid_weight(level) * dt;
        let ints = states.integrals()[level];
        i_total += wt * (ints[1] + ints[4]);
        n_star_total += wt * (ints[3] + ints[4] + ints[5]);

        let u = controls.frame(level);
        let mut quad = 0.0;
        let alpha = u.alpha().as_slice();
        let mu = u.mu().as_slice();
        let nu = u.nu().as_slice();
        for idx in 0..alpha.len() {
            let qa = alpha[idx] - w.alpha_cost_offset;
            quad += qa * qa + mu[idx] * mu[idx] + nu[idx] * nu[idx];
        }
        c_total += wt * quad * area;
    }
    let j_total = w.lambda1 * i_total + w.lambda2 * n_star_total + 0.5 * w.zeta * c_total;
    CostBreakdown {
        i_total,
        n_star_total,
        c_total,
        j_total,
    }
}

fn gradient_frame(
    y: &crate::bundles::StateField,
    phi: &crate::bundles::AdjointField,
    u: &crate::bundles::ControlField,
    w: &CostWeights,
    p: &ModelParams,
) -> GradientField {
    let grid = y.grid();
    let mut components: [crate::field::Field; N_CONTROLS] =
        std::array::from_fn(|_| crate::field::Field::zeros(grid));
    {
        let mut slices: Vec<&mut [f64]> =
            components.iter_mut().map(|f| f.as_mut_slice()).collect();
        for idx in 0..grid.len() {
            let y_pt = y.point(idx);
            let u_pt = u.point(idx);
            let coupled = jacobian_control_transpose_apply(&y_pt, &u_pt, p, phi.point_values(idx));
            let q = w.control_cost(u_pt.as_array());
            for k in 0..N_CONTROLS {
                slices[k][idx] = coupled[k] + w.zeta * q[k];
            }
        }
    }
    GradientField::from_fields(components)
}

/// Assembles the pointwise gradient density `F_u(y, u)^T phi + zeta q(u)` per
/// frame from already-solved trajectories. Both the forward and adjoint
/// trajectories must be dense; checkpointed runs use
/// [`assemble_gradient_checkpointed`].
pub fn assemble_gradient(
    forward: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    controls: &ControlTrajectory,
    w: &CostWeights,
    p: &ModelParams,
) -> Result<GradientTrajectory> {
    let time = forward.time();
    controls.check_aligned(&time, "assemble_gradient controls")?;
    if adjoint.time() != time {
        return Err(CoreError::MisalignedTrajectories(
            "assemble_gradient: adjoint time grid differs".into(),
        ));
    }
    if !forward.is_dense() || !adjoint.is_dense() {
        return Err(CoreError::MisalignedTrajectories(
            "assemble_gradient requires dense trajectories (stride 1)".into(),
        ));
    }
    let frames = (0..time.n_levels())
        .map(|level| {
            let y = forward.frame_at(level).ok_or_else(|| {
                CoreError::MisalignedTrajectories(format!("missing forward frame {level}"))
            })?;
            let phi = adjoint.frame_at(level).ok_or_else(|| {
                CoreError::MisalignedTrajectories(format!("missing adjoint frame {level}"))
            })?;
            Ok(gradient_frame(y, phi, controls.frame(level), w, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientTrajectory::new(time, frames))
}

/// Fused backward sweep producing the dense gradient without materializing a
/// dense adjoint trajectory; identical arithmetic to [`assemble_gradient`] on
/// the frames the sweep visits.
pub fn assemble_gradient_checkpointed(
    forward: &StateTrajectory,
    controls: &ControlTrajectory,
    w: &CostWeights,
    p: &ModelParams,
    opts: &SolverOptions,
) -> Result<GradientTrajectory> {
    let time = forward.time();
    controls.check_aligned(&time, "assemble_gradient controls")?;
    let mut frames: Vec<Option<GradientField>> = vec![None; time.n_levels()];
    adjoint_sweep(forward, controls, p, w, opts, |level, phi, y| {
        frames[level] = Some(gradient_frame(y, phi, controls.frame(level), w, p));
        Ok(())
    })?;
    let frames = frames
        .into_iter()
        .map(|f| f.expect("sweep visits every level"))
        .collect();
    Ok(GradientTrajectory::new(time, frames))
}

/// L2(Q_T) pairing of a gradient with a control direction.
pub fn pair_directional(g: &GradientTrajectory, h: &ControlTrajectory) -> f64 {
    let time = g.time();
    assert!(h.time() == time, "pairing requires aligned trajectories");
    let area = h.grid().cell_area();
    let dt = time.dt();
    let mut tot = 0.0;
    for level in 0..time.n_levels() {
        let wt = time.trapezoid_weight(level) * dt;
        let gf = g.frame(level);
        let hf = h.frame(level);
        let mut dot = 0.0;
        for k in 0..N_CONTROLS {
            for (gv, hv) in gf
                .component(k)
                .as_slice()
                .iter()
                .zip(hf.component(k).as_slice())
            {
                dot += gv * hv;
            }
        }
        tot += wt * dot * area;
    }
    tot
}

/// Relative cost reduction `(J_unc - J_opt) / J_unc`; a fraction, reported as
/// a percentage in run outputs.
pub fn relative_cost_reduction(j_uncontrolled: f64, j_optimal: f64) -> Result<f64> {
    if !(j_uncontrolled > 0.0) {
        return Err(CoreError::DomainError(format!(
            "relative cost reduction needs a positive uncontrolled cost (got {j_uncontrolled})"
        )));
    }
    Ok((j_uncontrolled - j_optimal) / j_uncontrolled)
}

/// First-order stationarity residual `|| u - Pi_box(u - g) ||_{L2(Q_T)}`.
/// Zero exactly when the discrete variational inequality holds.
pub fn stationarity_residual(
    u: &ControlTrajectory,
    g: &GradientTrajectory,
    p: &ModelParams,
) -> f64 {
    let time = u.time();
    assert!(g.time() == time, "residual requires aligned trajectories");
    let bounds = p.control_bounds();
    let area = u.grid().cell_area();
    let dt = time.dt();
    let mut acc = 0.0;
    for level in 0..time.n_levels() {
        let wt = time.trapezoid_weight(level) * dt;
        let uf = u.frame(level);
        let gf = g.frame(level);
        let mut sq = 0.0;
        for (k, (lo, hi)) in bounds.iter().enumerate() {
            for (uv, gv) in uf
                .component(k)
                .as_slice()
                .iter()
                .zip(gf.component(k).as_slice())
            {
                let diff = uv - (uv - gv).clamp(*lo, *hi);
                sq += diff * diff;
            }
        }
        acc += wt * sq * area;
    }
    acc.sqrt()
}
