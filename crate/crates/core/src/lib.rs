//! Controlled reaction-diffusion SIR model with noncompliance.
//!
//! The crate implements the full pipeline around the six-compartment
//! compliant/noncompliant SIR system on a rectangle with zero-flux
//! boundaries:
//!
//! - pointwise reaction terms and their hand-derived Jacobians ([`model`]),
//! - IMEX forward simulation with an implicit conjugate-gradient diffusion
//!   solve ([`forward`], [`helmholtz`], [`field`]),
//! - the backward adjoint solve with checkpointed recomputation
//!   ([`adjoint`]),
//! - cost evaluation, gradient assembly, and stationarity diagnostics
//!   ([`objective`]),
//! - projected gradient descent over the admissible control box
//!   ([`optimizer`]),
//! - independent verification oracles: an RK4 reduction for homogeneous
//!   data, central finite differences of the cost, and the linearized
//!   sensitivity system ([`oracles`]),
//! - configuration, presets, and artifact emission ([`config`], [`presets`],
//!   [`report`]).

pub mod adjoint;
pub mod bundles;
pub mod config;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod helmholtz;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod oracles;
pub mod presets;
pub mod report;
pub mod trajectory;

pub use adjoint::{adjoint_source, adjoint_step, simulate_adjoint, CostWeights};
pub use bundles::{AdjointField, ControlField, GradientField, StateField, TangentField};
pub use config::{load_config, parse_config, ExperimentConfig, Mode};
pub use error::{CoreError, Result};
pub use field::{laplacian_apply, Field};
pub use forward::{imex_step, simulate_forward, simulate_forward_observed, SolverOptions};
pub use grid::{Grid, TimeGrid};
pub use helmholtz::helmholtz_solve;
pub use model::{
    mixing_infectious, reaction_jacobian_control, reaction_jacobian_state, reaction_rhs,
    ModelParams, PointControl, PointState,
};
pub use objective::{
    assemble_gradient, assemble_gradient_checkpointed, evaluate_cost, pair_directional,
    relative_cost_reduction, stationarity_residual, CostBreakdown,
};
pub use optimizer::{
    change_metric, optimize, optimize_multi_start, project, InitMode, OptimConfig, OptimResult,
};
pub use oracles::{
    fd_directional_derivative, gaussian_initial_state, linearized_sensitivity,
    ode_reduction_adjoint, ode_reduction_simulate, sensitivity_directional_derivative,
    smooth_random_direction, Problem,
};
pub use presets::{preset, PRESET_NAMES};
pub use report::{run_experiment, RunOutcome, Summary};
pub use trajectory::{
    AdjointTrajectory, ControlTrajectory, GradientTrajectory, StateTrajectory, TangentTrajectory,
};
