//! Shared setup for the solver benchmarks.

use rdsir_core::{
    gaussian_initial_state, ControlTrajectory, CostWeights, Grid, ModelParams, SolverOptions,
    StateField, TimeGrid,
};

pub struct BenchSetup {
    pub grid: Grid,
    pub params: ModelParams,
    pub weights: CostWeights,
    pub y0: StateField,
    pub time: TimeGrid,
    pub controls: ControlTrajectory,
    pub opts: SolverOptions,
}

/// Baseline problem at the given square resolution with a short horizon.
pub fn setup(n: usize, t_final: f64, dt: f64) -> BenchSetup {
    let grid = Grid::default_square(n).expect("valid grid");
    let params = ModelParams::baseline(grid);
    let time = TimeGrid::from_dt(t_final, dt).expect("valid time grid");
    let controls = ControlTrajectory::uncontrolled(grid, time, &params);
    BenchSetup {
        grid,
        params: params.clone(),
        weights: CostWeights::default(),
        y0: gaussian_initial_state(grid),
        time,
        controls,
        opts: SolverOptions::default(),
    }
}
