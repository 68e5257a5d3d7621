//! Programmatic use of the solver and optimizer APIs: runs the uncontrolled
//! reference and one optimization at a chosen scale and prints the cost
//! trail.
//!
//! `cargo run --release -p rdsir-core --example probe -- <nx> <t_final> [zeta] [seed] [init]`

use rdsir_core::{
    evaluate_cost, gaussian_initial_state, optimize, simulate_forward, ControlTrajectory,
    CostWeights, Grid, ModelParams, OptimConfig, SolverOptions, TimeGrid,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let nx: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(32);
    let t_final: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100.0);
    let zeta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(42);

    let grid = Grid::default_square(nx).unwrap();
    let p = ModelParams::baseline(grid);
    let mut w = CostWeights::default();
    w.zeta = zeta;
    let time = TimeGrid::from_dt(t_final, 0.05).unwrap();
    let y0 = gaussian_initial_state(grid);
    let opts = SolverOptions::default();

    let start = std::time::Instant::now();
    let u_ref = ControlTrajectory::uncontrolled(grid, time, &p);
    let ref_traj = simulate_forward(&y0, &u_ref, &p, time, &opts).unwrap();
    let ref_cost = evaluate_cost(&ref_traj, &u_ref, &w);
    println!(
        "uncontrolled: J = {:.6} (I {:.4}, N* {:.4}, C {:.4})  [{:?}]",
        ref_cost.j_total,
        ref_cost.i_total,
        ref_cost.n_star_total,
        ref_cost.c_total,
        start.elapsed()
    );

    let init = match args.get(5).map(|s| s.as_str()) {
        Some("midpoint") => rdsir_core::InitMode::Midpoint,
        Some("uncontrolled") => rdsir_core::InitMode::Uncontrolled,
        _ => rdsir_core::InitMode::Random,
    };
    let cfg = OptimConfig {
        seed,
        init,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let result = optimize(&cfg, &p, &w, &y0, time, &opts).unwrap();
    let j_opt = result.final_cost().j_total;
    let relcr = 100.0 * (ref_cost.j_total - j_opt) / ref_cost.j_total;
    println!(
        "optimize: J = {:.6} after {} iters (converged {}), RelCR = {:.3}%, stationarity {:.3e}  [{:?}]",
        j_opt,
        result.iterations,
        result.converged,
        relcr,
        result.stationarity,
        t0.elapsed()
    );
    let c = result.final_cost();
    println!(
        "breakdown: I {:.4}, N* {:.4}, C {:.4}",
        c.i_total, c.n_star_total, c.c_total
    );
    for (n, (cost, change)) in result
        .cost_history
        .iter()
        .zip(result.change_history.iter().chain(std::iter::once(&0.0)))
        .enumerate()
    {
        println!("  iter {n:3}  J = {:.6}  change = {change:.3e}", cost.j_total);
    }
}
