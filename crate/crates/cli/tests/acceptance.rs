//! Acceptance suite: one test per criterion, each ending in a single
//! PASS line. Quantitative gates are pinned here, not tuned at run time.
//!
//! Heavy fixtures (the baseline optimization) are shared between criteria
//! through lazily-initialized statics.

use std::sync::LazyLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rdsir_core::{
    assemble_gradient, evaluate_cost, fd_directional_derivative, laplacian_apply,
    ode_reduction_simulate, pair_directional, preset, relative_cost_reduction,
    sensitivity_directional_derivative, simulate_adjoint, simulate_forward,
    smooth_random_direction, ControlTrajectory, Field, Grid, Mode, ModelParams, OptimResult,
    Problem, SolverOptions, StateTrajectory, TimeGrid,
};

fn pass(criterion: &str) {
    println!("[ACCEPTANCE] {criterion}: PASS");
}

/// Criterion 1 - gradient triangulation. On the small problem (16 x 16,
/// T = 5, dt = 0.01) the adjoint gradient, central finite differences, and
/// the linearized sensitivity route agree pairwise within 1e-2 relative for
/// at least 20 random feasible directions.
#[test]
fn criterion_1_gradient_triangulation() {
    let problem = Problem::small_test();

    // Base point: box midpoints nudged by a fixed smooth field, strictly
    // interior so u +/- eps h stays feasible.
    let mut rng = ChaCha8Rng::seed_from_u64(990);
    let bump = smooth_random_direction(problem.grid, problem.time, &mut rng);
    let mut u = ControlTrajectory::midpoint(problem.grid, problem.time, &problem.params).to_dense();
    for (level, frame) in u.frames_mut().iter_mut().enumerate() {
        let hf = bump.frame(level);
        for k in 0..3 {
            for (uv, hv) in frame
                .component_mut(k)
                .as_mut_slice()
                .iter_mut()
                .zip(hf.component(k).as_slice())
            {
                *uv += 0.05 * hv;
            }
        }
    }
    u.check_in_box(&problem.params).unwrap();

    let forward = simulate_forward(
        &problem.y0,
        &u,
        &problem.params,
        problem.time,
        &problem.opts,
    )
    .unwrap();
    let adjoint = simulate_adjoint(&forward, &u, &problem.params, &problem.weights, &problem.opts)
        .unwrap();
    let gradient = assemble_gradient(&forward, &adjoint, &u, &problem.weights, &problem.params)
        .unwrap();

    let l2_norm = |h: &ControlTrajectory| -> f64 {
        let time = h.time();
        let area = h.grid().cell_area();
        let mut acc = 0.0;
        for level in 0..time.n_levels() {
            let wt = time.trapezoid_weight(level) * time.dt();
            let mut sq = 0.0;
            for k in 0..3 {
                for v in h.frame(level).component(k).as_slice() {
                    sq += v * v;
                }
            }
            acc += wt * sq * area;
        }
        acc.sqrt()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());

    let mut rng = ChaCha8Rng::seed_from_u64(20_240_901);
    let mut accepted = 0;
    let mut attempts = 0;
    let mut worst: f64 = 0.0;
    while accepted < 20 {
        attempts += 1;
        assert!(attempts < 200, "direction sampling failed to stabilize");
        let h = smooth_random_direction(problem.grid, problem.time, &mut rng);
        let d_fd = fd_directional_derivative(&problem, &u, &h, 1e-4).unwrap();
        // Directions nearly orthogonal to the gradient carry no relative
        // information; require a well-scaled pairing.
        if d_fd.abs() < 0.1 * l2_norm(&h) {
            continue;
        }
        accepted += 1;
        let d_adj = pair_directional(&gradient, &h);
        let d_sens = sensitivity_directional_derivative(&problem, &u, &h).unwrap();
        for (name, a, b) in [
            ("adjoint vs fd", d_adj, d_fd),
            ("sensitivity vs fd", d_sens, d_fd),
            ("adjoint vs sensitivity", d_adj, d_sens),
        ] {
            let e = rel(a, b);
            worst = worst.max(e);
            assert!(e < 1e-2, "{name}: {a} vs {b} (relative error {e:.3e})");
        }
    }
    pass(&format!(
        "criterion 1 (gradient triangulation, {accepted} directions, worst pairwise {worst:.2e})"
    ));
}

/// Criterion 2 - discrete mass law at the full default resolution
/// (64 x 64, dt = 0.05, T = 200): total mass tracks
/// (||b||_1/delta)(1 - e^(-delta t)) + e^(-delta t) ||Y_0||_1 within 1%
/// relative at every time level.
#[test]
fn criterion_2_mass_law() {
    let cfg = preset("uncontrolled").unwrap();
    let problem = cfg.build_problem().unwrap();
    let controls =
        ControlTrajectory::uncontrolled(problem.grid, problem.time, &problem.params);
    let traj = simulate_forward(
        &problem.y0,
        &controls,
        &problem.params,
        problem.time,
        &problem.opts,
    )
    .unwrap();

    let b_mass = problem.params.birth_rate.integral();
    let delta = problem.params.delta;
    let m0 = problem.y0.total_mass();
    let mut worst = 0.0f64;
    for level in 0..problem.time.n_levels() {
        let t = problem.time.time(level);
        let expected = b_mass / delta * (1.0 - (-delta * t).exp()) + (-delta * t).exp() * m0;
        worst = worst.max((traj.mass(level) - expected).abs() / expected);
    }
    assert!(worst < 0.01, "worst relative mass error {worst:.3e}");
    pass(&format!("criterion 2 (mass law, worst rel error {worst:.2e})"));
}

/// Criterion 3 - nonnegativity and feasibility across all seven presets
/// (at a reduced resolution so the suite stays fast). Every forward solve
/// inside the optimizer enforces min state >= -1e-12 (it errors otherwise),
/// every projected iterate is checked against the box exactly, and the final
/// trajectories are re-verified here.
#[test]
fn criterion_3_presets_nonnegative_and_feasible() {
    for name in rdsir_core::PRESET_NAMES {
        let mut cfg = preset(name).unwrap();
        cfg.grid.nx = 24;
        cfg.grid.ny = 24;
        cfg.time.t_final = 30.0;
        cfg.optim.max_iter = 12;
        let problem = cfg.build_problem().unwrap();

        if cfg.mode == Mode::Simulate {
            let [a, m, n] = cfg.controls.values(&problem.params);
            let controls = ControlTrajectory::constant(problem.grid, problem.time, a, m, n);
            let traj = simulate_forward(
                &problem.y0,
                &controls,
                &problem.params,
                problem.time,
                &problem.opts,
            )
            .unwrap();
            assert!(
                traj.min_value() >= -1e-12,
                "{name}: min state {}",
                traj.min_value()
            );
            controls.check_in_box(&problem.params).unwrap();
        } else {
            let optim_cfg = cfg.build_optim().unwrap();
            let result = rdsir_core::optimize(
                &optim_cfg,
                &problem.params,
                &problem.weights,
                &problem.y0,
                problem.time,
                &problem.opts,
            )
            .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(
                result.states.min_value() >= -1e-12,
                "{name}: min state {}",
                result.states.min_value()
            );
            result
                .controls
                .check_in_box(&problem.params)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
    pass("criterion 3 (nonnegativity and feasibility across 7 presets)");
}

/// Criterion 4 - ODE-oracle equivalence: a spatially homogeneous
/// configuration matches the RK4 reduction within 1e-3 relative sup-norm
/// over [0, 20]. The IMEX scheme reduces to forward Euler on homogeneous
/// data (measured error 8.4e-4 at dt = 0.005, first order in dt), so
/// dt = 0.002 meets the gate with margin.
#[test]
fn criterion_4_ode_oracle_equivalence() {
    let grid = Grid::default_square(8).unwrap();
    let mut p = ModelParams::baseline(grid);
    p.birth_rate = Field::constant(grid, 0.1);
    let point = [1.0, 0.1, 0.0, 0.05, 0.005, 0.0];
    let y0 = rdsir_core::StateField::from_fields(std::array::from_fn(|k| {
        Field::constant(grid, point[k])
    }));
    let time = TimeGrid::from_dt(20.0, 0.002).unwrap();
    let u_const = [0.1, 0.0, 0.0];
    let u = ControlTrajectory::constant(grid, time, u_const[0], u_const[1], u_const[2]);
    let opts = SolverOptions {
        checkpoint_stride: 1000,
        ..Default::default()
    };
    let traj = simulate_forward(&y0, &u, &p, time, &opts).unwrap();
    let oracle = ode_reduction_simulate(point, u_const, 0.1, &p, time);

    let area = grid.cell_area() * grid.len() as f64;
    let mut sup_err = 0.0f64;
    let mut sup_ref = 0.0f64;
    for (level, ode) in oracle.iter().enumerate() {
        for k in 0..6 {
            let v = traj.integrals()[level][k] / area;
            sup_err = sup_err.max((v - ode[k]).abs());
            sup_ref = sup_ref.max(ode[k].abs());
        }
    }
    let rel = sup_err / sup_ref;
    assert!(rel < 1e-3, "relative sup-norm error {rel:.3e}");
    pass(&format!("criterion 4 (ODE-oracle equivalence, rel {rel:.2e})"));
}

/// Shared baseline optimization at the reduced acceptance scale
/// (32 x 32, T = 100, dt = 0.05; <= 3 min budget), plus its uncontrolled
/// reference. Used by criteria 5 and 7.
struct BaselineRun {
    problem: Problem,
    result: OptimResult,
    reference: StateTrajectory,
    j_uncontrolled: f64,
}

static BASELINE: LazyLock<BaselineRun> = LazyLock::new(|| {
    let mut cfg = preset("baseline").unwrap();
    cfg.grid.nx = 32;
    cfg.grid.ny = 32;
    cfg.time.t_final = 100.0;
    let problem = cfg.build_problem().unwrap();
    let optim_cfg = cfg.build_optim().unwrap();
    let result = rdsir_core::optimize(
        &optim_cfg,
        &problem.params,
        &problem.weights,
        &problem.y0,
        problem.time,
        &problem.opts,
    )
    .expect("baseline optimization runs");
    let u_ref = ControlTrajectory::uncontrolled(problem.grid, problem.time, &problem.params);
    let reference = simulate_forward(
        &problem.y0,
        &u_ref,
        &problem.params,
        problem.time,
        &problem.opts,
    )
    .expect("uncontrolled reference runs");
    let j_uncontrolled = evaluate_cost(&reference, &u_ref, &problem.weights).j_total;
    BaselineRun {
        problem,
        result,
        reference,
        j_uncontrolled,
    }
});

/// Criterion 5 - baseline optimization achieves a relative cost reduction in
/// [3%, 15%] with a strict cost improvement; additionally the cost history
/// is non-increasing after the first step decay.
#[test]
fn criterion_5_baseline_relative_cost_reduction() {
    let run = &*BASELINE;
    let j_opt = run.result.final_cost().j_total;
    assert!(
        j_opt < run.j_uncontrolled,
        "no strict improvement: {j_opt} vs {}",
        run.j_uncontrolled
    );
    let relcr = relative_cost_reduction(run.j_uncontrolled, j_opt).unwrap();
    assert!(
        (0.03..=0.15).contains(&relcr),
        "RelCR {relcr:.4} outside [0.03, 0.15]"
    );

    // Non-increasing cost after the first eta decay (iteration 10).
    let history = &run.result.cost_history;
    for (n, pair) in history.windows(2).enumerate().skip(10) {
        assert!(
            pair[1].j_total <= pair[0].j_total * (1.0 + 1e-9),
            "cost increased at iteration {n}: {} -> {}",
            pair[0].j_total,
            pair[1].j_total
        );
    }

    // Stationarity residual of the converged iterate, regression-locked from
    // the measured value (1.755 at this scale). The CHANGE test stops the
    // verbatim schedule well before first-order stationarity, so the residual
    // is an observability diagnostic, not a small number.
    let stationarity = run.result.stationarity;
    assert!(
        stationarity > 0.0 && stationarity < 2.5,
        "stationarity residual drifted: {stationarity}"
    );
    pass(&format!(
        "criterion 5 (baseline RelCR {:.2}% in [3%, 15%], J {:.4} < J_unc {:.4})",
        100.0 * relcr,
        j_opt,
        run.j_uncontrolled
    ));
}

/// Criterion 6 - the relative cost reduction is strictly decreasing in the
/// control-cost weight zeta over {1.0, 0.4, 0.2, 0.1}.
#[test]
fn criterion_6_monotone_zeta_response() {
    let mut relcrs = Vec::new();
    for zeta in [1.0, 0.4, 0.2, 0.1] {
        let mut cfg = preset("baseline").unwrap();
        cfg.weights.zeta = zeta;
        cfg.grid.nx = 24;
        cfg.grid.ny = 24;
        cfg.time.t_final = 50.0;
        let problem = cfg.build_problem().unwrap();
        let optim_cfg = cfg.build_optim().unwrap();
        let result = rdsir_core::optimize(
            &optim_cfg,
            &problem.params,
            &problem.weights,
            &problem.y0,
            problem.time,
            &problem.opts,
        )
        .unwrap();
        let u_ref = ControlTrajectory::uncontrolled(problem.grid, problem.time, &problem.params);
        let reference = simulate_forward(
            &problem.y0,
            &u_ref,
            &problem.params,
            problem.time,
            &problem.opts,
        )
        .unwrap();
        let j_unc = evaluate_cost(&reference, &u_ref, &problem.weights).j_total;
        let relcr = relative_cost_reduction(j_unc, result.final_cost().j_total).unwrap();
        relcrs.push((zeta, relcr));
    }
    for pair in relcrs.windows(2) {
        assert!(
            pair[1].1 > pair[0].1,
            "RelCR not strictly decreasing in zeta: {relcrs:?}"
        );
    }
    pass(&format!(
        "criterion 6 (monotone zeta response: {})",
        relcrs
            .iter()
            .map(|(z, r)| format!("zeta {z} -> {:.2}%", 100.0 * r))
            .collect::<Vec<_>>()
            .join(", ")
    ));
}

/// Criterion 7 - qualitative controlled-run shape: (a) the alpha control
/// effort concentrates near t = 0 (the early window carries strictly more
/// excess alpha mass than a mid-horizon window), and (b) the noncompliant
/// fraction settles strictly lower than in the uncontrolled run.
#[test]
fn criterion_7_qualitative_shape() {
    let run = &*BASELINE;
    let time = run.problem.time;
    let alpha_lower = run.problem.params.alpha_lower;
    let area_excess = |level: usize| -> f64 {
        let f = run.result.controls.frame(level).alpha();
        f.as_slice()
            .iter()
            .map(|v| v - alpha_lower)
            .sum::<f64>()
            * run.problem.grid.cell_area()
    };
    let quarter = time.n_steps() / 4;
    let early: f64 = (0..quarter).map(area_excess).sum::<f64>() / quarter as f64;
    let mid: f64 = (2 * quarter..3 * quarter).map(area_excess).sum::<f64>() / quarter as f64;
    assert!(
        early > mid,
        "alpha effort not concentrated near t=0: early {early:.4e} vs mid {mid:.4e}"
    );

    let frac = |traj: &StateTrajectory| {
        let ints = traj.integrals()[time.n_steps()];
        (ints[3] + ints[4] + ints[5]) / ints.iter().sum::<f64>()
    };
    let controlled = frac(&run.result.states);
    let uncontrolled = frac(&run.reference);
    assert!(
        controlled < uncontrolled,
        "noncompliant asymptote not reduced: {controlled:.4} vs {uncontrolled:.4}"
    );
    pass(&format!(
        "criterion 7 (alpha early/mid {early:.3}/{mid:.3}, noncompliant fraction {controlled:.3} < {uncontrolled:.3})"
    ));
}

/// Criterion 8 - convergence orders: first order in time for the forward
/// solver (Richardson ratio in [1.7, 2.3] under dt halving) and second order
/// in space for the Laplacian on the analytic Neumann eigenmode.
#[test]
fn criterion_8_convergence_orders() {
    // Temporal order on the baseline problem at 16 x 16.
    let grid = Grid::default_square(16).unwrap();
    let p = ModelParams::baseline(grid);
    let y0 = rdsir_core::gaussian_initial_state(grid);
    let solve = |n_steps: usize| {
        let time = TimeGrid::new(2.0, n_steps).unwrap();
        let u = ControlTrajectory::uncontrolled(grid, time, &p);
        simulate_forward(&y0, &u, &p, time, &SolverOptions::default()).unwrap()
    };
    let coarse = solve(40);
    let medium = solve(80);
    let fine = solve(160);
    let ratio = coarse.final_frame().sup_diff(medium.final_frame())
        / medium.final_frame().sup_diff(fine.final_frame());
    assert!(
        (1.7..=2.3).contains(&ratio),
        "temporal convergence ratio {ratio}"
    );

    // Spatial order of the Laplacian on cos(pi (x + 5) / 10).
    let lambda = -(std::f64::consts::PI / 10.0).powi(2);
    let mut errors = Vec::new();
    for n in [16usize, 32, 64] {
        let g = Grid::default_square(n).unwrap();
        let f = Field::from_fn(g, |x, _| (std::f64::consts::PI * (x + 5.0) / 10.0).cos());
        let lap = laplacian_apply(&f);
        let mut err = 0.0f64;
        for (l, v) in lap.as_slice().iter().zip(f.as_slice()) {
            err = err.max((l - lambda * v).abs());
        }
        errors.push(err);
    }
    let s1 = errors[0] / errors[1];
    let s2 = errors[1] / errors[2];
    assert!(
        (3.5..=4.5).contains(&s1) && (3.5..=4.5).contains(&s2),
        "spatial convergence ratios {s1}, {s2}"
    );
    pass(&format!(
        "criterion 8 (temporal ratio {ratio:.2}, spatial ratios {s1:.2}/{s2:.2})"
    ));
}

/// Criterion 9 - determinism of the shipped binary: two invocations of
/// `optimize --preset baseline --seed 7` (reduced resolution via the
/// documented flags) produce byte-identical summary.json files, cost
/// histories included.
#[test]
fn criterion_9_binary_determinism() {
    let bin = env!("CARGO_BIN_EXE_rdsir");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let status = std::process::Command::new(bin)
            .current_dir(dir.path())
            .args([
                "optimize",
                "--preset",
                "baseline",
                "--seed",
                "7",
                "--nx",
                "16",
                "--dt",
                "0.1",
                "--out",
                "run",
                "--quiet",
            ])
            .status()
            .expect("binary runs");
        assert!(status.success(), "binary exited with {status}");
        let bytes = std::fs::read(dir.path().join("run/summary.json")).unwrap();
        outputs.push(bytes);
    }
    assert_eq!(outputs[0], outputs[1], "summary.json differs between runs");
    let parsed: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert!(
        !parsed["cost_history"].as_array().unwrap().is_empty(),
        "cost history missing from summary"
    );
    pass("criterion 9 (byte-identical summary.json across reruns)");
}
