use mfc_sir::model::{constraint_residual, euler_uncontrolled, make_preset, mass_series, objective};
use mfc_sir::solver::solve_observed;
use mfc_sir::{build_kernel, solve, Error, GridSpec, Group, ModelParams, PresetName, SolverOptions};

fn exp1_params() -> ModelParams {
    let (beta, gamma) = PresetName::Exp1.rates();
    ModelParams {
        beta,
        gamma,
        ..ModelParams::default()
    }
}

#[test]
fn small_control_run_is_feasible_and_helps() {
    let grid = GridSpec::new(16, 16, 6).unwrap();
    let preset = make_preset(PresetName::Exp1, &grid);
    let params = exp1_params();
    let (state, report) = solve(&preset, grid, &params, &SolverOptions::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.backoffs, 0);
    assert!(state.rho.iter().all(|f| f.min() >= 0.0));

    // initial slice is untouched
    for g in Group::ALL {
        assert_eq!(state.rho(g).slice(0), preset.rho0[g.index()]);
    }
    let kernel = build_kernel(grid, params.sigma1, params.sigma2).unwrap();
    let res = constraint_residual(&state, &params, &kernel).unwrap();
    assert!(res.norms.iter().all(|&r| r < 5e-2), "{:?}", res.norms);
    assert_eq!(res.norms, *report.residuals.last().unwrap());

    let total: Vec<f64> = (0..grid.nt)
        .map(|n| (0..3).map(|g| report.masses[g][n]).sum())
        .collect();
    assert!(total.iter().all(|t| (t - total[0]).abs() < 1e-3));

    let base = euler_uncontrolled(grid, &preset.rho0, params.beta, params.gamma).unwrap();
    let i_base = *mass_series(&base[1]).last().unwrap();
    assert!(*report.masses[1].last().unwrap() < i_base);

    let p = objective(&state, &params, &preset.terminal).unwrap();
    assert!((p.total - report.objective.last().unwrap()).abs() < 1e-12 * p.total.abs());
}

#[test]
fn observer_sees_every_stride() {
    let grid = GridSpec::new(10, 10, 4).unwrap();
    let preset = make_preset(PresetName::Exp2a, &grid);
    let opts = SolverOptions {
        max_iter: 95,
        tol: 1e-300,
        log_every: 20,
        ..SolverOptions::default()
    };
    let mut seen = Vec::new();
    let (_, report) = solve_observed(&preset, grid, &ModelParams::default(), &opts, &mut |p| {
        seen.push(p.iteration)
    })
    .unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations(), 95);
    assert_eq!(seen, vec![20, 40, 60, 80, 95]);
    assert_eq!(report.kkt.iter().map(|(k, _)| *k).collect::<Vec<_>>(), seen);
}

#[test]
fn oversized_steps_back_off_or_fail_cleanly() {
    let grid = GridSpec::new(12, 12, 5).unwrap();
    let preset = make_preset(PresetName::Exp1, &grid);
    let opts = SolverOptions {
        tau: [40.0; 3],
        sigma: [40.0; 3],
        max_iter: 3000,
        max_backoffs: 8,
        ..SolverOptions::default()
    };
    match solve(&preset, grid, &exp1_params(), &opts) {
        Ok((state, report)) => {
            assert!(report.backoffs > 0);
            assert!(report.tau[0] < 40.0);
            assert!(state.is_finite());
        }
        Err(e) => assert!(matches!(e, Error::Diverged { .. }), "{e}"),
    }
}

#[test]
fn invalid_options_are_rejected() {
    let grid = GridSpec::new(8, 8, 3).unwrap();
    let preset = make_preset(PresetName::Exp1, &grid);
    let bad = SolverOptions {
        tau: [0.1, -1.0, 0.1],
        ..SolverOptions::default()
    };
    assert!(solve(&preset, grid, &ModelParams::default(), &bad).is_err());
    let params = ModelParams {
        alpha_i: 0.0,
        ..ModelParams::default()
    };
    assert!(solve(&preset, grid, &params, &SolverOptions::default()).is_err());
}
