use ocp_wrm::discretize::GridSpec;
use ocp_wrm::model::{Field, ProblemSpec};
use ocp_wrm::newton::*;
use ocp_wrm::discretize::HeatStepper;

fn small_case(eps: f64) -> (ProblemSpec, GridSpec) {
    let grid = GridSpec::new(41, 11, 1.0).unwrap();
    let y0 = (0..41).map(|i| 5.0 * (std::f64::consts::PI * grid.x(i)).sin()).collect();
    let f = Field::from_fn(11, 41, |_, _| 20.0);
    let c_y = (0..11).map(|m| 10.0 * (1.0 - grid.t(m)) + 3.0).collect();
    (ProblemSpec::new(&grid, y0, f, 30.0, c_y, eps).unwrap(), grid)
}

#[test]
fn guess_is_deterministic_and_bounded() {
    let (spec, grid) = small_case(0.1);
    let a = random_feasible_guess(&spec, &grid, 7).unwrap();
    let b = random_feasible_guess(&spec, &grid, 7).unwrap();
    assert_eq!(a, b);
    let c = random_feasible_guess(&spec, &grid, 8).unwrap();
    assert_ne!(a, c);
    assert!(a.q.values().iter().all(|v| v.abs() <= spec.c_u));
    assert!(a.q.row(10).iter().all(|&v| v == 0.0));
}

#[test]
fn guess_state_solves_state_equation() {
    let (spec, grid) = small_case(0.1);
    let guess = random_feasible_guess(&spec, &grid, 3).unwrap();
    let res = kkt_residual(&guess, &spec, &grid).unwrap();
    let block = HeatStepper::new(&grid, &grid.full()).block_len();
    let scale = guess.y.max_abs() / (grid.dx() * grid.dx());
    assert!(res[..block].iter().all(|r| r.abs() < 1e-12 * scale));
}

#[test]
fn zero_problem_converges_in_one_step() {
    let grid = GridSpec::new(21, 6, 1.0).unwrap();
    let spec = ProblemSpec::zero(&grid, 1.0, 1.0, 0.1).unwrap();
    let (point, report) = semismooth_newton_solve(&spec, &grid, &SolverConfig::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.outer, 1);
    assert!(point.y.max_abs() < 1e-6 && point.q.max_abs() < 1e-6);

    let zero = KktPoint {
        y: Field::zeros(6, 21),
        q: Field::zeros(6, 21),
    };
    let (_, report) = semismooth_newton_solve_from(&spec, &grid, &SolverConfig::default(), zero).unwrap();
    assert!(report.converged);
    assert_eq!(report.outer, 0);
}

#[test]
fn solution_satisfies_bounds_and_tolerance() {
    let (spec, grid) = small_case(0.1);
    let config = SolverConfig::default();
    let (point, report) = semismooth_newton_solve(&spec, &grid, &config).unwrap();
    assert!(report.converged, "{report:?}");
    assert_eq!(report.inner_counts.len(), report.outer);
    let res = kkt_residual(&point, &spec, &grid).unwrap();
    assert!(grid.l2_weight() * res.iter().map(|r| r * r).sum::<f64>().sqrt() <= config.tol);
    let (u, w) = ocp_wrm::model::recover_controls(&point.y, &point.q, &spec).unwrap();
    for m in 0..grid.n_t {
        for i in 0..grid.n_x {
            assert!(u[(m, i)].abs() <= spec.c_u);
            assert!((point.y[(m, i)] + spec.eps * w[(m, i)]).abs() <= spec.c_y[m] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn jacobian_is_linear() {
    let (spec, grid) = small_case(0.05);
    let point = random_feasible_guess(&spec, &grid, 1).unwrap();
    let dir = random_feasible_guess(&spec, &grid, 2).unwrap();
    let twice = KktPoint {
        y: dir.y.map(|v| 2.0 * v),
        q: dir.q.map(|v| 2.0 * v),
    };
    let a = generalized_jacobian_apply(&point, &dir, &spec, &grid).unwrap();
    let b = generalized_jacobian_apply(&point, &twice, &spec, &grid).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
    let zero = KktPoint {
        y: Field::zeros(11, 41),
        q: Field::zeros(11, 41),
    };
    assert!(generalized_jacobian_apply(&point, &zero, &spec, &grid)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn invalid_config_rejected() {
    let (spec, grid) = small_case(0.1);
    let config = SolverConfig {
        max_outer: 0,
        ..SolverConfig::default()
    };
    assert!(semismooth_newton_solve(&spec, &grid, &config).is_err());
}
