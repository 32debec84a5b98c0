use ocp_wrm::discretize::*;
use ocp_wrm::model::Field;
use ocp_wrm::Error;
use std::f64::consts::PI;

#[test]
fn decomposition_indices() {
    let grid = GridSpec::new(161, 21, 1.0).unwrap();
    let d = build_decomposition(&grid, 1, 100.0).unwrap();
    assert_eq!((d.i_minus, d.i_plus), (79, 81));
    assert_eq!((d.subgrids[0].start, d.subgrids[0].end() - 1), (0, 81));
    assert_eq!((d.subgrids[1].start, d.subgrids[1].end() - 1), (79, 160));
    assert_eq!(d.i_plus - d.i_minus, 2);

    let d = build_decomposition(&grid, 4, 1.0).unwrap();
    assert_eq!(d.subgrids[0].len, 85);
    assert_eq!(d.subgrids[1].len, 85);
    assert_eq!(d.i_plus - d.i_minus, 8);
    assert!((grid.x(d.i_plus) + grid.x(d.i_minus)).abs() < 1e-14);

    assert!(matches!(build_decomposition(&grid, 0, 1.0), Err(Error::Parameter(_))));
    assert!(build_decomposition(&grid, 39, 1.0).is_ok());
    assert!(build_decomposition(&grid, 40, 1.0).is_err());
    assert!(build_decomposition(&grid, 1, 0.0).is_err());
    let even = GridSpec::new(160, 21, 1.0).unwrap();
    assert!(build_decomposition(&even, 1, 1.0).is_err());
}

#[test]
fn robin_trace_examples() {
    let grid = GridSpec::new(161, 3, 1.0).unwrap();
    let d = build_decomposition(&grid, 1, 1.0).unwrap();
    let linear = Field::from_fn(3, 161, |_, i| grid.x(i));
    let donor2 = linear.restrict(d.subgrid(2)).unwrap();
    let value = robin_trace(&donor2, &d, 1, 1).unwrap();
    assert!((value - 1.0125).abs() < 1e-12);

    let constant = Field::from_fn(3, 161, |_, _| 2.5);
    let donor1 = constant.restrict(d.subgrid(1)).unwrap();
    assert!((robin_trace(&donor1, &d, 2, 0).unwrap() + 2.5).abs() < 1e-12);

    let zero = Field::zeros(3, 161).restrict(d.subgrid(2)).unwrap();
    assert_eq!(robin_trace(&zero, &d, 1, 2).unwrap(), 0.0);

    // subdomain 1 does not contain the stencil of its own interface's
    // counterpart at x = -L
    let narrow = Field::zeros_at(3, 10, 0);
    assert!(matches!(
        robin_trace(&narrow, &d, 1, 0),
        Err(Error::Decomposition(_))
    ));
}

#[test]
fn zero_data_gives_zero() {
    let grid = GridSpec::new(21, 11, 1.0).unwrap();
    let full = grid.full();
    let zero = Field::zeros(11, 21);
    let y = forward_heat_solve(&grid, &full, &zero, &[0.0; 21], None).unwrap();
    assert_eq!(y.max_abs(), 0.0);
    let q = backward_adjoint_solve(&grid, &full, &zero, None).unwrap();
    assert_eq!(q.max_abs(), 0.0);
}

#[test]
fn long_horizon_reaches_steady_state() {
    let n_x = 41;
    let grid = GridSpec::new(n_x, 401, 40.0).unwrap();
    let source = Field::from_fn(401, n_x, |_, _| 3.0);
    let y = forward_heat_solve(&grid, &grid.full(), &source, &vec![0.0; n_x], None).unwrap();
    // steady discrete problem -y'' = 3 with zero ends is solved exactly by
    // the quadratic 3/2 (1 - x^2) on a uniform grid
    let last = y.row(400);
    for i in 0..n_x {
        let x = grid.x(i);
        assert!((last[i] - 1.5 * (1.0 - x * x)).abs() < 1e-8, "node {i}");
    }
}

#[test]
fn backward_is_time_reversed_forward() {
    let n_t = 9;
    let n_x = 17;
    let grid = GridSpec::new(n_x, n_t, 0.7).unwrap();
    let source = Field::from_fn(n_t, n_x, |m, i| ((m * 7 + i * 3) % 5) as f64 - 2.0);
    let q = backward_adjoint_solve(&grid, &grid.full(), &source, None).unwrap();
    // q(t) solves the forward problem with source -s(T - t) read backwards
    let reflected = Field::from_fn(n_t, n_x, |m, i| -source[(n_t - 1 - m, i)]);
    let mut shifted = Field::zeros(n_t, n_x);
    for m in 1..n_t {
        // forward uses the source at the new level, the adjoint at the older one
        shifted.row_mut(m).copy_from_slice(reflected.row(m));
    }
    let y = forward_heat_solve(&grid, &grid.full(), &shifted, &vec![0.0; n_x], None).unwrap();
    for m in 0..n_t {
        for i in 0..n_x {
            assert!((q[(m, i)] - y[(n_t - 1 - m, i)]).abs() < 1e-12);
        }
    }
}

#[test]
fn solves_are_linear() {
    let grid = GridSpec::new(33, 6, 1.0).unwrap();
    let d = build_decomposition(&grid, 2, 3.0).unwrap();
    let sub = *d.subgrid(1);
    let s1 = Field::from_fn(6, 33, |m, i| (m + i) as f64).restrict(&sub).unwrap();
    let s2 = Field::from_fn(6, 33, |m, i| (i as f64 * 0.3).cos() * m as f64).restrict(&sub).unwrap();
    let g1: Vec<f64> = (0..6).map(|m| m as f64).collect();
    let g2: Vec<f64> = (0..6).map(|m| -(m as f64).sqrt()).collect();
    let zero = vec![0.0; sub.len];
    let a = 2.0;
    let b = -0.5;
    let combo = Field::from_vec(
        6,
        sub.len,
        sub.start,
        s1.values().iter().zip(s2.values()).map(|(x, y)| a * x + b * y).collect(),
    )
    .unwrap();
    let g: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
    let y1 = forward_heat_solve(&grid, &sub, &s1, &zero, Some(&g1)).unwrap();
    let y2 = forward_heat_solve(&grid, &sub, &s2, &zero, Some(&g2)).unwrap();
    let y = forward_heat_solve(&grid, &sub, &combo, &zero, Some(&g)).unwrap();
    for k in 0..y.values().len() {
        let expected = a * y1.values()[k] + b * y2.values()[k];
        assert!((y.values()[k] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }
    let q1 = backward_adjoint_solve(&grid, &sub, &s1, Some(&g1)).unwrap();
    let q2 = backward_adjoint_solve(&grid, &sub, &s2, Some(&g2)).unwrap();
    let q = backward_adjoint_solve(&grid, &sub, &combo, Some(&g)).unwrap();
    for k in 0..q.values().len() {
        let expected = a * q1.values()[k] + b * q2.values()[k];
        assert!((q.values()[k] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }
}

#[test]
fn robin_row_is_enforced() {
    let grid = GridSpec::new(41, 5, 1.0).unwrap();
    let d = build_decomposition(&grid, 3, 7.0).unwrap();
    for j in 1..=2 {
        let sub = *d.subgrid(j);
        let source = Field::from_fn(5, sub.len, |m, i| (m * i) as f64 * 0.1);
        let source = Field::from_vec(5, sub.len, sub.start, source.values().to_vec()).unwrap();
        let g: Vec<f64> = (0..5).map(|m| 1.0 + m as f64).collect();
        let init = vec![0.5; sub.len];
        let y = forward_heat_solve(&grid, &sub, &source, &init, Some(&g)).unwrap();
        let q = backward_adjoint_solve(&grid, &sub, &source, Some(&g)).unwrap();
        for m in 1..5 {
            assert!((robin_trace(&y, &d, j, m).unwrap() - g[m]).abs() < 1e-10);
        }
        for k in 0..4 {
            assert!((robin_trace(&q, &d, j, k).unwrap() - g[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn manufactured_forward_error_is_small() {
    let grid = GridSpec::new(81, 201, 1.0).unwrap();
    let source = Field::from_fn(201, 81, |m, i| {
        (PI * PI - 1.0) * (-grid.t(m)).exp() * (PI * grid.x(i)).sin()
    });
    let y0: Vec<f64> = (0..81).map(|i| (PI * grid.x(i)).sin()).collect();
    let y = forward_heat_solve(&grid, &grid.full(), &source, &y0, None).unwrap();
    let err = (0..81)
        .map(|i| (y[(200, i)] - (-1.0f64).exp() * (PI * grid.x(i)).sin()).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "error {err}");
}

#[test]
#[should_panic]
fn nonsquare_window_data_rejected() {
    let grid = GridSpec::new(11, 3, 1.0).unwrap();
    forward_heat_solve(&grid, &grid.full(), &Field::zeros(3, 10), &[0.0; 11], None).unwrap();
}
