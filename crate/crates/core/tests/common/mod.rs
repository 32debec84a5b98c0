//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ocp_wrm::discretize::{backward_adjoint_solve, build_decomposition, forward_heat_solve, GridSpec};
use ocp_wrm::experiment::builtin_test_case;
use ocp_wrm::kkt::KktSystem;
use ocp_wrm::krylov::{gmres, FnOperator, GmresOptions};
use ocp_wrm::model::{Field, ProblemSpec};
use ocp_wrm::newton::{generalized_jacobian_apply, kkt_residual, random_feasible_guess, KktPoint, SolverConfig};
use ocp_wrm::wrm::{StatePair, WrmSolver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn case(id: u32, eps: f64) -> (ProblemSpec, GridSpec) {
    builtin_test_case(id, eps).expect("built-in case")
}

fn max_error(approx: &Field, grid: &GridSpec, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mut err: f64 = 0.0;
    for m in 0..grid.n_t {
        for i in 0..grid.n_x {
            err = err.max((approx[(m, i)] - exact(grid.t(m), grid.x(i))).abs());
        }
    }
    err
}

fn forward_error(n_x: usize, n_t: usize, exact: impl Fn(f64, f64) -> f64, source: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = GridSpec::new(n_x, n_t, 1.0).unwrap();
    let s = Field::from_fn(n_t, n_x, |m, i| source(grid.t(m), grid.x(i)));
    let y0: Vec<f64> = (0..n_x).map(|i| exact(0.0, grid.x(i))).collect();
    let y = forward_heat_solve(&grid, &grid.full(), &s, &y0, None).unwrap();
    max_error(&y, &grid, exact)
}

fn backward_error(n_x: usize, n_t: usize, exact: impl Fn(f64, f64) -> f64, source: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = GridSpec::new(n_x, n_t, 1.0).unwrap();
    let s = Field::from_fn(n_t, n_x, |m, i| source(grid.t(m), grid.x(i)));
    let q = backward_adjoint_solve(&grid, &grid.full(), &s, None).unwrap();
    max_error(&q, &grid, exact)
}

/// Max-norm errors on three refinements, each halving the step.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub errors: [f64; 3],
}

impl Convergence {
    pub fn rates(&self) -> [f64; 2] {
        [(self.errors[0] / self.errors[1]).log2(), (self.errors[1] / self.errors[2]).log2()]
    }

    pub fn min_rate(&self) -> f64 {
        self.rates()[0].min(self.rates()[1])
    }
}

// Quadratic profiles in x are reproduced exactly by the centered stencil, so
// only the time error remains; linear profiles in t are reproduced exactly
// by implicit Euler, so only the space error remains.

pub fn forward_time_convergence() -> Convergence {
    let exact = |t: f64, x: f64| (-t).exp() * (1.0 - x * x);
    let source = |t: f64, x: f64| (-t).exp() * (2.0 - (1.0 - x * x));
    let errors = [11, 21, 41].map(|n_t| forward_error(41, n_t, exact, source));
    Convergence { errors }
}

pub fn forward_space_convergence() -> Convergence {
    let exact = |t: f64, x: f64| (1.0 + t) * (PI * x).sin();
    let source = |t: f64, x: f64| (1.0 + PI * PI * (1.0 + t)) * (PI * x).sin();
    let errors = [11, 21, 41].map(|n_x| forward_error(n_x, 11, exact, source));
    Convergence { errors }
}

pub fn backward_time_convergence() -> Convergence {
    // q_t + q_xx = s with q(1) = 0
    let exact = |t: f64, x: f64| ((-t).exp() - (-1.0f64).exp()) * (1.0 - x * x);
    let source = |t: f64, x: f64| -(-t).exp() * (1.0 - x * x) - 2.0 * ((-t).exp() - (-1.0f64).exp());
    let errors = [11, 21, 41].map(|n_t| backward_error(41, n_t, exact, source));
    Convergence { errors }
}

pub fn backward_space_convergence() -> Convergence {
    let exact = |t: f64, x: f64| (1.0 - t) * (PI * x).sin();
    let source = |t: f64, x: f64| -(1.0 + PI * PI * (1.0 - t)) * (PI * x).sin();
    let errors = [11, 21, 41].map(|n_x| backward_error(n_x, 11, exact, source));
    Convergence { errors }
}

/// GMRES against an LU solve on one random diagonally dominated system.
#[derive(Debug, Clone)]
pub struct GmresCheck {
    pub dim: usize,
    pub max_error: f64,
    pub converged: bool,
    pub monotone: bool,
}

pub fn gmres_vs_dense(seed: u64) -> GmresCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..=50);
    let scale = 1.0 / (dim as f64).sqrt();
    let a = DMatrix::from_fn(dim, dim, |r, c| {
        let v: f64 = rng.gen_range(-1.0..1.0) * scale;
        if r == c {
            v + 3.0
        } else {
            v
        }
    });
    let b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let exact = a.clone().lu().solve(&b).expect("nonsingular");
    let op = FnOperator::new(dim, |x: &[f64], out: &mut [f64]| {
        let y = &a * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    });
    let out = gmres(
        &op,
        b.as_slice(),
        GmresOptions {
            tol_rel: 1e-14,
            max_iter: dim,
        },
    );
    let max_error = out
        .solution
        .iter()
        .zip(exact.iter())
        .map(|(x, e)| (x - e).abs())
        .fold(0.0, f64::max);
    let monotone = out.residuals.windows(2).all(|w| w[1] <= w[0]);
    GmresCheck {
        dim,
        max_error,
        converged: out.converged,
        monotone,
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b)
}

fn axpy(z: &[f64], h: f64, d: &[f64]) -> Vec<f64> {
    z.iter().zip(d).map(|(a, b)| a + h * b).collect()
}

/// Relative errors of the monodomain generalized Jacobian against centered
/// differences of the residual at `count` mask-stable random points.
pub fn jacobian_fd_errors(id: u32, eps: f64, count: usize, h: f64) -> Vec<f64> {
    let (spec, grid) = case(id, eps);
    let sys = KktSystem::monodomain(&grid, &spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut errors = Vec::new();
    let mut seed = 0;
    while errors.len() < count {
        seed += 1;
        assert!(seed < 50 * count as u64, "too few mask-stable points");
        let point = random_feasible_guess(&spec, &grid, seed).unwrap();
        let z = sys.pack(&point.y, &point.q).unwrap();
        let d: Vec<f64> = z.iter().map(|v| v.abs().max(1.0) * rng.gen_range(-1.0..1.0)).collect();
        let at = |v: &[f64]| {
            let (y, q) = sys.unpack(v, true);
            KktPoint { y, q }
        };
        let (plus, minus) = (at(&axpy(&z, h, &d)), at(&axpy(&z, -h, &d)));
        let masks = sys.masks(&point.y, &point.q).unwrap();
        if sys.masks(&plus.y, &plus.q).unwrap() != masks || sys.masks(&minus.y, &minus.q).unwrap() != masks {
            continue;
        }
        let (dy, dq) = sys.unpack(&d, false);
        let jd = generalized_jacobian_apply(&point, &KktPoint { y: dy, q: dq }, &spec, &grid).unwrap();
        let fp = kkt_residual(&plus, &spec, &grid).unwrap();
        let fm = kkt_residual(&minus, &spec, &grid).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        errors.push(rel_diff(&fd, &jd));
    }
    errors
}

/// Relative errors of the preconditioned Jacobian against centered
/// differences of `F_P` at `count` random points where the subdomain masks
/// do not change along the stencil.
pub fn dfp_fd_errors(id: u32, eps: f64, overlap_cells: usize, robin_p: f64, count: usize, h: f64) -> Vec<f64> {
    let (spec, grid) = case(id, eps);
    let decomp = build_decomposition(&grid, overlap_cells, robin_p).unwrap();
    let config = SolverConfig {
        sub_tol: 1e-13,
        ..SolverConfig::default()
    };
    let solver = WrmSolver::new(&spec, &grid, &decomp, &config).unwrap();
    let masks_of = |pair: &StatePair| {
        [0, 1].map(|k| solver.system(k + 1).masks(&pair[k].y, &pair[k].q).unwrap())
    };
    let mut errors = Vec::new();
    let mut seed = 0;
    while errors.len() < count {
        seed += 1;
        assert!(seed < 50 * count as u64, "too few mask-stable points");
        let pair = solver.random_guess(seed).unwrap();
        let z = solver.pack_pair(&pair).unwrap();
        let d = solver.pack_pair(&solver.random_guess(1000 + seed).unwrap()).unwrap();
        let (swept, _) = solver.wrm_sweep(&pair, None).unwrap();
        let (zp, zm) = (solver.unpack_pair(&axpy(&z, h, &d), true), solver.unpack_pair(&axpy(&z, -h, &d), true));
        let (sp, _) = solver.wrm_sweep(&zp, Some(&swept)).unwrap();
        let (sm, _) = solver.wrm_sweep(&zm, Some(&swept)).unwrap();
        let masks = masks_of(&swept);
        if masks_of(&sp) != masks || masks_of(&sm) != masks {
            continue;
        }
        let jd = solver.dfp_apply(&swept, &d).unwrap();
        let fp = solver.residual_from_sweep(&zp, &sp).unwrap();
        let fm = solver.residual_from_sweep(&zm, &sm).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        errors.push(rel_diff(&fd, &jd));
    }
    errors
}

/// Discrete L2 distance on the overlap `[i_minus, i_plus]` between both
/// subdomain solutions and a monolithic one.
pub fn overlap_distance(solver: &WrmSolver, pair: &StatePair, mono: &KktPoint) -> f64 {
    let grid = solver.grid();
    let d = solver.decomposition();
    let mut sum = 0.0;
    for k in 0..2 {
        for m in 0..grid.n_t {
            for i in d.i_minus..=d.i_plus {
                let local = i - pair[k].y.offset();
                let dy = pair[k].y[(m, local)] - mono.y[(m, i)];
                let dq = pair[k].q[(m, local)] - mono.q[(m, i)];
                sum += dy * dy + dq * dq;
            }
        }
    }
    grid.l2_weight() * sum.sqrt()
}

/// Largest violation of `|u| <= c_u` and `|y + eps w| <= c_y` over all nodes;
/// zero means the clamp identity holds exactly.
pub fn clamp_violation(point: &KktPoint, spec: &ProblemSpec, grid: &GridSpec) -> f64 {
    let (u, w) = ocp_wrm::model::recover_controls(&point.y, &point.q, spec).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..grid.n_t {
        for i in 0..grid.n_x {
            worst = worst.max(u[(m, i)].abs() - spec.c_u);
            worst = worst.max((point.y[(m, i)] + spec.eps * w[(m, i)]).abs() - spec.c_y[m] * (1.0 + 1e-12));
        }
    }
    worst.max(0.0)
}
