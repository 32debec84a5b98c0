//! Monolithic semismooth Newton method for the discrete optimality system.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::discretize::{forward_heat_solve, GridSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kkt::{AdjointCollocation, KktSystem, TraceData};
use crate::krylov::{gmres, FnOperator, GmresOptions};
use crate::model::{clamp_control, Field, ProblemSpec};
use crate::report::IterationReport;

/// State and adjoint on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub y: Field,
    pub q: Field,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Outer tolerance on the discrete L2 residual norm.
    pub tol: f64,
    pub max_outer: usize,
    /// Linear solves of the outer Newton steps.
    pub gmres: GmresOptions,
    /// Tolerance of the subdomain solves, on the heat-preconditioned residual.
    pub sub_tol: f64,
    pub sub_max: usize,
    /// Linear solves inside subdomain Newton iterations and linearized
    /// subdomain problems.
    pub sub_gmres: GmresOptions,
    pub rng_seed: u64,
    pub execution: Execution,
    pub collocation: AdjointCollocation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 200,
            gmres: GmresOptions {
                tol_rel: 1e-8,
                max_iter: 500,
            },
            sub_tol: 1e-10,
            sub_max: 50,
            sub_gmres: GmresOptions {
                tol_rel: 1e-10,
                max_iter: 500,
            },
            rng_seed: 0,
            execution: Execution::default(),
            collocation: AdjointCollocation::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol, self.sub_tol, self.gmres.tol_rel, self.sub_gmres.tol_rel];
        if positive.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.sub_max == 0 || self.gmres.max_iter == 0 || self.sub_gmres.max_iter == 0 {
            return Err(Error::Parameter("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stopping {
    /// Plain KKT residual.
    Residual,
    /// Heat-preconditioned residual `z - Phi(z)`.
    FixedPoint,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub gmres: GmresOptions,
    pub stopping: Stopping,
    /// Armijo-type halving on `|G|`.
    pub backtrack: bool,
}

/// Semismooth Newton iteration on a window: masks frozen at the current
/// iterate, linear solves by GMRES on `I - K`. Steps are full unless
/// `backtrack` is set, in which case they are halved until the
/// heat-preconditioned residual decreases (at most ten times).
pub(crate) fn newton_iterate(
    sys: &KktSystem,
    traces: Option<&TraceData>,
    mut y: Field,
    mut q: Field,
    opts: NewtonOptions,
) -> Result<(Field, Field, IterationReport)> {
    let mut report = IterationReport::default();
    loop {
        let fixed_point = sys.fixed_point_residual(&y, &q, traces)?;
        let measure = match opts.stopping {
            Stopping::Residual => sys.norm(&sys.residual(&y, &q, traces)?),
            Stopping::FixedPoint => sys.norm(&fixed_point),
        };
        report.residual_history.push(measure);
        if measure <= opts.tol {
            report.converged = true;
            break;
        }
        if report.outer >= opts.max_iter || !measure.is_finite() {
            break;
        }
        let masks = sys.masks(&y, &q)?;
        let op = FnOperator::new(sys.dim(), |d: &[f64], out: &mut [f64]| {
            sys.reduced_jacobian_apply(&masks, d, out)
        });
        let rhs: Vec<f64> = fixed_point.iter().map(|v| -v).collect();
        let step = gmres(&op, &rhs, opts.gmres);
        let z = sys.pack(&y, &q)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&step.solution).map(|(zi, di)| zi + alpha * di).collect();
            (y, q) = sys.unpack(&trial, true);
            if !opts.backtrack || alpha < 1e-3 {
                break;
            }
            let next = sys.norm(&sys.fixed_point_residual(&y, &q, traces)?);
            if next <= (1.0 - 1e-4 * alpha) * sys.norm(&fixed_point) {
                break;
            }
            alpha *= 0.5;
        }
        report.record_step(step.iterations);
    }
    Ok((y, q, report))
}

/// Stacked residual of the monodomain optimality system at `point`.
pub fn kkt_residual(point: &KktPoint, spec: &ProblemSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    KktSystem::monodomain(grid, spec)?.residual(&point.y, &point.q, None)
}

/// Generalized Jacobian of [`kkt_residual`] at `point` applied to
/// `direction`; only the free entries of `direction` are read.
pub fn generalized_jacobian_apply(
    point: &KktPoint,
    direction: &KktPoint,
    spec: &ProblemSpec,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    let sys = KktSystem::monodomain(grid, spec)?;
    let masks = sys.masks(&point.y, &point.q)?;
    let d = sys.pack(&direction.y, &direction.q)?;
    Ok(sys.jacobian_apply(&masks, &d))
}

/// Random adjoint, uniform in `[-c_u, c_u]` at every unknown, and the state
/// it drives. The resulting controls `(P(q), -eps Q(y))` are admissible.
pub fn random_feasible_guess(spec: &ProblemSpec, grid: &GridSpec, seed: u64) -> Result<KktPoint> {
    random_guess_for(spec, grid, seed, AdjointCollocation::default())
}

pub(crate) fn random_guess_for(
    spec: &ProblemSpec,
    grid: &GridSpec,
    seed: u64,
    collocation: AdjointCollocation,
) -> Result<KktPoint> {
    let first = collocation.first_level();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-spec.c_u, spec.c_u);
    let (n_t, n_x) = (grid.n_t, grid.n_x);
    let mut q = Field::zeros(n_t, n_x);
    for m in first..first + n_t - 1 {
        for i in 1..n_x - 1 {
            q[(m, i)] = dist.sample(&mut rng);
        }
    }
    let mut source = spec.f.clone();
    for m in 0..n_t {
        for i in 0..n_x {
            source[(m, i)] += clamp_control(q[(m, i)], spec.c_u);
        }
    }
    let y = forward_heat_solve(grid, &grid.full(), &source, &spec.y0, None)?;
    Ok(KktPoint { y, q })
}

pub fn semismooth_newton_solve(
    spec: &ProblemSpec,
    grid: &GridSpec,
    config: &SolverConfig,
) -> Result<(KktPoint, IterationReport)> {
    let init = random_guess_for(spec, grid, config.rng_seed, config.collocation)?;
    semismooth_newton_solve_from(spec, grid, config, init)
}

pub fn semismooth_newton_solve_from(
    spec: &ProblemSpec,
    grid: &GridSpec,
    config: &SolverConfig,
    init: KktPoint,
) -> Result<(KktPoint, IterationReport)> {
    config.validate()?;
    let sys = KktSystem::with_collocation(grid, spec, &grid.full(), config.collocation)?;
    let opts = NewtonOptions {
        tol: config.tol,
        max_iter: config.max_outer,
        gmres: config.gmres,
        stopping: Stopping::Residual,
        backtrack: false,
    };
    let (y, q, report) = newton_iterate(&sys, None, init.y, init.q, opts)?;
    Ok((KktPoint { y, q }, report))
}
