//! Overlapping two-subdomain waveform relaxation with Robin transmission
//! conditions, used as a nonlinear preconditioner.
//!
//! `S_j` maps the state/adjoint pair of the neighbour to the solution of the
//! nonlinear optimality system on subdomain `j` whose Robin rows carry the
//! neighbour's traces. The preconditioned residual is
//! `F_P(z1, z2) = (z1 - S_1(z2), z2 - S_2(z1))`, and its generalized
//! derivative replaces each `S_j` by a linear subdomain solve driven by the
//! traces of the direction.

use std::cell::RefCell;

use crate::discretize::{robin_trace, Decomposition, GridSpec};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::kkt::{KktSystem, Masks};
use crate::krylov::{gmres, norm, FnOperator};
use crate::model::{Field, ProblemSpec};
use crate::newton::{newton_iterate, random_guess_for, KktPoint, NewtonOptions, SolverConfig, Stopping};
use crate::report::IterationReport;

pub use crate::kkt::TraceData;

/// State and adjoint on the window of subdomain `j` (1 or 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainState {
    pub j: usize,
    pub y: Field,
    pub q: Field,
}

pub type StatePair = [SubdomainState; 2];

/// Result of an outer iteration on the subdomain pair. `failure` is set when
/// a subdomain or linear solve broke down; the report then covers the steps
/// taken before it.
#[derive(Debug, Clone)]
pub struct WrmOutcome {
    pub state: StatePair,
    pub report: IterationReport,
    pub failure: Option<Error>,
}

impl WrmOutcome {
    pub fn converged(&self) -> bool {
        self.report.converged && self.failure.is_none()
    }
}

/// Generalized derivative of `F_P`, frozen at the subdomain solutions
/// `S_1(z2)` and `S_2(z1)`.
pub struct Linearization<'a> {
    solver: &'a WrmSolver,
    masks: [Masks; 2],
}

#[derive(Debug, Clone)]
pub struct WrmSolver {
    grid: GridSpec,
    spec: ProblemSpec,
    decomp: Decomposition,
    config: SolverConfig,
    systems: [KktSystem; 2],
}

fn check_index(j: usize) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("subdomain index must be 1 or 2, got {j}")))
    }
}

impl WrmSolver {
    pub fn new(spec: &ProblemSpec, grid: &GridSpec, decomp: &Decomposition, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        if (decomp.dx - grid.dx()).abs() > 1e-12 * grid.dx() || decomp.subgrid(2).end() != grid.n_x {
            return Err(Error::Decomposition("decomposition was built for a different grid".into()));
        }
        let system = |j: usize| KktSystem::with_collocation(grid, spec, decomp.subgrid(j), config.collocation);
        Ok(Self {
            grid: *grid,
            spec: spec.clone(),
            decomp: *decomp,
            config: *config,
            systems: [system(1)?, system(2)?],
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomp
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn system(&self, j: usize) -> &KktSystem {
        &self.systems[j - 1]
    }

    fn execution(&self) -> Execution {
        self.config.execution
    }

    /// Restriction of a full-grid point to both windows.
    pub fn restrict(&self, point: &KktPoint) -> Result<StatePair> {
        let part = |j: usize| -> Result<SubdomainState> {
            let sub = self.decomp.subgrid(j);
            Ok(SubdomainState {
                j,
                y: point.y.restrict(sub)?,
                q: point.q.restrict(sub)?,
            })
        };
        Ok([part(1)?, part(2)?])
    }

    /// Full-grid point taking subdomain 1 on `x <= 0` and subdomain 2 on `x > 0`.
    pub fn glue(&self, pair: &StatePair) -> KktPoint {
        let (n_t, n_x) = (self.grid.n_t, self.grid.n_x);
        let mid = n_x / 2;
        let pick = |a: &Field, b: &Field| {
            Field::from_fn(n_t, n_x, |m, i| {
                if i <= mid {
                    a.row(m)[i - a.offset()]
                } else {
                    b.row(m)[i - b.offset()]
                }
            })
        };
        KktPoint {
            y: pick(&pair[0].y, &pair[1].y),
            q: pick(&pair[0].q, &pair[1].q),
        }
    }

    /// Feasible random starting pair: the monodomain random guess restricted
    /// to the windows.
    pub fn random_guess(&self, seed: u64) -> Result<StatePair> {
        self.restrict(&random_guess_for(&self.spec, &self.grid, seed, self.config.collocation)?)
    }

    pub fn pack_pair(&self, pair: &StatePair) -> Result<Vec<f64>> {
        let mut z = self.systems[0].pack(&pair[0].y, &pair[0].q)?;
        z.extend(self.systems[1].pack(&pair[1].y, &pair[1].q)?);
        Ok(z)
    }

    /// Inverse of [`pack_pair`](Self::pack_pair); with `with_data` the
    /// initial state is filled in, otherwise fixed values are zero.
    pub fn unpack_pair(&self, z: &[f64], with_data: bool) -> StatePair {
        let (a, b) = z.split_at(self.systems[0].dim());
        let (y1, q1) = self.systems[0].unpack(a, with_data);
        let (y2, q2) = self.systems[1].unpack(b, with_data);
        [SubdomainState { j: 1, y: y1, q: q1 }, SubdomainState { j: 2, y: y2, q: q2 }]
    }

    /// Dimension of the stacked pair.
    pub fn dim(&self) -> usize {
        self.systems[0].dim() + self.systems[1].dim()
    }

    /// Discrete L2 norm of a stacked pair vector.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.grid.l2_weight() * norm(v)
    }

    /// Robin traces of the donor pair `(y, q)` at the interface of `receiver`.
    pub fn traces_for(&self, receiver: usize, y: &Field, q: &Field) -> Result<TraceData> {
        check_index(receiver)?;
        let n_t = self.grid.n_t;
        let mut traces = TraceData::zeros(n_t);
        for m in 0..n_t {
            traces.g_y[m] = robin_trace(y, &self.decomp, receiver, m)?;
            traces.g_q[m] = robin_trace(q, &self.decomp, receiver, m)?;
        }
        Ok(traces)
    }

    /// `S_j`: local semismooth Newton on subdomain `j` with the given
    /// interface data, started from `warm`. When the full-step iteration
    /// fails, it is rerun from `warm` with backtracking on the
    /// heat-preconditioned residual. The returned report is that of the
    /// successful run.
    pub fn subdomain_solve(
        &self,
        j: usize,
        traces: &TraceData,
        warm: &SubdomainState,
    ) -> Result<(SubdomainState, IterationReport)> {
        check_index(j)?;
        let sys = self.system(j);
        let mut opts = NewtonOptions {
            tol: self.config.sub_tol,
            max_iter: self.config.sub_max,
            gmres: self.config.sub_gmres,
            stopping: Stopping::FixedPoint,
            backtrack: false,
        };
        let (y, q, report) = newton_iterate(sys, Some(traces), warm.y.clone(), warm.q.clone(), opts)?;
        if report.converged {
            return Ok((SubdomainState { j, y, q }, report));
        }
        opts.backtrack = true;
        let (y, q, report) = newton_iterate(sys, Some(traces), warm.y.clone(), warm.q.clone(), opts)?;
        if !report.converged {
            return Err(Error::Subdomain { subdomain: j, report });
        }
        Ok((SubdomainState { j, y, q }, report))
    }

    /// One parallel WRM step: `(S_1(z2), S_2(z1))`. The local solves start
    /// from `warm`, or from `pair` itself when no warm start is given.
    /// Also returns the local Newton iteration counts.
    pub fn wrm_sweep(&self, pair: &StatePair, warm: Option<&StatePair>) -> Result<(StatePair, [usize; 2])> {
        let warm = warm.unwrap_or(pair);
        let solve = |j: usize| -> Result<(SubdomainState, IterationReport)> {
            let donor = &pair[2 - j];
            let traces = self.traces_for(j, &donor.y, &donor.q)?;
            self.subdomain_solve(j, &traces, &warm[j - 1])
        };
        let (a, b) = exec::join(self.execution(), || solve(1), || solve(2));
        let ((s1, r1), (s2, r2)) = (a?, b?);
        Ok(([s1, s2], [r1.outer, r2.outer]))
    }

    /// Stacked `F_P` at `pair` given the sweep result `swept = (S_1(z2), S_2(z1))`.
    pub fn residual_from_sweep(&self, pair: &StatePair, swept: &StatePair) -> Result<Vec<f64>> {
        let z = self.pack_pair(pair)?;
        let s = self.pack_pair(swept)?;
        Ok(z.iter().zip(&s).map(|(a, b)| a - b).collect())
    }

    /// Stacked `F_P(z1, z2)`.
    pub fn preconditioned_residual(&self, pair: &StatePair) -> Result<Vec<f64>> {
        let (swept, _) = self.wrm_sweep(pair, None)?;
        self.residual_from_sweep(pair, &swept)
    }

    /// Derivative of `F_P` with masks taken from `swept = (S_1(z2), S_2(z1))`.
    pub fn linearize(&self, swept: &StatePair) -> Result<Linearization<'_>> {
        Ok(Linearization {
            solver: self,
            masks: [
                self.systems[0].masks(&swept[0].y, &swept[0].q)?,
                self.systems[1].masks(&swept[1].y, &swept[1].q)?,
            ],
        })
    }

    /// `DS_j` applied to interface data: the linear subdomain problem with
    /// masks from `base`, zero initial and terminal values and Robin rows
    /// equal to `traces`. Stacked on window `j`.
    pub fn linearized_subdomain_solve(
        &self,
        j: usize,
        base: &SubdomainState,
        traces: &TraceData,
    ) -> Result<SubdomainState> {
        check_index(j)?;
        let masks = self.system(j).masks(&base.y, &base.q)?;
        let x = self.linear_solve(j, &masks, traces)?;
        let (y, q) = self.system(j).unpack(&x, false);
        Ok(SubdomainState { j, y, q })
    }

    fn linear_solve(&self, j: usize, masks: &Masks, traces: &TraceData) -> Result<Vec<f64>> {
        let sys = self.system(j);
        let rhs = sys.boundary_response(traces)?;
        let op = FnOperator::new(sys.dim(), |d: &[f64], out: &mut [f64]| {
            sys.reduced_jacobian_apply(masks, d, out)
        });
        let out = gmres(&op, &rhs, self.config.sub_gmres);
        if !out.converged {
            return Err(Error::LinearSolver(format!(
                "linearized subdomain {j} problem: GMRES stopped after {} iterations",
                out.iterations
            )));
        }
        Ok(out.solution)
    }

    /// `DF_P` at the pair whose sweep is `swept`, applied to a stacked direction.
    pub fn dfp_apply(&self, swept: &StatePair, direction: &[f64]) -> Result<Vec<f64>> {
        self.linearize(swept)?.apply(direction)
    }

    /// Algorithm: one WRM step, then generalized Newton steps on `F_P` with
    /// matrix-free GMRES, each followed by a new WRM step.
    pub fn preconditioned_newton_solve(&self, init: StatePair) -> WrmOutcome {
        let mut report = IterationReport::default();
        let mut pair = init;
        let failure = loop {
            let next = match self.wrm_sweep(&pair, None) {
                Ok((s, _)) => s,
                Err(e) => break Some(e),
            };
            let residual = match self.residual_from_sweep(&pair, &next) {
                Ok(r) => r,
                Err(e) => break Some(e),
            };
            let measure = self.norm(&residual);
            report.residual_history.push(measure);
            if measure < self.config.tol {
                report.converged = true;
                break None;
            }
            if report.outer >= self.config.max_outer || !measure.is_finite() {
                break None;
            }
            let lin = match self.linearize(&next) {
                Ok(l) => l,
                Err(e) => break Some(e),
            };
            let inner_failure = RefCell::new(None);
            let op = FnOperator::new(self.dim(), |d: &[f64], out: &mut [f64]| match lin.apply(d) {
                Ok(v) => out.copy_from_slice(&v),
                Err(e) => {
                    out.fill(0.0);
                    inner_failure.borrow_mut().get_or_insert(e);
                }
            });
            let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
            let step = gmres(&op, &rhs, self.config.gmres);
            if let Some(e) = inner_failure.into_inner() {
                break Some(e);
            }
            let mut z = match self.pack_pair(&pair) {
                Ok(z) => z,
                Err(e) => break Some(e),
            };
            for (zi, di) in z.iter_mut().zip(&step.solution) {
                *zi += di;
            }
            pair = self.unpack_pair(&z, true);
            report.record_step(step.iterations);
        };
        WrmOutcome {
            state: pair,
            report,
            failure,
        }
    }

    /// Plain waveform relaxation `z <- S(z)` until `|F_P| < tol`. The inner
    /// count of a sweep is the larger local Newton count.
    pub fn wrm_iterate(&self, init: StatePair) -> WrmOutcome {
        let mut report = IterationReport::default();
        let mut pair = init;
        let mut warm: Option<StatePair> = None;
        let failure = loop {
            let (next, counts) = match self.wrm_sweep(&pair, warm.as_ref()) {
                Ok(s) => s,
                Err(e) => break Some(e),
            };
            let measure = match self.residual_from_sweep(&pair, &next) {
                Ok(r) => self.norm(&r),
                Err(e) => break Some(e),
            };
            report.residual_history.push(measure);
            if measure < self.config.tol {
                report.converged = true;
                break None;
            }
            if report.outer >= self.config.max_outer || !measure.is_finite() {
                break None;
            }
            pair = next.clone();
            warm = Some(next);
            report.record_step(counts[0].max(counts[1]));
        };
        WrmOutcome {
            state: pair,
            report,
            failure,
        }
    }
}

impl Linearization<'_> {
    /// `(d1 - DS_1 d2, d2 - DS_2 d1)`.
    pub fn apply(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let s = self.solver;
        if direction.len() != s.dim() {
            return Err(Error::Dimension(format!(
                "direction has {} entries, expected {}",
                direction.len(),
                s.dim()
            )));
        }
        let d = s.unpack_pair(direction, false);
        let response = |j: usize| -> Result<Vec<f64>> {
            let donor = &d[2 - j];
            let traces = s.traces_for(j, &donor.y, &donor.q)?;
            s.linear_solve(j, &self.masks[j - 1], &traces)
        };
        let (a, b) = exec::join(s.execution(), || response(1), || response(2));
        let (a, b) = (a?, b?);
        Ok(direction
            .iter()
            .zip(a.iter().chain(&b))
            .map(|(di, si)| di - si)
            .collect())
    }
}

/// Preconditioned Newton from the seeded random guess.
pub fn preconditioned_newton_solve(
    spec: &ProblemSpec,
    grid: &GridSpec,
    decomp: &Decomposition,
    config: &SolverConfig,
) -> Result<WrmOutcome> {
    let solver = WrmSolver::new(spec, grid, decomp, config)?;
    let init = solver.random_guess(config.rng_seed)?;
    Ok(solver.preconditioned_newton_solve(init))
}

/// Plain waveform relaxation from the seeded random guess.
pub fn wrm_solve(
    spec: &ProblemSpec,
    grid: &GridSpec,
    decomp: &Decomposition,
    config: &SolverConfig,
) -> Result<WrmOutcome> {
    let solver = WrmSolver::new(spec, grid, decomp, config)?;
    let init = solver.random_guess(config.rng_seed)?;
    Ok(solver.wrm_iterate(init))
}
