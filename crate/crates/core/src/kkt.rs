//! Discrete optimality system on a window of the space grid.
//!
//! Unknowns are the state at time levels `1..n_t` and the adjoint at levels
//! `0..n_t-1`, on the free nodes of the window (interior nodes plus a Robin
//! interface node, if any). They are stored "stacked": the state block first,
//! then the adjoint block, each made of one `free_len` slice per time level.
//! Initial, terminal and Dirichlet values are data and never stacked.
//!
//! Besides the plain residual `F`, the system offers the heat-preconditioned
//! residual `G = M^{-1} F`, where `M` is the block diagonal of the forward and
//! backward heat operators. `G(z) = z - Phi(z)` with `Phi` one decoupled
//! state/adjoint solve, and the generalized Jacobian of `G` is `I - K` with
//! `K` the mask-weighted coupling followed by heat solves. All linear solves
//! inside the Newton iterations run on `I - K`.

use crate::discretize::{robin_stencil, End, GridSpec, HeatStepper, SubGrid};
use crate::error::{Error, Result};
use crate::krylov::norm;
use crate::model::{clamp_control, state_penalty, Field, ProblemSpec};

/// Robin data imposed at the interface of a subdomain, one value per time
/// level for the state and for the adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub g_y: Vec<f64>,
    pub g_q: Vec<f64>,
}

impl TraceData {
    pub fn zeros(n_t: usize) -> Self {
        Self {
            g_y: vec![0.0; n_t],
            g_q: vec![0.0; n_t],
        }
    }
}

/// Generalized derivative information frozen at a point: the inactive
/// control indicator at state levels `1..n_t` and the active state indicator
/// scaled by `1/eps^2` at adjoint levels `0..n_t-1`, both in stacked layout.
/// Robin rows carry zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    pub inactive: Vec<f64>,
    pub active_scaled: Vec<f64>,
}

/// Time levels at which the adjoint equation is collocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointCollocation {
    /// Adjoint unknowns at levels `0..n_t-1`, `q(T) = 0` at level `n_t - 1`,
    /// the adjoint row at level `k` driven by `Q(y^k)`.
    #[default]
    Lagged,
    /// Adjoint unknowns at levels `1..n_t`, paired with the state at the same
    /// level, zero terminal value one step past the horizon. This is the exact
    /// optimality system of the time-discrete problem.
    Aligned,
}

impl AdjointCollocation {
    /// First time level carrying an adjoint unknown.
    pub fn first_level(self) -> usize {
        match self {
            AdjointCollocation::Lagged => 0,
            AdjointCollocation::Aligned => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KktSystem {
    grid: GridSpec,
    collocation: AdjointCollocation,
    stepper: HeatStepper,
    y0: Vec<f64>,
    f: Field,
    c_u: f64,
    c_y: Vec<f64>,
    eps: f64,
}

impl KktSystem {
    pub fn new(grid: &GridSpec, spec: &ProblemSpec, sub: &SubGrid) -> Result<Self> {
        Self::with_collocation(grid, spec, sub, AdjointCollocation::default())
    }

    pub fn with_collocation(
        grid: &GridSpec,
        spec: &ProblemSpec,
        sub: &SubGrid,
        collocation: AdjointCollocation,
    ) -> Result<Self> {
        if sub.end() > grid.n_x || sub.len < 3 {
            return Err(Error::Dimension(format!(
                "window [{}, {}) does not fit a grid of {} nodes",
                sub.start,
                sub.end(),
                grid.n_x
            )));
        }
        Ok(Self {
            grid: *grid,
            collocation,
            stepper: HeatStepper::new(grid, sub),
            y0: spec.y0[sub.start..sub.end()].to_vec(),
            f: spec.f.restrict(sub)?,
            c_u: spec.c_u,
            c_y: spec.c_y.clone(),
            eps: spec.eps,
        })
    }

    pub fn monodomain(grid: &GridSpec, spec: &ProblemSpec) -> Result<Self> {
        Self::new(grid, spec, &grid.full())
    }

    pub fn collocation(&self) -> AdjointCollocation {
        self.collocation
    }

    fn qf(&self) -> usize {
        self.collocation.first_level()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn subgrid(&self) -> &SubGrid {
        self.stepper.subgrid()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn c_u(&self) -> f64 {
        self.c_u
    }

    pub fn c_y(&self) -> &[f64] {
        &self.c_y
    }

    fn n_t(&self) -> usize {
        self.grid.n_t
    }

    fn nf(&self) -> usize {
        self.stepper.free_len()
    }

    /// Length of one stacked block (state or adjoint).
    pub fn block(&self) -> usize {
        self.stepper.block_len()
    }

    /// Number of stacked unknowns.
    pub fn dim(&self) -> usize {
        2 * self.block()
    }

    /// Discrete L2 norm of a stacked vector.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.grid.l2_weight() * norm(v)
    }

    fn check_pair(&self, y: &Field, q: &Field) -> Result<()> {
        y.check_on(self.n_t(), self.subgrid())?;
        q.check_on(self.n_t(), self.subgrid())
    }

    fn check_traces(&self, traces: Option<&TraceData>) -> Result<()> {
        match (self.stepper.robin_row(), traces) {
            (Some(_), Some(t)) if t.g_y.len() == self.n_t() && t.g_q.len() == self.n_t() => Ok(()),
            (Some(_), Some(_)) => Err(Error::Dimension("trace data has the wrong length".into())),
            (Some(_), None) => Err(Error::Parameter("subdomain needs interface traces".into())),
            (None, Some(_)) => Err(Error::Parameter("traces given for a window without interface".into())),
            (None, None) => Ok(()),
        }
    }

    pub fn pack(&self, y: &Field, q: &Field) -> Result<Vec<f64>> {
        self.check_pair(y, q)?;
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let mut z = Vec::with_capacity(self.dim());
        for m in 1..self.n_t() {
            z.extend_from_slice(&y.row(m)[lo..lo + nf]);
        }
        for k in self.qf()..self.qf() + self.n_t() - 1 {
            z.extend_from_slice(&q.row(k)[lo..lo + nf]);
        }
        Ok(z)
    }

    /// Fields of a stacked vector. With `with_data` the initial state is
    /// filled in (a point), without it all data are zero (a direction).
    pub fn unpack(&self, z: &[f64], with_data: bool) -> (Field, Field) {
        assert_eq!(z.len(), self.dim(), "stacked vector has the wrong length");
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let (zy, zq) = z.split_at(self.block());
        let mut y = Field::zeros_on(self.n_t(), self.subgrid());
        let mut q = Field::zeros_on(self.n_t(), self.subgrid());
        if with_data {
            y.row_mut(0).copy_from_slice(&self.y0);
        }
        for m in 1..self.n_t() {
            y.row_mut(m)[lo..lo + nf].copy_from_slice(&zy[(m - 1) * nf..m * nf]);
        }
        for j in 0..self.n_t() - 1 {
            q.row_mut(j + self.qf())[lo..lo + nf].copy_from_slice(&zq[j * nf..(j + 1) * nf]);
        }
        (y, q)
    }

    fn robin_value(&self, row: &[f64]) -> f64 {
        let (node, end, p) = self.subgrid().robin().expect("window has a Robin end");
        let inner = match end {
            End::Left => node + 1,
            End::Right => node - 1,
        };
        robin_stencil(row[node], row[inner], end, p, self.stepper.dx())
    }

    /// Stacked residual of the implicit Euler optimality system.
    pub fn residual(&self, y: &Field, q: &Field, traces: Option<&TraceData>) -> Result<Vec<f64>> {
        self.check_pair(y, q)?;
        self.check_traces(traces)?;
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let robin_row = self.stepper.robin_row();
        let inv_dt = 1.0 / self.stepper.dt();
        let inv_dx2 = 1.0 / (self.stepper.dx() * self.stepper.dx());
        let mut out = vec![0.0; self.dim()];
        let (fwd, bwd) = out.split_at_mut(self.block());
        for m in 1..self.n_t() {
            let (cur, prev, qm, fm) = (y.row(m), y.row(m - 1), q.row(m), self.f.row(m));
            for r in 0..nf {
                let i = lo + r;
                fwd[(m - 1) * nf + r] = if Some(r) == robin_row {
                    self.robin_value(cur) - traces.unwrap().g_y[m]
                } else {
                    (cur[i] - prev[i]) * inv_dt - (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]) * inv_dx2
                        - clamp_control(qm[i], self.c_u)
                        - fm[i]
                };
            }
        }
        let beyond = vec![0.0; self.subgrid().len];
        for j in 0..self.n_t() - 1 {
            let k = j + self.qf();
            let next = if k + 1 < self.n_t() { q.row(k + 1) } else { &beyond[..] };
            let (cur, yk) = (q.row(k), y.row(k));
            for r in 0..nf {
                let i = lo + r;
                bwd[j * nf + r] = if Some(r) == robin_row {
                    self.robin_value(cur) - traces.unwrap().g_q[k]
                } else {
                    (next[i] - cur[i]) * inv_dt + (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]) * inv_dx2
                        - state_penalty(yk[i], self.c_y[k], self.eps)
                };
            }
        }
        Ok(out)
    }

    /// One decoupled sweep: the state driven by `P(q) + f` and the adjoint
    /// driven by `Q(y)`, with the given interface data. Stacked.
    pub fn decoupled_solve(&self, y: &Field, q: &Field, traces: Option<&TraceData>) -> Result<Vec<f64>> {
        self.check_pair(y, q)?;
        self.check_traces(traces)?;
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let robin_row = self.stepper.robin_row();
        let mut out = vec![0.0; self.dim()];
        let (fwd, bwd) = out.split_at_mut(self.block());
        for m in 1..self.n_t() {
            let (qm, fm) = (q.row(m), self.f.row(m));
            for r in 0..nf {
                let i = lo + r;
                fwd[(m - 1) * nf + r] = if Some(r) == robin_row {
                    traces.unwrap().g_y[m]
                } else {
                    clamp_control(qm[i], self.c_u) + fm[i]
                };
            }
        }
        let inv_dt = 1.0 / self.stepper.dt();
        for r in 0..nf {
            if Some(r) != robin_row {
                fwd[r] += self.y0[lo + r] * inv_dt;
            }
        }
        for j in 0..self.n_t() - 1 {
            let k = j + self.qf();
            let yk = y.row(k);
            for r in 0..nf {
                bwd[j * nf + r] = if Some(r) == robin_row {
                    traces.unwrap().g_q[k]
                } else {
                    state_penalty(yk[lo + r], self.c_y[k], self.eps)
                };
            }
        }
        self.stepper.forward_in_place(fwd);
        self.stepper.backward_in_place(bwd);
        Ok(out)
    }

    /// Heat-preconditioned residual `z - Phi(z)`, stacked.
    pub fn fixed_point_residual(&self, y: &Field, q: &Field, traces: Option<&TraceData>) -> Result<Vec<f64>> {
        let phi = self.decoupled_solve(y, q, traces)?;
        let z = self.pack(y, q)?;
        Ok(z.iter().zip(&phi).map(|(a, b)| a - b).collect())
    }

    pub fn masks(&self, y: &Field, q: &Field) -> Result<Masks> {
        self.check_pair(y, q)?;
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let robin_row = self.stepper.robin_row();
        let scale = 1.0 / (self.eps * self.eps);
        let mut inactive = vec![0.0; self.block()];
        let mut active_scaled = vec![0.0; self.block()];
        for m in 1..self.n_t() {
            let qm = q.row(m);
            for r in 0..nf {
                if Some(r) != robin_row && qm[lo + r].abs() <= self.c_u {
                    inactive[(m - 1) * nf + r] = 1.0;
                }
            }
        }
        for j in 0..self.n_t() - 1 {
            let k = j + self.qf();
            let yk = y.row(k);
            for r in 0..nf {
                if Some(r) != robin_row && yk[lo + r].abs() > self.c_y[k] {
                    active_scaled[j * nf + r] = scale;
                }
            }
        }
        Ok(Masks {
            inactive,
            active_scaled,
        })
    }

    /// Generalized Jacobian of [`residual`](Self::residual) applied to a
    /// stacked direction.
    pub fn jacobian_apply(&self, masks: &Masks, d: &[f64]) -> Vec<f64> {
        let nf = self.nf();
        let lo = self.stepper.free_start();
        let robin_row = self.stepper.robin_row();
        let inv_dt = 1.0 / self.stepper.dt();
        let inv_dx2 = 1.0 / (self.stepper.dx() * self.stepper.dx());
        let block = self.block();
        let (dy, dq) = self.unpack(d, false);
        let mut out = vec![0.0; self.dim()];
        let (fwd, bwd) = out.split_at_mut(block);
        let n_t = self.n_t();
        for m in 1..n_t {
            let (cur, prev) = (dy.row(m), dy.row(m - 1));
            for r in 0..nf {
                let i = lo + r;
                let idx = (m - 1) * nf + r;
                fwd[idx] = if Some(r) == robin_row {
                    self.robin_value(cur)
                } else {
                    (cur[i] - prev[i]) * inv_dt - (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]) * inv_dx2
                        - masks.inactive[idx] * dq[(m, i)]
                };
            }
        }
        let beyond = vec![0.0; self.subgrid().len];
        for j in 0..n_t - 1 {
            let k = j + self.qf();
            let next = if k + 1 < n_t { dq.row(k + 1) } else { &beyond[..] };
            let cur = dq.row(k);
            for r in 0..nf {
                let i = lo + r;
                let idx = j * nf + r;
                bwd[idx] = if Some(r) == robin_row {
                    self.robin_value(cur)
                } else {
                    (next[i] - cur[i]) * inv_dt + (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]) * inv_dx2
                        - masks.active_scaled[idx] * dy[(k, i)]
                };
            }
        }
        out
    }

    /// `K d`: mask-weighted coupling of a direction followed by the heat
    /// solves, so that `M^{-1} J = I - K`.
    pub fn coupling_apply(&self, masks: &Masks, d: &[f64], out: &mut [f64]) {
        let nf = self.nf();
        let block = self.block();
        let levels = self.n_t() - 1;
        let (dy, dq) = d.split_at(block);
        let (fwd, bwd) = out.split_at_mut(block);
        let qf = self.qf();
        // state level m couples to adjoint level m when that level is stacked
        for m in 1..=levels {
            let dst = &mut fwd[(m - 1) * nf..m * nf];
            let mask = &masks.inactive[(m - 1) * nf..m * nf];
            if m - qf < levels {
                let j = m - qf;
                let src = &dq[j * nf..(j + 1) * nf];
                for r in 0..nf {
                    dst[r] = mask[r] * src[r];
                }
            } else {
                dst.fill(0.0);
            }
        }
        // adjoint level k couples to state level k, which is stacked only for k >= 1
        for j in 0..levels {
            let k = j + qf;
            let dst = &mut bwd[j * nf..(j + 1) * nf];
            let mask = &masks.active_scaled[j * nf..(j + 1) * nf];
            if k >= 1 {
                let src = &dy[(k - 1) * nf..k * nf];
                for r in 0..nf {
                    dst[r] = mask[r] * src[r];
                }
            } else {
                dst.fill(0.0);
            }
        }
        self.stepper.forward_in_place(fwd);
        self.stepper.backward_in_place(bwd);
    }

    /// `(I - K) d`, the generalized Jacobian of the preconditioned residual.
    pub fn reduced_jacobian_apply(&self, masks: &Masks, d: &[f64], out: &mut [f64]) {
        self.coupling_apply(masks, d, out);
        for (o, v) in out.iter_mut().zip(d) {
            *o = v - *o;
        }
    }

    /// Heat-solve response to interface data alone: `M^{-1}` applied to a
    /// right-hand side that vanishes except on the Robin rows.
    pub fn boundary_response(&self, traces: &TraceData) -> Result<Vec<f64>> {
        self.check_traces(Some(traces))?;
        let nf = self.nf();
        let block = self.block();
        let r = self.stepper.robin_row().expect("window has a Robin end");
        let mut out = vec![0.0; self.dim()];
        {
            let (fwd, bwd) = out.split_at_mut(block);
            for m in 1..self.n_t() {
                fwd[(m - 1) * nf + r] = traces.g_y[m];
            }
            for j in 0..self.n_t() - 1 {
                bwd[j * nf + r] = traces.g_q[j + self.qf()];
            }
            self.stepper.forward_in_place(fwd);
            self.stepper.backward_in_place(bwd);
        }
        Ok(out)
    }
}
