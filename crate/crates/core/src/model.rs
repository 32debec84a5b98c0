//! Problem data, the pointwise nonlinearities of the optimality system and
//! the quantities derived from a KKT point (recovered controls, cost, masks).

use std::ops::{Index, IndexMut};

use crate::discretize::{GridSpec, SubGrid};
use crate::error::{Error, Result};

/// A real function sampled on a (time x space) grid or on a subdomain
/// window of one.
///
/// Rows are time levels `m = 0..n_t`, columns are the local space nodes
/// `i = 0..n_x`. `offset` is the global index of local node 0, so fields on
/// different windows of the same grid never compare equal by accident.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_t: usize,
    n_x: usize,
    offset: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n_t: usize, n_x: usize) -> Self {
        Self::zeros_at(n_t, n_x, 0)
    }

    pub fn zeros_at(n_t: usize, n_x: usize, offset: usize) -> Self {
        Self {
            n_t,
            n_x,
            offset,
            values: vec![0.0; n_t * n_x],
        }
    }

    /// Zero field living on the window `sub` of a grid with `n_t` levels.
    pub fn zeros_on(n_t: usize, sub: &SubGrid) -> Self {
        Self::zeros_at(n_t, sub.len, sub.start)
    }

    pub fn from_fn(n_t: usize, n_x: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(n_t, n_x);
        for m in 0..n_t {
            for i in 0..n_x {
                field[(m, i)] = f(m, i);
            }
        }
        field
    }

    pub fn from_vec(n_t: usize, n_x: usize, offset: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_t * n_x {
            return Err(Error::Dimension(format!(
                "field of {n_t}x{n_x} needs {} values, got {}",
                n_t * n_x,
                values.len()
            )));
        }
        Ok(Self {
            n_t,
            n_x,
            offset,
            values,
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.n_x..(m + 1) * self.n_x]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.values[m * self.n_x..(m + 1) * self.n_x]
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.n_t == other.n_t && self.n_x == other.n_x && self.offset == other.offset
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "fields live on different grids: {}x{}@{} vs {}x{}@{}",
                self.n_t, self.n_x, self.offset, other.n_t, other.n_x, other.offset
            )))
        }
    }

    pub fn check_on(&self, n_t: usize, sub: &SubGrid) -> Result<()> {
        if self.n_t == n_t && self.n_x == sub.len && self.offset == sub.start {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "field {}x{}@{} does not live on window {}x{}@{}",
                self.n_t, self.n_x, self.offset, n_t, sub.len, sub.start
            )))
        }
    }

    /// Restriction of a field to a window given in the same global indexing.
    pub fn restrict(&self, sub: &SubGrid) -> Result<Field> {
        if sub.start < self.offset || sub.start + sub.len > self.offset + self.n_x {
            return Err(Error::Dimension(format!(
                "window [{}, {}) is not inside field span [{}, {})",
                sub.start,
                sub.start + sub.len,
                self.offset,
                self.offset + self.n_x
            )));
        }
        let shift = sub.start - self.offset;
        let mut out = Field::zeros_on(self.n_t, sub);
        for m in 0..self.n_t {
            out.row_mut(m)
                .copy_from_slice(&self.row(m)[shift..shift + sub.len]);
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;

    fn index(&self, (m, i): (usize, usize)) -> &f64 {
        &self.values[m * self.n_x + i]
    }
}

impl IndexMut<(usize, usize)> for Field {
    fn index_mut(&mut self, (m, i): (usize, usize)) -> &mut f64 {
        &mut self.values[m * self.n_x + i]
    }
}

/// Data of the state-constrained economic control problem on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub t_final: f64,
    /// Initial state at every space node.
    pub y0: Vec<f64>,
    /// Source term on the full space-time grid.
    pub f: Field,
    pub c_u: f64,
    /// State bound at every time level.
    pub c_y: Vec<f64>,
    pub eps: f64,
}

impl ProblemSpec {
    pub fn new(
        grid: &GridSpec,
        y0: Vec<f64>,
        f: Field,
        c_u: f64,
        c_y: Vec<f64>,
        eps: f64,
    ) -> Result<Self> {
        if y0.len() != grid.n_x {
            return Err(Error::Dimension(format!(
                "y0 has {} samples, grid has {} nodes",
                y0.len(),
                grid.n_x
            )));
        }
        if f.n_t() != grid.n_t || f.n_x() != grid.n_x || f.offset() != 0 {
            return Err(Error::Dimension(format!(
                "source is {}x{}, grid is {}x{}",
                f.n_t(),
                f.n_x(),
                grid.n_t,
                grid.n_x
            )));
        }
        if c_y.len() != grid.n_t {
            return Err(Error::Dimension(format!(
                "c_y has {} samples, grid has {} time levels",
                c_y.len(),
                grid.n_t
            )));
        }
        if !(c_u > 0.0) {
            return Err(Error::Parameter(format!("c_u must be positive, got {c_u}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        if let Some(m) = c_y.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::Parameter(format!(
                "c_y must be positive at every time level, got {} at m={m}",
                c_y[m]
            )));
        }
        Ok(Self {
            t_final: grid.t_final,
            y0,
            f,
            c_u,
            c_y,
            eps,
        })
    }

    /// Same data with a different regularization parameter.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Self {
            eps,
            ..self.clone()
        })
    }

    /// The problem with zero source and zero initial state, whose solution is
    /// identically zero.
    pub fn zero(grid: &GridSpec, c_u: f64, c_y: f64, eps: f64) -> Result<Self> {
        Self::new(
            grid,
            vec![0.0; grid.n_x],
            Field::zeros(grid.n_t, grid.n_x),
            c_u,
            vec![c_y; grid.n_t],
            eps,
        )
    }
}

/// Projection of the adjoint onto the control bounds, `max(-c_u, min(c_u, q))`.
#[inline]
pub fn clamp_control(q: f64, c_u: f64) -> f64 {
    q.min(c_u).max(-c_u)
}

/// Regularized state-constraint penalty
/// `(max(y - c_y, 0) + min(y + c_y, 0)) / eps^2`.
#[inline]
pub fn state_penalty(y: f64, c_y: f64, eps: f64) -> f64 {
    ((y - c_y).max(0.0) + (y + c_y).min(0.0)) / (eps * eps)
}

/// Optimal controls `(u, w) = (P(q), -eps Q(y))` of a KKT point.
pub fn recover_controls(y: &Field, q: &Field, spec: &ProblemSpec) -> Result<(Field, Field)> {
    y.check_same_grid(q)?;
    if y.n_t() != spec.c_y.len() {
        return Err(Error::Dimension(format!(
            "fields have {} time levels, c_y has {}",
            y.n_t(),
            spec.c_y.len()
        )));
    }
    let u = q.map(|v| clamp_control(v, spec.c_u));
    let mut w = y.clone();
    for m in 0..y.n_t() {
        let c = spec.c_y[m];
        for v in w.row_mut(m) {
            *v = -spec.eps * state_penalty(*v, c, spec.eps);
        }
    }
    Ok((u, w))
}

/// `J(u, w) = 1/2 |u|^2 + 1/2 |w|^2` with the rectangle rule, weight
/// `dt * dx` at every node.
pub fn cost_value(u: &Field, w: &Field, grid: &GridSpec) -> Result<f64> {
    u.check_same_grid(w)?;
    let sum: f64 = u
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| 0.5 * (a * a + b * b))
        .sum();
    Ok(sum * grid.dt() * grid.dx())
}

/// Indicator of the inactive control set `|q| <= c_u` (boundary included).
pub fn inactive_control_mask(q: &Field, c_u: f64) -> Field {
    q.map(|v| if v.abs() <= c_u { 1.0 } else { 0.0 })
}

/// Indicator of the violated state set `|y| > c_y(t_m)` (strict).
pub fn active_state_mask(y: &Field, c_y: &[f64]) -> Field {
    let mut mask = y.clone();
    for m in 0..y.n_t() {
        let c = c_y[m];
        for v in mask.row_mut(m) {
            *v = if v.abs() > c { 1.0 } else { 0.0 };
        }
    }
    mask
}
