//! Uniform space-time grids, overlapping two-subdomain decompositions,
//! implicit Euler heat solves and the Robin interface stencil.
//!
//! Every solve works on a [`SubGrid`], a contiguous window of the global
//! space grid whose two ends are either homogeneous Dirichlet nodes or Robin
//! interface nodes. The full domain is the window with Dirichlet ends on both
//! sides, so the monodomain and subdomain problems share one code path.
//!
//! The Robin row at an interface node uses the one-sided difference between
//! the interface node and its single inner neighbour. The donor side
//! evaluates the very same expression when it produces a trace, which makes
//! the restriction of a monodomain solution an exact discrete fixed point of
//! the waveform relaxation.

use crate::error::{Error, Result};
use crate::model::Field;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_t: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub t_final: f64,
}

impl GridSpec {
    /// Grid on `(-1, 1) x (0, t_final)`.
    pub fn new(n_x: usize, n_t: usize, t_final: f64) -> Result<Self> {
        Self::with_domain(n_x, n_t, -1.0, 1.0, t_final)
    }

    pub fn with_domain(
        n_x: usize,
        n_t: usize,
        x_left: f64,
        x_right: f64,
        t_final: f64,
    ) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::Parameter(format!("n_x must be at least 3, got {n_x}")));
        }
        if n_t < 2 {
            return Err(Error::Parameter(format!("n_t must be at least 2, got {n_t}")));
        }
        if !(x_right > x_left) || !(t_final > 0.0) {
            return Err(Error::Parameter(format!(
                "degenerate grid: x in ({x_left}, {x_right}), T = {t_final}"
            )));
        }
        Ok(Self {
            n_x,
            n_t,
            x_left,
            x_right,
            t_final,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / (self.n_x - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n_t - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.dx()
    }

    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    /// Weight of the discrete L2 norm, `sqrt(dt * dx)`.
    pub fn l2_weight(&self) -> f64 {
        (self.dt() * self.dx()).sqrt()
    }

    pub fn full(&self) -> SubGrid {
        SubGrid {
            start: 0,
            len: self.n_x,
            left: Boundary::Dirichlet,
            right: Boundary::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Homogeneous Dirichlet node.
    Dirichlet,
    /// Interface node carrying a Robin row with parameter `p`.
    Robin { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

/// Contiguous window `[start, start + len)` of the global space nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGrid {
    pub start: usize,
    pub len: usize,
    pub left: Boundary,
    pub right: Boundary,
}

impl SubGrid {
    /// Local indices `[lo, hi)` of the nodes that carry unknowns; Dirichlet
    /// ends are excluded, Robin ends are included.
    pub fn free_range(&self) -> (usize, usize) {
        let lo = match self.left {
            Boundary::Dirichlet => 1,
            Boundary::Robin { .. } => 0,
        };
        let hi = match self.right {
            Boundary::Dirichlet => self.len - 1,
            Boundary::Robin { .. } => self.len,
        };
        (lo, hi)
    }

    pub fn free_len(&self) -> usize {
        let (lo, hi) = self.free_range();
        hi - lo
    }

    /// Local index, side and parameter of the Robin node, if any.
    pub fn robin(&self) -> Option<(usize, End, f64)> {
        match (self.left, self.right) {
            (Boundary::Robin { p }, _) => Some((0, End::Left, p)),
            (_, Boundary::Robin { p }) => Some((self.len - 1, End::Right, p)),
            _ => None,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, global: usize) -> bool {
        global >= self.start && global < self.end()
    }
}

/// Robin expression `v_x + p v` (right end) or `v_x - p v` (left end) with the
/// one-sided difference towards the inside of the receiving window.
///
/// `inner` is the neighbour inside the receiver, `node` the interface node.
#[inline]
pub fn robin_stencil(node: f64, inner: f64, end: End, p: f64, dx: f64) -> f64 {
    match end {
        End::Right => (node - inner) / dx + p * node,
        End::Left => (inner - node) / dx - p * node,
    }
}

/// Two overlapping subdomains `(-1, L)` and `(-L, 1)` with `L = k dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub overlap_cells: usize,
    pub robin_p: f64,
    /// Global node of the interface `x = -L` (left end of subdomain 2).
    pub i_minus: usize,
    /// Global node of the interface `x = +L` (right end of subdomain 1).
    pub i_plus: usize,
    pub dx: f64,
    pub subgrids: [SubGrid; 2],
}

impl Decomposition {
    pub fn half_width(&self) -> f64 {
        self.overlap_cells as f64 * self.dx
    }

    /// Window of subdomain `j` (1 or 2).
    pub fn subgrid(&self, j: usize) -> &SubGrid {
        &self.subgrids[j - 1]
    }

    /// Global nodes `(inner, interface)` of the Robin row of receiver `j`.
    pub fn interface_nodes(&self, j: usize) -> (usize, usize) {
        if j == 1 {
            (self.i_plus - 1, self.i_plus)
        } else {
            (self.i_minus + 1, self.i_minus)
        }
    }
}

pub fn build_decomposition(grid: &GridSpec, overlap_cells: usize, robin_p: f64) -> Result<Decomposition> {
    if grid.n_x % 2 == 0 {
        return Err(Error::Parameter(format!(
            "n_x must be odd so that x = 0 is a node, got {}",
            grid.n_x
        )));
    }
    // 2L in (0, 1) with L = k dx and dx = 2 / (n_x - 1)
    if overlap_cells < 1 || 4 * overlap_cells >= grid.n_x - 1 {
        return Err(Error::Parameter(format!(
            "overlap must satisfy 1 <= k < {}, got {overlap_cells}",
            (grid.n_x - 1) as f64 / 4.0
        )));
    }
    if !(robin_p > 0.0) || !robin_p.is_finite() {
        return Err(Error::Parameter(format!(
            "Robin parameter must be positive, got {robin_p}"
        )));
    }
    let center = (grid.n_x - 1) / 2;
    let i_minus = center - overlap_cells;
    let i_plus = center + overlap_cells;
    let robin = Boundary::Robin { p: robin_p };
    let sub1 = SubGrid {
        start: 0,
        len: i_plus + 1,
        left: Boundary::Dirichlet,
        right: robin,
    };
    let sub2 = SubGrid {
        start: i_minus,
        len: grid.n_x - i_minus,
        left: robin,
        right: Boundary::Dirichlet,
    };
    Ok(Decomposition {
        overlap_cells,
        robin_p,
        i_minus,
        i_plus,
        dx: grid.dx(),
        subgrids: [sub1, sub2],
    })
}

/// Robin trace of a donor field at the interface of receiver `j`, at time
/// level `m`.
pub fn robin_trace(field: &Field, decomp: &Decomposition, receiver: usize, m: usize) -> Result<f64> {
    if receiver != 1 && receiver != 2 {
        return Err(Error::Parameter(format!("subdomain index must be 1 or 2, got {receiver}")));
    }
    let (inner, node) = decomp.interface_nodes(receiver);
    let span = field.offset()..field.offset() + field.n_x();
    if !span.contains(&inner) || !span.contains(&node) {
        return Err(Error::Decomposition(format!(
            "trace stencil nodes {inner}, {node} lie outside the donor window [{}, {})",
            span.start, span.end
        )));
    }
    if m >= field.n_t() {
        return Err(Error::Dimension(format!(
            "time level {m} out of range for {} levels",
            field.n_t()
        )));
    }
    let row = field.row(m);
    let off = field.offset();
    let end = if receiver == 1 { End::Right } else { End::Left };
    Ok(robin_stencil(
        row[node - off],
        row[inner - off],
        end,
        decomp.robin_p,
        decomp.dx,
    ))
}

/// Pre-factored implicit Euler step matrix `I/dt - Laplacian` on the free
/// nodes of a window, with Robin rows where the window has an interface.
///
/// The same matrix serves the forward state march and the backward adjoint
/// march. Right-hand sides are passed in "stacked" layout: one block of
/// `free_len` values per unknown time level.
#[derive(Debug, Clone)]
pub struct HeatStepper {
    sub: SubGrid,
    n_t: usize,
    dt: f64,
    dx: f64,
    lo: usize,
    robin_row: Option<usize>,
    // Thomas factorization: sub-diagonal multipliers, pivots, super-diagonal
    lower: Vec<f64>,
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl HeatStepper {
    pub fn new(grid: &GridSpec, sub: &SubGrid) -> Self {
        let dx = grid.dx();
        let dt = grid.dt();
        let (lo, hi) = sub.free_range();
        let nf = hi - lo;
        let mut a = vec![-1.0 / (dx * dx); nf];
        let mut b = vec![1.0 / dt + 2.0 / (dx * dx); nf];
        let mut c = vec![-1.0 / (dx * dx); nf];
        a[0] = 0.0;
        c[nf - 1] = 0.0;
        let robin_row = sub.robin().map(|(node, end, p)| {
            let r = node - lo;
            match end {
                End::Right => {
                    a[r] = -1.0 / dx;
                    b[r] = 1.0 / dx + p;
                    c[r] = 0.0;
                }
                End::Left => {
                    a[r] = 0.0;
                    b[r] = -1.0 / dx - p;
                    c[r] = 1.0 / dx;
                }
            }
            r
        });
        let mut lower = vec![0.0; nf];
        let mut pivot = vec![0.0; nf];
        pivot[0] = b[0];
        for r in 1..nf {
            lower[r] = a[r] / pivot[r - 1];
            pivot[r] = b[r] - lower[r] * c[r - 1];
        }
        assert!(
            pivot.iter().all(|p| p.abs() > 0.0 && p.is_finite()),
            "singular implicit Euler step matrix"
        );
        Self {
            sub: *sub,
            n_t: grid.n_t,
            dt,
            dx,
            lo,
            robin_row,
            lower,
            pivot,
            upper: c,
        }
    }

    pub fn subgrid(&self) -> &SubGrid {
        &self.sub
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn free_len(&self) -> usize {
        self.pivot.len()
    }

    /// First local node carrying an unknown.
    pub fn free_start(&self) -> usize {
        self.lo
    }

    /// Position of the Robin row inside a free block.
    pub fn robin_row(&self) -> Option<usize> {
        self.robin_row
    }

    /// Length of a stacked block covering `n_t - 1` time levels.
    pub fn block_len(&self) -> usize {
        (self.n_t - 1) * self.free_len()
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let nf = rhs.len();
        for r in 1..nf {
            rhs[r] -= self.lower[r] * rhs[r - 1];
        }
        rhs[nf - 1] /= self.pivot[nf - 1];
        for r in (0..nf - 1).rev() {
            rhs[r] = (rhs[r] - self.upper[r] * rhs[r + 1]) / self.pivot[r];
        }
    }

    /// Applies the inverse of the forward operator on stacked levels
    /// `1..n_t`, zero initial data.
    ///
    /// Row `r` of level `m` of `rhs` is the source at an interior node, or
    /// the Robin datum at the interface row. Overwrites `rhs` with the state.
    pub fn forward_in_place(&self, rhs: &mut [f64]) {
        let nf = self.free_len();
        let inv_dt = 1.0 / self.dt;
        for level in 0..self.n_t - 1 {
            let (done, rest) = rhs.split_at_mut(level * nf);
            let cur = &mut rest[..nf];
            if level > 0 {
                let prev = &done[(level - 1) * nf..];
                for r in 0..nf {
                    if Some(r) != self.robin_row {
                        cur[r] += prev[r] * inv_dt;
                    }
                }
            }
            self.solve_in_place(cur);
        }
    }

    /// Applies the inverse of the backward operator
    /// `(q^{k+1} - q^k)/dt + Laplacian q^k` on stacked levels `0..n_t-1`,
    /// zero terminal data. Block `k` of `rhs` holds level `k`.
    pub fn backward_in_place(&self, rhs: &mut [f64]) {
        let nf = self.free_len();
        let inv_dt = 1.0 / self.dt;
        let levels = self.n_t - 1;
        for level in (0..levels).rev() {
            let (head, tail) = rhs.split_at_mut((level + 1) * nf);
            let cur = &mut head[level * nf..];
            for r in 0..nf {
                if Some(r) != self.robin_row {
                    cur[r] = -cur[r];
                    if level + 1 < levels {
                        cur[r] += tail[r] * inv_dt;
                    }
                }
            }
            self.solve_in_place(cur);
        }
    }

    /// Implicit Euler state solve with initial data `init` (window values),
    /// source `source` and optional Robin data per time level.
    pub fn forward(&self, source: &Field, init: &[f64], robin: Option<&[f64]>) -> Result<Field> {
        source.check_on(self.n_t, &self.sub)?;
        self.check_boundary_data(init, robin)?;
        let nf = self.free_len();
        let mut block = vec![0.0; self.block_len()];
        for m in 1..self.n_t {
            let dst = &mut block[(m - 1) * nf..m * nf];
            dst.copy_from_slice(&source.row(m)[self.lo..self.lo + nf]);
            if let (Some(r), Some(g)) = (self.robin_row, robin) {
                dst[r] = g[m];
            }
        }
        for r in 0..nf {
            if Some(r) != self.robin_row {
                block[r] += init[self.lo + r] / self.dt;
            }
        }
        self.forward_in_place(&mut block);
        let mut out = Field::zeros_on(self.n_t, &self.sub);
        out.row_mut(0).copy_from_slice(init);
        for m in 1..self.n_t {
            out.row_mut(m)[self.lo..self.lo + nf].copy_from_slice(&block[(m - 1) * nf..m * nf]);
        }
        Ok(out)
    }

    /// Implicit Euler adjoint solve backwards from zero terminal data.
    pub fn backward(&self, source: &Field, robin: Option<&[f64]>) -> Result<Field> {
        source.check_on(self.n_t, &self.sub)?;
        self.check_boundary_data(&vec![0.0; self.sub.len], robin)?;
        let nf = self.free_len();
        let mut block = vec![0.0; self.block_len()];
        for k in 0..self.n_t - 1 {
            let dst = &mut block[k * nf..(k + 1) * nf];
            dst.copy_from_slice(&source.row(k)[self.lo..self.lo + nf]);
            if let (Some(r), Some(g)) = (self.robin_row, robin) {
                dst[r] = g[k];
            }
        }
        self.backward_in_place(&mut block);
        let mut out = Field::zeros_on(self.n_t, &self.sub);
        for k in 0..self.n_t - 1 {
            out.row_mut(k)[self.lo..self.lo + nf].copy_from_slice(&block[k * nf..(k + 1) * nf]);
        }
        Ok(out)
    }

    fn check_boundary_data(&self, init: &[f64], robin: Option<&[f64]>) -> Result<()> {
        if init.len() != self.sub.len {
            return Err(Error::Dimension(format!(
                "initial data has {} values, window has {} nodes",
                init.len(),
                self.sub.len
            )));
        }
        match (self.robin_row, robin) {
            (Some(_), Some(g)) if g.len() == self.n_t => Ok(()),
            (Some(_), Some(g)) => Err(Error::Dimension(format!(
                "Robin data has {} samples, expected {}",
                g.len(),
                self.n_t
            ))),
            (Some(_), None) => Err(Error::Parameter(
                "window has a Robin end but no Robin data was given".into(),
            )),
            (None, Some(_)) => Err(Error::Parameter(
                "Robin data given for a window without interface".into(),
            )),
            (None, None) => Ok(()),
        }
    }
}

/// Implicit Euler solve of `y_t - y_xx = source`, `y(0) = y0`, on a window.
pub fn forward_heat_solve(
    grid: &GridSpec,
    sub: &SubGrid,
    source: &Field,
    y0: &[f64],
    robin: Option<&[f64]>,
) -> Result<Field> {
    HeatStepper::new(grid, sub).forward(source, y0, robin)
}

/// Implicit Euler solve of `q_t + q_xx = source`, `q(T) = 0`, marching
/// backwards in time on a window.
pub fn backward_adjoint_solve(
    grid: &GridSpec,
    sub: &SubGrid,
    source: &Field,
    robin: Option<&[f64]>,
) -> Result<Field> {
    HeatStepper::new(grid, sub).backward(source, robin)
}
