//! Matrix-free GMRES without restarts.

/// A square linear map given only through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `out`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Adapter turning a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm estimate after each iteration, starting with `|rhs|`.
    pub residuals: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `op(x) = rhs` from the zero initial guess.
///
/// Converged means `|op(x) - rhs| <= tol_rel |rhs|` for the Arnoldi residual
/// estimate. A happy breakdown with a residual above tolerance counts as not
/// converged.
pub fn gmres(op: &dyn LinearOperator, rhs: &[f64], opts: GmresOptions) -> GmresOutcome {
    let n = op.dim();
    assert_eq!(rhs.len(), n, "gmres: rhs has the wrong dimension");
    assert!(opts.tol_rel > 0.0 && opts.max_iter >= 1);

    let beta = norm(rhs);
    if beta == 0.0 {
        return GmresOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            converged: true,
            residuals: vec![0.0],
        };
    }
    let target = opts.tol_rel * beta;
    let max_iter = opts.max_iter;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter.min(n) + 1);
    basis.push(rhs.iter().map(|v| v / beta).collect());
    // column-major upper Hessenberg, already rotated
    let mut hess: Vec<Vec<f64>> = Vec::new();
    let mut cos: Vec<f64> = Vec::new();
    let mut sin: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut residuals = vec![beta];
    let mut converged = false;
    let mut w = vec![0.0; n];

    while hess.len() < max_iter {
        let k = hess.len();
        op.apply(&basis[k], &mut w);
        let mut h = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            h[i] = hij;
            for (wl, vl) in w.iter_mut().zip(v) {
                *wl -= hij * vl;
            }
        }
        let h_next = norm(&w);
        h[k + 1] = h_next;

        for i in 0..k {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = cos[i] * a + sin[i] * b;
            h[i + 1] = -sin[i] * a + cos[i] * b;
        }
        let r = h[k].hypot(h[k + 1]);
        let gk = g[k];
        if r == 0.0 {
            // singular Hessenberg column: the residual cannot decrease
            cos.push(1.0);
            sin.push(0.0);
            g.push(gk);
        } else {
            let (c, s) = (h[k] / r, h[k + 1] / r);
            h[k] = r;
            h[k + 1] = 0.0;
            cos.push(c);
            sin.push(s);
            g[k] = c * gk;
            g.push(-s * gk);
        }
        hess.push(h);

        let res = g[k + 1].abs();
        residuals.push(res);
        if res <= target {
            converged = true;
            break;
        }
        if h_next <= 1e-14 * beta || r == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    let k = hess.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for j in i + 1..k {
            acc -= hess[j][i] * y[j];
        }
        y[i] = if hess[i][i] != 0.0 { acc / hess[i][i] } else { 0.0 };
    }
    let mut solution = vec![0.0; n];
    for (yj, v) in y.iter().zip(&basis) {
        for (s, vl) in solution.iter_mut().zip(v) {
            *s += yj * vl;
        }
    }
    GmresOutcome {
        solution,
        iterations: k,
        converged,
        residuals,
    }
}
