/// Convergence record of an outer (Newton-type) iteration.
///
/// `inner_counts[k]` is the number of GMRES iterations used by the `k`-th
/// outer step; `residual_history` holds the residual norm at every assembly,
/// starting with the initial one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub outer: usize,
    pub inner_counts: Vec<usize>,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

impl IterationReport {
    pub fn inner_max(&self) -> usize {
        self.inner_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn inner_min(&self) -> usize {
        self.inner_counts.iter().copied().min().unwrap_or(0)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    pub(crate) fn record_step(&mut self, inner: usize) {
        self.outer += 1;
        self.inner_counts.push(inner);
    }
}
