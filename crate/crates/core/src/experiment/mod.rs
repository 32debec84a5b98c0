//! Experiment harness: the two built-in test cases, single solves with CSV
//! output, and `(L, p, eps)` sweep tables.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

pub use config::{parse_config, Method, RunConfig, TestCase, DEFAULT_EPS, DEFAULT_OVERLAP, DEFAULT_ROBIN_P, KEYS};

use crate::discretize::{build_decomposition, GridSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{recover_controls, Field, ProblemSpec};
use crate::newton::{semismooth_newton_solve, KktPoint, SolverConfig};
use crate::report::IterationReport;
use crate::wrm::WrmSolver;

pub const REPORT_HEADER: &str = "L_cells,p,eps,method,outer,inner_max,inner_min,converged,seconds";
pub const FIELDS_HEADER: &str = "t,x,y,q,u,w";

/// Built-in test case `id` (1 or 2) on an `n_x` by `n_t` grid over
/// `(-1, 1) x (0, 1)`.
pub fn builtin_test_case_on(id: u32, eps: f64, n_x: usize, n_t: usize) -> Result<(ProblemSpec, GridSpec)> {
    let (f, c_u, slope) = match id {
        1 => (20.0, 30.0, 10.0),
        2 => (18.0, 15.0, 2.0),
        other => return Err(Error::Parameter(format!("unknown test case {other}"))),
    };
    let grid = GridSpec::new(n_x, n_t, 1.0)?;
    let y0 = (0..n_x).map(|i| 5.0 * (std::f64::consts::PI * grid.x(i)).sin()).collect();
    let source = Field::from_fn(n_t, n_x, |_, _| f);
    let c_y = (0..n_t).map(|m| slope * (1.0 - grid.t(m)) + 3.0).collect();
    Ok((ProblemSpec::new(&grid, y0, source, c_u, c_y, eps)?, grid))
}

/// Built-in test case on the default 161 x 21 grid.
pub fn builtin_test_case(id: u32, eps: f64) -> Result<(ProblemSpec, GridSpec)> {
    builtin_test_case_on(id, eps, 161, 21)
}

/// Problem selected by a run configuration.
pub fn problem_for(config: &RunConfig, eps: f64) -> Result<(ProblemSpec, GridSpec)> {
    match config.test_case {
        TestCase::Builtin(id) => builtin_test_case_on(id, eps, config.n_x, config.n_t),
        TestCase::Custom => {
            let grid = GridSpec::new(config.n_x, config.n_t, 1.0)?;
            Ok((ProblemSpec::zero(&grid, 1.0, 1.0, eps)?, grid))
        }
    }
}

/// One solve of one method at one parameter combination.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    pub method: Method,
    pub eps: f64,
    /// Overlap cells and Robin parameter; `None` for the monolithic method.
    pub decomposition: Option<(usize, f64)>,
    pub report: IterationReport,
    /// Breakdown before the outer iteration could finish.
    pub failure: Option<String>,
    pub seconds: f64,
}

impl SolveRecord {
    pub fn converged(&self) -> bool {
        self.report.converged && self.failure.is_none()
    }

    /// `report.csv` row.
    pub fn csv_row(&self) -> String {
        let (k, p) = match self.decomposition {
            Some((k, p)) => (k.to_string(), p.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{k},{p},{},{},{},{},{},{},{:.6}",
            self.eps,
            self.method,
            self.report.outer,
            self.report.inner_max(),
            self.report.inner_min(),
            self.converged(),
            self.seconds
        )
    }

    /// Table cell `outer(max-min)`; failures show the outer cap.
    pub fn cell(&self, cap: usize) -> String {
        let outer = if self.converged() { self.report.outer } else { cap };
        format!("{outer}({}-{})", self.report.inner_max(), self.report.inner_min())
    }
}

/// Runs `method` on one problem. Errors are reserved for invalid input;
/// solver breakdowns end up in the record.
pub fn solve_one(
    spec: &ProblemSpec,
    grid: &GridSpec,
    method: Method,
    decomposition: Option<(usize, f64)>,
    solver: &SolverConfig,
) -> Result<(SolveRecord, KktPoint)> {
    let start = Instant::now();
    let (report, failure, point) = match method {
        Method::Monolithic => {
            let (point, report) = semismooth_newton_solve(spec, grid, solver)?;
            (report, None, point)
        }
        Method::WrmPreconditioned | Method::WrmOnly => {
            let (k, p) = decomposition
                .ok_or_else(|| Error::Parameter("decomposition methods need overlap and Robin parameter".into()))?;
            let decomp = build_decomposition(grid, k, p)?;
            let wrm = WrmSolver::new(spec, grid, &decomp, solver)?;
            let init = wrm.random_guess(solver.rng_seed)?;
            let outcome = if method == Method::WrmOnly {
                wrm.wrm_iterate(init)
            } else {
                wrm.preconditioned_newton_solve(init)
            };
            let point = wrm.glue(&outcome.state);
            (outcome.report, outcome.failure.map(|e| e.to_string()), point)
        }
    };
    let record = SolveRecord {
        method,
        eps: spec.eps,
        decomposition: if method.uses_decomposition() { decomposition } else { None },
        report,
        failure,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((record, point))
}

fn solver_for(config: &RunConfig, base: &SolverConfig) -> SolverConfig {
    SolverConfig {
        rng_seed: config.seed,
        ..*base
    }
}

/// `fields.csv` contents: one row per space-time node.
pub fn fields_csv(point: &KktPoint, spec: &ProblemSpec, grid: &GridSpec) -> Result<String> {
    let (u, w) = recover_controls(&point.y, &point.q, spec)?;
    let mut out = String::with_capacity(grid.n_t * grid.n_x * 64);
    out.push_str(FIELDS_HEADER);
    out.push('\n');
    for m in 0..grid.n_t {
        for i in 0..grid.n_x {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                grid.t(m),
                grid.x(i),
                point.y[(m, i)],
                point.q[(m, i)],
                u[(m, i)],
                w[(m, i)]
            );
        }
    }
    Ok(out)
}

/// Result of [`run_case`].
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub record: SolveRecord,
    pub point: KktPoint,
}

/// Single solve for a configuration whose lists hold one value each (the
/// decomposition lists are ignored by the monolithic method). Writes
/// `report.csv` and `fields.csv` into `config.out`.
pub fn run_case(config: &RunConfig, base: &SolverConfig) -> Result<CaseOutcome> {
    config.validate()?;
    let single = |n: usize, what: &str| {
        if n == 1 {
            Ok(())
        } else {
            Err(Error::Config(format!("a single solve needs exactly one {what} value, got {n}")))
        }
    };
    single(config.eps.len(), "eps")?;
    if config.method.uses_decomposition() {
        single(config.overlap_cells.len(), "overlap_cells")?;
        single(config.robin_p.len(), "robin_p")?;
    }
    let eps = config.eps[0];
    let (spec, grid) = problem_for(config, eps)?;
    let decomposition = Some((config.overlap_cells[0], config.robin_p[0]));
    let (record, point) = solve_one(&spec, &grid, config.method, decomposition, &solver_for(config, base))?;

    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join("report.csv"), format!("{REPORT_HEADER}\n{}\n", record.csv_row()))?;
    fs::write(config.out.join("fields.csv"), fields_csv(&point, &spec, &grid)?)?;
    Ok(CaseOutcome { record, point })
}

/// Iteration table: one row per `(L, p)`, one column per `eps`, plus the
/// monolithic baseline.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub eps: Vec<f64>,
    /// `(overlap_cells, robin_p, records per eps)`.
    pub rows: Vec<(usize, f64, Vec<SolveRecord>)>,
    pub baseline: Vec<SolveRecord>,
    pub cap: usize,
}

fn overlap_label(k: usize) -> String {
    if k == 1 {
        "dx".into()
    } else {
        format!("{k}dx")
    }
}

impl SweepTable {
    fn baseline_cell(&self, r: &SolveRecord) -> String {
        if r.converged() {
            r.report.outer.to_string()
        } else {
            self.cap.to_string()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("L_cells,p");
        for e in &self.eps {
            let _ = write!(out, ",{e:e}");
        }
        out.push('\n');
        for (k, p, cells) in &self.rows {
            let _ = write!(out, "{k},{p:e}");
            for c in cells {
                let _ = write!(out, ",{}", c.cell(self.cap));
            }
            out.push('\n');
        }
        out.push_str("Sem. New.,");
        for r in &self.baseline {
            let _ = write!(out, ",{}", self.baseline_cell(r));
        }
        out.push('\n');
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| L | p |");
        for e in &self.eps {
            let _ = write!(out, " {e:e} |");
        }
        out.push_str("\n|---|---|");
        for _ in &self.eps {
            out.push_str("---|");
        }
        out.push('\n');
        for (k, p, cells) in &self.rows {
            let _ = write!(out, "| {} | {p:e} |", overlap_label(*k));
            for c in cells {
                let _ = write!(out, " {} |", c.cell(self.cap));
            }
            out.push('\n');
        }
        out.push_str("| Sem. New. | |");
        for r in &self.baseline {
            let _ = write!(out, " {} |", self.baseline_cell(r));
        }
        out.push('\n');
        out
    }

    /// All records, body rows first.
    pub fn records(&self) -> impl Iterator<Item = &SolveRecord> {
        self.rows.iter().flat_map(|(_, _, c)| c.iter()).chain(&self.baseline)
    }
}

type Job = (Method, f64, Option<(usize, f64)>);

/// Runs every `(L, p, eps)` cell of the configured method and the
/// monolithic baseline, cells in parallel. Writes `table.csv`, `table.md`
/// and `report.csv` into `config.out`.
pub fn sweep_table(config: &RunConfig, base: &SolverConfig) -> Result<SweepTable> {
    config.validate()?;
    let solver = solver_for(config, base);
    let body_method = match config.method {
        Method::Monolithic => None,
        m => Some(m),
    };
    let mut jobs: Vec<Job> = Vec::new();
    if let Some(m) = body_method {
        for &k in &config.overlap_cells {
            for &p in &config.robin_p {
                for &e in &config.eps {
                    jobs.push((m, e, Some((k, p))));
                }
            }
        }
    }
    for &e in &config.eps {
        jobs.push((Method::Monolithic, e, None));
    }
    let results = exec::map(solver.execution, &jobs, |&(method, eps, dec)| {
        let (spec, grid) = problem_for(config, eps)?;
        solve_one(&spec, &grid, method, dec, &solver).map(|(r, _)| r)
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter();

    let n_eps = config.eps.len();
    let mut rows = Vec::new();
    if body_method.is_some() {
        for &k in &config.overlap_cells {
            for &p in &config.robin_p {
                rows.push((k, p, records.by_ref().take(n_eps).collect()));
            }
        }
    }
    let table = SweepTable {
        eps: config.eps.clone(),
        rows,
        baseline: records.collect(),
        cap: solver.max_outer,
    };

    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join("table.csv"), table.to_csv())?;
    fs::write(config.out.join("table.md"), table.to_markdown())?;
    let mut report = format!("{REPORT_HEADER}\n");
    for r in table.records() {
        report.push_str(&r.csv_row());
        report.push('\n');
    }
    fs::write(config.out.join("report.csv"), report)?;
    Ok(table)
}

/// Writes the sampled data of a problem as `t,x,y0,f,c_y` rows (`y0` is
/// repeated on every time level).
pub fn case_csv(spec: &ProblemSpec, grid: &GridSpec) -> String {
    let mut out = String::from("t,x,y0,f,c_y\n");
    for m in 0..grid.n_t {
        for i in 0..grid.n_x {
            let _ = writeln!(out, "{},{},{},{},{}", grid.t(m), grid.x(i), spec.y0[i], spec.f[(m, i)], spec.c_y[m]);
        }
    }
    out
}

/// Helper for callers that only hold a path.
pub fn write_case(path: &Path, spec: &ProblemSpec, grid: &GridSpec) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, case_csv(spec, grid))?;
    Ok(())
}
