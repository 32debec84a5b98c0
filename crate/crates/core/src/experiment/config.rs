//! Flat `key=value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    /// Built-in test 1 or 2.
    Builtin(u32),
    /// Zero data: `f = 0`, `y0 = 0`, `c_u = 1`, `c_y = 1`.
    Custom,
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestCase::Builtin(id) => write!(f, "{id}"),
            TestCase::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for TestCase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "custom" => Ok(TestCase::Custom),
            "1" => Ok(TestCase::Builtin(1)),
            "2" => Ok(TestCase::Builtin(2)),
            other => Err(format!("unknown test case `{other}` (expected 1, 2 or custom)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Monolithic,
    WrmPreconditioned,
    WrmOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Monolithic => "monolithic",
            Method::WrmPreconditioned => "wrm-preconditioned",
            Method::WrmOnly => "wrm-only",
        }
    }

    pub fn uses_decomposition(self) -> bool {
        self != Method::Monolithic
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "monolithic" => Ok(Method::Monolithic),
            "wrm-preconditioned" => Ok(Method::WrmPreconditioned),
            "wrm-only" => Ok(Method::WrmOnly),
            other => Err(format!(
                "unknown method `{other}` (expected monolithic, wrm-preconditioned or wrm-only)"
            )),
        }
    }
}

pub const DEFAULT_EPS: [f64; 6] = [1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4];
pub const DEFAULT_OVERLAP: [usize; 3] = [1, 2, 4];
pub const DEFAULT_ROBIN_P: [f64; 7] = [1e-6, 1e-4, 1e-2, 1e0, 1e2, 1e4, 1e6];

/// Everything a `solve` or `sweep` run needs. Lists are the sweep axes;
/// a single solve uses lists of length one.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub test_case: TestCase,
    pub eps: Vec<f64>,
    pub overlap_cells: Vec<usize>,
    pub robin_p: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub n_x: usize,
    pub n_t: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    /// Test 1 on the default grid, the full sweep axes, the preconditioned
    /// method, seed 0, output to `out/`.
    fn default() -> Self {
        Self {
            test_case: TestCase::Builtin(1),
            eps: DEFAULT_EPS.to_vec(),
            overlap_cells: DEFAULT_OVERLAP.to_vec(),
            robin_p: DEFAULT_ROBIN_P.to_vec(),
            method: Method::WrmPreconditioned,
            seed: 0,
            n_x: 161,
            n_t: 21,
            out: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 9] = ["test", "eps", "overlap_cells", "robin_p", "method", "seed", "nx", "nt", "out"];

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(format!("empty entry in list `{value}`"));
    }
    items
        .iter()
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse `{s}`")))
        .collect()
}

fn parse_scalar<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse::<T>().map_err(|_| format!("cannot parse `{value}`"))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "test" => self.test_case = value.parse()?,
            "eps" => self.eps = parse_list(value)?,
            "overlap_cells" => self.overlap_cells = parse_list(value)?,
            "robin_p" => self.robin_p = parse_list(value)?,
            "method" => self.method = value.parse()?,
            "seed" => self.seed = parse_scalar(value)?,
            "nx" => self.n_x = parse_scalar(value)?,
            "nt" => self.n_t = parse_scalar(value)?,
            "out" => {
                if value.is_empty() {
                    return Err("empty output directory".into());
                }
                self.out = PathBuf::from(value)
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Checks the invariants not enforced by parsing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.eps.is_empty() || self.overlap_cells.is_empty() || self.robin_p.is_empty() {
            return bad("eps, overlap_cells and robin_p must be non-empty".into());
        }
        if let Some(e) = self.eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("eps must be positive, got {e}"));
        }
        if let Some(p) = self.robin_p.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return bad(format!("robin_p must be positive, got {p}"));
        }
        if self.overlap_cells.contains(&0) {
            return bad("overlap_cells must be at least 1".into());
        }
        if self.n_x < 3 || self.n_t < 2 {
            return bad(format!("grid {}x{} too small", self.n_x, self.n_t));
        }
        Ok(())
    }

    /// Parses configuration text. `#` starts a comment; blank lines are
    /// ignored; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {line_no}: expected `key=value`, got `{line}`")));
            };
            cfg.set(key.trim(), value)
                .map_err(|m| Error::Config(format!("line {line_no}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders every key, so that `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        format!(
            "test={}\neps={}\noverlap_cells={}\nrobin_p={}\nmethod={}\nseed={}\nnx={}\nnt={}\nout={}\n",
            self.test_case,
            join(&self.eps),
            join(&self.overlap_cells),
            join(&self.robin_p),
            self.method,
            self.seed,
            self.n_x,
            self.n_t,
            self.out.display()
        )
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}
