//! TOML run configuration shared by all CLI subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functionals::{Potential, Problem};
use crate::grid::{make_grid, Grid, GridKind};
use crate::limit_problem::{check_supercritical, default_ground_state_grid};
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: f64,
    pub rho: f64,
}

/// Lebesgue exponents of the hypotheses on V and W = V|x|. TOML accepts the
/// literal `inf`; JSON output writes "inf".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    #[serde(with = "exponent", default = "infinite")]
    pub r: f64,
    #[serde(with = "exponent", default = "infinite")]
    pub s: f64,
}

impl Default for NormsSection {
    fn default() -> Self {
        Self {
            r: f64::INFINITY,
            s: f64::INFINITY,
        }
    }
}

fn infinite() -> f64 {
    f64::INFINITY
}

mod exponent {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("bad exponent `{t}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kind: GridKind,
    pub rmax: f64,
    pub n: usize,
}

/// Grid for the limit problem; defaults depend on N.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSection {
    pub rmax: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub trace: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub potential: Potential,
    #[serde(default)]
    pub norms: NormsSection,
    pub grid: GridSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates; relative CSV paths are resolved against the
    /// directory of the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Potential::Csv { path: csv } = &mut cfg.potential {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without resolving paths or validating.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let pr = &self.problem;
        if pr.dim == 0 {
            return bad("problem.N must be at least 1".into());
        }
        check_supercritical(pr.dim, pr.p).map_err(|e| Error::Config(e.to_string()))?;
        if !(pr.rho > 0.0 && pr.rho.is_finite()) {
            return bad(format!("problem.rho must be positive, got {}", pr.rho));
        }
        if self.grid.kind == GridKind::Line && pr.dim != 1 {
            return bad("line grids require N = 1".into());
        }
        if !(self.grid.rmax > 0.0 && self.grid.rmax.is_finite()) || self.grid.n < 16 {
            return bad("grid needs rmax > 0 and n ≥ 16".into());
        }
        let nd = pr.dim as f64;
        if !(self.norms.r > 1.0 && self.norms.r > nd / 2.0) {
            return bad(format!("norms.r must exceed max(1, N/2), got {}", self.norms.r));
        }
        if !(self.norms.s > 2.0 && self.norms.s > nd) {
            return bad(format!("norms.s must exceed max(2, N), got {}", self.norms.s));
        }
        if let Some(r) = self.ground_state.rmax {
            if !(r > 0.0 && r.is_finite()) {
                return bad("ground_state.rmax must be positive".into());
            }
        }
        if self.ground_state.n.is_some_and(|n| n < 16) {
            return bad("ground_state.n must be at least 16".into());
        }
        if let Potential::Csv { path } = &self.potential {
            if !path.exists() {
                return bad(format!("potential file {} does not exist", path.display()));
            }
        }
        self.potential
            .sample(&self.build_grid()?)
            .map_err(|e| Error::Config(format!("potential: {e}")))?;
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        make_grid(self.problem.dim, self.grid.kind, self.grid.rmax, self.grid.n)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn ground_state_grid(&self) -> Result<Arc<Grid>> {
        let dim = self.problem.dim;
        let def = default_ground_state_grid(dim)?;
        let rmax = self.ground_state.rmax.unwrap_or(def.rmax());
        let n = self.ground_state.n.unwrap_or(def.len());
        make_grid(dim, def.kind(), rmax, n)
    }

    /// The problem on `grid`; V ≡ 0 gives the limit problem.
    pub fn problem_on(&self, grid: &Arc<Grid>) -> Result<Problem> {
        let v = self.potential.sample(grid)?;
        if v.values().iter().all(|x| *x == 0.0) {
            Problem::free(grid, self.problem.p, self.problem.rho)
        } else {
            Problem::new(self.problem.p, self.problem.rho, v)
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_on(&self.build_grid()?)
    }
}
