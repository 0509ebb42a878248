//! Constrained critical points of F on S_ρ: the negative-energy local
//! minimizer, the mountain-pass solution and their diagnostics.

mod escape;
mod local_min;
mod mountain_pass;
mod refine;

pub use escape::{mass_escape, SplittingReport};
pub use local_min::solve_local_min;
pub use mountain_pass::{init_path, solve_mountain_pass, MountainPassOutcome, Path};
pub use refine::refine_critical_point;

use serde::{Deserialize, Serialize};

use crate::banded::BandedLu;
use crate::error::{param, Error, Result};
use crate::functionals::{EnergyBreakdown, Problem};
use crate::grid::{Grid, GridFunction};

/// Tolerances and iteration caps shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stationarity tolerance relative to √a.
    pub tol_crit: f64,
    /// Relative mass tolerance.
    pub tol_mass: f64,
    pub max_iter: usize,
    pub max_sweeps: usize,
    pub n_path: usize,
    /// Projected-gradient level (relative to √a) at which Newton takes over.
    pub handoff: f64,
    pub split_frac: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_newton: usize,
    /// Initial string step.
    pub path_step: f64,
    /// δ in the structural constants.
    pub delta: f64,
    /// Run even when the certificate fails.
    pub force: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_crit: 1e-8,
            tol_mass: 1e-10,
            max_iter: 50_000,
            max_sweeps: 2_000,
            n_path: 64,
            handoff: 1e-3,
            split_frac: 0.2,
            h_min: 1.0 / 1024.0,
            h_max: 1024.0,
            max_newton: 50,
            path_step: 0.5,
            delta: 0.5,
            force: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("tol_crit", self.tol_crit),
            ("tol_mass", self.tol_mass),
            ("handoff", self.handoff),
            ("h_min", self.h_min),
            ("path_step", self.path_step),
            ("delta", self.delta),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return param(format!("solver.{name} must be positive, got {v}"));
            }
        }
        if !(self.h_max > 1.0 && self.h_min < 1.0) {
            return param("solver h-search bounds must satisfy h_min < 1 < h_max");
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return param("solver.split_frac must lie in (0, 1)");
        }
        if self.n_path < 16 {
            return param(format!("n_path must be at least 16, got {}", self.n_path));
        }
        if self.max_iter == 0 || self.max_sweeps == 0 || self.max_newton == 0 {
            return param("iteration caps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    EscapedBall,
    SplittingSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    LocalMin,
    MountainPass,
}

/// One row of the optional iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    #[serde(rename = "F")]
    pub energy: f64,
    pub proj_grad: f64,
    pub outer_frac: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    #[serde(skip)]
    pub u: GridFunction,
    pub kind: SolutionKind,
    pub status: Status,
    pub breakdown: EnergyBreakdown,
    pub lambda: f64,
    pub pohozaev: f64,
    pub proj_grad: f64,
    pub tol_crit: f64,
    pub mass_error: f64,
    /// ‖u⁻‖₂/ρ before the final |u| replacement.
    pub negative_part: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl SolutionReport {
    pub fn energy(&self) -> f64 {
        self.breakdown.f
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub(crate) fn assemble(
        prob: &Problem,
        u: GridFunction,
        kind: SolutionKind,
        status: Status,
        cfg: &SolverConfig,
    ) -> Self {
        let s = stationarity(prob, u.values());
        let breakdown = prob.breakdown_slice(u.values());
        Self {
            kind,
            status,
            lambda: s.lambda,
            pohozaev: breakdown.pohozaev(prob.dim, prob.p),
            proj_grad: s.proj_norm,
            tol_crit: cfg.tol_crit * breakdown.a.sqrt(),
            mass_error: (breakdown.mass - prob.rho).abs() / prob.rho,
            negative_part: 0.0,
            grad_norm: breakdown.a.sqrt(),
            breakdown,
            iterations: 0,
            newton_iterations: 0,
            trace: Vec::new(),
            u,
        }
    }

    pub fn write_trace_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,F,proj_grad,outer_frac")?;
        for r in &self.trace {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e}",
                r.iteration, r.energy, r.proj_grad, r.outer_frac
            )?;
        }
        Ok(())
    }
}

/// Gradient data of F restricted to the sphere at u.
pub(crate) struct Stationarity {
    pub grad: Vec<f64>,
    pub lambda: f64,
    /// ‖g + λu‖₂, the L²-projected gradient.
    pub proj_norm: f64,
}

pub(crate) fn stationarity(prob: &Problem, u: &[f64]) -> Stationarity {
    let g = prob.grid();
    let grad = prob.grad_slice(u);
    let lambda = -g.dot(&grad, u) / g.norm_sq(u);
    let proj: Vec<f64> = grad.iter().zip(u).map(|(a, b)| a + lambda * b).collect();
    let proj_norm = g.norm_sq(&proj).sqrt();
    Stationarity {
        grad,
        lambda,
        proj_norm,
    }
}

/// ‖g + λu‖₂ at u, with λ = −⟨g, u⟩/‖u‖².
pub fn stationarity_norm(prob: &Problem, u: &[f64]) -> f64 {
    stationarity(prob, u).proj_norm
}

/// u ← ρu/‖u‖₂.
pub(crate) fn retract(grid: &Grid, u: &mut [f64], rho: f64) -> Result<()> {
    let m = grid.norm_sq(u).sqrt();
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::NonFinite(format!("cannot renormalize, ‖u‖₂ = {m}")));
    }
    let k = rho / m;
    u.iter_mut().for_each(|x| *x *= k);
    Ok(())
}

/// Removes the component along u in the weighted inner product.
pub(crate) fn project_tangent(grid: &Grid, u: &[f64], v: &mut [f64]) {
    let c = grid.dot(u, v) / grid.norm_sq(u);
    v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
}

/// Sobolev preconditioner P = −Δ + c.
pub(crate) struct Preconditioner {
    lu: BandedLu,
    shift: f64,
}

impl Preconditioner {
    pub fn new(grid: &Grid, shift: f64) -> Result<Self> {
        if !(shift > 0.0) {
            return param(format!("preconditioner shift must be positive, got {shift}"));
        }
        let mut m = grid.neg_laplacian_band();
        m.add_diagonal(&vec![shift; grid.len()]);
        Ok(Self {
            lu: m.factorize()?,
            shift,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.lu.solve(v)
    }

    /// Pv.
    pub fn forward(&self, grid: &Grid, v: &[f64]) -> Vec<f64> {
        let lap = grid.laplacian_slice(v);
        lap.iter().zip(v).map(|(l, x)| self.shift * x - l).collect()
    }

    /// P⁻¹g corrected along P⁻¹u so that it is tangent to the sphere at u.
    pub fn tangent_direction(&self, grid: &Grid, u: &[f64], grad: &[f64]) -> Vec<f64> {
        let pg = self.apply(grad);
        let pu = self.apply(u);
        let alpha = grid.dot(u, &pg) / grid.dot(u, &pu);
        pg.iter().zip(&pu).map(|(a, b)| a - alpha * b).collect()
    }
}

/// Fraction of ∫u² carried by |x| > radius.
pub(crate) fn outer_fraction(grid: &Grid, u: &[f64], radius: f64) -> f64 {
    let total = grid.norm_sq(u);
    let outer: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(u)
        .filter(|((x, _), _)| x.abs() > radius)
        .map(|((_, w), v)| w * v * v)
        .sum();
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

pub(crate) fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} = {v}")))
    }
}
