//! Energy F, its gradient, the Lagrange multiplier and the Pohozaev identity
//! for −Δu − V u + λu = |u|^{p−2}u on the sphere ‖u‖₂ = ρ.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{Grid, GridFunction};

/// Potential profiles accepted by the CLI and the tests. Coordinates are the
/// grid nodes, so `x` is signed on line grids and equals r on radial grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// η·1(|x| ≤ R).
    #[serde(alias = "ball")]
    Indicator { eta: f64, radius: f64 },
    /// η·exp(−((x−c)/w)²).
    Gaussian {
        eta: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// η·(1 − exp(−k|x|)): radially increasing.
    Saturating { eta: f64, rate: f64 },
    /// η·(1 + tanh(x/w))/2: increasing along the line.
    TanhStep { eta: f64, width: f64 },
    /// η·exp(−((x−c)/w)²)·(1 + κ tanh x): an asymmetric bump for the line.
    SkewedGaussian {
        eta: f64,
        width: f64,
        center: f64,
        skew: f64,
    },
    /// Node values read from a two-column CSV on the same grid.
    #[serde(alias = "tabulated")]
    Csv { path: PathBuf },
}

impl Potential {
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        let f = |g: &dyn Fn(f64) -> f64| GridFunction::from_fn(grid, g);
        Ok(match *self {
            Potential::Zero => GridFunction::zeros(grid),
            Potential::Indicator { eta, radius } => {
                f(&|x: f64| if x.abs() <= radius { eta } else { 0.0 })
            }
            Potential::Gaussian { eta, width, center } => {
                f(&|x: f64| eta * (-((x - center) / width).powi(2)).exp())
            }
            Potential::Saturating { eta, rate } => f(&|x: f64| eta * (1.0 - (-rate * x.abs()).exp())),
            Potential::TanhStep { eta, width } => f(&|x: f64| 0.5 * eta * (1.0 + (x / width).tanh())),
            Potential::SkewedGaussian {
                eta,
                width,
                center,
                skew,
            } => f(&|x: f64| eta * (-((x - center) / width).powi(2)).exp() * (1.0 + skew * x.tanh())),
            Potential::Csv { ref path } => {
                let read = GridFunction::read_csv(path)?;
                read.check_grid(grid)?;
                GridFunction::new(grid, read.into_values())?
            }
        })
    }

    /// A copy with the amplitude multiplied by `k` (CSV potentials cannot be
    /// rescaled here).
    pub fn scaled(&self, k: f64) -> Result<Potential> {
        let mut out = self.clone();
        match &mut out {
            Potential::Zero => {}
            Potential::Indicator { eta, .. }
            | Potential::Gaussian { eta, .. }
            | Potential::Saturating { eta, .. }
            | Potential::TanhStep { eta, .. }
            | Potential::SkewedGaussian { eta, .. } => *eta *= k,
            Potential::Csv { .. } => return param("CSV potentials cannot be rescaled"),
        }
        Ok(out)
    }
}

/// Problem data on a grid: exponent, mass, V and W = V·|x|.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dim: usize,
    pub p: f64,
    pub rho: f64,
    pub v: GridFunction,
    pub w: GridFunction,
}

impl Problem {
    /// Requires V ≥ 0 and V ≢ 0.
    pub fn new(p: f64, rho: f64, v: GridFunction) -> Result<Self> {
        if v.values().iter().all(|x| *x == 0.0) {
            return param("potential V vanishes identically; use Problem::free for the limit problem");
        }
        Self::build(p, rho, v)
    }

    /// The limit problem V ≡ 0.
    pub fn free(grid: &Arc<Grid>, p: f64, rho: f64) -> Result<Self> {
        Self::build(p, rho, GridFunction::zeros(grid))
    }

    fn build(p: f64, rho: f64, v: GridFunction) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return param(format!("exponent p must exceed 2, got {p}"));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return param(format!("mass ρ must be positive, got {rho}"));
        }
        if let Some(bad) = v.values().iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return param(format!("potential must be finite and nonnegative, found {bad}"));
        }
        let grid = Arc::clone(v.grid());
        let w = GridFunction::new(
            &grid,
            v.values().iter().zip(grid.nodes()).map(|(a, x)| a * x.abs()).collect(),
        )?;
        Ok(Self {
            dim: grid.dim(),
            p,
            rho,
            v,
            w,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::build(self.p, rho, self.v.clone())
    }

    pub fn is_free(&self) -> bool {
        self.v.values().iter().all(|x| *x == 0.0)
    }

    fn power_sum(&self, u: &[f64]) -> f64 {
        let p = self.p;
        self.grid()
            .weights()
            .iter()
            .zip(u)
            .map(|(w, x)| w * x.abs().powf(p))
            .sum()
    }

    fn potential_sum(&self, u: &[f64]) -> f64 {
        self.grid()
            .weights()
            .iter()
            .zip(u.iter().zip(self.v.values()))
            .map(|(w, (x, v))| w * v * x * x)
            .sum()
    }

    /// F on raw node values.
    pub fn energy_slice(&self, u: &[f64]) -> f64 {
        let g = self.grid();
        0.5 * g.kinetic_form_slice(u) - 0.5 * self.potential_sum(u) - self.power_sum(u) / self.p
    }

    /// −Δu − Vu − |u|^{p−2}u on raw node values.
    pub fn grad_slice(&self, u: &[f64]) -> Vec<f64> {
        let p = self.p;
        let lap = self.grid().laplacian_slice(u);
        lap.iter()
            .zip(u.iter().zip(self.v.values()))
            .map(|(l, (x, v))| -l - v * x - x.abs().powf(p - 2.0) * x)
            .collect()
    }

    pub fn breakdown_slice(&self, u: &[f64]) -> EnergyBreakdown {
        let g = self.grid();
        let a = g.kinetic_form_slice(u);
        let b = self.power_sum(u);
        let c = self.potential_sum(u);
        let xdu = g.dilation_field_slice(u);
        let d: f64 = g
            .weights()
            .iter()
            .zip(self.v.values())
            .zip(u.iter().zip(&xdu))
            .map(|((w, v), (x, dx))| w * v * x * dx)
            .sum();
        let mass = g.norm_sq(u).sqrt();
        let f_inf = 0.5 * a - b / self.p;
        let lambda = if (mass - self.rho).abs() <= 0.01 * self.rho {
            Some((b + c - a) / (self.rho * self.rho))
        } else {
            None
        };
        EnergyBreakdown {
            a,
            b,
            c,
            d,
            f: f_inf - 0.5 * c,
            f_inf,
            lambda,
            mass,
        }
    }
}

/// a = ‖∇u‖², b = ‖u‖_p^p, c = ∫Vu², d = ∫V u (x·∇u).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_inf")]
    pub f_inf: f64,
    pub lambda: Option<f64>,
    pub mass: f64,
}

impl EnergyBreakdown {
    pub fn pohozaev(&self, dim: usize, p: f64) -> f64 {
        let nd = dim as f64;
        self.a - nd * (p - 2.0) / (2.0 * p) * self.b - 0.5 * nd * self.c - self.d
    }
}

pub fn energy_f(prob: &Problem, u: &GridFunction) -> Result<f64> {
    u.check_grid(prob.grid())?;
    Ok(prob.energy_slice(u.values()))
}

/// I_λ(u) = F(u) + (λ/2)‖u‖².
pub fn action_i(prob: &Problem, u: &GridFunction, lambda: f64) -> Result<f64> {
    Ok(energy_f(prob, u)? + 0.5 * lambda * prob.grid().norm_sq(u.values()))
}

pub fn grad_f(prob: &Problem, u: &GridFunction) -> Result<GridFunction> {
    u.check_grid(prob.grid())?;
    u.with_values(prob.grad_slice(u.values()))
}

/// λ = −⟨F'(u), u⟩/ρ² = (b + c − a)/ρ², requiring ‖u‖₂ within 1% of ρ.
pub fn lagrange_multiplier(prob: &Problem, u: &GridFunction) -> Result<f64> {
    u.check_grid(prob.grid())?;
    let e = prob.breakdown_slice(u.values());
    e.lambda.ok_or(Error::MassConstraint {
        mass: e.mass,
        rho: prob.rho,
    })
}

/// a − N(p−2)/(2p)·b − (N/2)·c − d.
pub fn pohozaev_residual(prob: &Problem, u: &GridFunction) -> Result<f64> {
    u.check_grid(prob.grid())?;
    Ok(prob.breakdown_slice(u.values()).pohozaev(prob.dim, prob.p))
}

pub fn energy_breakdown(prob: &Problem, u: &GridFunction) -> Result<EnergyBreakdown> {
    u.check_grid(prob.grid())?;
    Ok(prob.breakdown_slice(u.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridKind};
    use crate::limit_problem::{dilate, scale_soliton, solve_ground_state};

    #[test]
    fn zero_function() {
        let g = make_grid(3, GridKind::Radial, 10.0, 256).unwrap();
        let prob = Problem::new(4.0, 1.0, GridFunction::from_fn(&g, |r| (-r).exp())).unwrap();
        let z = GridFunction::zeros(&g);
        assert_eq!(energy_f(&prob, &z).unwrap(), 0.0);
        assert!(grad_f(&prob, &z).unwrap().values().iter().all(|v| *v == 0.0));
        let e = energy_breakdown(&prob, &z).unwrap();
        assert_eq!((e.a, e.b, e.c, e.d, e.f), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(lagrange_multiplier(&prob, &z).is_err());
    }

    #[test]
    fn soliton_identities() {
        let g = make_grid(3, GridKind::Radial, 24.0, 2048).unwrap();
        let gs = solve_ground_state(3, 4.0, &g).unwrap();
        for rho in [0.5 * gs.rho0, gs.rho0, 2.0 * gs.rho0] {
            let s = scale_soliton(&gs, 4.0, rho).unwrap();
            let prob = Problem::free(s.z.grid(), 4.0, rho).unwrap();
            let f = energy_f(&prob, &s.z).unwrap();
            assert!((f - s.m_rho).abs() < 5e-3 * s.m_rho);
            let lam = lagrange_multiplier(&prob, &s.z).unwrap();
            assert!((lam - s.lambda_rho).abs() < 5e-3 * s.lambda_rho);
            assert!((lam - (gs.rho0 / rho).powi(4)).abs() < 1e-2 * lam);
            let act = action_i(&prob, &s.z, s.lambda_rho).unwrap();
            let want = s.m_rho + 0.5 * s.lambda_rho * rho * rho;
            assert!((act - want).abs() < 5e-3 * want);
            let gr = grad_f(&prob, &s.z).unwrap();
            let diff: Vec<f64> = gr.values().iter().zip(s.z.values()).map(|(a, z)| a + s.lambda_rho * z).collect();
            assert!(prob.grid().norm_sq(&diff).sqrt() < 5e-3 * s.lambda_rho * rho);
            let e = energy_breakdown(&prob, &s.z).unwrap();
            assert!(pohozaev_residual(&prob, &s.z).unwrap().abs() < 1e-3 * e.a);
            let pairing = -prob.grid().dot(gr.values(), s.z.values()) / (rho * rho);
            assert!((pairing - lam).abs() < 1e-12 * lam.abs().max(1.0));
        }
    }

    #[test]
    fn dilation_limit_and_scaled_terms() {
        let g = make_grid(3, GridKind::Radial, 60.0, 4096).unwrap();
        let v = GridFunction::from_fn(&g, |r| if r <= 2.0 { 1.0 } else { 0.0 });
        let prob = Problem::new(4.0, 1.0, v).unwrap();
        let u = GridFunction::from_fn(&g, |r| (-r * r).exp());
        let wide = make_grid(3, GridKind::Radial, 300.0, 8192).unwrap();
        let vw = GridFunction::from_fn(&wide, |r| if r <= 2.0 { 1.0 } else { 0.0 });
        let pw = Problem::new(4.0, 1.0, vw).unwrap();
        let uw = u.resample(&wide, 1.0, 1.0);
        let fs: Vec<f64> = (0..=6)
            .map(|k| energy_f(&pw, &dilate(&uw, 0.5f64.powi(k)).unwrap()).unwrap().abs())
            .collect();
        assert!(fs[6] < 1e-3 && fs[6] < fs[5], "{fs:?}");
        // a scales by h², b by h^γ
        let e0 = energy_breakdown(&prob, &u).unwrap();
        for h in [0.25, 0.5, 2.0, 4.0] {
            let eh = energy_breakdown(&prob, &dilate(&u, h).unwrap()).unwrap();
            assert!((eh.a - h * h * e0.a).abs() < 1e-2 * h * h * e0.a);
            assert!((eh.b - h.powi(3) * e0.b).abs() < 1e-2 * h.powi(3) * e0.b);
        }
    }

    #[test]
    fn potential_checks() {
        let g = make_grid(3, GridKind::Radial, 10.0, 256).unwrap();
        assert!(Problem::new(4.0, 1.0, GridFunction::zeros(&g)).is_err());
        assert!(Problem::new(4.0, 1.0, GridFunction::from_fn(&g, |r| r - 1.0)).is_err());
        let v = Potential::Indicator { eta: 2.0, radius: 1.0 }.sample(&g).unwrap();
        let prob = Problem::new(4.0, 1.0, v).unwrap();
        for ((w, v), r) in prob.w.values().iter().zip(prob.v.values()).zip(g.nodes()) {
            assert_eq!(*w, v * r);
        }
    }
}
