//! Limit problem −ΔU + U = U^{q−1}: the positive radial ground state, its
//! mass-normalized family Z_ρ and the scaling identities.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::grid::{make_grid, Grid, GridFunction, GridKind, Stencil};

/// Sobolev critical exponent 2N/(N−2), infinite for N ≤ 2.
pub fn critical_exponent(dim: usize) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    }
}

/// γ_q = N(q−2)/2.
pub fn gamma_of(dim: usize, q: f64) -> f64 {
    dim as f64 * (q - 2.0) / 2.0
}

pub fn check_subcritical(dim: usize, q: f64) -> Result<()> {
    if !(q > 2.0 && q < critical_exponent(dim)) {
        return param(format!(
            "exponent q = {q} outside (2, {}) for N = {dim}",
            critical_exponent(dim)
        ));
    }
    Ok(())
}

/// Requires 2 + 4/N < p < 2*.
pub fn check_supercritical(dim: usize, p: f64) -> Result<()> {
    check_subcritical(dim, p)?;
    let bound = 2.0 + 4.0 / dim as f64;
    if p <= bound {
        return Err(Error::Supercriticality { dim, p, bound });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GroundStateData {
    pub dim: usize,
    pub q: f64,
    pub u: GridFunction,
    pub rho0: f64,
    pub m_rho0: f64,
    pub gn_constant: f64,
    /// GN quotient evaluated on the grid profile.
    pub gn_ratio: f64,
    pub residual: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateSummary {
    #[serde(rename = "N")]
    pub dim: usize,
    pub q: f64,
    pub u0: f64,
    pub rho0: f64,
    pub m_rho0: f64,
    #[serde(rename = "G_q")]
    pub gn_constant: f64,
    pub gn_ratio: f64,
    pub residual: f64,
    pub newton_iterations: usize,
}

impl GroundStateData {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            dim: self.dim,
            q: self.q,
            u0: self.u.eval(0.0),
            rho0: self.rho0,
            m_rho0: self.m_rho0,
            gn_constant: self.gn_constant,
            gn_ratio: self.gn_ratio,
            residual: self.residual,
            newton_iterations: self.newton_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroundStateOptions {
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 60,
        }
    }
}

/// Default grid for the ground state: wide enough that U ~ e^{−r} is below
/// 1e−10 at the boundary.
pub fn default_ground_state_grid(dim: usize) -> Result<Arc<Grid>> {
    if dim == 1 {
        make_grid(1, GridKind::Line, 24.0, 4096)
    } else {
        make_grid(dim, GridKind::Radial, 24.0, 4096)
    }
}

pub fn solve_ground_state(dim: usize, q: f64, grid: &Arc<Grid>) -> Result<GroundStateData> {
    solve_ground_state_with(dim, q, grid, GroundStateOptions::default())
}

pub fn solve_ground_state_with(
    dim: usize,
    q: f64,
    grid: &Arc<Grid>,
    opts: GroundStateOptions,
) -> Result<GroundStateData> {
    check_subcritical(dim, q)?;
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!(
            "grid has N = {}, asked for N = {dim}",
            grid.dim()
        )));
    }
    // even problems on the line are solved on the mirrored half line
    let half = match grid.kind() {
        GridKind::Line => {
            if !grid.len().is_multiple_of(2) {
                return param("line grids for the ground state need an even node count");
            }
            Arc::new(Grid::new(1, GridKind::Radial, grid.rmax(), grid.len() / 2, grid.stencil())?)
        }
        GridKind::Radial => Arc::clone(grid),
    };
    let seed = if dim == 1 {
        let c = q / 2.0;
        let k = (q - 2.0) / 2.0;
        half.nodes()
            .iter()
            .map(|&x| (c / (k * x).cosh().powi(2)).powf(1.0 / (q - 2.0)))
            .collect()
    } else {
        shooting_seed(dim, q, &half)?
    };
    let (vals, iters) = newton_bvp(&half, q, seed, opts)?;
    let values = match grid.kind() {
        GridKind::Line => {
            let m = vals.len();
            (0..2 * m)
                .map(|i| if i < m { vals[m - 1 - i] } else { vals[i - m] })
                .collect()
        }
        GridKind::Radial => vals,
    };
    let u = GridFunction::new(grid, values)?;
    let residual = equation_residual(grid, u.values(), q);
    if !(residual <= opts.tol) {
        return Err(Error::Residual {
            residual,
            tol: opts.tol,
            iterations: iters,
        });
    }
    let a = grid.kinetic_form_slice(u.values());
    let b = grid.norm_sq(u.values());
    let c: f64 = grid
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs().powf(q))
        .sum();
    let rho0 = b.sqrt();
    let m_rho0 = 0.5 * a - c / q;
    let gamma = gamma_of(dim, q);
    // F_∞(U) = c(γ−2)/(2q) is only positive in the mass-supercritical range
    if gamma > 2.0 && !(m_rho0 > 0.0) {
        return Err(Error::Shooting(format!("ground state energy {m_rho0} not positive")));
    }
    let gn_ratio = gn_quotient(a, b, c, dim, q);
    let gn_constant = if gamma > 2.0 {
        gn_closed_form(dim, q, m_rho0)
    } else {
        gn_ratio
    };
    Ok(GroundStateData {
        dim,
        q,
        u,
        rho0,
        m_rho0,
        gn_constant,
        gn_ratio,
        residual,
        newton_iterations: iters,
    })
}

/// Closed form of the sharp GN constant in terms of the ground state energy,
/// from the Nehari and Pohozaev identities: with c = ∫U^q = 2q m/(γ−2),
/// G^q = q^{q/2} c^{1−q/2} / ((q−γ)^{(q−γ)/2} γ^{γ/2}).
pub fn gn_closed_form(dim: usize, q: f64, m_rho0: f64) -> f64 {
    let g = gamma_of(dim, q);
    let c = 2.0 * q * m_rho0 / (g - 2.0);
    let log_gq = 0.5 * q * q.ln() + (1.0 - 0.5 * q) * c.ln()
        - 0.5 * (q - g) * (q - g).ln()
        - 0.5 * g * g.ln();
    (log_gq / q).exp()
}

/// ‖u‖_q / (‖u‖₂^{1−γ/q} ‖∇u‖₂^{γ/q}) from a = ‖∇u‖², b = ‖u‖², c = ∫|u|^q.
pub fn gn_quotient(a: f64, b: f64, c: f64, dim: usize, q: f64) -> f64 {
    let g = gamma_of(dim, q);
    c.powf(1.0 / q) / (b.powf(0.5 * (1.0 - g / q)) * a.powf(0.5 * g / q))
}

/// GN quotient of a grid function, using the discrete kinetic form.
pub fn gn_ratio(grid: &Grid, u: &GridFunction, q: f64) -> Result<f64> {
    u.check_grid(grid)?;
    let a = grid.kinetic_form_slice(u.values());
    let b = grid.norm_sq(u.values());
    let c: f64 = grid
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs().powf(q))
        .sum();
    if !(a > 0.0 && b > 0.0) {
        return param("GN quotient of a zero or constant function");
    }
    Ok(gn_quotient(a, b, c, grid.dim(), q))
}

/// ‖−ΔU + U − |U|^{q−2}U‖₂ on the grid.
pub fn equation_residual(grid: &Grid, u: &[f64], q: f64) -> f64 {
    let lap = grid.laplacian_slice(u);
    let r: Vec<f64> = lap
        .iter()
        .zip(u)
        .map(|(l, v)| -l + v - v.abs().powf(q - 2.0) * v)
        .collect();
    grid.norm_sq(&r).sqrt()
}

fn newton_bvp(
    grid: &Grid,
    q: f64,
    mut u: Vec<f64>,
    opts: GroundStateOptions,
) -> Result<(Vec<f64>, usize)> {
    let neg_lap = grid.neg_laplacian_band();
    let residual_vec = |u: &[f64]| -> Vec<f64> {
        let lap = grid.laplacian_slice(u);
        lap.iter()
            .zip(u)
            .map(|(l, v)| -l + v - v.abs().powf(q - 2.0) * v)
            .collect()
    };
    let mut res = residual_vec(&u);
    let mut norm = grid.norm_sq(&res).sqrt();
    let mut iters = 0;
    while iters < opts.max_newton {
        if norm <= opts.tol * 1e-4 {
            break;
        }
        iters += 1;
        let mut jac = neg_lap.clone();
        let diag: Vec<f64> = u
            .iter()
            .map(|v| 1.0 - (q - 1.0) * v.abs().powf(q - 2.0))
            .collect();
        jac.add_diagonal(&diag);
        let lu = jac.factorize()?;
        let step = lu.solve(&res);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let r = residual_vec(&trial);
            let n = grid.norm_sq(&r).sqrt();
            if n.is_finite() && n < norm {
                u = trial;
                res = r;
                norm = n;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ground state Newton iterate".into()));
    }
    Ok((u, iters))
}

#[derive(Debug, PartialEq)]
enum Shot {
    Low,
    High,
    Undecided,
}

fn shoot(dim: usize, q: f64, a: f64, dr: f64, r_end: f64, mut record: Option<&mut Vec<f64>>) -> Shot {
    let nd = dim as f64;
    let rhs = |r: f64, u: f64, v: f64| -> (f64, f64) {
        (v, -(nd - 1.0) / r * v + u - u.abs().powf(q - 2.0) * u)
    };
    let r0 = dr;
    let k = (a - a.powf(q - 1.0)) / nd;
    let mut u = a + 0.5 * k * r0 * r0;
    let mut v = k * r0;
    let mut r = r0;
    if let Some(rec) = record.as_deref_mut() {
        rec.push(a);
        rec.push(u);
    }
    while r < r_end {
        let (k1u, k1v) = rhs(r, u, v);
        let (k2u, k2v) = rhs(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
        let (k3u, k3v) = rhs(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
        let (k4u, k4v) = rhs(r + dr, u + dr * k3u, v + dr * k3v);
        u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += dr;
        if u < 0.0 {
            return Shot::High;
        }
        if v > 0.0 {
            return Shot::Low;
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(u);
        }
    }
    if u > 0.5 * a {
        Shot::Low
    } else {
        Shot::Undecided
    }
}

/// Radial profile by shooting on U(0), sampled onto the grid with an
/// exponential tail past the point where the trajectory departs.
fn shooting_seed(dim: usize, q: f64, grid: &Grid) -> Result<Vec<f64>> {
    let dr = 1e-3;
    let r_end = 40.0;
    let mut lo = 1.0;
    let mut hi = 10.0 * (q / 2.0).powf(1.0 / (q - 2.0));
    if shoot(dim, q, hi, dr, r_end, None) != Shot::High {
        return Err(Error::Shooting(format!(
            "upper bracket U(0) = {hi} does not overshoot"
        )));
    }
    if shoot(dim, q, lo, dr, r_end, None) == Shot::High {
        return Err(Error::Shooting("lower bracket U(0) = 1 overshoots".into()));
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        match shoot(dim, q, mid, dr, r_end, None) {
            Shot::High => hi = mid,
            Shot::Low => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let a = 0.5 * (lo + hi);
    let mut traj = Vec::new();
    shoot(dim, q, a, dr, r_end, Some(&mut traj));
    // traj[0] is U(0), traj[k] is U(k·dr) for k ≥ 1
    let cut = traj
        .iter()
        .position(|&v| v < 1e-6 * a)
        .unwrap_or(traj.len())
        .saturating_sub(50)
        .max(2);
    let r_c = (cut - 1) as f64 * dr;
    let u_c = traj[cut - 1];
    Ok(grid
        .nodes()
        .iter()
        .map(|&r| {
            if r < r_c {
                let s = r / dr;
                let k = s.floor() as usize;
                let t = s - k as f64;
                (1.0 - t) * traj[k] + t * traj[k + 1]
            } else {
                u_c * (r_c / r).powf(0.5 * (dim as f64 - 1.0)) * (-(r - r_c)).exp()
            }
        })
        .collect())
}

/// Z_ρ with its scaling data.
#[derive(Debug, Clone)]
pub struct ScaledSoliton {
    pub rho: f64,
    pub mu_rho: f64,
    pub lambda_rho: f64,
    pub z: GridFunction,
    pub m_rho: f64,
}

/// μ_ρ = (ρ/ρ₀)^{2(p−2)/(N(p−2)−4)}.
pub fn mu_rho(gs: &GroundStateData, rho: f64) -> Result<f64> {
    check_supercritical(gs.dim, gs.q)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return param(format!("mass ρ must be positive, got {rho}"));
    }
    let nd = gs.dim as f64;
    let p = gs.q;
    Ok((rho / gs.rho0).powf(2.0 * (p - 2.0) / (nd * (p - 2.0) - 4.0)))
}

fn check_exponent(gs: &GroundStateData, p: f64) -> Result<()> {
    if (p - gs.q).abs() > 1e-12 * p {
        return param(format!(
            "ground state was computed for q = {}, asked for p = {p}",
            gs.q
        ));
    }
    check_supercritical(gs.dim, p)
}

/// m_ρ = m_{ρ₀} (ρ₀/ρ)^{(4N−2p(N−2))/(N(p−2)−4)}.
pub fn m_rho(gs: &GroundStateData, p: f64, rho: f64) -> Result<f64> {
    check_exponent(gs, p)?;
    if !(rho > 0.0) {
        return param(format!("mass ρ must be positive, got {rho}"));
    }
    let nd = gs.dim as f64;
    let e = (4.0 * nd - 2.0 * p * (nd - 2.0)) / (nd * (p - 2.0) - 4.0);
    Ok(gs.m_rho0 * (gs.rho0 / rho).powf(e))
}

/// Z_ρ on the ground-state grid stretched by μ_ρ, where the scaling is exact
/// node by node.
pub fn scale_soliton(gs: &GroundStateData, p: f64, rho: f64) -> Result<ScaledSoliton> {
    check_exponent(gs, p)?;
    let mu = mu_rho(gs, rho)?;
    let grid = gs.grid().scaled(mu)?;
    let amp = mu.powf(-2.0 / (p - 2.0));
    let z = GridFunction::new(&grid, gs.u.values().iter().map(|v| amp * v).collect())?;
    Ok(ScaledSoliton {
        rho,
        mu_rho: mu,
        lambda_rho: mu.powi(-2),
        z,
        m_rho: m_rho(gs, p, rho)?,
    })
}

/// Z_ρ resampled by cubic interpolation onto an arbitrary grid.
pub fn scale_soliton_on(
    gs: &GroundStateData,
    p: f64,
    rho: f64,
    grid: &Arc<Grid>,
) -> Result<ScaledSoliton> {
    let mut s = scale_soliton(gs, p, rho)?;
    if grid.dim() != gs.dim {
        return Err(Error::GridMismatch("target grid has a different N".into()));
    }
    s.z = s.z.resample(grid, 1.0, 1.0);
    Ok(s)
}

/// u_h(x) = h^{N/2} u(hx), resampled on the grid of `u`.
pub fn dilate(u: &GridFunction, h: f64) -> Result<GridFunction> {
    if !(h > 0.0 && h.is_finite()) {
        return param(format!("dilation factor must be positive, got {h}"));
    }
    if h == 1.0 {
        return Ok(u.clone());
    }
    let grid = u.grid();
    if h < 1.0 {
        let peak = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = u.eval(h * grid.rmax() * 0.999).abs();
        if edge > 1e-6 * peak {
            log::warn!("dilation by {h} pushes mass past rmax = {}", grid.rmax());
        }
    }
    Ok(u.resample(grid, h, h.powf(0.5 * grid.dim() as f64)))
}

/// Sharp GN constant for exponent q. q = 2 gives 1 and, for N ≥ 3, q = 2*
/// gives S^{−1/2}.
pub fn gn_constant(dim: usize, q: f64) -> Result<f64> {
    if q == 2.0 {
        return Ok(1.0);
    }
    if dim >= 3 && q == critical_exponent(dim) {
        return Ok(crate::constants::sobolev_constant(dim)?.powf(-0.5));
    }
    check_subcritical(dim, q)?;
    let grid = default_ground_state_grid(dim)?;
    Ok(solve_ground_state(dim, q, &grid)?.gn_constant)
}

/// Same as [`solve_ground_state`] on a grid with the given stencil; used to
/// compare the two discretizations.
pub fn solve_ground_state_stencil(
    dim: usize,
    q: f64,
    kind: GridKind,
    rmax: f64,
    n: usize,
    stencil: Stencil,
) -> Result<GroundStateData> {
    let grid = Arc::new(Grid::new(dim, kind, rmax, n, stencil)?);
    solve_ground_state(dim, q, &grid)
}
