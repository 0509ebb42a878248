use rayon::prelude::*;
use serde::Serialize;

use super::refine::newton;
use super::{
    check_finite, mass_escape, outer_fraction, project_tangent, retract, stationarity,
    Preconditioner, SolutionKind, SolutionReport, SolverConfig, SplittingReport, Status, TraceRow,
};
use crate::certify::Certificate;
use crate::constants::{tilde_thresholds, TildeThresholds};
use crate::error::{param, Error, Result};
use crate::functionals::Problem;
use crate::grid::{Grid, GridFunction};
use crate::limit_problem::{mu_rho, GroundStateData};

/// A discrete path on S_ρ between two fixed dilations of Z_ρ.
#[derive(Debug, Clone)]
pub struct Path {
    pub nodes: Vec<GridFunction>,
    pub h0: f64,
    pub h1: f64,
}

impl Path {
    pub fn energies(&self, prob: &Problem) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|u| prob.energy_slice(u.values()))
            .collect()
    }
}

/// (Z_ρ)_h = h^{N/2} Z_ρ(h·) on the problem grid, renormalized to ρ.
fn dilated_soliton(gs: &GroundStateData, prob: &Problem, mu: f64, h: f64) -> Result<Vec<f64>> {
    let amp = mu.powf(-2.0 / (prob.p - 2.0)) * h.powf(0.5 * prob.dim as f64);
    let mut z = gs.u.resample(prob.grid(), h / mu, amp).into_values();
    retract(prob.grid(), &mut z, prob.rho)?;
    Ok(z)
}

/// Dilation path h ↦ (Z_ρ)_h for h linear in [h₀, h₁]. h₀ halves from 1
/// until ‖∇‖₂ < R̃ and F < M̃ m_ρ; h₁ doubles from 1 until F < 0.
pub fn init_path(
    gs: &GroundStateData,
    prob: &Problem,
    tilde: &TildeThresholds,
    n_path: usize,
    cfg: &SolverConfig,
) -> Result<Path> {
    if n_path < 16 {
        return param(format!("n_path must be at least 16, got {n_path}"));
    }
    if gs.dim != prob.dim || (gs.q - prob.p).abs() > 1e-12 * prob.p {
        return param("ground state does not match the problem's N and p");
    }
    let g = prob.grid();
    let mu = mu_rho(gs, prob.rho)?;
    let threshold = tilde.tilde_m * tilde.m_rho;
    let mut h0 = 1.0;
    loop {
        h0 *= 0.5;
        if h0 < cfg.h_min {
            return Err(Error::SearchBounds(format!(
                "h0 fell below {} without meeting the energy and gradient thresholds",
                cfg.h_min
            )));
        }
        let z = dilated_soliton(gs, prob, mu, h0)?;
        if g.kinetic_form_slice(&z).sqrt() < tilde.tilde_r && prob.energy_slice(&z) < threshold {
            break;
        }
    }
    let mut h1 = 1.0;
    loop {
        h1 *= 2.0;
        if h1 > cfg.h_max {
            return Err(Error::SearchBounds(format!(
                "h1 exceeded {} before F turned negative",
                cfg.h_max
            )));
        }
        let z = dilated_soliton(gs, prob, mu, h1)?;
        if prob.energy_slice(&z) < 0.0 {
            break;
        }
    }
    let nodes = (0..n_path)
        .map(|k| {
            let h = h0 + (h1 - h0) * k as f64 / (n_path - 1) as f64;
            GridFunction::new(g, dilated_soliton(gs, prob, mu, h)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Path { nodes, h0, h1 })
}

fn argmax(e: &[f64]) -> usize {
    e.iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > e[b] { i } else { b })
}

/// Highest non-endpoint node, lower index on ties.
fn interior_argmax(e: &[f64]) -> usize {
    1 + argmax(&e[1..e.len() - 1])
}

/// Unit tangent at node k (central difference, projected to the sphere).
fn tangent(grid: &Grid, nodes: &[Vec<f64>], k: usize) -> Vec<f64> {
    let (a, b) = (&nodes[k - 1], &nodes[k + 1]);
    let mut t: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    project_tangent(grid, &nodes[k], &mut t);
    let n = grid.norm_sq(&t).sqrt();
    if n > 0.0 {
        t.iter_mut().for_each(|x| *x /= n);
    }
    t
}

/// Redistributes nodes uniformly in weighted-L² arclength.
fn reparametrize(grid: &Grid, nodes: &mut [Vec<f64>], rho: f64) -> Result<()> {
    let n = nodes.len();
    let mut s = vec![0.0; n];
    for k in 1..n {
        let d: Vec<f64> = nodes[k].iter().zip(&nodes[k - 1]).map(|(a, b)| a - b).collect();
        s[k] = s[k - 1] + grid.norm_sq(&d).sqrt();
    }
    let total = s[n - 1];
    if !(total > 0.0) {
        return Ok(());
    }
    let old = nodes.to_vec();
    let mut j = 0;
    for (k, node) in nodes.iter_mut().enumerate().take(n - 1).skip(1) {
        let target = total * k as f64 / (n - 1) as f64;
        while j + 1 < n - 1 && s[j + 1] < target {
            j += 1;
        }
        let span = s[j + 1] - s[j];
        let t = if span > 0.0 { (target - s[j]) / span } else { 0.0 };
        for (i, v) in node.iter_mut().enumerate() {
            *v = (1.0 - t) * old[j][i] + t * old[j + 1][i];
        }
        retract(grid, node, rho)?;
    }
    Ok(())
}

/// Peak of the parabola through the energies at k−1, k, k+1, returned as
/// the matching quadratic combination of the nodes.
fn parabolic_peak(grid: &Grid, nodes: &[Vec<f64>], e: &[f64], k: usize, rho: f64) -> Result<Vec<f64>> {
    if k == 0 || k + 1 >= nodes.len() {
        return Ok(nodes[k].clone());
    }
    let (em, e0, ep) = (e[k - 1], e[k], e[k + 1]);
    let curv = em - 2.0 * e0 + ep;
    let s = if curv < 0.0 {
        (0.5 * (em - ep) / curv).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let (cm, c0, cp) = (0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0));
    let mut u: Vec<f64> = (0..nodes[k].len())
        .map(|i| cm * nodes[k - 1][i] + c0 * nodes[k][i] + cp * nodes[k + 1][i])
        .collect();
    retract(grid, &mut u, rho)?;
    Ok(u)
}

#[derive(Debug, Clone, Serialize)]
pub struct MountainPassOutcome {
    pub report: SolutionReport,
    /// F at the refined saddle when converged, otherwise the last path max.
    pub level: f64,
    pub path_max: f64,
    pub h0: f64,
    pub h1: f64,
    pub sweeps: usize,
    pub splitting: SplittingReport,
}

/// String method on the dilation path: each sweep moves interior nodes one
/// preconditioned step against the component of the gradient normal to the
/// path, then re-equidistributes them in arclength. Once the normal gradient
/// at the highest node drops below the hand-off level, the peak of the path
/// goes to Newton.
pub fn solve_mountain_pass(
    prob: &Problem,
    gs: &GroundStateData,
    gate: Option<&Certificate>,
    cfg: &SolverConfig,
) -> Result<MountainPassOutcome> {
    cfg.validate()?;
    if let Some(c) = gate {
        if !c.pass && !cfg.force {
            return Err(Error::Certificate(format!("{} hypotheses fail", c.theorem)));
        }
    } else if !prob.is_free() && !cfg.force {
        return Err(Error::Certificate(
            "a certificate is required unless V ≡ 0".into(),
        ));
    }
    let g = prob.grid();
    let tilde = tilde_thresholds(prob.dim, prob.p, prob.rho, gs)?;
    let path = init_path(gs, prob, &tilde, cfg.n_path, cfg)?;
    let (h0, h1) = (path.h0, path.h1);
    let mut nodes: Vec<Vec<f64>> = path.nodes.iter().map(|u| u.values().to_vec()).collect();
    let n = nodes.len();
    let lam = stationarity(prob, &nodes[argmax(&path.energies(prob))]).lambda;
    let pre = Preconditioner::new(g, lam.abs().max(1e-2))?;
    let outer_r = 0.5 * g.rmax();
    let radii = [0.25 * g.rmax(), outer_r];

    let mut tau = cfg.path_step;
    let mut energies: Vec<f64> = nodes.iter().map(|u| prob.energy_slice(u)).collect();
    let mut trace = Vec::new();
    let mut history: Vec<GridFunction> = Vec::new();
    let mut newton_gate = f64::INFINITY;
    let mut newton_iters = 0;
    let mut solved: Option<Vec<f64>> = None;
    let mut split = false;
    let mut best = f64::INFINITY;
    let mut sweeps = 0;
    let mut k = interior_argmax(&energies);
    while sweeps < cfg.max_sweeps {
        k = interior_argmax(&energies);
        let pmax = check_finite("path max", energies[k])?;
        let sqrt_a = g.kinetic_form_slice(&nodes[k]).sqrt();
        let pg = stationarity(prob, &nodes[k]).proj_norm;
        trace.push(TraceRow {
            iteration: sweeps,
            energy: pmax,
            proj_grad: pg,
            outer_frac: outer_fraction(g, &nodes[k], outer_r),
        });
        if sweeps % 25 == 0 {
            history.push(GridFunction::new(g, nodes[k].clone())?);
            if history.len() >= 4 {
                let tail = &history[history.len() - 4..];
                if mass_escape(tail, &radii, cfg.split_frac)?.flag {
                    split = true;
                    break;
                }
            }
        }
        if pg <= cfg.handoff * sqrt_a && pg < newton_gate {
            let out = newton(prob, &nodes[k], cfg)?;
            newton_iters += out.iterations;
            if out.converged && out.negative_part <= 1e-3 {
                solved = Some(out.u);
                break;
            }
            newton_gate = 0.1 * pg;
        }
        if pg > 4.0 * best {
            tau *= 0.5;
            best = pg;
        } else {
            best = best.min(pg);
        }

        let old = nodes.clone();
        let moved: Vec<Vec<f64>> = (1..n - 1)
            .into_par_iter()
            .map(|j| {
                let u = &old[j];
                let st = stationarity(prob, u);
                let mut d = pre.tangent_direction(g, u, &st.grad);
                let t = tangent(g, &old, j);
                let pt = pre.forward(g, &t);
                let mut c = g.dot(&d, &pt) / g.dot(&t, &pt);
                if j == k {
                    c *= 2.0;
                }
                d.iter_mut().zip(&t).for_each(|(a, b)| *a -= c * b);
                let mut v: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - tau * b).collect();
                retract(g, &mut v, prob.rho).map(|_| v)
            })
            .collect::<Result<_>>()?;
        for (j, v) in moved.into_iter().enumerate() {
            nodes[j + 1] = v;
        }
        reparametrize(g, &mut nodes[..=k], prob.rho)?;
        reparametrize(g, &mut nodes[k..], prob.rho)?;
        energies = nodes.iter().map(|u| prob.energy_slice(u)).collect();
        sweeps += 1;
    }

    let path_max = energies[interior_argmax(&energies)];
    let (u, mut status) = match solved {
        Some(u) => (u, Status::Converged),
        None if split => (nodes[k].clone(), Status::SplittingSuspected),
        None => (
            parabolic_peak(g, &nodes, &energies, k, prob.rho)?,
            Status::MaxIter,
        ),
    };
    history.push(GridFunction::new(g, u.clone())?);
    let splitting = if history.len() >= 2 {
        mass_escape(&history, &radii, cfg.split_frac)?
    } else {
        let pair = [history[0].clone(), history[0].clone()];
        mass_escape(&pair, &radii, cfg.split_frac)?
    };
    if splitting.flag || split {
        status = Status::SplittingSuspected;
    }
    let mut report = SolutionReport::assemble(
        prob,
        GridFunction::new(g, u)?,
        SolutionKind::MountainPass,
        status,
        cfg,
    );
    if report.converged() && report.proj_grad > report.tol_crit {
        report.status = Status::MaxIter;
    }
    report.iterations = sweeps;
    report.newton_iterations = newton_iters;
    report.trace = trace;
    let level = if report.converged() {
        report.energy()
    } else {
        path_max
    };
    Ok(MountainPassOutcome {
        report,
        level,
        path_max,
        h0,
        h1,
        sweeps,
        splitting,
    })
}
