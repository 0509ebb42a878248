use super::{retract, stationarity, SolutionKind, SolutionReport, SolverConfig, Status};
use crate::error::{Error, Result};
use crate::functionals::Problem;
use crate::grid::GridFunction;

/// Largest Newton step, as a fraction of ρ.
const TRUST: f64 = 0.1;

pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub negative_part: f64,
}

fn merit(prob: &Problem, u: &[f64], lambda: f64) -> (Vec<f64>, f64, f64) {
    let g = prob.grid();
    let mut r = prob.grad_slice(u);
    r.iter_mut().zip(u).for_each(|(a, b)| *a += lambda * b);
    let c = 0.5 * (g.norm_sq(u) - prob.rho * prob.rho);
    let m = g.norm_sq(&r).sqrt() + c.abs() / prob.rho;
    (r, c, m)
}

/// Newton on the bordered system
/// [−Δ − V − (p−1)|u|^{p−2} + λ, u; (wu)ᵀ, 0] (δu, δλ) = −(R, c).
pub(crate) fn newton(prob: &Problem, u0: &[f64], cfg: &SolverConfig) -> Result<NewtonOutcome> {
    let g = prob.grid();
    let p = prob.p;
    let mut u = u0.to_vec();
    retract(g, &mut u, prob.rho)?;
    let mut lambda = stationarity(prob, &u).lambda;
    let mut folded = false;
    let mut negative_part = 0.0;
    let base = g.neg_laplacian_band();
    let mut iterations = 0;
    let mut stalled = 0;
    for it in 0..=cfg.max_newton {
        iterations = it;
        let (r, c, m0) = merit(prob, &u, lambda);
        if !m0.is_finite() {
            return Err(Error::NonFinite(format!("Newton residual at step {it}")));
        }
        let tol = cfg.tol_crit * g.kinetic_form_slice(&u).sqrt();
        let rnorm = g.norm_sq(&r).sqrt();
        if !folded && rnorm < 1e3 * tol.max(1e-300) {
            negative_part = (g.norm_sq(&u.iter().map(|x| x.min(0.0)).collect::<Vec<_>>()).sqrt()
                / prob.rho)
                .max(negative_part);
            u.iter_mut().for_each(|x| *x = x.abs());
            folded = true;
            continue;
        }
        if folded && rnorm <= tol && c.abs() <= cfg.tol_mass * prob.rho * prob.rho {
            return Ok(NewtonOutcome {
                u,
                converged: true,
                iterations: it,
                negative_part,
            });
        }
        if it == cfg.max_newton {
            break;
        }
        let mut k = base.clone();
        let diag: Vec<f64> = u
            .iter()
            .zip(prob.v.values())
            .map(|(x, v)| lambda - v - (p - 1.0) * x.abs().powf(p - 2.0))
            .collect();
        k.add_diagonal(&diag);
        let lu = match k.factorize() {
            Ok(lu) => lu,
            Err(_) => break,
        };
        let y1 = lu.solve(&r.iter().map(|x| -x).collect::<Vec<_>>());
        let y2 = lu.solve(&u);
        let den = g.dot(&u, &y2);
        if !(den.abs() > 0.0) {
            break;
        }
        let dl = (g.dot(&u, &y1) + c) / den;
        let du: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - dl * b).collect();
        // Soft modes (near-translations on the line) give huge steps; cap them.
        let mut step = (TRUST * prob.rho / g.norm_sq(&du).sqrt()).min(1.0);
        let mut accepted = false;
        while step > 1e-8 {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + step * b).collect();
            let (_, _, m1) = merit(prob, &trial, lambda + step * dl);
            if m1.is_finite() && m1 < (1.0 - 1e-4 * step) * m0 {
                u = trial;
                lambda += step * dl;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // Tiny accepted steps mean the linear model is only valid in a sliver.
        stalled = if step < 1e-3 { stalled + 1 } else { 0 };
        if !accepted || stalled >= 3 {
            break;
        }
    }
    Ok(NewtonOutcome {
        u,
        converged: false,
        iterations,
        negative_part,
    })
}

/// Drives a near-critical u0 to a constrained critical point by Newton,
/// folding to |u| once the residual is small. The kind is read off the
/// sign of F at exit.
pub fn refine_critical_point(
    prob: &Problem,
    u0: &GridFunction,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    cfg.validate()?;
    u0.check_grid(prob.grid())?;
    let out = newton(prob, u0.values(), cfg)?;
    if out.negative_part > 1e-3 {
        return Err(Error::Divergence(format!(
            "negative part carries {:.3e} of the mass",
            out.negative_part
        )));
    }
    let status = if out.converged {
        Status::Converged
    } else {
        Status::MaxIter
    };
    let f = prob.energy_slice(&out.u);
    let kind = if f < 0.0 {
        SolutionKind::LocalMin
    } else {
        SolutionKind::MountainPass
    };
    let mut rep = SolutionReport::assemble(prob, u0.with_values(out.u)?, kind, status, cfg);
    rep.negative_part = out.negative_part;
    rep.newton_iterations = out.iterations;
    rep.iterations = out.iterations;
    Ok(rep)
}
