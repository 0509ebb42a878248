use super::refine::newton;
use super::{
    check_finite, outer_fraction, retract, stationarity, Preconditioner, SolutionKind,
    SolutionReport, SolverConfig, Status, TraceRow,
};
use crate::certify::{check_tmin_min, neg_spectrum_witness};
use crate::constants::MpGeometry;
use crate::error::{Error, Result};
use crate::functionals::Problem;
use crate::grid::GridFunction;

const ARMIJO: f64 = 1e-4;

/// Minimizes F over S_ρ ∩ {‖∇u‖₂ ≤ R*} by preconditioned projected gradient
/// descent with Armijo backtracking, finishing with Newton once the
/// projected gradient falls below the hand-off level.
pub fn solve_local_min(
    prob: &Problem,
    geo: &MpGeometry,
    seed: Option<GridFunction>,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    cfg.validate()?;
    if prob.is_free() {
        return Err(Error::Certificate(
            "V ≡ 0 has no negative-energy local minimizer".into(),
        ));
    }
    let cert = check_tmin_min(prob, geo.r, geo)?;
    if !cert.pass && !cfg.force {
        let failed: Vec<_> = cert
            .entries
            .iter()
            .filter(|e| !e.pass)
            .map(|e| e.name.clone())
            .collect();
        return Err(Error::Certificate(format!(
            "local-minimizer hypotheses fail: {}",
            failed.join(", ")
        )));
    }
    let seed = match seed {
        Some(s) => s,
        None => {
            neg_spectrum_witness(prob)
                .ok_or_else(|| Error::Certificate("no negative-spectrum witness".into()))?
                .phi
        }
    };
    seed.check_grid(prob.grid())?;
    let g = prob.grid();
    let outer_r = 0.5 * g.rmax();
    let mut u: Vec<f64> = seed.values().iter().map(|x| x.abs()).collect();
    retract(g, &mut u, prob.rho)?;

    let lam0 = stationarity(prob, &u).lambda;
    let pre = Preconditioner::new(g, lam0.abs().max(1e-2))?;
    let mut f = check_finite("F", prob.energy_slice(&u))?;
    let mut trace = Vec::new();
    let mut tau: f64 = 1.0;
    let mut newton_gate = f64::INFINITY;
    let mut newton_iters = 0;
    let mut status = Status::MaxIter;
    let mut iterations = cfg.max_iter;

    for it in 0..cfg.max_iter {
        let st = stationarity(prob, &u);
        let sqrt_a = g.kinetic_form_slice(&u).sqrt();
        trace.push(TraceRow {
            iteration: it,
            energy: f,
            proj_grad: st.proj_norm,
            outer_frac: outer_fraction(g, &u, outer_r),
        });
        if sqrt_a > geo.r_star {
            status = Status::EscapedBall;
            iterations = it;
            break;
        }
        if st.proj_norm <= cfg.tol_crit * sqrt_a && f < 0.0 {
            status = Status::Converged;
            iterations = it;
            break;
        }
        if st.proj_norm <= cfg.handoff * sqrt_a && st.proj_norm < newton_gate {
            let out = newton(prob, &u, cfg)?;
            newton_iters += out.iterations;
            let fn_ = prob.energy_slice(&out.u);
            let inside = g.kinetic_form_slice(&out.u).sqrt() <= geo.r_star;
            if out.converged && inside && fn_ <= f + 1e-10 * f.abs() {
                u = out.u;
                f = fn_;
                let st = stationarity(prob, &u);
                trace.push(TraceRow {
                    iteration: it + 1,
                    energy: f,
                    proj_grad: st.proj_norm,
                    outer_frac: outer_fraction(g, &u, outer_r),
                });
                status = Status::Converged;
                iterations = it + 1;
                break;
            }
            newton_gate = 0.1 * st.proj_norm;
        }

        let d = pre.tangent_direction(g, &u, &st.grad);
        let slope = g.dot(&st.grad, &d);
        let mut step = (2.0 * tau).min(1e3);
        let mut accepted = false;
        while step > 1e-14 {
            let mut trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - step * b).collect();
            retract(g, &mut trial, prob.rho)?;
            let ft = prob.energy_slice(&trial);
            if ft.is_finite() && ft <= f - ARMIJO * step * slope {
                u = trial;
                f = ft;
                tau = step;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Line search stalled at round-off; let Newton have the last word.
            let out = newton(prob, &u, cfg)?;
            newton_iters += out.iterations;
            if out.converged && prob.energy_slice(&out.u) <= f + 1e-10 * f.abs() {
                u = out.u;
                status = Status::Converged;
            }
            iterations = it + 1;
            break;
        }
    }
    let mut rep = SolutionReport::assemble(
        prob,
        seed.with_values(u)?,
        SolutionKind::LocalMin,
        status,
        cfg,
    );
    if rep.converged() && !(rep.proj_grad <= rep.tol_crit && rep.energy() < 0.0) {
        rep.status = Status::MaxIter;
    }
    rep.iterations = iterations;
    rep.newton_iterations = newton_iters;
    rep.trace = trace;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::potential_norms;
    use crate::constants::mp_geometry;
    use crate::functionals::Potential;
    use crate::grid::{make_grid, GridKind};
    use crate::limit_problem::{default_ground_state_grid, solve_ground_state, GroundStateData};

    fn setup(scale: f64) -> (Problem, MpGeometry, GroundStateData) {
        let gs = solve_ground_state(3, 4.0, &default_ground_state_grid(3).unwrap()).unwrap();
        let g = make_grid(3, GridKind::Radial, 40.0, 1024).unwrap();
        let v = Potential::Indicator {
            eta: 1.0,
            radius: 2.0,
        }
        .scaled(scale)
        .unwrap()
        .sample(&g)
        .unwrap();
        let prob = Problem::new(4.0, 1.0, v).unwrap();
        let (nv, _) = potential_norms(&prob, 2.0, 2.0).unwrap();
        let geo = mp_geometry(3, 4.0, 2.0, nv, &gs).unwrap();
        let prob = prob.with_rho(0.5 * geo.rho_star).unwrap();
        (prob, geo, gs)
    }

    #[test]
    fn ball_well_minimizer() {
        let (prob, geo, _) = setup(1.0);
        let rep = solve_local_min(&prob, &geo, None, &SolverConfig::default()).unwrap();
        assert!(rep.converged(), "{:?}", rep.status);
        assert!(rep.energy() < 0.0);
        assert!(rep.lambda > 0.0);
        assert!(rep.grad_norm < geo.r_star);
        assert!(rep.pohozaev.abs() <= 1e-3 * rep.breakdown.a);
        for w in rep.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
    }

    #[test]
    fn refuses_without_witness() {
        let (prob, geo, _) = setup(1e-8);
        match solve_local_min(&prob, &geo, None, &SolverConfig::default()) {
            Err(Error::Certificate(_)) => {}
            other => panic!("expected a certificate error, got {other:?}"),
        }
    }
}
