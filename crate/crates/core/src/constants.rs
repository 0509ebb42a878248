//! Closed-form structural constants, the Sobolev constant, the elementary
//! lemma pair (z*, t*) and the mountain-pass geometry.

use serde::Serialize;

use crate::error::{param, Result};
use crate::grid::{make_grid, GridFunction, GridKind};
use crate::limit_problem::{check_supercritical, critical_exponent, gamma_of, GroundStateData};

#[derive(Debug, Clone, Serialize)]
pub struct StructuralConstants {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: f64,
    pub gamma: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub s_exp: f64,
    pub theta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    #[serde(rename = "S")]
    pub sobolev: Option<f64>,
}

pub fn structural_constants(
    dim: usize,
    p: f64,
    delta: f64,
    gs: &GroundStateData,
) -> Result<StructuralConstants> {
    check_supercritical(dim, p)?;
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("δ must lie in (0,1), got {delta}"));
    }
    if gs.dim != dim || (gs.q - p).abs() > 1e-12 * p {
        return param("ground state does not match (N, p)");
    }
    let nd = dim as f64;
    let gamma = gamma_of(dim, p);
    let a = 2.0 * nd - (nd - 2.0) * p;
    let b = nd * (p - 2.0) - 4.0;
    let d = nd * (p - 2.0).powi(2);
    let theta = a / b;
    let s_exp = 2.0 * theta;
    let g = gs.gn_constant;
    let m = (delta / gamma).powf(gamma / (gamma - 2.0))
        * (gamma / 2.0 - 1.0)
        * (p / g.powf(p)).powf(2.0 / (gamma - 2.0))
        / (gs.m_rho0 * gs.rho0.powf(s_exp));
    Ok(StructuralConstants {
        dim,
        p,
        gamma,
        a,
        b,
        d,
        s_exp,
        theta,
        m,
        delta,
        sobolev: if dim >= 3 {
            Some(sobolev_constant(dim)?)
        } else {
            None
        },
    })
}

/// Best constant S in S‖u‖²_{2*} ≤ ‖∇u‖²₂.
pub fn sobolev_constant(dim: usize) -> Result<f64> {
    if dim < 3 {
        return param(format!("Sobolev constant needs N ≥ 3, got {dim}"));
    }
    use statrs::function::gamma::ln_gamma;
    let nd = dim as f64;
    let ratio = (ln_gamma(nd / 2.0) - ln_gamma(nd)).exp();
    Ok(std::f64::consts::PI * nd * (nd - 2.0) * ratio.powf(2.0 / nd))
}

/// Rayleigh quotient ‖∇u‖²/‖u‖²_{2*} of (1+r²)^{−(N−2)/2} on a radial grid.
pub fn sobolev_rayleigh(dim: usize, rmax: f64, n: usize) -> Result<f64> {
    if dim < 3 {
        return param(format!("Sobolev constant needs N ≥ 3, got {dim}"));
    }
    let g = make_grid(dim, GridKind::Radial, rmax, n)?;
    let e = 0.5 * (dim as f64 - 2.0);
    let u = GridFunction::from_fn(&g, |r| (1.0 + r * r).powf(-e));
    let num = g.grad_norm_sq_slice(u.values());
    let den = crate::grid::lp_norm(&g, &u, critical_exponent(dim))?;
    Ok(num / (den * den))
}

/// f_z(t) = t − A z^s t^{1−α} − B z t^{1+β}.
pub fn elem_f(a: f64, b: f64, s: f64, alpha: f64, beta: f64, z: f64, t: f64) -> f64 {
    t - a * z.powf(s) * t.powf(1.0 - alpha) - b * z * t.powf(1.0 + beta)
}

/// The tangency point where f_{z*} touches zero at t*: f = f' = 0.
pub fn elem_lemma_star(a: f64, b: f64, s: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0 && s > 0.0 && beta > 0.0 && alpha > 0.0 && alpha <= 1.0) {
        return param(format!(
            "elementary lemma needs A, B, s, β > 0 and α ∈ (0,1]; got A={a} B={b} s={s} α={alpha} β={beta}"
        ));
    }
    let ab = alpha + beta;
    let ln_base = (beta * b / (alpha * a)).ln() + ab / beta * (alpha / (ab * b)).ln();
    let z = (ln_base * beta / (alpha + s * beta)).exp();
    let t = (alpha / (ab * b * z)).powf(1.0 / beta);
    Ok((z, t))
}

/// Lower bound a − k a^τ ≥ −(1−τ) τ^{τ/(1−τ)} k^{1/(1−τ)}, τ ∈ (0,1).
pub fn young_floor(k: f64, tau: f64) -> f64 {
    -(1.0 - tau) * tau.powf(tau / (1.0 - tau)) * k.powf(1.0 / (1.0 - tau))
}

#[derive(Debug, Clone, Serialize)]
pub struct MpGeometry {
    pub r: f64,
    pub q: f64,
    pub gn_q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub s_lem: f64,
    pub a_lem: f64,
    pub b_lem: f64,
    pub z_star: f64,
    pub t_star: f64,
    pub r_star: f64,
    pub rho_star: f64,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Theta")]
    pub theta: f64,
    #[serde(rename = "Upsilon")]
    pub upsilon: f64,
}

/// Conjugate exponent q = 2r/(r−1) (q = 2 for r = ∞).
pub fn conjugate_exponent(r: f64) -> f64 {
    if r.is_infinite() {
        2.0
    } else {
        2.0 * r / (r - 1.0)
    }
}

/// G_q for the conjugate exponent, reusing the ground state when q = p.
pub fn gn_for(dim: usize, q: f64, gs: &GroundStateData) -> Result<f64> {
    if (q - gs.q).abs() < 1e-12 * q && gs.dim == dim {
        Ok(gs.gn_constant)
    } else {
        crate::limit_problem::gn_constant(dim, q)
    }
}

pub fn mp_geometry(
    dim: usize,
    p: f64,
    r: f64,
    v_norm: f64,
    gs: &GroundStateData,
) -> Result<MpGeometry> {
    let gq = gn_for(dim, conjugate_exponent(r), gs)?;
    mp_geometry_with(dim, p, r, v_norm, gs.gn_constant, gq)
}

/// Same as [`mp_geometry`] with both GN constants supplied.
pub fn mp_geometry_with(
    dim: usize,
    p: f64,
    r: f64,
    v_norm: f64,
    gn_p: f64,
    gn_q: f64,
) -> Result<MpGeometry> {
    check_supercritical(dim, p)?;
    let nd = dim as f64;
    if !(r > 1.0 && r > nd / 2.0) {
        return param(format!("need r > max(1, N/2), got r = {r}"));
    }
    if !(v_norm > 0.0 && v_norm.is_finite()) {
        return param(format!("‖V‖_r must be positive, got {v_norm}"));
    }
    let q = conjugate_exponent(r);
    if q >= critical_exponent(dim) {
        return param(format!("conjugate exponent q = {q} is not below 2*"));
    }
    let alpha = (2.0 * nd - q * (nd - 2.0)) / (2.0 * q);
    let beta = (nd * (p - 2.0) - 4.0) / 4.0;
    let zexp = 2.0 * nd - p * (nd - 2.0);
    let s_lem = 2.0 / q * (2.0 * nd - q * (nd - 2.0)) / zexp;
    let b_lem = 2.0 / p * gn_p.powf(p);
    let a1 = gn_q * gn_q;
    let (z_star, t_star) = elem_lemma_star(a1 * v_norm, b_lem, s_lem, alpha, beta)?;
    let (z1, t1) = elem_lemma_star(a1, b_lem, s_lem, alpha, beta)?;
    let tau = 2.0 * beta / ((alpha + s_lem * beta) * zexp);
    let sigma = 1.0 / tau;
    Ok(MpGeometry {
        r,
        q,
        gn_q,
        alpha,
        beta,
        s_lem,
        a_lem: a1 * v_norm,
        b_lem,
        z_star,
        t_star,
        r_star: t_star.sqrt(),
        rho_star: z_star.powf(2.0 / zexp),
        sigma,
        k: z1.powf(2.0 / zexp).powf(sigma),
        theta: t1.sqrt(),
        upsilon: 1.0 / (2.0 * (alpha + s_lem * beta)),
    })
}

impl MpGeometry {
    /// Half of f_z(t*) at z = ρ^{(2N−p(N−2))/2}: the lower bound for F on the
    /// sphere ‖∇u‖₂ = R*.
    pub fn energy_floor(&self, dim: usize, p: f64, rho: f64) -> f64 {
        let nd = dim as f64;
        let z = rho.powf(0.5 * (2.0 * nd - p * (nd - 2.0)));
        0.5 * elem_f(
            self.a_lem,
            self.b_lem,
            self.s_lem,
            self.alpha,
            self.beta,
            z,
            self.t_star,
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TildeThresholds {
    pub tilde_r: f64,
    pub tilde_m: f64,
    /// R̃ ρ^{(p−γ)/(γ−2)}, independent of ρ.
    pub c_r: f64,
    pub m_rho: f64,
}

/// R̃ maximizes t²/2 − (G^p/p) ρ^{p−γ} t^γ and M̃ m_ρ is half the maximum.
pub fn tilde_thresholds(dim: usize, p: f64, rho: f64, gs: &GroundStateData) -> Result<TildeThresholds> {
    check_supercritical(dim, p)?;
    if !(rho > 0.0) {
        return param(format!("mass ρ must be positive, got {rho}"));
    }
    let g = gamma_of(dim, p);
    let gp = gs.gn_constant.powf(p);
    let c_r = (p / (g * gp)).powf(1.0 / (g - 2.0));
    let tilde_r = c_r * rho.powf(-(p - g) / (g - 2.0));
    let m0 = 0.5 * tilde_r * tilde_r - gp / p * rho.powf(p - g) * tilde_r.powf(g);
    let m_rho = crate::limit_problem::m_rho(gs, p, rho)?;
    Ok(TildeThresholds {
        tilde_r,
        tilde_m: m0 / (2.0 * m_rho),
        c_r,
        m_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_problem::solve_ground_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gs34() -> GroundStateData {
        let g = make_grid(3, GridKind::Radial, 24.0, 2048).unwrap();
        solve_ground_state(3, 4.0, &g).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        let gs = gs34();
        let c = structural_constants(3, 4.0, 0.5, &gs).unwrap();
        assert_eq!((c.a, c.b, c.d, c.s_exp, c.gamma, c.theta), (2.0, 2.0, 12.0, 2.0, 3.0, 1.0));
        // M reduces to δ^{γ/(γ−2)} once G, m_ρ₀, ρ₀ obey the Pohozaev relations
        assert!((c.m - 0.125).abs() < 1e-3, "{}", c.m);
        let g = make_grid(1, GridKind::Line, 20.0, 2048).unwrap();
        let gs1 = solve_ground_state(1, 8.0, &g).unwrap();
        let c = structural_constants(1, 8.0, 0.5, &gs1).unwrap();
        // A = 2N − (N−2)p = 2 + 8
        assert_eq!((c.gamma, c.b, c.a, c.d), (3.0, 2.0, 10.0, 36.0));
        assert!(structural_constants(3, 4.0, 1.0, &gs).is_err());
    }

    #[test]
    fn gamma_exceeds_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n: usize = rng.gen_range(1..=6);
            let lo = 2.0 + 4.0 / n as f64;
            let hi = critical_exponent(n).min(40.0);
            let p = lo + (hi - lo) * rng.gen_range(0.01..0.99);
            let g = gamma_of(n, p);
            assert!(g > 2.0);
            let nd = n as f64;
            assert!(2.0 * nd - (nd - 2.0) * p > 0.0 && nd * (p - 2.0) - 4.0 > 0.0);
        }
    }

    #[test]
    fn sobolev() {
        let s3 = sobolev_constant(3).unwrap();
        assert!((s3 - 5.478).abs() < 0.005 * 5.478);
        let q3 = sobolev_rayleigh(3, 1000.0, 200_000).unwrap();
        assert!((q3 - s3).abs() < 0.005 * s3, "{q3} vs {s3}");
        let s4 = sobolev_constant(4).unwrap();
        let q4 = sobolev_rayleigh(4, 400.0, 80_000).unwrap();
        assert!((q4 - s4).abs() < 0.005 * s4, "{q4} vs {s4}");
        assert!(sobolev_constant(2).is_err());
    }

    #[test]
    fn lemma_examples() {
        let (z, t) = elem_lemma_star(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((z - 0.5).abs() < 1e-14 && (t - 1.0).abs() < 1e-14);
        assert!(elem_f(1.0, 1.0, 1.0, 1.0, 1.0, z, t).abs() < 1e-14);
        let (z, t) = elem_lemma_star(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert!((z - 2f64.powf(-2.0 / 3.0)).abs() < 1e-14);
        assert!((t - 2f64.powf(-1.0 / 3.0)).abs() < 1e-14);
        assert!(elem_f(1.0, 1.0, 2.0, 1.0, 1.0, z, t).abs() < 1e-14);
        assert!(elem_lemma_star(1.0, 1.0, 1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn lemma_tangency_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (a, b, s) = (rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0), rng.gen_range(0.2..3.0));
            let (al, be) = (rng.gen_range(0.05..1.0), rng.gen_range(0.1..3.0));
            let (z, t) = elem_lemma_star(a, b, s, al, be).unwrap();
            let f = |zz: f64, tt: f64| elem_f(a, b, s, al, be, zz, tt);
            assert!(f(z, t).abs() < 1e-10 * t);
            let h = 1e-6 * t;
            let df = (f(z, t + h) - f(z, t - h)) / (2.0 * h);
            assert!(df.abs() < 1e-6);
            assert!(f(0.9 * z, t) > 0.0);
            assert!(f(0.5 * z, t) > f(0.9 * z, t));
        }
    }

    #[test]
    fn young_floor_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (x, k, tau) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..5.0), rng.gen_range(0.01..0.99));
            let x: f64 = x;
            assert!(x - k * x.powf(tau) >= young_floor(k, tau) - 1e-12);
        }
    }

    #[test]
    fn theta_minimum() {
        for th in [0.1, 1.0, 5.0] {
            let f = |x: f64| -th + th * x + x.powf(-th);
            let min = (1..=10_000).map(|i| f(i as f64 / 10_000.0)).fold(f64::INFINITY, f64::min);
            assert!((min - 1.0).abs() < 1e-12 && (f(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn geometry_scaling() {
        let gs = gs34();
        let g1 = mp_geometry(3, 4.0, 2.0, 1.0, &gs).unwrap();
        let g2 = mp_geometry(3, 4.0, 2.0, 2.0, &gs).unwrap();
        let ratio = g2.t_star / g1.t_star;
        assert!((ratio - 2f64.powf(1.0 / (g1.alpha + g1.s_lem * g1.beta))).abs() < 1e-12);
        assert!((g2.r_star - g1.theta * 2f64.powf(g1.upsilon)).abs() < 1e-12 * g2.r_star);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = rng.gen_range(0.05..20.0);
            let geo = mp_geometry(3, 4.0, 2.0, v, &gs).unwrap();
            let rho = geo.rho_star * rng.gen_range(0.2..1.8);
            assert_eq!(rho < geo.rho_star, v * rho.powf(geo.sigma) < geo.k);
            assert!(geo.energy_floor(3, 4.0, 0.5 * geo.rho_star) > 0.0);
            assert!(geo.energy_floor(3, 4.0, geo.rho_star).abs() < 1e-10 * geo.t_star);
        }
        assert!(mp_geometry(3, 4.0, 1.5, 1.0, &gs).is_err());
        assert!(mp_geometry(3, 4.0, 2.0, 0.0, &gs).is_err());
    }

    #[test]
    fn tilde_constants() {
        let gs = gs34();
        let mut prev: Option<f64> = None;
        for rho in [0.25 * gs.rho0, gs.rho0, 4.0 * gs.rho0] {
            let t = tilde_thresholds(3, 4.0, rho, &gs).unwrap();
            let g = 3.0;
            let gp = gs.gn_constant.powi(4);
            let d = t.tilde_r - g * gp / 4.0 * rho.powf(4.0 - g) * t.tilde_r.powf(g - 1.0);
            assert!(d.abs() < 1e-10 * t.tilde_r);
            assert!((t.tilde_r * rho.powf(1.0) - t.c_r).abs() < 1e-10 * t.c_r);
            assert!((t.tilde_m - 0.5).abs() < 2e-3, "{}", t.tilde_m);
            if let Some(p) = prev {
                assert!((t.tilde_m - p).abs() < 1e-10);
            }
            prev = Some(t.tilde_m);
        }
    }
}
