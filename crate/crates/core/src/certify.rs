//! Hypothesis checks: potential norms, the three certificate families, the
//! negative-spectrum witness, and the nonexistence / necessary-condition
//! diagnostics.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constants::{conjugate_exponent, gn_for, tilde_thresholds, young_floor, MpGeometry, StructuralConstants};
use crate::error::{param, Result};
use crate::functionals::Problem;
use crate::grid::{lp_norm_slice, sphere_area, GridFunction, GridKind};
use crate::limit_problem::{check_supercritical, m_rho, GroundStateData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "T1")]
    T1,
    #[serde(rename = "Tmin-min")]
    TminMin,
    #[serde(rename = "Tmin-mp")]
    TminMp,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::T1 => "T1",
            Theorem::TminMin => "Tmin-min",
            Theorem::TminMp => "Tmin-mp",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Strict (<) or non-strict (≤) comparison.
    pub strict: bool,
    pub pass: bool,
}

impl CertificateEntry {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, strict: bool) -> Self {
        let pass = if strict { lhs < rhs } else { lhs <= rhs };
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            strict,
            pass: pass && lhs.is_finite() && rhs.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub theorem: Theorem,
    pub entries: Vec<CertificateEntry>,
    pub pass: bool,
    pub metadata: serde_json::Value,
}

impl Certificate {
    fn new(theorem: Theorem, entries: Vec<CertificateEntry>, metadata: serde_json::Value) -> Self {
        let pass = entries.iter().all(|e| e.pass);
        Self {
            theorem,
            entries,
            pass,
            metadata,
        }
    }

    pub fn entry(&self, name: &str) -> Option<&CertificateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// (‖V‖_r, ‖W‖_s) with W = V·|x|.
pub fn potential_norms(prob: &Problem, r: f64, s: f64) -> Result<(f64, f64)> {
    let g = prob.grid();
    if prob.is_free() {
        log::warn!("potential vanishes identically");
    }
    Ok((
        lp_norm_slice(g, prob.v.values(), r)?,
        lp_norm_slice(g, prob.w.values(), s)?,
    ))
}

/// Hypotheses V1–V4 of the mountain-pass theorem for N ≥ 3.
pub fn check_t1(prob: &Problem, sc: &StructuralConstants) -> Result<Certificate> {
    let n = prob.dim;
    if n < 3 {
        return param(format!("the T1 conditions need N ≥ 3, got {n}"));
    }
    let nd = n as f64;
    let s = sc.sobolev.expect("Sobolev constant is set for N ≥ 3");
    let (nv, nw) = potential_norms(prob, nd / 2.0, nd)?;
    let (a, b, d, m, p) = (sc.a, sc.b, sc.d, sc.m, sc.p);
    let vs = nv / s;
    let ws = nw / s.sqrt();
    let four_p = (4.0 - p).abs();
    let entries = vec![
        CertificateEntry::new("V1", nv, (1.0 - sc.delta) * s, true),
        CertificateEntry::new("V2", nd * four_p * vs + 4.0 * ws, b, true),
        CertificateEntry::new(
            "V3",
            (a * m * nd * four_p + (nd - 2.0) * d) * vs + (4.0 * a * m + 2.0 * d) * ws,
            a * b * m,
            true,
        ),
        CertificateEntry::new(
            "V4",
            3.0 * (p - 4.0).max(0.0) * vs + 4.0 * ws,
            nd * (p - 2.0) - 4.0,
            false,
        ),
    ];
    Ok(Certificate::new(
        Theorem::T1,
        entries,
        serde_json::json!({ "norm_V_N/2": nv, "norm_W_N": nw, "S": s, "delta": sc.delta, "M": m }),
    ))
}

/// How the spectral witness was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessSource {
    Explicit,
    Rayleigh,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    #[serde(skip)]
    pub phi: GridFunction,
    /// ∫(|∇φ|² − Vφ²) with ‖φ‖₂ = ρ.
    pub form: f64,
    pub source: WitnessSource,
    /// Plateau radius and floor of V on it used by the explicit profile.
    pub radius: f64,
    pub eta: f64,
    /// k for N = 1, 2 and δ for N ≥ 3.
    pub shape: f64,
    /// Form of the unnormalized explicit profile (unit plateau).
    pub unit_form: f64,
}

/// Best plateau radius R for the explicit profile: maximizes R²·min_{|x|<R} V
/// over cell faces.
fn plateau(prob: &Problem) -> (f64, f64) {
    let g = prob.grid();
    let v = prob.v.values();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g.nodes()[i].abs().total_cmp(&g.nodes()[j].abs()));
    let mut eta = f64::INFINITY;
    let (mut best, mut best_r, mut best_eta) = (0.0, 0.0, 0.0);
    for i in order {
        eta = eta.min(v[i]);
        // outer face of the cell, so the plateau covers the whole cell
        let r = g.nodes()[i].abs() + 0.5 * g.spacing();
        if r * r * eta > best {
            best = r * r * eta;
            best_r = r;
            best_eta = eta;
        }
    }
    (best_r, best_eta)
}

fn form_of(prob: &Problem, u: &[f64]) -> f64 {
    let g = prob.grid();
    let pot: f64 = g
        .weights()
        .iter()
        .zip(u.iter().zip(prob.v.values()))
        .map(|(w, (x, v))| w * v * x * x)
        .sum();
    g.kinetic_form_slice(u) - pot
}

/// The explicit cutoff profile with unit plateau.
pub fn explicit_profile(prob: &Problem, radius: f64, shape: f64) -> GridFunction {
    let n = prob.dim;
    let g = prob.grid();
    GridFunction::from_fn(g, |x| {
        let r = x.abs();
        if r <= radius {
            return 1.0;
        }
        match n {
            1 => ((shape * radius - r) / ((shape - 1.0) * radius)).max(0.0),
            2 => (((shape - 1.0) * radius).ln() - r.ln()).max(0.0) / (shape - 1.0).ln(),
            _ => ((1.0 + shape) * radius.powi(n as i32 - 2) * r.powi(2 - n as i32) - shape).max(0.0),
        }
    })
}

fn explicit_witness(prob: &Problem) -> Option<Witness> {
    let g = prob.grid();
    let n = prob.dim;
    let rmax = g.rmax();
    let h = g.spacing();
    let build = |radius: f64, eta: f64, shape: f64| -> Witness {
        let phi = explicit_profile(prob, radius, shape);
        let unit_form = form_of(prob, phi.values());
        let norm = phi.l2_norm();
        let scale = prob.rho / norm;
        Witness {
            form: unit_form * scale * scale,
            phi: phi.scaled(scale),
            source: WitnessSource::Explicit,
            radius,
            eta,
            shape,
            unit_form,
        }
    };
    if n >= 3 {
        let (radius, eta) = plateau(prob);
        let nd = n as f64;
        if !(radius > 0.0 && eta > 0.0) {
            return None;
        }
        let gap = (radius * radius * eta / (nd * (nd - 2.0))).sqrt();
        // support R((1+δ)/δ)^{1/(N−2)} must stay inside the grid
        let fit = 1.0 / ((rmax / radius).powi(n as i32 - 2) - 1.0);
        let delta = (0.5 * (gap - 1.0)).max(fit);
        if !(delta > 0.0) || (1.0 + delta) >= gap {
            return None;
        }
        return Some(build(radius, eta, delta));
    }
    // N = 1, 2: the widest cutoff fitting on the grid, scanning the plateau
    let mut best: Option<Witness> = None;
    let mut radius = 4.0 * h;
    while radius < 0.5 * rmax {
        let k = match n {
            1 => rmax / radius,
            _ => rmax / radius + 1.0,
        };
        if k > 2.0 {
            let eta = prob
                .v
                .values()
                .iter()
                .zip(g.nodes())
                .filter(|(_, x)| x.abs() <= radius)
                .map(|(v, _)| *v)
                .fold(f64::INFINITY, f64::min);
            let w = build(radius, eta, k);
            if best.as_ref().is_none_or(|b| w.form < b.form) {
                best = Some(w);
            }
        }
        radius *= 1.25;
    }
    best.filter(|w| w.form <= 0.0)
}

/// Bottom of the spectrum of −Δ − V on the grid by LOPCG with the shifted
/// Laplacian as preconditioner. Returns (eigenvalue, unit eigenvector).
pub fn rayleigh_bottom(prob: &Problem, start: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let g = prob.grid();
    let n = g.len();
    let v = prob.v.values();
    let shift = v.iter().fold(0.0f64, |m, x| m.max(*x)).max(1.0);
    let mut pre = g.neg_laplacian_band();
    pre.add_diagonal(&vec![shift; n]);
    let pre = pre.factorize()?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let lap = g.laplacian_slice(x);
        lap.iter().zip(x.iter().zip(v)).map(|(l, (a, b))| -l - b * a).collect()
    };
    let normalize = |x: &mut Vec<f64>| {
        let s = g.norm_sq(x).sqrt();
        x.iter_mut().for_each(|a| *a /= s);
    };
    let mut x: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => {
            let w = 0.1 * g.rmax();
            g.nodes().iter().map(|r| (-(r / w).powi(2)).exp()).collect()
        }
    };
    normalize(&mut x);
    let mut p: Option<Vec<f64>> = None;
    let mut theta = 0.0;
    for _ in 0..3000 {
        let hx = apply(&x);
        theta = g.dot(&x, &hx);
        let r: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
        let res = g.norm_sq(&r).sqrt();
        if res <= 1e-9 * (theta.abs() + shift) {
            break;
        }
        let w = pre.solve(&r);
        let mut basis = vec![x.clone()];
        for cand in std::iter::once(w).chain(p.take()) {
            let mut c = cand;
            for _ in 0..2 {
                for b in &basis {
                    let k = g.dot(&c, b);
                    c.iter_mut().zip(b).for_each(|(ci, bi)| *ci -= k * bi);
                }
            }
            let s = g.norm_sq(&c).sqrt();
            if s > 1e-12 {
                c.iter_mut().for_each(|a| *a /= s);
                basis.push(c);
            }
        }
        let hb: Vec<Vec<f64>> = basis.iter().map(|b| apply(b)).collect();
        let m = basis.len();
        let a = DMatrix::from_fn(m, m, |i, j| 0.5 * (g.dot(&basis[i], &hb[j]) + g.dot(&basis[j], &hb[i])));
        let eig = SymmetricEigen::new(a);
        let k = eig.eigenvalues.imin();
        let y = eig.eigenvectors.column(k);
        let mut xn = vec![0.0; n];
        let mut pn = vec![0.0; n];
        for (i, b) in basis.iter().enumerate() {
            for j in 0..n {
                xn[j] += y[i] * b[j];
                if i > 0 {
                    pn[j] += y[i] * b[j];
                }
            }
        }
        normalize(&mut xn);
        x = xn;
        p = Some(pn);
    }
    if x.iter().map(|a| a.abs()).sum::<f64>() > 0.0 && x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|a| *a = -*a);
    }
    Ok((theta, x))
}

/// A function on S_ρ with ∫(|∇φ|² − Vφ²) ≤ 0: the explicit cutoff profile
/// when it works, otherwise the minimizer of the Rayleigh quotient.
pub fn neg_spectrum_witness(prob: &Problem) -> Option<Witness> {
    if let Some(w) = explicit_witness(prob) {
        if w.form <= 0.0 {
            return Some(w);
        }
    }
    if prob.is_free() {
        return None;
    }
    let (radius, eta) = plateau(prob);
    let (theta, x) = rayleigh_bottom(prob, None).ok()?;
    if theta > 0.0 {
        return None;
    }
    let phi = GridFunction::new(prob.grid(), x.iter().map(|a| a * prob.rho).collect()).ok()?;
    Some(Witness {
        form: theta * prob.rho * prob.rho,
        phi,
        source: WitnessSource::Rayleigh,
        radius,
        eta,
        shape: f64::NAN,
        unit_form: f64::NAN,
    })
}

/// Upper bound on the form of the N ≥ 3 cutoff profile,
/// (R^{N−2}ω_N/N)((1+δ)²N(N−2) − R²η).
pub fn witness_form_bound(dim: usize, radius: f64, eta: f64, delta: f64) -> f64 {
    let nd = dim as f64;
    radius.powi(dim as i32 - 2) * sphere_area(dim) / nd
        * ((1.0 + delta).powi(2) * nd * (nd - 2.0) - radius * radius * eta)
}

/// Exact form of the same profile for V = η on B_R and 0 outside:
/// (1+δ)(N−2)ω_N R^{N−2} − ηω_N R^N/N.
pub fn witness_form_exact(dim: usize, radius: f64, eta: f64, delta: f64) -> f64 {
    let nd = dim as f64;
    let w = sphere_area(dim);
    (1.0 + delta) * (nd - 2.0) * w * radius.powi(dim as i32 - 2) - eta * w * radius.powi(dim as i32) / nd
}

/// Conditions of the local-minimizer theorem: ‖V‖_r ρ^σ < K, the spectral
/// witness, and for r = ∞ the decay of V at the grid boundary.
pub fn check_tmin_min(prob: &Problem, r: f64, geo: &MpGeometry) -> Result<Certificate> {
    let nd = prob.dim as f64;
    if !(r > 1.0 && r > nd / 2.0) {
        return param(format!("need r > max(1, N/2), got r = {r}"));
    }
    let nv = lp_norm_slice(prob.grid(), prob.v.values(), r)?;
    let mut entries = vec![CertificateEntry::new(
        "sigma_K",
        nv * prob.rho.powf(geo.sigma),
        geo.k,
        true,
    )];
    let witness = neg_spectrum_witness(prob);
    let form = witness.as_ref().map_or(f64::INFINITY, |w| w.form);
    entries.push(CertificateEntry::new("neg_spectrum", form, 0.0, false));
    if r.is_infinite() {
        let vmax = lp_norm_slice(prob.grid(), prob.v.values(), f64::INFINITY)?;
        let edge = *prob.v.values().last().expect("grid is nonempty");
        entries.push(CertificateEntry::new("decay_at_rmax", edge, 1e-6 * vmax, true));
    }
    let meta = serde_json::json!({
        "norm_V_r": nv,
        "r": r,
        "geometry": geo,
        "witness": witness,
    });
    Ok(Certificate::new(Theorem::TminMin, entries, meta))
}

/// Reconstructed constants behind the three smallness conditions of the
/// mountain-pass theorem.
#[derive(Debug, Clone, Serialize)]
pub struct MpConstants {
    pub r: f64,
    pub s: f64,
    pub q: f64,
    pub q1: f64,
    pub gn_q: f64,
    pub gn_q1: f64,
    pub tilde_m: f64,
    /// ρ exponents of the L1 conditions.
    pub e1_v: f64,
    pub e1_w: f64,
    /// L1 from the mountain-pass geometry (V side only).
    pub l1_geometry: f64,
    /// L1' from the lower bound on F at the weak limit.
    pub l1_prime_claim: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c1_pp: f64,
    pub c2_pp: f64,
    pub l1_v: f64,
    pub l1_w: f64,
    pub l1_prime_v: f64,
    pub l1_prime_w: f64,
    pub l2a: f64,
    pub l2b: f64,
    pub l2: f64,
    pub lambda_c1: f64,
    pub lambda_c2: f64,
    pub lambda_c3: f64,
    pub l3: f64,
    /// m_ρ₀ ρ₀^{2θ}, so that m_ρ = this · ρ^{−2θ}.
    pub m_scale: f64,
}

pub fn mp_constants(dim: usize, p: f64, r: f64, s: f64, gs: &GroundStateData) -> Result<MpConstants> {
    check_supercritical(dim, p)?;
    let nd = dim as f64;
    if !(r > 1.0 && r > nd / 2.0) {
        return param(format!("need r > max(1, N/2), got r = {r}"));
    }
    if !(s > 2.0 && s > nd) {
        return param(format!("need s > max(2, N), got s = {s}"));
    }
    let q = conjugate_exponent(r);
    let q1 = if s.is_infinite() { 2.0 } else { 2.0 * s / (s - 2.0) };
    let gq = gn_for(dim, q, gs)?;
    let gq1 = gn_for(dim, q1, gs)?;
    let gq2 = gq * gq;
    let bb = nd * (p - 2.0) - 4.0;
    let aa = 2.0 * nd - (nd - 2.0) * p;
    let theta = aa / bb;
    let m_scale = gs.m_rho0 * gs.rho0.powf(2.0 * theta);
    let tilde = tilde_thresholds(dim, p, gs.rho0, gs)?;
    let tilde_m = tilde.tilde_m;
    let nr = if r.is_infinite() { 0.0 } else { nd / r };
    let ns = if s.is_infinite() { 0.0 } else { nd / s };
    let e1_v = (2.0 - nr) * 2.0 * (p - 2.0) / bb;
    let e1_w = (1.0 - ns) * 2.0 * (p - 2.0) / bb;

    // geometry: (G_q²/2)‖V‖ρ^{2−N/r} R̃^{N/r} ≤ M̃ m_ρ/2, evaluated at ρ₀
    let rho = gs.rho0;
    let l1_geometry = 0.5 * tilde_m * tilde.m_rho * rho.powf(e1_v)
        / (0.5 * gq2 * tilde.tilde_r.powf(nr) * rho.powf(2.0 - nr));

    // F(v) ≥ C0[2a − C1 c − C2|d|] and the Young-type floors
    let k_a = bb / (2.0 * nd * (p - 2.0));
    let k_c = ((p - 4.0) / (2.0 * (p - 2.0))).max(0.0);
    let k_d = 2.0 / (nd * (p - 2.0));
    let c0 = 0.5 * k_a;
    let c1 = 2.0 * k_c / k_a;
    let c2 = 2.0 * k_d / k_a;
    let tau = nr / 2.0;
    let tau1 = 0.5 * (1.0 + ns);
    let c1_pp = if c1 > 0.0 { -young_floor(c1 * gq2, tau) } else { 0.0 };
    let c2_pp = -young_floor(c2 * gq1, tau1);
    let l1_prime_claim = theta / (2.0 * c0 * (c1_pp + c2_pp));

    let to_l1 = |lp: f64, frac: f64| (lp * m_scale).powf(frac);
    let frac_v = 1.0 - nr / 2.0;
    let frac_w = 0.5 * (1.0 - ns);
    let l1_v = l1_geometry.min(to_l1(l1_prime_claim, frac_v));
    let l1_w = to_l1(l1_prime_claim, frac_w);
    let l1_prime_v = l1_v.powf(1.0 / frac_v) / m_scale;
    let l1_prime_w = l1_w.powf(1.0 / frac_w) / m_scale;

    let l2a = bb / (3.0 * (nd * (4.0 - p).abs() * gq2 + 4.0 * gq1));
    let lambda_c1 = aa / bb;
    let lambda_c2 = ((nd - 2.0) * (p - 2.0)).max(0.0) * gq2 / bb;
    let lambda_c3 = 2.0 * (p - 2.0) * gq1 / bb;
    let k3 = 3.0 * nd * (p - 2.0) / bb;
    let l2b = 2.0 * lambda_c1 * tilde_m / (2.0 * k3 * (lambda_c2 + lambda_c3));
    let l3 = lambda_c1 * tilde_m / (lambda_c2 + lambda_c3);
    Ok(MpConstants {
        r,
        s,
        q,
        q1,
        gn_q: gq,
        gn_q1: gq1,
        tilde_m,
        e1_v,
        e1_w,
        l1_geometry,
        l1_prime_claim,
        c0,
        c1,
        c2,
        c1_pp,
        c2_pp,
        l1_v,
        l1_w,
        l1_prime_v,
        l1_prime_w,
        l2a,
        l2b,
        l2: l2a.min(l2b),
        lambda_c1,
        lambda_c2,
        lambda_c3,
        l3,
        m_scale,
    })
}

impl MpConstants {
    /// The L1 conditions written as ‖V‖_r^{2r/(2r−N)} ≤ L1' m_ρ/ρ² (and the
    /// W analogue).
    pub fn l1_prime_pass(&self, dim: usize, nv: f64, nw: f64, rho: f64, m_rho: f64) -> (bool, bool) {
        let nd = dim as f64;
        let ev = if self.r.is_infinite() { 1.0 } else { 2.0 * self.r / (2.0 * self.r - nd) };
        let ew = if self.s.is_infinite() { 2.0 } else { 2.0 * self.s / (self.s - nd) };
        let bound_v = self.l1_prime_v * m_rho / (rho * rho);
        let bound_w = self.l1_prime_w * m_rho / (rho * rho);
        (nv.powf(ev) <= bound_v, nw.powf(ew) <= bound_w)
    }
}

/// Conditions L1–L3 of the mountain-pass theorem, V and W sides.
pub fn check_tmin_mp(
    prob: &Problem,
    r: f64,
    s: f64,
    sc: &StructuralConstants,
    gs: &GroundStateData,
) -> Result<Certificate> {
    let c = mp_constants(prob.dim, sc.p, r, s, gs)?;
    let nd = prob.dim as f64;
    let (nv, nw) = potential_norms(prob, r, s)?;
    let rho = prob.rho;
    let m = m_rho(gs, sc.p, rho)?;
    let nr = if r.is_infinite() { 0.0 } else { nd / r };
    let ns = if s.is_infinite() { 0.0 } else { nd / s };
    let xv = nv * rho.powf(2.0 - nr);
    let xw = nw * rho.powf(1.0 - ns);
    let entries = vec![
        CertificateEntry::new("L1_V", nv * rho.powf(c.e1_v), c.l1_v, false),
        CertificateEntry::new("L1_W", nw * rho.powf(c.e1_w), c.l1_w, false),
        CertificateEntry::new("L2_V", xv, c.l2, false),
        CertificateEntry::new("L2_W", xw, c.l2, false),
        CertificateEntry::new("L3_V", xv, c.l3 * m, false),
        CertificateEntry::new("L3_W", xw, c.l3 * m, false),
    ];
    let meta = serde_json::json!({
        "norm_V_r": nv,
        "norm_W_s": nw,
        "m_rho": m,
        "constants": c,
    });
    Ok(Certificate::new(Theorem::TminMp, entries, meta))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotoneFlag {
    pub flag: bool,
    pub min_derivative: f64,
    pub max_derivative: f64,
    pub tol: f64,
}

/// Whether ∂V/∂ν ≥ 0 with ∂V/∂ν ≢ 0 on the grid. On radial grids ν is the
/// radial direction and `nu` only fixes its sign; on the line ν = sign(nu).
pub fn check_tne(prob: &Problem, nu: f64) -> MonotoneFlag {
    let g = prob.grid();
    let v = prob.v.values();
    let n = v.len();
    let h = g.spacing();
    let sign = if nu < 0.0 { -1.0 } else { 1.0 };
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * vmax;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let d = if i == 0 {
            (v[1] - v[0]) / h
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / h
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        } * sign;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    MonotoneFlag {
        flag: lo >= -tol && hi > tol,
        min_derivative: lo,
        max_derivative: hi,
        tol,
    }
}

/// ∫V u ∂_ν u. For radial functions the integrand is odd in the direction
/// ν, so the value vanishes identically on radial grids.
pub fn cnc_residual(prob: &Problem, u: &GridFunction, nu: f64) -> Result<f64> {
    u.check_grid(prob.grid())?;
    let g = prob.grid();
    if g.kind() == GridKind::Radial {
        return Ok(0.0);
    }
    let sign = if nu < 0.0 { -1.0 } else { 1.0 };
    let du = g.derivative_slice(u.values());
    Ok(sign
        * g.weights()
            .iter()
            .zip(prob.v.values())
            .zip(u.values().iter().zip(&du))
            .map(|((w, v), (a, d))| w * v * a * d)
            .sum::<f64>())
}

/// |∫V u ∂_ν u| / (‖V‖_∞ ‖u‖₂ ‖∇u‖₂).
pub fn cnc_normalized(prob: &Problem, u: &GridFunction, nu: f64) -> Result<f64> {
    let raw = cnc_residual(prob, u, nu)?;
    let g = prob.grid();
    let vmax = lp_norm_slice(g, prob.v.values(), f64::INFINITY)?;
    let scale = vmax * u.l2_norm() * g.kinetic_form_slice(u.values()).max(0.0).sqrt();
    Ok(if scale > 0.0 { raw.abs() / scale } else { 0.0 })
}
