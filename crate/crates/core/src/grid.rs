//! Uniform cell-centred grids for radially symmetric problems in ℝ^N and for
//! the full line in N = 1.
//!
//! Radial nodes sit at `r_i = (i + 1/2) h`, so the origin is a cell face and
//! the symmetry condition `u'(0) = 0` becomes a mirror ghost. Quadrature
//! weights are the exact shell volumes `ω_N/N (r_{i+1/2}^N − r_{i−1/2}^N)`,
//! which keeps every weight positive and makes the finite-volume Laplacian
//! exact on `|x|²`. The outer boundary `rmax` is a Dirichlet face
//! (antisymmetric ghost).
//!
//! In N = 1 the Laplacian uses the fourth-order five-point stencil; in
//! N ≥ 2 the conservative three-point stencil. Either way the operator is
//! symmetric in the weighted inner product, so `kinetic_form` is exactly the
//! quadratic form whose weighted gradient is `−laplacian`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Radial,
    Line,
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridKind::Radial => write!(f, "radial"),
            GridKind::Line => write!(f, "line"),
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial" => Ok(GridKind::Radial),
            "line" => Ok(GridKind::Line),
            other => Err(Error::Parameter(format!("unknown grid kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    Second,
    Fourth,
}

/// Surface area of the unit sphere in ℝ^N.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    kind: GridKind,
    rmax: f64,
    spacing: f64,
    stencil: Stencil,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Face areas, `faces[k]` sits between nodes `k − 1` and `k` (n + 1 faces).
    faces: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.kind == other.kind
            && self.stencil == other.stencil
            && self.nodes.len() == other.nodes.len()
            && self.rmax.to_bits() == other.rmax.to_bits()
    }
}

/// Builds a grid with the default stencil (fourth order in N = 1, second
/// order otherwise).
pub fn make_grid(dim: usize, kind: GridKind, rmax: f64, n: usize) -> Result<Arc<Grid>> {
    let stencil = if dim == 1 {
        Stencil::Fourth
    } else {
        Stencil::Second
    };
    Grid::new(dim, kind, rmax, n, stencil).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, kind: GridKind, rmax: f64, n: usize, stencil: Stencil) -> Result<Self> {
        if dim < 1 {
            return param("dimension N must be at least 1");
        }
        if n < 16 {
            return param(format!("grid needs at least 16 nodes, got {n}"));
        }
        if !(rmax > 0.0 && rmax.is_finite()) {
            return param(format!("rmax must be positive, got {rmax}"));
        }
        if kind == GridKind::Line && dim != 1 {
            return param("line grids require N = 1");
        }
        if stencil == Stencil::Fourth && dim != 1 {
            return param("the fourth-order stencil is only available in N = 1");
        }
        let omega = sphere_area(dim);
        let (spacing, nodes, weights, faces) = match kind {
            GridKind::Radial => {
                let h = rmax / n as f64;
                let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
                let nd = dim as i32;
                let weights = (0..n)
                    .map(|i| {
                        let a = i as f64 * h;
                        let b = (i + 1) as f64 * h;
                        omega / dim as f64 * (b.powi(nd) - a.powi(nd))
                    })
                    .collect();
                let faces = (0..=n)
                    .map(|k| omega * (k as f64 * h).powi(nd - 1))
                    .collect();
                (h, nodes, weights, faces)
            }
            GridKind::Line => {
                let h = 2.0 * rmax / n as f64;
                let nodes = (0..n).map(|i| -rmax + (i as f64 + 0.5) * h).collect();
                (h, nodes, vec![h; n], vec![1.0; n + 1])
            }
        };
        Ok(Self {
            dim,
            kind,
            rmax,
            spacing,
            stencil,
            nodes,
            weights,
            faces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn kind(&self) -> GridKind {
        self.kind
    }
    pub fn rmax(&self) -> f64 {
        self.rmax
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn stencil(&self) -> Stencil {
        self.stencil
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same grid with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Arc<Grid>> {
        Grid::new(self.dim, self.kind, self.rmax * factor, self.len(), self.stencil).map(Arc::new)
    }

    /// |x| at each node.
    pub fn radii(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x.abs()).collect()
    }

    pub fn integrate_slice(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        self.dot(u, u)
    }

    /// Maps an index beyond the node range to (node, sign) using the
    /// boundary reflections; `None` never happens for stencil offsets ≤ 2.
    #[inline]
    fn ghost(&self, j: isize) -> Option<(usize, f64)> {
        let n = self.len() as isize;
        if (0..n).contains(&j) {
            Some((j as usize, 1.0))
        } else if j < 0 {
            let m = -1 - j;
            if m >= n {
                return None;
            }
            match self.kind {
                GridKind::Radial => Some((m as usize, 1.0)),
                GridKind::Line => Some((m as usize, -1.0)),
            }
        } else {
            let m = 2 * n - 1 - j;
            if m < 0 {
                return None;
            }
            Some((m as usize, -1.0))
        }
    }

    /// Stencil of row `i` as (offset, coefficient) pairs before ghost mapping.
    fn row(&self, i: usize) -> ([(isize, f64); 5], usize) {
        let h = self.spacing;
        match self.stencil {
            Stencil::Second => {
                let cm = self.faces[i];
                let cp = self.faces[i + 1];
                let s = 1.0 / (h * self.weights[i]);
                (
                    [
                        (-1, cm * s),
                        (0, -(cm + cp) * s),
                        (1, cp * s),
                        (0, 0.0),
                        (0, 0.0),
                    ],
                    3,
                )
            }
            Stencil::Fourth => {
                let s = 1.0 / (12.0 * h * h);
                (
                    [
                        (-2, -s),
                        (-1, 16.0 * s),
                        (0, -30.0 * s),
                        (1, 16.0 * s),
                        (2, -s),
                    ],
                    5,
                )
            }
        }
    }

    pub fn half_bandwidth(&self) -> usize {
        match self.stencil {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }

    pub fn laplacian_slice(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let (row, len) = self.row(i);
            let mut acc = 0.0;
            for &(off, c) in &row[..len] {
                if let Some((j, sgn)) = self.ghost(i as isize + off) {
                    acc += c * sgn * u[j];
                }
            }
            *o = acc;
        }
        out
    }

    /// The matrix of `−Δ` in band storage (operator form, not weighted).
    pub fn neg_laplacian_band(&self) -> Banded {
        let n = self.len();
        let k = self.half_bandwidth();
        let mut m = Banded::zeros(n, k, k);
        for i in 0..n {
            let (row, len) = self.row(i);
            for &(off, c) in &row[..len] {
                if let Some((j, sgn)) = self.ghost(i as isize + off) {
                    m.add(i, j, -c * sgn);
                }
            }
        }
        m
    }

    /// ⟨−Δu, u⟩ in the weighted inner product.
    pub fn kinetic_form_slice(&self, u: &[f64]) -> f64 {
        let lap = self.laplacian_slice(u);
        -self.dot(&lap, u)
    }

    /// Central-difference derivative along the grid coordinate (d/dr or d/dx).
    pub fn derivative_slice(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h2 = 2.0 * self.spacing;
        (0..n)
            .map(|i| {
                let val = |j: isize| self.ghost(j).map_or(0.0, |(k, s)| s * u[k]);
                (val(i as isize + 1) - val(i as isize - 1)) / h2
            })
            .collect()
    }

    /// x·∇u, i.e. r·u'(r) on radial grids and x·u'(x) on the line.
    pub fn dilation_field_slice(&self, u: &[f64]) -> Vec<f64> {
        let du = self.derivative_slice(u);
        du.iter().zip(&self.nodes).map(|(d, x)| d * x).collect()
    }

    /// ∫|∇u|² measured with face differences over the truncated domain; the
    /// boundary half-cells reuse the nearest face gradient.
    pub fn grad_norm_sq_slice(&self, u: &[f64]) -> f64 {
        let n = self.len();
        let h = self.spacing;
        let mut acc = 0.0;
        for k in 1..n {
            let g = (u[k] - u[k - 1]) / h;
            acc += self.faces[k] * h * g * g;
        }
        let g_last = (u[n - 1] - u[n - 2]) / h;
        match self.kind {
            GridKind::Radial => {
                let nd = self.dim as i32;
                let vol = sphere_area(self.dim) / self.dim as f64
                    * (self.rmax.powi(nd) - self.nodes[n - 1].powi(nd));
                acc += vol * g_last * g_last;
            }
            GridKind::Line => {
                let g_first = (u[1] - u[0]) / h;
                acc += 0.5 * h * (g_first * g_first + g_last * g_last);
            }
        }
        acc
    }

    /// Fractional index of coordinate `x` (node i sits at i).
    fn fractional_index(&self, x: f64) -> f64 {
        match self.kind {
            GridKind::Radial => x.abs() / self.spacing - 0.5,
            GridKind::Line => (x + self.rmax) / self.spacing - 0.5,
        }
    }

    /// Four-point Lagrange interpolation with the boundary reflections and
    /// zero extension outside the domain.
    pub fn interpolate_slice(&self, u: &[f64], x: f64) -> f64 {
        let outside = match self.kind {
            GridKind::Radial => x.abs() >= self.rmax,
            GridKind::Line => x.abs() >= self.rmax,
        };
        if outside || !x.is_finite() {
            return 0.0;
        }
        let s = self.fractional_index(x);
        let i0 = s.floor();
        let t = s - i0;
        let i0 = i0 as isize;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            if let Some((j, sgn)) = self.ghost(i0 - 1 + k as isize) {
                acc += wk * sgn * u[j];
            }
        }
        acc
    }
}

/// Real values on the nodes of a shared grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every node coordinate (signed x on line grids, r on
    /// radial grids).
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(&self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if std::ptr::eq(self.grid.as_ref(), grid) || *self.grid == *grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "function lives on a different grid".into(),
            ))
        }
    }

    pub fn check_same(&self, other: &GridFunction) -> Result<()> {
        other.check_grid(&self.grid)
    }

    /// Weighted L² inner product.
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.grid.dot(&self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.norm_sq(&self.values).sqrt()
    }

    /// Value at an arbitrary coordinate by cubic interpolation.
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate_slice(&self.values, x)
    }

    /// Resamples `x ↦ scale · self(x · stretch)` onto `target`.
    pub fn resample(&self, target: &Arc<Grid>, stretch: f64, scale: f64) -> GridFunction {
        GridFunction::from_fn(target, |x| scale * self.eval(x * stretch))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# N={} kind={}", self.grid.dim(), self.grid.kind())?;
        for (x, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(std::io::BufReader::new(file))
    }

    /// Reads the two-column format back, rebuilding the grid from the node
    /// positions.
    pub fn read_csv_from(r: impl BufRead) -> Result<Self> {
        let mut dim = None;
        let mut kind = None;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("N=") {
                        dim = Some(v.parse::<usize>().map_err(|e| {
                            Error::Parameter(format!("bad N in csv header: {e}"))
                        })?);
                    } else if let Some(v) = tok.strip_prefix("kind=") {
                        kind = Some(v.parse::<GridKind>()?);
                    }
                }
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parameter(format!("malformed csv row `{line}`")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("malformed csv row `{line}`: {e}")))
            };
            xs.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        let dim = dim.ok_or_else(|| Error::Parameter("csv header lacks N=".into()))?;
        let kind = kind.ok_or_else(|| Error::Parameter("csv header lacks kind=".into()))?;
        let n = xs.len();
        if n < 16 {
            return param(format!("csv holds {n} rows, need at least 16"));
        }
        let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let rmax = match kind {
            GridKind::Radial => n as f64 * h,
            GridKind::Line => 0.5 * n as f64 * h,
        };
        let grid = make_grid(dim, kind, rmax, n)?;
        for (a, b) in grid.nodes().iter().zip(&xs) {
            if (a - b).abs() > 1e-9 * (1.0 + rmax) {
                return param("csv nodes are not a uniform cell-centred grid");
            }
        }
        GridFunction::new(&grid, vs)
    }
}

/// ∑ w_i f_i.
pub fn integrate(grid: &Grid, f: &GridFunction) -> Result<f64> {
    f.check_grid(grid)?;
    Ok(grid.integrate_slice(f.values()))
}

pub fn laplacian(grid: &Grid, u: &GridFunction) -> Result<GridFunction> {
    u.check_grid(grid)?;
    if grid.len() < 3 {
        return param("laplacian needs at least 3 nodes");
    }
    u.with_values(grid.laplacian_slice(u.values()))
}

/// (∫|u|^q)^{1/q}; `q = f64::INFINITY` gives the max norm.
pub fn lp_norm(grid: &Grid, u: &GridFunction, q: f64) -> Result<f64> {
    u.check_grid(grid)?;
    lp_norm_slice(grid, u.values(), q)
}

pub(crate) fn lp_norm_slice(grid: &Grid, u: &[f64], q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return param(format!("Lebesgue exponent must be ≥ 1, got {q}"));
    }
    if q.is_infinite() {
        return Ok(u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let s: f64 = grid
        .weights()
        .iter()
        .zip(u)
        .map(|(w, v)| w * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

pub fn grad_norm_sq(grid: &Grid, u: &GridFunction) -> Result<f64> {
    u.check_grid(grid)?;
    Ok(grid.grad_norm_sq_slice(u.values()))
}

/// ⟨−Δu, u⟩: the discrete Dirichlet energy used by every functional.
pub fn kinetic_form(grid: &Grid, u: &GridFunction) -> Result<f64> {
    u.check_grid(grid)?;
    Ok(grid.kinetic_form_slice(u.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ones(g: &Arc<Grid>) -> GridFunction {
        GridFunction::from_fn(g, |_| 1.0)
    }

    #[test]
    fn volumes() {
        let g = make_grid(3, GridKind::Radial, 1.0, 4096).unwrap();
        assert!((integrate(&g, &ones(&g)).unwrap() - 4.0 * PI / 3.0).abs() < 1e-4);
        let g = make_grid(1, GridKind::Line, 10.0, 4096).unwrap();
        assert!((integrate(&g, &ones(&g)).unwrap() - 20.0).abs() < 1e-10);
        let g = make_grid(2, GridKind::Radial, 1.0, 4096).unwrap();
        assert!((integrate(&g, &ones(&g)).unwrap() - PI).abs() < 1e-4);
    }

    #[test]
    fn ball_volume_within_tenth_percent() {
        for dim in 1..=5 {
            let g = make_grid(dim, GridKind::Radial, 3.0, 1024).unwrap();
            let exact = sphere_area(dim) / dim as f64 * 3f64.powi(dim as i32);
            let got = integrate(&g, &ones(&g)).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-3);
            assert!(g.weights().iter().all(|w| *w > 0.0));
            assert!(g.nodes().windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn gaussian_integral() {
        let g = make_grid(3, GridKind::Radial, 12.0, 16384).unwrap();
        let f = GridFunction::from_fn(&g, |r| (-r * r).exp());
        let v = integrate(&g, &f).unwrap();
        assert!((v - PI.powf(1.5)).abs() < 1e-6, "{}", v - PI.powf(1.5));
        assert_eq!(integrate(&g, &GridFunction::zeros(&g)).unwrap(), 0.0);
        let g = make_grid(3, GridKind::Radial, 4.0, 4096).unwrap();
        let ind = GridFunction::from_fn(&g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        assert!((integrate(&g, &ind).unwrap() - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn line_quadrature_exact_on_linear() {
        let g = make_grid(1, GridKind::Line, 3.0, 64).unwrap();
        let f = GridFunction::from_fn(&g, |x| 2.0 * x + 0.5);
        assert!((integrate(&g, &f).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_r_squared_and_constants() {
        let g = make_grid(3, GridKind::Radial, 2.0, 256).unwrap();
        let u = GridFunction::from_fn(&g, |r| r * r);
        let lap = laplacian(&g, &u).unwrap();
        for v in &lap.values()[..255] {
            assert!((v - 6.0).abs() < 1e-8, "{v}");
        }
        let c = laplacian(&g, &ones(&g)).unwrap();
        assert!(c.values()[..255].iter().all(|v| v.abs() < 1e-8));
        let g1 = make_grid(1, GridKind::Line, 2.0, 256).unwrap();
        let c = laplacian(&g1, &ones(&g1)).unwrap();
        assert!(c.values()[2..254].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn laplacian_gaussian_line() {
        for (n, tol) in [(512usize, 1e-6), (1024, 1e-7)] {
            let g = make_grid(1, GridKind::Line, 12.0, n).unwrap();
            let u = GridFunction::from_fn(&g, |x| (-x * x / 2.0).exp());
            let lap = laplacian(&g, &u).unwrap();
            let err = g
                .nodes()
                .iter()
                .zip(lap.values())
                .map(|(x, v)| (v - (x * x - 1.0) * (-x * x / 2.0).exp()).abs())
                .fold(0.0, f64::max);
            assert!(err < tol, "n={n} err={err}");
        }
        // second-order stencil converges at rate h²
        let errs: Vec<f64> = [256usize, 512]
            .iter()
            .map(|&n| {
                let g = Arc::new(Grid::new(1, GridKind::Line, 12.0, n, Stencil::Second).unwrap());
                let u = GridFunction::from_fn(&g, |x| (-x * x / 2.0).exp());
                let lap = laplacian(&g, &u).unwrap();
                g.nodes()
                    .iter()
                    .zip(lap.values())
                    .map(|(x, v)| (v - (x * x - 1.0) * (-x * x / 2.0).exp()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2();
        assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn norms() {
        let g = make_grid(3, GridKind::Radial, 3.0, 4096).unwrap();
        let ind = GridFunction::from_fn(&g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        assert!((lp_norm(&g, &ind, 2.0).unwrap() - (4.0 * PI / 3.0).sqrt()).abs() < 1e-3);
        let z = GridFunction::zeros(&g);
        for q in [1.0, 2.5, f64::INFINITY] {
            assert_eq!(lp_norm(&g, &z, q).unwrap(), 0.0);
        }
        assert!(lp_norm(&g, &z, 0.5).is_err());
    }

    #[test]
    fn soliton_l2_norm_against_fine_quadrature() {
        let prof = |x: f64| 4f64.powf(1.0 / 6.0) * (1.0 / (3.0 * x).cosh()).powf(1.0 / 3.0);
        // oracle: composite Simpson on a much finer mesh over [-30, 30]
        let m = 600_000;
        let (a, b) = (-30.0, 30.0);
        let hh = (b - a) / m as f64;
        let mut s = prof(a).powi(2) + prof(b).powi(2);
        for k in 1..m {
            let x = a + k as f64 * hh;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * prof(x).powi(2);
        }
        let oracle = (s * hh / 3.0).sqrt();
        let g = make_grid(1, GridKind::Line, 20.0, 8192).unwrap();
        let u = GridFunction::from_fn(&g, prof);
        let v = lp_norm(&g, &u, 2.0).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn grad_norm_cases() {
        let g = make_grid(3, GridKind::Radial, 3.0, 512).unwrap();
        assert_eq!(grad_norm_sq(&g, &ones(&g)).unwrap(), 0.0);
        let g = make_grid(1, GridKind::Line, 5.0, 1000).unwrap();
        let u = GridFunction::from_fn(&g, |x| x);
        assert!((grad_norm_sq(&g, &u).unwrap() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn operator_is_symmetric_and_green_identity() {
        for g in [
            make_grid(3, GridKind::Radial, 10.0, 400).unwrap(),
            make_grid(1, GridKind::Line, 10.0, 400).unwrap(),
            make_grid(1, GridKind::Radial, 10.0, 400).unwrap(),
            make_grid(2, GridKind::Radial, 10.0, 400).unwrap(),
        ] {
            let u = GridFunction::from_fn(&g, |x| (-(x - 0.3).powi(2)).exp());
            let v = GridFunction::from_fn(&g, |x| (1.0 + x * x) * (-x * x / 3.0).exp());
            let lu = laplacian(&g, &u).unwrap();
            let lv = laplacian(&g, &v).unwrap();
            let a = lu.dot(&v).unwrap();
            let b = u.dot(&lv).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            let green = -lu.dot(&u).unwrap();
            let gn = grad_norm_sq(&g, &u).unwrap();
            assert!((green - gn).abs() < 50.0 * g.spacing() * gn, "{green} {gn}");
        }
    }

    #[test]
    fn band_matches_operator() {
        for g in [
            make_grid(3, GridKind::Radial, 5.0, 40).unwrap(),
            make_grid(1, GridKind::Line, 5.0, 40).unwrap(),
            make_grid(1, GridKind::Radial, 5.0, 40).unwrap(),
        ] {
            let u: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64).sin()).collect();
            let band = g.neg_laplacian_band().matvec(&u);
            let direct = g.laplacian_slice(&u);
            for (a, b) in band.iter().zip(&direct) {
                assert!((a + b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interpolation_is_cubic_exact() {
        let g = make_grid(1, GridKind::Line, 4.0, 64).unwrap();
        let poly = |x: f64| 1.0 + x - 0.5 * x * x + 0.1 * x * x * x;
        let u = GridFunction::from_fn(&g, poly);
        for x in [-1.234, 0.0, 0.77, 2.5] {
            assert!((u.eval(x) - poly(x)).abs() < 1e-10);
        }
        assert_eq!(u.eval(4.5), 0.0);
        // radial: even extension through the origin
        let g = make_grid(3, GridKind::Radial, 4.0, 64).unwrap();
        let u = GridFunction::from_fn(&g, |r| 2.0 - r * r);
        assert!((u.eval(0.01) - (2.0 - 1e-4)).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let g = make_grid(3, GridKind::Radial, 7.5, 128).unwrap();
        let u = GridFunction::from_fn(&g, |r| (-r).exp() * (1.0 + 1e-7 * r));
        let mut buf = Vec::new();
        u.write_csv_to(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# N=3 kind=radial\n"));
        let back = GridFunction::read_csv_from(&buf[..]).unwrap();
        assert_eq!(back.values(), u.values());
        assert!((back.grid().rmax() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        assert!(make_grid(0, GridKind::Radial, 1.0, 64).is_err());
        assert!(make_grid(3, GridKind::Radial, 1.0, 8).is_err());
        assert!(make_grid(3, GridKind::Radial, -1.0, 64).is_err());
        assert!(make_grid(2, GridKind::Line, 1.0, 64).is_err());
        let g1 = make_grid(3, GridKind::Radial, 1.0, 64).unwrap();
        let g2 = make_grid(3, GridKind::Radial, 2.0, 64).unwrap();
        assert!(integrate(&g1, &GridFunction::zeros(&g2)).is_err());
    }
}
