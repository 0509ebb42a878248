use serde::Serialize;

use super::outer_fraction;
use crate::error::{param, Result};
use crate::grid::GridFunction;

/// Outer mass fractions ∫_{|x|>R} u² / ‖u‖² per iterate and radius.
#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub radii: Vec<f64>,
    /// fractions[i][j]: iterate i, radius j.
    pub fractions: Vec<Vec<f64>>,
    pub split_frac: f64,
    pub flag: bool,
}

impl SplittingReport {
    /// Fractions at the largest radius, one per iterate.
    pub fn outermost(&self) -> Vec<f64> {
        let j = self
            .radii
            .iter()
            .enumerate()
            .fold(0, |b, (i, r)| if *r > self.radii[b] { i } else { b });
        self.fractions.iter().map(|f| f[j]).collect()
    }
}

/// Drops smaller than this still count as monotone growth.
const MONOTONE_SLACK: f64 = 0.05;

/// Flags splitting when the outer fraction at the largest radius grows
/// (up to small wiggles) and ends above `split_frac`.
pub fn mass_escape(
    iterates: &[GridFunction],
    radii: &[f64],
    split_frac: f64,
) -> Result<SplittingReport> {
    if iterates.len() < 2 {
        return param("mass_escape needs at least two iterates");
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return param("mass_escape needs positive radii");
    }
    let fractions: Vec<Vec<f64>> = iterates
        .iter()
        .map(|u| {
            radii
                .iter()
                .map(|r| outer_fraction(u.grid(), u.values(), *r))
                .collect()
        })
        .collect();
    let mut rep = SplittingReport {
        radii: radii.to_vec(),
        fractions,
        split_frac,
        flag: false,
    };
    let f = rep.outermost();
    let (first, last) = (f[0], f[f.len() - 1]);
    let monotone = f.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    rep.flag = monotone && last > split_frac && last > first;
    Ok(rep)
}
