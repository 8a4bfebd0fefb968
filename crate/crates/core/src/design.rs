//! Filter bank design: band ends from the spectral density, nudged into
//! sparse parts of the spectrum, then one Jackson–Chebyshev filter per band.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cheby::{make_polynomial_filter, PolynomialFilter, SpectralDensityEstimate};
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.001;
/// Points of the uniform grid searched for each adjusted band end.
const ADJUST_GRID: usize = 201;
/// Objective values this close (relative) to the minimum count as ties.
const TIE_RTOL: f64 = 1e-9;
/// Relative factor placing the top band end just above the λmax estimate.
const TOP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    UniformLinear,
    UniformLog,
    AdaptedLinear,
    #[default]
    AdaptedLog,
}

/// Band ends before adjustment. `τ_0 = 0` and `τ_M = λmax·(1 + 1e-9)`.
/// The log spacings halve the band width (uniform) or the eigenvalue
/// fraction (adapted) at each step down from the top band.
pub fn initial_band_ends(
    density: &SpectralDensityEstimate,
    m: usize,
    spacing: Spacing,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::param("need at least one band"));
    }
    let lmax = density.lambda_max();
    let mut ends = Vec::with_capacity(m + 1);
    ends.push(0.0);
    for k in 1..m {
        let log_frac = 0.5f64.powi((m - k) as i32);
        let t = match spacing {
            Spacing::UniformLinear => lmax * k as f64 / m as f64,
            Spacing::UniformLog => lmax * log_frac,
            Spacing::AdaptedLinear => density.cdf_inverse(k as f64 / m as f64),
            Spacing::AdaptedLog => density.cdf_inverse(log_frac),
        };
        let prev = *ends.last().unwrap();
        if t <= prev {
            warn!("band end {k} collapses onto its predecessor; nudging it up");
            ends.push(prev + 1e-9 * lmax);
        } else {
            ends.push(t);
        }
    }
    ends.push(lmax * (1.0 + TOP_MARGIN));
    Ok(ends)
}

/// The adjustment objective: a symmetric difference quotient of `P̃`.
pub fn density_objective(density: &SpectralDensityEstimate, tau: f64, delta: f64) -> f64 {
    (density.cdf(tau + delta) - density.cdf(tau - delta)) / (2.0 * delta)
}

/// Moves each interior band end to the least dense point of
/// `[τ_m - r, τ_m + r]`, `r` being half the smaller neighbouring gap.
/// Near-ties go to the point closest to `τ_m`, then to the smaller one.
pub fn adjust_band_ends(
    density: &SpectralDensityEstimate,
    initial: &[f64],
    delta: f64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    if initial.len() < 2 || initial.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("band ends must be strictly increasing"));
    }
    let m = initial.len() - 1;
    let mut out = initial.to_vec();
    for k in 1..m {
        let tau = initial[k];
        let r = 0.5 * (tau - initial[k - 1]).min(initial[k + 1] - tau);
        let floor = out[k - 1];
        let mut best: Option<(f64, f64)> = None;
        let mut cands = Vec::with_capacity(ADJUST_GRID);
        for g in 0..ADJUST_GRID {
            let t = tau - r + 2.0 * r * g as f64 / (ADJUST_GRID - 1) as f64;
            if t <= floor {
                continue;
            }
            let v = density_objective(density, t, delta);
            cands.push((t, v));
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((t, v));
            }
        }
        let Some((_, min_v)) = best else {
            continue;
        };
        // the quotient carries roundoff of order eps/Δ, so compare loosely
        let tie = TIE_RTOL * min_v.abs().max(f64::MIN_POSITIVE);
        let chosen = cands
            .iter()
            .filter(|(_, v)| *v <= min_v + tie)
            .min_by(|a, b| {
                (a.0 - tau)
                    .abs()
                    .total_cmp(&(b.0 - tau).abs())
                    .then(a.0.total_cmp(&b.0))
            })
            .unwrap()
            .0;
        out[k] = chosen;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankDesign {
    pub mode: Spacing,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub lambda_max: f64,
    pub initial_ends: Vec<f64>,
    pub adjusted_ends: Vec<f64>,
    /// Damped coefficients, one row per band.
    pub alpha: Vec<Vec<f64>>,
}

impl FilterBankDesign {
    pub fn n_bands(&self) -> usize {
        self.alpha.len()
    }

    pub fn filter(&self, m: usize) -> PolynomialFilter {
        PolynomialFilter {
            alpha: self.alpha[m].clone(),
            band: (self.adjusted_ends[m], self.adjusted_ends[m + 1]),
            lambda_max: self.lambda_max,
            damped: true,
        }
    }

    pub fn filters(&self) -> Vec<PolynomialFilter> {
        (0..self.n_bands()).map(|m| self.filter(m)).collect()
    }

    /// CSV `lambda,h1,..,hM` on `points` equally spaced values of `[0, λmax]`.
    pub fn response_table(&self, points: usize) -> String {
        let filters = self.filters();
        let mut s = String::from("lambda");
        for m in 1..=filters.len() {
            write!(s, ",h{m}").unwrap();
        }
        s.push('\n');
        for i in 0..points {
            let l = self.lambda_max * i as f64 / (points.max(2) - 1) as f64;
            write!(s, "{l:e}").unwrap();
            for f in &filters {
                write!(s, ",{:e}", f.eval(l)).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Initial ends, adjustment, then one damped degree-`K` filter per band.
pub fn build_filter_bank(
    density: &SpectralDensityEstimate,
    m: usize,
    spacing: Spacing,
    k: usize,
    delta: f64,
) -> Result<FilterBankDesign> {
    let initial = initial_band_ends(density, m, spacing)?;
    let adjusted = adjust_band_ends(density, &initial, delta)?;
    let lmax = density.lambda_max();
    let alpha = adjusted
        .windows(2)
        .map(|w| make_polynomial_filter(w[0], w[1], lmax, k, true).map(|f| f.alpha))
        .collect::<Result<_>>()?;
    Ok(FilterBankDesign {
        mode: spacing,
        k,
        delta,
        lambda_max: lmax,
        initial_ends: initial,
        adjusted_ends: adjusted,
        alpha,
    })
}
