//! Shifted Chebyshev polynomial filters.
//!
//! On `[0, λmax]` the shifted polynomials are `T̄_k(λ) = T_k(2λ/λmax - 1)`.
//! A filter is a coefficient vector `α` with `h̃(λ) = Σ α_k T̄_k(λ)`, applied
//! to signals through the three-term recurrence
//! `T̄_k(L) x = (4/λmax)(L - λmax/2) T̄_{k-1}(L) x - T̄_{k-2}(L) x`,
//! so a degree-`K` filter costs `K` Laplacian products.

mod density;

pub use density::{
    estimate_cdf, estimate_eigencount, CacheStorage, ChebyshevBasisCache, SpectralDensityEstimate,
    DEFAULT_CACHE_BUDGET,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;

/// Degree used for density estimation.
pub const DEFAULT_DENSITY_DEGREE: usize = 80;
/// Degree used for the transform filters.
pub const DEFAULT_FILTER_DEGREE: usize = 50;
pub const DEFAULT_PROBES: usize = 30;
pub const DEFAULT_T_POINTS: usize = 50;

/// Relative tolerance when checking that a filter and an operator agree on λmax.
const LAMBDA_MAX_RTOL: f64 = 1e-9;

fn phi(tau: f64, lambda_max: f64) -> f64 {
    (2.0 * tau / lambda_max - 1.0).clamp(-1.0, 1.0).acos()
}

/// Chebyshev expansion coefficients `c_0..c_K` of the indicator of
/// `[tau_a, tau_b)` on `[0, lambda_max]`, in closed form. `tau_b` beyond
/// `lambda_max` is clamped.
pub fn step_filter_coefficients(
    tau_a: f64,
    tau_b: f64,
    lambda_max: f64,
    k: usize,
) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::param(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    if !(tau_a >= 0.0 && tau_a < tau_b) {
        return Err(Error::param(format!(
            "band [{tau_a}, {tau_b}) is empty or starts below zero"
        )));
    }
    let tau_b = tau_b.min(lambda_max);
    let (pa, pb) = (phi(tau_a, lambda_max), phi(tau_b, lambda_max));
    let mut c = Vec::with_capacity(k + 1);
    c.push(2.0 / PI * (pa - pb));
    for j in 1..=k {
        let jf = j as f64;
        c.push(2.0 / (jf * PI) * ((jf * pa).sin() - (jf * pb).sin()));
    }
    Ok(c)
}

/// Jackson damping factors `γ_{0,K}..γ_{K,K}`; slot 0 is exactly 1.
pub fn jackson_damping(k: usize) -> Vec<f64> {
    let a = PI / (k as f64 + 2.0);
    let mut g = Vec::with_capacity(k + 1);
    g.push(1.0);
    for j in 1..=k {
        let jf = j as f64;
        let num = (1.0 - jf / (k as f64 + 2.0)) * a.sin() * (jf * a).cos()
            + 1.0 / (k as f64 + 2.0) * a.cos() * (jf * a).sin();
        g.push(num / a.sin());
    }
    g
}

/// Evaluates `Σ α_k T̄_k(λ)` by Clenshaw's recurrence.
pub fn eval_series(alpha: &[f64], lambda_max: f64, lambda: f64) -> f64 {
    let y = 2.0 * lambda / lambda_max - 1.0;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &a in alpha.iter().skip(1).rev() {
        let b0 = a + 2.0 * y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    alpha.first().copied().unwrap_or(0.0) + y * b1 - b2
}

/// Degree-`k` Chebyshev interpolant of `f` on `[0, lambda_max]`, returned as
/// series coefficients (constant term already halved). No damping.
pub fn chebyshev_fit(f: impl Fn(f64) -> f64, lambda_max: f64, k: usize) -> Vec<f64> {
    let nodes = (4 * (k + 1)).max(1024);
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|j| {
            let theta = PI * (j as f64 + 0.5) / nodes as f64;
            (theta, f(lambda_max * (theta.cos() + 1.0) / 2.0))
        })
        .collect();
    let mut alpha: Vec<f64> = (0..=k)
        .map(|m| {
            2.0 / nodes as f64
                * samples
                    .iter()
                    .map(|(t, v)| v * (m as f64 * t).cos())
                    .sum::<f64>()
        })
        .collect();
    alpha[0] /= 2.0;
    alpha
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFilter {
    pub alpha: Vec<f64>,
    /// The ideal band `[τ_a, τ_b)` this filter approximates.
    pub band: (f64, f64),
    pub lambda_max: f64,
    pub damped: bool,
}

impl PolynomialFilter {
    /// `h̃ ≡ 1` at degree `k`.
    pub fn allpass(lambda_max: f64, k: usize) -> Self {
        let mut alpha = vec![0.0; k + 1];
        alpha[0] = 1.0;
        PolynomialFilter {
            alpha,
            band: (0.0, lambda_max),
            lambda_max,
            damped: false,
        }
    }

    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        eval_series(&self.alpha, self.lambda_max, lambda)
    }
}

/// Jackson–Chebyshev (or plain truncated) approximation of the indicator of
/// `[tau_a, tau_b)`.
pub fn make_polynomial_filter(
    tau_a: f64,
    tau_b: f64,
    lambda_max: f64,
    k: usize,
    damped: bool,
) -> Result<PolynomialFilter> {
    let c = step_filter_coefficients(tau_a, tau_b, lambda_max, k)?;
    let mut alpha = c;
    alpha[0] /= 2.0;
    if damped {
        for (a, g) in alpha.iter_mut().zip(jackson_damping(k)).skip(1) {
            *a *= g;
        }
    }
    Ok(PolynomialFilter {
        alpha,
        band: (tau_a, tau_b),
        lambda_max,
        damped,
    })
}

pub(crate) fn check_lambda_max(op: &LaplacianOperator, lambda_max: f64) -> Result<()> {
    let have = op.require_lambda_max()?;
    if (have - lambda_max).abs() > LAMBDA_MAX_RTOL * lambda_max.abs() {
        return Err(Error::LambdaMaxMismatch {
            operator: have,
            filter: lambda_max,
        });
    }
    Ok(())
}

/// Applies several coefficient vectors to the row-major `n x cols` block `x`
/// in a single recurrence pass. Costs `cols · max_degree` products.
pub(crate) fn apply_series_block(
    op: &LaplacianOperator,
    lambda_max: f64,
    alphas: &[&[f64]],
    x: &[f64],
    cols: usize,
) -> Vec<Vec<f64>> {
    let len = x.len();
    let k_max = alphas
        .iter()
        .map(|a| a.len().saturating_sub(1))
        .max()
        .unwrap_or(0);
    let mut outs: Vec<Vec<f64>> = alphas
        .iter()
        .map(|a| {
            x.iter()
                .map(|v| a.first().copied().unwrap_or(0.0) * v)
                .collect()
        })
        .collect();
    if k_max == 0 {
        return outs;
    }
    let mut prev = x.to_vec();
    let mut cur = vec![0.0; len];
    let mut next = vec![0.0; len];
    op.apply_block(&prev, &mut cur, cols);
    let s = 2.0 / lambda_max;
    for (c, p) in cur.iter_mut().zip(&prev) {
        *c = s * *c - p;
    }
    accumulate(&mut outs, alphas, 1, &cur);
    for k in 2..=k_max {
        op.apply_block(&cur, &mut next, cols);
        for ((nv, c), p) in next.iter_mut().zip(&cur).zip(&prev) {
            *nv = 2.0 * (s * *nv - c) - p;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        accumulate(&mut outs, alphas, k, &cur);
    }
    outs
}

fn accumulate(outs: &mut [Vec<f64>], alphas: &[&[f64]], k: usize, tk: &[f64]) {
    for (out, a) in outs.iter_mut().zip(alphas) {
        if let Some(&ak) = a.get(k) {
            if ak != 0.0 {
                for (o, t) in out.iter_mut().zip(tk) {
                    *o += ak * t;
                }
            }
        }
    }
}

/// `h̃(L) f` by the running recurrence.
pub fn apply_filter(
    op: &LaplacianOperator,
    filter: &PolynomialFilter,
    f: &[f64],
) -> Result<Vec<f64>> {
    if f.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            got: f.len(),
        });
    }
    check_lambda_max(op, filter.lambda_max)?;
    Ok(
        apply_series_block(op, filter.lambda_max, &[&filter.alpha], f, 1)
            .pop()
            .unwrap(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, GraphKind};
    use crate::laplacian::{build_laplacian, LaplacianKind};
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature, used as an independent oracle.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = (a + b) / 2.0;
            let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
        rec(
            f,
            a,
            b,
            fa,
            fm,
            fb,
            (b - a) / 6.0 * (fa + 4.0 * fm + fb),
            tol,
            60,
        )
    }

    /// `c_k = (2/π) ∫_0^π h(λmax (cos θ + 1)/2) cos(kθ) dθ`, integrated
    /// panelwise with panel edges at the jumps of `h` (given as θ values).
    fn quadrature_coefficient(h: &dyn Fn(f64) -> f64, lmax: f64, k: usize, jumps: &[f64]) -> f64 {
        let g = |t: f64| h(lmax * (t.cos() + 1.0) / 2.0) * (k as f64 * t).cos();
        let mut edges = vec![0.0, PI];
        edges.extend_from_slice(jumps);
        edges.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let panels = 64;
            let step = (w[1] - w[0]) / panels as f64;
            for i in 0..panels {
                let (a, b) = (w[0] + i as f64 * step, w[0] + (i + 1) as f64 * step);
                // stay off the jump itself
                let pad = 1e-15 * (b - a);
                total += simpson(&g, a + pad, b - pad, 1e-14);
            }
        }
        2.0 / PI * total
    }

    fn grid(lmax: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| lmax * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn full_band_is_constant_two() {
        let c = step_filter_coefficients(0.0, 7.0, 7.0, 20).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-15);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));
        let f = make_polynomial_filter(0.0, 7.0, 7.0, 20, true).unwrap();
        assert!(grid(7.0, 101).all(|l| (f.eval(l) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn half_band_low_order_terms() {
        let c = step_filter_coefficients(0.0, 2.0, 4.0, 3).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] + 2.0 / PI).abs() < 1e-15);
        // trapezoid rule with 10^4 panels in θ
        let panels = 10_000;
        let h = |l: f64| if l < 2.0 { 1.0 } else { 0.0 };
        for k in 0..=1 {
            let mut s = 0.0;
            for i in 0..=panels {
                let t = PI * i as f64 / panels as f64;
                let w = if i == 0 || i == panels { 0.5 } else { 1.0 };
                s += w * h(4.0 * (t.cos() + 1.0) / 2.0) * (k as f64 * t).cos();
            }
            let trap = 2.0 / PI * s * PI / panels as f64;
            assert!((trap - c[k]).abs() < 1e-3, "k={k}: {trap} vs {}", c[k]);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let lmax = 9.3;
        for &(a, b) in &[(0.0, 1.1), (2.5, 6.0), (4.0, 9.3), (0.3, 0.31)] {
            let c = step_filter_coefficients(a, b, lmax, 100).unwrap();
            // the top band is closed at λmax, where cos θ rounds to 1 for tiny θ
            let h = move |l: f64| {
                if l >= a && (l < b || b >= lmax) {
                    1.0
                } else {
                    0.0
                }
            };
            let theta = |l: f64| (2.0 * l / lmax - 1.0_f64).clamp(-1.0, 1.0).acos();
            for k in [0, 1, 2, 7, 31, 64, 100] {
                let q = quadrature_coefficient(&h, lmax, k, &[theta(a), theta(b)]);
                assert!(
                    (q - c[k]).abs() < 1e-8,
                    "band [{a},{b}) k={k}: {q} vs {}",
                    c[k]
                );
            }
        }
    }

    #[test]
    fn rejects_empty_band() {
        assert!(step_filter_coefficients(2.0, 2.0, 4.0, 5).is_err());
        assert!(step_filter_coefficients(-1.0, 2.0, 4.0, 5).is_err());
    }

    #[test]
    fn jackson_factors() {
        assert_eq!(jackson_damping(0), vec![1.0]);
        assert!((jackson_damping(1)[1] - 0.5).abs() < 1e-15);
        for k in 0..=200 {
            let g = jackson_damping(k);
            assert_eq!(g[0], 1.0);
            assert!(g.iter().all(|&v| v > 0.0 && v <= 1.0), "K={k}");
            assert!(g.windows(2).all(|w| w[1] <= w[0]), "K={k}");
        }
    }

    #[test]
    fn damped_half_band_stays_in_unit_interval_and_undamped_overshoots() {
        let lmax = 10.0;
        let damped = make_polynomial_filter(0.0, 5.0, lmax, 80, true).unwrap();
        let raw = make_polynomial_filter(0.0, 5.0, lmax, 80, false).unwrap();
        let mut peak = f64::NEG_INFINITY;
        for l in grid(lmax, 10_000) {
            let v = damped.eval(l);
            assert!((0.0..=1.0 + 1e-6).contains(&v), "h({l}) = {v}");
            peak = peak.max(raw.eval(l));
        }
        assert!(peak > 1.01, "peak {peak}");
    }

    #[test]
    fn clenshaw_matches_trig_definition() {
        let alpha = [0.3, -1.2, 0.7, 0.05, 2.0];
        for l in grid(3.0, 37) {
            let t = (2.0 * l / 3.0 - 1.0_f64).clamp(-1.0, 1.0).acos();
            let direct: f64 = alpha
                .iter()
                .enumerate()
                .map(|(k, a)| a * (k as f64 * t).cos())
                .sum();
            assert!((eval_series(&alpha, 3.0, l) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_reproduces_low_degree_polynomials() {
        let alpha = chebyshev_fit(|l| 1.0 + l - 0.25 * l * l, 4.0, 10);
        for l in grid(4.0, 50) {
            assert!((eval_series(&alpha, 4.0, l) - (1.0 + l - 0.25 * l * l)).abs() < 1e-12);
        }
        assert!(alpha[3..].iter().all(|a| a.abs() < 1e-13));
    }

    fn ring_operator(n: usize) -> LaplacianOperator {
        let g = generate_graph(&GraphKind::Ring { n }, 0).unwrap();
        let mut l = build_laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        l.estimate_lambda_max(50, 1).unwrap();
        l
    }

    #[test]
    fn allpass_and_affine_filters() {
        let l = ring_operator(12);
        let lmax = l.lambda_max().unwrap();
        let f: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = apply_filter(&l, &PolynomialFilter::allpass(lmax, 9), &f).unwrap();
        assert!(out.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
        // λ = (λmax/2)(T̄_0 + T̄_1)
        let lin = PolynomialFilter {
            alpha: vec![lmax / 2.0, lmax / 2.0],
            band: (0.0, lmax),
            lambda_max: lmax,
            damped: false,
        };
        let out = apply_filter(&l, &lin, &f).unwrap();
        let lf = l.matvec(&f).unwrap();
        assert!(out.iter().zip(&lf).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn degree_k_filter_costs_k_products_and_checks_lambda_max() {
        let l = ring_operator(10);
        let lmax = l.lambda_max().unwrap();
        let filt = make_polynomial_filter(0.0, lmax / 3.0, lmax, 17, true).unwrap();
        l.reset_matvec_count();
        apply_filter(&l, &filt, &[1.0; 10]).unwrap();
        assert_eq!(l.matvec_count(), 17);
        let off = make_polynomial_filter(0.0, 1.0, lmax * 1.001, 5, true).unwrap();
        assert!(matches!(
            apply_filter(&l, &off, &[1.0; 10]),
            Err(Error::LambdaMaxMismatch { .. })
        ));
        assert!(matches!(
            apply_filter(&l, &filt, &[1.0; 9]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn filtering_is_linear(
            f in proptest::collection::vec(-5.0f64..5.0, 16),
            g in proptest::collection::vec(-5.0f64..5.0, 16),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            cut in 0.1f64..0.9,
        ) {
            let l = ring_operator(16);
            let lmax = l.lambda_max().unwrap();
            let filt = make_polynomial_filter(0.0, cut * lmax, lmax, 30, true).unwrap();
            let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = apply_filter(&l, &filt, &comb).unwrap();
            let af = apply_filter(&l, &filt, &f).unwrap();
            let bg = apply_filter(&l, &filt, &g).unwrap();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err: Vec<f64> = (0..16).map(|i| lhs[i] - a * af[i] - b * bg[i]).collect();
            let scale = norm(&f) * a.abs() + norm(&g) * b.abs();
            prop_assert!(norm(&err) <= 1e-10 * scale.max(1e-300));
        }
    }
}
