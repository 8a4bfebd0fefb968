//! Fast-transform reconstruction.
//!
//! Band `m` is recovered from its samples `y` on `V_m` by minimizing
//! `κ (Mz - y)ᵀ Ω⁻¹ (Mz - y) + zᵀ φ_m(L) z`, where `M` selects the sampled
//! vertices, `Ω` holds their sampling probabilities and `φ_m` is a penalty
//! that vanishes on band `m`. The normal equations are solved matrix-free by
//! preconditioned conjugate gradients, and the band estimates are summed.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheby::{
    apply_series_block, chebyshev_fit, check_lambda_max, eval_series, PolynomialFilter,
};
use crate::coeffs::AnalysisCoefficients;
use crate::design::FilterBankDesign;
use crate::error::{Error, Result};
use crate::laplacian::{dot, LaplacianOperator};
use crate::sampling::SamplingPlan;

/// `(√5 - 1)/2`, the default offset of the rational penalty.
pub const DEFAULT_EPSILON: f64 = 0.618_033_988_749_894_9;
/// Spline transition width as a fraction of the band width.
pub const SPLINE_WIDTH_FRACTION: f64 = 0.1;
const RIDGE_FLOOR: f64 = 1e-8;
const OMEGA_FLOOR: f64 = 1e-12;
const PENALTY_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// `1 - h̃_m`
    OneMinusH,
    /// `1/(h̃_m + ε) - 1/(1 + ε)`
    #[default]
    Rational,
    /// 0 inside the band, 1 outside, cubic transitions.
    Spline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFilter {
    pub kind: PenaltyKind,
    pub epsilon: f64,
    pub alpha: Vec<f64>,
    pub lambda_max: f64,
    /// Added to `φ(L)` so that `φ(L) + ridge·I` is positive semidefinite.
    pub ridge: f64,
}

impl PenaltyFilter {
    pub fn eval(&self, lambda: f64) -> f64 {
        eval_series(&self.alpha, self.lambda_max, lambda)
    }

    fn with_ridge(kind: PenaltyKind, epsilon: f64, alpha: Vec<f64>, lambda_max: f64) -> Self {
        let min = (0..PENALTY_GRID)
            .map(|i| {
                eval_series(
                    &alpha,
                    lambda_max,
                    lambda_max * i as f64 / (PENALTY_GRID - 1) as f64,
                )
            })
            .fold(f64::INFINITY, f64::min);
        PenaltyFilter {
            kind,
            epsilon,
            alpha,
            lambda_max,
            ridge: (-min).max(0.0) + RIDGE_FLOOR,
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// The spline penalty before fitting: 0 on `[a + w, b - w]`, 1 outside
/// `[a - w, b + w]`. No transition is placed at `a = 0` or at `b >= λmax`.
pub fn spline_penalty(a: f64, b: f64, w: f64, lambda_max: f64) -> impl Fn(f64) -> f64 {
    let lower = a > 0.0;
    let upper = b < lambda_max;
    move |l: f64| {
        if lower && l < a + w {
            smoothstep((a + w - l) / (2.0 * w))
        } else if upper && l > b - w {
            smoothstep((l - b + w) / (2.0 * w))
        } else {
            0.0
        }
    }
}

/// A degree-`k` penalty for the band of `filter`.
pub fn build_penalty(
    filter: &PolynomialFilter,
    kind: PenaltyKind,
    k: usize,
    epsilon: f64,
) -> Result<PenaltyFilter> {
    let lmax = filter.lambda_max;
    let alpha = match kind {
        PenaltyKind::OneMinusH => {
            let mut a: Vec<f64> = filter.alpha.iter().map(|v| -v).collect();
            a.resize(k.max(filter.degree()) + 1, 0.0);
            a[0] += 1.0;
            a
        }
        PenaltyKind::Rational => {
            if !(epsilon > 0.0) {
                return Err(Error::param(format!(
                    "epsilon must be positive, got {epsilon}"
                )));
            }
            let top = 1.0 / (1.0 + epsilon);
            chebyshev_fit(|l| 1.0 / (filter.eval(l) + epsilon) - top, lmax, k)
        }
        PenaltyKind::Spline => {
            let (a, b) = filter.band;
            let width = b.min(lmax) - a;
            if !(width > 0.0) {
                return Err(Error::param(format!("band [{a}, {b}) is empty")));
            }
            let mut w = SPLINE_WIDTH_FRACTION * width;
            if 2.0 * w > width {
                warn!("band [{a}, {b}) is narrower than two transition widths; shrinking them");
                w = 0.5 * width;
            }
            chebyshev_fit(spline_penalty(a, b, w, lmax), lmax, k)
        }
    };
    Ok(PenaltyFilter::with_ridge(kind, epsilon, alpha, lmax))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub kappa: f64,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    pub penalty: PenaltyKind,
    pub epsilon: f64,
}

impl SynthesisConfig {
    /// Loose and fast: tolerance 1e-8, at most 100 iterations.
    pub fn scenario_a() -> Self {
        SynthesisConfig {
            cg_tolerance: 1e-8,
            cg_max_iters: 100,
            ..Self::scenario_b()
        }
    }

    /// Tolerance 1e-10, at most 250 iterations.
    pub fn scenario_b() -> Self {
        SynthesisConfig {
            kappa: 1.0,
            cg_tolerance: 1e-10,
            cg_max_iters: 250,
            penalty: PenaltyKind::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::param(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return Err(Error::param(format!(
                "CG tolerance must lie in (0, 1), got {}",
                self.cg_tolerance
            )));
        }
        Ok(())
    }
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self::scenario_b()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iters: usize,
    /// Relative residual `‖b - Az‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    pub n_samples: usize,
}

/// Preconditioned conjugate gradients on `A z = b` with a diagonal
/// preconditioner, starting from zero. `observe` sees every iterate. On
/// non-convergence the iterate with the smallest residual is returned.
pub fn pcg(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    precond_diag: &[f64],
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(&[f64]),
) -> (Vec<f64>, usize, f64, bool) {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (x, 0, 0.0, true);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond_diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut best = (x.clone(), 1.0);
    let mut rel = 1.0;
    let mut iters = 0;
    while iters < max_iters && rel > tol {
        apply_a(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += step * pi;
            *ri -= step * api;
        }
        iters += 1;
        observe(&x);
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        for ((zi, ri), d) in z.iter_mut().zip(&r).zip(precond_diag) {
            *zi = ri / d;
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let converged = best.1 <= tol;
    (best.0, iters, best.1, converged)
}

/// The system matrix of one band's reconstruction,
/// `A = κ MᵀΩ⁻¹M + φ(L) + ridge·I`, applied matrix-free.
pub struct BandSystem<'a> {
    op: &'a LaplacianOperator,
    penalty: &'a PenaltyFilter,
    vertices: &'a [usize],
    /// `κ / ω(i)` for each sampled vertex.
    sample_gain: Vec<f64>,
}

impl<'a> BandSystem<'a> {
    pub fn new(
        op: &'a LaplacianOperator,
        penalty: &'a PenaltyFilter,
        vertices: &'a [usize],
        omega: &[f64],
        kappa: f64,
    ) -> Result<Self> {
        check_lambda_max(op, penalty.lambda_max)?;
        if vertices.len() != omega.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                got: omega.len(),
            });
        }
        if let Some(&v) = vertices.iter().find(|&&v| v >= op.n()) {
            return Err(Error::param(format!("sampled vertex {v} is out of range")));
        }
        let sample_gain = omega.iter().map(|w| kappa / w.max(OMEGA_FLOOR)).collect();
        Ok(BandSystem {
            op,
            penalty,
            vertices,
            sample_gain,
        })
    }

    /// `y = A x`; one penalty application, `K` Laplacian products.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let phi = apply_series_block(
            self.op,
            self.penalty.lambda_max,
            &[&self.penalty.alpha],
            x,
            1,
        )
        .pop()
        .unwrap();
        for ((yi, p), xi) in y.iter_mut().zip(phi).zip(x) {
            *yi = p + self.penalty.ridge * xi;
        }
        for (&v, g) in self.vertices.iter().zip(&self.sample_gain) {
            y[v] += g * x[v];
        }
    }

    /// `κ MᵀΩ⁻¹ y`.
    pub fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.op.n()];
        for ((&v, g), yi) in self.vertices.iter().zip(&self.sample_gain).zip(y) {
            b[v] += g * yi;
        }
        b
    }

    /// 1 off the samples, `1 + κ/ω(i)` on them.
    pub fn preconditioner(&self) -> Vec<f64> {
        let mut d = vec![1.0; self.op.n()];
        for (&v, g) in self.vertices.iter().zip(&self.sample_gain) {
            d[v] += g;
        }
        d
    }
}

/// Reconstructs one band from its samples. An empty band gives zero.
pub fn pcg_solve(
    op: &LaplacianOperator,
    penalty: &PenaltyFilter,
    vertices: &[usize],
    omega: &[f64],
    y: &[f64],
    config: &SynthesisConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    config.validate()?;
    if y.len() != vertices.len() {
        return Err(Error::DimensionMismatch {
            expected: vertices.len(),
            got: y.len(),
        });
    }
    if vertices.is_empty() {
        return Ok((
            vec![0.0; op.n()],
            SolveReport {
                iters: 0,
                residual: 0.0,
                converged: true,
                n_samples: 0,
            },
        ));
    }
    let sys = BandSystem::new(op, penalty, vertices, omega, config.kappa)?;
    let b = sys.rhs(y);
    let (z, iters, residual, converged) = pcg(
        |x, out| sys.apply(x, out),
        &b,
        &sys.preconditioner(),
        config.cg_tolerance,
        config.cg_max_iters,
        |_| {},
    );
    if !converged {
        warn!("CG stopped after {iters} iterations at relative residual {residual:e}");
    }
    Ok((
        z,
        SolveReport {
            iters,
            residual,
            converged,
            n_samples: vertices.len(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub bands: Vec<SolveReport>,
}

/// Sums the per-band reconstructions (solved concurrently, summed in band
/// order) and adds back the stored mean.
pub fn synthesize_fast(
    op: &LaplacianOperator,
    bank: &FilterBankDesign,
    plan: &SamplingPlan,
    coeffs: &AnalysisCoefficients,
    config: &SynthesisConfig,
) -> Result<(Vec<f64>, SynthesisReport)> {
    config.validate()?;
    let m = bank.n_bands();
    if plan.bands.len() != m || coeffs.bands.len() != m {
        return Err(Error::ArtifactMismatch(format!(
            "filter bank has {m} bands, plan {}, coefficients {}",
            plan.bands.len(),
            coeffs.bands.len()
        )));
    }
    for (k, (p, c)) in plan.bands.iter().zip(&coeffs.bands).enumerate() {
        if p.vertices != c.vertices || c.values.len() != c.vertices.len() {
            return Err(Error::ArtifactMismatch(format!(
                "band {} coefficients are not on the planned vertices",
                k + 1
            )));
        }
    }
    let parts = (0..m)
        .into_par_iter()
        .map(|k| {
            let penalty = build_penalty(&bank.filter(k), config.penalty, bank.k, config.epsilon)?;
            let p = &plan.bands[k];
            pcg_solve(
                op,
                &penalty,
                &p.vertices,
                &p.sampled_weights,
                &coeffs.bands[k].values,
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![coeffs.mean.unwrap_or(0.0); op.n()];
    let mut reports = Vec::with_capacity(m);
    for (z, rep) in parts {
        for (o, v) in out.iter_mut().zip(&z) {
            *o += v;
        }
        reports.push(rep);
    }
    Ok((out, SynthesisReport { bands: reports }))
}
