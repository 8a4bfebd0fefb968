//! Stochastic eigenvalue counting and the cumulative spectral density.
//!
//! A block `X` of `J` Gaussian probe vectors is pushed through the Chebyshev
//! recurrence once. The moments `μ_k = ⟨X, T̄_k(L) X⟩ / J` are always kept,
//! so any later eigencount estimate `Σ α_k μ_k` is free. Keeping every
//! `T̄_k(L) X` as well costs `(K+1)·N·J` reals; when that exceeds the budget
//! the cache stores only `X` and recomputes the recurrence on demand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{apply_series_block, check_lambda_max, make_polynomial_filter, PolynomialFilter};
use crate::error::{Error, Result};
use crate::laplacian::{dot, LaplacianOperator};
use crate::pchip::Pchip;

/// Largest `(K+1)·N·J` stored under [`CacheStorage::Auto`]: 2^25 reals, 256 MiB.
pub const DEFAULT_CACHE_BUDGET: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheStorage {
    /// Keep every `T̄_k(L) X`.
    Full,
    /// Keep only `X` and the moments.
    Streaming,
    /// Full storage when it fits in `budget_reals`, streaming otherwise.
    Auto { budget_reals: usize },
}

impl Default for CacheStorage {
    fn default() -> Self {
        CacheStorage::Auto {
            budget_reals: DEFAULT_CACHE_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChebyshevBasisCache {
    n: usize,
    probes: usize,
    degree: usize,
    lambda_max: f64,
    seed: u64,
    /// Row-major `N x J`.
    x: Vec<f64>,
    moments: Vec<f64>,
    /// `(K+1)` consecutive row-major `N x J` blocks, when stored.
    terms: Option<Vec<f64>>,
}

impl ChebyshevBasisCache {
    /// Runs the recurrence on `J` seeded Gaussian probes up to degree `K`.
    /// Costs exactly `K·J` Laplacian products.
    pub fn build(
        op: &LaplacianOperator,
        degree: usize,
        probes: usize,
        seed: u64,
        storage: CacheStorage,
    ) -> Result<Self> {
        if degree == 0 || probes == 0 {
            return Err(Error::param("basis cache needs K >= 1 and J >= 1"));
        }
        let lambda_max = op.require_lambda_max()?;
        let n = op.n();
        let block = n * probes;
        let full_reals = (degree + 1).checked_mul(block).ok_or(Error::Allocation {
            reals: usize::MAX,
            bytes: usize::MAX,
        })?;
        let keep = match storage {
            CacheStorage::Full => true,
            CacheStorage::Streaming => false,
            CacheStorage::Auto { budget_reals } => full_reals <= budget_reals,
        };
        let mut terms = if keep {
            let mut v = Vec::new();
            v.try_reserve_exact(full_reals)
                .map_err(|_| Error::Allocation {
                    reals: full_reals,
                    bytes: full_reals.saturating_mul(8),
                })?;
            Some(v)
        } else {
            None
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..block)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let inv_j = 1.0 / probes as f64;
        let mut moments = Vec::with_capacity(degree + 1);
        moments.push(dot(&x, &x) * inv_j);
        if let Some(t) = terms.as_mut() {
            t.extend_from_slice(&x);
        }

        let s = 2.0 / lambda_max;
        let mut prev = x.clone();
        let mut cur = vec![0.0; block];
        let mut next = vec![0.0; block];
        op.apply_block(&prev, &mut cur, probes);
        for (c, p) in cur.iter_mut().zip(&prev) {
            *c = s * *c - p;
        }
        moments.push(dot(&x, &cur) * inv_j);
        if let Some(t) = terms.as_mut() {
            t.extend_from_slice(&cur);
        }
        for _ in 2..=degree {
            op.apply_block(&cur, &mut next, probes);
            for ((nv, c), p) in next.iter_mut().zip(&cur).zip(&prev) {
                *nv = 2.0 * (s * *nv - c) - p;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            moments.push(dot(&x, &cur) * inv_j);
            if let Some(t) = terms.as_mut() {
                t.extend_from_slice(&cur);
            }
        }
        Ok(ChebyshevBasisCache {
            n,
            probes,
            degree,
            lambda_max,
            seed,
            x,
            moments,
            terms,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The probe block `X`, row-major `N x J`.
    pub fn probes_block(&self) -> &[f64] {
        &self.x
    }

    /// `μ_k = ⟨X, T̄_k(L) X⟩ / J` for `k = 0..=K`.
    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn is_stored(&self) -> bool {
        self.terms.is_some()
    }

    /// `T̄_k(L) X`, if the full basis is stored.
    pub fn term(&self, k: usize) -> Option<&[f64]> {
        let block = self.n * self.probes;
        self.terms
            .as_ref()
            .filter(|_| k <= self.degree)
            .map(|t| &t[k * block..(k + 1) * block])
    }

    /// `h̃(L) X` for each coefficient vector, row-major `N x J`. Free when the
    /// basis is stored; one recurrence pass (`K·J` products) otherwise.
    pub fn filter_probes(
        &self,
        op: &LaplacianOperator,
        alphas: &[&[f64]],
    ) -> Result<Vec<Vec<f64>>> {
        if let Some(a) = alphas
            .iter()
            .find(|a| a.len() > self.degree + 1 || a.is_empty())
        {
            return Err(Error::param(format!(
                "filter of degree {} does not fit a cache of degree {}",
                a.len() as isize - 1,
                self.degree
            )));
        }
        if self.terms.is_some() {
            let block = self.n * self.probes;
            return Ok(alphas
                .iter()
                .map(|a| {
                    let mut out = vec![0.0; block];
                    for (k, &ak) in a.iter().enumerate() {
                        if ak != 0.0 {
                            for (o, t) in out.iter_mut().zip(self.term(k).unwrap()) {
                                *o += ak * t;
                            }
                        }
                    }
                    out
                })
                .collect());
        }
        if op.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: op.n(),
            });
        }
        check_lambda_max(op, self.lambda_max)?;
        Ok(apply_series_block(
            op,
            self.lambda_max,
            alphas,
            &self.x,
            self.probes,
        ))
    }
}

/// Hutchinson estimate of `trace h̃(L)`, the expected number of eigenvalues
/// passed by the filter. Uses only the stored moments.
pub fn estimate_eigencount(cache: &ChebyshevBasisCache, filter: &PolynomialFilter) -> Result<f64> {
    if filter.degree() > cache.degree {
        return Err(Error::param(format!(
            "filter degree {} exceeds cache degree {}",
            filter.degree(),
            cache.degree
        )));
    }
    if (filter.lambda_max - cache.lambda_max).abs() > 1e-9 * cache.lambda_max {
        return Err(Error::LambdaMaxMismatch {
            operator: cache.lambda_max,
            filter: filter.lambda_max,
        });
    }
    Ok(filter
        .alpha
        .iter()
        .zip(&cache.moments)
        .map(|(a, m)| a * m)
        .sum())
}

/// Estimated cumulative spectral distribution `P̃(z) ≈ #{λ_ℓ ≤ z} / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityRecord", try_from = "DensityRecord")]
pub struct SpectralDensityEstimate {
    lambda_max: f64,
    n_vertices: usize,
    xi: Vec<f64>,
    /// Post-processed counts; `counts[i] / N` is the interpolated value at `xi[i]`.
    counts: Vec<f64>,
    interp: Pchip,
}

#[derive(Serialize, Deserialize)]
struct DensityRecord {
    lambda_max: f64,
    n_vertices: usize,
    xi: Vec<f64>,
    counts: Vec<f64>,
    anchor_points: Vec<[f64; 2]>,
}

impl From<SpectralDensityEstimate> for DensityRecord {
    fn from(e: SpectralDensityEstimate) -> Self {
        DensityRecord {
            anchor_points: e.anchor_points().to_vec(),
            lambda_max: e.lambda_max,
            n_vertices: e.n_vertices,
            xi: e.xi,
            counts: e.counts,
        }
    }
}

impl TryFrom<DensityRecord> for SpectralDensityEstimate {
    type Error = Error;

    fn try_from(r: DensityRecord) -> Result<Self> {
        SpectralDensityEstimate::from_counts(r.lambda_max, r.n_vertices, r.xi, r.counts)
    }
}

impl SpectralDensityEstimate {
    /// Builds the interpolant from (possibly noisy) counts at `xi`, which must
    /// run from 0 to `lambda_max`. The end values are replaced by the anchors
    /// `(0, 1)` and `(λmax, N)`; interior counts are clamped to `[0, N]` and
    /// made nondecreasing by a running maximum.
    pub fn from_counts(
        lambda_max: f64,
        n_vertices: usize,
        xi: Vec<f64>,
        raw_counts: Vec<f64>,
    ) -> Result<Self> {
        if xi.len() != raw_counts.len() {
            return Err(Error::DimensionMismatch {
                expected: xi.len(),
                got: raw_counts.len(),
            });
        }
        if xi.len() < 3 || n_vertices == 0 {
            return Err(Error::param(
                "density estimate needs at least 3 points and 1 vertex",
            ));
        }
        if xi[0] != 0.0 || (xi[xi.len() - 1] - lambda_max).abs() > 1e-12 * lambda_max {
            return Err(Error::param(
                "density sample points must span [0, lambda_max]",
            ));
        }
        let nf = n_vertices as f64;
        let last = raw_counts.len() - 1;
        let mut counts = Vec::with_capacity(raw_counts.len());
        let mut running: f64 = 1.0;
        for (i, &c) in raw_counts.iter().enumerate() {
            let v = if i == 0 {
                1.0
            } else if i == last {
                nf
            } else {
                running = running.max(if c.is_finite() { c.clamp(0.0, nf) } else { 0.0 });
                running
            };
            counts.push(v);
        }
        let interp = Pchip::new(xi.clone(), counts.iter().map(|c| c / nf).collect())?;
        Ok(SpectralDensityEstimate {
            lambda_max,
            n_vertices,
            xi,
            counts,
            interp,
        })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn anchor_points(&self) -> [[f64; 2]; 2] {
        [[0.0, 1.0 / self.n_vertices as f64], [self.lambda_max, 1.0]]
    }

    /// `P̃(z)`: 0 below the spectrum, 1 above `λmax`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.0
        } else if z > self.lambda_max {
            1.0
        } else {
            self.interp.eval(z)
        }
    }

    /// Smallest `z` with `P̃(z) >= q`, to within `1e-9·λmax`.
    pub fn cdf_inverse(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q >= 1.0 {
            return self.lambda_max;
        }
        if self.cdf(0.0) >= q {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, self.lambda_max);
        let tol = 1e-9 * self.lambda_max;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// KPM estimate of the cumulative spectral density at `t_points` equally
/// spaced points of `[0, λmax]`, using damped step filters of the cache's
/// degree. Performs no Laplacian products.
pub fn estimate_cdf(
    cache: &ChebyshevBasisCache,
    t_points: usize,
) -> Result<SpectralDensityEstimate> {
    if t_points < 3 {
        return Err(Error::param("need at least 3 interpolation points"));
    }
    let lmax = cache.lambda_max;
    let xi: Vec<f64> = (0..t_points)
        .map(|i| lmax * i as f64 / (t_points - 1) as f64)
        .collect();
    let mut counts = vec![1.0; t_points];
    for i in 1..t_points {
        let filter = make_polynomial_filter(0.0, xi[i], lmax, cache.degree, true)?;
        counts[i] = estimate_eigencount(cache, &filter)?;
    }
    SpectralDensityEstimate::from_counts(lmax, cache.n, xi, counts)
}
