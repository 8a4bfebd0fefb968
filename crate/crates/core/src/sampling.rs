//! Random vertex sampling for the fast transform.
//!
//! Band `m` draws vertices in proportion to the squared row norms of
//! `h̃_m(L) X`, an estimate of how much of the band's energy each vertex can
//! carry. Per-band sample counts follow the estimated number of eigenvalues
//! in the band, scaled to a target total.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cheby::{
    apply_filter, estimate_eigencount, ChebyshevBasisCache, SpectralDensityEstimate,
};
use crate::coeffs::{AnalysisCoefficients, BandCoefficients};
use crate::design::FilterBankDesign;
use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;

/// A sampling distribution over vertices. `empty` marks an all-zero input,
/// in which case `probs` is all zero too.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexWeights {
    pub probs: Vec<f64>,
    pub empty: bool,
}

impl VertexWeights {
    fn normalized(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return VertexWeights {
                probs: vec![0.0; raw.len()],
                empty: true,
            };
        }
        VertexWeights {
            probs: raw.into_iter().map(|v| v / total).collect(),
            empty: false,
        }
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Hex SHA-256 of the probabilities' bit patterns.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.probs {
            h.update(p.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Squared row norms of a row-major `N x J` block, normalized.
pub fn weights_from_block(block: &[f64], probes: usize) -> VertexWeights {
    VertexWeights::normalized(
        block
            .chunks(probes)
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect(),
    )
}

/// `ω(i) ∝ ‖(h̃(L) X)_i‖²` for every filter of the bank. Free when the cache
/// stores its basis, one `K·J` recurrence pass for all bands otherwise.
pub fn compute_weights(
    op: &LaplacianOperator,
    cache: &ChebyshevBasisCache,
    bank: &FilterBankDesign,
) -> Result<Vec<VertexWeights>> {
    let alphas: Vec<&[f64]> = bank.alpha.iter().map(Vec::as_slice).collect();
    let blocks = cache.filter_probes(op, &alphas)?;
    Ok(blocks
        .iter()
        .map(|b| weights_from_block(b, cache.probes()))
        .collect())
}

/// Reweights by `ln(1 + |h̃ f|)` and renormalizes.
pub fn adapt_weights_to_signal(weights: &VertexWeights, filtered: &[f64]) -> Result<VertexWeights> {
    if weights.probs.len() != filtered.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.probs.len(),
            got: filtered.len(),
        });
    }
    Ok(VertexWeights::normalized(
        weights
            .probs
            .iter()
            .zip(filtered)
            .map(|(w, y)| w * y.abs().ln_1p())
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Hutchinson trace estimate of each filter.
    #[default]
    Trace,
    /// `N·(P̃(τ_m) - P̃(τ_{m-1}))` from the density estimate.
    CdfDiff,
}

/// Where the raw per-band eigenvalue counts come from.
#[derive(Debug, Clone, Copy)]
pub enum CountSource<'a> {
    Trace(&'a ChebyshevBasisCache),
    CdfDiff(&'a SpectralDensityEstimate),
}

/// Unnormalized per-band sample counts, each scaled by `ln(1 + ‖h̃_m f‖)`
/// when the filtered-signal norms are given.
pub fn raw_counts(
    source: CountSource<'_>,
    bank: &FilterBankDesign,
    signal_norms: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut raw = match source {
        CountSource::Trace(cache) => bank
            .filters()
            .iter()
            .map(|f| estimate_eigencount(cache, f))
            .collect::<Result<Vec<_>>>()?,
        CountSource::CdfDiff(density) => {
            let n = density.n_vertices() as f64;
            bank.adjusted_ends
                .windows(2)
                .map(|w| n * (density.cdf(w[1]) - density.cdf(w[0])))
                .collect()
        }
    };
    if let Some(norms) = signal_norms {
        if norms.len() != raw.len() {
            return Err(Error::DimensionMismatch {
                expected: raw.len(),
                got: norms.len(),
            });
        }
        for (r, s) in raw.iter_mut().zip(norms) {
            *r *= s.ln_1p();
        }
    }
    Ok(raw)
}

/// Scales raw counts to sum to `target`. The rounding residue is taken from
/// the top band or given to the bottom band. A top band driven negative is
/// clamped and the remaining excess taken from the next band down, and so on.
/// Finally no band gets more samples than its distribution supports; the
/// surplus goes to the lowest bands with room.
pub fn allocate_counts(raw: &[f64], target: usize, supports: &[usize]) -> Result<Vec<usize>> {
    if raw.is_empty() {
        return Err(Error::param("no bands"));
    }
    if supports.len() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: raw.len(),
            got: supports.len(),
        });
    }
    let raw: Vec<f64> = raw
        .iter()
        .map(|r| if r.is_finite() { r.max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "every band has an estimated sample count of zero".into(),
        ));
    }
    let mut counts: Vec<i64> = raw
        .iter()
        .map(|r| (r * target as f64 / total).round() as i64)
        .collect();
    let m = counts.len();
    let diff = target as i64 - counts.iter().sum::<i64>();
    if diff > 0 {
        counts[0] += diff;
    } else {
        let mut excess = -diff;
        for c in counts.iter_mut().rev() {
            let take = excess.min(*c);
            *c -= take;
            excess -= take;
            if excess == 0 {
                break;
            }
        }
    }
    let mut counts: Vec<usize> = counts.into_iter().map(|c| c as usize).collect();

    let room: usize = supports.iter().sum();
    if room < target {
        return Err(Error::InsufficientSupport {
            requested: target,
            support: room,
        });
    }
    let mut surplus = 0;
    for (c, &s) in counts.iter_mut().zip(supports) {
        if *c > s {
            surplus += *c - s;
            *c = s;
        }
    }
    for k in 0..m {
        if surplus == 0 {
            break;
        }
        let add = surplus.min(supports[k] - counts[k]);
        counts[k] += add;
        surplus -= add;
    }
    Ok(counts)
}

/// Weighted sampling of `n` distinct indices by exponential race: every
/// index with positive weight gets the key `-ln(u)/w` and the `n` smallest
/// keys win. Returned sorted.
pub fn sample_without_replacement(weights: &[f64], n: usize, seed: u64) -> Result<Vec<usize>> {
    let support = weights.iter().filter(|&&w| w > 0.0).count();
    if n > support {
        return Err(Error::InsufficientSupport {
            requested: n,
            support,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(support);
    for (i, &w) in weights.iter().enumerate() {
        // draw for every index so the stream does not depend on the support
        let u: f64 = rng.random::<f64>();
        if w > 0.0 {
            keys.push((-(1.0 - u).ln() / w, i));
        }
    }
    if n < keys.len() {
        keys.select_nth_unstable_by(n, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut out: Vec<usize> = keys[..n].iter().map(|&(_, i)| i).collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub n: usize,
    pub weights_digest: String,
    pub vertices: Vec<usize>,
    /// `ω_m` at each selected vertex, in the order of `vertices`.
    pub sampled_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    #[serde(rename = "N_T")]
    pub n_target: usize,
    pub adapted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<f64>,
    pub bands: Vec<BandPlan>,
}

impl SamplingPlan {
    /// Samples plus the stored mean.
    pub fn stored_count(&self) -> usize {
        self.bands.iter().map(|b| b.n).sum::<usize>() + usize::from(self.mean.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    /// Total stored values relative to `N`; 1 is critical sampling.
    pub samples_factor: f64,
    pub count_mode: CountMode,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            samples_factor: 1.0,
            count_mode: CountMode::Trace,
            seed: 0,
        }
    }
}

/// Per-band outputs `h̃_m(L) f`, one recurrence per band (`M·K` products).
pub fn filter_bank_outputs(
    op: &LaplacianOperator,
    bank: &FilterBankDesign,
    f: &[f64],
) -> Result<Vec<Vec<f64>>> {
    bank.filters()
        .par_iter()
        .map(|h| apply_filter(op, h, f))
        .collect()
}

fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len().max(1) as f64
}

/// A full sampling plan. With a signal the plan is signal-adapted: the mean
/// is removed and kept as one stored value, the weights and counts follow
/// the filtered centered signal, and `round(factor·N) - 1` vertices are drawn.
/// Band `m` (from 1) samples with seed `seed ^ m`.
pub fn build_sampling_plan(
    op: &LaplacianOperator,
    cache: &ChebyshevBasisCache,
    bank: &FilterBankDesign,
    density: Option<&SpectralDensityEstimate>,
    signal: Option<&[f64]>,
    config: &PlanConfig,
) -> Result<SamplingPlan> {
    if !(config.samples_factor > 0.0 && config.samples_factor.is_finite()) {
        return Err(Error::param(format!(
            "samples factor must be positive, got {}",
            config.samples_factor
        )));
    }
    let n = op.n();
    let stored = (config.samples_factor * n as f64).round() as usize;
    let mut weights = compute_weights(op, cache, bank)?;
    let (n_target, mu, norms) = match signal {
        Some(f) => {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.len(),
                });
            }
            let mu = mean(f);
            let centered: Vec<f64> = f.iter().map(|v| v - mu).collect();
            let outputs = filter_bank_outputs(op, bank, &centered)?;
            for (w, y) in weights.iter_mut().zip(&outputs) {
                *w = adapt_weights_to_signal(w, y)?;
            }
            let norms: Vec<f64> = outputs
                .iter()
                .map(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            (stored.saturating_sub(1), Some(mu), Some(norms))
        }
        None => (stored, None, None),
    };
    let source = match config.count_mode {
        CountMode::Trace => CountSource::Trace(cache),
        CountMode::CdfDiff => CountSource::CdfDiff(
            density
                .ok_or_else(|| Error::param("cdf-diff counts need a spectral density estimate"))?,
        ),
    };
    let raw = raw_counts(source, bank, norms.as_deref())?;
    let supports: Vec<usize> = weights.iter().map(VertexWeights::support_size).collect();
    let counts = allocate_counts(&raw, n_target, &supports)?;
    let bands = weights
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(m, (w, &c))| {
            let vertices = sample_without_replacement(&w.probs, c, config.seed ^ (m as u64 + 1))?;
            let sampled_weights = vertices.iter().map(|&i| w.probs[i]).collect();
            Ok(BandPlan {
                n: c,
                weights_digest: w.digest(),
                vertices,
                sampled_weights,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SamplingPlan {
        n_target,
        adapted: signal.is_some(),
        mean: mu,
        bands,
    })
}

/// CSV `vertex,w1..wM` of full weight vectors.
pub fn weights_table(weights: &[VertexWeights]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("vertex");
    for m in 1..=weights.len() {
        write!(s, ",w{m}").unwrap();
    }
    s.push('\n');
    let n = weights.first().map_or(0, |w| w.probs.len());
    for i in 0..n {
        write!(s, "{i}").unwrap();
        for w in weights {
            write!(s, ",{:e}", w.probs[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Fast analysis: `h̃_m(L) f` (centered in adapted mode) sampled on each
/// band's vertices. Costs `M·K` products.
pub fn fast_analyze(
    op: &LaplacianOperator,
    bank: &FilterBankDesign,
    plan: &SamplingPlan,
    f: &[f64],
) -> Result<AnalysisCoefficients> {
    if plan.bands.len() != bank.n_bands() {
        return Err(Error::ArtifactMismatch(format!(
            "plan has {} bands, filter bank has {}",
            plan.bands.len(),
            bank.n_bands()
        )));
    }
    if f.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            got: f.len(),
        });
    }
    let mu = plan.adapted.then(|| mean(f));
    let centered: Vec<f64> = match mu {
        Some(m) => f.iter().map(|v| v - m).collect(),
        None => f.to_vec(),
    };
    let outputs = filter_bank_outputs(op, bank, &centered)?;
    let bands = plan
        .bands
        .iter()
        .zip(&outputs)
        .map(|(b, y)| BandCoefficients {
            vertices: b.vertices.clone(),
            values: b.vertices.iter().map(|&i| y[i]).collect(),
        })
        .collect();
    Ok(AnalysisCoefficients { bands, mean: mu })
}
