//! The fast transform end to end: density estimate, filter bank, sampling
//! plan, analysis and synthesis on one Laplacian.

use serde::{Deserialize, Serialize};

use crate::cheby::{
    estimate_cdf, CacheStorage, ChebyshevBasisCache, SpectralDensityEstimate,
    DEFAULT_DENSITY_DEGREE, DEFAULT_FILTER_DEGREE, DEFAULT_PROBES, DEFAULT_T_POINTS,
};
use crate::coeffs::AnalysisCoefficients;
use crate::design::{build_filter_bank, FilterBankDesign, Spacing, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;
use crate::sampling::{build_sampling_plan, fast_analyze, CountMode, PlanConfig, SamplingPlan};
use crate::synthesis::{synthesize_fast, SynthesisConfig, SynthesisReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastParams {
    #[serde(rename = "M")]
    pub bands: usize,
    pub spacing: Spacing,
    /// Degree of the probe recurrence used for the density and the weights.
    pub density_degree: usize,
    #[serde(rename = "K")]
    pub filter_degree: usize,
    #[serde(rename = "J")]
    pub probes: usize,
    pub t_points: usize,
    pub delta: f64,
    pub count_mode: CountMode,
    pub samples_factor: f64,
    pub seed: u64,
}

impl Default for FastParams {
    fn default() -> Self {
        FastParams {
            bands: 5,
            spacing: Spacing::default(),
            density_degree: DEFAULT_DENSITY_DEGREE,
            filter_degree: DEFAULT_FILTER_DEGREE,
            probes: DEFAULT_PROBES,
            t_points: DEFAULT_T_POINTS,
            delta: DEFAULT_DELTA,
            count_mode: CountMode::Trace,
            samples_factor: 1.0,
            seed: 0,
        }
    }
}

/// Signal-independent setup: the probe cache, the density and the bank.
#[derive(Debug, Clone)]
pub struct FastDesign {
    pub cache: ChebyshevBasisCache,
    pub density: SpectralDensityEstimate,
    pub bank: FilterBankDesign,
}

/// Builds the probe cache once (`K·J` products with `K` the density degree)
/// and derives the density and the filter bank from it.
pub fn fast_design(
    op: &LaplacianOperator,
    params: &FastParams,
    storage: CacheStorage,
) -> Result<FastDesign> {
    if params.filter_degree > params.density_degree {
        return Err(Error::param(format!(
            "filter degree {} exceeds the probe recurrence degree {}",
            params.filter_degree, params.density_degree
        )));
    }
    let cache = ChebyshevBasisCache::build(
        op,
        params.density_degree,
        params.probes,
        params.seed,
        storage,
    )?;
    let density = estimate_cdf(&cache, params.t_points)?;
    let bank = build_filter_bank(
        &density,
        params.bands,
        params.spacing,
        params.filter_degree,
        params.delta,
    )?;
    Ok(FastDesign {
        cache,
        density,
        bank,
    })
}

impl FastDesign {
    /// The sampling plan; signal-adapted when `signal` is given.
    pub fn plan(
        &self,
        op: &LaplacianOperator,
        params: &FastParams,
        signal: Option<&[f64]>,
    ) -> Result<SamplingPlan> {
        let config = PlanConfig {
            samples_factor: params.samples_factor,
            count_mode: params.count_mode,
            seed: params.seed,
        };
        build_sampling_plan(
            op,
            &self.cache,
            &self.bank,
            Some(&self.density),
            signal,
            &config,
        )
    }
}

#[derive(Debug, Clone)]
pub struct FastRoundtrip {
    pub plan: SamplingPlan,
    pub coeffs: AnalysisCoefficients,
    pub reconstruction: Vec<f64>,
    pub report: SynthesisReport,
}

/// Plan, analyze and synthesize `f` with an existing design.
pub fn fast_roundtrip(
    op: &LaplacianOperator,
    design: &FastDesign,
    params: &FastParams,
    f: &[f64],
    adapted: bool,
    config: &SynthesisConfig,
) -> Result<FastRoundtrip> {
    let plan = design.plan(op, params, adapted.then_some(f))?;
    let coeffs = fast_analyze(op, &design.bank, &plan, f)?;
    let (reconstruction, report) = synthesize_fast(op, &design.bank, &plan, &coeffs, config)?;
    Ok(FastRoundtrip {
        plan,
        coeffs,
        reconstruction,
        report,
    })
}
