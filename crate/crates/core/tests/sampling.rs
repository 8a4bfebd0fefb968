mod common;

use common::*;
use mcsfb::cheby::{make_polynomial_filter, CacheStorage, ChebyshevBasisCache};
use mcsfb::fast::{fast_design, FastParams};
use mcsfb::sampling::{
    adapt_weights_to_signal, build_sampling_plan, compute_weights, sample_without_replacement,
    PlanConfig, SamplingPlan,
};
use proptest::prelude::*;

/// `Σ_j ((h̃(L) X)_{ij})² / J` from one seeded cache.
fn weight_numerators(
    op: &mcsfb::LaplacianOperator,
    alpha: &[f64],
    probes: usize,
    seed: u64,
) -> Vec<f64> {
    let cache =
        ChebyshevBasisCache::build(op, alpha.len() - 1, probes, seed, CacheStorage::Full).unwrap();
    let block = cache.filter_probes(op, &[alpha]).unwrap().pop().unwrap();
    block
        .chunks(probes)
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() / probes as f64)
        .collect()
}

#[test]
fn ring_oracle_weights_are_uniform() {
    let op = operator(&ring(48));
    let e = eig(&op);
    let lmax = op.lambda_max().unwrap();
    for (a, b) in [(0.0, 0.7), (0.7, 2.1), (2.1, lmax)] {
        let r: Vec<usize> = (0..e.n())
            .filter(|&l| e.values[l] >= a && e.values[l] < b)
            .collect();
        let leverage: Vec<f64> = (0..e.n())
            .map(|i| r.iter().map(|&l| e.vectors[(i, l)].powi(2)).sum())
            .collect();
        let target = r.len() as f64 / e.n() as f64;
        assert!(leverage.iter().all(|w| (w - target).abs() < 1e-10));
        let h = make_polynomial_filter(a, b, lmax, 50, true).unwrap();
        let smooth = spectral_matrix(&e, |l| h.eval(l).powi(2));
        let d0 = smooth[(0, 0)];
        assert!((0..e.n()).all(|i| (smooth[(i, i)] - d0).abs() < 1e-10));
        // with many probes the estimate approaches the flat oracle
        let est = weight_numerators(&op, &h.alpha, 2000, 3);
        assert!(
            est.iter().all(|w| (w / d0 - 1.0).abs() < 0.25),
            "band [{a}, {b})"
        );
    }
}

#[test]
fn weight_numerators_are_unbiased() {
    let op = operator(&sensor(60, 8));
    let e = eig(&op);
    let lmax = op.lambda_max().unwrap();
    let h = make_polynomial_filter(0.0, 0.3 * lmax, lmax, 30, true).unwrap();
    let oracle = spectral_matrix(&e, |l| h.eval(l).powi(2));
    let runs: Vec<Vec<f64>> = (0..200)
        .map(|s| weight_numerators(&op, &h.alpha, 3, s))
        .collect();
    let mut outside = 0;
    for i in 0..e.n() {
        let samples: Vec<f64> = runs.iter().map(|r| r[i]).collect();
        let (m, se) = mean_se(&samples);
        if (m - oracle[(i, i)]).abs() > 3.0 * se {
            outside += 1;
        }
    }
    // about 0.3% of vertices fall outside three standard errors by chance
    assert!(outside <= 2, "{outside} vertices outside 3 SE");
}

#[test]
fn inclusion_frequencies_follow_the_weights() {
    let n = 50;
    let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i * 37 % n) as f64).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let mut hits = vec![0.0; n];
    for seed in 0..10_000 {
        for i in sample_without_replacement(&w, 10, seed).unwrap() {
            hits[i] += 1.0;
        }
    }
    assert!(spearman(&hits, &w) > 0.99);
}

#[test]
fn sampler_corner_cases() {
    let mut w = vec![0.0; 20];
    w[7] = 1.0;
    assert_eq!(sample_without_replacement(&w, 1, 5).unwrap(), vec![7]);
    let w: Vec<f64> = (0..20)
        .map(|i| if i % 3 == 0 { 0.0 } else { 1.0 })
        .collect();
    let all: Vec<usize> = (0..20).filter(|i| i % 3 != 0).collect();
    assert_eq!(sample_without_replacement(&w, all.len(), 1).unwrap(), all);
    assert!(sample_without_replacement(&w, all.len() + 1, 1).is_err());
}

#[test]
fn adaptation_moves_mass_towards_the_signal() {
    let op = operator(&sensor(100, 2));
    let params = FastParams {
        density_degree: 40,
        filter_degree: 30,
        probes: 10,
        ..FastParams::default()
    };
    let design = fast_design(&op, &params, CacheStorage::Full).unwrap();
    let w = &compute_weights(&op, &design.cache, &design.bank).unwrap()[0];
    let support: Vec<usize> = (0..30).collect();
    let filtered: Vec<f64> = (0..op.n())
        .map(|i| if i < 30 { 1.0 + i as f64 } else { 0.0 })
        .collect();
    let adapted = adapt_weights_to_signal(w, &filtered).unwrap();
    let mass = |p: &[f64]| support.iter().map(|&i| p[i]).sum::<f64>();
    assert!(mass(&adapted.probs) >= mass(&w.probs));
    let flat = adapt_weights_to_signal(w, &vec![-2.0; op.n()]).unwrap();
    assert!(rel_err(&flat.probs, &w.probs) < 1e-12);
    assert!(
        adapt_weights_to_signal(w, &vec![0.0; op.n()])
            .unwrap()
            .empty
    );
}

fn check_plan(plan: &SamplingPlan, n: usize, stored: usize) {
    assert_eq!(plan.stored_count(), stored);
    assert_eq!(plan.bands.iter().map(|b| b.n).sum::<usize>(), plan.n_target);
    for b in &plan.bands {
        assert_eq!(b.vertices.len(), b.n);
        assert_eq!(b.sampled_weights.len(), b.n);
        assert!(b.vertices.windows(2).all(|w| w[0] < w[1]));
        assert!(b.vertices.iter().all(|&v| v < n));
        assert!(b.sampled_weights.iter().all(|&w| w > 0.0));
    }
}

#[test]
fn adapted_plans_favor_the_lowpass_band() {
    let op = operator(&sensor(300, 6));
    let e = eig(&op);
    let params = FastParams {
        density_degree: 60,
        filter_degree: 40,
        probes: 20,
        ..FastParams::default()
    };
    let (mut plain_first, mut adapted_first) = (0usize, 0usize);
    for seed in 0..20 {
        let p = FastParams { seed, ..params };
        let design = fast_design(&op, &p, CacheStorage::Full).unwrap();
        let noise = gaussian(op.n(), 1000 + seed);
        let f: Vec<f64> = lowpass_signal(&e, 15, seed)
            .iter()
            .zip(noise)
            .map(|(a, b)| a + 0.01 * b)
            .collect();
        let plain = design.plan(&op, &p, None).unwrap();
        let adapted = design.plan(&op, &p, Some(&f)).unwrap();
        check_plan(&plain, op.n(), op.n());
        check_plan(&adapted, op.n(), op.n());
        assert!(adapted.mean.is_some());
        plain_first += plain.bands[0].n;
        adapted_first += adapted.bands[0].n;
    }
    assert!(
        adapted_first >= plain_first,
        "{adapted_first} < {plain_first}"
    );
}

#[test]
fn plan_matvec_budget() {
    let op = operator(&sensor(200, 1));
    let params = FastParams {
        density_degree: 40,
        filter_degree: 30,
        probes: 8,
        ..FastParams::default()
    };
    let f = gaussian(op.n(), 4);
    for storage in [CacheStorage::Full, CacheStorage::Streaming] {
        let design = fast_design(&op, &params, storage).unwrap();
        let config = PlanConfig::default();
        let extra = if storage == CacheStorage::Full {
            0
        } else {
            params.filter_degree * params.probes
        };
        op.reset_matvec_count();
        build_sampling_plan(
            &op,
            &design.cache,
            &design.bank,
            Some(&design.density),
            None,
            &config,
        )
        .unwrap();
        assert_eq!(op.matvec_count(), extra);
        op.reset_matvec_count();
        build_sampling_plan(
            &op,
            &design.cache,
            &design.bank,
            Some(&design.density),
            Some(&f),
            &config,
        )
        .unwrap();
        assert_eq!(
            op.matvec_count(),
            extra + params.bands * params.filter_degree
        );
    }
}

#[test]
fn silent_bands_get_no_samples() {
    let op = operator(&ring(64));
    let e = eig(&op);
    let params = FastParams {
        density_degree: 80,
        filter_degree: 80,
        probes: 20,
        bands: 3,
        ..FastParams::default()
    };
    let design = fast_design(&op, &params, CacheStorage::Full).unwrap();
    let err = design
        .plan(&op, &params, Some(&vec![3.0; op.n()]))
        .unwrap_err();
    assert!(err.to_string().contains("zero"), "{err}");
    let f: Vec<f64> = (0..op.n()).map(|i| 3.0 + e.vectors[(i, 1)]).collect();
    let plan = design.plan(&op, &params, Some(&f)).unwrap();
    check_plan(&plan, op.n(), op.n());
    let top = plan.bands.last().unwrap();
    assert_eq!(top.n, 0);
    assert!(top.vertices.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plan_invariants(seed in 0u64..1000, n in 60usize..160, factor in 0.3f64..2.5, bands in 1usize..6) {
        let op = operator(&random_connected(n, seed));
        let params = FastParams {
            bands,
            density_degree: 30,
            filter_degree: 25,
            probes: 6,
            samples_factor: factor,
            seed,
            ..FastParams::default()
        };
        let design = fast_design(&op, &params, CacheStorage::Full).unwrap();
        let stored = (factor * op.n() as f64).round() as usize;
        match design.plan(&op, &params, None) {
            Ok(plan) => check_plan(&plan, op.n(), stored),
            Err(e) => prop_assert!(e.to_string().contains("support"), "{e}"),
        }
    }
}
