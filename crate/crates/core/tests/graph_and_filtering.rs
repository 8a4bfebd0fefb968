mod common;

use common::*;
use mcsfb::cheby::{
    apply_filter, estimate_cdf, estimate_eigencount, jackson_damping, make_polynomial_filter,
    CacheStorage, ChebyshevBasisCache, SpectralDensityEstimate,
};
use mcsfb::design::{build_filter_bank, initial_band_ends, Spacing};
use mcsfb::{build_laplacian, LaplacianKind};
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;

fn ring_eigenvalues(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|l| 2.0 - 2.0 * (2.0 * PI * l as f64 / n as f64).cos())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn lambda_max_bounds_the_spectrum() {
    for seed in 0..20u64 {
        for n in [30, 90, 200] {
            let g = random_connected(n, seed);
            for kind in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
                let mut op = build_laplacian(&g, kind).unwrap();
                let est = op.estimate_lambda_max(50, seed).unwrap();
                let top = *eig(&op).values.last().unwrap();
                assert!(est >= top, "seed {seed} n {n} {kind:?}: {est} < {top}");
                assert!(est <= op.gershgorin_bound() + 1e-12);
            }
        }
    }
}

#[test]
fn matvec_matches_the_dense_laplacian() {
    for seed in 0..5u64 {
        let g = random_connected(150, seed);
        for kind in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
            let op = build_laplacian(&g, kind).unwrap();
            let x = gaussian(op.n(), seed);
            let want = op.to_dense() * DVector::from_column_slice(&x);
            let got = op.matvec(&x).unwrap();
            assert!(rel_err(&got, want.as_slice()) < 1e-12);
        }
        let op = build_laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        let ones = op.matvec(&vec![1.0; op.n()]).unwrap();
        assert!(ones.iter().all(|v| v.abs() < 1e-12));
        let d = op.to_dense();
        assert!((&d - d.transpose()).abs().max() == 0.0);
    }
}

#[test]
fn polynomial_filtering_matches_the_dense_oracle() {
    for trial in 0..20u64 {
        let op = operator(&random_connected(60 + 7 * trial as usize, trial));
        let e = eig(&op);
        let lmax = op.lambda_max().unwrap();
        let a = lmax * (trial % 5) as f64 / 7.0;
        let b = a + lmax * (0.1 + 0.05 * (trial % 4) as f64);
        let k = [10, 25, 50, 80][trial as usize % 4];
        let filter = make_polynomial_filter(a, b, lmax, k, trial % 2 == 0).unwrap();
        let f = gaussian(op.n(), 100 + trial);
        let got = apply_filter(&op, &filter, &f).unwrap();
        assert!(
            rel_err(&got, &dense_filter(&e, &filter, &f)) <= 1e-9,
            "trial {trial}"
        );
    }
}

#[test]
fn jackson_damping_removes_gibbs_overshoot() {
    for k in [25, 50, 80, 200] {
        let g = jackson_damping(k);
        assert_eq!(g[0], 1.0);
        assert!(g.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for (a, b) in [(0.0, 1.0), (1.0, 3.0), (2.5, 4.0)] {
            let h = make_polynomial_filter(a, b, 4.0, k, true).unwrap();
            for i in 0..10_000 {
                let v = h.eval(4.0 * i as f64 / 9_999.0);
                assert!(
                    (-1e-6..=1.0 + 1e-6).contains(&v),
                    "K={k} band [{a},{b}) value {v}"
                );
            }
        }
    }
    let raw = make_polynomial_filter(0.0, 2.0, 4.0, 80, false).unwrap();
    let peak = (0..10_000)
        .map(|i| raw.eval(4.0 * i as f64 / 9_999.0))
        .fold(f64::MIN, f64::max);
    assert!(peak > 1.01);
}

#[test]
fn damped_filters_track_the_ideal_band_away_from_its_ends() {
    let lmax = 8.0;
    let ends = [0.0, 0.5, 1.5, 4.0, 8.0];
    for w in ends.windows(2) {
        let h = make_polynomial_filter(w[0], w[1], lmax, 80, true).unwrap();
        for i in 0..2000 {
            let l = lmax * i as f64 / 2000.0;
            let gap = ends
                .iter()
                .filter(|&&t| t > 0.0 && t < lmax)
                .map(|t| (l - t).abs())
                .fold(f64::MAX, f64::min);
            if gap < 0.08 * lmax {
                continue;
            }
            let ideal = if l >= w[0] && l < w[1] { 1.0 } else { 0.0 };
            assert!((h.eval(l) - ideal).abs() < 0.1, "band {w:?} at {l}");
        }
    }
}

#[test]
fn eigencount_is_unbiased() {
    let op = operator(&sensor(60, 4));
    let e = eig(&op);
    let lmax = op.lambda_max().unwrap();
    let filter = make_polynomial_filter(0.2 * lmax, 0.6 * lmax, lmax, 40, true).unwrap();
    let truth: f64 = e.values.iter().map(|&l| filter.eval(l)).sum();
    let estimates: Vec<f64> = (0..200)
        .map(|s| {
            let cache = ChebyshevBasisCache::build(&op, 40, 4, s, CacheStorage::Streaming).unwrap();
            estimate_eigencount(&cache, &filter).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&estimates);
    assert!(
        (m - truth).abs() <= 3.0 * se,
        "mean {m} truth {truth} se {se}"
    );
}

#[test]
fn ring_density_and_half_band_count() {
    let n = 64;
    let op = operator(&ring(n));
    let lmax = op.lambda_max().unwrap();
    let eigs = ring_eigenvalues(n);
    let truth = |z: f64| eigs.iter().filter(|&&l| l <= z).count() as f64 / n as f64;
    let mut sup_errs = Vec::new();
    for seed in 0..10 {
        let cache = ChebyshevBasisCache::build(&op, 80, 30, seed, CacheStorage::Full).unwrap();
        let d = estimate_cdf(&cache, 50).unwrap();
        // compare away from the jumps, where the closed form is single valued
        let sup = (0..1000)
            .map(|i| lmax * (i as f64 + 0.5) / 1000.0)
            .map(|z| (d.cdf(z) - truth(z)).abs())
            .fold(0.0, f64::max);
        sup_errs.push(sup);
        let half = make_polynomial_filter(0.0, 2.0, lmax, 80, true).unwrap();
        let count = estimate_eigencount(&cache, &half).unwrap();
        let exact = eigs.iter().filter(|&&l| l < 2.0).count() as f64;
        assert!(
            (count - exact).abs() <= 0.15 * exact,
            "seed {seed}: {count} vs {exact}"
        );
    }
    assert!(
        mean(&sup_errs) <= 0.05,
        "mean sup error {}",
        mean(&sup_errs)
    );
}

#[test]
fn adapted_log_ends_halve_the_exact_ring_counts() {
    let n = 64;
    let eigs = ring_eigenvalues(n);
    let lmax = 4.0 * 1.01;
    let xi: Vec<f64> = (0..401).map(|i| lmax * i as f64 / 400.0).collect();
    let counts: Vec<f64> = xi
        .iter()
        .map(|&z| eigs.iter().filter(|&&l| l <= z).count() as f64)
        .collect();
    let d = SpectralDensityEstimate::from_counts(lmax, n, xi, counts).unwrap();
    let ends = initial_band_ends(&d, 3, Spacing::AdaptedLog).unwrap();
    let per_band: Vec<usize> = ends
        .windows(2)
        .map(|w| eigs.iter().filter(|&&l| l >= w[0] && l < w[1]).count())
        .collect();
    for (got, want) in per_band.iter().zip([16usize, 16, 32]) {
        assert!(got.abs_diff(want) <= 2, "{per_band:?}");
    }
    let bank = build_filter_bank(&d, 3, Spacing::AdaptedLog, 50, 0.001).unwrap();
    assert!(bank.adjusted_ends.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn cache_storage_modes_agree() {
    let op = operator(&random_connected(120, 9));
    let lmax = op.lambda_max().unwrap();
    let full = ChebyshevBasisCache::build(&op, 30, 6, 2, CacheStorage::Full).unwrap();
    let stream = ChebyshevBasisCache::build(&op, 30, 6, 2, CacheStorage::Streaming).unwrap();
    assert_eq!(full.moments(), stream.moments());
    let h = make_polynomial_filter(0.0, 0.3 * lmax, lmax, 30, true).unwrap();
    let a = full.filter_probes(&op, &[&h.alpha]).unwrap();
    let b = stream.filter_probes(&op, &[&h.alpha]).unwrap();
    assert!(rel_err(&a[0], &b[0]) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimated_cdf_is_monotone_and_anchored(seed in 0u64..500, n in 30usize..150) {
        let op = operator(&random_connected(n, seed));
        let cache = ChebyshevBasisCache::build(&op, 40, 8, seed, CacheStorage::Full).unwrap();
        let d = estimate_cdf(&cache, 20).unwrap();
        let lmax = op.lambda_max().unwrap();
        let vals: Vec<f64> = (0..=500).map(|i| d.cdf(lmax * i as f64 / 500.0)).collect();
        prop_assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert!((vals[500] - 1.0).abs() < 1e-12);
        prop_assert!((vals[0] - 1.0 / op.n() as f64).abs() < 1e-12);
    }

    #[test]
    fn filtering_is_linear(seed in 0u64..500, s in -3.0f64..3.0) {
        let op = operator(&sensor(50, seed));
        let lmax = op.lambda_max().unwrap();
        let h = make_polynomial_filter(0.1 * lmax, 0.5 * lmax, lmax, 20, true).unwrap();
        let (x, y) = (gaussian(op.n(), seed), gaussian(op.n(), seed + 1));
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| s * a + b).collect();
        let (hx, hy, hxy) = (
            apply_filter(&op, &h, &x).unwrap(),
            apply_filter(&op, &h, &y).unwrap(),
            apply_filter(&op, &h, &xy).unwrap(),
        );
        let want: Vec<f64> = hx.iter().zip(&hy).map(|(a, b)| s * a + b).collect();
        prop_assert!(rel_err(&hxy, &want) < 1e-10);
    }
}
