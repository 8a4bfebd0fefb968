mod common;

use common::*;
use mcsfb::cheby::make_polynomial_filter;
use mcsfb::exact::EigenDecomposition;
use mcsfb::sampling::sample_without_replacement;
use mcsfb::synthesis::{
    build_penalty, pcg, pcg_solve, BandSystem, PenaltyFilter, PenaltyKind, SynthesisConfig,
};
use mcsfb::{nmse, LaplacianOperator};
use nalgebra::{DMatrix, DVector};

struct Fixture {
    op: LaplacianOperator,
    e: EigenDecomposition,
    penalty: PenaltyFilter,
    vertices: Vec<usize>,
    omega: Vec<f64>,
}

/// A lowpass band holding the bottom `k` eigenvalues, sampled `n` times from
/// the exact leverage scores.
fn fixture(n_vertices: usize, k: usize, n: usize, kind: PenaltyKind, seed: u64) -> Fixture {
    let op = operator(&sensor(n_vertices, seed));
    let e = eig(&op);
    let lmax = op.lambda_max().unwrap();
    let tau = 0.5 * (e.values[k - 1] + e.values[k]);
    let h = make_polynomial_filter(0.0, tau, lmax, 50, true).unwrap();
    let penalty = build_penalty(&h, kind, 50, SynthesisConfig::default().epsilon).unwrap();
    let leverage: Vec<f64> = (0..e.n())
        .map(|i| (0..k).map(|l| e.vectors[(i, l)].powi(2)).sum::<f64>() / k as f64)
        .collect();
    let vertices = sample_without_replacement(&leverage, n, seed + 7).unwrap();
    let omega = vertices.iter().map(|&i| leverage[i]).collect();
    Fixture {
        op,
        e,
        penalty,
        vertices,
        omega,
    }
}

fn dense(sys: &BandSystem, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        sys.apply(&x, &mut col);
        a.set_column(j, &DVector::from_column_slice(&col));
    }
    a
}

#[test]
fn system_operator_is_symmetric_and_positive() {
    for kind in [
        PenaltyKind::OneMinusH,
        PenaltyKind::Rational,
        PenaltyKind::Spline,
    ] {
        let fx = fixture(120, 12, 18, kind, 3);
        let sys = BandSystem::new(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, 1.0).unwrap();
        let n = fx.op.n();
        for s in 0..10 {
            let (z1, z2) = (gaussian(n, s), gaussian(n, 100 + s));
            let (mut a1, mut a2) = (vec![0.0; n], vec![0.0; n]);
            sys.apply(&z1, &mut a1);
            sys.apply(&z2, &mut a2);
            let lhs: f64 = a1.iter().zip(&z2).map(|(a, b)| a * b).sum();
            let rhs: f64 = z1.iter().zip(&a2).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{kind:?}");
            let quad: f64 = a1.iter().zip(&z1).map(|(a, b)| a * b).sum();
            let zz: f64 = z1.iter().map(|v| v * v).sum();
            assert!(quad >= -1e-8 * zz);
        }
    }
}

#[test]
fn cg_error_decreases_in_the_energy_norm() {
    let fx = fixture(150, 15, 22, PenaltyKind::Rational, 5);
    let n = fx.op.n();
    let sys = BandSystem::new(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, 1.0).unwrap();
    let a = dense(&sys, n);
    let y: Vec<f64> = fx.vertices.iter().map(|&i| fx.e.vectors[(i, 1)]).collect();
    let b = sys.rhs(&y);
    let exact = a
        .clone()
        .cholesky()
        .unwrap()
        .solve(&DVector::from_column_slice(&b));
    let mut energies = Vec::new();
    let (_, iters, _, _) = pcg(
        |x, out| sys.apply(x, out),
        &b,
        &sys.preconditioner(),
        1e-12,
        500,
        |x| {
            let d = DVector::from_column_slice(x) - &exact;
            energies.push(d.dot(&(&a * &d)));
        },
    );
    assert_eq!(energies.len(), iters);
    let scale = exact.dot(&(&a * &exact));
    assert!(
        energies.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale),
        "{energies:?}"
    );
}

#[test]
fn matrix_free_solution_matches_dense_assembly() {
    for (seed, kind) in [
        (1, PenaltyKind::Rational),
        (2, PenaltyKind::OneMinusH),
        (4, PenaltyKind::Spline),
    ] {
        let fx = fixture(250, 20, 30, kind, seed);
        let n = fx.op.n();
        let y: Vec<f64> = fx
            .vertices
            .iter()
            .map(|&i| fx.e.vectors[(i, 2)] + 0.3 * fx.e.vectors[(i, 5)])
            .collect();
        let config = SynthesisConfig {
            cg_tolerance: 1e-12,
            cg_max_iters: 2000,
            penalty: kind,
            ..Default::default()
        };
        let (z, report) =
            pcg_solve(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, &y, &config).unwrap();
        let sys = BandSystem::new(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, 1.0).unwrap();
        let a = dense(&sys, n);
        let b = DVector::from_column_slice(&sys.rhs(&y));
        let want = a.clone().lu().solve(&b).unwrap();
        assert!(
            rel_err(&z, want.as_slice()) <= 1e-6,
            "{kind:?}: {:e}",
            rel_err(&z, want.as_slice())
        );
        // the reported residual is the true one
        let r = &b - &a * DVector::from_column_slice(&z);
        assert!(report.converged);
        assert!(r.norm() / b.norm() <= config.cg_tolerance * 10.0);
    }
}

#[test]
fn reported_residual_is_within_tolerance() {
    for seed in 0..5 {
        let fx = fixture(200, 16, 24, PenaltyKind::Rational, 10 + seed);
        let y = gaussian(fx.vertices.len(), seed);
        let config = SynthesisConfig::scenario_b();
        let (z, report) =
            pcg_solve(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, &y, &config).unwrap();
        let sys = BandSystem::new(&fx.op, &fx.penalty, &fx.vertices, &fx.omega, 1.0).unwrap();
        let b = sys.rhs(&y);
        let mut az = vec![0.0; z.len()];
        sys.apply(&z, &mut az);
        let true_rel = rel_err(&az, &b);
        if report.converged {
            assert!(report.residual <= config.cg_tolerance);
            assert!(true_rel <= 100.0 * config.cg_tolerance, "{true_rel:e}");
        } else {
            assert_eq!(report.iters, config.cg_max_iters);
        }
    }
}

#[test]
fn lowpass_signal_is_recovered_from_oracle_samples() {
    // band of 20 eigenvalues, 1.5x samples; the signal stays clear of the band
    // edge, where the damped filter has already rolled off to about one half
    let (k, n) = (20, 30);
    let fx = fixture(200, k, n, PenaltyKind::OneMinusH, 21);
    let f = lowpass_signal(&fx.e, k / 2, 3);
    let leverage: Vec<f64> = (0..fx.e.n())
        .map(|i| (0..k).map(|l| fx.e.vectors[(i, l)].powi(2)).sum::<f64>() / k as f64)
        .collect();
    let errs: Vec<f64> = (0..20)
        .map(|s| {
            let v = sample_without_replacement(&leverage, n, 2100 + s).unwrap();
            let omega: Vec<f64> = v.iter().map(|&i| leverage[i]).collect();
            let y: Vec<f64> = v.iter().map(|&i| f[i]).collect();
            let (z, _) = pcg_solve(
                &fx.op,
                &fx.penalty,
                &v,
                &omega,
                &y,
                &SynthesisConfig::scenario_b(),
            )
            .unwrap();
            nmse(&z, &f)
        })
        .collect();
    let med = median(errs);
    assert!(med <= 1e-2, "median nmse {med:e}");
}
