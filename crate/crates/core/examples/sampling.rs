//! Estimated sampling weights against the exact leverage scores of each band.

use mcsfb::cheby::CacheStorage;
use mcsfb::exact::dense_eigendecomposition;
use mcsfb::fast::{fast_design, FastParams};
use mcsfb::graph::{generate_graph, GraphKind};
use mcsfb::sampling::compute_weights;
use mcsfb::{build_laplacian, LaplacianKind};

fn main() -> mcsfb::Result<()> {
    let g = generate_graph(&GraphKind::sensor(300), 2)?;
    let mut op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    op.estimate_lambda_max(50, 2)?;
    let eig = dense_eigendecomposition(&op)?;

    let params = FastParams {
        bands: 3,
        probes: 60,
        seed: 2,
        ..FastParams::default()
    };
    let design = fast_design(&op, &params, CacheStorage::Full)?;
    let weights = compute_weights(&op, &design.cache, &design.bank)?;
    let plan = design.plan(&op, &params, None)?;

    let ends = &design.bank.adjusted_ends;
    for (m, w) in weights.iter().enumerate() {
        let band: Vec<usize> = (0..eig.n())
            .filter(|&l| eig.values[l] >= ends[m] && eig.values[l] < ends[m + 1])
            .collect();
        let lev: Vec<f64> = (0..eig.n())
            .map(|i| band.iter().map(|&l| eig.vectors[(i, l)].powi(2)).sum())
            .collect();
        let total: f64 = lev.iter().sum();
        let l1: f64 = w
            .probs
            .iter()
            .zip(&lev)
            .map(|(p, q)| (p - q / total).abs())
            .sum();
        println!(
            "band {}: {} eigenvalues, {} samples, L1 distance to exact leverage {l1:.3}",
            m + 1,
            band.len(),
            plan.bands[m].n
        );
    }
    Ok(())
}
