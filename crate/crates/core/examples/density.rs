//! Estimated cumulative spectral density of a ring against its closed form.

use std::f64::consts::PI;

use mcsfb::cheby::{estimate_cdf, CacheStorage, ChebyshevBasisCache};
use mcsfb::graph::{generate_graph, GraphKind};
use mcsfb::{build_laplacian, LaplacianKind};

fn main() -> mcsfb::Result<()> {
    let n = 64;
    let g = generate_graph(&GraphKind::Ring { n }, 0)?;
    let mut op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    let lmax = op.estimate_lambda_max(50, 0)?;

    let cache = ChebyshevBasisCache::build(&op, 80, 30, 7, CacheStorage::Full)?;
    let density = estimate_cdf(&cache, 50)?;

    let eigs: Vec<f64> = (0..n)
        .map(|l| 2.0 - 2.0 * (2.0 * PI * l as f64 / n as f64).cos())
        .collect();
    println!("{:>8} {:>10} {:>10}", "z", "estimate", "exact");
    for i in 0..=10 {
        let z = lmax * i as f64 / 10.0;
        let exact = eigs.iter().filter(|&&l| l <= z).count() as f64 / n as f64;
        println!("{z:8.3} {:10.4} {exact:10.4}", density.cdf(z));
    }
    println!("median eigenvalue ~ {:.3}", density.cdf_inverse(0.5));
    Ok(())
}
