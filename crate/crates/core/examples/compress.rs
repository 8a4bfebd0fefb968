//! Sparse coding of a piecewise-smooth signal over the exact transform's atoms
//! and over the vertex deltas.

use mcsfb::design::Spacing;
use mcsfb::exact::{
    dense_eigendecomposition, dictionary, exact_band_ends, omp_sparse_code, partition_spectrum,
    partition_uniqueness_sets,
};
use mcsfb::graph::{generate_graph, GraphKind};
use mcsfb::{build_laplacian, LaplacianKind};
use nalgebra::DMatrix;

fn main() -> mcsfb::Result<()> {
    let g = generate_graph(&GraphKind::sensor(400), 3)?;
    let f: Vec<f64> = g
        .coords()
        .unwrap()
        .iter()
        .map(|p| (3.0 * p[0]).sin() + if p[1] > 0.5 { 1.0 } else { 0.0 })
        .collect();
    let op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    let eig = dense_eigendecomposition(&op)?;
    let sp = partition_spectrum(&eig, &exact_band_ends(&eig, 5, Spacing::AdaptedLog)?)?;
    let vp = partition_uniqueness_sets(&eig, &sp)?;

    let n = eig.n();
    let energy: f64 = f.iter().map(|v| v * v).sum();
    let t_max = n / 5;
    let ours = omp_sparse_code(&dictionary(&eig, &sp, &vp)?, &f, t_max)?;
    let delta = omp_sparse_code(&DMatrix::identity(n, n), &f, t_max)?;
    println!("{:>5} {:>12} {:>12}", "T", "filter bank", "delta");
    for t in [1, 5, 10, 20, n / 10, t_max] {
        let e = |r: &[f64]| r[t.min(r.len() - 1)].powi(2) / energy;
        println!(
            "{t:5} {:12.3e} {:12.3e}",
            e(&ours.residual_norms),
            e(&delta.residual_norms)
        );
    }
    Ok(())
}
