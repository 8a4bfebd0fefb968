//! Exact transform: ideal bands, uniqueness sets, perfect reconstruction from
//! exactly N coefficients.

use mcsfb::design::Spacing;
use mcsfb::exact::{
    dense_eigendecomposition, exact_analyze, exact_band_ends, exact_synthesize,
    min_singular_values, partition_spectrum, partition_uniqueness_sets,
};
use mcsfb::graph::{generate_graph, GraphKind};
use mcsfb::{build_laplacian, nmse, LaplacianKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mcsfb::Result<()> {
    let g = generate_graph(&GraphKind::community(300), 4)?;
    let op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    let eig = dense_eigendecomposition(&op)?;

    let sp = partition_spectrum(&eig, &exact_band_ends(&eig, 4, Spacing::AdaptedLog)?)?;
    let vp = partition_uniqueness_sets(&eig, &sp)?;
    let sigma = min_singular_values(&eig, &sp, &vp);
    for (m, (r, v)) in sp.bands.iter().zip(&vp.sets).enumerate() {
        println!(
            "band {}: {} eigenvalues, {} vertices, sigma_min {:.2e}",
            m + 1,
            r.len(),
            v.len(),
            sigma[m]
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f: Vec<f64> = (0..eig.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let coeffs = exact_analyze(&eig, &sp, &vp, &f)?;
    let rec = exact_synthesize(&eig, &sp, &vp, &coeffs)?;
    println!(
        "stored {} of {}, NMSE {:.2e}",
        coeffs.stored_count(),
        eig.n(),
        nmse(&rec, &f)
    );
    Ok(())
}
