//! Designs a five band filter bank on a random sensor graph and prints the
//! band ends before and after adjustment, with the expected eigenvalue count
//! in each band.

use mcsfb::cheby::{estimate_eigencount, CacheStorage};
use mcsfb::fast::{fast_design, FastParams};
use mcsfb::graph::{generate_graph, GraphKind};
use mcsfb::{build_laplacian, LaplacianKind};

fn main() -> mcsfb::Result<()> {
    let g = generate_graph(&GraphKind::sensor(500), 1)?;
    let mut op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    op.estimate_lambda_max(50, 1)?;

    let params = FastParams {
        seed: 1,
        ..FastParams::default()
    };
    let design = fast_design(&op, &params, CacheStorage::Full)?;
    let bank = &design.bank;
    println!(
        "lambda_max {:.3}, K = {}, {:?} spacing",
        bank.lambda_max, bank.k, bank.mode
    );
    println!(
        "initial  {:?}",
        bank.initial_ends
            .iter()
            .map(|t| format!("{t:.3}"))
            .collect::<Vec<_>>()
    );
    println!(
        "adjusted {:?}",
        bank.adjusted_ends
            .iter()
            .map(|t| format!("{t:.3}"))
            .collect::<Vec<_>>()
    );
    for m in 0..bank.n_bands() {
        let count = estimate_eigencount(&design.cache, &bank.filter(m))?;
        println!("band {}: ~{count:.1} eigenvalues", m + 1);
    }
    Ok(())
}
