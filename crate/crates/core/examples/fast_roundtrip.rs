//! Fast transform on a triangulated disc, with and without signal-adapted
//! sampling.

use mcsfb::cheby::CacheStorage;
use mcsfb::fast::{fast_design, fast_roundtrip, FastParams};
use mcsfb::graph::{generate_graph, GraphKind, Mask, Stencil};
use mcsfb::synthesis::SynthesisConfig;
use mcsfb::{build_laplacian, nmse, LaplacianKind};

fn main() -> mcsfb::Result<()> {
    let mask = Mask::from_fn(41, 41, |i, j| {
        (i as f64 - 20.0).powi(2) + (j as f64 - 20.0).powi(2) <= 20.5 * 20.5
    });
    let g = generate_graph(
        &GraphKind::GridFromMask {
            mask,
            stencil: Stencil::Six,
        },
        0,
    )?;
    let coords = g.coords().unwrap();
    let f: Vec<f64> = coords
        .iter()
        .map(|p| {
            let (x, y) = (p[0] / 40.0, p[1] / 40.0);
            (2.0 * x).cos() + y * y + if x + 0.5 * y > 0.8 { 1.0 } else { 0.0 }
        })
        .collect();

    let mut op = build_laplacian(&g, LaplacianKind::Combinatorial)?;
    op.estimate_lambda_max(50, 0)?;
    let params = FastParams::default();
    let design = fast_design(&op, &params, CacheStorage::default())?;
    let config = SynthesisConfig::scenario_b();

    for adapted in [false, true] {
        let run = fast_roundtrip(&op, &design, &params, &f, adapted, &config)?;
        let counts: Vec<usize> = run.plan.bands.iter().map(|b| b.n).collect();
        let iters: Vec<usize> = run.report.bands.iter().map(|b| b.iters).collect();
        println!(
            "adapted={adapted:<5} N={} stored={} samples {counts:?} cg iters {iters:?} NMSE {:.2e}",
            op.n(),
            run.coeffs.stored_count(),
            nmse(&run.reconstruction, &f)
        );
    }
    Ok(())
}
