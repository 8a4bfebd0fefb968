//! Filter banks that split a graph signal into spectral bands and keep exactly
//! one coefficient per vertex.
//!
//! Two transforms share one interface. The exact transform diagonalizes the
//! Laplacian, splits the spectrum into `M` ideal bands and picks disjoint
//! vertex uniqueness sets, which gives perfect reconstruction from exactly `N`
//! coefficients. The fast transform replaces ideal filters with damped
//! Chebyshev polynomials, samples vertices at random according to estimated
//! leverage, and reconstructs each band by a regularized least-squares solve.

pub mod cheby;
pub mod cli;
pub mod coeffs;
pub mod design;
pub mod error;
pub mod exact;
pub mod fast;
pub mod graph;
pub mod laplacian;
pub mod pchip;
pub mod sampling;
pub mod synthesis;

pub use coeffs::{AnalysisCoefficients, BandCoefficients};
pub use error::{Error, Result};
pub use graph::{Graph, GraphSignal};
pub use laplacian::{build_laplacian, LaplacianKind, LaplacianOperator};

/// Normalized mean square error `‖estimate - reference‖² / ‖reference‖²`.
pub fn nmse(estimate: &[f64], reference: &[f64]) -> f64 {
    let err: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let energy: f64 = reference.iter().map(|v| v * v).sum();
    err / energy
}
