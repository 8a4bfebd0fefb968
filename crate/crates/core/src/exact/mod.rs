//! The exact transform for graphs small enough to diagonalize.
//!
//! The spectrum is split into `M` half-open bands `[τ_{m-1}, τ_m)`. Band `m`
//! keeps the samples of its ideal band-pass output on a vertex set `V_m` with
//! `|V_m| = |R_m|`, chosen so every `U_{V_m, R_m}` is nonsingular. The sets
//! partition the vertices, so exactly `N` coefficients are stored and the
//! synthesis `Σ_m U_{R_m} U_{V_m,R_m}^{-1} y_m` is exact.

mod omp;
mod uniqueness;

pub use omp::{omp_sparse_code, OmpResult};
pub use uniqueness::{
    greedy_uniqueness_set, min_singular_values, partition_uniqueness_sets, VertexPartition,
};

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coeffs::{AnalysisCoefficients, BandCoefficients};
use crate::design::Spacing;
use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;

/// Largest graph the exact path will diagonalize by default.
pub const DEFAULT_EXACT_CAP: usize = 5000;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `ℓ` is the eigenvector of `values[ℓ]`.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `U_R`, the eigenvector columns indexed by `r`.
    pub fn columns(&self, r: &[usize]) -> DMatrix<f64> {
        self.vectors.select_columns(r)
    }

    /// `U_{S,R}`.
    pub fn submatrix(&self, s: &[usize], r: &[usize]) -> DMatrix<f64> {
        self.vectors.select_rows(s).select_columns(r)
    }
}

pub fn dense_eigendecomposition(op: &LaplacianOperator) -> Result<EigenDecomposition> {
    dense_eigendecomposition_capped(op, DEFAULT_EXACT_CAP)
}

/// Full symmetric eigendecomposition, eigenvalues ascending, each
/// eigenvector signed so its first clearly nonzero entry is positive.
pub fn dense_eigendecomposition_capped(
    op: &LaplacianOperator,
    cap: usize,
) -> Result<EigenDecomposition> {
    let n = op.n();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Spectral index sets `R_m = {ℓ : τ_{m-1} <= λ_ℓ < τ_m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPartition {
    pub band_ends: Vec<f64>,
    pub bands: Vec<Vec<usize>>,
}

impl SpectralPartition {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }
}

/// Assigns eigenvalue indices to bands by value. Roundoff-negative
/// eigenvalues go to the first band.
pub fn partition_spectrum(
    eig: &EigenDecomposition,
    band_ends: &[f64],
) -> Result<SpectralPartition> {
    if band_ends.len() < 2 {
        return Err(Error::param("need at least two band ends"));
    }
    if band_ends[0] != 0.0 {
        return Err(Error::param("the first band end must be 0"));
    }
    if band_ends.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("band ends must be strictly increasing"));
    }
    let top = *band_ends.last().unwrap();
    if let Some(&l) = eig.values.last() {
        if l >= top {
            return Err(Error::param(format!(
                "last band end {top} does not exceed the largest eigenvalue {l}"
            )));
        }
    }
    let m = band_ends.len() - 1;
    let mut bands = vec![Vec::new(); m];
    for (idx, &l) in eig.values.iter().enumerate() {
        let band = band_ends[1..m].partition_point(|&t| t <= l);
        bands[band].push(idx);
    }
    for (k, b) in bands.iter().enumerate() {
        if b.is_empty() {
            warn!("band {} of the spectral partition is empty", k + 1);
        }
    }
    Ok(SpectralPartition {
        band_ends: band_ends.to_vec(),
        bands,
    })
}

fn top_end(values: &[f64]) -> f64 {
    let l = values.last().copied().unwrap_or(0.0).max(0.0);
    l * (1.0 + 1e-9) + 1e-12
}

/// Band ends placed between eigenvalues so that the bands hold the given
/// numbers of eigenvalues (ascending band order).
fn ends_from_counts(values: &[f64], counts: &[usize]) -> Vec<f64> {
    let top = top_end(values);
    let mut ends = vec![0.0];
    let mut below = 0;
    for &c in &counts[..counts.len() - 1] {
        below += c;
        let prev = *ends.last().unwrap();
        let t = if below == 0 {
            0.0
        } else if below >= values.len() {
            top
        } else {
            0.5 * (values[below - 1] + values[below])
        };
        // keep the ends strictly increasing even when the counts cannot be met
        ends.push(t.max(prev + 1e-12 * top).min(top));
    }
    ends.push(top);
    ends
}

/// Exact-spectrum band ends whose counts halve towards the bottom: band `m`
/// of `M` holds `round(N·2^{-(M-m+1)})` eigenvalues for `m >= 2` and band 1
/// the rest. Each end sits midway between neighbouring eigenvalues.
pub fn log_band_ends(eig: &EigenDecomposition, m: usize) -> Result<Vec<f64>> {
    exact_band_ends(eig, m, Spacing::AdaptedLog)
}

/// Band ends for the exact transform. The uniform spacings use the exact
/// largest eigenvalue; the adapted spacings split the sorted eigenvalues by
/// count.
pub fn exact_band_ends(eig: &EigenDecomposition, m: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::param("need at least one band"));
    }
    let n = eig.n();
    let top = top_end(&eig.values);
    let ends = match spacing {
        Spacing::UniformLinear => (0..=m).map(|k| top * k as f64 / m as f64).collect(),
        Spacing::UniformLog => {
            let mut e = vec![0.0];
            e.extend((1..=m).map(|k| top * 0.5f64.powi((m - k) as i32)));
            e
        }
        Spacing::AdaptedLinear => {
            let bounds: Vec<usize> = (0..=m)
                .map(|k| ((n * k) as f64 / m as f64).round() as usize)
                .collect();
            let counts: Vec<usize> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
            ends_from_counts(&eig.values, &counts)
        }
        Spacing::AdaptedLog => {
            let mut counts = vec![0usize; m];
            for (k, c) in counts.iter_mut().enumerate().skip(1) {
                *c = (n as f64 * 0.5f64.powi((m - k) as i32)).round() as usize;
            }
            let upper: usize = counts.iter().sum();
            counts[0] = n.saturating_sub(upper);
            ends_from_counts(&eig.values, &counts)
        }
    };
    Ok(ends)
}

fn check_signal(eig: &EigenDecomposition, len: usize) -> Result<()> {
    if len != eig.n() {
        return Err(Error::DimensionMismatch {
            expected: eig.n(),
            got: len,
        });
    }
    Ok(())
}

fn check_structures(sp: &SpectralPartition, vp: &VertexPartition) -> Result<()> {
    if sp.n_bands() != vp.sets.len() {
        return Err(Error::DimensionMismatch {
            expected: sp.n_bands(),
            got: vp.sets.len(),
        });
    }
    for (r, v) in sp.bands.iter().zip(&vp.sets) {
        if r.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `y_m = (U_{R_m} U_{R_m}^T f)` restricted to `V_m`, for every band.
pub fn exact_analyze(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    vp: &VertexPartition,
    f: &[f64],
) -> Result<AnalysisCoefficients> {
    check_signal(eig, f.len())?;
    check_structures(sp, vp)?;
    let fv = DVector::from_column_slice(f);
    let bands = sp
        .bands
        .iter()
        .zip(&vp.sets)
        .map(|(r, v)| {
            let ur = eig.columns(r);
            let g = ur.tr_mul(&fv);
            let y = eig.submatrix(v, r) * g;
            BandCoefficients {
                vertices: v.clone(),
                values: y.iter().copied().collect(),
            }
        })
        .collect();
    Ok(AnalysisCoefficients { bands, mean: None })
}

/// `Σ_m U_{R_m} U_{V_m,R_m}^{-1} y_m`, each square system solved by LU with
/// partial pivoting.
pub fn exact_synthesize(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    vp: &VertexPartition,
    coeffs: &AnalysisCoefficients,
) -> Result<Vec<f64>> {
    check_structures(sp, vp)?;
    if coeffs.bands.len() != sp.n_bands() {
        return Err(Error::DimensionMismatch {
            expected: sp.n_bands(),
            got: coeffs.bands.len(),
        });
    }
    let mut out = DVector::zeros(eig.n());
    for (m, ((r, v), band)) in sp.bands.iter().zip(&vp.sets).zip(&coeffs.bands).enumerate() {
        if r.is_empty() {
            continue;
        }
        if band.vertices != *v {
            return Err(Error::ArtifactMismatch(format!(
                "band {} coefficients are not on its vertex set",
                m + 1
            )));
        }
        let y = DVector::from_column_slice(&band.values);
        let c = eig
            .submatrix(v, r)
            .lu()
            .solve(&y)
            .ok_or(Error::Singular { band: m + 1 })?;
        out += eig.columns(r) * c;
    }
    Ok(out.iter().copied().collect())
}

/// The atom `U_{R_m} U_{R_m}^T δ_i` (band index `m` from 0).
pub fn atom(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    m: usize,
    i: usize,
) -> Result<Vec<f64>> {
    let r = sp
        .bands
        .get(m)
        .ok_or_else(|| Error::param(format!("no band {m}")))?;
    if i >= eig.n() {
        return Err(Error::param(format!("no vertex {i}")));
    }
    let ur = eig.columns(r);
    let row = ur.row(i).transpose();
    Ok((ur * row).iter().copied().collect())
}

/// The `N` unit-norm atoms `h_m(L) δ_i`, `i ∈ V_m`, as columns in band order.
pub fn dictionary(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    vp: &VertexPartition,
) -> Result<DMatrix<f64>> {
    check_structures(sp, vp)?;
    let n = eig.n();
    let mut d = DMatrix::zeros(n, n);
    let mut col = 0;
    for (r, v) in sp.bands.iter().zip(&vp.sets) {
        if r.is_empty() {
            continue;
        }
        let ur = eig.columns(r);
        let block = &ur * eig.submatrix(v, r).transpose();
        for j in 0..v.len() {
            let c = block.column(j);
            let norm = c.norm();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "atom at vertex {} is identically zero",
                    v[j]
                )));
            }
            d.set_column(col, &(c / norm));
            col += 1;
        }
    }
    Ok(d)
}
