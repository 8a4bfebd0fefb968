use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Atoms whose component outside the current span falls below this are skipped.
const DEPENDENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct OmpResult {
    /// One coefficient per dictionary column; at most `T` nonzero.
    pub coefficients: Vec<f64>,
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    /// `‖f‖` followed by the residual norm after each selection.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit with `T` selections over unit-norm columns.
/// The least-squares refit is kept incrementally as a Gram–Schmidt basis of
/// the selected atoms.
pub fn omp_sparse_code(dictionary: &DMatrix<f64>, f: &[f64], t: usize) -> Result<OmpResult> {
    let (n, atoms) = dictionary.shape();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if t == 0 || t > atoms {
        return Err(Error::param(format!(
            "sparsity must lie in 1..={atoms}, got {t}"
        )));
    }
    let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut residual = f.to_vec();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(t);
    // r[j] holds column j of the triangular factor
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut support = Vec::with_capacity(t);
    let mut usable = vec![true; atoms];
    let mut residual_norms = vec![f_norm];

    while support.len() < t {
        if residual_norms.last().copied().unwrap_or(0.0) <= 1e-15 * f_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        let mut best = None;
        let mut best_corr = -1.0;
        for j in 0..atoms {
            if !usable[j] {
                continue;
            }
            let c: f64 = dictionary
                .column(j)
                .iter()
                .zip(&residual)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs();
            if c > best_corr {
                best_corr = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        usable[j] = false;
        let d: Vec<f64> = dictionary.column(j).iter().copied().collect();
        let mut w = d.clone();
        let mut coef = vec![0.0; q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c: f64 = qk.iter().zip(&w).map(|(a, b)| a * b).sum();
                coef[k] += c;
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= c * qi;
                }
            }
        }
        let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if w_norm < DEPENDENT_TOL {
            continue;
        }
        for wi in &mut w {
            *wi /= w_norm;
        }
        coef.push(w_norm);
        let c: f64 = w.iter().zip(&residual).map(|(a, b)| a * b).sum();
        for (ri, wi) in residual.iter_mut().zip(&w) {
            *ri -= c * wi;
        }
        q.push(w);
        r.push(coef);
        support.push(j);
        residual_norms.push(residual.iter().map(|v| v * v).sum::<f64>().sqrt());
    }

    // back-substitute R x = Q^T f
    let s = support.len();
    let qtf: Vec<f64> = q
        .iter()
        .map(|qk| qk.iter().zip(f).map(|(a, b)| a * b).sum())
        .collect();
    let mut x = vec![0.0; s];
    for i in (0..s).rev() {
        let mut acc = qtf[i];
        for (k, xk) in x.iter().enumerate().skip(i + 1) {
            acc -= r[k][i] * xk;
        }
        x[i] = acc / r[i][i];
    }
    let mut coefficients = vec![0.0; atoms];
    for (&j, v) in support.iter().zip(x) {
        coefficients[j] = v;
    }
    Ok(OmpResult {
        coefficients,
        support,
        residual_norms,
    })
}
