//! Sparse graph Laplacians and the matrix-vector kernel everything else runs on.
//!
//! Every product is counted: [`LaplacianOperator::matvec_count`] reports the
//! number of single-vector products performed since construction (a block
//! product over `J` columns counts `J`). The counters are what the complexity
//! tests assert against.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Multiplicative safety margin applied to the top Ritz value.
pub const LAMBDA_MAX_INFLATION: f64 = 1.01;
pub const DEFAULT_LANCZOS_STEPS: usize = 50;
/// Floor used when the operator is identically zero.
pub const LAMBDA_MAX_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianKind {
    /// `D - W`
    #[default]
    Combinatorial,
    /// `I - D^{-1/2} W D^{-1/2}`
    Normalized,
}

#[derive(Debug)]
pub struct LaplacianOperator {
    kind: LaplacianKind,
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    lambda_max: Option<f64>,
    matvecs: AtomicUsize,
}

impl Clone for LaplacianOperator {
    fn clone(&self) -> Self {
        LaplacianOperator {
            kind: self.kind,
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.clone(),
            lambda_max: self.lambda_max,
            matvecs: AtomicUsize::new(0),
        }
    }
}

/// Builds `D - W` or `I - D^{-1/2} W D^{-1/2}` in CSR form with the diagonal
/// stored in its sorted position.
pub fn build_laplacian(graph: &Graph, kind: LaplacianKind) -> Result<LaplacianOperator> {
    let n = graph.n_vertices();
    let degrees = graph.degrees();
    let inv_sqrt: Vec<f64> = match kind {
        LaplacianKind::Combinatorial => Vec::new(),
        LaplacianKind::Normalized => {
            if let Some(v) = degrees.iter().position(|&d| d <= 0.0) {
                return Err(Error::IsolatedVertex { vertex: v });
            }
            degrees.iter().map(|d| 1.0 / d.sqrt()).collect()
        }
    };
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(graph.col_idx().len() + n);
    let mut values = Vec::with_capacity(graph.col_idx().len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let diag = match kind {
            LaplacianKind::Combinatorial => degrees[i],
            LaplacianKind::Normalized => 1.0,
        };
        let mut placed = false;
        for (j, w) in graph.neighbors(i) {
            if !placed && j > i {
                col_idx.push(i);
                values.push(diag);
                placed = true;
            }
            col_idx.push(j);
            values.push(match kind {
                LaplacianKind::Combinatorial => -w,
                LaplacianKind::Normalized => -w * inv_sqrt[i] * inv_sqrt[j],
            });
        }
        if !placed {
            col_idx.push(i);
            values.push(diag);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(LaplacianOperator {
        kind,
        n,
        row_ptr,
        col_idx,
        values,
        lambda_max: None,
        matvecs: AtomicUsize::new(0),
    })
}

impl LaplacianOperator {
    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored nonzeros, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.lambda_max
    }

    pub fn require_lambda_max(&self) -> Result<f64> {
        self.lambda_max
            .ok_or_else(|| Error::param("lambda_max has not been estimated for this operator"))
    }

    /// Sets the spectral upper bound directly (e.g. when reloading a design).
    pub fn set_lambda_max(&mut self, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::param(format!(
                "lambda_max must be positive, got {value}"
            )));
        }
        self.lambda_max = Some(value);
        Ok(())
    }

    pub fn matvec_count(&self) -> usize {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn reset_matvec_count(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
    }

    /// `L x`, checked.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        Ok(y)
    }

    /// `y = L x` without allocation. Lengths must equal `n`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    /// `Y = L X` for a row-major `n x cols` block.
    pub fn apply_block(&self, x: &[f64], y: &mut [f64], cols: usize) {
        assert_eq!(x.len(), self.n * cols);
        assert_eq!(y.len(), self.n * cols);
        self.matvecs.fetch_add(cols, Ordering::Relaxed);
        for i in 0..self.n {
            let out = &mut y[i * cols..(i + 1) * cols];
            out.fill(0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[p];
                let src = &x[self.col_idx[p] * cols..(self.col_idx[p] + 1) * cols];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.values[p];
            }
        }
        m
    }

    /// Largest absolute row sum, an upper bound on every eigenvalue.
    pub fn gershgorin_bound(&self) -> f64 {
        self.row_ptr
            .windows(2)
            .map(|w| self.values[w[0]..w[1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lanczos iteration with full reorthogonalization from a seeded
    /// Gaussian start, `iters` products at most. The top Ritz value `θ`
    /// becomes `max(1.01θ, θ + r)` with `r` its residual bound, capped by the
    /// Gershgorin bound; the result is stored and returned.
    pub fn estimate_lambda_max(&mut self, iters: usize, seed: u64) -> Result<f64> {
        if iters == 0 {
            return Err(Error::param(
                "the eigenvalue estimate needs at least one step",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<f64> = (0..self.n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = dot(&q, &q).sqrt();
        let cap = self.gershgorin_bound();
        if norm == 0.0 || cap == 0.0 {
            self.lambda_max = Some(LAMBDA_MAX_FLOOR);
            return Ok(LAMBDA_MAX_FLOOR);
        }
        q.iter_mut().for_each(|v| *v /= norm);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(iters.min(self.n));
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut w = vec![0.0; self.n];
        for _ in 0..iters.min(self.n) {
            self.apply(&q, &mut w);
            alpha.push(dot(&q, &w));
            basis.push(q);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            beta.push(b);
            if b <= 1e-12 * cap {
                break;
            }
            q = w.iter().map(|v| v / b).collect();
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| match i.abs_diff(j) {
            0 => alpha[i],
            1 => beta[i.min(j)],
            _ => 0.0,
        });
        let eig = t.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let theta = eig.eigenvalues[top];
        let residual = beta[k - 1] * eig.eigenvectors[(k - 1, top)].abs();
        let estimate = (theta * LAMBDA_MAX_INFLATION)
            .max(theta + residual)
            .min(cap)
            .max(LAMBDA_MAX_FLOOR);
        self.lambda_max = Some(estimate);
        Ok(estimate)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
