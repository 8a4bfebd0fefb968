#![allow(dead_code)]

use mcsfb::cheby::PolynomialFilter;
use mcsfb::exact::{dense_eigendecomposition, EigenDecomposition};
use mcsfb::graph::{generate_graph, GraphKind, Mask, Stencil};
use mcsfb::{build_laplacian, Graph, LaplacianKind, LaplacianOperator};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Alternates sensor and community graphs so fixtures cover both shapes.
pub fn random_connected(n: usize, seed: u64) -> Graph {
    let kind = if seed % 2 == 0 {
        GraphKind::sensor(n)
    } else {
        GraphKind::community(n)
    };
    generate_graph(&kind, seed).unwrap()
}

pub fn sensor(n: usize, seed: u64) -> Graph {
    generate_graph(&GraphKind::sensor(n), seed).unwrap()
}

pub fn ring(n: usize) -> Graph {
    generate_graph(&GraphKind::Ring { n }, 0).unwrap()
}

pub fn operator(g: &Graph) -> LaplacianOperator {
    let mut op = build_laplacian(g, LaplacianKind::Combinatorial).unwrap();
    op.estimate_lambda_max(50, 0).unwrap();
    op
}

pub fn eig(op: &LaplacianOperator) -> EigenDecomposition {
    dense_eigendecomposition(op).unwrap()
}

/// `U h(Λ) Uᵀ` for a scalar function `h`.
pub fn spectral_matrix(e: &EigenDecomposition, h: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(e.n(), e.values.iter().map(|&l| h(l)));
    &e.vectors * DMatrix::from_diagonal(&d) * e.vectors.transpose()
}

pub fn dense_filter(e: &EigenDecomposition, filter: &PolynomialFilter, f: &[f64]) -> Vec<f64> {
    let m = spectral_matrix(e, |l| filter.eval(l));
    (m * DVector::from_column_slice(f))
        .iter()
        .copied()
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > rtol * top.max(1.0)).count()
}

/// A triangulated disc of about 2,500 vertices.
pub fn mesh() -> Graph {
    let r = 28.5f64;
    let mask = Mask::from_fn(57, 57, |i, j| {
        (i as f64 - 28.0).powi(2) + (j as f64 - 28.0).powi(2) <= r * r
    });
    generate_graph(
        &GraphKind::GridFromMask {
            mask,
            stencil: Stencil::Six,
        },
        0,
    )
    .unwrap()
}

/// Smooth trend plus a jump across a line, from vertex coordinates.
pub fn piecewise_smooth(g: &Graph) -> Vec<f64> {
    let coords = g.coords().expect("fixture has coordinates");
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in coords {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    coords
        .iter()
        .map(|p| {
            let x = (p[0] - lo[0]) / (hi[0] - lo[0]);
            let y = (p[1] - lo[1]) / (hi[1] - lo[1]);
            (2.0 * x).cos() + y * y + if x + 0.5 * y > 0.8 { 1.0 } else { 0.0 }
        })
        .collect()
}

/// A sensor graph with two extra leaves hanging off vertex 0. The leaves are
/// twins, so `δ_a - δ_b` is an eigenvector with a single nonzero pair.
pub fn twin_leaf_graph(n: usize, seed: u64) -> (Graph, usize, usize) {
    let base = sensor(n, seed);
    let m = base.n_vertices();
    let mut edges: Vec<(usize, usize, f64)> = base.edges().collect();
    edges.push((0, m, 1.0));
    edges.push((0, m + 1, 1.0));
    (Graph::from_edges(m + 2, edges).unwrap(), m, m + 1)
}

pub fn random_subset(n: usize, k: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = r.random_range(i..n);
        all.swap(i, j);
    }
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

pub fn complement(n: usize, s: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| s.binary_search(i).is_err()).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = 0.5 * (i + j) as f64;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Sum of the bottom `k` eigenvectors with random coefficients.
pub fn lowpass_signal(e: &EigenDecomposition, k: usize, seed: u64) -> Vec<f64> {
    let c = gaussian(k, seed);
    let v = e.vectors.columns(0, k) * DVector::from_column_slice(&c);
    v.iter().copied().collect()
}
