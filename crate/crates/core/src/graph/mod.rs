//! Weighted undirected graphs in compressed sparse row form.
//!
//! Vertices are indexed `0..n`. The adjacency is stored symmetrically: every
//! undirected edge `{i, j}` appears in both row `i` and row `j`. Column
//! indices are sorted within each row and never repeat.

mod generate;
mod io;

pub use generate::{generate_graph, GraphKind, Mask, Stencil};
pub use io::{
    load_graph, load_signal, parse_edge_list, parse_matrix_market, parse_signal, GraphSignal,
};

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    /// Planar vertex positions, when the graph came from a geometric generator.
    coords: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds a graph from undirected edges. Duplicate edges (in either
    /// orientation) have their weights summed.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::InvalidGraph(
                "graph must have at least one vertex".into(),
            ));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references a vertex outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) has nonpositive or non-finite weight {w}"
                )));
            }
            *rows[i].entry(j).or_insert(0.0) += w;
            *rows[j].entry(i).or_insert(0.0) += w;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, w) in row {
                col_idx.push(j);
                weights.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Graph {
            n,
            row_ptr,
            col_idx,
            weights,
            coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: coords.len(),
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.weights[self.row_ptr[i]..self.row_ptr[i + 1]]
            .iter()
            .sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Iterates each undirected edge once as `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Component label per vertex, labels numbered in order of first appearance.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if label[u] == usize::MAX {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().1 == 1
    }

    /// Restricts the graph to its largest connected component. Returns the
    /// new graph and, for each kept vertex, its index in `self`.
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let (labels, count) = self.component_labels();
        if count <= 1 {
            return (self.clone(), (0..self.n).collect());
        }
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        // first largest wins on ties
        let keep_label =
            (0..count).fold(0, |best, l| if sizes[l] > sizes[best] { l } else { best });
        let kept: Vec<usize> = (0..self.n).filter(|&v| labels[v] == keep_label).collect();
        warn!(
            "graph has {count} connected components; keeping the largest ({} of {} vertices)",
            kept.len(),
            self.n
        );
        (self.induced_subgraph(&kept), kept)
    }

    /// Subgraph induced by `vertices` (which must be sorted and distinct).
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Graph {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            new_index[v] = k;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        for &v in vertices {
            for (u, w) in self.neighbors(v) {
                if new_index[u] != usize::MAX {
                    col_idx.push(new_index[u]);
                    weights.push(w);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let coords = self
            .coords
            .as_ref()
            .map(|c| vertices.iter().map(|&v| c[v]).collect());
        Graph {
            n: vertices.len(),
            row_ptr,
            col_idx,
            weights,
            coords,
        }
    }

    /// Dense weighted adjacency matrix.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.neighbors(i) {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Hex SHA-256 over the vertex count and the CSR arrays. Used to chain
    /// artifacts produced from the same graph.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &p in &self.row_ptr {
            h.update((p as u64).to_le_bytes());
        }
        for &c in &self.col_idx {
            h.update((c as u64).to_le_bytes());
        }
        for &w in &self.weights {
            h.update(w.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Checks the structural invariants: sorted unique columns, symmetry,
    /// zero diagonal, positive weights.
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.n + 1
            || *self.row_ptr.last().unwrap_or(&0) != self.col_idx.len()
        {
            return Err(Error::InvalidGraph("malformed row pointer array".into()));
        }
        for i in 0..self.n {
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidGraph(format!(
                    "row {i} has unsorted or duplicate columns"
                )));
            }
            for (j, w) in self.neighbors(i) {
                if j == i {
                    return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({i}, {j}) has weight {w}"
                    )));
                }
                let back = self.neighbors(j).find(|&(k, _)| k == i).map(|(_, v)| v);
                if back != Some(w) {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric entry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}
