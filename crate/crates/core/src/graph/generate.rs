use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Neighborhood stencil for grid graphs built from a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// Horizontal and vertical neighbors.
    Four,
    /// Four-neighbor stencil plus one diagonal: a triangulated mesh.
    Six,
    /// All eight surrounding cells.
    Eight,
}

impl Stencil {
    fn offsets(self) -> &'static [(isize, isize)] {
        // forward half-stencil; each edge is emitted once
        match self {
            Stencil::Four => &[(0, 1), (1, 0)],
            Stencil::Six => &[(0, 1), (1, 0), (1, 1)],
            Stencil::Eight => &[(0, 1), (1, 0), (1, 1), (1, -1)],
        }
    }
}

/// Row-major boolean raster; `true` cells become vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            cells: vec![true; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let cells = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Mask { rows, cols, cells }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphKind {
    /// Uniform points in the unit square joined to their `k` nearest
    /// neighbors (symmetrized), unit weights.
    RandomSensor {
        n: usize,
        k: usize,
    },
    Ring {
        n: usize,
    },
    Path {
        n: usize,
    },
    /// `communities` clusters of points on a circle; k-nearest-neighbor
    /// edges inside each cluster and sparse random edges between them.
    Community {
        n: usize,
        communities: usize,
        k: usize,
        inter_prob: f64,
    },
    GridFromMask {
        mask: Mask,
        stencil: Stencil,
    },
}

impl GraphKind {
    pub fn sensor(n: usize) -> Self {
        GraphKind::RandomSensor { n, k: 6 }
    }

    pub fn community(n: usize) -> Self {
        let communities = ((n as f64).sqrt() / 2.0).round().max(2.0) as usize;
        GraphKind::Community {
            n,
            communities,
            k: 5,
            inter_prob: 0.02,
        }
    }
}

/// Generates a graph of the requested kind. Disconnected results are cut
/// down to their largest connected component.
pub fn generate_graph(kind: &GraphKind, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = match kind {
        GraphKind::Ring { n } => {
            require_n(*n)?;
            if *n == 2 {
                Graph::from_edges(2, [(0, 1, 1.0)])?
            } else {
                Graph::from_edges(*n, (0..*n).map(|i| (i, (i + 1) % n, 1.0)))?
            }
        }
        GraphKind::Path { n } => {
            require_n(*n)?;
            Graph::from_edges(*n, (0..n - 1).map(|i| (i, i + 1, 1.0)))?
        }
        GraphKind::RandomSensor { n, k } => {
            require_n(*n)?;
            if *k == 0 {
                return Err(Error::param("sensor graph needs k >= 1"));
            }
            let pts: Vec<[f64; 2]> = (0..*n)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let all: Vec<usize> = (0..*n).collect();
            let edges = knn_edges(&pts, &all, *k);
            Graph::from_edges(*n, edges)?.with_coords(pts)?
        }
        GraphKind::Community {
            n,
            communities,
            k,
            inter_prob,
        } => {
            require_n(*n)?;
            if *communities == 0 || 2 * communities > *n {
                return Err(Error::param("community count must be in 1..=n/2"));
            }
            if !(0.0..=1.0).contains(inter_prob) {
                return Err(Error::param("inter_prob must lie in [0, 1]"));
            }
            community_graph(*n, *communities, *k, *inter_prob, &mut rng)?
        }
        GraphKind::GridFromMask { mask, stencil } => grid_graph(mask, *stencil)?,
    };
    Ok(graph.largest_component().0)
}

fn require_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!(
            "graph needs at least 2 vertices, got {n}"
        )));
    }
    Ok(())
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// k-nearest-neighbor edges among the points indexed by `members`.
fn knn_edges(pts: &[[f64; 2]], members: &[usize], k: usize) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for &i in members {
        let mut d: Vec<(f64, usize)> = members
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (dist2(pts[i], pts[j]), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in d.iter().take(k) {
            // keep each unordered pair once; symmetrization happens via dedup below
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges.into_iter().map(|(i, j)| (i, j, 1.0)).collect()
}

fn community_graph(
    n: usize,
    communities: usize,
    k: usize,
    inter_prob: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Graph> {
    // every community gets at least two members, the rest are spread at random
    let mut label: Vec<usize> = (0..n)
        .map(|v| if v < 2 * communities { v / 2 } else { 0 })
        .collect();
    for l in label.iter_mut().skip(2 * communities) {
        *l = rng.random_range(0..communities);
    }
    let mut members = vec![Vec::new(); communities];
    for (v, &l) in label.iter().enumerate() {
        members[l].push(v);
    }
    let ring_radius = 1.0;
    let mut pts = vec![[0.0; 2]; n];
    for (c, group) in members.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * c as f64 / communities as f64;
        let center = [ring_radius * theta.cos(), ring_radius * theta.sin()];
        let spread = 0.5 * (group.len() as f64 / n as f64).sqrt();
        for &v in group {
            let r = spread * rng.random::<f64>().sqrt();
            let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            pts[v] = [center[0] + r * a.cos(), center[1] + r * a.sin()];
        }
    }
    let mut edges = Vec::new();
    for group in &members {
        edges.extend(knn_edges(
            &pts,
            group,
            k.min(group.len().saturating_sub(1)).max(1),
        ));
    }
    for v in 0..n {
        if rng.random::<f64>() < inter_prob {
            let u = rng.random_range(0..n);
            if label[u] != label[v] {
                edges.push((v.min(u), v.max(u), 1.0));
            }
        }
    }
    // chain neighboring communities so the graph is connected before LCC extraction
    for c in 0..communities {
        let next = (c + 1) % communities;
        if next != c {
            let a = members[c][0];
            let b = members[next][0];
            edges.push((a.min(b), a.max(b), 1.0));
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Graph::from_edges(n, edges)?.with_coords(pts)
}

fn grid_graph(mask: &Mask, stencil: Stencil) -> Result<Graph> {
    if mask.cells.len() != mask.rows * mask.cols {
        return Err(Error::param("mask cell count does not match rows * cols"));
    }
    let mut index = vec![usize::MAX; mask.cells.len()];
    let mut coords = Vec::new();
    for r in 0..mask.rows {
        for c in 0..mask.cols {
            if mask.get(r, c) {
                index[r * mask.cols + c] = coords.len();
                coords.push([c as f64, r as f64]);
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::param("mask has no cells set"));
    }
    let mut edges = Vec::new();
    for r in 0..mask.rows {
        for c in 0..mask.cols {
            let a = index[r * mask.cols + c];
            if a == usize::MAX {
                continue;
            }
            for &(dr, dc) in stencil.offsets() {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= mask.rows as isize || cc >= mask.cols as isize {
                    continue;
                }
                let b = index[rr as usize * mask.cols + cc as usize];
                if b != usize::MAX {
                    edges.push((a, b, 1.0));
                }
            }
        }
    }
    Graph::from_edges(coords.len(), edges)?.with_coords(coords)
}
