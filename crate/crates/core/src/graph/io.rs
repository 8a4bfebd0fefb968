//! Graph and signal file readers.
//!
//! Graphs: Matrix Market coordinate files (`real`, `integer` or `pattern`;
//! `symmetric` or `general`) and whitespace-delimited edge lists `i j [w]`.
//! Both use 1-based vertex numbers. Signals: one value per line, or the first
//! column of a CSV file (an optional non-numeric header line is skipped).

use std::collections::BTreeMap;
use std::ops::Deref;
use std::path::Path;

use log::warn;

use super::Graph;
use crate::error::{Error, Result};

/// A real value on every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal(Vec<f64>);

impl GraphSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "signal value at vertex {i} is not finite"
            )));
        }
        Ok(GraphSignal(values))
    }

    /// Checks that the signal lives on `graph`.
    pub fn for_graph(values: Vec<f64>, graph: &Graph) -> Result<Self> {
        if values.len() != graph.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: graph.n_vertices(),
                got: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for GraphSignal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a graph, choosing the parser from the `%%MatrixMarket` banner.
pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = read(path)?;
    if text.trim_start().starts_with("%%MatrixMarket") {
        parse_matrix_market(&text, path)
    } else {
        parse_edge_list(&text, path)
    }
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<GraphSignal> {
    let path = path.as_ref();
    parse_signal(&read(path)?, path)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_index(tok: &str, path: &Path, line: usize) -> Result<usize> {
    let v: usize = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad vertex index `{tok}`")))?;
    if v == 0 {
        return Err(parse_err(path, line, "vertex indices are 1-based"));
    }
    Ok(v - 1)
}

fn parse_weight(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let w: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad weight `{tok}`")))?;
    if !(w > 0.0 && w.is_finite()) {
        return Err(parse_err(
            path,
            line,
            format!("edge weight must be positive, got {w}"),
        ));
    }
    Ok(w)
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Graph> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, banner) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let banner_lc = banner.to_ascii_lowercase();
    let fields: Vec<&str> = banner_lc.split_whitespace().collect();
    if fields.len() < 5 || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(
            path,
            1,
            "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`",
        ));
    }
    let pattern = match fields[3] {
        "real" | "integer" => false,
        "pattern" => true,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported field type `{other}`"),
            ))
        }
    };
    let symmetric = match fields[4] {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported symmetry `{other}`"),
            ))
        }
    };

    let mut header = None;
    let mut entries = Vec::new();
    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if header.is_none() {
            if toks.len() != 3 {
                return Err(parse_err(path, no, "expected `rows cols nnz`"));
            }
            let dims: Vec<usize> = toks
                .iter()
                .map(|t| {
                    t.parse()
                        .map_err(|_| parse_err(path, no, format!("bad size `{t}`")))
                })
                .collect::<Result<_>>()?;
            if dims[0] != dims[1] {
                return Err(parse_err(path, no, "adjacency matrix must be square"));
            }
            header = Some((dims[0], dims[2]));
            continue;
        }
        let need = if pattern { 2 } else { 3 };
        if toks.len() < need {
            return Err(parse_err(path, no, format!("expected {need} fields")));
        }
        let i = parse_index(toks[0], path, no)?;
        let j = parse_index(toks[1], path, no)?;
        let w = if pattern {
            1.0
        } else {
            parse_weight(toks[2], path, no)?
        };
        entries.push((no, i, j, w));
    }
    let (n, nnz) = header.ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    if entries.len() != nnz {
        warn!(
            "{}: header declares {nnz} entries, found {}",
            path.display(),
            entries.len()
        );
    }
    for &(no, i, j, _) in &entries {
        if i >= n || j >= n {
            return Err(parse_err(
                path,
                no,
                format!("index out of range for a {n}x{n} matrix"),
            ));
        }
    }

    let mut edges = Vec::new();
    let mut dropped_loops = 0;
    if symmetric {
        for &(_, i, j, w) in &entries {
            if i == j {
                dropped_loops += 1;
            } else {
                edges.push((i, j, w));
            }
        }
    } else {
        // a general matrix must already be symmetric; keep the upper triangle
        let mut upper: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
        let mut lower: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
        for &(no, i, j, w) in &entries {
            if i == j {
                dropped_loops += 1;
            } else if i < j {
                upper.entry((i, j)).or_insert((no, 0.0)).1 += w;
            } else {
                lower.entry((j, i)).or_insert((no, 0.0)).1 += w;
            }
        }
        for (&(i, j), &(no, w)) in &upper {
            match lower.get(&(i, j)) {
                Some(&(_, w2)) if (w - w2).abs() <= 1e-12 * w.abs().max(w2.abs()) => {
                    edges.push((i, j, w))
                }
                _ => {
                    return Err(parse_err(
                        path,
                        no,
                        format!("asymmetric input at ({}, {})", i + 1, j + 1),
                    ))
                }
            }
        }
        if let Some((&(i, j), &(no, _))) = lower.iter().find(|(k, _)| !upper.contains_key(k)) {
            return Err(parse_err(
                path,
                no,
                format!("asymmetric input at ({}, {})", j + 1, i + 1),
            ));
        }
    }
    if dropped_loops > 0 {
        warn!(
            "{}: dropped {dropped_loops} self-loop entries",
            path.display()
        );
    }
    Graph::from_edges(n, edges)
}

/// Edge list `i j [w]`, 1-based, one undirected edge per line. Repeated
/// edges (in either orientation) are summed; self-loops are dropped.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut n = 0;
    let mut dropped_loops = 0;
    for (k, raw) in text.lines().enumerate() {
        let no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(path, no, "expected `i j [w]`"));
        }
        let i = parse_index(toks[0], path, no)?;
        let j = parse_index(toks[1], path, no)?;
        let w = if toks.len() == 3 {
            parse_weight(toks[2], path, no)?
        } else {
            1.0
        };
        n = n.max(i + 1).max(j + 1);
        if i == j {
            dropped_loops += 1;
        } else {
            edges.push((i, j, w));
        }
    }
    if n == 0 {
        return Err(parse_err(path, 1, "edge list contains no edges"));
    }
    if dropped_loops > 0 {
        warn!("{}: dropped {dropped_loops} self-loops", path.display());
    }
    Graph::from_edges(n, edges)
}

pub fn parse_signal(text: &str, path: &Path) -> Result<GraphSignal> {
    let mut values = Vec::new();
    let mut seen_data = false;
    for (k, raw) in text.lines().enumerate() {
        let no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                values.push(v);
                seen_data = true;
            }
            Ok(v) => return Err(parse_err(path, no, format!("non-finite value {v}"))),
            Err(_) if !seen_data && values.is_empty() => continue, // header
            Err(_) => return Err(parse_err(path, no, format!("bad value `{field}`"))),
        }
    }
    if values.is_empty() {
        return Err(parse_err(path, 1, "signal file contains no values"));
    }
    GraphSignal::new(values)
}
