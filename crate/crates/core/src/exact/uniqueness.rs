//! Vertex uniqueness sets for the bands of a spectral partition.
//!
//! Band by band, the remaining vertex pool `P` is split into `V_m` and
//! `P \ V_m` so that the rows `V_m` of `U_{P,R_m}` and the rows `P \ V_m` of
//! `U_{P,R_{m+1:M}}` are both bases. Greedy pivoting gives a basis `γ1` for
//! the first and, preferring rows outside `γ1`, a basis `γ2` for the second.
//! Rows claimed by both are then freed by matroid-partition augmenting paths:
//! a shortest chain of single-row exchanges from an unused row to a set that
//! can absorb one more row.

use std::collections::VecDeque;

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EigenDecomposition, SpectralPartition};
use crate::error::{Error, Result};

/// Residual norm below which a row counts as dependent.
const PIVOT_TOL: f64 = 1e-12;
/// Relative window treated as a tie when pivoting.
const TIE_RTOL: f64 = 1e-9;
/// Randomized restarts pick among rows within this fraction of the best residual.
const RANDOM_WINDOW: f64 = 0.5;
/// Rows outside `γ1` are only preferred while their residual exceeds this.
const PREFERRED_TOL: f64 = 1e-6;
/// Exchange thresholds on circuit coefficients and residuals, strict first.
const EXCHANGE_TOLS: [f64; 2] = [1e-6, 1e-12];
const SIGMA_MIN: f64 = 1e-10;
const MAX_RESTARTS: u64 = 10;

/// `V_1..V_M`, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexPartition {
    pub sets: Vec<Vec<usize>>,
}

/// Row-major copy of `U_{rows, cols}`.
fn gather(u: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows {
        out.extend(cols.iter().map(|&j| u[(i, j)]));
    }
    out
}

fn pick(
    norms: &[f64],
    allowed: impl Fn(usize) -> bool,
    rng: &mut Option<ChaCha8Rng>,
) -> Option<(usize, f64)> {
    let best = (0..norms.len())
        .filter(|&i| allowed(i))
        .map(|i| norms[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    match rng {
        None => (0..norms.len())
            .find(|&i| allowed(i) && norms[i] >= best * (1.0 - TIE_RTOL))
            .map(|i| (i, norms[i])),
        Some(rng) => {
            let window: Vec<usize> = (0..norms.len())
                .filter(|&i| allowed(i) && norms[i] >= best * RANDOM_WINDOW)
                .collect();
            let i = window[rng.random_range(0..window.len())];
            Some((i, norms[i]))
        }
    }
}

/// Greedy row selection on a row-major `p x r` matrix: repeatedly take the
/// row with the largest component orthogonal to the rows already taken.
/// With `preferred`, rows flagged `true` win while any has a usable residual.
fn greedy_rows(
    data: &[f64],
    p: usize,
    r: usize,
    preferred: Option<&[bool]>,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<Vec<usize>> {
    let mut res = data.to_vec();
    let mut norms: Vec<f64> = res
        .chunks(r.max(1))
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut taken = vec![false; p];
    let mut chosen = Vec::with_capacity(r);
    let mut q = vec![0.0; r];
    for step in 0..r {
        let from_preferred = preferred.and_then(|pref| {
            pick(&norms, |i| !taken[i] && pref[i], rng).filter(|&(_, nrm)| nrm > PREFERRED_TOL)
        });
        let (i, nrm) = match from_preferred {
            Some(x) => x,
            None => pick(&norms, |i| !taken[i], rng)
                .ok_or_else(|| Error::RankDeficient("ran out of rows".into()))?,
        };
        if nrm < PIVOT_TOL {
            return Err(Error::RankDeficient(format!(
                "pivot {step} of {r} has residual {nrm:e}; the selected eigenvector block lacks full column rank"
            )));
        }
        for (qk, v) in q.iter_mut().zip(&res[i * r..(i + 1) * r]) {
            *qk = v / nrm;
        }
        taken[i] = true;
        chosen.push(i);
        for j in 0..p {
            if taken[j] {
                continue;
            }
            let row = &mut res[j * r..(j + 1) * r];
            let c: f64 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (v, qk) in row.iter_mut().zip(&q) {
                *v -= c * qk;
            }
            norms[j] = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    Ok(chosen)
}

/// A set of `|R|` vertices on which `U_{·,R}` is nonsingular, found by greedy
/// pivoting with ties going to the lowest vertex index. Sorted ascending.
pub fn greedy_uniqueness_set(eig: &EigenDecomposition, r: &[usize]) -> Result<Vec<usize>> {
    let n = eig.n();
    if r.len() > n || r.iter().any(|&l| l >= n) {
        return Err(Error::param(
            "spectral index set does not fit the eigendecomposition",
        ));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut set = greedy_rows(&gather(&eig.vectors, &all, r), n, r.len(), None, &mut None)?;
    set.sort_unstable();
    Ok(set)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Owner {
    Free,
    First,
    Second,
}

/// How each of the `p` rows is written in terms of an independent row set:
/// least-squares coefficients (one column per row) and residual norms.
struct Representation {
    members: Vec<usize>,
    coeffs: DMatrix<f64>,
    resid: Vec<f64>,
}

fn represent(data: &[f64], p: usize, r: usize, members: Vec<usize>) -> Result<Representation> {
    let x = DMatrix::from_row_slice(p, r, data).transpose();
    if members.is_empty() {
        let resid = (0..p).map(|j| x.column(j).norm()).collect();
        return Ok(Representation {
            members,
            coeffs: DMatrix::zeros(0, p),
            resid,
        });
    }
    let basis = x.select_columns(&members);
    let qr = basis.qr();
    let q = qr.q();
    let proj = q.tr_mul(&x);
    let resid_m = &x - &q * &proj;
    let resid = (0..p).map(|j| resid_m.column(j).norm()).collect();
    let coeffs = qr
        .r()
        .solve_upper_triangular(&proj)
        .ok_or_else(|| Error::RankDeficient("exchange basis became singular".into()))?;
    Ok(Representation {
        members,
        coeffs,
        resid,
    })
}

/// One augmenting path of the two-matroid partition problem. Returns false
/// when no path exists at this tolerance.
fn augment(
    a: &[f64],
    ra: usize,
    b: &[f64],
    rb: usize,
    owner: &mut [Owner],
    tol: f64,
) -> Result<bool> {
    let p = owner.len();
    let rep = |data: &[f64], r: usize, who: Owner| {
        represent(data, p, r, (0..p).filter(|&i| owner[i] == who).collect())
    };
    let first = rep(a, ra, Owner::First)?;
    let second = rep(b, rb, Owner::Second)?;
    let sides = [(Owner::First, &first), (Owner::Second, &second)];

    let sink = |x: usize| {
        sides
            .iter()
            .find(|(who, r)| owner[x] != *who && r.resid[x] > tol)
            .map(|(who, _)| *who)
    };

    let mut parent = vec![usize::MAX; p];
    let mut seen = vec![false; p];
    let mut queue = VecDeque::new();
    for x in 0..p {
        if owner[x] == Owner::Free {
            seen[x] = true;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        if let Some(target) = sink(x) {
            let mut path = vec![x];
            while parent[*path.last().unwrap()] != usize::MAX {
                path.push(parent[*path.last().unwrap()]);
            }
            path.reverse();
            let old: Vec<Owner> = path.iter().map(|&v| owner[v]).collect();
            owner[*path.last().unwrap()] = target;
            for j in 0..path.len() - 1 {
                owner[path[j]] = old[j + 1];
            }
            debug!("exchange chain of length {}", path.len());
            return Ok(true);
        }
        for (who, r) in &sides {
            if owner[x] == *who || r.resid[x] > tol {
                continue;
            }
            for (pos, &y) in r.members.iter().enumerate() {
                if !seen[y] && r.coeffs[(pos, x)].abs() > tol {
                    seen[y] = true;
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
    }
    Ok(false)
}

/// Splits `pool` into a uniqueness set for `rm` and a complement that is a
/// uniqueness set for `rest`. Returns the first part.
fn split_pool(
    u: &DMatrix<f64>,
    pool: &[usize],
    rm: &[usize],
    rest: &[usize],
    rng: &mut Option<ChaCha8Rng>,
) -> Result<Vec<usize>> {
    let p = pool.len();
    let (ra, rb) = (rm.len(), rest.len());
    let a = gather(u, pool, rm);
    let b = gather(u, pool, rest);
    let g1 = greedy_rows(&a, p, ra, None, rng)?;
    let mut owner = vec![Owner::Free; p];
    for &i in &g1 {
        owner[i] = Owner::First;
    }
    let outside: Vec<bool> = owner.iter().map(|&o| o == Owner::Free).collect();
    let g2 = greedy_rows(&b, p, rb, Some(&outside), rng)?;
    let mut overlap = 0;
    for &i in &g2 {
        if owner[i] == Owner::Free {
            owner[i] = Owner::Second;
        } else {
            overlap += 1;
        }
    }
    if overlap > 0 {
        debug!("resolving {overlap} rows claimed by both bases");
    }
    for tol in EXCHANGE_TOLS {
        while owner.iter().any(|&o| o == Owner::Free) {
            if !augment(&a, ra, &b, rb, &mut owner, tol)? {
                break;
            }
        }
    }
    if owner.iter().any(|&o| o == Owner::Free) {
        return Err(Error::RankDeficient(format!(
            "no exchange chain frees the remaining {overlap} shared rows"
        )));
    }
    let mut set: Vec<usize> = (0..p)
        .filter(|&i| owner[i] == Owner::First)
        .map(|i| pool[i])
        .collect();
    set.sort_unstable();
    Ok(set)
}

fn attempt(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<VertexPartition> {
    let n = eig.n();
    let mut in_pool = vec![true; n];
    let mut sets = Vec::with_capacity(sp.n_bands());
    for m in 0..sp.n_bands() {
        let pool: Vec<usize> = (0..n).filter(|&v| in_pool[v]).collect();
        let rm = &sp.bands[m];
        let rest: Vec<usize> = sp.bands[m + 1..].concat();
        let vm = if rm.is_empty() {
            Vec::new()
        } else if rest.is_empty() {
            pool
        } else {
            split_pool(&eig.vectors, &pool, rm, &rest, rng)?
        };
        for &v in &vm {
            in_pool[v] = false;
        }
        sets.push(vm);
    }
    let vp = VertexPartition { sets };
    for (m, s) in min_singular_values(eig, sp, &vp).into_iter().enumerate() {
        if s <= SIGMA_MIN {
            return Err(Error::RankDeficient(format!(
                "band {} block has smallest singular value {s:e}",
                m + 1
            )));
        }
    }
    Ok(vp)
}

/// Smallest singular value of each `U_{V_m,R_m}` (infinity for empty bands).
pub fn min_singular_values(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
    vp: &VertexPartition,
) -> Vec<f64> {
    sp.bands
        .iter()
        .zip(&vp.sets)
        .map(|(r, v)| {
            if r.is_empty() {
                f64::INFINITY
            } else {
                eig.submatrix(v, r).singular_values().min()
            }
        })
        .collect()
}

/// Disjoint vertex sets `V_1..V_M` covering all vertices, `|V_m| = |R_m|`,
/// each a uniqueness set for its band. The first attempt is deterministic;
/// up to ten more use randomized pivot choices before giving up.
pub fn partition_uniqueness_sets(
    eig: &EigenDecomposition,
    sp: &SpectralPartition,
) -> Result<VertexPartition> {
    let total: usize = sp.bands.iter().map(Vec::len).sum();
    if total != eig.n() {
        return Err(Error::DimensionMismatch {
            expected: eig.n(),
            got: total,
        });
    }
    let mut last = None;
    for round in 0..=MAX_RESTARTS {
        let mut rng = (round > 0).then(|| ChaCha8Rng::seed_from_u64(round));
        match attempt(eig, sp, &mut rng) {
            Ok(vp) => return Ok(vp),
            Err(e) => {
                warn!("uniqueness-set attempt {round} failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(Error::RankDeficient(format!(
        "no uniqueness-set partition found after {MAX_RESTARTS} restarts; last failure: {}",
        last.unwrap()
    )))
}
