//! ISOMAP: symmetric k-nearest-neighbor graph, all-pairs geodesic distances
//! and classical multidimensional scaling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{canonical_signs, sorted_symmetric_eigen};
use crate::points::{dist2, Points};

/// Undirected graph on the input points, weighted by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub k: usize,
    /// Sorted adjacency lists of `(neighbor, distance)`.
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Connected components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &(u, _) in &self.adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        comp.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// `max(10, ⌈log₂ I⌉ + d)`, capped at `I − 1`.
pub fn default_k(n: usize, d: usize) -> usize {
    let log = (n.max(2) as f64).log2().ceil() as usize;
    (log + d).max(10).min(n.saturating_sub(1)).max(1)
}

/// Symmetric k-NN graph: an edge is kept if either endpoint lists the other
/// among its `k` nearest neighbors (ties broken by index).
pub fn knn_graph(x: &Points, k: usize) -> Result<NeighborGraph> {
    let n = x.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k < {n}")));
    }
    let lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist2(xi, x.row(j)), j))
                .collect();
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(d, j)| (j, d.sqrt())).collect()
        })
        .collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(k); n];
    for (i, list) in lists.into_iter().enumerate() {
        for (j, d) in list {
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
        list.dedup_by_key(|e| e.0);
    }
    Ok(NeighborGraph { k, adj })
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(g: &NeighborGraph, source: usize, dist: &mut [f64]) {
    dist.iter_mut().for_each(|d| *d = f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(u, w) in &g.adj[v] {
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Entry(nd, u));
            }
        }
    }
}

fn check_connected(g: &NeighborGraph) -> Result<()> {
    let comps = g.components();
    if comps.len() > 1 {
        let desc: Vec<String> = comps
            .iter()
            .take(5)
            .map(|c| {
                let head: Vec<String> = c.iter().take(4).map(|v| v.to_string()).collect();
                format!(
                    "{{{}{}}} ({} vertices)",
                    head.join(", "),
                    if c.len() > 4 { ", ..." } else { "" },
                    c.len()
                )
            })
            .collect();
        return Err(Error::degenerate(format!(
            "neighbor graph with k = {} has {} components: {}; increase k",
            g.k,
            comps.len(),
            desc.join("; ")
        )));
    }
    Ok(())
}

/// All-pairs shortest-path lengths.
pub fn geodesic_distances(g: &NeighborGraph) -> Result<DMatrix<f64>> {
    check_connected(g)?;
    let n = g.len();
    let mut data = vec![0.0; n * n];
    // column-major storage: column s holds the distances from source s
    data.par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(s, col)| dijkstra(g, s, col));
    let mut m = DMatrix::from_vec(n, n, data);
    // symmetrize away round-off from different summation orders
    for i in 0..n {
        for j in 0..i {
            let v = m[(i, j)].min(m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Classical MDS output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mds {
    /// `I × d` coordinates.
    pub coords: Points,
    /// Top `d` eigenvalues of the double-centered matrix, clamped at zero.
    pub eigenvalues: Vec<f64>,
}

impl Mds {
    /// Number of leading eigenvalues that are numerically positive.
    pub fn rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues.iter().filter(|&&v| v > 1e-12 * top.max(f64::MIN_POSITIVE)).count()
    }
}

/// Double-centers `−½ D²`, keeps the top `d` eigenpairs and scales the
/// eigenvectors by the square roots of the eigenvalues.
pub fn classical_mds(dmat: &DMatrix<f64>, d: usize) -> Result<Mds> {
    let n = dmat.nrows();
    if dmat.ncols() != n || n == 0 {
        return Err(Error::invalid("distance matrix must be square and nonempty"));
    }
    if d == 0 {
        return Err(Error::invalid("target dimension must be positive"));
    }
    let mut b = dmat.map(|v| -0.5 * v * v);
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| b.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += grand - row_means[i] - col_means[j];
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(b);
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let mut eigenvalues = Vec::with_capacity(d);
    let mut coords = vec![0.0; n * d];
    let mut lead = vectors.columns(0, d.min(n)).into_owned();
    canonical_signs(&mut lead);
    for c in 0..d.min(n) {
        let v = values[c];
        let lam = if v > 1e-12 * top { v } else { 0.0 };
        eigenvalues.push(lam);
        let s = lam.sqrt();
        for i in 0..n {
            coords[i * d + c] = lead[(i, c)] * s;
        }
    }
    eigenvalues.resize(d, 0.0);
    // exact centering of the returned configuration
    for c in 0..d {
        let m = (0..n).map(|i| coords[i * d + c]).sum::<f64>() / n as f64;
        for i in 0..n {
            coords[i * d + c] -= m;
        }
    }
    Ok(Mds {
        coords: Points::new(d, coords)?,
        eigenvalues,
    })
}

/// `d`-dimensional ISOMAP parameters of the rows of `x`; `k = None` uses
/// [`default_k`].
pub fn isomap(x: &Points, d: usize, k: Option<usize>) -> Result<Points> {
    if x.len() < 2 {
        return Err(Error::invalid("ISOMAP needs at least two points"));
    }
    let k = k.unwrap_or_else(|| default_k(x.len(), d));
    let g = knn_graph(x, k)?;
    let geo = geodesic_distances(&g)?;
    Ok(classical_mds(&geo, d)?.coords)
}
