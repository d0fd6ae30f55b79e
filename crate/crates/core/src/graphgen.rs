//! Synthetic workloads: Watts–Strogatz small-world graphs and R-MAT
//! (stochastic Kronecker) graphs with Graph500 quadrant probabilities.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparsemat::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldParams {
    pub n: usize,
    /// Ring neighbours per node; must be even.
    pub k: usize,
    pub rewire_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KroneckerParams {
    /// log2 of the node count.
    pub scale: u32,
    pub edge_factor: usize,
    pub pa: f64,
    pub pb: f64,
    pub pc: f64,
    pub seed: u64,
}

impl KroneckerParams {
    /// Graph500 quadrant probabilities (0.57, 0.19, 0.19, 0.05).
    pub fn graph500(scale: u32, edge_factor: usize, seed: u64) -> Self {
        KroneckerParams {
            scale,
            edge_factor,
            pa: 0.57,
            pb: 0.19,
            pc: 0.19,
            seed,
        }
    }

    pub fn pd(&self) -> f64 {
        1.0 - self.pa - self.pb - self.pc
    }
}

/// Generator output with its edge accounting.
#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    pub matrix: SparseMatrix,
    /// Original (pre-compaction) id of each node.
    pub node_ids: Vec<u64>,
    pub undirected_edges: usize,
}

impl GeneratedGraph {
    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    fn from_adjacency(n: usize, edges: &[(usize, usize)], node_ids: Vec<u64>) -> Result<Self> {
        let matrix = SparseMatrix::from_triplets(n, edges.iter().flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)]))?
            .with_symmetric_hint(true);
        Ok(GeneratedGraph {
            matrix,
            node_ids,
            undirected_edges: edges.len(),
        })
    }
}

/// Ring lattice with each edge rewired with probability `rewire_prob`.
///
/// Edge `(i, i+j)` is replaced by `(i, w)` with `w` uniform over the nodes
/// that are neither `i` nor already adjacent to it, so the edge count of the
/// lattice is preserved.
pub fn gen_smallworld(p: &SmallWorldParams) -> Result<GeneratedGraph> {
    if !p.k.is_multiple_of(2) || p.k == 0 {
        return Err(Error::invalid(format!(
            "neighbour count k must be even and positive, got {}",
            p.k
        )));
    }
    if p.k >= p.n {
        return Err(Error::invalid(format!("k = {} must be smaller than n = {}", p.k, p.n)));
    }
    if !(0.0..=1.0).contains(&p.rewire_prob) {
        return Err(Error::invalid(format!(
            "rewire probability {} outside [0, 1]",
            p.rewire_prob
        )));
    }
    let n = p.n;
    let half = p.k / 2;
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::with_capacity(p.k + 2); n];
    for i in 0..n {
        for j in 1..=half {
            let t = (i + j) % n;
            adj[i].insert(t);
            adj[t].insert(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for j in 1..=half {
        for i in 0..n {
            let t = (i + j) % n;
            if !adj[i].contains(&t) || !rng.gen_bool(p.rewire_prob) {
                continue;
            }
            if adj[i].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != i && !adj[i].contains(&w) {
                    break w;
                }
            };
            adj[i].remove(&t);
            adj[t].remove(&i);
            adj[i].insert(w);
            adj[w].insert(i);
        }
    }

    let edges: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    GeneratedGraph::from_adjacency(n, &edges, (0..n as u64).collect())
}

/// R-MAT sampling of `edge_factor · 2^scale` arcs, then symmetrised with
/// loops, duplicates and isolated nodes removed.
pub fn gen_kronecker(p: &KroneckerParams) -> Result<GeneratedGraph> {
    if p.scale < 1 || p.scale > 40 {
        return Err(Error::invalid(format!("scale must be in 1..=40, got {}", p.scale)));
    }
    if p.edge_factor < 1 {
        return Err(Error::invalid("edge factor must be at least 1"));
    }
    let probs = [p.pa, p.pb, p.pc];
    if probs.iter().any(|q| !(*q >= 0.0)) || p.pd() < -1e-12 {
        return Err(Error::invalid(
            "quadrant probabilities must be nonnegative and sum to at most 1",
        ));
    }

    let nodes = 1usize << p.scale;
    let draws = p.edge_factor * nodes;
    let (ab, abc) = (p.pa + p.pb, p.pa + p.pb + p.pc);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut edges = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (mut u, mut v) = (0usize, 0usize);
        for _ in 0..p.scale {
            let r: f64 = rng.gen();
            let (bu, bv) = if r < p.pa {
                (0, 0)
            } else if r < ab {
                (0, 1)
            } else if r < abc {
                (1, 0)
            } else {
                (1, 1)
            };
            u = (u << 1) | bu;
            v = (v << 1) | bv;
        }
        if u != v {
            edges.push((u.min(v), u.max(v)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        return Err(Error::degenerate("Kronecker sample has no edges after removing loops"));
    }

    let mut remap = vec![usize::MAX; nodes];
    for &(u, v) in &edges {
        remap[u] = 0;
        remap[v] = 0;
    }
    let mut ids = Vec::new();
    for (old, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = ids.len();
            ids.push(old as u64);
        }
    }
    let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (remap[u], remap[v])).collect();
    GeneratedGraph::from_adjacency(ids.len(), &edges, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sw(n: usize, k: usize, p: f64, seed: u64) -> Result<GeneratedGraph> {
        gen_smallworld(&SmallWorldParams {
            n,
            k,
            rewire_prob: p,
            seed,
        })
    }

    #[test]
    fn unrewired_ring_is_a_cycle() {
        let g = sw(8, 2, 0.0, 1).unwrap();
        assert!(g.matrix.degrees().iter().all(|&d| d == 2));
        assert!((0..8).all(|i| g.matrix.get(i, (i + 1) % 8) == 1.0));
        assert_eq!(g.undirected_edges, 8);
    }

    #[test]
    fn unrewired_lattice_is_circulant() {
        let g = sw(16, 4, 0.0, 1).unwrap();
        assert_eq!(g.nnz(), 64);
        for i in 0..16 {
            let (cols, _) = g.matrix.row(i);
            let mut expected: Vec<usize> = [14, 15, 1, 2].iter().map(|d| (i + d) % 16).collect();
            expected.sort();
            assert_eq!(cols, &expected[..]);
        }
    }

    #[test]
    fn rewiring_preserves_edge_count() {
        let g = sw(1024, 10, 0.1, 7).unwrap();
        let deg = g.matrix.degrees();
        let mean = deg.iter().sum::<usize>() as f64 / 1024.0;
        assert_eq!(mean, 10.0);
        assert!(g.matrix.is_symmetric());
        assert!((0..1024).all(|i| g.matrix.get(i, i) == 0.0));
        assert!(*deg.iter().max().unwrap() > 10);
        // Rewired edges leave the ring.
        let off_ring = g
            .matrix
            .triplets()
            .filter(|&(i, j, _)| {
                let d = (i as isize - j as isize).rem_euclid(1024) as usize;
                d > 5 && d < 1019
            })
            .count();
        assert!(off_ring > 0);
    }

    #[test]
    fn smallworld_is_deterministic() {
        assert_eq!(sw(200, 6, 0.3, 3).unwrap().matrix, sw(200, 6, 0.3, 3).unwrap().matrix);
        assert_ne!(sw(200, 6, 0.3, 3).unwrap().matrix, sw(200, 6, 0.3, 4).unwrap().matrix);
    }

    #[test]
    fn smallworld_parameter_errors() {
        assert!(sw(8, 3, 0.0, 0).is_err());
        assert!(sw(8, 8, 0.0, 0).is_err());
        assert!(sw(8, 2, 1.5, 0).is_err());
    }

    #[test]
    fn kronecker_forced_corner_is_degenerate() {
        let p = KroneckerParams {
            scale: 1,
            edge_factor: 1,
            pa: 1.0,
            pb: 0.0,
            pc: 0.0,
            seed: 0,
        };
        assert!(matches!(gen_kronecker(&p), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn kronecker_small_is_simple_and_skewed() {
        let g = gen_kronecker(&KroneckerParams::graph500(4, 16, 11)).unwrap();
        let m = &g.matrix;
        assert!(m.is_symmetric());
        assert!((0..m.n()).all(|i| m.get(i, i) == 0.0));
        assert!(g.undirected_edges <= 16 * 16);
        let deg = m.degrees();
        let mean = deg.iter().sum::<usize>() as f64 / deg.len() as f64;
        // 256 draws on 16 nodes nearly saturate the degree cap of 15, so the
        // skew shows as a wide spread rather than a 2x hub.
        assert!(*deg.iter().max().unwrap() as f64 > 1.8 * mean);
        assert!((*deg.iter().min().unwrap() as f64) < 0.5 * mean);
        assert!(deg.iter().all(|&d| d > 0));
    }

    #[test]
    fn kronecker_shape_at_scale_ten() {
        let g = gen_kronecker(&KroneckerParams::graph500(10, 16, 5)).unwrap();
        assert!(g.matrix.n() <= 1024);
        assert!(g.undirected_edges <= 16 * 1024);
        // Duplicates and loops remove a fraction, not the bulk.
        assert!(g.undirected_edges > 4 * 1024);
        let deg = g.matrix.degrees();
        let mean = deg.iter().sum::<usize>() as f64 / deg.len() as f64;
        assert!(*deg.iter().max().unwrap() as f64 > 2.0 * mean);
        assert_eq!(g.node_ids.len(), g.matrix.n());
        assert!(g.node_ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn kronecker_is_deterministic() {
        let a = gen_kronecker(&KroneckerParams::graph500(6, 8, 1)).unwrap();
        let b = gen_kronecker(&KroneckerParams::graph500(6, 8, 1)).unwrap();
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn kronecker_parameter_errors() {
        let mut p = KroneckerParams::graph500(0, 16, 0);
        assert!(gen_kronecker(&p).is_err());
        p.scale = 3;
        p.pa = 0.9;
        assert!(gen_kronecker(&p).is_err());
        p.pa = -0.1;
        assert!(gen_kronecker(&p).is_err());
    }
}
