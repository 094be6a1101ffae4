#![allow(dead_code)]

use gah::dataset::{knn_scan, VectorSet};
use gah::graphs::{reverse_graph, DirectedGraph};
use gah::NeighborList;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed graph where each ordered pair is an edge with probability `density`.
pub fn random_digraph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> DirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in 0..n as u32 {
            if u != v && rng.random::<f64>() < density {
                edges.push((u, v));
            }
        }
    }
    DirectedGraph::from_edges(n, &edges).unwrap()
}

pub fn random_points(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> VectorSet {
    let data: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    VectorSet::new(dim, data).unwrap()
}

/// A random graph over random 2-d points with a random query and its full neighbor order.
pub struct Instance {
    pub g: DirectedGraph,
    pub rev: DirectedGraph,
    pub base: VectorSet,
    pub q: Vec<f32>,
    pub nn: NeighborList,
}

impl Instance {
    pub fn random(n: usize, density: f64, seed: u64) -> Self {
        let mut r = rng(seed);
        let g = random_digraph(n, density, &mut r);
        let base = random_points(n, 2, &mut r);
        let q = vec![r.random_range(-1.0f32..1.0), r.random_range(-1.0f32..1.0)];
        let nn = knn_scan(&base, &q, n, None);
        let rev = reverse_graph(&g);
        Self { g, rev, base, q, nn }
    }
}

/// BFS over the subgraph induced by `allowed`.
pub fn reach_within(g: &DirectedGraph, start: u32, allowed: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; g.count()];
    if !allowed[start as usize] {
        return seen;
    }
    seen[start as usize] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if allowed[v as usize] && !seen[v as usize] {
                seen[v as usize] = true;
                stack.push(v);
            }
        }
    }
    seen
}
