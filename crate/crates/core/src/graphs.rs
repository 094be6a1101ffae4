//! Directed proximity graphs: KGraph, approximate MRNG and an HNSW-style base layer.
//!
//! Graph file layout (little-endian):
//!
//! ```text
//! [i32 magic = 0x474E4E41][i32 version = 1][i64 count]
//! count x ( [i32 degree][degree x i32 neighbor id] )
//! ```

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{knn_scan, l2, Neighbor, NeighborList, VectorSet};
use crate::error::{invalid, Error, Result};
use crate::search::Searcher;

pub const GRAPH_MAGIC: i32 = 0x474E_4E41;
pub const GRAPH_VERSION: i32 = 1;

/// Slack on the `cos <= 0.5` test of the MRNG angle rule.
pub const ANGLE_COS_SLACK: f64 = 1e-6;

/// Adjacency-list digraph over ids `0..count`. No self-loops, no duplicate edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DirectedGraph {
    adj: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub avg_out_degree: f64,
    pub max_out_degree: usize,
    pub edge_count: usize,
}

impl DirectedGraph {
    /// `count` vertices, no edges.
    pub fn new(count: usize) -> Self {
        Self {
            adj: vec![Vec::new(); count],
        }
    }

    /// Validates and adopts an adjacency list. Neighbor order is preserved.
    pub fn from_adjacency(adj: Vec<Vec<u32>>) -> Result<Self> {
        let n = adj.len();
        let mut seen = HashSet::new();
        for (v, list) in adj.iter().enumerate() {
            seen.clear();
            for &u in list {
                if u as usize >= n {
                    return Err(invalid!("edge {v}->{u} leaves the vertex range 0..{n}"));
                }
                if u as usize == v {
                    return Err(invalid!("self-loop at vertex {v}"));
                }
                if !seen.insert(u) {
                    return Err(invalid!("duplicate edge {v}->{u}"));
                }
            }
        }
        Ok(Self { adj })
    }

    pub fn from_edges(count: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); count];
        for &(u, v) in edges {
            if u as usize >= count {
                return Err(invalid!("edge {u}->{v} leaves the vertex range 0..{count}"));
            }
            adj[u as usize].push(v);
        }
        Self::from_adjacency(adj)
    }

    pub fn count(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn out_degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.adj
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().map(move |&v| (u as u32, v)))
    }

    pub fn edge_set(&self) -> HashSet<(u32, u32)> {
        self.edges().collect()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].contains(&v)
    }

    pub fn stats(&self) -> GraphStats {
        let edge_count = self.edge_count();
        GraphStats {
            avg_out_degree: if self.adj.is_empty() {
                0.0
            } else {
                edge_count as f64 / self.adj.len() as f64
            },
            max_out_degree: self.adj.iter().map(Vec::len).max().unwrap_or(0),
            edge_count,
        }
    }

    /// Vertices reachable from `start`, as a membership mask.
    pub fn reachable_from(&self, start: u32) -> Vec<bool> {
        let mut seen = vec![false; self.count()];
        let mut queue = VecDeque::from([start]);
        seen[start as usize] = true;
        while let Some(v) = queue.pop_front() {
            for &u in self.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.count() <= 1 {
            return true;
        }
        self.reachable_from(0).iter().all(|&b| b) && reverse_graph(self).reachable_from(0).iter().all(|&b| b)
    }
}

fn check_pool(base: &VectorSet, pool: usize, name: &str) -> Result<()> {
    if pool == 0 || pool >= base.count() {
        return Err(invalid!(
            "{name} = {pool} must be in 1..{} for a base of {} vectors",
            base.count(),
            base.count()
        ));
    }
    Ok(())
}

/// Each vertex links to its `k` exact nearest neighbors (itself excluded), nearest first.
pub fn build_kgraph(base: &VectorSet, k: usize) -> Result<DirectedGraph> {
    Ok(kgraph_from_lists(&self_knn_lists(base, k)?, k))
}

/// Exact `m` nearest neighbors of every base vector, the vector itself excluded.
pub fn self_knn_lists(base: &VectorSet, m: usize) -> Result<Vec<NeighborList>> {
    check_pool(base, m, "K")?;
    Ok((0..base.count())
        .into_par_iter()
        .map(|v| knn_scan(base, base.get(v), m, Some(v as u32)))
        .collect())
}

/// KGraph from precomputed neighbor lists, keeping the first `k` of each.
pub fn kgraph_from_lists(lists: &[NeighborList], k: usize) -> DirectedGraph {
    DirectedGraph {
        adj: lists.iter().map(|l| l.top_ids(k)).collect(),
    }
}

/// Cosine of the angle between `a - origin` and `b - origin`, or `None` when either is zero-length.
pub fn edge_cosine(origin: &[f32], a: &[f32], b: &[f32]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..origin.len() {
        let x = a[i] as f64 - origin[i] as f64;
        let y = b[i] as f64 - origin[i] as f64;
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na.sqrt() * nb.sqrt()))
    }
}

/// Angle-pruned neighbor selection for one vertex over an ascending candidate list.
///
/// A candidate is accepted iff its edge makes an angle of at least 60 degrees with
/// every accepted edge. A candidate coinciding with `v` is accepted only as the
/// first edge; an accepted coincident neighbor does not block later candidates.
pub fn mrng_select(base: &VectorSet, v: u32, candidates: &[Neighbor]) -> Vec<u32> {
    let origin = base.get(v as usize);
    let mut accepted: Vec<u32> = Vec::new();
    'cand: for c in candidates {
        let cv = base.get(c.id as usize);
        if c.dist == 0.0 && !accepted.is_empty() {
            continue;
        }
        for &u in &accepted {
            match edge_cosine(origin, cv, base.get(u as usize)) {
                Some(cos) if cos > 0.5 + ANGLE_COS_SLACK => continue 'cand,
                Some(_) => {}
                // zero-length edge on either side
                None if c.dist == 0.0 => continue 'cand,
                None => {}
            }
        }
        accepted.push(c.id);
    }
    accepted
}

/// Approximate MRNG: the 60-degree angle rule applied to each vertex's `efc` exact NNs.
pub fn build_mrng_approx(base: &VectorSet, efc: usize) -> Result<DirectedGraph> {
    check_pool(base, efc, "efC")?;
    mrng_from_lists(base, &self_knn_lists(base, efc)?)
}

/// Approximate MRNG whose candidates are the given ascending neighbor lists.
pub fn mrng_from_lists(base: &VectorSet, lists: &[NeighborList]) -> Result<DirectedGraph> {
    if lists.len() != base.count() {
        return Err(invalid!("{} neighbor lists for {} vectors", lists.len(), base.count()));
    }
    let adj = lists
        .par_iter()
        .enumerate()
        .map(|(v, cands)| mrng_select(base, v as u32, cands.as_slice()))
        .collect();
    Ok(DirectedGraph { adj })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HnswParams {
    /// Neighbors chosen per insertion; vertices are re-pruned above `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
        }
    }
}

/// RNG-style selection: keep a candidate iff it is closer to `point` than to every kept one.
fn rng_select(base: &VectorSet, candidates: &[Neighbor], limit: usize) -> Vec<u32> {
    let mut kept: Vec<u32> = Vec::with_capacity(limit);
    for c in candidates {
        if kept.len() >= limit {
            break;
        }
        let cv = base.get(c.id as usize);
        if kept.iter().all(|&u| c.dist < l2(cv, base.get(u as usize))) {
            kept.push(c.id);
        }
    }
    kept
}

/// Single-layer HNSW-style graph built by incremental insertion in dataset order.
///
/// Every insertion searches the partial graph from vertex 0 with
/// `ef = ef_construction`, links to at most `m` RNG-selected neighbors, adds the
/// reverse edges and re-prunes vertices whose degree exceeds `2 * m`.
pub fn build_hnsw_base(base: &VectorSet, params: &HnswParams) -> Result<DirectedGraph> {
    let HnswParams { m, ef_construction } = *params;
    if m < 2 {
        return Err(invalid!("M = {m} must be at least 2"));
    }
    if ef_construction < m {
        return Err(invalid!("efConstruction = {ef_construction} must be at least M = {m}"));
    }
    let n = base.count();
    let max_degree = 2 * m;
    let mut graph = DirectedGraph::new(n);
    let mut searcher = Searcher::new(n);
    for i in 1..n {
        let point = base.get(i);
        let found = searcher.search(&graph, base, point, 0, ef_construction, ef_construction.min(i), None)?;
        let selected = rng_select(base, found.answers.as_slice(), m);
        for &s in &selected {
            let list = &mut graph.adj[s as usize];
            list.push(i as u32);
            if list.len() > max_degree {
                let sv = base.get(s as usize);
                let mut cands: Vec<Neighbor> = list
                    .iter()
                    .map(|&u| Neighbor::new(u, l2(sv, base.get(u as usize))))
                    .collect();
                cands.sort_unstable_by(Neighbor::cmp_by_distance);
                *list = rng_select(base, &cands, max_degree);
            }
        }
        graph.adj[i] = selected;
    }
    Ok(graph)
}

/// Edge `u -> v` in the output iff `v -> u` in the input. Lists come out in ascending id order.
pub fn reverse_graph(g: &DirectedGraph) -> DirectedGraph {
    let mut adj = vec![Vec::new(); g.count()];
    for (u, v) in g.edges() {
        adj[v as usize].push(u);
    }
    DirectedGraph { adj }
}

/// Fraction of `g`'s edges that also appear in `reference`.
pub fn edge_overlap(g: &DirectedGraph, reference: &DirectedGraph) -> Result<f64> {
    if g.count() != reference.count() {
        return Err(invalid!("vertex counts differ: {} vs {}", g.count(), reference.count()));
    }
    let total = g.edge_count();
    if total == 0 {
        return Err(invalid!("edge overlap of a graph without edges is undefined"));
    }
    let shared = g.edges().filter(|&(u, v)| reference.has_edge(u, v)).count();
    Ok(shared as f64 / total as f64)
}

pub fn save_graph(g: &DirectedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        w.write_all(&GRAPH_MAGIC.to_le_bytes())?;
        w.write_all(&GRAPH_VERSION.to_le_bytes())?;
        w.write_all(&(g.count() as i64).to_le_bytes())?;
        for list in &g.adj {
            w.write_all(&(list.len() as i32).to_le_bytes())?;
            for &v in list {
                w.write_all(&(v as i32).to_le_bytes())?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Only checks the magic and version, without reading the body.
pub fn check_graph_header(path: impl AsRef<Path>) -> Result<usize> {
    use std::io::Read;
    let path = path.as_ref();
    let mut header = [0u8; 16];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    f.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated graph header"))?;
    parse_header(&header, path)
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<usize> {
    if bytes.len() < 16 {
        return Err(Error::format(path, "truncated graph header"));
    }
    let magic = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != GRAPH_MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:#x}")));
    }
    let version = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != GRAPH_VERSION {
        return Err(Error::format(path, format!("unsupported graph version {version}")));
    }
    let count = i64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if count < 0 {
        return Err(Error::format(path, format!("negative vertex count {count}")));
    }
    Ok(count as usize)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<DirectedGraph> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let count = parse_header(&bytes, path)?;
    let mut pos = 16;
    let next = |pos: &mut usize| -> Result<i32> {
        let word = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| Error::format(path, format!("truncated graph body at byte {pos}")))?;
        *pos += 4;
        Ok(i32::from_le_bytes(word.try_into().unwrap()))
    };
    let mut adj = Vec::with_capacity(count.min(bytes.len() / 4));
    for v in 0..count {
        let deg = next(&mut pos)?;
        if deg < 0 {
            return Err(Error::format(path, format!("negative degree at vertex {v}")));
        }
        let mut list = Vec::with_capacity(deg as usize);
        for _ in 0..deg {
            let u = next(&mut pos)?;
            if u < 0 || u as usize >= count {
                return Err(Error::format(
                    path,
                    format!("neighbor id {u} of vertex {v} out of range"),
                ));
            }
            list.push(u as u32);
        }
        adj.push(list);
    }
    if pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after the last vertex"));
    }
    DirectedGraph::from_adjacency(adj).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f32]) -> VectorSet {
        let rows: Vec<[f32; 1]> = points.iter().map(|&p| [p]).collect();
        VectorSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn kgraph_on_collinear_points() {
        let g = build_kgraph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(g.adjacency(), &[vec![1], vec![0], vec![1]]);
        let full = build_kgraph(&line(&[0.0, 1.0, 3.0, 7.0]), 3).unwrap();
        assert_eq!(full.edge_count(), 12);
        assert!(build_kgraph(&line(&[0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn mrng_angle_rule() {
        // v at origin; candidate a at 0 degrees, b at 90 degrees, c at 30 degrees
        let base =
            VectorSet::from_rows(&[[0.0f32, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0 * 0.866_025_4, 3.0 * 0.5]]).unwrap();
        let cands = knn_scan(&base, base.get(0), 3, Some(0));
        assert_eq!(mrng_select(&base, 0, &cands.as_slice()[..2]), vec![1, 2]);
        let pruned = [cands[0], Neighbor::new(3, 3.0)];
        assert_eq!(mrng_select(&base, 0, &pruned), vec![1]);
    }

    #[test]
    fn mrng_exactly_sixty_degrees_is_accepted() {
        let base = VectorSet::from_rows(&[[0.0f32, 0.0], [1.0, 0.0], [1.0, 3f32.sqrt()]]).unwrap();
        let cands = knn_scan(&base, base.get(0), 2, Some(0));
        assert_eq!(mrng_select(&base, 0, cands.as_slice()), vec![1, 2]);
    }

    #[test]
    fn mrng_coincident_points() {
        let base = VectorSet::from_rows(&[[0.0f32, 0.0], [0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let g = build_mrng_approx(&base, 3).unwrap();
        // the duplicate is taken first and does not block the two opposite edges
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        // a duplicate candidate after a real edge is pruned
        let cands = [Neighbor::new(2, 1.0), Neighbor::new(1, 0.0)];
        assert_eq!(mrng_select(&base, 0, &cands), vec![2]);
    }

    #[test]
    fn hnsw_two_points() {
        let g = build_hnsw_base(
            &line(&[0.0, 1.0]),
            &HnswParams {
                m: 2,
                ef_construction: 2,
            },
        )
        .unwrap();
        assert_eq!(g.adjacency(), &[vec![1], vec![0]]);
        assert!(build_hnsw_base(
            &line(&[0.0, 1.0]),
            &HnswParams {
                m: 1,
                ef_construction: 2
            }
        )
        .is_err());
        assert!(build_hnsw_base(
            &line(&[0.0, 1.0]),
            &HnswParams {
                m: 4,
                ef_construction: 2
            }
        )
        .is_err());
    }

    #[test]
    fn hnsw_degree_bound() {
        let base = VectorSet::gaussian(600, 4, 11);
        let params = HnswParams {
            m: 4,
            ef_construction: 16,
        };
        let g = build_hnsw_base(&base, &params).unwrap();
        assert!(g.stats().max_out_degree <= 8);
        assert_eq!(g, build_hnsw_base(&base, &params).unwrap());
        DirectedGraph::from_adjacency(g.adjacency().to_vec()).unwrap();
    }

    #[test]
    fn reverse_single_edge() {
        let g = DirectedGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(reverse_graph(&g).adjacency(), &[vec![], vec![0]]);
    }

    #[test]
    fn overlap_extremes() {
        let a = DirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let b = DirectedGraph::from_edges(3, &[(1, 0), (2, 1)]).unwrap();
        assert_eq!(edge_overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(edge_overlap(&a, &b).unwrap(), 0.0);
        assert!(edge_overlap(&a, &DirectedGraph::new(4)).is_err());
    }

    #[test]
    fn adjacency_validation() {
        assert!(DirectedGraph::from_adjacency(vec![vec![0]]).is_err());
        assert!(DirectedGraph::from_adjacency(vec![vec![1, 1], vec![]]).is_err());
        assert!(DirectedGraph::from_adjacency(vec![vec![2], vec![]]).is_err());
    }

    #[test]
    fn graph_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        save_graph(&DirectedGraph::new(0), &p).unwrap();
        assert_eq!(fs::read(&p).unwrap().len(), 16);
        assert_eq!(load_graph(&p).unwrap().count(), 0);

        let mut bytes = Vec::new();
        bytes.extend_from_slice(&GRAPH_MAGIC.to_le_bytes());
        bytes.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
        bytes.extend_from_slice(&2i64.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_graph(&p), Err(Error::Format { .. })));

        fs::write(&p, [0u8; 16]).unwrap();
        assert!(check_graph_header(&p).is_err());
    }
}
