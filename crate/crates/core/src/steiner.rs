//! Minimum-effort (ME) computation through directed Steiner heuristics.
//!
//! A directed Steiner tree (DST) is approximated by the union of shortest paths
//! from the root to each terminal: hop-count BFS in the unweighted mode and
//! node-weighted Dijkstra in the weighted mode. A start/terminal pair set is
//! grouped by start, solved as one DST per start, and the node sets are united.
//! Small instances can be solved exactly by enumeration for cross-checking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::dataset::{Neighbor, NeighborList};
use crate::error::{invalid, Result};
use crate::graphs::DirectedGraph;
use crate::reach::{PairSet, StartCounting};
use crate::required_count;

const NO_PARENT: u32 = u32::MAX;

/// Largest candidate set [`vdsn_exact_bruteforce`] accepts.
pub const EXACT_LIMIT: usize = 20;

/// The vertices a solution may use: those within `radius` of the query.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFilter {
    radius: f64,
    /// `None` admits every vertex.
    allowed: Option<Vec<bool>>,
    count: usize,
}

impl CandidateFilter {
    /// No distance restriction.
    pub fn unbounded(count: usize) -> Self {
        Self {
            radius: f64::INFINITY,
            allowed: None,
            count,
        }
    }

    /// Vertices of `neighbors` with distance `<= radius`. The list must be
    /// ascending and extend past `radius` (or cover the whole base).
    pub fn from_neighbors(count: usize, neighbors: &[Neighbor], radius: f64) -> Self {
        if radius.is_infinite() {
            return Self::unbounded(count);
        }
        let mut allowed = vec![false; count];
        for n in neighbors.iter().take_while(|n| n.dist as f64 <= radius) {
            allowed[n.id as usize] = true;
        }
        Self {
            radius,
            allowed: Some(allowed),
            count,
        }
    }

    /// An explicit vertex set, with no associated radius.
    pub fn from_ids(count: usize, ids: &[u32]) -> Self {
        let mut allowed = vec![false; count];
        for &v in ids {
            allowed[v as usize] = true;
        }
        Self {
            radius: f64::NAN,
            allowed: Some(allowed),
            count,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.allowed.as_ref().is_none_or(|a| a[v as usize])
    }

    pub fn allowed_ids(&self) -> Vec<u32> {
        (0..self.count as u32).filter(|&v| self.contains(v)).collect()
    }

    pub fn allowed_count(&self) -> usize {
        match &self.allowed {
            None => self.count,
            Some(a) => a.iter().filter(|&&b| b).count(),
        }
    }
}

/// Node weight `1 + out-degree` (full graph), the per-vertex decision cost bound.
pub fn decision_weights(g: &DirectedGraph) -> Vec<f64> {
    (0..g.count() as u32).map(|v| 1.0 + g.out_degree(v) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionCost {
    /// `|∪ DS(v)|` over the node set.
    pub cost_union: usize,
    /// `|DS(v)|` per node.
    pub per_node: BTreeMap<u32, usize>,
}

/// Decision sets: `{v}` if `v` has no out-neighbor inside `nodes`, otherwise
/// `v` together with all its out-neighbors in `g`.
pub fn decision_cost(g: &DirectedGraph, nodes: &[u32]) -> DecisionCost {
    let members: BTreeSet<u32> = nodes.iter().copied().collect();
    let mut union: BTreeSet<u32> = BTreeSet::new();
    let mut per_node = BTreeMap::new();
    for &v in &members {
        let out = g.neighbors(v);
        union.insert(v);
        if out.iter().any(|u| members.contains(u)) {
            union.extend(out.iter().copied());
            per_node.insert(v, 1 + out.len());
        } else {
            per_node.insert(v, 1);
        }
    }
    DecisionCost {
        cost_union: union.len(),
        per_node,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteinerSolution {
    /// Vertex set of the subgraph, ascending.
    pub nodes: Vec<u32>,
    /// Terminals reached per start.
    pub per_start: BTreeMap<u32, Vec<u32>>,
    /// Requirements that could not be met.
    pub unreachable: Vec<(u32, u32)>,
    pub cost_union: usize,
}

impl SteinerSolution {
    fn build(
        g: &DirectedGraph,
        nodes: BTreeSet<u32>,
        per_start: BTreeMap<u32, Vec<u32>>,
        unreachable: Vec<(u32, u32)>,
    ) -> Self {
        let nodes: Vec<u32> = nodes.into_iter().collect();
        let cost_union = decision_cost(g, &nodes).cost_union;
        Self {
            nodes,
            per_start,
            unreachable,
            cost_union,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.unreachable.is_empty()
    }

    /// `|V_Y|`, or `+inf` when some requirement is unreachable.
    pub fn me(&self) -> f64 {
        if self.is_feasible() {
            self.nodes.len() as f64
        } else {
            f64::INFINITY
        }
    }

    /// `Cost(Y)`, or `+inf` when infeasible.
    pub fn exhaustive_cost(&self) -> f64 {
        if self.is_feasible() {
            self.cost_union as f64
        } else {
            f64::INFINITY
        }
    }

    pub fn weight(&self, weights: Option<&[f64]>) -> f64 {
        if !self.is_feasible() {
            return f64::INFINITY;
        }
        match weights {
            None => self.nodes.len() as f64,
            Some(w) => self.nodes.iter().map(|&v| w[v as usize]).sum(),
        }
    }
}

/// Checks every `(start, terminal)` requirement by BFS inside `nodes`.
pub fn satisfies_pairs(g: &DirectedGraph, nodes: &[u32], pairs: &[(u32, u32)]) -> bool {
    let filter = CandidateFilter::from_ids(g.count(), nodes);
    let mut by_start: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(s, t) in pairs {
        by_start.entry(s).or_default().push(t);
    }
    by_start.iter().all(|(&s, ts)| {
        if !filter.contains(s) {
            return false;
        }
        let tree = bfs_tree(g, s, &filter);
        ts.iter().all(|&t| tree.cost[t as usize].is_finite())
    })
}

/// Shortest-path tree over the filter-induced subgraph.
#[derive(Clone, Debug)]
struct PathTree {
    parent: Vec<u32>,
    /// Hop count or accumulated node weight; `+inf` if unreached.
    cost: Vec<f64>,
}

impl PathTree {
    fn path_into(&self, t: u32, out: &mut BTreeSet<u32>) {
        let mut v = t;
        while v != NO_PARENT && out.insert(v) {
            v = self.parent[v as usize];
        }
    }
}

/// Level-synchronous BFS; each vertex's parent is the smallest-id vertex of
/// the previous level with an edge to it.
fn bfs_tree(g: &DirectedGraph, root: u32, filter: &CandidateFilter) -> PathTree {
    let n = g.count();
    let mut tree = PathTree {
        parent: vec![NO_PARENT; n],
        cost: vec![f64::INFINITY; n],
    };
    tree.cost[root as usize] = 0.0;
    let mut level = vec![root];
    let mut depth = 0.0;
    while !level.is_empty() {
        depth += 1.0;
        let mut next = Vec::new();
        for &u in &level {
            for &v in g.neighbors(u) {
                if filter.contains(v) && tree.cost[v as usize].is_infinite() {
                    tree.cost[v as usize] = depth;
                    tree.parent[v as usize] = u;
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        level = next;
    }
    tree
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    id: u32,
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // reversed: BinaryHeap pops the smallest (cost, id)
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.id.cmp(&self.id))
    }
}

/// Node-weighted Dijkstra: a path costs the sum of its vertices' weights, the
/// root's weight included once. Equal-cost parents resolve to the smaller id.
fn dijkstra_tree(g: &DirectedGraph, root: u32, filter: &CandidateFilter, weights: &[f64]) -> PathTree {
    let n = g.count();
    let mut tree = PathTree {
        parent: vec![NO_PARENT; n],
        cost: vec![f64::INFINITY; n],
    };
    let mut settled = vec![false; n];
    tree.cost[root as usize] = weights[root as usize];
    let mut heap = BinaryHeap::from([HeapItem {
        cost: weights[root as usize],
        id: root,
    }]);
    while let Some(HeapItem { cost, id: u }) = heap.pop() {
        if settled[u as usize] || cost > tree.cost[u as usize] {
            continue;
        }
        settled[u as usize] = true;
        for &v in g.neighbors(u) {
            if !filter.contains(v) || settled[v as usize] {
                continue;
            }
            let nc = cost + weights[v as usize];
            let cur = tree.cost[v as usize];
            if nc < cur || (nc == cur && u < tree.parent[v as usize]) {
                tree.cost[v as usize] = nc;
                tree.parent[v as usize] = u;
                heap.push(HeapItem { cost: nc, id: v });
            }
        }
    }
    tree
}

fn path_tree(g: &DirectedGraph, root: u32, filter: &CandidateFilter, weights: Option<&[f64]>) -> PathTree {
    match weights {
        None => bfs_tree(g, root, filter),
        Some(w) => dijkstra_tree(g, root, filter, w),
    }
}

fn check_weights(g: &DirectedGraph, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != g.count() || w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(invalid!("weights must be positive and finite, one per vertex"));
        }
    }
    Ok(())
}

/// Shortest-path heuristic for the directed Steiner tree rooted at `root`.
pub fn dst_shortest_path(
    g: &DirectedGraph,
    root: u32,
    terminals: &[u32],
    filter: &CandidateFilter,
    weights: Option<&[f64]>,
) -> Result<SteinerSolution> {
    check_weights(g, weights)?;
    if root as usize >= g.count() || !filter.contains(root) {
        return Err(invalid!("root {root} lies outside the candidate filter"));
    }
    Ok(dst_unchecked(g, root, terminals, filter, weights))
}

fn dst_unchecked(
    g: &DirectedGraph,
    root: u32,
    terminals: &[u32],
    filter: &CandidateFilter,
    weights: Option<&[f64]>,
) -> SteinerSolution {
    let tree = path_tree(g, root, filter, weights);
    let mut nodes = BTreeSet::from([root]);
    let mut reached = Vec::new();
    let mut unreachable = Vec::new();
    for &t in terminals {
        if filter.contains(t) && tree.cost[t as usize].is_finite() {
            tree.path_into(t, &mut nodes);
            reached.push(t);
        } else {
            unreachable.push((root, t));
        }
    }
    SteinerSolution::build(g, nodes, BTreeMap::from([(root, reached)]), unreachable)
}

/// Groups `pairs` by start, solves one DST per start and unites the node sets.
pub fn vdsn_heuristic(
    g: &DirectedGraph,
    pairs: &[(u32, u32)],
    filter: &CandidateFilter,
    weights: Option<&[f64]>,
) -> Result<SteinerSolution> {
    check_weights(g, weights)?;
    let mut by_start: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(s, t) in pairs {
        let ts = by_start.entry(s).or_default();
        if !ts.contains(&t) {
            ts.push(t);
        }
    }
    let mut nodes = BTreeSet::new();
    let mut per_start = BTreeMap::new();
    let mut unreachable = Vec::new();
    for (&s, ts) in &by_start {
        if s as usize >= g.count() || !filter.contains(s) {
            unreachable.extend(ts.iter().map(|&t| (s, t)));
            continue;
        }
        let sol = dst_unchecked(g, s, ts, filter, weights);
        nodes.extend(sol.nodes);
        per_start.extend(sol.per_start);
        unreachable.extend(sol.unreachable);
    }
    Ok(SteinerSolution::build(g, nodes, per_start, unreachable))
}

/// Exact minimum DST by enumeration; only for at most [`EXACT_LIMIT`] candidates.
pub fn dst_exact_bruteforce(
    g: &DirectedGraph,
    root: u32,
    terminals: &[u32],
    filter: &CandidateFilter,
    weights: Option<&[f64]>,
) -> Result<SteinerSolution> {
    let pairs: Vec<(u32, u32)> = if terminals.is_empty() {
        vec![(root, root)]
    } else {
        terminals.iter().map(|&t| (root, t)).collect()
    };
    vdsn_exact_bruteforce(g, &pairs, filter, weights)
}

/// Exact minimum vertex-count (or vertex-weight) subgraph satisfying every pair,
/// by enumerating subsets of the filter's candidates.
pub fn vdsn_exact_bruteforce(
    g: &DirectedGraph,
    pairs: &[(u32, u32)],
    filter: &CandidateFilter,
    weights: Option<&[f64]>,
) -> Result<SteinerSolution> {
    check_weights(g, weights)?;
    let cands = filter.allowed_ids();
    if cands.len() > EXACT_LIMIT {
        return Err(invalid!(
            "{} candidates exceed the exhaustive limit of {EXACT_LIMIT}",
            cands.len()
        ));
    }
    let bit = |v: u32| cands.binary_search(&v).ok();
    let adj: Vec<u32> = cands
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .filter_map(|&u| bit(u))
                .fold(0u32, |m, i| m | (1 << i))
        })
        .collect();
    let mut per_start_req: BTreeMap<usize, u32> = BTreeMap::new();
    let mut required = 0u32;
    for &(s, t) in pairs {
        match (bit(s), bit(t)) {
            (Some(si), Some(ti)) => {
                *per_start_req.entry(si).or_default() |= 1 << ti;
                required |= (1 << si) | (1 << ti);
            }
            _ => {
                // an endpoint outside the filter can never be connected
                let unreachable = pairs.to_vec();
                return Ok(SteinerSolution::build(g, BTreeSet::new(), BTreeMap::new(), unreachable));
            }
        }
    }
    let reach = |from: usize, within: u32| -> u32 {
        let mut seen = 1u32 << from;
        let mut frontier = seen;
        while frontier != 0 {
            let mut next = 0u32;
            let mut f = frontier;
            while f != 0 {
                let i = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[i];
            }
            next &= within & !seen;
            seen |= next;
            frontier = next;
        }
        seen
    };
    let cost_of = |mask: u32| -> f64 {
        match weights {
            None => mask.count_ones() as f64,
            Some(w) => (0..cands.len())
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| w[cands[i] as usize])
                .sum(),
        }
    };
    let free: Vec<usize> = (0..cands.len()).filter(|&i| required & (1 << i) == 0).collect();
    let mut best: Option<(f64, u32)> = None;
    for sub in 0u32..(1u32 << free.len()) {
        let mut mask = required;
        for (j, &i) in free.iter().enumerate() {
            if sub & (1 << j) != 0 {
                mask |= 1 << i;
            }
        }
        let cost = cost_of(mask);
        if best.is_some_and(|(b, _)| cost >= b) {
            continue;
        }
        if per_start_req.iter().all(|(&s, &req)| reach(s, mask) & req == req) {
            best = Some((cost, mask));
        }
    }
    let to_ids = |mask: u32| -> Vec<u32> {
        (0..cands.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| cands[i])
            .collect()
    };
    match best {
        Some((_, mask)) => {
            let per_start = per_start_req.iter().map(|(&s, &req)| (cands[s], to_ids(req))).collect();
            Ok(SteinerSolution::build(
                g,
                to_ids(mask).into_iter().collect(),
                per_start,
                Vec::new(),
            ))
        }
        None => Ok(SteinerSolution::build(
            g,
            BTreeSet::new(),
            BTreeMap::new(),
            pairs.to_vec(),
        )),
    }
}

/// An ME value and the subgraph that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeResult {
    pub value: f64,
    pub solution: SteinerSolution,
}

/// Best shortest-path tree over `roots` inside `filter`, keeping the `needed`
/// terminals of lowest cost.
fn best_rooted_tree(
    g: &DirectedGraph,
    terminals: &[u32],
    needed: usize,
    roots: &[u32],
    filter: &CandidateFilter,
) -> Option<MeResult> {
    let mut best: Option<MeResult> = None;
    for &root in roots {
        if !filter.contains(root) {
            continue;
        }
        let tree = bfs_tree(g, root, filter);
        let mut reached: Vec<(f64, u32)> = terminals
            .iter()
            .filter(|&&t| tree.cost[t as usize].is_finite())
            .map(|&t| (tree.cost[t as usize], t))
            .collect();
        if reached.len() < needed {
            continue;
        }
        reached.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nodes = BTreeSet::from([root]);
        let chosen: Vec<u32> = reached[..needed].iter().map(|&(_, t)| t).collect();
        for &t in &chosen {
            tree.path_into(t, &mut nodes);
        }
        let value = nodes.len() as f64;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(MeResult {
                value,
                solution: SteinerSolution::build(g, nodes, BTreeMap::from([(root, chosen)]), Vec::new()),
            });
        }
    }
    best
}

fn infeasible(g: &DirectedGraph, terminals: &[u32]) -> MeResult {
    MeResult {
        value: f64::INFINITY,
        solution: SteinerSolution::build(
            g,
            BTreeSet::new(),
            BTreeMap::new(),
            terminals.iter().map(|&t| (NO_PARENT, t)).collect(),
        ),
    }
}

/// ME without entry or range constraints: the best shortest-path tree over
/// `roots`, keeping the `ceil(acc * k)` terminals of lowest hop count.
pub fn me_basic(g: &DirectedGraph, nn: &NeighborList, k: usize, acc: f64, roots: &[u32]) -> Result<MeResult> {
    if nn.len() < k || k == 0 {
        return Err(invalid!("neighbor list has {} entries, need k = {k}", nn.len()));
    }
    let terminals = nn.top_ids(k);
    let filter = CandidateFilter::unbounded(g.count());
    Ok(best_rooted_tree(g, &terminals, required_count(acc, k), roots, &filter)
        .unwrap_or_else(|| infeasible(g, &terminals)))
}

/// [`me_basic`] restricted to the subgraph induced by `nodes`, every vertex of
/// it tried as the root. `None` if no root reaches enough terminals.
pub fn me_basic_within(
    g: &DirectedGraph,
    nn: &NeighborList,
    k: usize,
    acc: f64,
    nodes: &[u32],
) -> Result<Option<MeResult>> {
    if nn.len() < k || k == 0 {
        return Err(invalid!("neighbor list has {} entries, need k = {k}", nn.len()));
    }
    let filter = CandidateFilter::from_ids(g.count(), nodes);
    Ok(best_rooted_tree(
        g,
        &nn.top_ids(k),
        required_count(acc, k),
        nodes,
        &filter,
    ))
}

/// Whether `nodes` is a qualified subgraph: inside `filter`, and holding at
/// least `ceil(p k)` members of `knn` that each reach at least `ceil(acc k)`
/// members of `knn` within the induced subgraph (a vertex reaches itself).
pub fn is_qualified(g: &DirectedGraph, nodes: &[u32], knn: &[u32], acc: f64, p: f64, filter: &CandidateFilter) -> bool {
    if nodes.iter().any(|&v| !filter.contains(v)) {
        return false;
    }
    let k = knn.len();
    let inside = CandidateFilter::from_ids(g.count(), nodes);
    let need_reach = required_count(acc, k);
    let qualified = knn
        .iter()
        .filter(|&&s| inside.contains(s))
        .filter(|&&s| {
            let tree = bfs_tree(g, s, &inside);
            knn.iter().filter(|&&t| tree.cost[t as usize].is_finite()).count() >= need_reach
        })
        .count();
    qualified >= required_count(p, k)
}

/// Qualification with starts counted through their groups, the
/// mutual-reachability classes of the subgraph induced by `filter`: a member of
/// `knn` counts when some member of its group lies in `nodes` and reaches at
/// least `ceil(acc k)` members of `knn` within the subgraph induced by `nodes`.
/// This is the notion the pair-set solvers satisfy, since they connect one
/// representative start per group.
pub fn is_group_qualified(
    g: &DirectedGraph,
    nodes: &[u32],
    knn: &[u32],
    acc: f64,
    p: f64,
    filter: &CandidateFilter,
    counting: StartCounting,
) -> bool {
    if nodes.iter().any(|&v| !filter.contains(v)) {
        return false;
    }
    let k = knn.len();
    let inside = CandidateFilter::from_ids(g.count(), nodes);
    let need_reach = required_count(acc, k);
    let starts: Vec<u32> = knn
        .iter()
        .copied()
        .filter(|&s| inside.contains(s))
        .filter(|&s| {
            let tree = bfs_tree(g, s, &inside);
            knn.iter().filter(|&&t| tree.cost[t as usize].is_finite()).count() >= need_reach
        })
        .collect();
    let reach: Vec<Vec<bool>> = knn
        .iter()
        .map(|&s| {
            let tree = bfs_tree(g, s, filter);
            knn.iter().map(|&t| tree.cost[t as usize].is_finite()).collect()
        })
        .collect();
    let index = |v: u32| knn.iter().position(|&t| t == v).unwrap_or(usize::MAX);
    let counted: BTreeSet<usize> = (0..k)
        .filter(|&t| starts.iter().map(|&s| index(s)).any(|s| reach[s][t] && reach[t][s]))
        .collect();
    let count = match counting {
        StartCounting::Members => counted.len(),
        StartCounting::Groups => counted
            .iter()
            .filter(|&&t| !counted.iter().any(|&u| u < t && reach[u][t] && reach[t][u]))
            .count(),
    };
    count >= required_count(p, k)
}

/// Keeps the smaller of two results; ties keep `a`.
fn smaller(a: MeResult, b: MeResult) -> MeResult {
    if b.value < a.value {
        b
    } else {
        a
    }
}

/// ME with entry points from the witness pairs and candidates limited by
/// `filter`: the smaller vertex count of the unweighted and the
/// decision-weighted pair-set heuristics, one representative start per group.
pub fn me_constrained(g: &DirectedGraph, pairs: &PairSet, filter: &CandidateFilter) -> Result<MeResult> {
    let reps = pairs.representative_pairs();
    let plain = vdsn_heuristic(g, &reps, filter, None)?;
    let weighted = vdsn_heuristic(g, &reps, filter, Some(&decision_weights(g)))?;
    Ok(smaller(
        MeResult {
            value: plain.me(),
            solution: plain,
        },
        MeResult {
            value: weighted.me(),
            solution: weighted,
        },
    ))
}

/// ME with decision cost: the node-weighted heuristic (weights `1 + out-degree`)
/// and the unweighted one, reported as the smaller exact `Cost(Y)`.
pub fn me_exhaustive(g: &DirectedGraph, pairs: &PairSet, filter: &CandidateFilter) -> Result<MeResult> {
    let reps = pairs.representative_pairs();
    let weighted = vdsn_heuristic(g, &reps, filter, Some(&decision_weights(g)))?;
    let plain = vdsn_heuristic(g, &reps, filter, None)?;
    Ok(smaller(
        MeResult {
            value: weighted.exhaustive_cost(),
            solution: weighted,
        },
        MeResult {
            value: plain.exhaustive_cost(),
            solution: plain,
        },
    ))
}

/// The three ME variants of one query on one graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeChain {
    pub basic: MeResult,
    pub constrained: MeResult,
    pub exhaustive: MeResult,
}

/// All three variants, each also bounded by the subgraphs found for the
/// stricter ones: a qualified subgraph for the constrained problem contains a
/// rooted tree that is feasible for the basic one.
pub fn me_chain(
    g: &DirectedGraph,
    nn: &NeighborList,
    k: usize,
    acc: f64,
    roots: &[u32],
    pairs: &PairSet,
    filter: &CandidateFilter,
) -> Result<MeChain> {
    let exhaustive = me_exhaustive(g, pairs, filter)?;
    let mut constrained = me_constrained(g, pairs, filter)?;
    if exhaustive.solution.me() < constrained.value {
        constrained = MeResult {
            value: exhaustive.solution.me(),
            solution: exhaustive.solution.clone(),
        };
    }
    let mut basic = me_basic(g, nn, k, acc, roots)?;
    if constrained.solution.is_feasible() {
        if let Some(inner) = me_basic_within(g, nn, k, acc, &constrained.solution.nodes)? {
            basic = smaller(basic, inner);
        }
    }
    Ok(MeChain {
        basic,
        constrained,
        exhaustive,
    })
}
