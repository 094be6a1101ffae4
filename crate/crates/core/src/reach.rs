//! Critical radius search over a union-find set graph (USG).
//!
//! Nearest neighbors of the query are inserted one at a time, in ascending
//! distance order. Mutually reachable inserted vertices are kept in one
//! union-find group, and the USG is a DAG over the group roots: an edge
//! `A -> B` means some member of `A` has a graph edge to some member of `B`.
//! After each insertion:
//!
//! 1. the new vertex becomes a singleton group, linked to the groups of its
//!    already-inserted out- and in-neighbors;
//! 2. every directed loop through the new group is collapsed into one group,
//!    repeatedly, until the USG is acyclic again;
//! 3. the kNN members inserted so far are mapped to their groups and each group
//!    is tested by a BFS over the USG for how many kNN members it reaches.
//!
//! The search stops at the first insertion where enough kNN members lie in
//! groups that reach enough kNN members. The distance of the last inserted
//! vertex is the critical radius.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dataset::{Neighbor, NeighborList, QueryDistances, VectorSet};
use crate::error::{invalid, Result};
use crate::graphs::DirectedGraph;
use crate::required_count;

/// How qualified entry points are counted against `ceil(p * k)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartCounting {
    /// kNN members lying in qualified groups.
    #[default]
    Members,
    /// Distinct qualified groups (one per union-find root).
    Groups,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delta0Params {
    pub k: usize,
    /// Fraction of the kNN each qualified start must reach.
    pub acc: f64,
    /// Fraction of the kNN that must be qualified starts.
    pub p: f64,
    pub max_candidates: usize,
    pub counting: StartCounting,
}

impl Delta0Params {
    pub fn new(k: usize, acc: f64, p: f64, max_candidates: usize) -> Self {
        Self {
            k,
            acc,
            p,
            max_candidates,
            counting: StartCounting::Members,
        }
    }

    /// `min(N, 50 k + 10000)`.
    pub fn default_max_candidates(count: usize, k: usize) -> usize {
        count.min(50 * k + 10_000)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid!("k must be positive"));
        }
        if !(self.acc > 0.0 && self.acc <= 1.0) {
            return Err(invalid!("Acc = {} outside (0, 1]", self.acc));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid!("p = {} outside (0, 1]", self.p));
        }
        Ok(())
    }
}

/// Starts sharing one reachable group, and the kNN members they reach.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairGroup {
    /// kNN members of the group, nearest to the query first.
    pub starts: Vec<u32>,
    /// kNN members reachable from the group (the group's own members included), nearest first.
    pub terminals: Vec<u32>,
}

/// Start/terminal requirements, grouped by reachable group.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairSet {
    pub groups: Vec<PairGroup>,
}

impl PairSet {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Every concrete `(start, terminal)` pair.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.starts
                    .iter()
                    .flat_map(move |&s| g.terminals.iter().map(move |&t| (s, t)))
            })
            .collect()
    }

    /// One start per group (the member nearest to the query) with its terminals.
    pub fn representative_pairs(&self) -> Vec<(u32, u32)> {
        self.groups
            .iter()
            .flat_map(|g| g.terminals.iter().map(move |&t| (g.starts[0], t)))
            .collect()
    }

    /// All qualified starts, ascending id.
    pub fn qualified_starts(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.groups.iter().flat_map(|g| g.starts.iter().copied()).collect();
        s.sort_unstable();
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Delta0Status {
    Found,
    /// The neighbor list ran out before the requirement was met.
    Exhausted,
    /// `max_candidates` insertions were made without success.
    CandidateCap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delta0Result {
    /// Distance of the last inserted vertex; `+inf` unless `status == Found`.
    pub radius: f64,
    /// `radius / d_k - 1`.
    pub delta0: f64,
    pub pairs: PairSet,
    pub iterations: usize,
    pub candidate_count: usize,
    pub status: Delta0Status,
}

impl Delta0Result {
    pub fn found(&self) -> bool {
        self.status == Delta0Status::Found
    }

    fn failure(status: Delta0Status, iterations: usize, candidate_count: usize) -> Self {
        Self {
            radius: f64::INFINITY,
            delta0: f64::INFINITY,
            pairs: PairSet::default(),
            iterations,
            candidate_count,
            status,
        }
    }
}

fn relative_delta(radius: f64, dk: f64) -> f64 {
    if dk > 0.0 {
        radius / dk - 1.0
    } else if radius > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Union-find groups of mutually reachable inserted vertices plus the DAG between them.
///
/// Vertices are addressed by graph id; groups by the local index of their root.
#[derive(Clone, Debug)]
pub struct Usg<'g> {
    g: &'g DirectedGraph,
    revg: &'g DirectedGraph,
    /// graph id -> local index + 1 (0 = not inserted)
    slot: Vec<u32>,
    order: Vec<u32>,
    parent: Vec<usize>,
    size: Vec<usize>,
    out: Vec<BTreeSet<usize>>,
    inn: Vec<BTreeSet<usize>>,
    groups: usize,
}

impl<'g> Usg<'g> {
    pub fn new(g: &'g DirectedGraph, revg: &'g DirectedGraph) -> Self {
        Self {
            g,
            revg,
            slot: vec![0; g.count()],
            order: Vec::new(),
            parent: Vec::new(),
            size: Vec::new(),
            out: Vec::new(),
            inn: Vec::new(),
            groups: 0,
        }
    }

    pub fn inserted_count(&self) -> usize {
        self.order.len()
    }

    /// Number of USG vertices (live groups).
    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn is_inserted(&self, v: u32) -> bool {
        self.slot[v as usize] != 0
    }

    pub fn inserted(&self) -> &[u32] {
        &self.order
    }

    fn local(&self, v: u32) -> Option<usize> {
        match self.slot[v as usize] {
            0 => None,
            s => Some(s as usize - 1),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn find_compress(&mut self, x: usize) -> usize {
        let root = self.find(x);
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Group key of an inserted vertex.
    pub fn group_of(&self, v: u32) -> Option<usize> {
        self.local(v).map(|l| self.find(l))
    }

    /// Graph ids of the group with key `root`, ascending.
    pub fn members(&self, root: usize) -> Vec<u32> {
        let mut m: Vec<u32> = (0..self.order.len())
            .filter(|&l| self.find(l) == root)
            .map(|l| self.order[l])
            .collect();
        m.sort_unstable();
        m
    }

    /// Live group keys, ascending.
    pub fn group_keys(&self) -> Vec<usize> {
        (0..self.order.len()).filter(|&l| self.parent[l] == l).collect()
    }

    pub fn successors(&self, root: usize) -> &BTreeSet<usize> {
        &self.out[root]
    }

    /// Inserts `v` and restores acyclicity. Returns the number of loop merges.
    pub fn insert(&mut self, v: u32) -> usize {
        assert!(!self.is_inserted(v), "vertex {v} inserted twice");
        let me = self.order.len();
        self.order.push(v);
        self.slot[v as usize] = me as u32 + 1;
        self.parent.push(me);
        self.size.push(1);
        self.out.push(BTreeSet::new());
        self.inn.push(BTreeSet::new());
        self.groups += 1;

        let (g, revg) = (self.g, self.revg);
        for &w in g.neighbors(v) {
            if let Some(l) = self.local(w) {
                let r = self.find_compress(l);
                if r != me {
                    self.out[me].insert(r);
                    self.inn[r].insert(me);
                }
            }
        }
        for &w in revg.neighbors(v) {
            if let Some(l) = self.local(w) {
                let r = self.find_compress(l);
                if r != me {
                    self.inn[me].insert(r);
                    self.out[r].insert(me);
                }
            }
        }

        // The USG was acyclic before, so every loop passes through the new group.
        let mut root = me;
        let mut merges = 0;
        while let Some(cycle) = self.loop_through(root) {
            root = self.merge(&cycle);
            merges += 1;
        }
        merges
    }

    /// A directed loop through `root`, found by DFS, as the list of its groups.
    fn loop_through(&self, root: usize) -> Option<Vec<usize>> {
        let mut visited = BTreeSet::from([root]);
        let mut stack: Vec<(usize, std::collections::btree_set::Iter<'_, usize>)> = vec![(root, self.out[root].iter())];
        while let Some((_, iter)) = stack.last_mut() {
            match iter.next() {
                Some(&next) if next == root => {
                    return Some(stack.iter().map(|(node, _)| *node).collect());
                }
                Some(&next) => {
                    if visited.insert(next) {
                        stack.push((next, self.out[next].iter()));
                    }
                }
                None => {
                    stack.pop();
                }
            }
        }
        None
    }

    /// Collapses `nodes` into one group; edges leaving the set are kept.
    fn merge(&mut self, nodes: &[usize]) -> usize {
        let set: BTreeSet<usize> = nodes.iter().copied().collect();
        let mut new_out = BTreeSet::new();
        let mut new_in = BTreeSet::new();
        for &s in &set {
            for t in std::mem::take(&mut self.out[s]) {
                if !set.contains(&t) {
                    self.inn[t].remove(&s);
                    new_out.insert(t);
                }
            }
            for t in std::mem::take(&mut self.inn[s]) {
                if !set.contains(&t) {
                    self.out[t].remove(&s);
                    new_in.insert(t);
                }
            }
        }
        let mut root = *set.iter().next().unwrap();
        for &s in set.iter().skip(1) {
            let (a, b) = if self.size[root] >= self.size[s] {
                (root, s)
            } else {
                (s, root)
            };
            self.parent[b] = a;
            self.size[a] += self.size[b];
            root = a;
        }
        self.groups -= set.len() - 1;
        for &t in &new_out {
            self.inn[t].insert(root);
        }
        for &t in &new_in {
            self.out[t].insert(root);
        }
        self.out[root] = new_out;
        self.inn[root] = new_in;
        root
    }

    /// Groups reachable from `root` over USG edges, `root` included.
    pub fn reachable_groups(&self, root: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &y in &self.out[x] {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// Whether the USG currently has no directed cycle (three-colour DFS).
    pub fn is_acyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Colour {
            White,
            Grey,
            Black,
        }
        let mut colour = vec![Colour::White; self.order.len()];
        for start in self.group_keys() {
            if colour[start] != Colour::White {
                continue;
            }
            let mut stack = vec![(start, self.out[start].iter())];
            colour[start] = Colour::Grey;
            while let Some((node, iter)) = stack.last_mut() {
                let node = *node;
                match iter.next() {
                    Some(&next) => match colour[next] {
                        Colour::Grey => return false,
                        Colour::White => {
                            colour[next] = Colour::Grey;
                            stack.push((next, self.out[next].iter()));
                        }
                        Colour::Black => {}
                    },
                    None => {
                        colour[node] = Colour::Black;
                        stack.pop();
                    }
                }
            }
        }
        true
    }

    /// Whether inserted `a` reaches inserted `b` according to the USG.
    pub fn reaches(&self, a: u32, b: u32) -> bool {
        match (self.group_of(a), self.group_of(b)) {
            (Some(ra), Some(rb)) => self.reachable_groups(ra).contains(&rb),
            _ => false,
        }
    }
}

/// Incremental critical-radius search. Feed neighbors in ascending distance order.
#[derive(Clone, Debug)]
pub struct Delta0Search<'g> {
    usg: Usg<'g>,
    params: Delta0Params,
    knn: Vec<u32>,
    needed_terminals: usize,
    needed_starts: usize,
}

impl<'g> Delta0Search<'g> {
    pub fn new(g: &'g DirectedGraph, revg: &'g DirectedGraph, params: Delta0Params) -> Result<Self> {
        params.validate()?;
        if g.count() != revg.count() {
            return Err(invalid!("graph and reversed graph differ in size"));
        }
        Ok(Self {
            usg: Usg::new(g, revg),
            needed_terminals: required_count(params.acc, params.k),
            needed_starts: required_count(params.p, params.k),
            params,
            knn: Vec::new(),
        })
    }

    pub fn usg(&self) -> &Usg<'g> {
        &self.usg
    }

    pub fn iterations(&self) -> usize {
        self.usg.inserted_count()
    }

    /// Inserts the next nearest neighbor; returns the witness pairs once qualified.
    pub fn push(&mut self, n: Neighbor) -> Option<PairSet> {
        if self.knn.len() < self.params.k {
            self.knn.push(n.id);
        }
        self.usg.insert(n.id);
        self.qualify()
    }

    fn qualify(&self) -> Option<PairSet> {
        // fewer inserted kNN than required terminals: nothing can qualify
        if self.knn.len() < self.needed_terminals {
            return None;
        }
        let mut by_group: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        let mut first_rank: Vec<(usize, usize)> = Vec::new();
        for (rank, &v) in self.knn.iter().enumerate() {
            let root = self.usg.group_of(v).expect("kNN member inserted");
            let entry = by_group.entry(root).or_default();
            if entry.is_empty() {
                first_rank.push((rank, root));
            }
            entry.push(v);
        }
        let rank_of = |v: u32| self.knn.iter().position(|&x| x == v).unwrap();
        let mut groups = Vec::new();
        let mut qualified_members = 0;
        for &(_, root) in &first_rank {
            let reach = self.usg.reachable_groups(root);
            let mut terminals: Vec<u32> = by_group
                .iter()
                .filter(|(r, _)| reach.contains(r))
                .flat_map(|(_, m)| m.iter().copied())
                .collect();
            if terminals.len() >= self.needed_terminals {
                terminals.sort_by_key(|&t| rank_of(t));
                let starts = by_group[&root].clone();
                qualified_members += starts.len();
                groups.push(PairGroup { starts, terminals });
            }
        }
        let count = match self.params.counting {
            StartCounting::Members => qualified_members,
            StartCounting::Groups => groups.len(),
        };
        (count >= self.needed_starts && !groups.is_empty()).then_some(PairSet { groups })
    }
}

fn finish(pairs: PairSet, last: Neighbor, dk: f32, iterations: usize, candidates: usize) -> Delta0Result {
    let radius = last.dist as f64;
    Delta0Result {
        radius,
        delta0: relative_delta(radius, dk as f64),
        pairs,
        iterations,
        candidate_count: candidates,
        status: Delta0Status::Found,
    }
}

fn check_list(nn: &NeighborList, k: usize) -> Result<()> {
    if nn.len() < k {
        return Err(invalid!("neighbor list has {} entries, need k = {k}", nn.len()));
    }
    Ok(())
}

/// Critical radius and witness pairs over a precomputed ascending neighbor list.
pub fn find_delta0(
    g: &DirectedGraph,
    revg: &DirectedGraph,
    nn: &NeighborList,
    params: &Delta0Params,
) -> Result<Delta0Result> {
    check_list(nn, params.k)?;
    let mut search = Delta0Search::new(g, revg, params.clone())?;
    let limit = nn.len().min(params.max_candidates);
    let dk = nn.dist(params.k);
    for (i, &n) in nn.iter().take(limit).enumerate() {
        if let Some(pairs) = search.push(n) {
            return Ok(finish(pairs, n, dk, i + 1, limit));
        }
    }
    let status = if limit >= params.max_candidates {
        Delta0Status::CandidateCap
    } else {
        Delta0Status::Exhausted
    };
    Ok(Delta0Result::failure(status, limit, limit))
}

/// Critical radius for a raw query: fetches `4 k` exact neighbors first and
/// doubles the fetch until success, exhaustion of the base or `max_candidates`.
pub fn find_delta0_for_query(
    g: &DirectedGraph,
    revg: &DirectedGraph,
    distances: &mut QueryDistances,
    params: &Delta0Params,
) -> Result<Delta0Result> {
    if distances.total() < params.k {
        return Err(invalid!(
            "base has {} vectors, need k = {}",
            distances.total(),
            params.k
        ));
    }
    let mut search = Delta0Search::new(g, revg, params.clone())?;
    let cap = params.max_candidates.min(distances.total());
    let dk = distances.prefix(params.k)[params.k - 1].dist;
    let mut fetched = (4 * params.k).min(cap);
    let mut next = 0;
    loop {
        let chunk = distances.prefix(fetched)[next..].to_vec();
        for n in chunk {
            next += 1;
            if let Some(pairs) = search.push(n) {
                return Ok(finish(pairs, n, dk, next, fetched));
            }
        }
        if fetched >= cap {
            let status = if cap >= params.max_candidates {
                Delta0Status::CandidateCap
            } else {
                Delta0Status::Exhausted
            };
            return Ok(Delta0Result::failure(status, next, fetched));
        }
        fetched = (fetched * 2).min(cap);
    }
}

/// Convenience wrapper computing the query's distances first.
pub fn find_delta0_for_vector(
    g: &DirectedGraph,
    revg: &DirectedGraph,
    base: &VectorSet,
    q: &[f32],
    params: &Delta0Params,
) -> Result<Delta0Result> {
    let mut distances = QueryDistances::new(base, q);
    find_delta0_for_query(g, revg, &mut distances, params)
}

/// Reference implementation: after every insertion, BFS from each inserted kNN
/// member over the subgraph induced by the inserted vertices.
pub fn find_delta0_naive(
    g: &DirectedGraph,
    revg: &DirectedGraph,
    nn: &NeighborList,
    params: &Delta0Params,
) -> Result<Delta0Result> {
    params.validate()?;
    check_list(nn, params.k)?;
    if g.count() != revg.count() {
        return Err(invalid!("graph and reversed graph differ in size"));
    }
    let k = params.k;
    let needed_terminals = required_count(params.acc, k);
    let needed_starts = required_count(params.p, k);
    let limit = nn.len().min(params.max_candidates);
    let knn = nn.top_ids(k);
    let mut inserted = vec![false; g.count()];
    for (i, &n) in nn.iter().take(limit).enumerate() {
        inserted[n.id as usize] = true;
        let present = &knn[..(i + 1).min(k)];
        let reach: Vec<Vec<u32>> = present
            .iter()
            .map(|&s| {
                let seen = bfs_within(g, s, &inserted);
                present.iter().copied().filter(|&t| seen[t as usize]).collect()
            })
            .collect();
        let qualified: Vec<usize> = (0..present.len())
            .filter(|&j| reach[j].len() >= needed_terminals)
            .collect();
        let count = match params.counting {
            StartCounting::Members => qualified.len(),
            StartCounting::Groups => {
                // classes of mutual reachability among qualified starts
                let mut classes: Vec<Vec<usize>> = Vec::new();
                for &j in &qualified {
                    let same = classes.iter_mut().find(|c| {
                        let o = c[0];
                        reach[j].contains(&present[o]) && reach[o].contains(&present[j])
                    });
                    match same {
                        Some(c) => c.push(j),
                        None => classes.push(vec![j]),
                    }
                }
                classes.len()
            }
        };
        if !qualified.is_empty() && count >= needed_starts {
            let groups = qualified
                .iter()
                .map(|&j| PairGroup {
                    starts: vec![present[j]],
                    terminals: reach[j].clone(),
                })
                .collect();
            return Ok(finish(PairSet { groups }, n, nn.dist(k), i + 1, limit));
        }
    }
    let status = if limit >= params.max_candidates {
        Delta0Status::CandidateCap
    } else {
        Delta0Status::Exhausted
    };
    Ok(Delta0Result::failure(status, limit, limit))
}

/// BFS from `start` over vertices with `allowed[v]`.
pub(crate) fn bfs_within(g: &DirectedGraph, start: u32, allowed: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; g.count()];
    if !allowed[start as usize] {
        return seen;
    }
    seen[start as usize] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v) {
            if allowed[u as usize] && !seen[u as usize] {
                seen[u as usize] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}
