//! Greedy beam search with distance-computation counting.
//!
//! The search keeps an unbounded candidate queue and a result heap of capacity
//! `ef`. It pops the nearest candidate, stops once that candidate is farther than
//! the worst result of a full heap, and otherwise evaluates every unvisited
//! neighbor. A neighbor enters both structures iff the heap is not full or it is
//! strictly closer than the current worst result.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{l2, Neighbor, NeighborList, VectorSet};
use crate::error::{invalid, Result};
use crate::graphs::DirectedGraph;
use crate::required_count;

#[derive(Clone, Copy, Debug)]
struct Cand(Neighbor);

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_by_distance(&other.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// The `k` nearest entries of the result heap.
    pub answers: NeighborList,
    /// Number of distance evaluations, the entry point included.
    pub ndc: usize,
    /// `ndc` at the first evaluation of a ground-truth top-k member, if any was evaluated.
    pub phase1_ndc: Option<usize>,
    pub access_order: Option<Vec<u32>>,
}

/// Reusable search state. Visited marks are reset in O(1) per search.
#[derive(Clone, Debug)]
pub struct Searcher {
    marks: Vec<u32>,
    epoch: u32,
    record_access: bool,
}

impl Searcher {
    pub fn new(count: usize) -> Self {
        Self {
            marks: vec![0; count],
            epoch: 0,
            record_access: false,
        }
    }

    /// Also return the ids in evaluation order.
    pub fn recording_access(mut self) -> Self {
        self.record_access = true;
        self
    }

    fn reset(&mut self, count: usize) {
        if self.marks.len() < count {
            self.marks.resize(count, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Runs one search. `gt_top` holds the ground-truth top-k ids used for the phase split.
    #[allow(clippy::too_many_arguments)]
    pub fn search(
        &mut self,
        g: &DirectedGraph,
        base: &VectorSet,
        q: &[f32],
        ep: u32,
        ef: usize,
        k: usize,
        gt_top: Option<&[u32]>,
    ) -> Result<SearchResult> {
        if k == 0 || ef < k {
            return Err(invalid!("need 1 <= k <= ef, got k = {k}, ef = {ef}"));
        }
        if ep as usize >= g.count() || g.count() > base.count() {
            return Err(invalid!(
                "entry point {ep} invalid for a graph of {} vertices",
                g.count()
            ));
        }
        self.reset(g.count());
        let epoch = self.epoch;
        let mut gt_sorted: Vec<u32> = gt_top.map(<[u32]>::to_vec).unwrap_or_default();
        gt_sorted.sort_unstable();
        let mut access_order = self.record_access.then(Vec::new);

        let mut ndc = 0usize;
        let mut phase1_ndc = None;
        let mut evaluate = |id: u32, ndc: &mut usize| -> f32 {
            *ndc += 1;
            if phase1_ndc.is_none() && gt_sorted.binary_search(&id).is_ok() {
                phase1_ndc = Some(*ndc);
            }
            if let Some(order) = access_order.as_mut() {
                order.push(id);
            }
            l2(q, base.get(id as usize))
        };

        let mut pq: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(ef + 1);
        let start = Cand(Neighbor::new(ep, evaluate(ep, &mut ndc)));
        self.marks[ep as usize] = epoch;
        pq.push(Reverse(start));
        heap.push(start);

        while let Some(Reverse(current)) = pq.pop() {
            // worst result; +inf while the heap is not full
            let bound = if heap.len() >= ef {
                heap.peek().map_or(f32::INFINITY, |c| c.0.dist)
            } else {
                f32::INFINITY
            };
            if current.0.dist > bound {
                break;
            }
            for &v in g.neighbors(current.0.id) {
                if self.marks[v as usize] == epoch {
                    continue;
                }
                self.marks[v as usize] = epoch;
                let d = evaluate(v, &mut ndc);
                let bound = if heap.len() >= ef {
                    heap.peek().map_or(f32::INFINITY, |c| c.0.dist)
                } else {
                    f32::INFINITY
                };
                if d < bound {
                    let c = Cand(Neighbor::new(v, d));
                    pq.push(Reverse(c));
                    heap.push(c);
                    if heap.len() > ef {
                        heap.pop();
                    }
                }
            }
        }

        let mut answers: Vec<Neighbor> = heap.into_iter().map(|c| c.0).collect();
        answers.sort_unstable_by(Neighbor::cmp_by_distance);
        answers.truncate(k);
        Ok(SearchResult {
            answers: NeighborList::new(answers),
            ndc,
            phase1_ndc,
            access_order,
        })
    }
}

/// One-shot search; see [`Searcher::search`].
pub fn greedy_search(
    g: &DirectedGraph,
    base: &VectorSet,
    q: &[f32],
    ep: u32,
    ef: usize,
    k: usize,
    gt: Option<&NeighborList>,
) -> Result<SearchResult> {
    let top = gt.map(|l| l.top_ids(k));
    Searcher::new(g.count()).search(g, base, q, ep, ef, k, top.as_deref())
}

/// `|answers ∩ gt[..k]| / k`.
pub fn recall(answers: &[u32], gt: &NeighborList, k: usize) -> Result<f64> {
    Ok(overlap_count(answers, gt, k)? as f64 / k as f64)
}

fn overlap_count(answers: &[u32], gt: &NeighborList, k: usize) -> Result<usize> {
    if k == 0 || gt.len() < k {
        return Err(invalid!("ground truth has {} entries, need k = {k}", gt.len()));
    }
    let top = &gt.as_slice()[..k];
    let mut seen: Vec<u32> = Vec::with_capacity(answers.len());
    Ok(answers
        .iter()
        .filter(|&&a| {
            if seen.contains(&a) {
                return false;
            }
            seen.push(a);
            top.iter().any(|n| n.id == a)
        })
        .count())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EntryPolicy {
    Fixed(u32),
    /// A uniformly random vertex per repeat, seeded per query.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffortParams {
    pub k: usize,
    pub target_recall: f64,
    pub entry: EntryPolicy,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffortRun {
    pub entry: u32,
    /// Smallest `ef` of the sweep reaching the target, `None` if even `ef = N` fails.
    pub ef: Option<usize>,
    pub ndc: usize,
    pub recall: f64,
    pub phase1_ndc: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Effort {
    pub runs: Vec<EffortRun>,
}

impl Effort {
    /// Mean NDC over repeats; `+inf` if any repeat cannot reach the target.
    pub fn mean_ndc(&self) -> f64 {
        if self.runs.iter().any(|r| r.ef.is_none()) {
            return f64::INFINITY;
        }
        self.runs.iter().map(|r| r.ndc as f64).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_ef(&self) -> f64 {
        if self.runs.iter().any(|r| r.ef.is_none()) {
            return f64::INFINITY;
        }
        self.runs.iter().map(|r| r.ef.unwrap() as f64).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_recall(&self) -> f64 {
        self.runs.iter().map(|r| r.recall).sum::<f64>() / self.runs.len() as f64
    }

    /// Mean phase-1 NDC; a run that never touched the top-k counts its full NDC.
    pub fn mean_phase1_ndc(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.phase1_ndc.unwrap_or(r.ndc) as f64)
            .sum::<f64>()
            / self.runs.len() as f64
    }
}

fn query_rng(seed: u64, query_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query_id);
    rng
}

fn pick_entry(policy: EntryPolicy, count: usize, rng: &mut ChaCha8Rng) -> u32 {
    match policy {
        EntryPolicy::Fixed(v) => v,
        EntryPolicy::Random => rng.random_range(0..count as u32),
    }
}

/// NDC of the smallest `ef` reaching `target_recall`, averaged over repeats.
///
/// `ef` starts at `k` and doubles (capped at `N`) until the target is met, then
/// bisects down to the smallest passing value with granularity 1.
pub fn min_ndc_to_recall(
    searcher: &mut Searcher,
    g: &DirectedGraph,
    base: &VectorSet,
    q: &[f32],
    gt: &NeighborList,
    params: &EffortParams,
    query_id: u64,
) -> Result<Effort> {
    let k = params.k;
    if !(params.target_recall > 0.0 && params.target_recall <= 1.0) {
        return Err(invalid!("target recall {} outside (0, 1]", params.target_recall));
    }
    if params.repeats == 0 {
        return Err(invalid!("repeats must be at least 1"));
    }
    let n = g.count();
    if k == 0 || k > n || gt.len() < k {
        return Err(invalid!(
            "k = {k} invalid for {n} vertices and {} ground-truth entries",
            gt.len()
        ));
    }
    let top = gt.top_ids(k);
    let needed = required_count(params.target_recall, k);
    let mut rng = query_rng(params.seed, query_id);
    let mut runs = Vec::with_capacity(params.repeats);
    for _ in 0..params.repeats {
        let entry = pick_entry(params.entry, n, &mut rng);
        let mut run_at = |ef: usize| -> Result<(bool, SearchResult)> {
            let res = searcher.search(g, base, q, entry, ef, k, Some(&top))?;
            let ids: Vec<u32> = res.answers.ids().collect();
            Ok((overlap_count(&ids, gt, k)? >= needed, res))
        };
        let mut ef = k;
        let mut failing = None;
        let passing;
        loop {
            let (ok, res) = run_at(ef)?;
            if ok {
                passing = Some((ef, res));
                break;
            }
            failing = Some(ef);
            if ef >= n {
                passing = None;
                let recall = recall(&res.answers.ids().collect::<Vec<_>>(), gt, k)?;
                runs.push(EffortRun {
                    entry,
                    ef: None,
                    ndc: res.ndc,
                    recall,
                    phase1_ndc: res.phase1_ndc,
                });
                break;
            }
            ef = (ef * 2).min(n);
        }
        let Some((mut hi, mut best)) = passing else {
            continue;
        };
        if let Some(mut lo) = failing {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let (ok, res) = run_at(mid)?;
                if ok {
                    hi = mid;
                    best = res;
                } else {
                    lo = mid;
                }
            }
        }
        let ids: Vec<u32> = best.answers.ids().collect();
        runs.push(EffortRun {
            entry,
            ef: Some(hi),
            ndc: best.ndc,
            recall: recall(&ids, gt, k)?,
            phase1_ndc: best.phase1_ndc,
        });
    }
    Ok(Effort { runs })
}

/// [`min_ndc_to_recall`] for every query; query `i` uses RNG stream `i`.
pub fn measure_effort(
    g: &DirectedGraph,
    base: &VectorSet,
    queries: &VectorSet,
    gts: &[NeighborList],
    params: &EffortParams,
) -> Result<Vec<Effort>> {
    if gts.len() != queries.count() {
        return Err(invalid!(
            "{} ground-truth lists for {} queries",
            gts.len(),
            queries.count()
        ));
    }
    (0..queries.count())
        .into_par_iter()
        .map_init(
            || Searcher::new(g.count()),
            |searcher, i| min_ndc_to_recall(searcher, g, base, queries.get(i), &gts[i], params, i as u64),
        )
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseSplit {
    /// Evaluations up to and including the first top-k member; all of them if none was reached.
    pub phase1_ndc: usize,
    pub phase2_ndc: usize,
}

impl PhaseSplit {
    pub fn total(&self) -> usize {
        self.phase1_ndc + self.phase2_ndc
    }
}

/// Splits each query's NDC at the first evaluation of a ground-truth top-k member.
#[allow(clippy::too_many_arguments)]
pub fn phase_breakdown(
    g: &DirectedGraph,
    base: &VectorSet,
    queries: &VectorSet,
    gts: &[NeighborList],
    ef: usize,
    k: usize,
    entry: EntryPolicy,
    seed: u64,
) -> Result<Vec<PhaseSplit>> {
    if gts.len() != queries.count() {
        return Err(invalid!(
            "{} ground-truth lists for {} queries",
            gts.len(),
            queries.count()
        ));
    }
    (0..queries.count())
        .into_par_iter()
        .map_init(
            || Searcher::new(g.count()),
            |searcher, i| {
                let mut rng = query_rng(seed, i as u64);
                let ep = pick_entry(entry, g.count(), &mut rng);
                let top = gts[i].top_ids(k);
                let res = searcher.search(g, base, queries.get(i), ep, ef, k, Some(&top))?;
                let phase1 = res.phase1_ndc.unwrap_or(res.ndc);
                Ok(PhaseSplit {
                    phase1_ndc: phase1,
                    phase2_ndc: res.ndc - phase1,
                })
            },
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::brute_force_knn;
    use crate::graphs::build_kgraph;

    fn line(points: &[f32]) -> VectorSet {
        let rows: Vec<[f32; 1]> = points.iter().map(|&p| [p]).collect();
        VectorSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn path_graph_hand_simulation() {
        let base = line(&[0.0, 1.0, 2.0]);
        let g = DirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let res = greedy_search(&g, &base, &[2.2], 0, 1, 1, None).unwrap();
        assert_eq!(res.answers.top_ids(1), vec![2]);
        assert_eq!(res.ndc, 3);
    }

    #[test]
    fn singleton_graph() {
        let base = line(&[5.0]);
        let g = DirectedGraph::new(1);
        let res = greedy_search(&g, &base, &[0.0], 0, 1, 1, None).unwrap();
        assert_eq!(res.answers.top_ids(1), vec![0]);
        assert_eq!(res.ndc, 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        let base = line(&[0.0, 1.0]);
        let g = DirectedGraph::new(2);
        assert!(greedy_search(&g, &base, &[0.0], 0, 1, 2, None).is_err());
        assert!(greedy_search(&g, &base, &[0.0], 2, 2, 1, None).is_err());
    }

    #[test]
    fn access_order_and_phase_one() {
        let base = line(&[0.0, 1.0, 2.0, 3.0]);
        let g = DirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut s = Searcher::new(4).recording_access();
        let res = s.search(&g, &base, &[3.0], 0, 1, 1, Some(&[3])).unwrap();
        assert_eq!(res.access_order.as_deref(), Some(&[0, 1, 2, 3][..]));
        assert_eq!(res.phase1_ndc, Some(4));
        assert_eq!(res.ndc, 4);
    }

    #[test]
    fn recall_examples() {
        let gt = NeighborList::from_pairs(&[(0, 0.1), (1, 0.2), (2, 0.3), (3, 0.4), (4, 0.5)]);
        assert_eq!(recall(&[0, 1, 2, 3, 4], &gt, 5).unwrap(), 1.0);
        assert_eq!(recall(&[7, 8, 9], &gt, 5).unwrap(), 0.0);
        assert_eq!(recall(&[0, 1, 2, 3, 9], &gt, 5).unwrap(), 0.8);
        assert!(recall(&[0], &gt, 6).is_err());
    }

    #[test]
    fn effort_stops_at_k_when_possible() {
        let base = line(&[0.0, 1.0, 2.0]);
        let g = build_kgraph(&base, 2).unwrap();
        let gt = brute_force_knn(&base, &line(&[0.0]), 1).unwrap().remove(0);
        let params = EffortParams {
            k: 1,
            target_recall: 1.0,
            entry: EntryPolicy::Fixed(0),
            repeats: 1,
            seed: 0,
        };
        let e = min_ndc_to_recall(&mut Searcher::new(3), &g, &base, &[0.0], &gt, &params, 0).unwrap();
        assert_eq!(e.runs[0].ef, Some(1));
        let direct = greedy_search(&g, &base, &[0.0], 0, 1, 1, None).unwrap();
        assert_eq!(e.mean_ndc(), direct.ndc as f64);
    }

    #[test]
    fn effort_unreachable_is_infinite() {
        let base = line(&[0.0, 1.0, 10.0, 11.0]);
        let g = DirectedGraph::from_edges(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        let gt = brute_force_knn(&base, &line(&[10.5]), 2).unwrap().remove(0);
        let params = EffortParams {
            k: 2,
            target_recall: 0.5,
            entry: EntryPolicy::Fixed(0),
            repeats: 2,
            seed: 0,
        };
        let e = min_ndc_to_recall(&mut Searcher::new(4), &g, &base, &[10.5], &gt, &params, 0).unwrap();
        assert!(e.mean_ndc().is_infinite());
    }

    #[test]
    fn phase_split_on_long_path() {
        let pts: Vec<f32> = (0..50).map(|i| i as f32).collect();
        let base = line(&pts);
        let edges: Vec<(u32, u32)> = (0..49).map(|i| (i, i + 1)).collect();
        let g = DirectedGraph::from_edges(50, &edges).unwrap();
        let queries = line(&[49.0]);
        let gts = brute_force_knn(&base, &queries, 1).unwrap();
        let split = phase_breakdown(&g, &base, &queries, &gts, 1, 1, EntryPolicy::Fixed(0), 0).unwrap();
        assert_eq!(split[0].phase1_ndc, 50);
        assert_eq!(split[0].phase2_ndc, 0);
    }
}
