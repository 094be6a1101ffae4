//! Steiner-hardness and the distance-based baseline measures.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{NeighborList, QueryDistances, VectorSet};
use crate::error::{invalid, Error, Result};
use crate::graphs::DirectedGraph;
use crate::reach::{find_delta0_for_query, Delta0Params, Delta0Result, StartCounting};
use crate::steiner::{is_group_qualified, me_constrained, me_exhaustive, CandidateFilter, MeResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardnessParams {
    pub k: usize,
    pub acc: f64,
    pub p: f64,
    /// Candidate pool of the approximate MRNG the measure is computed on.
    pub efc: usize,
    /// Slack of the epsilon-hardness ball.
    pub eps: f64,
    /// Insertion cap of the critical-radius search; `None` = `min(N, 50 k + 10000)`.
    pub max_candidates: Option<usize>,
    #[serde(default)]
    pub counting: StartCounting,
}

impl HardnessParams {
    /// Settings for million-scale datasets.
    pub fn full_scale() -> Self {
        Self {
            k: 50,
            acc: 0.98,
            p: 0.95,
            efc: 2048,
            eps: 0.5,
            max_candidates: None,
            counting: StartCounting::Members,
        }
    }

    /// Settings sized for a laptop run on ~20k vectors.
    pub fn desk() -> Self {
        Self {
            k: 10,
            acc: 0.9,
            p: 0.95,
            efc: 256,
            eps: 0.5,
            max_candidates: None,
            counting: StartCounting::Members,
        }
    }

    pub fn delta0_params(&self, count: usize) -> Delta0Params {
        Delta0Params {
            k: self.k,
            acc: self.acc,
            p: self.p,
            max_candidates: self
                .max_candidates
                .unwrap_or_else(|| Delta0Params::default_max_candidates(count, self.k)),
            counting: self.counting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteinerHardness {
    /// Decision-cost ME at the critical radius; `+inf` if no radius was found.
    pub steiner: f64,
    /// Vertex-count ME on the same filter and pairs.
    pub constrained: f64,
    pub delta0: Delta0Result,
}

/// Filter of every base vector within `radius`, ties included.
pub fn filter_within(distances: &mut QueryDistances, radius: f64) -> CandidateFilter {
    let total = distances.total();
    if radius.is_infinite() {
        return CandidateFilter::unbounded(total);
    }
    let mut m = 64.min(total);
    loop {
        let prefix = distances.prefix(m);
        if m == total || prefix.last().is_some_and(|n| n.dist as f64 > radius) {
            return CandidateFilter::from_neighbors(total, prefix, radius);
        }
        m = (m * 2).min(total);
    }
}

/// Critical radius on the MRNG, then decision-cost ME of the witness pairs there.
pub fn steiner_hardness_with(
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    distances: &mut QueryDistances,
    params: &HardnessParams,
) -> Result<SteinerHardness> {
    let d0 = find_delta0_for_query(mrng, rev_mrng, distances, &params.delta0_params(distances.total()))?;
    if !d0.found() {
        return Ok(SteinerHardness {
            steiner: f64::INFINITY,
            constrained: f64::INFINITY,
            delta0: d0,
        });
    }
    let filter = filter_within(distances, d0.radius);
    let exhaustive = me_exhaustive(mrng, &d0.pairs, &filter)?;
    let constrained = me_constrained(mrng, &d0.pairs, &filter)?;
    Ok(SteinerHardness {
        steiner: exhaustive.value,
        constrained: constrained.value,
        delta0: d0,
    })
}

pub fn steiner_hardness(
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    base: &VectorSet,
    q: &[f32],
    params: &HardnessParams,
) -> Result<SteinerHardness> {
    let mut distances = QueryDistances::new(base, q);
    steiner_hardness_with(mrng, rev_mrng, &mut distances, params)
}

/// Steiner-hardness of one query for each `p` in `ps`.
pub fn sweep_p(
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    base: &VectorSet,
    q: &[f32],
    params: &HardnessParams,
    ps: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut distances = QueryDistances::new(base, q);
    ps.iter()
        .map(|&p| {
            let mut pp = params.clone();
            pp.p = p;
            Ok((p, steiner_hardness_with(mrng, rev_mrng, &mut distances, &pp)?.steiner))
        })
        .collect()
}

/// Constrained ME at radii `(1 + m * delta0) d_k` for each multiple `m`
/// (`+inf` for no range limit), with the witness pairs found at `delta0`.
///
/// The filters are nested, so the subgraph found at a smaller radius stays
/// feasible at every larger one and bounds its value. Infinite where no
/// critical radius exists.
pub fn me_constrained_radius_sweep(
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    distances: &mut QueryDistances,
    params: &HardnessParams,
    multiples: &[f64],
) -> Result<Vec<f64>> {
    let d0 = find_delta0_for_query(mrng, rev_mrng, distances, &params.delta0_params(distances.total()))?;
    if !d0.found() {
        return Ok(vec![f64::INFINITY; multiples.len()]);
    }
    let dk = distances.prefix(params.k)[params.k - 1].dist as f64;
    let mut order: Vec<usize> = (0..multiples.len()).collect();
    order.sort_by(|&a, &b| multiples[a].total_cmp(&multiples[b]));
    let mut out = vec![f64::INFINITY; multiples.len()];
    let mut best: Option<MeResult> = None;
    for i in order {
        let m = multiples[i];
        let radius = if m.is_infinite() {
            f64::INFINITY
        } else {
            ((1.0 + m * d0.delta0) * dk).max(d0.radius)
        };
        let filter = filter_within(distances, radius);
        let r = me_constrained(mrng, &d0.pairs, &filter)?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
        out[i] = best.as_ref().map_or(f64::INFINITY, |b| b.value);
    }
    Ok(out)
}

/// Constrained ME for each `acc` on the common filter of radius
/// `delta0(max acc)`, each with its own witness pairs.
///
/// A subgraph qualified for a larger `acc` is qualified for every smaller one
/// and bounds its value.
pub fn me_constrained_acc_sweep(
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    distances: &mut QueryDistances,
    params: &HardnessParams,
    accs: &[f64],
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..accs.len()).collect();
    order.sort_by(|&a, &b| accs[b].total_cmp(&accs[a]));
    let mut out = vec![f64::INFINITY; accs.len()];
    let Some(&top) = order.first() else {
        return Ok(out);
    };
    let total = distances.total();
    let with_acc = |acc: f64| {
        let mut p = params.clone();
        p.acc = acc;
        p.delta0_params(total)
    };
    let outer = find_delta0_for_query(mrng, rev_mrng, distances, &with_acc(accs[top]))?;
    if !outer.found() {
        return Ok(out);
    }
    let filter = filter_within(distances, outer.radius);
    let knn: Vec<u32> = distances.prefix(params.k).iter().map(|n| n.id).collect();
    let mut carried: Option<MeResult> = None;
    for i in order {
        let d0 = find_delta0_for_query(mrng, rev_mrng, distances, &with_acc(accs[i]))?;
        let mut r = me_constrained(mrng, &d0.pairs, &filter)?;
        if !d0.found() {
            r.value = f64::INFINITY;
        }
        if let Some(c) = &carried {
            if c.value < r.value
                && is_group_qualified(
                    mrng,
                    &c.solution.nodes,
                    &knn,
                    accs[i],
                    params.p,
                    &filter,
                    params.counting,
                )
            {
                r = c.clone();
            }
        }
        out[i] = r.value;
        carried = Some(r);
    }
    Ok(out)
}

fn need(nn: &NeighborList, m: usize) -> Result<()> {
    if nn.len() < m {
        return Err(invalid!("neighbor list has {} entries, need {m}", nn.len()));
    }
    Ok(())
}

/// Maximum-likelihood LID, `-(1/k Σ ln(d_i / d_k))^-1`.
///
/// `None` when `d_k = 0` or all of `d_1..d_k` are equal (the estimate diverges).
/// A zero `d_1` with positive `d_k` yields 0.
pub fn lid_estimate(nn: &NeighborList, k: usize) -> Result<Option<f64>> {
    if k < 2 {
        return Err(invalid!("LID needs k >= 2"));
    }
    need(nn, k)?;
    let dk = nn.dist(k) as f64;
    if dk <= 0.0 {
        return Ok(None);
    }
    let sum: f64 = (1..=k)
        .map(|i| {
            let di = nn.dist(i) as f64;
            if di == dk {
                0.0
            } else {
                (di / dk).ln()
            }
        })
        .sum();
    if sum == 0.0 {
        return Ok(None);
    }
    Ok(Some(-(k as f64) / sum))
}

/// Relative contrast: mean distance to the whole base divided by `d_k`.
pub fn relative_contrast(distances: &QueryDistances, nn: &NeighborList, k: usize) -> Result<Option<f64>> {
    need(nn, k)?;
    let dk = nn.dist(k) as f64;
    if dk <= 0.0 {
        return Ok(None);
    }
    Ok(Some(distances.mean_distance() / dk))
}

/// Query expansion `d_2k / d_k`.
pub fn query_expansion(nn: &NeighborList, k: usize) -> Result<Option<f64>> {
    need(nn, 2 * k)?;
    let dk = nn.dist(k) as f64;
    if dk <= 0.0 {
        return Ok(None);
    }
    Ok(Some(nn.dist(2 * k) as f64 / dk))
}

/// Number of base vectors within `(1 + eps) d_k`. Counts from `nn` while it
/// extends past the bound, otherwise falls back to a full scan.
pub fn epsilon_hardness(distances: &QueryDistances, nn: &NeighborList, k: usize, eps: f64) -> Result<usize> {
    need(nn, k)?;
    if eps < 0.0 {
        return Err(invalid!("eps must be non-negative"));
    }
    let bound = (1.0 + eps) * nn.dist(k) as f64;
    if nn.iter().last().is_some_and(|n| n.dist as f64 > bound) {
        return Ok(nn.iter().filter(|n| n.dist as f64 <= bound).count());
    }
    Ok(distances.unordered().iter().filter(|n| n.dist as f64 <= bound).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pearson {
    pub r: f64,
    pub used: usize,
    /// Pairs dropped because either value was not finite.
    pub dropped: usize,
}

/// Product-moment correlation over the pairs where both values are finite.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(invalid!("length mismatch: {} vs {}", x.len(), y.len()));
    }
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a, b))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(invalid!("need at least 2 finite pairs, have {n}"));
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid!("zero variance"));
    }
    Ok(Pearson {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        used: n,
        dropped: x.len() - n,
    })
}

/// Which measures to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measures {
    pub steiner: bool,
    pub lid: bool,
    pub rc: bool,
    pub qe: bool,
    pub eps: bool,
}

impl Measures {
    pub fn all() -> Self {
        Self {
            steiner: true,
            lid: true,
            rc: true,
            qe: true,
            eps: true,
        }
    }

    /// Parses a comma-separated list such as `steiner,lid,rc,qe,eps`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut m = Self {
            steiner: false,
            lid: false,
            rc: false,
            qe: false,
            eps: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "steiner" => m.steiner = true,
                "lid" => m.lid = true,
                "rc" => m.rc = true,
                "qe" => m.qe = true,
                "eps" => m.eps = true,
                other => return Err(invalid!("unknown measure {other:?}")),
            }
        }
        Ok(m)
    }
}

/// Per-query hardness values. Missing or undefined values are NaN; an
/// unreachable Steiner-hardness is `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardnessRecord {
    pub query_id: usize,
    pub steiner: f64,
    pub delta0_radius: f64,
    pub delta0: f64,
    pub lid: f64,
    pub rc: f64,
    pub qe: f64,
    pub epsilon_hardness: f64,
    pub measured_ndc: f64,
}

impl HardnessRecord {
    pub fn measure(&self, name: &str) -> Option<f64> {
        Some(match name {
            "steiner" => self.steiner,
            "lid" => self.lid,
            "rc" => self.rc,
            "qe" => self.qe,
            "eps" => self.epsilon_hardness,
            "ndc" => self.measured_ndc,
            _ => return None,
        })
    }
}

/// Hardness of one query.
pub fn hardness_record(
    mrng: Option<(&DirectedGraph, &DirectedGraph)>,
    base: &VectorSet,
    q: &[f32],
    query_id: usize,
    measures: &Measures,
    params: &HardnessParams,
) -> Result<HardnessRecord> {
    let k = params.k;
    let mut distances = QueryDistances::new(base, q);
    let nn = NeighborList::new(distances.prefix((2 * k).max(4 * k)).to_vec());
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let mut rec = HardnessRecord {
        query_id,
        steiner: f64::NAN,
        delta0_radius: f64::NAN,
        delta0: f64::NAN,
        lid: f64::NAN,
        rc: f64::NAN,
        qe: f64::NAN,
        epsilon_hardness: f64::NAN,
        measured_ndc: f64::NAN,
    };
    if measures.lid {
        rec.lid = opt(lid_estimate(&nn, k)?);
    }
    if measures.rc {
        rec.rc = opt(relative_contrast(&distances, &nn, k)?);
    }
    if measures.qe && nn.len() >= 2 * k {
        rec.qe = opt(query_expansion(&nn, k)?);
    }
    if measures.eps {
        rec.epsilon_hardness = epsilon_hardness(&distances, &nn, k, params.eps)? as f64;
    }
    if measures.steiner {
        let (g, rev) = mrng.ok_or_else(|| invalid!("Steiner-hardness needs an MRNG"))?;
        let s = steiner_hardness_with(g, rev, &mut distances, params)?;
        rec.steiner = s.steiner;
        rec.delta0_radius = s.delta0.radius;
        rec.delta0 = s.delta0.delta0;
    }
    Ok(rec)
}

/// [`hardness_record`] for every query, in parallel.
pub fn compute_hardness(
    mrng: Option<(&DirectedGraph, &DirectedGraph)>,
    base: &VectorSet,
    queries: &VectorSet,
    measures: &Measures,
    params: &HardnessParams,
) -> Result<Vec<HardnessRecord>> {
    if queries.count() > 0 && queries.dim() != base.dim() {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            found: queries.dim(),
        });
    }
    if let Some((g, _)) = mrng {
        if g.count() != base.count() {
            return Err(invalid!("MRNG has {} vertices, base has {}", g.count(), base.count()));
        }
    }
    (0..queries.count())
        .into_par_iter()
        .map(|i| hardness_record(mrng, base, queries.get(i), i, measures, params))
        .collect()
}

pub const MEASURE_NAMES: [&str; 5] = ["steiner", "lid", "rc", "qe", "eps"];

/// Pearson correlation of each measure with the measured effort.
///
/// Records are matched by `query_id`; pairs with a non-finite side are dropped
/// and counted.
pub fn correlate(records: &[HardnessRecord], effort: &BTreeMap<usize, f64>) -> BTreeMap<String, Result<Pearson>> {
    let matched: Vec<(&HardnessRecord, f64)> = records
        .iter()
        .filter_map(|r| effort.get(&r.query_id).map(|&e| (r, e)))
        .collect();
    let y: Vec<f64> = matched.iter().map(|m| m.1).collect();
    MEASURE_NAMES
        .iter()
        .map(|&name| {
            let x: Vec<f64> = matched.iter().map(|m| m.0.measure(name).unwrap()).collect();
            (name.to_string(), pearson(&x, &y))
        })
        .collect()
}

pub fn write_hardness_csv(records: &[HardnessRecord], path: impl AsRef<Path>, header_comment: &str) -> Result<()> {
    crate::experiment::write_csv(path.as_ref(), header_comment, records)
}

pub fn read_hardness_csv(path: impl AsRef<Path>) -> Result<Vec<HardnessRecord>> {
    crate::experiment::read_csv(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::knn_scan;

    fn list(d: &[f32]) -> NeighborList {
        NeighborList::new(
            d.iter()
                .enumerate()
                .map(|(i, &x)| crate::Neighbor::new(i as u32, x))
                .collect(),
        )
    }

    #[test]
    fn lid_formula() {
        let v = lid_estimate(&list(&[1.0, 2.0, 4.0]), 3).unwrap().unwrap();
        assert!((v - 3.0 / 8f64.ln()).abs() < 1e-12);
        assert_eq!(lid_estimate(&list(&[2.0, 2.0, 2.0]), 3).unwrap(), None);
        assert_eq!(lid_estimate(&list(&[0.0, 0.0]), 2).unwrap(), None);
        assert!(lid_estimate(&list(&[1.0]), 1).is_err());
    }

    #[test]
    fn lid_scale_invariant() {
        let a = lid_estimate(&list(&[0.3, 0.5, 0.9, 1.7]), 4).unwrap().unwrap();
        let b = lid_estimate(&list(&[3.0, 5.0, 9.0, 17.0]), 4).unwrap().unwrap();
        assert!((a - b).abs() < 1e-5 * a);
    }

    #[test]
    fn qe_ratio() {
        let nn = list(&[1.0, 2.0, 2.5, 3.0]);
        assert_eq!(query_expansion(&nn, 2).unwrap(), Some(1.5));
        assert_eq!(query_expansion(&list(&[1.0, 1.0]), 1).unwrap(), Some(1.0));
        assert!(query_expansion(&nn, 3).is_err());
    }

    #[test]
    fn rc_two_points() {
        let base = VectorSet::from_rows(&[[1.0f32], [3.0]]).unwrap();
        let qd = QueryDistances::new(&base, &[0.0]);
        let nn = knn_scan(&base, &[0.0], 2, None);
        assert_eq!(relative_contrast(&qd, &nn, 1).unwrap(), Some(2.0));
    }

    #[test]
    fn epsilon_count() {
        let base = VectorSet::from_rows(&[[0.0f32], [1.0], [2.0], [3.0]]).unwrap();
        let qd = QueryDistances::new(&base, &[0.0]);
        let short = knn_scan(&base, &[0.0], 3, None);
        // d_2 = 1, so the ball has radius 2.5
        assert_eq!(epsilon_hardness(&qd, &short, 2, 1.5).unwrap(), 3);
        assert_eq!(epsilon_hardness(&qd, &short, 2, 0.0).unwrap(), 2);
        assert_eq!(epsilon_hardness(&qd, &short, 1, 0.0).unwrap(), 1);
        assert_eq!(epsilon_hardness(&qd, &short, 2, 1e9).unwrap(), 4);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson(&x, &[3.0, 5.0, 7.0]).unwrap().r - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[-1.0, -2.0, -3.0]).unwrap().r + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[1.0, 3.0, 2.0]).unwrap().r - 0.5).abs() < 1e-12);
        assert!(pearson(&x, &[1.0, 1.0, 1.0]).is_err());
        let with_inf = pearson(&[1.0, 2.0, 3.0, f64::INFINITY], &[1.0, 3.0, 2.0, 0.0]).unwrap();
        assert_eq!(with_inf.dropped, 1);
    }

    #[test]
    fn measure_list_parsing() {
        assert_eq!(Measures::parse("steiner,lid,rc,qe,eps").unwrap(), Measures::all());
        assert!(Measures::parse("steiner,foo").is_err());
    }
}
