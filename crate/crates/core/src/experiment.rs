//! Correlation experiments between hardness measures and measured search effort.
//!
//! An experiment builds `R` index instances on shuffled copies of the base,
//! measures the NDC each query needs to reach every recall target, computes
//! the hardness measures once, and writes Pearson tables and per-query CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{brute_force_knn, read_fvecs, NeighborList, VectorSet};
use crate::error::{invalid, Error, Result};
use crate::graphs::{build_hnsw_base, build_kgraph, build_mrng_approx, reverse_graph, DirectedGraph, HnswParams};
use crate::hardness::{compute_hardness, pearson, HardnessParams, HardnessRecord, Measures, Pearson};
use crate::search::{measure_effort, EffortParams, EntryPolicy};
use crate::workload::quantile;

/// Writes `# comment` followed by a CSV table of `rows`.
pub fn write_csv<T: Serialize>(path: &Path, comment: &str, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    if !comment.is_empty() {
        writeln!(buf, "# {comment}").map_err(|e| Error::io(path, e))?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a CSV table, skipping `#` comment lines.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Hnsw,
    Kgraph,
    Mrng,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Base vectors; when absent a Gaussian base is generated.
    pub base: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub synthetic_count: usize,
    pub synthetic_dim: usize,
    pub synthetic_queries: usize,
    pub synthetic_seed: u64,
    pub index: IndexKind,
    pub m: usize,
    pub ef_construction: usize,
    /// Out-degree of a KGraph index.
    pub kgraph_k: usize,
    pub instances: usize,
    /// One per instance; defaults to `seed + i`.
    pub shuffle_seeds: Vec<u64>,
    pub k: usize,
    pub recall_targets: Vec<f64>,
    pub measures: Vec<String>,
    pub acc: f64,
    pub p: f64,
    pub efc: usize,
    pub eps: f64,
    /// `"random"` or a vertex id.
    pub entry: String,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// The desk-scale setup: 20k Gaussian vectors in 16 dimensions, 200 queries.
    fn default() -> Self {
        let desk = HardnessParams::desk();
        Self {
            base: None,
            query: None,
            synthetic_count: 20_000,
            synthetic_dim: 16,
            synthetic_queries: 200,
            synthetic_seed: 2024,
            index: IndexKind::Hnsw,
            m: 16,
            ef_construction: 200,
            kgraph_k: 64,
            instances: 3,
            shuffle_seeds: Vec::new(),
            k: desk.k,
            recall_targets: vec![0.9],
            measures: ["steiner", "lid", "rc", "qe", "eps"].map(String::from).to_vec(),
            acc: desk.acc,
            p: desk.p,
            efc: desk.efc,
            eps: desk.eps,
            entry: "random".into(),
            repeats: 1,
            seed: 1,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(invalid!("instances must be at least 1"));
        }
        if !self.shuffle_seeds.is_empty() && self.shuffle_seeds.len() != self.instances {
            return Err(invalid!(
                "{} shuffle seeds for {} instances",
                self.shuffle_seeds.len(),
                self.instances
            ));
        }
        if self.recall_targets.is_empty() || self.recall_targets.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(invalid!("recall targets must lie in (0, 1]"));
        }
        if self.k == 0 || self.repeats == 0 {
            return Err(invalid!("k and repeats must be positive"));
        }
        for m in &self.measures {
            if m != "ndc" {
                Measures::parse(m)?;
            }
        }
        self.entry_policy()?;
        Ok(())
    }

    pub fn hardness_params(&self) -> HardnessParams {
        HardnessParams {
            k: self.k,
            acc: self.acc,
            p: self.p,
            efc: self.efc,
            eps: self.eps,
            max_candidates: None,
            counting: Default::default(),
        }
    }

    pub fn entry_policy(&self) -> Result<EntryPolicy> {
        if self.entry == "random" {
            return Ok(EntryPolicy::Random);
        }
        self.entry
            .parse()
            .map(EntryPolicy::Fixed)
            .map_err(|_| invalid!("entry must be \"random\" or a vertex id, got {:?}", self.entry))
    }

    pub fn shuffle_seed(&self, instance: usize) -> u64 {
        self.shuffle_seeds
            .get(instance)
            .copied()
            .unwrap_or(self.seed.wrapping_add(instance as u64))
    }

    /// Base and query vectors, read from disk or generated.
    pub fn load_data(&self) -> Result<(VectorSet, VectorSet)> {
        match (&self.base, &self.query) {
            (Some(b), Some(q)) => Ok((read_fvecs(b)?, read_fvecs(q)?)),
            (None, None) => Ok((
                VectorSet::gaussian(self.synthetic_count, self.synthetic_dim, self.synthetic_seed),
                VectorSet::gaussian(
                    self.synthetic_queries,
                    self.synthetic_dim,
                    self.synthetic_seed.wrapping_add(1),
                ),
            )),
            _ => Err(invalid!("base and query must be given together")),
        }
    }

    fn measure_flags(&self) -> Measures {
        let list: Vec<&str> = self
            .measures
            .iter()
            .map(String::as_str)
            .filter(|&m| m != "ndc")
            .collect();
        Measures::parse(&list.join(",")).expect("validated")
    }
}

/// Random permutation of `0..count`.
pub fn shuffle_order(count: usize, seed: u64) -> Vec<u32> {
    let mut order: Vec<u32> = (0..count as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Maps a graph over `base.permuted(order)` back to original ids.
pub fn unpermute_graph(g: &DirectedGraph, order: &[u32]) -> Result<DirectedGraph> {
    let mut adj = vec![Vec::new(); g.count()];
    for (i, list) in g.adjacency().iter().enumerate() {
        adj[order[i] as usize] = list.iter().map(|&j| order[j as usize]).collect();
    }
    DirectedGraph::from_adjacency(adj)
}

/// Builds one index instance on a shuffled insertion order.
pub fn build_instance(base: &VectorSet, cfg: &ExperimentConfig, shuffle_seed: u64) -> Result<DirectedGraph> {
    let order = shuffle_order(base.count(), shuffle_seed);
    let shuffled = base.permuted(&order);
    let g = match cfg.index {
        IndexKind::Hnsw => build_hnsw_base(
            &shuffled,
            &HnswParams {
                m: cfg.m,
                ef_construction: cfg.ef_construction,
            },
        )?,
        IndexKind::Kgraph => build_kgraph(&shuffled, cfg.kgraph_k)?,
        IndexKind::Mrng => build_mrng_approx(&shuffled, cfg.efc)?,
    };
    unpermute_graph(&g, &order)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffortRow {
    pub query_id: usize,
    pub target: f64,
    pub instance: usize,
    pub ndc: f64,
    pub ef: f64,
    pub recall: f64,
    pub phase1_ndc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEffortRow {
    pub query_id: usize,
    pub target: f64,
    pub mean_ndc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub index: String,
    pub target: f64,
    pub measure: String,
    pub r: f64,
    pub used: usize,
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdcSummary {
    pub target: f64,
    pub count: usize,
    pub unreachable: usize,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

/// Quantiles of mean NDC per recall target. Unreachable (infinite) entries
/// are counted separately.
pub fn summarize_ndc_distribution(rows: &[MeanEffortRow], targets: &[f64]) -> Result<Vec<NdcSummary>> {
    if rows.is_empty() {
        return Err(invalid!("no effort rows"));
    }
    targets
        .iter()
        .map(|&t| {
            let all: Vec<f64> = rows
                .iter()
                .filter(|r| (r.target - t).abs() < 1e-12)
                .map(|r| r.mean_ndc)
                .collect();
            if all.is_empty() {
                return Err(invalid!("no effort rows for target {t}"));
            }
            let mut v: Vec<f64> = all.iter().copied().filter(|x| x.is_finite()).collect();
            if v.is_empty() {
                return Err(invalid!("no finite effort for target {t}"));
            }
            v.sort_by(f64::total_cmp);
            Ok(NdcSummary {
                target: t,
                count: v.len(),
                unreachable: all.len() - v.len(),
                min: v[0],
                p25: quantile(&v, 0.25),
                p50: quantile(&v, 0.5),
                p75: quantile(&v, 0.75),
                p90: quantile(&v, 0.9),
                p99: quantile(&v, 0.99),
                max: v[v.len() - 1],
            })
        })
        .collect()
}

/// The `n` easiest and `n` hardest query ids by Steiner-hardness, ties by id.
pub fn split_simple_hard(records: &[HardnessRecord], n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut finite: Vec<(f64, usize)> = records
        .iter()
        .filter(|r| r.steiner.is_finite())
        .map(|r| (r.steiner, r.query_id))
        .collect();
    if 2 * n > finite.len() {
        return Err(invalid!("need {} finite records, have {}", 2 * n, finite.len()));
    }
    finite.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let simple = finite[..n].iter().map(|x| x.1).collect();
    let hard = finite[finite.len() - n..].iter().map(|x| x.1).collect();
    Ok((simple, hard))
}

/// Fraction of finite values within the lowest `band` of the `[min, max]` range.
pub fn lowest_band_fraction(values: &[f64], band: f64) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = lo + band * (hi - lo);
    v.iter().filter(|&&x| x < cut || (hi == lo)).count() as f64 / v.len() as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOutcome {
    pub correlations: Vec<CorrelationRow>,
    pub records: Vec<HardnessRecord>,
    pub effort: Vec<EffortRow>,
    pub mean_effort: Vec<MeanEffortRow>,
    pub distributions: Vec<NdcSummary>,
}

impl ExperimentOutcome {
    pub fn correlation(&self, measure: &str, target: f64) -> Option<f64> {
        self.correlations
            .iter()
            .find(|c| c.measure == measure && (c.target - target).abs() < 1e-12)
            .map(|c| c.r)
    }
}

/// Pearson table over `measures` against mean NDC, one row per (target, measure).
pub fn correlation_table(
    index: &str,
    records: &[HardnessRecord],
    mean_effort: &[MeanEffortRow],
    targets: &[f64],
    measures: &[String],
) -> Vec<CorrelationRow> {
    let mut rows = Vec::new();
    for &t in targets {
        let effort: BTreeMap<usize, f64> = mean_effort
            .iter()
            .filter(|r| (r.target - t).abs() < 1e-12)
            .map(|r| (r.query_id, r.mean_ndc))
            .collect();
        let matched: Vec<(&HardnessRecord, f64)> = records
            .iter()
            .filter_map(|r| effort.get(&r.query_id).map(|&e| (r, e)))
            .collect();
        let y: Vec<f64> = matched.iter().map(|m| m.1).collect();
        for name in measures {
            let x: Vec<f64> = matched
                .iter()
                .map(|(r, e)| {
                    if name == "ndc" {
                        *e
                    } else {
                        r.measure(name).unwrap_or(f64::NAN)
                    }
                })
                .collect();
            let p = pearson(&x, &y).unwrap_or(Pearson {
                r: f64::NAN,
                used: 0,
                dropped: x.len(),
            });
            rows.push(CorrelationRow {
                index: index.to_string(),
                target: t,
                measure: name.clone(),
                r: p.r,
                used: p.used,
                dropped: p.dropped,
            });
        }
    }
    rows
}

fn index_name(kind: IndexKind) -> &'static str {
    match kind {
        IndexKind::Hnsw => "hnsw",
        IndexKind::Kgraph => "kgraph",
        IndexKind::Mrng => "mrng",
    }
}

/// Runs the experiment in memory.
pub fn run_correlation_experiment_in_memory(
    cfg: &ExperimentConfig,
    base: &VectorSet,
    queries: &VectorSet,
) -> Result<ExperimentOutcome> {
    run_correlation_experiment_with(cfg, base, queries, None)
}

/// [`run_correlation_experiment_in_memory`] with an already built MRNG and its
/// reverse, which must have been built on `base` with `cfg.efc`.
pub fn run_correlation_experiment_with(
    cfg: &ExperimentConfig,
    base: &VectorSet,
    queries: &VectorSet,
    prebuilt: Option<(&DirectedGraph, &DirectedGraph)>,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let max_target_k = cfg.k;
    log::info!("ground truth for {} queries", queries.count());
    let gts: Vec<NeighborList> = brute_force_knn(base, queries, max_target_k)?;
    let entry = cfg.entry_policy()?;

    log::info!("building {} {} instances", cfg.instances, index_name(cfg.index));
    let graphs: Vec<DirectedGraph> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| build_instance(base, cfg, cfg.shuffle_seed(i)))
        .collect::<Result<_>>()?;

    let mut effort = Vec::new();
    for &target in &cfg.recall_targets {
        for (inst, g) in graphs.iter().enumerate() {
            let params = EffortParams {
                k: cfg.k,
                target_recall: target,
                entry,
                repeats: cfg.repeats,
                seed: cfg.seed.wrapping_add(1000 + inst as u64),
            };
            let per_query = measure_effort(g, base, queries, &gts, &params)?;
            for (qid, e) in per_query.iter().enumerate() {
                effort.push(EffortRow {
                    query_id: qid,
                    target,
                    instance: inst,
                    ndc: e.mean_ndc(),
                    ef: e.mean_ef(),
                    recall: e.mean_recall(),
                    phase1_ndc: e.mean_phase1_ndc(),
                });
            }
        }
    }
    let mean_effort = mean_over_instances(&effort);

    let flags = cfg.measure_flags();
    let hp = cfg.hardness_params();
    let built = if flags.steiner && prebuilt.is_none() {
        log::info!("approximate MRNG with efC = {}", hp.efc);
        let g = build_mrng_approx(base, hp.efc)?;
        let rev = reverse_graph(&g);
        Some((g, rev))
    } else {
        None
    };
    let mrng = match prebuilt {
        Some((g, r)) if g.count() != base.count() || r.count() != base.count() => {
            return Err(invalid!(
                "prebuilt MRNG has {} vertices, base has {}",
                g.count(),
                base.count()
            ))
        }
        Some(pair) => Some(pair),
        None => built.as_ref().map(|(g, r)| (g, r)),
    };
    log::info!("hardness measures");
    let mut records = compute_hardness(mrng.filter(|_| flags.steiner), base, queries, &flags, &hp)?;
    let first = cfg.recall_targets[0];
    for m in mean_effort.iter().filter(|m| (m.target - first).abs() < 1e-12) {
        records[m.query_id].measured_ndc = m.mean_ndc;
    }

    let correlations = correlation_table(
        index_name(cfg.index),
        &records,
        &mean_effort,
        &cfg.recall_targets,
        &cfg.measures,
    );
    let distributions = summarize_ndc_distribution(&mean_effort, &cfg.recall_targets)?;
    Ok(ExperimentOutcome {
        correlations,
        records,
        effort,
        mean_effort,
        distributions,
    })
}

/// Per-query mean over instances, sorted by (target, query id).
pub fn mean_over_instances(rows: &[EffortRow]) -> Vec<MeanEffortRow> {
    let mut acc: BTreeMap<(u64, usize), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.target.to_bits(), r.query_id)).or_insert((0.0, 0));
        e.0 += r.ndc;
        e.1 += 1;
    }
    let mut out: Vec<MeanEffortRow> = acc
        .into_iter()
        .map(|((t, q), (s, n))| MeanEffortRow {
            query_id: q,
            target: f64::from_bits(t),
            mean_ndc: s / n as f64,
        })
        .collect();
    out.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.query_id.cmp(&b.query_id)));
    out
}

/// Runs the experiment and writes its tables to `out_dir`.
///
/// Files: `effort.csv`, `effort_mean.csv`, `per_query.csv`,
/// `correlations.csv`/`.json` and `ndc_distribution.csv`/`.json`. On failure an
/// `INCOMPLETE` file names the error.
pub fn run_correlation_experiment(cfg: &ExperimentConfig, out_dir: &Path, comment: &str) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let marker = out_dir.join("INCOMPLETE");
    let _ = fs::remove_file(&marker);
    let result = cfg
        .load_data()
        .and_then(|(base, queries)| run_correlation_experiment_in_memory(cfg, &base, &queries))
        .and_then(|outcome| {
            write_csv(&out_dir.join("effort.csv"), comment, &outcome.effort)?;
            write_csv(&out_dir.join("effort_mean.csv"), comment, &outcome.mean_effort)?;
            write_csv(&out_dir.join("per_query.csv"), comment, &outcome.records)?;
            write_csv(&out_dir.join("correlations.csv"), comment, &outcome.correlations)?;
            write_json(&out_dir.join("correlations.json"), &outcome.correlations)?;
            write_csv(&out_dir.join("ndc_distribution.csv"), comment, &outcome.distributions)?;
            write_json(&out_dir.join("ndc_distribution.json"), &outcome.distributions)?;
            Ok(outcome)
        });
    if let Err(e) = &result {
        let _ = fs::write(&marker, format!("{e}\n"));
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, steiner: f64) -> HardnessRecord {
        HardnessRecord {
            query_id: id,
            steiner,
            delta0_radius: f64::NAN,
            delta0: f64::NAN,
            lid: f64::NAN,
            rc: f64::NAN,
            qe: f64::NAN,
            epsilon_hardness: f64::NAN,
            measured_ndc: f64::NAN,
        }
    }

    #[test]
    fn split_identity_sequence() {
        let records: Vec<_> = (0..10).map(|i| rec(i, i as f64)).collect();
        assert_eq!(split_simple_hard(&records, 2).unwrap(), (vec![0, 1], vec![8, 9]));
        let (s, h) = split_simple_hard(&records, 5).unwrap();
        assert_eq!(s.len() + h.len(), 10);
        assert!(split_simple_hard(&records, 6).is_err());
    }

    #[test]
    fn constant_ndc_summary() {
        let rows: Vec<_> = (0..5)
            .map(|q| MeanEffortRow {
                query_id: q,
                target: 0.9,
                mean_ndc: 7.0,
            })
            .collect();
        let s = &summarize_ndc_distribution(&rows, &[0.9]).unwrap()[0];
        assert!([s.min, s.p25, s.p50, s.p75, s.p90, s.p99, s.max]
            .iter()
            .all(|&x| x == 7.0));
        assert!(summarize_ndc_distribution(&[], &[0.9]).is_err());
        assert!(summarize_ndc_distribution(&rows, &[0.95]).is_err());
    }

    #[test]
    fn mean_matches_instances() {
        let rows: Vec<_> = (0..3)
            .map(|i| EffortRow {
                query_id: 0,
                target: 0.9,
                instance: i,
                ndc: [10.0, 20.0, 36.0][i],
                ef: 0.0,
                recall: 1.0,
                phase1_ndc: 0.0,
            })
            .collect();
        assert_eq!(mean_over_instances(&rows)[0].mean_ndc, 22.0);
    }

    #[test]
    fn self_correlation_is_one() {
        let records: Vec<_> = (0..4).map(|i| rec(i, i as f64)).collect();
        let effort: Vec<_> = (0..4)
            .map(|q| MeanEffortRow {
                query_id: q,
                target: 0.9,
                mean_ndc: (q * q) as f64,
            })
            .collect();
        let t = correlation_table("hnsw", &records, &effort, &[0.9], &["ndc".into(), "lid".into()]);
        assert_eq!(t[0].r, 1.0);
        assert!(t[1].r.is_nan());
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::from_toml("instances = 2\nk = 5\nrecall_targets = [0.8, 0.95]\n").unwrap();
        assert_eq!(cfg.instances, 2);
        assert_eq!(cfg.m, 16);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("recall_targets = [1.5]").is_err());
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unpermute_restores_ids() {
        let order = vec![2u32, 0, 1];
        let g = DirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let back = unpermute_graph(&g, &order).unwrap();
        assert!(back.has_edge(2, 0) && back.has_edge(0, 1));
        assert_eq!(back.edge_count(), 2);
    }

    #[test]
    fn lowest_band() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        assert!((lowest_band_fraction(&v, 0.2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let rows = vec![rec(0, f64::INFINITY), rec(1, 3.5)];
        write_csv(&p, "gah test", &rows).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("# gah test\n"));
        let back: Vec<HardnessRecord> = read_csv(&p).unwrap();
        assert_eq!(back[0].steiner, f64::INFINITY);
        assert_eq!(back[1].steiner, 3.5);
        assert!(back[1].lid.is_nan());
    }
}
