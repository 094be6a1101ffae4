//! The `gah` command-line front end.
//!
//! Every subcommand reads `fvecs`/`ivecs`/graph files, writes CSV (or JSON with
//! `--format json`), and starts each CSV with a `# gah <version> <argv>` line.
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    brute_force_knn, ground_truth_tables, neighbor_lists_from_ids, read_fvecs, read_ivecs, write_fvecs, write_ivecs,
    QueryDistances, VectorSet,
};
use crate::error::{invalid, Error, Result};
use crate::experiment::{
    read_csv, run_correlation_experiment, shuffle_order, unpermute_graph, write_csv, write_json, ExperimentConfig,
};
use crate::graphs::{
    build_hnsw_base, build_kgraph, build_mrng_approx, check_graph_header, load_graph, reverse_graph, save_graph,
    DirectedGraph, HnswParams,
};
use crate::hardness::{compute_hardness, filter_within, pearson, HardnessParams, HardnessRecord, Measures};
use crate::reach::{find_delta0_for_query, Delta0Params, StartCounting};
use crate::search::{measure_effort, EffortParams, EntryPolicy};
use crate::steiner::{me_basic, me_constrained, me_exhaustive, CandidateFilter};
use crate::workload::{unbiased_workload, WorkloadParams};

#[derive(Parser, Debug)]
#[command(name = "gah", version, about = "Query hardness for graph-based ANN indexes")]
struct Cli {
    #[command(flatten)]
    global: GlobalOptions,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOptions {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "GAH_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GraphType {
    Kgraph,
    Mrng,
    Hnsw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    Basic,
    Constrained,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Roots {
    All,
    Knn,
}

#[derive(Args, Debug, Clone)]
struct ReachArgs {
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0.98)]
    acc: f64,
    #[arg(long, default_value_t = 0.95)]
    p: f64,
    /// Insertion cap; defaults to min(N, 50k + 10000).
    #[arg(long)]
    max_candidates: Option<usize>,
    #[arg(long, value_enum, default_value_t = Counting::Members)]
    counting: Counting,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Counting {
    Members,
    Groups,
}

impl ReachArgs {
    fn params(&self, count: usize) -> Delta0Params {
        Delta0Params {
            k: self.k,
            acc: self.acc,
            p: self.p,
            max_candidates: self
                .max_candidates
                .unwrap_or_else(|| Delta0Params::default_max_candidates(count, self.k)),
            counting: match self.counting {
                Counting::Members => StartCounting::Members,
                Counting::Groups => StartCounting::Groups,
            },
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact k nearest neighbors of every query.
    ComputeGt {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dists: Option<PathBuf>,
    },
    /// Build a KGraph, approximate MRNG or single-layer HNSW graph.
    BuildGraph {
        #[arg(long = "type", value_enum)]
        kind: GraphType,
        #[arg(long)]
        base: PathBuf,
        #[arg(long = "K", default_value_t = 32)]
        kgraph_k: usize,
        #[arg(long, default_value_t = 256)]
        efc: usize,
        #[arg(long = "M", default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        ef_construction: usize,
        /// Insert HNSW vertices in a random order drawn from --seed.
        #[arg(long)]
        shuffle: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the reverse graph.
        #[arg(long)]
        out_reverse: Option<PathBuf>,
    },
    /// Critical radius and qualified entry points per query.
    Delta0 {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        revgraph: Option<PathBuf>,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        reach: ReachArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum effort of each query.
    Me {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        revgraph: Option<PathBuf>,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        reach: ReachArgs,
        #[arg(long, value_enum, default_value_t = Variant::Exhaustive)]
        variant: Variant,
        /// `delta0`, `inf`, or a ratio delta giving radius (1 + delta) d_k.
        #[arg(long, default_value = "delta0")]
        radius: String,
        /// Roots tried by the basic variant.
        #[arg(long, value_enum, default_value_t = Roots::All)]
        roots: Roots,
        #[arg(long)]
        out: PathBuf,
    },
    /// Steiner-hardness and the baseline measures.
    Hardness {
        #[arg(long)]
        mrng: Option<PathBuf>,
        #[arg(long)]
        revgraph: Option<PathBuf>,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        reach: ReachArgs,
        #[arg(long, default_value = "steiner,lid,rc,qe,eps")]
        measures: String,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smallest NDC reaching a recall target.
    MeasureEffort {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0.98)]
        recall: f64,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// `random` or a vertex id.
        #[arg(long, default_value = "random")]
        entry: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pearson correlation of each hardness measure with measured effort.
    Correlate {
        #[arg(long)]
        hardness: PathBuf,
        #[arg(long)]
        effort: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hardness-stratified query workload from a GMM fitted to the base.
    GenWorkload {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        mrng: PathBuf,
        #[arg(long)]
        revgraph: Option<PathBuf>,
        #[arg(long = "Q")]
        q: usize,
        #[arg(long)]
        h: usize,
        #[arg(long, default_value_t = 16)]
        components: usize,
        #[arg(long, default_value_t = 10)]
        oversample: usize,
        #[arg(long, default_value_t = 20_000)]
        fit_sample: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0.98)]
        acc: f64,
        #[arg(long, default_value_t = 0.95)]
        p: f64,
        #[arg(long, default_value_t = 0.01)]
        trim_lo: f64,
        #[arg(long, default_value_t = 0.99)]
        trim_hi: f64,
        #[arg(long)]
        out_queries: PathBuf,
        #[arg(long)]
        out_hardness: PathBuf,
    },
    /// Run a correlation experiment described by a TOML file.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .format_timestamp(None)
        .try_init();
    let comment = format!(
        "gah {} {}",
        env!("CARGO_PKG_VERSION"),
        argv.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" ")
    );
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    let ctx = Ctx {
        seed: cli.global.seed,
        format: cli.global.format,
        comment,
    };
    match pool.install(|| dispatch(cli.command, &ctx)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

struct Ctx {
    seed: u64,
    format: Format,
    comment: String,
}

impl Ctx {
    fn emit<T: Serialize>(&self, path: &Path, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => write_csv(path, &self.comment, rows),
            Format::Json => write_json(path, rows),
        }
    }
}

fn load_vectors(base: &Path, query: &Path) -> Result<(VectorSet, VectorSet)> {
    let b = read_fvecs(base)?;
    let q = read_fvecs(query)?;
    if b.dim() != q.dim() {
        return Err(Error::DimMismatch {
            expected: b.dim(),
            found: q.dim(),
        });
    }
    Ok((b, q))
}

/// Loads a graph and its reverse, checking both headers before reading anything else.
fn load_pair(graph: &Path, rev: Option<&Path>, count: Option<usize>) -> Result<(DirectedGraph, DirectedGraph)> {
    let n = check_graph_header(graph)?;
    if let Some(r) = rev {
        let nr = check_graph_header(r)?;
        if nr != n {
            return Err(invalid!("graph has {n} vertices, reverse graph has {nr}"));
        }
    }
    if let Some(c) = count {
        if c != n {
            return Err(invalid!("graph has {n} vertices, base has {c}"));
        }
    }
    let g = load_graph(graph)?;
    let r = match rev {
        Some(p) => load_graph(p)?,
        None => reverse_graph(&g),
    };
    Ok((g, r))
}

fn fvecs_count(path: &Path) -> Result<usize> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 4];
    use std::io::Read;
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| Error::io(path, e))?;
    let dim = i32::from_le_bytes(head);
    if dim <= 0 {
        return Err(Error::format(path, format!("non-positive dimension {dim}")));
    }
    let rec = 4 + 4 * dim as u64;
    if meta.len() % rec != 0 {
        return Err(Error::format(path, "length is not a multiple of the record size"));
    }
    Ok((meta.len() / rec) as usize)
}

fn parse_entry(s: &str) -> Result<EntryPolicy> {
    if s == "random" {
        return Ok(EntryPolicy::Random);
    }
    s.parse()
        .map(EntryPolicy::Fixed)
        .map_err(|_| invalid!("entry must be \"random\" or a vertex id, got {s:?}"))
}

#[derive(Serialize)]
struct Delta0Row {
    query_id: usize,
    radius: f64,
    delta0: f64,
    iterations: usize,
    status: String,
    qualified_starts: String,
}

#[derive(Serialize)]
struct MeRow {
    query_id: usize,
    variant: String,
    radius: f64,
    me: f64,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct EffortCsvRow {
    query_id: usize,
    ndc: f64,
    ef: f64,
    recall: f64,
    phase1_ndc: f64,
}

#[derive(Serialize)]
struct CorrelationEntry {
    measure: String,
    r: Option<f64>,
    used: usize,
    dropped: usize,
    error: Option<String>,
}

#[derive(Serialize)]
struct CorrelationReport {
    queries: usize,
    infinite_steiner: usize,
    correlations: Vec<CorrelationEntry>,
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn dispatch(cmd: Command, ctx: &Ctx) -> Result<()> {
    match cmd {
        Command::ComputeGt {
            base,
            query,
            k,
            out,
            dists,
        } => {
            let (b, q) = load_vectors(&base, &query)?;
            let gt = brute_force_knn(&b, &q, k)?;
            let (ids, d) = ground_truth_tables(&gt);
            write_ivecs(&ids, &out)?;
            if let Some(p) = dists {
                write_fvecs(&d, p)?;
            }
            Ok(())
        }
        Command::BuildGraph {
            kind,
            base,
            kgraph_k,
            efc,
            m,
            ef_construction,
            shuffle,
            out,
            out_reverse,
        } => {
            let b = read_fvecs(&base)?;
            let g = match kind {
                GraphType::Kgraph => build_kgraph(&b, kgraph_k)?,
                GraphType::Mrng => build_mrng_approx(&b, efc)?,
                GraphType::Hnsw => {
                    let params = HnswParams { m, ef_construction };
                    if shuffle {
                        let order = shuffle_order(b.count(), ctx.seed);
                        unpermute_graph(&build_hnsw_base(&b.permuted(&order), &params)?, &order)?
                    } else {
                        build_hnsw_base(&b, &params)?
                    }
                }
            };
            let s = g.stats();
            log::info!("{} edges, mean out-degree {:.2}", s.edge_count, s.avg_out_degree);
            save_graph(&g, &out)?;
            if let Some(p) = out_reverse {
                save_graph(&reverse_graph(&g), p)?;
            }
            Ok(())
        }
        Command::Delta0 {
            graph,
            revgraph,
            base,
            query,
            reach,
            out,
        } => {
            let (g, rev) = load_pair(&graph, revgraph.as_deref(), Some(fvecs_count(&base)?))?;
            let (b, q) = load_vectors(&base, &query)?;
            let params = reach.params(b.count());
            let rows = par_queries(&q, |i, v| {
                let r = find_delta0_for_query(&g, &rev, &mut QueryDistances::new(&b, v), &params)?;
                Ok(Delta0Row {
                    query_id: i,
                    radius: r.radius,
                    delta0: r.delta0,
                    iterations: r.iterations,
                    status: format!("{:?}", r.status).to_lowercase(),
                    qualified_starts: join_ids(&r.pairs.qualified_starts()),
                })
            })?;
            ctx.emit(&out, &rows)
        }
        Command::Me {
            graph,
            revgraph,
            base,
            query,
            reach,
            variant,
            radius,
            roots,
            out,
        } => {
            let (g, rev) = load_pair(&graph, revgraph.as_deref(), Some(fvecs_count(&base)?))?;
            let (b, q) = load_vectors(&base, &query)?;
            let ratio = match radius.as_str() {
                "delta0" => None,
                "inf" => Some(f64::INFINITY),
                s => Some(s.parse::<f64>().map_err(|_| invalid!("bad radius {s:?}"))?),
            };
            let params = reach.params(b.count());
            let all_roots: Vec<u32> = (0..g.count() as u32).collect();
            let rows = par_queries(&q, |i, v| {
                let mut qd = QueryDistances::new(&b, v);
                let name = format!("{variant:?}").to_lowercase();
                if let Variant::Basic = variant {
                    let nn = crate::NeighborList::new(qd.prefix(reach.k).to_vec());
                    let r = match roots {
                        Roots::All => me_basic(&g, &nn, reach.k, reach.acc, &all_roots)?,
                        Roots::Knn => me_basic(&g, &nn, reach.k, reach.acc, &nn.top_ids(reach.k))?,
                    };
                    return Ok(MeRow {
                        query_id: i,
                        variant: name,
                        radius: f64::INFINITY,
                        me: r.value,
                        size: r.solution.nodes.len(),
                    });
                }
                let d0 = find_delta0_for_query(&g, &rev, &mut qd, &params)?;
                let dk = qd.prefix(reach.k)[reach.k - 1].dist as f64;
                let rad = match ratio {
                    None => d0.radius,
                    Some(r) => (1.0 + r) * dk,
                };
                let (me, size) = if !d0.found() || rad < d0.radius {
                    (f64::INFINITY, 0)
                } else {
                    let filter: CandidateFilter = filter_within(&mut qd, rad);
                    let r = match variant {
                        Variant::Constrained => me_constrained(&g, &d0.pairs, &filter)?,
                        _ => me_exhaustive(&g, &d0.pairs, &filter)?,
                    };
                    (r.value, r.solution.nodes.len())
                };
                Ok(MeRow {
                    query_id: i,
                    variant: name,
                    radius: rad,
                    me,
                    size,
                })
            })?;
            ctx.emit(&out, &rows)
        }
        Command::Hardness {
            mrng,
            revgraph,
            base,
            query,
            reach,
            measures,
            eps,
            out,
        } => {
            let flags = Measures::parse(&measures)?;
            let graphs = match (&mrng, flags.steiner) {
                (Some(p), _) => Some(load_pair(p, revgraph.as_deref(), Some(fvecs_count(&base)?))?),
                (None, true) => return Err(invalid!("--mrng is required for the steiner measure")),
                (None, false) => None,
            };
            let (b, q) = load_vectors(&base, &query)?;
            let params = HardnessParams {
                k: reach.k,
                acc: reach.acc,
                p: reach.p,
                efc: 0,
                eps,
                max_candidates: reach.max_candidates,
                counting: reach.params(b.count()).counting,
            };
            let records = compute_hardness(graphs.as_ref().map(|(g, r)| (g, r)), &b, &q, &flags, &params)?;
            ctx.emit(&out, &records)
        }
        Command::MeasureEffort {
            graph,
            base,
            query,
            gt,
            k,
            recall,
            repeats,
            entry,
            out,
        } => {
            let (g, _) = load_pair(&graph, None, Some(fvecs_count(&base)?))?;
            let (b, q) = load_vectors(&base, &query)?;
            let ids = read_ivecs(&gt)?;
            let gts = neighbor_lists_from_ids(&b, &q, &ids)?;
            let params = EffortParams {
                k,
                target_recall: recall,
                entry: parse_entry(&entry)?,
                repeats,
                seed: ctx.seed,
            };
            let rows: Vec<EffortCsvRow> = measure_effort(&g, &b, &q, &gts, &params)?
                .iter()
                .enumerate()
                .map(|(i, e)| EffortCsvRow {
                    query_id: i,
                    ndc: e.mean_ndc(),
                    ef: e.mean_ef(),
                    recall: e.mean_recall(),
                    phase1_ndc: e.mean_phase1_ndc(),
                })
                .collect();
            ctx.emit(&out, &rows)
        }
        Command::Correlate { hardness, effort, out } => {
            let records: Vec<HardnessRecord> = read_csv(&hardness)?;
            let rows: Vec<EffortCsvRow> = read_csv(&effort)?;
            let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for r in &rows {
                let e = sums.entry(r.query_id).or_insert((0.0, 0));
                e.0 += r.ndc;
                e.1 += 1;
            }
            let effort: BTreeMap<usize, f64> = sums.into_iter().map(|(q, (s, n))| (q, s / n as f64)).collect();
            let matched: Vec<(&HardnessRecord, f64)> = records
                .iter()
                .filter_map(|r| effort.get(&r.query_id).map(|&e| (r, e)))
                .collect();
            if matched.is_empty() {
                return Err(invalid!("no query ids in common between the two files"));
            }
            let y: Vec<f64> = matched.iter().map(|m| m.1).collect();
            let correlations = crate::hardness::MEASURE_NAMES
                .iter()
                .map(|&name| {
                    let x: Vec<f64> = matched.iter().map(|m| m.0.measure(name).unwrap()).collect();
                    match pearson(&x, &y) {
                        Ok(p) => CorrelationEntry {
                            measure: name.into(),
                            r: Some(p.r),
                            used: p.used,
                            dropped: p.dropped,
                            error: None,
                        },
                        Err(e) => CorrelationEntry {
                            measure: name.into(),
                            r: None,
                            used: 0,
                            dropped: x.len(),
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            let report = CorrelationReport {
                queries: matched.len(),
                infinite_steiner: matched.iter().filter(|m| m.0.steiner.is_infinite()).count(),
                correlations,
            };
            write_json(&out, &report)
        }
        Command::GenWorkload {
            base,
            mrng,
            revgraph,
            q,
            h,
            components,
            oversample,
            fit_sample,
            k,
            acc,
            p,
            trim_lo,
            trim_hi,
            out_queries,
            out_hardness,
        } => {
            let (g, rev) = load_pair(&mrng, revgraph.as_deref(), Some(fvecs_count(&base)?))?;
            let b = read_fvecs(&base)?;
            let mut hp = HardnessParams::desk();
            hp.k = k;
            hp.acc = acc;
            hp.p = p;
            let params = WorkloadParams {
                components,
                oversample,
                fit_sample: Some(fit_sample),
                trim: (trim_lo, trim_hi),
                ..WorkloadParams::new(q, h, ctx.seed)
            };
            let w = unbiased_workload(&b, &g, &rev, &hp, &params)?;
            for (s, d) in w.selection.deficits.iter().enumerate().filter(|(_, &d)| d > 0) {
                log::warn!("segment {s}: {d} queries short");
            }
            log::info!(
                "Mahalanobis p50: samples {:.3}, reference {:.3}",
                w.validity.samples.p50,
                w.validity.reference.p50
            );
            write_fvecs(&w.queries, &out_queries)?;
            #[derive(Serialize)]
            struct Row {
                query_id: usize,
                candidate: usize,
                segment: usize,
                steiner: f64,
            }
            let rows: Vec<Row> = w
                .selection
                .indices
                .iter()
                .zip(&w.hardness)
                .enumerate()
                .map(|(i, (&c, &s))| Row {
                    query_id: i,
                    candidate: c,
                    segment: w.selection.segment_of(s),
                    steiner: s,
                })
                .collect();
            ctx.emit(&out_hardness, &rows)
        }
        Command::Benchmark { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run_correlation_experiment(&cfg, &out_dir, &ctx.comment)?;
            for row in &outcome.correlations {
                println!("{}\t{}\t{}\t{:.4}", row.index, row.target, row.measure, row.r);
            }
            Ok(())
        }
    }
}

fn par_queries<T, F>(q: &VectorSet, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f32]) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    (0..q.count()).into_par_iter().map(|i| f(i, q.get(i))).collect()
}
