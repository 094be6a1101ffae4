//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::io::Write;
use std::time::Instant;

use common::Instance;
use gah::dataset::{
    brute_force_knn, distance, read_fvecs, read_ivecs, write_fvecs, write_ivecs, QueryDistances, VectorSet,
};
use gah::experiment::{run_correlation_experiment_with, ExperimentConfig};
use gah::graphs::{
    edge_cosine, edge_overlap, kgraph_from_lists, load_graph, mrng_from_lists, reverse_graph, save_graph,
    self_knn_lists, DirectedGraph, ANGLE_COS_SLACK,
};
use gah::hardness::{
    lid_estimate, me_constrained_acc_sweep, me_constrained_radius_sweep, pearson, query_expansion, relative_contrast,
    HardnessParams,
};
use gah::reach::{find_delta0, find_delta0_naive, Delta0Params};
use gah::search::{greedy_search, recall};
use gah::steiner::{
    dst_exact_bruteforce, dst_shortest_path, me_chain, vdsn_exact_bruteforce, vdsn_heuristic, CandidateFilter,
};
use gah::workload::{unbiased_workload, WorkloadParams};
use gah::{Neighbor, NeighborList};
use rand::seq::index::sample;
use rand::Rng;

type Outcome = Result<String, String>;

struct Desk {
    base: VectorSet,
    queries: VectorSet,
    cfg: ExperimentConfig,
    mrng: DirectedGraph,
    rev: DirectedGraph,
    kgraph_efc: DirectedGraph,
    kgraph: DirectedGraph,
}

impl Desk {
    fn build() -> Self {
        let cfg = ExperimentConfig::default();
        let (base, queries) = cfg.load_data().unwrap();
        let lists = self_knn_lists(&base, cfg.efc).unwrap();
        let mrng = mrng_from_lists(&base, &lists).unwrap();
        let rev = reverse_graph(&mrng);
        let kgraph_efc = kgraph_from_lists(&lists, cfg.efc);
        let kgraph = kgraph_from_lists(&lists, cfg.kgraph_k);
        Self {
            base,
            queries,
            cfg,
            mrng,
            rev,
            kgraph_efc,
            kgraph,
        }
    }
}

fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// One suite instance: density drawn so the mean out-degree is between 1.5 and 4.
fn suite_instance(n: usize, seed: u64) -> Instance {
    let mut r = common::rng(seed ^ 0x5eed);
    let degree = r.random_range(1.5..4.0);
    Instance::random(n, degree / n as f64, seed)
}

fn delta0_equivalence() -> Outcome {
    let start = Instant::now();
    let mut found = 0;
    for i in 0..200u64 {
        let mut r = common::rng(1_000 + i);
        let n = r.random_range(20..=60);
        let inst = suite_instance(n, 1_000 + i);
        let k = [3, 5][(i % 2) as usize];
        let acc = [0.6, 1.0][(i / 2 % 2) as usize];
        let p = [0.4, 1.0][(i / 4 % 2) as usize];
        let params = Delta0Params::new(k, acc, p, n);
        let fast = find_delta0(&inst.g, &inst.rev, &inst.nn, &params).map_err(|e| e.to_string())?;
        let naive = find_delta0_naive(&inst.g, &inst.rev, &inst.nn, &params).map_err(|e| e.to_string())?;
        check(fast.radius == naive.radius, || {
            format!("instance {i}: radius {} vs naive {}", fast.radius, naive.radius)
        })?;
        check(fast.pairs.qualified_starts() == naive.pairs.qualified_starts(), || {
            format!("instance {i}: qualified starts differ")
        })?;
        found += fast.found() as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "200 instances identical, {found} with a finite radius, {secs:.2} s"
    ))
}

struct Small {
    inst: Instance,
    k: usize,
    acc: f64,
    d0: gah::reach::Delta0Result,
    filter: CandidateFilter,
}

fn small_suite() -> Vec<Small> {
    (0..100u64)
        .map(|i| {
            let mut r = common::rng(2_000 + i);
            let n = r.random_range(6..=14);
            let inst = suite_instance(n, 2_000 + i);
            let k = 3;
            let acc = [0.6, 1.0][(i % 2) as usize];
            let d0 = find_delta0(&inst.g, &inst.rev, &inst.nn, &Delta0Params::new(k, acc, 0.6, n)).unwrap();
            let filter = CandidateFilter::from_neighbors(n, inst.nn.as_slice(), d0.radius);
            Small {
                inst,
                k,
                acc,
                d0,
                filter,
            }
        })
        .collect()
}

fn solver_soundness(suite: &[Small]) -> Outcome {
    let start = Instant::now();
    let mut ratios = Vec::new();
    let mut feasible = 0;
    for (i, s) in suite.iter().enumerate() {
        let g = &s.inst.g;
        let pairs: Vec<(u32, u32)> = if s.d0.found() {
            s.d0.pairs.representative_pairs()
        } else {
            let top = s.inst.nn.top_ids(s.k);
            top.iter().map(|&t| (top[0], t)).collect()
        };
        let mut roots: Vec<u32> = pairs.iter().map(|p| p.0).collect();
        roots.dedup();
        for &root in &roots {
            let terms: Vec<u32> = pairs.iter().filter(|p| p.0 == root).map(|p| p.1).collect();
            let h = dst_shortest_path(g, root, &terms, &s.filter, None).map_err(|e| e.to_string())?;
            let x = dst_exact_bruteforce(g, root, &terms, &s.filter, None).map_err(|e| e.to_string())?;
            check(!x.is_feasible() || h.is_feasible(), || {
                format!("instance {i}: DST heuristic infeasible")
            })?;
            check(h.me() >= x.me(), || {
                format!("instance {i}: DST heuristic {} < exact {}", h.me(), x.me())
            })?;
        }
        let h = vdsn_heuristic(g, &pairs, &s.filter, None).map_err(|e| e.to_string())?;
        let x = vdsn_exact_bruteforce(g, &pairs, &s.filter, None).map_err(|e| e.to_string())?;
        check(!x.is_feasible() || h.is_feasible(), || {
            format!("instance {i}: pair heuristic infeasible")
        })?;
        check(h.me() >= x.me(), || {
            format!("instance {i}: pair heuristic {} < exact {}", h.me(), x.me())
        })?;
        if x.is_feasible() {
            feasible += 1;
            ratios.push(h.me() / x.me());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let worst = ratios.iter().copied().fold(1.0, f64::max);
    Ok(format!(
        "100 instances, {feasible} feasible, heuristic/exact mean {mean:.3} max {worst:.3}, {secs:.2} s"
    ))
}

/// The subgraph of `g` induced by the `m` base vectors nearest to `q`, relabelled by rank.
fn local_instance(g: &DirectedGraph, base: &VectorSet, q: &[f32], m: usize) -> (DirectedGraph, NeighborList) {
    let mut qd = QueryDistances::new(base, q);
    let near: Vec<Neighbor> = qd.prefix(m).to_vec();
    let mut local = vec![u32::MAX; g.count()];
    for (i, n) in near.iter().enumerate() {
        local[n.id as usize] = i as u32;
    }
    let adj = near
        .iter()
        .map(|n| {
            g.neighbors(n.id)
                .iter()
                .map(|&w| local[w as usize])
                .filter(|&w| w != u32::MAX)
                .collect()
        })
        .collect();
    let nn = NeighborList::new(
        near.iter()
            .enumerate()
            .map(|(i, n)| Neighbor::new(i as u32, n.dist))
            .collect(),
    );
    (DirectedGraph::from_adjacency(adj).unwrap(), nn)
}

fn chain_holds(
    g: &DirectedGraph,
    nn: &NeighborList,
    (k, acc): (usize, f64),
    d0: &gah::reach::Delta0Result,
    filter: &CandidateFilter,
    tag: String,
) -> Result<(), String> {
    let roots: Vec<u32> = (0..g.count() as u32).collect();
    let c = me_chain(g, nn, k, acc, &roots, &d0.pairs, filter).map_err(|e| e.to_string())?;
    check(
        c.basic.value <= c.constrained.value && c.constrained.value <= c.exhaustive.value,
        || {
            format!(
                "{tag}: basic {} constrained {} exhaustive {}",
                c.basic.value, c.constrained.value, c.exhaustive.value
            )
        },
    )
}

fn ordering_chain(suite: &[Small], desk: &Desk) -> Outcome {
    let mut checked = 0;
    for (i, s) in suite.iter().enumerate().filter(|(_, s)| s.d0.found()) {
        chain_holds(
            &s.inst.g,
            &s.inst.nn,
            (s.k, s.acc),
            &s.d0,
            &s.filter,
            format!("small instance {i}"),
        )?;
        checked += 1;
    }
    let small = checked;
    let hp = HardnessParams::desk();
    let mut skipped = 0;
    for qi in 0..desk.queries.count() {
        if checked - small == 50 {
            break;
        }
        let (g, nn) = local_instance(&desk.mrng, &desk.base, desk.queries.get(qi), 300);
        let rev = reverse_graph(&g);
        let d0 =
            find_delta0(&g, &rev, &nn, &Delta0Params::new(hp.k, hp.acc, hp.p, g.count())).map_err(|e| e.to_string())?;
        if !d0.found() {
            skipped += 1;
            continue;
        }
        let filter = CandidateFilter::from_neighbors(g.count(), nn.as_slice(), d0.radius);
        chain_holds(&g, &nn, (hp.k, hp.acc), &d0, &filter, format!("desk query {qi}"))?;
        checked += 1;
    }
    check(checked - small == 50, || {
        format!("only {} desk subgraph instances", checked - small)
    })?;
    Ok(format!(
        "{small} small + 50 desk-subgraph instances, 0 violations ({skipped} desk queries without a radius skipped)"
    ))
}

fn monotonicity(desk: &Desk) -> Outcome {
    let hp = HardnessParams::desk();
    let mut finite = 0;
    for qi in 0..50 {
        let mut qd = QueryDistances::new(&desk.base, desk.queries.get(qi));
        let by_radius = me_constrained_radius_sweep(&desk.mrng, &desk.rev, &mut qd, &hp, &[1.0, 1.5, f64::INFINITY])
            .map_err(|e| e.to_string())?;
        check(by_radius.windows(2).all(|w| w[1] <= w[0]), || {
            format!("query {qi}: radius sweep {by_radius:?}")
        })?;
        let by_acc = me_constrained_acc_sweep(&desk.mrng, &desk.rev, &mut qd, &hp, &[0.5, 0.8, 1.0])
            .map_err(|e| e.to_string())?;
        check(by_acc.windows(2).all(|w| w[0] <= w[1]), || {
            format!("query {qi}: Acc sweep {by_acc:?}")
        })?;
        finite += by_radius.iter().chain(&by_acc).all(|v| v.is_finite()) as usize;
    }
    Ok(format!(
        "50 queries, 0 violations, {finite} with all sweep values finite"
    ))
}

fn correlation(desk: &Desk) -> Outcome {
    let out = run_correlation_experiment_with(&desk.cfg, &desk.base, &desk.queries, Some((&desk.mrng, &desk.rev)))
        .map_err(|e| e.to_string())?;
    let target = desk.cfg.recall_targets[0];
    let r = |m: &str| out.correlation(m, target).unwrap_or(f64::NAN);
    let (s, lid, qe, rc) = (r("steiner"), r("lid"), r("qe"), r("rc"));
    let line = format!("r(steiner) {s:.3}, r(lid) {lid:.3}, r(qe) {qe:.3}, r(rc) {rc:.3}");
    check(s >= 0.5 && s > lid && s > qe && s > rc, || line.clone())?;
    Ok(line)
}

fn workload_uniformness(desk: &Desk) -> Outcome {
    let params = WorkloadParams::new(200, 20, 7);
    let w = unbiased_workload(&desk.base, &desk.mrng, &desk.rev, &HardnessParams::desk(), &params)
        .map_err(|e| e.to_string())?;
    let sel = &w.selection;
    let mut counts = vec![0usize; params.h];
    for &h in &w.hardness {
        counts[sel.segment_of(h)] += 1;
    }
    for (s, &c) in counts.iter().enumerate() {
        if sel.deficits[s] == 0 {
            check(c == 10, || format!("segment {s} holds {c}"))?;
        }
    }
    let deficits: usize = sel.deficits.iter().sum();
    if deficits > 0 {
        return Ok(format!(
            "{} queries, {deficits} missing picks, band check not applicable",
            w.hardness.len()
        ));
    }
    let band = (params.h as f64 * 0.2).round() as usize;
    let low = counts[..band].iter().sum::<usize>() as f64 / w.hardness.len() as f64;
    check((low - 0.2).abs() <= 0.02, || {
        format!("lowest-20% band fraction {low:.3}")
    })?;
    Ok(format!(
        "{} queries, every segment 10, lowest-20% band fraction {low:.3}",
        w.hardness.len()
    ))
}

fn search_exactness(desk: &Desk) -> Outcome {
    let connected = desk.kgraph.is_strongly_connected();
    let rev = reverse_graph(&desk.kgraph);
    let sources = (0..desk.kgraph.count() as u32)
        .filter(|&v| rev.neighbors(v).is_empty())
        .count();
    let reached = desk.kgraph.reachable_from(0).iter().filter(|&&b| b).count();
    let k = desk.cfg.k;
    let gt = brute_force_knn(&desk.base, &desk.queries, k).map_err(|e| e.to_string())?;
    let n = desk.base.count();
    let mut exact = 0;
    for (qi, truth) in gt.iter().enumerate() {
        let res =
            greedy_search(&desk.kgraph, &desk.base, desk.queries.get(qi), 0, n, k, None).map_err(|e| e.to_string())?;
        let ids: Vec<u32> = res.answers.ids().collect();
        exact += (recall(&ids, truth, k).map_err(|e| e.to_string())? == 1.0) as usize;
    }
    let line = format!(
        "KGraph(K={}) strongly connected: {connected} ({sources} vertices without in-edges, {reached}/{n} reachable from the entry); recall 1.0 on {exact}/{} queries",
        desk.cfg.kgraph_k,
        gt.len()
    );
    check(connected && exact == gt.len(), || line.clone())?;
    Ok(line)
}

fn formulas() -> Outcome {
    let lid = lid_estimate(&NeighborList::from_pairs(&[(0, 1.0), (1, 2.0), (2, 4.0)]), 3)
        .map_err(|e| e.to_string())?
        .unwrap_or(f64::NAN);
    check((lid - 3.0 / 8f64.ln()).abs() <= 1e-9, || format!("LID {lid}"))?;
    let pr = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])
        .map_err(|e| e.to_string())?
        .r;
    check((pr - 0.5).abs() <= 1e-12, || format!("pearson {pr}"))?;
    let mut r = common::rng(8);
    let base = common::random_points(1000, 8, &mut r);
    let queries = common::random_points(20, 8, &mut r);
    let k = 10;
    for qi in 0..queries.count() {
        let q = queries.get(qi);
        let mut scan: Vec<(f32, u32)> = base
            .rows()
            .enumerate()
            .map(|(i, v)| (distance(q, v).unwrap(), i as u32))
            .collect();
        let mean = scan.iter().map(|x| x.0 as f64).sum::<f64>() / scan.len() as f64;
        scan.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let qd = QueryDistances::new(&base, q);
        let nn = gah::dataset::knn_scan(&base, q, 2 * k, None);
        let rc = relative_contrast(&qd, &nn, k).map_err(|e| e.to_string())?;
        let qe = query_expansion(&nn, k).map_err(|e| e.to_string())?;
        let dk = scan[k - 1].0 as f64;
        check(rc == Some(mean / dk), || {
            format!("query {qi}: rc {rc:?} vs {}", mean / dk)
        })?;
        check(qe == Some(scan[2 * k - 1].0 as f64 / dk), || {
            format!("query {qi}: qe {qe:?}")
        })?;
    }
    Ok(format!(
        "LID {lid:.12}, pearson {pr}, rc and qe exact on 20 queries over 1000 points"
    ))
}

fn mrng_invariant(desk: &Desk) -> Outcome {
    let mut r = common::rng(9);
    let mut worst = f64::NEG_INFINITY;
    for v in sample(&mut r, desk.base.count(), 1000).into_iter().map(|v| v as u32) {
        let nb = desk.mrng.neighbors(v);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if let Some(c) = edge_cosine(
                    desk.base.get(v as usize),
                    desk.base.get(a as usize),
                    desk.base.get(b as usize),
                ) {
                    worst = worst.max(c);
                    check(c <= 0.5 + ANGLE_COS_SLACK, || {
                        format!("vertex {v}: cos {c} between {a} and {b}")
                    })?;
                }
            }
        }
    }
    let overlap = edge_overlap(&desk.mrng, &desk.kgraph_efc).map_err(|e| e.to_string())?;
    check(overlap == 1.0, || format!("overlap {overlap}"))?;
    Ok(format!(
        "largest cosine {worst:.6} over 1000 vertices, overlap with KGraph(efC) {overlap}"
    ))
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = common::rng(10);
    for case in 0..20 {
        let dim = r.random_range(1..40);
        let n = r.random_range(0..60);
        let data: Vec<f32> = (0..n * dim)
            .map(|_| loop {
                let x = f32::from_bits(r.random());
                if x.is_finite() {
                    break x;
                }
            })
            .collect();
        let vs = VectorSet::new(dim, data).unwrap();
        let p = dir.path().join("v.fvecs");
        write_fvecs(&vs, &p).map_err(|e| e.to_string())?;
        let back = read_fvecs(&p).map_err(|e| e.to_string())?;
        let bits = |v: &VectorSet| v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        check(back.count() == n && bits(&back) == bits(&vs), || {
            format!("fvecs case {case}")
        })?;

        let rows: Vec<Vec<i32>> = (0..n).map(|_| (0..dim).map(|_| r.random()).collect()).collect();
        let p = dir.path().join("v.ivecs");
        write_ivecs(&rows, &p).map_err(|e| e.to_string())?;
        check(read_ivecs(&p).map_err(|e| e.to_string())? == rows, || {
            format!("ivecs case {case}")
        })?;

        let g = common::random_digraph(n, 0.1, &mut r);
        let p = dir.path().join("g.bin");
        save_graph(&g, &p).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
        let back = load_graph(&p).map_err(|e| e.to_string())?;
        save_graph(&back, &p).map_err(|e| e.to_string())?;
        check(
            back == g && std::fs::read(&p).map_err(|e| e.to_string())? == bytes,
            || format!("graph case {case}"),
        )?;
    }
    Ok("20 randomized fixtures per format, bit-exact".into())
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => report(&format!("PASS {id:>2} {name}: {msg} [{secs:.1} s]")),
            Err(msg) => {
                failed += 1;
                report(&format!("FAIL {id:>2} {name}: {msg} [{secs:.1} s]"));
            }
        }
    };
    run(1, "delta0 oracle equivalence", &mut delta0_equivalence);
    let suite = small_suite();
    run(2, "Steiner solver soundness", &mut || solver_soundness(&suite));
    run(8, "formula checks", &mut formulas);
    run(10, "file round trips", &mut round_trips);
    let start = Instant::now();
    let desk = Desk::build();
    report(&format!(
        "     desk graphs built [{:.1} s]",
        start.elapsed().as_secs_f64()
    ));
    run(3, "ME ordering chain", &mut || ordering_chain(&suite, &desk));
    run(4, "ME monotonicity", &mut || monotonicity(&desk));
    run(5, "desk correlation", &mut || correlation(&desk));
    run(6, "workload uniformness", &mut || workload_uniformness(&desk));
    run(7, "greedy search exactness", &mut || search_exactness(&desk));
    run(9, "MRNG construction invariant", &mut || mrng_invariant(&desk));
    if failed > 0 {
        report(&format!("{failed} criteria failed"));
        std::process::exit(1);
    }
}
