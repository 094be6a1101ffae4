//! Greedy beam search on a single-layer HNSW graph: recall at a fixed `ef`,
//! the smallest NDC reaching a recall target, and the two search phases.

use gah::dataset::{brute_force_knn, read_fvecs};
use gah::graphs::{build_hnsw_base, HnswParams};
use gah::search::{greedy_search, measure_effort, phase_breakdown, recall, EffortParams, EntryPolicy};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    let k = 10;
    let gt = brute_force_knn(&base, &queries, k)?;
    let g = build_hnsw_base(&base, &HnswParams::default())?;

    let res = greedy_search(&g, &base, queries.get(0), 0, 32, k, Some(&gt[0]))?;
    let ids: Vec<u32> = res.answers.ids().collect();
    println!(
        "query 0, ef = 32: recall {:.2}, NDC {}, first top-k hit after {:?}",
        recall(&ids, &gt[0], k)?,
        res.ndc,
        res.phase1_ndc
    );

    let params = EffortParams {
        k,
        target_recall: 0.9,
        entry: EntryPolicy::Random,
        repeats: 3,
        seed: 7,
    };
    let effort = measure_effort(&g, &base, &queries, &gt, &params)?;
    let mut ndc: Vec<f64> = effort.iter().map(|e| e.mean_ndc()).collect();
    ndc.sort_by(f64::total_cmp);
    println!(
        "NDC to recall 0.9 over {} queries: min {:.0}, median {:.0}, max {:.0}",
        ndc.len(),
        ndc[0],
        ndc[ndc.len() / 2],
        ndc[ndc.len() - 1]
    );

    let phases = phase_breakdown(&g, &base, &queries, &gt, 64, k, EntryPolicy::Fixed(0), 7)?;
    let p1: usize = phases.iter().map(|p| p.phase1_ndc).sum();
    let total: usize = phases.iter().map(|p| p.total()).sum();
    println!(
        "ef = 64: {:.1}% of distance computations precede the first top-k hit",
        100.0 * p1 as f64 / total as f64
    );
    Ok(())
}
