//! Critical radius of one query on the approximate MRNG, checked against the
//! naive BFS recomputation.

use gah::dataset::{knn_scan, read_fvecs};
use gah::graphs::{build_mrng_approx, reverse_graph};
use gah::reach::{find_delta0, find_delta0_naive, Delta0Params};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    let g = build_mrng_approx(&base, 64)?;
    let rev = reverse_graph(&g);
    let params = Delta0Params::new(10, 0.9, 0.95, base.count());

    for qi in 0..5 {
        let nn = knn_scan(&base, queries.get(qi), base.count(), None);
        let fast = find_delta0(&g, &rev, &nn, &params)?;
        let naive = find_delta0_naive(&g, &rev, &nn, &params)?;
        assert_eq!(fast.radius, naive.radius);
        println!(
            "query {qi}: radius {:.4} (delta0 {:.3}) after {} insertions, {} qualified starts in {} groups",
            fast.radius,
            fast.delta0,
            fast.iterations,
            fast.pairs.qualified_starts().len(),
            fast.pairs.groups.len()
        );
    }
    Ok(())
}
