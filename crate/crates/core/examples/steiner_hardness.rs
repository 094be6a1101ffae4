//! Steiner-hardness and the distance-based baselines for the sample queries,
//! plus a sweep over the entry-point fraction `p` for one query.

use gah::dataset::read_fvecs;
use gah::graphs::{build_mrng_approx, reverse_graph};
use gah::hardness::{compute_hardness, sweep_p, HardnessParams, Measures};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    let mut params = HardnessParams::desk();
    params.efc = 64;
    let mrng = build_mrng_approx(&base, params.efc)?;
    let rev = reverse_graph(&mrng);

    let records = compute_hardness(Some((&mrng, &rev)), &base, &queries, &Measures::all(), &params)?;
    println!("query  steiner  delta0    lid     rc     qe  eps");
    for r in records.iter().take(10) {
        println!(
            "{:>5}  {:>7}  {:>6.3}  {:>5.2}  {:>5.2}  {:>5.2}  {:>3}",
            r.query_id, r.steiner, r.delta0, r.lid, r.rc, r.qe, r.epsilon_hardness
        );
    }

    let ps = [0.85, 0.9, 0.95, 1.0];
    for (p, s) in sweep_p(&mrng, &rev, &base, queries.get(0), &params, &ps)? {
        println!("query 0, p = {p:.2}: Steiner-hardness {s}");
    }
    Ok(())
}
