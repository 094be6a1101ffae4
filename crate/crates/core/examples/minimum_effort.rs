//! The three minimum-effort variants for a few sample queries.

use gah::dataset::{read_fvecs, NeighborList, QueryDistances};
use gah::graphs::{build_mrng_approx, reverse_graph};
use gah::hardness::filter_within;
use gah::reach::{find_delta0_for_query, Delta0Params};
use gah::steiner::{me_basic, me_constrained, me_exhaustive};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    let g = build_mrng_approx(&base, 64)?;
    let rev = reverse_graph(&g);
    let (k, acc) = (10, 0.9);
    let params = Delta0Params::new(k, acc, 0.95, base.count());
    let roots: Vec<u32> = (0..base.count() as u32).collect();

    println!("query  basic  constrained  exhaustive");
    for qi in 0..8 {
        let mut qd = QueryDistances::new(&base, queries.get(qi));
        let nn = NeighborList::new(qd.prefix(k).to_vec());
        let basic = me_basic(&g, &nn, k, acc, &roots)?;
        let d0 = find_delta0_for_query(&g, &rev, &mut qd, &params)?;
        let filter = filter_within(&mut qd, d0.radius);
        let constrained = me_constrained(&g, &d0.pairs, &filter)?;
        let exhaustive = me_exhaustive(&g, &d0.pairs, &filter)?;
        println!(
            "{qi:>5}  {:>5}  {:>11}  {:>10}",
            basic.value, constrained.value, exhaustive.value
        );
    }
    Ok(())
}
