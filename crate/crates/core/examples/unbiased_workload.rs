//! Generates a hardness-unbiased workload from the sample base and compares
//! its hardness spread with the original queries.

use gah::dataset::read_fvecs;
use gah::experiment::lowest_band_fraction;
use gah::graphs::{build_mrng_approx, reverse_graph};
use gah::hardness::{compute_hardness, HardnessParams, Measures};
use gah::workload::{unbiased_workload, WorkloadParams};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    let mut hp = HardnessParams::desk();
    hp.efc = 64;
    let mrng = build_mrng_approx(&base, hp.efc)?;
    let rev = reverse_graph(&mrng);

    let mut params = WorkloadParams::new(40, 4, 3);
    params.components = 6;
    let w = unbiased_workload(&base, &mrng, &rev, &hp, &params)?;
    println!(
        "{} queries, per segment {:?}, deficits {:?}",
        w.queries.count(),
        w.selection.selected,
        w.selection.deficits
    );
    println!(
        "Mahalanobis p50: generated {:.3}, base {:.3}",
        w.validity.samples.p50, w.validity.reference.p50
    );

    let original = compute_hardness(Some((&mrng, &rev)), &base, &queries, &Measures::parse("steiner")?, &hp)?;
    let orig: Vec<f64> = original.iter().map(|r| r.steiner).collect();
    println!(
        "share of queries in the easiest 20% of the hardness range: original {:.2}, generated {:.2}",
        lowest_band_fraction(&orig, 0.2),
        lowest_band_fraction(&w.hardness, 0.2)
    );
    Ok(())
}
