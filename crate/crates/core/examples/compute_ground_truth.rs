//! Exact nearest neighbors of the bundled sample queries, written as `ivecs`/`fvecs`.

use gah::dataset::{brute_force_knn, ground_truth_tables, read_fvecs, read_ivecs, write_fvecs, write_ivecs};

fn main() -> gah::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let base = read_fvecs(format!("{data}/sample_base.fvecs"))?;
    let queries = read_fvecs(format!("{data}/sample_query.fvecs"))?;
    println!("base {} x {}, {} queries", base.count(), base.dim(), queries.count());

    let gt = brute_force_knn(&base, &queries, 10)?;
    let first = &gt[0];
    println!(
        "query 0: nearest {:?}, d_1 = {:.4}, d_10 = {:.4}",
        first.top_ids(3),
        first.dist(1),
        first.dist(10)
    );

    let out = std::env::temp_dir();
    let (ids, dists) = ground_truth_tables(&gt);
    write_ivecs(&ids, out.join("sample_gt.ivecs"))?;
    write_fvecs(&dists, out.join("sample_gt_dists.fvecs"))?;
    assert_eq!(read_ivecs(out.join("sample_gt.ivecs"))?, ids);
    println!("wrote {}", out.join("sample_gt.ivecs").display());
    Ok(())
}
