//! Builds the three graph families on the sample base and compares them.

use gah::dataset::read_fvecs;
use gah::graphs::{
    build_hnsw_base, build_kgraph, build_mrng_approx, edge_cosine, edge_overlap, load_graph, save_graph, HnswParams,
};

fn main() -> gah::Result<()> {
    let base = read_fvecs(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_base.fvecs"))?;
    let efc = 64;
    let kgraph = build_kgraph(&base, efc)?;
    let mrng = build_mrng_approx(&base, efc)?;
    let hnsw = build_hnsw_base(&base, &HnswParams::default())?;

    for (name, g) in [("kgraph", &kgraph), ("mrng", &mrng), ("hnsw", &hnsw)] {
        let s = g.stats();
        println!(
            "{name:<7} edges {:>6}  mean degree {:>5.2}  max {:>3}  strongly connected {}",
            s.edge_count,
            s.avg_out_degree,
            s.max_out_degree,
            g.is_strongly_connected()
        );
    }
    println!("MRNG edges inside KGraph(efC): {:.3}", edge_overlap(&mrng, &kgraph)?);
    println!("HNSW edges inside KGraph(efC): {:.3}", edge_overlap(&hnsw, &kgraph)?);

    // Any two out-edges of an MRNG vertex are at least 60 degrees apart.
    let v = 0;
    let nb = mrng.neighbors(v);
    let worst = nb
        .iter()
        .flat_map(|&a| nb.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
        .filter_map(|(a, b)| edge_cosine(base.get(v as usize), base.get(a as usize), base.get(b as usize)))
        .fold(f64::NEG_INFINITY, f64::max);
    println!("vertex 0: {} neighbors, largest pairwise cosine {worst:.3}", nb.len());

    let path = std::env::temp_dir().join("sample_mrng.bin");
    save_graph(&mrng, &path)?;
    assert_eq!(load_graph(&path)?, mrng);
    println!("wrote {}", path.display());
    Ok(())
}
