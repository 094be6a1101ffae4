//! Desk-scale correlation experiment: 20k Gaussian vectors, 200 queries, three
//! shuffled single-layer HNSW instances.
//!
//! ```text
//! cargo run --release --example desk_experiment -- [out-dir] [config.toml]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use gah::experiment::{run_correlation_experiment, ExperimentConfig};

fn main() -> gah::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gah-desk"));
    let cfg = match std::env::args().nth(2) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let start = Instant::now();
    let outcome = run_correlation_experiment(&cfg, &out, "gah desk_experiment")?;
    println!("{:<10} {:>8} {:>6}", "measure", "r", "used");
    for row in &outcome.correlations {
        println!("{:<10} {:>8.3} {:>6}", row.measure, row.r, row.used);
    }
    let d = &outcome.distributions[0];
    println!(
        "NDC to recall {}: min {} p50 {} p99 {} max {}",
        d.target, d.min, d.p50, d.p99, d.max
    );
    println!("{:.1} s, tables in {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}
