//! Run a benchmark described in TOML and print the metrics table.
//!
//! cargo run --release --example bench_config -- [config.toml]

use sitepack::config::{load_config, RunConfig};
use sitepack::floorplan::{run_benchmark, write_metrics_csv};

const INLINE: &str = r#"
[[templates]]
id = 0
width = 92
height = 92

[[templates]]
id = 1
width = 185
height = 185

[[instances]]
id = "small"
sites = 5
seed = 1

[[instances]]
id = "mixed"
sites = 8
diversity = 2
seed = 1

[budget]
placement_attempts = 3
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => load_config(p.as_ref())?,
        None => RunConfig::from_toml(INLINE)?,
    };
    let (rows, summary) = run_benchmark(&cfg.benchmark_instances(), &cfg.grid_config(), &cfg.floorplan_budget(), &cfg.anneal_params(0));
    write_metrics_csv(std::io::stdout().lock(), &rows, false)?;
    println!("mean util {:?} mean track {:?}", summary.util_mean, summary.track_mean);
    Ok(())
}
