//! Build one layout that shows every abutment scenario of a small library.
//!
//! cargo run --release --example drc_cover -- [templates]

use sitepack::drc::{enumerate_scenarios, greedy_cover, small_library, verify_coverage, CoverParams};

fn main() -> sitepack::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let lib = small_library(n);
    for t in lib.iter() {
        println!("template {}: {}x{}", t.id, t.width, t.height);
    }
    let scenarios = enumerate_scenarios(&lib);
    let layout = greedy_cover(&scenarios, &lib, &CoverParams::default())?;
    let report = verify_coverage(&layout, &scenarios);
    println!(
        "{} scenarios, {} components, area {}, coverage {:.1}%, mean occurrence {:.2}",
        scenarios.len(),
        layout.components.len(),
        layout.area(),
        report.coverage_pct,
        report.avg_occurrence.unwrap_or(0.0)
    );
    for s in &report.missing {
        println!("missing {s:?}");
    }
    Ok(())
}
