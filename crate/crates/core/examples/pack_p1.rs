//! Floorplan the five-site, single-template instance and print its metrics.
//!
//! cargo run --release --example pack_p1 -- [seed]

use sitepack::floorplan::{floorplan, BenchmarkInstance, FloorplanBudget};
use sitepack::placement::{pack_items, AnnealParams, CostParams};
use sitepack::{GridConfig, TemplateLibrary};

fn main() -> sitepack::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let inst = BenchmarkInstance {
        id: "P1".into(),
        site_count: 5,
        template_diversity: 1,
        library: TemplateLibrary::reference(),
        seed,
    };
    let grid = GridConfig::default();
    let sites = inst.sites();
    let cp = CostParams::defaults_for(&pack_items(&sites, &inst.library, &grid)?, &grid);
    let ap = AnnealParams { seed, ..AnnealParams::default() };
    let r = floorplan(&sites, &inst.library, &grid, &FloorplanBudget::default(), &ap, &cp)?;

    let m = &r.metrics;
    println!("sites {} bbox {} track {} util {:.2}% track {:.2}%", sites.len(), m.bbox_area, m.track_area, m.util_pct, m.track_pct);
    for a in &r.attempts {
        println!("attempt {} area {:?} routed {:?}", a.attempt, a.area, a.routed);
    }
    Ok(())
}
