//! Place a controller and four sites in a row, then daisy-chain them.
//!
//! cargo run --example route_layout

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sitepack::routing::route_all;
use sitepack::svg::{render_svg, SvgOptions};
use sitepack::{compute_metrics, Cell, GridConfig, Layout, PlacedBlock, Template};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridConfig::default();
    let t = Template::with_north_port(0, 92, 92)?;
    let mut layout = Layout::new(grid.clone());
    layout.controller = Some(PlacedBlock::controller(&grid.controller, Cell::new(0, 0)));
    for (k, (x, y)) in [(100, 0), (200, 0), (300, 0), (400, 0)].into_iter().enumerate() {
        layout.sites.push(PlacedBlock::site(k as u32, &t, Cell::new(x, y)));
    }

    let routing = route_all(&layout, 3, &mut ChaCha8Rng::seed_from_u64(0)).expect("routable");
    println!("routed on attempt {} with {:?}", routing.attempt, routing.strategy);
    for p in &routing.paths {
        println!("  {:?} -> {:?}: {} steps", p.endpoints.0.owner, p.endpoints.1.owner, p.steps());
    }
    layout.routes = routing.paths;
    let m = compute_metrics(&layout, 0.0)?;
    println!("track {} bbox {} util {:.2}%", m.track_area, m.bbox_area, m.util_pct);

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, render_svg(&layout, &SvgOptions::default()))?;
        println!("wrote {path}");
    }
    Ok(())
}
