//! Utilization and track share from raw areas.
//!
//! cargo run --example table_metrics

use sitepack::Metrics;

fn main() -> sitepack::Result<()> {
    // id, chip-site area, track area, bounding-box area
    let rows = [
        ("P1", 50784.0, 470.0, 51985.0),
        ("P5", 1922365.0, 1880.0, 2118591.0),
        ("P14", 1032580.0, 7262.0, 1168429.5),
        ("P24", 2840268.0, 25092.0, 3770833.5),
    ];
    println!("{:>4} {:>12} {:>8} {:>8}", "id", "chip+track", "util%", "track%");
    for (id, chip, track, bbox) in rows {
        let m = Metrics::from_areas(chip, track, bbox, 0.0)?;
        println!("{id:>4} {:>12} {:>8.2} {:>8.2}", m.chip_plus_track_area, m.util_pct, m.track_pct);
    }
    Ok(())
}
