//! Drop a few blocks into a fixed-width strip and watch the skyline rise.
//!
//! cargo run --example skyline_strip

use sitepack::placement::{pack_items, SkylinePacker};
use sitepack::{GridConfig, SiteInstance, Template, TemplateLibrary};

fn main() -> sitepack::Result<()> {
    let lib = TemplateLibrary::new(vec![Template::with_north_port(0, 30, 20)?, Template::with_north_port(1, 12, 40)?])?;
    let grid = GridConfig::default();
    let sites: Vec<SiteInstance> = (0..6).map(|k| SiteInstance::new(k, k % 2)).collect();
    let mut packer = SkylinePacker::new(&grid, 140);
    for item in pack_items(&sites, &lib, &grid)? {
        match packer.place(&item) {
            Some(b) => println!("{:>12} at ({}, {}) {}x{}", b.id.to_string(), b.rect.x, b.rect.y, b.rect.w, b.rect.h),
            None => println!("{:?} does not fit", item.id),
        }
        let profile: Vec<String> = packer.skyline().segments().iter().map(|s| format!("[{}..{}]@{}", s.x0, s.x1, s.height)).collect();
        println!("    skyline {}", profile.join(" "));
    }
    Ok(())
}
