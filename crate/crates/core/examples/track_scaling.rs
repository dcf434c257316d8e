//! Controller-boundary wiring of a star versus an open chain.
//!
//! cargo run --example track_scaling

use sitepack::interconnect::{track_scaling, Network, SimError, Topology};

fn main() -> Result<(), SimError> {
    println!("{:>5} {:>10} {:>10} {:>14}", "sites", "star bits", "chain bits", "station bits");
    for n in [1, 2, 5, 10, 25, 100] {
        let star = track_scaling(Topology::Star, n)?;
        let chain = track_scaling(Topology::OpenChain, n)?;
        let per_station = Network::new(n)?.stations()[0].state_bits().len();
        println!("{n:>5} {:>10} {:>10} {per_station:>14}", star.total_bits(), chain.total_bits());
    }
    Ok(())
}
