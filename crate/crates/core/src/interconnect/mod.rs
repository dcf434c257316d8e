//! Behavioral model of the single-master chip-site network.
//!
//! Stations sit in one open chain. Requests (h2b) travel away from the
//! controller until they reach the station whose address they carry, and
//! read responses (b2h) travel back. Every hop is a single-entry queue with
//! ready-valid backpressure, so the wiring and state per station are the
//! same whatever the chain length.

mod deadlock;
mod message;
mod network;
mod script;

pub use deadlock::{bounded_alphabet, check_deadlock_freedom, DeadlockReport, EXHAUSTIVE_MAX_SITES};
pub use message::{
    hex, B2HMessage, Bank, Command, H2BMessage, ADDR_BITS, B2H_BITS, BUNDLE_BITS, H2B_BITS, MAX_SITES, REG_EN,
    REG_EN_PWR_BAR, REG_RSTN_SOFT, SITE_BITS,
};
pub use network::{
    EventKind, Network, QueueKind, ReadOutcome, ReadResult, Regs, Station, Stats, StepReport, TraceEvent,
    CROSSING_LATENCY, REG_BITS,
};
pub use script::{parse_ops, run_ops, Op, ScriptOutcome};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("site count {0} outside 1..=128")]
    SiteCount(usize),
    #[error("site {site} is not in a chain of {n}")]
    NoSuchSite { site: u8, n: usize },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("read of site {site} word {word:#x} got no answer within {cycles} cycles")]
    Timeout { site: u8, word: u32, cycles: u64 },
    #[error("network made no progress for {cycles} cycles")]
    Stalled { cycles: u64 },
    #[error("{0}")]
    Protocol(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("script line {line}: {msg}")]
    Script { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// One dedicated bundle from the controller to every site.
    Star,
    /// One bundle into the first site, which passes traffic on.
    OpenChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrackScaling {
    /// Bundles crossing the controller boundary.
    pub bundles: usize,
    pub bundle_bits: u32,
}

impl TrackScaling {
    pub fn total_bits(&self) -> u64 {
        self.bundles as u64 * u64::from(self.bundle_bits)
    }
}

/// Wiring needed at the controller for `n` sites.
pub fn track_scaling(topology: Topology, n: usize) -> Result<TrackScaling, SimError> {
    if n == 0 {
        return Err(SimError::SiteCount(0));
    }
    let bundles = match topology {
        Topology::Star => n,
        Topology::OpenChain => 1,
    };
    Ok(TrackScaling { bundles, bundle_bits: BUNDLE_BITS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_grows_chain_does_not() {
        assert_eq!(track_scaling(Topology::Star, 1).unwrap().bundles, 1);
        assert_eq!(track_scaling(Topology::OpenChain, 1).unwrap().bundles, 1);
        assert_eq!(track_scaling(Topology::Star, 50).unwrap().bundles, 50);
        let widths: Vec<u64> =
            [5, 25, 100].iter().map(|&n| track_scaling(Topology::OpenChain, n).unwrap().total_bits()).collect();
        assert!(widths.iter().all(|&w| w == 144));
        assert!(track_scaling(Topology::Star, 0).is_err());
    }
}
