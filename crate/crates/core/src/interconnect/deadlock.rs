use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::Serialize;

use super::message::{Bank, H2BMessage, REG_EN_PWR_BAR};
use super::network::{Network, Station};

/// Exhaustive search is attempted up to this many sites.
pub const EXHAUSTIVE_MAX_SITES: usize = 3;
/// Visited-state cap for the exhaustive search.
pub const STATE_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadlockReport {
    pub sites: usize,
    /// States visited by the exhaustive search; zero when it was skipped.
    pub states_explored: usize,
    /// The search ran to a fixed point without hitting the cap.
    pub exhaustive_complete: bool,
    pub random_cycles: u64,
    /// Requests offered from the initial state, one per cycle, ending in a
    /// stuck state.
    pub counterexample: Option<Vec<Option<H2BMessage>>>,
}

impl DeadlockReport {
    pub fn deadlock_free(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Requests used by the exhaustive search: a user-bank read and write for
/// every site, a periphery read of the first site and a read past the end.
/// Enable bits are left out.
pub fn bounded_alphabet(n: usize) -> Vec<H2BMessage> {
    let mut out = Vec::new();
    for site in 0..n as u8 {
        out.push(H2BMessage::read(site, Bank::User, 0));
        out.push(H2BMessage::write(site, Bank::User, 0, 1));
    }
    out.push(H2BMessage::read(0, Bank::Periphery, REG_EN_PWR_BAR));
    out.push(H2BMessage::read(n as u8, Bank::User, 0));
    out
}

/// A state is stuck if some input leaves it unchanged, takes nothing and
/// delivers nothing while a request is in the chain or being offered.
fn stuck(net: &Network, alphabet: &[H2BMessage]) -> Option<Option<H2BMessage>> {
    let probe = |offer: Option<H2BMessage>| {
        let mut next = net.clone();
        let r = next.step(offer);
        !r.accepted && r.delivered.is_none() && r.dropped.is_empty() && next.stations() == net.stations()
    };
    if !net.is_quiet() && probe(None) {
        return Some(None);
    }
    alphabet.iter().find(|m| probe(Some(**m))).map(|m| Some(*m))
}

fn search(start: &Network, alphabet: &[H2BMessage], limit: usize) -> (usize, bool, Option<Vec<Option<H2BMessage>>>) {
    let key = |n: &Network| n.stations().to_vec();
    let mut seen: HashMap<Vec<Station>, usize> = HashMap::new();
    let mut parents: Vec<(usize, Option<H2BMessage>)> = vec![(usize::MAX, None)];
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    seen.insert(key(start), 0);
    let rebuild = |parents: &[(usize, Option<H2BMessage>)], mut at: usize, last: Option<H2BMessage>| {
        let mut path = vec![last];
        while parents[at].0 != usize::MAX {
            path.push(parents[at].1);
            at = parents[at].0;
        }
        path.reverse();
        path
    };
    while let Some((net, id)) = queue.pop_front() {
        if let Some(bad) = stuck(&net, alphabet) {
            return (seen.len(), false, Some(rebuild(&parents, id, bad)));
        }
        for offer in std::iter::once(None).chain(alphabet.iter().map(|m| Some(*m))) {
            let mut next = net.clone();
            next.step(offer);
            let k = key(&next);
            if seen.contains_key(&k) {
                continue;
            }
            if seen.len() >= limit {
                return (seen.len(), false, None);
            }
            let nid = parents.len();
            parents.push((id, offer));
            seen.insert(k, nid);
            queue.push_back((next, nid));
        }
    }
    (seen.len(), true, None)
}

fn random_request<R: Rng>(n: usize, rng: &mut R) -> H2BMessage {
    let site = rng.gen_range(0..=n as u8);
    let bank = if rng.gen_bool(0.5) { Bank::User } else { Bank::Periphery };
    let word = match bank {
        Bank::User => rng.gen_range(0..8),
        // enable writes go through activation only
        Bank::Periphery => [0, 2, 3][rng.gen_range(0..3)],
    };
    if rng.gen_bool(0.5) {
        H2BMessage::read(site, bank, word)
    } else {
        H2BMessage::write(site, bank, word, rng.gen_range(0..4))
    }
}

/// Search `network` (fresh, with its queue kind and fault hooks) for a
/// state where traffic can no longer move. Chains of up to
/// [`EXHAUSTIVE_MAX_SITES`] are explored exhaustively over
/// [`bounded_alphabet`]; every chain is also driven by a random trace of
/// `trace_length` cycles.
pub fn check_deadlock_freedom<R: Rng>(network: &Network, trace_length: u64, rng: &mut R) -> DeadlockReport {
    let n = network.len();
    let mut report =
        DeadlockReport { sites: n, states_explored: 0, exhaustive_complete: false, random_cycles: 0, counterexample: None };
    let mut start = network.clone();
    start.clear_trace();
    if n <= EXHAUSTIVE_MAX_SITES {
        let (states, complete, cex) = search(&start, &bounded_alphabet(n), STATE_LIMIT);
        report.states_explored = states;
        report.exhaustive_complete = complete;
        if cex.is_some() {
            report.counterexample = cex;
            return report;
        }
    }
    let mut net = start;
    let mut offers = Vec::new();
    for _ in 0..trace_length {
        let offer = rng.gen_bool(0.75).then(|| random_request(n, rng));
        let before = net.stations().to_vec();
        let r = net.step(offer);
        offers.push(offer);
        report.random_cycles += 1;
        let frozen = !r.accepted && r.delivered.is_none() && r.dropped.is_empty() && net.stations() == before.as_slice();
        if frozen && (offer.is_some() || !net.is_quiet()) {
            report.counterexample = Some(offers);
            return report;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_site_is_deadlock_free() {
        let r = check_deadlock_freedom(&Network::new(1).unwrap(), 1000, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(r.deadlock_free());
        assert!(r.exhaustive_complete);
        assert!(r.states_explored > 1);
    }

    #[test]
    fn tied_low_ready_is_caught() {
        let net = Network::new(2).unwrap().with_ready_tied_low(1);
        let r = check_deadlock_freedom(&net, 100, &mut ChaCha8Rng::seed_from_u64(2));
        let cex = r.counterexample.expect("stuck state");
        // replaying the trace reaches a state that no longer moves
        let mut replay = net.clone();
        for o in &cex[..cex.len() - 1] {
            replay.step(*o);
        }
        let before = replay.stations().to_vec();
        let last = replay.step(cex[cex.len() - 1]);
        assert!(!last.accepted);
        assert_eq!(replay.stations(), before.as_slice());
    }

    #[test]
    fn alphabet_has_no_enable_writes() {
        let a = bounded_alphabet(3);
        assert!(a.iter().all(|m| m.command == super::super::Command::Read || m.bank == Bank::User));
        assert_eq!(a.len(), 8);
    }
}
