//! Search short chains for stuck states, then break one on purpose.
//!
//! cargo run --release --example deadlock_check

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sitepack::interconnect::{check_deadlock_freedom, Network, SimError};

fn main() -> Result<(), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in 1..=3 {
        let r = check_deadlock_freedom(&Network::new(n)?, 10_000, &mut rng);
        println!(
            "N={n}: {} states, complete {}, {} random cycles, deadlock free {}",
            r.states_explored,
            r.exhaustive_complete,
            r.random_cycles,
            r.deadlock_free()
        );
    }
    let broken = Network::new(3)?.with_ready_tied_low(1);
    let r = check_deadlock_freedom(&broken, 10_000, &mut rng);
    match r.counterexample {
        Some(trace) => {
            println!("station 1 never ready: stuck after {} cycles", trace.len());
            for (c, o) in trace.iter().enumerate() {
                println!("  cycle {c}: {o:?}");
            }
        }
        None => println!("station 1 never ready: no deadlock found"),
    }
    Ok(())
}
