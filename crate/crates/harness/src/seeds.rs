//! Independent random streams per task, derived from the run seed.
//!
//! A task is identified by a domain and two indices; the stream number packs
//! them into 64 bits, so tasks never share a stream and results do not depend
//! on the order in which the work pool runs them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Instance = 1,
    Noise = 2,
    Capacity = 3,
    Recall = 4,
    SwitchInstance = 5,
    Switch = 6,
    Cli = 7,
}

pub fn task_rng(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    debug_assert!(a < 1 << 28 && b < 1 << 28);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (a << 28) | b);
    rng
}
