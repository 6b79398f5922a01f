//! Named random streams derived from one scenario seed.
//!
//! Each consumer draws from its own ChaCha stream so that, for example,
//! switching the power algorithm never perturbs the topology or the fading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Users = 2,
    Shadowing = 3,
    Fading = 4,
    Mobility = 5,
    InitialPower = 6,
    Measurement = 7,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
