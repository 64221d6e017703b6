//! Seed derivation. Every random stream in a run is a ChaCha8 generator
//! seeded from the master seed plus a tuple of stream coordinates, so results
//! never depend on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named stream families. Distinct tags keep e.g. client 3 of round 5 apart
/// from the selection draw of round 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Partition = 2,
    Subsample = 3,
    Attackers = 4,
    Selection = 5,
    Client = 6,
    Adversary = 7,
    Reference = 8,
    Noise = 9,
    Label = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with stream coordinates into a single 64-bit seed.
pub fn derive_seed(master: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    h
}

pub fn stream(master: u64, stream: Stream, coords: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, coords))
}
