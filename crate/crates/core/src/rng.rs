//! Per-purpose random streams derived from one master seed.
//!
//! Each purpose gets its own ChaCha8 generator seeded from
//! `splitmix64(master ^ splitmix64(tag))`, so drawing more traffic never
//! shifts the placement or link-loss sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial positions and velocities.
    Mobility,
    Priorities,
    LinkLoss,
    /// Session endpoints and start slots.
    Traffic,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Mobility => 0x6d6f_6269_6c69_7479,
            Stream::Priorities => 0x7072_696f_7269_7479,
            Stream::LinkLoss => 0x6c69_6e6b_6c6f_7373,
            Stream::Traffic => 0x7472_6166_6669_6300,
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(master: u64, which: Stream) -> StreamRng {
    ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(which.tag())))
}
