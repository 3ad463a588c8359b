//! Splittable seeding: every (run seed, node, purpose) triple gets its own
//! ChaCha stream, so draws made by one node never shift another node's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::slot::NodeId;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Sub-slot start offset of data and hop-count frames.
    Jitter,
    /// Sub-slot start offset of acknowledgements.
    AckJitter,
    /// Random next-hop draws.
    NextHop,
    /// Geometric delay decisions of the random sync baseline.
    Geometric,
    /// Node placement and initial offsets.
    Scenario,
    /// Offset pairs for synchronization benchmarks.
    SyncBench,
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Jitter => 0x6a69_7474_6572,
            Purpose::AckJitter => 0x6163_6b6a_6974,
            Purpose::NextHop => 0x6e65_7874_686f,
            Purpose::Geometric => 0x6765_6f6d_6574,
            Purpose::Scenario => 0x7363_656e_6172,
            Purpose::SyncBench => 0x7379_6e63_6265,
            Purpose::Custom(v) => splitmix64(v ^ 0x6375_7374_6f6d),
        }
    }
}

/// Stafford variant 13 finalizer used by SplitMix64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_rng_stream(seed: u64, node: NodeId, purpose: Purpose) -> Stream {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ (node.0 as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
    let c = splitmix64(b ^ purpose.tag());
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let word = splitmix64(c.wrapping_add(i as u64));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
