//! Seeded random substreams. Every consumer gets its own ChaCha stream so
//! draw order in one never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Noise,
    Destruction,
    Waves,
    Sampling,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Noise => 0,
            Purpose::Destruction => 1,
            Purpose::Waves => 2,
            Purpose::Sampling => 3,
        }
    }
}

pub fn node_stream(seed: u64, node: NodeId, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(node) * 4 + purpose.code());
    rng
}

/// Streams not tied to a node live above every node stream.
pub fn scenario_stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - purpose.code());
    rng
}
