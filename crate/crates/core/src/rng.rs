//! Seeded, splittable randomness.
//!
//! Every randomized operation in this crate draws from a [`RngStream`]: a
//! `(seed, stream_id)` pair backed by a counter-based ChaCha generator.
//! The same pair always reproduces the same draw sequence, and distinct
//! stream ids give statistically independent streams, so independent
//! trials (or independent noise channels within one trial) can be run in
//! parallel without coordination.
//!
//! ChaCha8 is used for speed; the draws are of cryptographic quality as a
//! bitstream, but no floating-point snapping or constant-time sampling is
//! done on top of it, so the noise here is suitable for experiments, not
//! for hardened production releases of private data.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one reproducible stream of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Instantiate the generator for this stream. Calling this twice on
    /// the same `RngStream` yields generators that produce identical
    /// sequences.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A derived stream with the same seed and a different stream id.
    /// Used to hand each trial (and each noise channel within a trial)
    /// its own independent stream.
    pub fn substream(&self, offset: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(offset),
        }
    }
}
