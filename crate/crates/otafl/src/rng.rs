//! Seed derivation for independent, named random streams.
//!
//! Every source of randomness in a run is drawn from its own ChaCha stream
//! keyed by `(master seed, stream label, index)`. Streams are therefore
//! pure functions of the master seed: re-sampling round 17's fading never
//! consumes state from round 16, and components can be re-evaluated in any
//! order (or in parallel) without changing a run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Named random sub-streams of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Node placement (one-shot, index unused).
    Placement,
    /// Small-scale fading, indexed by round.
    Fading,
    /// Receiver noise, indexed by round.
    Noise,
    /// Training-data generation, indexed by UE.
    Data,
}

impl Stream {
    fn label(self) -> &'static [u8] {
        match self {
            Stream::Placement => b"placement",
            Stream::Fading => b"fading",
            Stream::Noise => b"noise",
            Stream::Data => b"data",
        }
    }
}

// FNV-1a, fixed offset/prime so stream keys are stable across platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives the ChaCha generator for `(master, stream, index)`.
pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&fnv1a(stream.label()).to_le_bytes());
    seed[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha20Rng::from_seed(seed)
}
