//! Counter-based randomness derivation.
//!
//! Every stochastic quantity in the library is drawn from a stream
//! keyed by `(master seed, domain, round, ue)`. A fresh ChaCha8 state
//! is built per key, so a draw never depends on how many other draws
//! happened before it. This makes full traces bit-identical across
//! runs, evaluation orders and worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent randomness domains. Keeping domains disjoint guarantees
/// that e.g. channel fading and gradient noise never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Small-scale channel coefficients, keyed by (round, ue).
    Channel = 1,
    /// Task generation (curvatures, centers, class means), keyed by
    /// (item, ue-or-class).
    TaskGen = 2,
    /// Stochastic gradient/Hessian noise, keyed by (local iteration, ue).
    GradNoise = 3,
    /// Dataset partitioning, keyed by (0, ue).
    Partition = 4,
    /// Mini-batch index sampling, keyed by (local iteration, ue).
    Batch = 5,
    /// Frequency derivation from expected rates, keyed by (0, ue).
    EtaGen = 6,
}

/// Builds the deterministic stream for one `(seed, domain, round, ue)`
/// key. Cheap enough to construct per draw.
pub fn stream_rng(master_seed: u64, domain: Domain, round: u64, ue: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&round.to_le_bytes());
    key[24..].copy_from_slice(&ue.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
