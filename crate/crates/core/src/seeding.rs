//! Deterministic RNG derivation.
//!
//! Every stochastic component draws from its own stream, derived from the
//! global seed plus a domain label and indices. Separate streams keep
//! results independent of scheduling order (replica j's stream does not
//! depend on how many draws replica j-1 made) and let modes that skip a
//! component (e.g. manual weighting skips controller sampling) still
//! reproduce the exact trajectory of modes that do not.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed, a domain label, and indices into a single seed.
pub fn derive_seed(base: u64, domain: &str, indices: &[u64]) -> u64 {
    // FNV-1a over the label, then splitmix over base and indices.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in domain.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = base ^ h;
    let mut out = splitmix64(&mut state);
    for &ix in indices {
        state ^= ix;
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha stream seeded from [`derive_seed`].
pub fn derive_rng(base: u64, domain: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, domain, indices))
}
