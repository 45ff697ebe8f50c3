//! Counter-based random stream.
//!
//! Draw `k` (zero-based) of a stream seeded with `s` is
//! `mix64(s + (k + 1) * GOLDEN_GAMMA)` with wrapping arithmetic, where
//! `mix64` is the SplitMix64 finalizer (Stafford variant 13). The output
//! depends only on `(seed, k)`, so streams are reproducible bit-for-bit on
//! every platform and independent of how work is scheduled across threads.
//!
//! Child streams are derived with [`RngStream::fork`]; a parent and its
//! children never share state.

/// Weyl increment of SplitMix64 (odd, `2^64 / phi`).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const MIX_M1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_M2: u64 = 0x94D0_49BB_1331_11EB;

/// Salt separating fork identifiers from ordinary draws.
const FORK_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_M1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_M2);
    z ^ (z >> 31)
}

/// A single-owner stream of pseudo-random numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Seed of the child stream `id`. Does not advance `self`.
    pub fn fork_seed(&self, id: u64) -> u64 {
        mix64(self.seed ^ mix64(id ^ FORK_SALT).wrapping_add(GOLDEN_GAMMA))
    }

    /// Independent child stream `id`. Does not advance `self`.
    pub fn fork(&self, id: u64) -> RngStream {
        RngStream::new(self.fork_seed(id))
    }
}
