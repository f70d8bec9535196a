//! Seeded random streams.
//!
//! Every simulation run owns exactly one [`RandomStream`]. Streams for a sweep
//! are derived from a 64-bit master seed and the run index, so the stream a
//! run sees does not depend on which thread executes it or in what order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run_index` of a sweep seeded with `master_seed`.
pub fn derive_run_seed(master_seed: u64, run_index: u64) -> u64 {
    master_seed ^ splitmix64(run_index)
}

/// A deterministic, non-shared random stream.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn for_run(master_seed: u64, run_index: u64) -> Self {
        Self::from_seed(derive_run_seed(master_seed, run_index))
    }

    /// Uniform variate on the half-open interval (0, 1].
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
