//! Seeded, splittable randomness.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. A bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of video `video_index` from a master seed.
///
/// The seed is the SplitMix64 output for counter `master + (index + 1) * γ`
/// with γ the 64-bit golden-ratio constant. Because γ is odd and the
/// finalizer is a bijection, distinct indices never collide for a fixed
/// master seed.
pub fn derive_child_seed(master_seed: u64, video_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(video_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Deterministic generator handed explicitly to every stochastic operation.
///
/// Backed by ChaCha8, whose output stream is specified independently of the
/// platform, so identical seeds give identical draws everywhere.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn child(&self, index: u64) -> Self {
        let base = self.rng.get_seed();
        let mut folded = 0u64;
        for chunk in base.chunks_exact(8) {
            folded = mix64(folded ^ u64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Self::from_seed(derive_child_seed(folded, index))
    }

    /// Uniform draw in `[low, high)`. Returns `low` when the range is empty.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        if high <= low {
            return low;
        }
        low + (high - low) * self.rng.random::<f64>()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Bernoulli trial with success probability `p` (clamped to `[0, 1]`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.rng.random::<f64>() < p
    }

    /// Normal draw. `std_dev == 0` returns `mean` without consuming state.
    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        if std_dev == 0.0 {
            return mean;
        }
        Normal::new(mean, std_dev)
            .expect("standard deviation must be finite and non-negative")
            .sample(&mut self.rng)
    }

    /// Gamma draw with shape `alpha` and scale `theta`.
    pub fn gamma(&mut self, alpha: f64, theta: f64) -> f64 {
        Gamma::new(alpha, theta)
            .expect("gamma parameters must be positive")
            .sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
