//! Seeding scheme and the portable pseudo-random stream used by every
//! stochastic corruption.
//!
//! The generator is splitmix64 over the zero-extended 32-bit seed. It has
//! published reference outputs, needs no platform support and is a plain
//! value, so a stream can be cloned or moved between threads without
//! changing what it yields.

use serde::{Deserialize, Serialize};

/// Multiplier applied to the augmentation base seed before adding the
/// sample index.
pub const SAMPLE_SEED_MULTIPLIER: u64 = 1_000_003;

/// The three fixed seeds of an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedScheme {
    /// Drives stratified subsampling of the dataset.
    pub sampling_seed: u32,
    /// Base for the per-sample corruption seeds.
    pub augmentation_base_seed: u32,
    /// Forwarded to the endpoint when sampling-based decoding is used.
    pub generation_seed: u32,
}

impl Default for SeedScheme {
    fn default() -> Self {
        Self {
            sampling_seed: 42,
            augmentation_base_seed: 1234,
            generation_seed: 42,
        }
    }
}

impl SeedScheme {
    /// Seed for the sample at `index` of the sampled dataset.
    pub fn for_sample(&self, index: u64) -> u32 {
        sample_seed(self.augmentation_base_seed, index)
    }
}

/// `(base * 1000003 + index) mod 2^32`.
///
/// The product and sum are formed in 128-bit arithmetic, so any `u64`
/// index is accepted. Indices that differ by a multiple of 2^32 map to the
/// same seed.
pub fn sample_seed(base: u32, index: u64) -> u32 {
    let wide = base as u128 * SAMPLE_SEED_MULTIPLIER as u128 + index as u128;
    (wide % (1u128 << 32)) as u32
}

/// A splitmix64 stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    state: u64,
    spare_gaussian: Option<f64>,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Creates the stream for `seed`.
pub fn make_rng(seed: u32) -> RngStream {
    RngStream::new(seed as u64)
}

impl RngStream {
    pub fn new(state: u64) -> Self {
        Self {
            state,
            spare_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in `0..bound` (Lemire's multiply-and-reject).
    ///
    /// # Panics
    /// If `bound` is zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below called with an empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let product = self.next_u64() as u128 * bound as u128;
            if (product as u64) >= threshold {
                return (product >> 64) as u64;
            }
        }
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Standard normal draw.
    ///
    /// Box–Muller over two consecutive uniforms `u1, u2`: the cosine branch
    /// is returned first and the sine branch is cached for the next call.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        // 1 - u1 lies in (0, 1], so the logarithm is finite.
        let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_gaussian = Some(radius * theta.sin());
        radius * theta.cos()
    }

    /// Poisson draw by sequential inversion of the CDF using one uniform.
    pub fn next_poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        let u = self.next_f64();
        let mut k = 0u64;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        // The tail beyond lambda + 40 sqrt(lambda) + 40 carries no mass at f64 precision.
        let cap = (lambda + 40.0 * lambda.sqrt() + 40.0) as u64;
        while u >= cdf && k < cap {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k
    }
}
