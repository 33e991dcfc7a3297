//! Seeded random streams.
//!
//! Every stochastic component owns its own [`ChaCha8Rng`] derived from an
//! explicit `u64` seed, so runs are reproducible regardless of how many other
//! components consume randomness. Parallel environment ranks use
//! [`env_stream`], which offsets the base seed by the environment index.

use rand::Rng;
pub use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::math;

/// A ChaCha8 stream seeded from a bare `u64`.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The stream for environment rank `env_index` under a base seed.
pub fn env_stream(seed: u64, env_index: u32) -> ChaCha8Rng {
    seeded(seed.wrapping_add(env_index as u64))
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard normal draw via Box-Muller (one variate per call).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2 = rng.random::<f64>();
    math::sqrt(-2.0 * math::log(u1)) * math::cos(math::TAU * u2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded(7);
        let mut b = seeded(7);
        for _ in 0..32 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn env_streams_differ() {
        let mut a = env_stream(100, 0);
        let mut b = env_stream(100, 1);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut rng = seeded(42);
        let n = 200_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            sum += z;
            sum2 += z * z;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
