//! Deterministic RNG derivation.
//!
//! Every random draw in the crate flows through [`rng_for`]: the parts are
//! length-prefixed, hashed with SHA-256, and the digest seeds a ChaCha8
//! stream. Identical inputs therefore reproduce identical draws on any
//! machine, with no global state.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Derive a deterministic RNG from a domain tag and byte parts.
pub fn rng_for(tag: &str, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Draw a standard Gaussian vector of the given length.
pub fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Draw a unit-norm vector of the given length.
///
/// Resamples on a (practically impossible) near-zero draw so the result is
/// always exactly normalizable.
pub fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = gaussian_vector(dim, rng);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}
