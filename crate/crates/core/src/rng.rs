//! Reproducible per-trajectory random streams and Gaussian sampling.
//!
//! Each trajectory owns a ChaCha8 keystream selected by `(seed, index)`; the
//! output at any position is a pure function of `(seed, index, counter)`, so
//! a trajectory draws the same numbers whether it runs alone or in a batch.

use std::f64::consts::TAU;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RngError {
    #[error("Box-Muller input u1 = {0} must lie in (0, 1]")]
    LogDomain(f64),
}

/// Counter-based random stream for one trajectory.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    index: u64,
    core: ChaCha8Rng,
}

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(index);
        Self { seed, index, core }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.core.get_word_pos()
    }

    /// Jump to an absolute position of the stream.
    pub fn set_counter(&mut self, words: u128) {
        self.core.set_word_pos(words);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53-bit resolution.
    pub fn uniform_closed_open(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * INV_2_53
    }

    /// Two independent standard normals.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform_closed_open();
        box_muller(u1, u2)
    }
}

#[inline]
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Box-Muller transform of `u1 in (0, 1]`, `u2 in [0, 1)` into two standard normals.
pub fn gaussian_pair(u1: f64, u2: f64) -> Result<(f64, f64), RngError> {
    if !(u1 > 0.0 && u1 <= 1.0) {
        return Err(RngError::LogDomain(u1));
    }
    Ok(box_muller(u1, u2))
}
