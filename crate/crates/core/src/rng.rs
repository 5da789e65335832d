//! Seeded random streams.
//!
//! All randomness in the crate comes from ChaCha20 (`rand_chacha::ChaCha20Rng`,
//! seeded with `seed_from_u64`). Uniform variates take the top 53 bits of a
//! `next_u64` draw, `u = (x >> 11) * 2^-53`, giving `u` in `[0, 1)`. Gaussian
//! variates use the basic Box-Muller transform on two consecutive uniforms,
//! `r = sqrt(-2 ln(1 - u1))`, returning `r cos(2 pi u2)` then `r sin(2 pi u2)`.
//! Any reimplementation following these rules reproduces the streams exactly.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

pub struct SeededRng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Unit vector drawn uniformly on the sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}
