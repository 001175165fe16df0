//! Deterministic random streams.
//!
//! Every stream is a ChaCha20 keystream: the 64-bit seed is expanded into the
//! 256-bit key with `seed_from_u64`, the stream id selects the ChaCha nonce,
//! and draws walk the block counter. Uniforms take the top 53 bits of a `u64`
//! word; normals use the Box–Muller transform on pairs of uniforms. The same
//! `(seed, stream)` pair yields the same sequence on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream ids used across the workspace.
pub mod streams {
    pub const MODEL_INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const SPLIT: u64 = 2;
    /// Sample `i` of a generated dataset draws from `SAMPLE_BASE + i`.
    pub const SAMPLE_BASE: u64 = 1_000;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller; the second value of each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Integer in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
