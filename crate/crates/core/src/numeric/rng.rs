//! Seeded PRNG with a fully specified update rule, so any reimplementation
//! can reproduce the exact streams used for initialization, shuffling, and
//! synthetic data.
//!
//! State: four 64-bit words `s[0..4]`, seeded by four consecutive outputs
//! of SplitMix64 applied to the user seed:
//!
//! ```text
//! splitmix64(state):
//!   state  = state + 0x9E3779B97F4A7C15          (wrapping)
//!   z = state
//!   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9     (wrapping)
//!   z = (z ^ (z >> 27)) * 0x94D049BB133111EB     (wrapping)
//!   return z ^ (z >> 31)
//! ```
//!
//! Core step (xoshiro256**), producing one 64-bit output per call:
//!
//! ```text
//! out  = rotl(s[1] * 5, 7) * 9                   (wrapping)
//! t    = s[1] << 17
//! s[2] ^= s[0];  s[3] ^= s[1];  s[1] ^= s[2];  s[0] ^= s[3]
//! s[2] ^= t;     s[3]  = rotl(s[3], 45)
//! ```
//!
//! Derived draws:
//! - `uniform01`: `(out >> 11) as f64 * 2^-53`, in `[0, 1)`.
//! - `normal(mu, sigma)`: Box-Muller on two consecutive uniforms,
//!   `z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`, then `mu + sigma * z`.
//!   Exactly two uniforms are consumed per call (the sine branch is not
//!   cached), keeping stream positions easy to reason about.
//! - `index(n)`: `out mod n` (the modulo bias is negligible for the small
//!   `n` used here and keeps the rule trivially portable).

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Prng {
    s: [u64; 4],
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Prng { s }
    }

    /// Derive an independent stream for a named purpose (dropout, shuffle, ...)
    /// without disturbing this stream.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Prng::new(seed ^ stream.wrapping_mul(0xA0761D6478BD642F))
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        out
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Normal draw via Box-Muller. `sigma` must be nonnegative.
    pub fn normal(&mut self, mu: f64, sigma: f64) -> f64 {
        self.try_normal(mu, sigma)
            .expect("normal: negative standard deviation")
    }

    pub fn try_normal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if sigma < 0.0 {
            return Err(Error::Argument(format!(
                "normal: sigma must be >= 0, got {sigma}"
            )));
        }
        let u1 = 1.0 - self.uniform01(); // in (0, 1], keeps ln finite
        let u2 = self.uniform01();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        Ok(mu + sigma * z)
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}
