//! Seed-addressable random numbers.
//!
//! Every random quantity in the crate is a pure function of an [`RngSeed`] and a
//! 64-bit counter, so any draw can be reproduced in isolation (e.g. entry
//! `(r, c)` of measurement matrix `i`) without replaying a sequential stream.
//!
//! Derivation, fixed for all platforms:
//!
//! ```text
//! key(master, stream) = mix64(mix64(master ^ 0x243F6A8885A308D3) ^ (stream · 0x9E3779B97F4A7C15 + 0x13198A2E03707344))
//! word(key, k)        = mix64(key + (k + 1) · 0x9E3779B97F4A7C15)
//! ```
//!
//! `mix64` is the SplitMix64 finalizer, so `word(key, ·)` is exactly the
//! SplitMix64 sequence started from state `key`, with random access.
//!
//! Uniforms use the top 53 bits: `u = (w >> 11) · 2⁻⁵³ + 2⁻⁵⁴ ∈ (0, 1)`.
//! A standard normal at counter `k` is the cosine branch of Box–Muller over
//! the uniforms at counters `2k` and `2k + 1`.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A `(master_seed, stream_id)` pair identifying an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Key of this stream.
    pub fn key(&self) -> u64 {
        let a = mix64(self.master_seed ^ 0x243F_6A88_85A3_08D3);
        mix64(
            a ^ self
                .stream_id
                .wrapping_mul(GOLDEN)
                .wrapping_add(0x1319_8A2E_0370_7344),
        )
    }

    /// Child seed whose master is this stream's key. Used to build seed trees
    /// such as `(master, cell, trial, purpose)`.
    pub fn child(&self, stream_id: u64) -> RngSeed {
        RngSeed::new(self.key(), stream_id)
    }

    pub fn counter(&self) -> CounterRng {
        CounterRng { key: self.key() }
    }

    pub fn stream(&self) -> SeqRng {
        SeqRng {
            rng: self.counter(),
            next: 0,
        }
    }
}

/// Random-access generator: every method is a pure function of the counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    #[inline]
    pub fn word(&self, k: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)),
        )
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, k: u64) -> f64 {
        ((self.word(k) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw number `k`.
    #[inline]
    pub fn normal(&self, k: u64) -> f64 {
        let u1 = self.uniform(k.wrapping_mul(2));
        let u2 = self.uniform(k.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Sequential view over a [`CounterRng`].
#[derive(Debug, Clone)]
pub struct SeqRng {
    rng: CounterRng,
    next: u64,
}

impl SeqRng {
    fn bump(&mut self) -> u64 {
        let k = self.next;
        self.next += 1;
        k
    }

    pub fn next_u64(&mut self) -> u64 {
        let k = self.bump();
        self.rng.word(k)
    }

    pub fn uniform(&mut self) -> f64 {
        let k = self.bump();
        self.rng.uniform(k)
    }

    pub fn normal(&mut self) -> f64 {
        let k = self.bump();
        self.rng.normal(k)
    }

    /// Centered Laplace draw with standard deviation `sd`.
    pub fn laplace(&mut self, sd: f64) -> f64 {
        let b = sd / std::f64::consts::SQRT_2;
        let u = self.uniform() - 0.5;
        -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    /// Uniform integer in `0..bound` by rejection (unbiased).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let w = self.next_u64();
            if w < zone {
                return w % bound;
            }
        }
    }
}
