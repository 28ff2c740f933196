//! Seeded random number source.
//!
//! Every stochastic operation in the crate draws from an [`RngStream`]:
//! a ChaCha8 counter-based generator (via `rand_chacha`, whose output is
//! portable and reproducible across platforms) plus fully specified
//! derivations on top of it:
//!
//! - `f64` uniforms take the top 53 bits of `next_u64`, so sequences do not
//!   depend on any distribution crate;
//! - normals use the Box-Muller transform (cosine branch only);
//! - Beta(α, α) uses Johnk's algorithm for α ≤ 1 and the Gamma-ratio
//!   construction with Marsaglia-Tsang Gamma sampling for α > 1.
//!
//! Identical seed and call sequence therefore produce identical output
//! everywhere. Named sub-streams (ChaCha stream numbers) let one root seed
//! drive independent data / partition / init / train sequences.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Named ChaCha stream numbers, so components seeded from one root seed
/// consume independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Data = 1,
    Partition = 2,
    Init = 3,
    Train = 4,
}

/// Deterministic, splittable random source.
#[derive(Debug, Clone)]
pub struct RngStream {
    engine: ChaCha8Rng,
}

impl RngStream {
    /// Stream 0 of the given seed.
    pub fn new(seed: u64) -> Self {
        Self {
            engine: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A named sub-stream of the given seed, independent of every other
    /// `StreamId` under the same seed.
    pub fn named(seed: u64, stream: StreamId) -> Self {
        let mut engine = ChaCha8Rng::seed_from_u64(seed);
        engine.set_stream(stream as u64);
        Self { engine }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.engine.next_u64()
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn uniform_01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[a, b)`. Rounding at the top of the range is clamped so
    /// the half-open contract holds exactly.
    pub fn uniform(&mut self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Input(format!(
                "uniform bounds must satisfy a < b, got [{a}, {b})"
            )));
        }
        let x = a + (b - a) * self.uniform_01();
        Ok(if x < b { x } else { b.next_down() })
    }

    /// Standard normal via Box-Muller; u1 is shifted into `(0, 1]` so the
    /// logarithm is always finite.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform_01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Draw from `Beta(alpha, alpha)`, `alpha > 0`. Output lies in `(0, 1)`.
    pub fn beta_symmetric(&mut self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Input(format!("beta parameter must be > 0, got {alpha}")));
        }
        let x = if alpha <= 1.0 {
            // Johnk: accept (u^(1/a), v^(1/a)) on the simplex.
            loop {
                let u = self.uniform_01().powf(1.0 / alpha);
                let v = self.uniform_01().powf(1.0 / alpha);
                let s = u + v;
                if s > 0.0 && s <= 1.0 {
                    break u / s;
                }
            }
        } else {
            let x = self.gamma(alpha);
            let y = self.gamma(alpha);
            x / (x + y)
        };
        // The open-interval contract: rounding can land on an endpoint.
        Ok(x.clamp(f64::MIN_POSITIVE, 1.0_f64.next_down()))
    }

    /// Gamma(shape, 1) for shape >= 1 via Marsaglia-Tsang.
    fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 1.0);
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.normal();
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
            if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                return d * v;
            }
        }
    }

    /// Uniform index in `0..n` (rejection sampling, no modulo bias).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() requires a nonempty range");
        let n = n as u64;
        let limit = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < limit {
                return (x % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
