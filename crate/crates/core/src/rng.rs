//! Counter-based, splittable random streams.
//!
//! A stream is `(seed, path, counter)`. Raw draw `k` is
//! `mix64(key ^ mix64(k + γ))` with `key = hash(seed, path)`, so any draw can
//! be recomputed from its coordinates alone and sibling streams never
//! interact.
//!
//! Raw draws consumed: `uniform`, `randint`, `choice`: 1; `normal`: 2.

use crate::math::{hash_str, hash_words, mix64, unit_f64, GOLDEN_GAMMA};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RngError {
    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("empty weight list")]
    EmptyWeights,
    #[error("weight {index} is not positive and finite")]
    NonPositiveWeight { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    path: Vec<String>,
    counter: u64,
    key: u64,
}

fn derive_key(seed: u64, path: &[String]) -> u64 {
    let words: Vec<u64> = path.iter().map(|l| hash_str(l)).collect();
    hash_words(seed, &words)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, Vec::new())
    }

    /// Stream positioned at counter 0 of `path` under `seed`.
    pub fn at(seed: u64, path: Vec<String>) -> Self {
        let key = derive_key(seed, &path);
        RandomStream { seed, path, counter: 0, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Child stream keyed by `label`; the parent is unchanged.
    pub fn split(&self, label: &str) -> RandomStream {
        let mut path = self.path.clone();
        path.push(label.to_string());
        Self::at(self.seed, path)
    }

    pub fn next_u64(&mut self) -> u64 {
        let r = mix64(self.key ^ mix64(self.counter.wrapping_add(GOLDEN_GAMMA)));
        self.counter += 1;
        r
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi)`; `lo == hi` yields `lo`. One raw draw.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, RngError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(RngError::InvalidRange { lo, hi });
        }
        let u = self.next_f64();
        let x = lo + (hi - lo) * u;
        // Rounding can land exactly on hi for wide ranges.
        Ok(if x >= hi && hi > lo { lo.max(f64::from_bits(hi.to_bits() - 1)) } else { x })
    }

    /// Box–Muller normal, optionally clipped to `μ ± 4σ`. Two raw draws.
    pub fn normal(&mut self, mu: f64, sigma: f64, clip: bool) -> Result<f64, RngError> {
        if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
            return Err(RngError::InvalidRange { lo: mu, hi: sigma });
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let z = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2);
        let x = mu + sigma * z;
        Ok(if clip { x.clamp(mu - 4.0 * sigma, mu + 4.0 * sigma) } else { x })
    }

    /// Uniform integer in `[0, n)`. One raw draw.
    pub fn randint(&mut self, n: i64) -> Result<i64, RngError> {
        if n < 1 {
            return Err(RngError::InvalidRange { lo: 0.0, hi: n as f64 });
        }
        let k = (self.next_f64() * n as f64) as i64;
        Ok(k.min(n - 1))
    }

    /// Index `i` with probability `wᵢ / Σw`. One raw draw.
    pub fn choice(&mut self, weights: &[f64]) -> Result<usize, RngError> {
        check_weights(weights)?;
        let total: f64 = weights.iter().sum();
        let target = self.next_f64() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
        Ok(weights.len() - 1)
    }
}

pub fn check_weights(weights: &[f64]) -> Result<(), RngError> {
    if weights.is_empty() {
        return Err(RngError::EmptyWeights);
    }
    if let Some(index) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(RngError::NonPositiveWeight { index });
    }
    Ok(())
}
