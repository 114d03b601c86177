//! Legendre-Fenchel machinery for entropy-regularized backups.
//!
//! For the regularizer `Ω_τ(π) = -τ·H(π)` this module provides the conjugate
//! value `Ω*_τ(q) = max_π π·q + τ·H(π)` ([`soft_value`]), its maximizer
//! ([`soft_policy`]), the entropy functional itself ([`entropy`]) and the
//! entropy of the uniform distribution ([`max_entropy`]).
//!
//! Two regularizers are supported. Shannon entropy yields the log-sum-exp
//! value and the softmax policy. Tsallis entropy of degree two,
//! `H(π) = (1 - Σ π²) / 2`, yields the sparsemax policy (the Euclidean
//! projection of `q / τ` onto the simplex) and its closed-form dual value.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest temperature accepted by any function in this module.
pub const MIN_TEMPERATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntropyKind {
    #[serde(rename = "shannon")]
    Shannon,
    /// Tsallis entropy with entropic index 2.
    #[serde(rename = "tsallis2")]
    Tsallis2,
}

impl EntropyKind {
    pub fn name(self) -> &'static str {
        match self {
            EntropyKind::Shannon => "shannon",
            EntropyKind::Tsallis2 => "tsallis2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("temperature must be finite and >= {MIN_TEMPERATURE:e}, got {0}")]
    Temperature(f64),
    #[error("action vector is empty")]
    Empty,
    #[error("action value at index {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("number of actions must be at least 1")]
    ZeroActions,
}

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution(Vec<f64>);

impl PolicyDistribution {
    pub fn uniform(k: usize) -> Self {
        PolicyDistribution(vec![1.0 / k as f64; k])
    }

    /// Wraps probabilities that the caller guarantees are a distribution.
    pub fn from_probs_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|&p| p >= 0.0));
        PolicyDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Draws an index by inverse-CDF lookup of `u ∈ [0, 1)`.
    ///
    /// The first index whose cumulative mass exceeds `u` wins; trailing
    /// zero-probability entries are never returned.
    pub fn sample_with(&self, u: f64) -> usize {
        sample_index(&self.0, u)
    }
}

impl Deref for PolicyDistribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Inverse-CDF sampling of an index from (possibly unnormalized) weights.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

fn validate(q: &[f64], tau: f64) -> Result<f64, EntropyError> {
    if q.is_empty() {
        return Err(EntropyError::Empty);
    }
    if !(tau.is_finite() && tau >= MIN_TEMPERATURE) {
        return Err(EntropyError::Temperature(tau));
    }
    let mut max = f64::NEG_INFINITY;
    for (index, &value) in q.iter().enumerate() {
        if !value.is_finite() {
            return Err(EntropyError::NonFinite { index, value });
        }
        max = max.max(value);
    }
    Ok(max)
}

/// Support threshold of the simplex projection of `z`.
///
/// Returns `(θ, support size)` such that `max(z_i - θ, 0)` sums to one.
fn sparsemax_threshold(z: &[f64]) -> (f64, usize) {
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support = 0;
    let mut support_sum = 0.0;
    for (i, &zi) in sorted.iter().enumerate() {
        cumsum += zi;
        let k = (i + 1) as f64;
        if 1.0 + k * zi > cumsum {
            support = i + 1;
            support_sum = cumsum;
        }
    }
    ((support_sum - 1.0) / support as f64, support)
}

/// Regularized value `Ω*_τ(q) = max_π π·q + τ·H(π)`.
pub fn soft_value(q: &[f64], kind: EntropyKind, tau: f64) -> Result<f64, EntropyError> {
    let max = validate(q, tau)?;
    let value = match kind {
        EntropyKind::Shannon => {
            let sum: f64 = q.iter().map(|&x| ((x - max) / tau).exp()).sum();
            max + tau * sum.ln()
        }
        EntropyKind::Tsallis2 => {
            let z: Vec<f64> = q.iter().map(|&x| (x - max) / tau).collect();
            let (theta, _) = sparsemax_threshold(&z);
            let inner: f64 = z
                .iter()
                .filter(|&&zi| zi > theta)
                .map(|&zi| zi * zi - theta * theta)
                .sum();
            max + tau * (0.5 * inner + 0.5)
        }
    };
    Ok(value)
}

/// Maximizing policy `∇Ω*_τ(q)`: softmax for Shannon, sparsemax for Tsallis.
pub fn soft_policy(
    q: &[f64],
    kind: EntropyKind,
    tau: f64,
) -> Result<PolicyDistribution, EntropyError> {
    let max = validate(q, tau)?;
    let probs = match kind {
        EntropyKind::Shannon => {
            let mut e: Vec<f64> = q.iter().map(|&x| ((x - max) / tau).exp()).collect();
            let sum: f64 = e.iter().sum();
            e.iter_mut().for_each(|p| *p /= sum);
            e
        }
        EntropyKind::Tsallis2 => {
            let z: Vec<f64> = q.iter().map(|&x| (x - max) / tau).collect();
            let (theta, support) = sparsemax_threshold(&z);
            let mut p: Vec<f64> = z.iter().map(|&zi| (zi - theta).max(0.0)).collect();
            // Renormalize away the rounding left by the threshold.
            if support > 1 {
                let sum: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= sum);
            }
            p
        }
    };
    Ok(PolicyDistribution(probs))
}

/// Entropy of `probs` under `kind`, using `0·ln 0 = 0`.
pub fn entropy(probs: &[f64], kind: EntropyKind) -> f64 {
    let k = probs.len().max(1);
    let raw = match kind {
        EntropyKind::Shannon => -probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>(),
        EntropyKind::Tsallis2 => 0.5 * (1.0 - probs.iter().map(|&p| p * p).sum::<f64>()),
    };
    raw.clamp(0.0, uniform_entropy(kind, k))
}

fn uniform_entropy(kind: EntropyKind, k: usize) -> f64 {
    match kind {
        EntropyKind::Shannon => (k as f64).ln(),
        EntropyKind::Tsallis2 => 0.5 * (1.0 - 1.0 / k as f64),
    }
}

/// Entropy of the uniform distribution over `k` actions.
pub fn max_entropy(kind: EntropyKind, k: usize) -> Result<f64, EntropyError> {
    if k == 0 {
        return Err(EntropyError::ZeroActions);
    }
    Ok(uniform_entropy(kind, k))
}

/// Entropy of `soft_policy(q, kind, tau)`.
pub fn policy_entropy(q: &[f64], kind: EntropyKind, tau: f64) -> Result<f64, EntropyError> {
    soft_policy(q, kind, tau).map(|p| entropy(&p, kind))
}

/// Indices attaining the maximum of `q` (exact comparison).
pub fn argmax_set(q: &[f64]) -> Vec<usize> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    q.iter()
        .enumerate()
        .filter(|(_, &x)| x == max)
        .map(|(i, _)| i)
        .collect()
}
