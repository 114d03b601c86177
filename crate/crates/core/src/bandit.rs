//! Softmax bandits played with empirical exponential weights (E2W).
//!
//! At step `t` the arm is drawn from `(1 - λ_t)·softmax(r̂_t / τ_t) + λ_t/K`
//! with `λ_t = min(1, K / ln(t + 1))`. Logs track how closely the visit
//! counts follow `t·softmax(r / τ)` and whether the empirical greedy arm is
//! the true best arm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{self, EntropyError, EntropyKind, PolicyDistribution};

/// Smallest temperature a schedule may produce.
pub const MIN_SCHEDULE_TAU: f64 = 1e-3;

pub const DEFAULT_CHECKPOINTS: [u64; 4] = [100, 1_000, 10_000, 100_000];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    #[error("invalid bandit config: {0}")]
    Config(String),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauSchedule {
    Constant,
    /// `τ + c / ln(t + 1)`.
    LogDecay {
        c: f64,
    },
}

impl TauSchedule {
    pub fn at(self, tau: f64, t: u64) -> f64 {
        match self {
            TauSchedule::Constant => tau,
            TauSchedule::LogDecay { c } => tau + c / ((t + 1) as f64).ln(),
        }
    }
}

/// Temperature at step `t >= 1`.
pub fn tau_schedule(schedule: TauSchedule, tau: f64, t: u64) -> Result<f64, BanditError> {
    let value = schedule.at(tau, t);
    if !(value.is_finite() && value >= MIN_SCHEDULE_TAU) {
        return Err(BanditError::Config(format!(
            "schedule gives tau = {value} at t = {t}"
        )));
    }
    Ok(value)
}

/// `min(1, K / ln(t + 1))`.
pub fn e2w_lambda(k: usize, t: u64) -> f64 {
    (k as f64 / ((t + 1) as f64).ln()).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditConfig {
    pub means: Vec<f64>,
    /// Standard deviation of the Gaussian reward noise.
    pub sigma: f64,
    /// Limit temperature `τ`.
    pub tau: f64,
    pub schedule: TauSchedule,
    pub checkpoints: Vec<u64>,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            means: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sigma: 0.1,
            tau: 0.1,
            schedule: TauSchedule::Constant,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<(), BanditError> {
        let bad = |m: &str| Err(BanditError::Config(m.to_string()));
        if self.means.is_empty() || self.means.iter().any(|m| !m.is_finite()) {
            return bad("means must be non-empty and finite");
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad("sigma must be finite and >= 0");
        }
        if !(self.tau.is_finite() && self.tau >= MIN_SCHEDULE_TAU) {
            return bad("tau must be >= 1e-3");
        }
        if let TauSchedule::LogDecay { c } = self.schedule {
            if !(c.is_finite() && c >= 0.0) {
                return bad("log-decay constant must be finite and >= 0");
            }
        }
        if self.checkpoints.is_empty()
            || self.checkpoints[0] == 0
            || self.checkpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("checkpoints must be positive and strictly increasing");
        }
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        *self.checkpoints.last().unwrap_or(&0)
    }
}

/// One log row per checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub seed: u64,
    pub t: u64,
    /// `max_a |N_t(a) - t·softmax(r / τ)(a)|`.
    pub gap: f64,
    pub greedy_correct: bool,
    pub tau_t: f64,
}

#[derive(Debug, Clone)]
pub struct BanditTrial {
    config: BanditConfig,
    target: PolicyDistribution,
    best_arm: usize,
    rng: ChaCha8Rng,
    seed: u64,
    t: u64,
    counts: Vec<u64>,
    estimates: Vec<f64>,
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl BanditTrial {
    pub fn new(config: BanditConfig, seed: u64) -> Result<Self, BanditError> {
        config.validate()?;
        let k = config.means.len();
        Ok(BanditTrial {
            target: entropy::soft_policy(&config.means, EntropyKind::Shannon, config.tau)?,
            best_arm: first_argmax(&config.means),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            t: 0,
            counts: vec![0; k],
            estimates: vec![0.0; k],
            config,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Empirical means; zero for arms never pulled.
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// `softmax(r / τ)` for the true means at the limit temperature.
    pub fn target(&self) -> &PolicyDistribution {
        &self.target
    }

    /// Distribution the next pull (step `t + 1`) is drawn from.
    pub fn sampling_distribution(&self) -> Result<PolicyDistribution, BanditError> {
        let t = self.t + 1;
        let k = self.counts.len();
        let tau = tau_schedule(self.config.schedule, self.config.tau, t)?;
        let soft = entropy::soft_policy(&self.estimates, EntropyKind::Shannon, tau)?;
        let lambda = e2w_lambda(k, t);
        Ok(PolicyDistribution::from_probs_unchecked(
            soft.iter()
                .map(|p| (1.0 - lambda) * p + lambda / k as f64)
                .collect(),
        ))
    }

    /// Pulls one arm. Draws a uniform for the arm, then a standard normal
    /// for the reward noise.
    pub fn step(&mut self) -> Result<usize, BanditError> {
        let policy = self.sampling_distribution()?;
        let arm = policy.sample_with(self.rng.random::<f64>());
        let z: f64 = self.rng.sample(StandardNormal);
        let reward = self.config.means[arm] + self.config.sigma * z;
        self.t += 1;
        self.counts[arm] += 1;
        let n = self.counts[arm];
        self.estimates[arm] = if n == 1 {
            reward
        } else {
            self.estimates[arm] + (reward - self.estimates[arm]) / n as f64
        };
        Ok(arm)
    }

    pub fn occupation_gap(&self) -> f64 {
        let t = self.t as f64;
        self.counts
            .iter()
            .zip(self.target.iter())
            .map(|(&n, p)| (n as f64 - t * p).abs())
            .fold(0.0, f64::max)
    }

    /// Whether the arm maximizing `softmax(r̂_t / τ)` is the best arm.
    pub fn greedy_correct(&self) -> bool {
        first_argmax(&self.estimates) == self.best_arm
    }

    /// Plays through every checkpoint and logs one row at each.
    pub fn run(&mut self) -> Result<Vec<CheckpointRow>, BanditError> {
        let checkpoints = self.config.checkpoints.clone();
        let mut rows = Vec::with_capacity(checkpoints.len());
        for t in checkpoints {
            while self.t < t {
                self.step()?;
            }
            rows.push(CheckpointRow {
                seed: self.seed,
                t,
                gap: self.occupation_gap(),
                greedy_correct: self.greedy_correct(),
                tau_t: tau_schedule(self.config.schedule, self.config.tau, t)?,
            });
        }
        Ok(rows)
    }
}

pub fn run_trial(config: &BanditConfig, seed: u64) -> Result<Vec<CheckpointRow>, BanditError> {
    BanditTrial::new(config.clone(), seed)?.run()
}

/// Runs independent trials in parallel; rows are ordered by seed, then `t`.
pub fn run_trials(config: &BanditConfig, seeds: &[u64]) -> Result<Vec<CheckpointRow>, BanditError> {
    config.validate()?;
    let per_seed: Vec<Vec<CheckpointRow>> = seeds
        .par_iter()
        .map(|&s| run_trial(config, s))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<CheckpointRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.seed, r.t));
    Ok(rows)
}

/// Number of rows with a wrong greedy arm at each checkpoint, in order.
pub fn greedy_errors(rows: &[CheckpointRow], checkpoints: &[u64]) -> Vec<usize> {
    checkpoints
        .iter()
        .map(|&t| {
            rows.iter()
                .filter(|r| r.t == t && !r.greedy_correct)
                .count()
        })
        .collect()
}
