//! Named algorithm presets and hyperparameter grids.

use serde::{Deserialize, Serialize};

use crate::algorithm::PlannerChoice;
use crate::entropy::{self, EntropyKind};
use crate::planner::{LeafInit, PlannerConfig, TemperatureConfig};
use crate::puct::PuctConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    AntsS,
    AntsT,
    Ments,
    Tents,
    Puct,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::AntsS,
        Algorithm::AntsT,
        Algorithm::Ments,
        Algorithm::Tents,
        Algorithm::Puct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AntsS => "ants_s",
            Algorithm::AntsT => "ants_t",
            Algorithm::Ments => "ments",
            Algorithm::Tents => "tents",
            Algorithm::Puct => "puct",
        }
    }

    pub fn parse(name: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.name() == name)
    }

    /// The tuned configuration under `budget`.
    pub fn preset(self, budget: Budget) -> PlannerChoice {
        let (n_passes, depth_limit) = budget.passes_and_depth();
        let maxent = |entropy, temperature, epsilon, leaf_init, adaptive: bool| {
            PlannerChoice::MaxEnt(PlannerConfig {
                entropy,
                n_passes,
                depth_limit,
                epsilon,
                tau_sel: 0.5,
                gamma: 0.99,
                leaf_init,
                shaping: adaptive,
                e3w: true,
                adapt: adaptive,
                reuse_tree: true,
                seed: 0,
                temperature,
            })
        };
        let adaptive =
            |target_entropy, tau_min, tau0, alpha, adaptation_frequency| TemperatureConfig {
                tau0,
                tau_min,
                target_entropy,
                alpha,
                adaptation_frequency,
                bracket_hi: 1e6,
                alpha_per_call: true,
            };
        let fixed = |tau| TemperatureConfig {
            tau0: tau,
            tau_min: tau,
            ..TemperatureConfig::default()
        };
        match self {
            Algorithm::AntsS => maxent(
                EntropyKind::Shannon,
                adaptive(0.2, 0.01, 10.0, 0.9, 50),
                0.01,
                LeafInit::Raw,
                true,
            ),
            Algorithm::AntsT => maxent(
                EntropyKind::Tsallis2,
                adaptive(0.2, 0.001, 100.0, 0.5, 20),
                0.01,
                LeafInit::Raw,
                true,
            ),
            Algorithm::Ments => maxent(
                EntropyKind::Shannon,
                fixed(1.0),
                0.001,
                LeafInit::Ments { tau_init: 0.01 },
                false,
            ),
            Algorithm::Tents => maxent(
                EntropyKind::Tsallis2,
                fixed(3.0),
                0.001,
                LeafInit::Ments { tau_init: 0.1 },
                false,
            ),
            Algorithm::Puct => PlannerChoice::Puct(PuctConfig {
                c: 1.0,
                tau_init: 1.0,
                tau_sel: 0.2,
                gamma: 0.99,
                n_passes,
                depth_limit,
                reuse_tree: true,
                seed: 0,
            }),
        }
    }
}

/// Search budget per decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// 100 passes, depth 50: planning with a fixed estimator.
    #[default]
    Pretrained,
    /// 30 passes, depth 20: inside the planning-learning loop.
    Loop,
}

impl Budget {
    pub fn passes_and_depth(self) -> (usize, usize) {
        match self {
            Budget::Pretrained => (100, 50),
            Budget::Loop => (30, 20),
        }
    }
}

/// Rounds to 12 decimals so grids hit their decimal literals exactly.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `n` values equidistant in linear space from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| snap(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// `n` values equidistant in log space from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), n)
        .into_iter()
        .enumerate()
        .map(|(i, x)| match i {
            0 => lo,
            _ if i + 1 == n => hi,
            _ => snap(x.exp()),
        })
        .collect()
}

/// The 1-3 temperature series from 0.001 to 10, roughly log-equidistant.
pub const TEMPERATURE_SET: [f64; 9] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

/// Nine target entropies `i·H_max/10` for `i = 1..=9`.
pub fn entropy_grid(kind: EntropyKind, action_count: usize) -> Vec<f64> {
    let h_max = entropy::max_entropy(kind, action_count).unwrap_or(0.0);
    (1..=9).map(|i| snap(i as f64 * h_max / 10.0)).collect()
}

/// Entropy grid used with 18 actions, where `H_max` is rounded to 3
/// (Shannon) or 0.5 (Tsallis).
pub fn reference_entropy_grid(kind: EntropyKind) -> Vec<f64> {
    match kind {
        EntropyKind::Shannon => linear_grid(0.3, 2.7, 9),
        EntropyKind::Tsallis2 => linear_grid(0.05, 0.45, 9),
    }
}
