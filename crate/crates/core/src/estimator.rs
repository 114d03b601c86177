//! Leaf evaluators used by the planners' simulation phase.

use std::hash::Hash;

use crate::envs::{EnvironmentModel, ValueTable};

/// A temperature-aware action-value estimate `Q̂(s, a, τ)`.
///
/// Implementations must be deterministic in `(state, action, tau)`.
pub trait QEstimator<S>: Sync {
    fn evaluate(&self, state: &S, action: usize, tau: f64) -> f64;

    fn evaluate_all(&self, state: &S, action_count: usize, tau: f64) -> Vec<f64> {
        (0..action_count)
            .map(|a| self.evaluate(state, a, tau))
            .collect()
    }
}

impl<S, Q: QEstimator<S> + ?Sized> QEstimator<S> for &Q {
    fn evaluate(&self, state: &S, action: usize, tau: f64) -> f64 {
        (**self).evaluate(state, action, tau)
    }

    fn evaluate_all(&self, state: &S, action_count: usize, tau: f64) -> Vec<f64> {
        (**self).evaluate_all(state, action_count, tau)
    }
}

/// `Q̂ ≡ 0`, an untrained network.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroEstimator;

impl<S> QEstimator<S> for ZeroEstimator {
    fn evaluate(&self, _: &S, _: usize, _: f64) -> f64 {
        0.0
    }
}

/// The one-step reward `r(s, a)`, i.e. the exact `Q` with one step to go.
#[derive(Debug, Clone, Copy)]
pub struct RewardEstimator<'a, E>(pub &'a E);

impl<E: EnvironmentModel> QEstimator<E::State> for RewardEstimator<'_, E> {
    fn evaluate(&self, state: &E::State, action: usize, _: f64) -> f64 {
        self.0.step(state, action).map(|t| t.reward).unwrap_or(0.0)
    }
}

/// Reads `Q_h(s, ·)` out of a solved [`ValueTable`] at its full horizon.
///
/// States missing from the table evaluate to `0`. An optional deterministic
/// perturbation of amplitude `noise` (per state-action hash) mimics an
/// imperfect pretrained network.
#[derive(Debug, Clone)]
pub struct TableEstimator<S> {
    table: ValueTable<S>,
    noise: f64,
    noise_seed: u64,
}

impl<S: Clone + Eq + Hash> TableEstimator<S> {
    pub fn new(table: ValueTable<S>) -> Self {
        TableEstimator {
            table,
            noise: 0.0,
            noise_seed: 0,
        }
    }

    pub fn with_noise(mut self, noise: f64, seed: u64) -> Self {
        self.noise = noise;
        self.noise_seed = seed;
        self
    }

    pub fn table(&self) -> &ValueTable<S> {
        &self.table
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<S> QEstimator<S> for TableEstimator<S>
where
    S: Clone + Eq + Hash + Send + Sync,
{
    fn evaluate(&self, state: &S, action: usize, _: f64) -> f64 {
        let base = self
            .table
            .qvalues(state, self.table.horizon)
            .and_then(|q| q.get(action).copied())
            .unwrap_or(0.0);
        if self.noise == 0.0 {
            return base;
        }
        use std::hash::{BuildHasher, BuildHasherDefault, DefaultHasher};
        let h = BuildHasherDefault::<DefaultHasher>::default().hash_one(state);
        let u = mix(h ^ mix(self.noise_seed ^ (action as u64 + 1))) >> 11;
        let centered = (u as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
        base + self.noise * centered
    }
}
