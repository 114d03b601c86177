use crate::envs::EnvironmentModel;
use crate::estimator::QEstimator;

use super::Sample;

/// Per-action linear model over `features ⊕ 1 ⊕ ln τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQEstimator {
    weights: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub l2: f64,
}

impl LinearQEstimator {
    /// Zero-initialized model for `feature_len` state features.
    pub fn new(action_count: usize, feature_len: usize, learning_rate: f64, l2: f64) -> Self {
        LinearQEstimator {
            weights: vec![vec![0.0; feature_len + 2]; action_count],
            learning_rate,
            l2,
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn input(features: &[f64], tau: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(features.len() + 2);
        x.extend_from_slice(features);
        x.push(1.0);
        x.push(tau.ln());
        x
    }

    pub fn predict_input(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn predict(&self, features: &[f64], tau: f64) -> Vec<f64> {
        self.predict_input(&Self::input(features, tau))
    }

    /// One gradient step on the mean squared error over `batch` and all
    /// actions. Returns the loss before the step.
    pub fn sgd_step(&mut self, batch: &[&Sample]) -> f64 {
        let k = self.weights.len();
        let dim = self.weights.first().map_or(0, Vec::len);
        let mut grad = vec![vec![0.0; dim]; k];
        let mut loss = 0.0;
        for sample in batch {
            let x = Self::input(&sample.features, sample.tau);
            let pred = self.predict_input(&x);
            for a in 0..k {
                let err = pred[a] - sample.targets[a];
                loss += err * err;
                for (g, xi) in grad[a].iter_mut().zip(&x) {
                    *g += err * xi;
                }
            }
        }
        let n = batch.len().max(1) as f64;
        for (w, g) in self.weights.iter_mut().zip(&grad) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= self.learning_rate * (gi / n + self.l2 * *wi);
            }
        }
        loss / (n * k as f64)
    }

    /// Binds the model to an environment's feature map.
    pub fn view<'a, E: EnvironmentModel>(&'a self, env: &'a E) -> LinearView<'a, E> {
        LinearView { model: self, env }
    }
}

/// A [`LinearQEstimator`] evaluated on an environment's state features.
pub struct LinearView<'a, E> {
    model: &'a LinearQEstimator,
    env: &'a E,
}

impl<E: EnvironmentModel> QEstimator<E::State> for LinearView<'_, E> {
    fn evaluate(&self, state: &E::State, action: usize, tau: f64) -> f64 {
        self.model.predict(&self.env.features(state), tau)[action]
    }

    fn evaluate_all(&self, state: &E::State, _: usize, tau: f64) -> Vec<f64> {
        self.model.predict(&self.env.features(state), tau)
    }
}
