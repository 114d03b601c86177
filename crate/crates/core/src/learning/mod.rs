//! Planning-learning loop: episodes collected by a planner feed a replay
//! buffer of root Q-values, which train a temperature-aware linear estimator
//! that the planner uses for leaf evaluation in later epochs.

mod buffer;
mod linear;

use std::ops::Range;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{ReplayBuffer, Sample};
pub use linear::{LinearQEstimator, LinearView};

use crate::algorithm::{derive_seed, play_episode, EpisodeLog, PlannerChoice};
use crate::envs::EnvironmentModel;
use crate::estimator::QEstimator;
use crate::planner::{ActionMode, PlannerError};
pub use crate::puct::visit_distribution as puct_policy_target;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub updates_per_epoch: usize,
    pub batch_size: usize,
    pub eval_episodes: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            epochs: 10,
            episodes_per_epoch: 8,
            updates_per_epoch: 200,
            batch_size: 32,
            eval_episodes: 2,
            buffer_capacity: 30_000,
            learning_rate: 0.05,
            l2: 1e-4,
            max_steps: 30,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        let positive = [
            ("updates_per_epoch", self.updates_per_epoch),
            ("batch_size", self.batch_size),
            ("eval_episodes", self.eval_episodes),
            ("buffer_capacity", self.buffer_capacity),
            ("max_steps", self.max_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(LoopError::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(LoopError::Config("learning_rate must be positive".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(LoopError::Config("l2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub episodes_collected: usize,
    /// Mean undiscounted return of the greedy evaluation episodes.
    pub mean_return: f64,
    /// Mean training loss of the epoch; NaN when training was skipped.
    pub mean_loss: f64,
    /// Mean planner temperature over the epoch's collected decisions.
    pub mean_tau: f64,
}

/// Plays one episode per index in parallel, each with its own planner seeded
/// by `derive_seed(base_seed, index)`. Results keep index order.
pub fn run_episodes<E>(
    env: &E,
    choice: &PlannerChoice,
    estimator: &dyn QEstimator<E::State>,
    mode: ActionMode,
    base_seed: u64,
    indices: Range<u64>,
    max_steps: usize,
) -> Result<Vec<EpisodeLog<E::State>>, PlannerError>
where
    E: EnvironmentModel,
    E::State: 'static,
{
    indices
        .into_par_iter()
        .map(|i| {
            let seeded = choice.with_seed(derive_seed(base_seed, i));
            let mut planner = seeded.build::<E>(env.action_count())?;
            play_episode(env, planner.as_mut(), estimator, mode, max_steps)
        })
        .collect()
}

/// Stores every decision of `episodes` as a training sample.
pub fn store_episodes<E: EnvironmentModel>(
    env: &E,
    episodes: &[EpisodeLog<E::State>],
    buffer: &mut ReplayBuffer,
) {
    for ep in episodes {
        for step in &ep.steps {
            buffer.push(Sample {
                features: env.features(&step.state),
                targets: step.root_qvalues.clone(),
                tau: step.temperature,
            });
        }
    }
}

/// Runs `updates` SGD steps on random minibatches and returns the mean loss,
/// or `None` when the buffer holds fewer than `batch_size` samples.
pub fn train_epoch(
    buffer: &ReplayBuffer,
    model: &mut LinearQEstimator,
    updates: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    if buffer.len() < batch_size {
        warn!(
            "replay buffer has {} samples, need {batch_size}; skipping training",
            buffer.len()
        );
        return None;
    }
    let mut total = 0.0;
    for _ in 0..updates {
        let batch = buffer.sample(rng, batch_size)?;
        total += model.sgd_step(&batch);
    }
    Some(total / updates.max(1) as f64)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Final state of a loop run.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub curve: Vec<CurveRow>,
    pub model: LinearQEstimator,
}

/// Alternates collection, training and greedy evaluation for `cfg.epochs`
/// epochs. The first collection uses the untrained (zero) model, so the
/// buffer is filled before any gradient step.
pub fn run_loop<E>(
    env: &E,
    choice: &PlannerChoice,
    cfg: &LoopConfig,
) -> Result<LoopOutcome, LoopError>
where
    E: EnvironmentModel,
    E::State: 'static,
{
    cfg.validate()?;
    choice.validate(env.action_count())?;
    let mut model = LinearQEstimator::new(
        env.action_count(),
        env.feature_len(),
        cfg.learning_rate,
        cfg.l2,
    );
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let collect_seed = derive_seed(cfg.seed, 1);
    let eval_seed = derive_seed(cfg.seed, 2);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut collected = 0usize;
    for epoch in 0..cfg.epochs {
        let episodes = run_episodes(
            env,
            choice,
            &model.view(env),
            ActionMode::Train,
            collect_seed,
            collected as u64..(collected + cfg.episodes_per_epoch) as u64,
            cfg.max_steps,
        )?;
        collected += episodes.len();
        store_episodes(env, &episodes, &mut buffer);
        let mean_tau = mean(
            episodes
                .iter()
                .flat_map(|e| e.steps.iter().map(|s| s.temperature)),
        );
        let loss = train_epoch(
            &buffer,
            &mut model,
            cfg.updates_per_epoch,
            cfg.batch_size,
            &mut rng,
        );
        let eval = run_episodes(
            env,
            choice,
            &model.view(env),
            ActionMode::Eval,
            eval_seed,
            (epoch * cfg.eval_episodes) as u64..((epoch + 1) * cfg.eval_episodes) as u64,
            cfg.max_steps,
        )?;
        let row = CurveRow {
            epoch: epoch + 1,
            episodes_collected: collected,
            mean_return: mean(eval.iter().map(EpisodeLog::total_reward)),
            mean_loss: loss.unwrap_or(f64::NAN),
            mean_tau,
        };
        debug!("{row:?}");
        curve.push(row);
    }
    Ok(LoopOutcome { curve, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainEnv, ValueBackup, ValueTable};
    use crate::estimator::TableEstimator;
    use crate::planner::{LeafInit, PlannerConfig, TemperatureConfig};

    fn quick() -> PlannerChoice {
        PlannerChoice::MaxEnt(PlannerConfig {
            n_passes: 20,
            depth_limit: 10,
            ..PlannerConfig::default()
        })
    }

    #[test]
    fn zero_epochs_give_an_empty_curve() {
        let env = ChainEnv::default();
        let out = run_loop(
            &env,
            &quick(),
            &LoopConfig {
                epochs: 0,
                ..LoopConfig::default()
            },
        )
        .unwrap();
        assert!(out.curve.is_empty());
    }

    #[test]
    fn no_episodes_leave_buffer_unchanged() {
        let env = ChainEnv::default();
        let model = LinearQEstimator::new(2, env.feature_len(), 0.1, 0.0);
        let eps = run_episodes(
            &env,
            &quick(),
            &model.view(&env),
            ActionMode::Train,
            0,
            0..0,
            30,
        )
        .unwrap();
        let mut buffer = ReplayBuffer::new(10);
        store_episodes(&env, &eps, &mut buffer);
        assert!(buffer.is_empty());
    }

    #[test]
    fn one_sample_per_decision() {
        let env = ChainEnv {
            length: 3,
            ..ChainEnv::default()
        };
        let model = LinearQEstimator::new(2, env.feature_len(), 0.1, 0.0);
        let eps = run_episodes(
            &env,
            &quick(),
            &model.view(&env),
            ActionMode::Train,
            4,
            0..1,
            3,
        )
        .unwrap();
        let mut buffer = ReplayBuffer::new(100);
        store_episodes(&env, &eps, &mut buffer);
        assert_eq!(eps[0].len(), 3);
        assert_eq!(buffer.len(), 3);
    }

    #[test]
    fn depth_one_targets_match_one_step_backup() {
        // With depth 1 every root child is a leaf initialized from the
        // estimator, so targets are r(s, a) + γ·0 through an oracle Q̂ ≡ r.
        let env = ChainEnv {
            length: 4,
            step_penalty: 0.1,
            ..ChainEnv::default()
        };
        let cfg = PlannerConfig {
            n_passes: 5,
            depth_limit: 1,
            adapt: false,
            shaping: false,
            leaf_init: LeafInit::Raw,
            temperature: TemperatureConfig {
                tau0: 0.5,
                ..TemperatureConfig::default()
            },
            ..PlannerConfig::default()
        };
        let table = ValueTable::compute(&env, 0..4, cfg.gamma, ValueBackup::Max, 1).unwrap();
        let oracle = TableEstimator::new(table.clone());
        let eps = run_episodes(
            &env,
            &PlannerChoice::MaxEnt(cfg),
            &oracle,
            ActionMode::Train,
            0,
            0..2,
            6,
        )
        .unwrap();
        for step in eps.iter().flat_map(|e| &e.steps) {
            assert_eq!(
                step.root_qvalues.as_slice(),
                table.qvalues(&step.state, 1).unwrap()
            );
        }
    }

    #[test]
    fn loop_is_deterministic() {
        let env = ChainEnv {
            length: 4,
            ..ChainEnv::default()
        };
        let cfg = LoopConfig {
            epochs: 2,
            episodes_per_epoch: 3,
            updates_per_epoch: 20,
            batch_size: 8,
            ..LoopConfig::default()
        };
        let a = run_loop(&env, &quick(), &cfg).unwrap();
        let b = run_loop(&env, &quick(), &cfg).unwrap();
        assert_eq!(format!("{:?}", a.curve), format!("{:?}", b.curve));
        assert_eq!(a.model, b.model);
        assert_eq!(a.curve[1].episodes_collected, 6);
    }

    #[test]
    fn temperature_feature_is_used() {
        // Targets depend only on τ; a shuffled ln τ column cannot fit them.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let taus: Vec<f64> = (0..64).map(|i| 0.01 * 1.1f64.powi(i)).collect();
        let mut shuffled = taus.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        let make = |tau_col: &[f64]| {
            let mut b = ReplayBuffer::new(100);
            for (i, &t) in taus.iter().enumerate() {
                b.push(Sample {
                    features: vec![1.0],
                    targets: vec![2.0 * t.ln()],
                    tau: tau_col[i],
                });
            }
            b
        };
        let (aligned, scrambled) = (make(&taus), make(&shuffled));
        let mut m1 = LinearQEstimator::new(1, 1, 0.02, 0.0);
        let mut m2 = m1.clone();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        let l1 = (0..20)
            .map(|_| train_epoch(&aligned, &mut m1, 100, 16, &mut r1).unwrap())
            .last()
            .unwrap();
        let l2 = (0..20)
            .map(|_| train_epoch(&scrambled, &mut m2, 100, 16, &mut r2).unwrap())
            .last()
            .unwrap();
        assert!(l1 < 0.01 * l2, "{l1} vs {l2}");
    }

    #[test]
    fn underfull_buffer_skips_training() {
        let b = ReplayBuffer::new(10);
        let mut m = LinearQEstimator::new(1, 1, 0.1, 0.0);
        assert!(train_epoch(&b, &mut m, 10, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn policy_targets_are_distributions() {
        assert_eq!(puct_policy_target(&[3, 1]).probs(), &[0.75, 0.25]);
        assert_eq!(puct_policy_target(&[0, 0]).probs(), &[0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        for _ in 0..1000 {
            let k = rng.random_range(1..8);
            let counts: Vec<u64> = (0..k).map(|_| rng.random_range(0..50)).collect();
            let p = puct_policy_target(&counts);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
