//! Planner selection and episode playback shared by the learning loop and the
//! experiment harness.

use serde::{Deserialize, Serialize};

use crate::envs::EnvironmentModel;
use crate::estimator::QEstimator;
use crate::planner::{ActionMode, MaxEntPlanner, Planner, PlannerConfig, PlannerError};
use crate::puct::{PuctConfig, PuctPlanner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "planner", rename_all = "snake_case")]
pub enum PlannerChoice {
    MaxEnt(PlannerConfig),
    Puct(PuctConfig),
}

impl PlannerChoice {
    pub fn seed(&self) -> u64 {
        match self {
            PlannerChoice::MaxEnt(c) => c.seed,
            PlannerChoice::Puct(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            PlannerChoice::MaxEnt(c) => c.seed = seed,
            PlannerChoice::Puct(c) => c.seed = seed,
        }
        out
    }

    pub fn validate(&self, action_count: usize) -> Result<(), PlannerError> {
        match self {
            PlannerChoice::MaxEnt(c) => c.validate(action_count),
            PlannerChoice::Puct(c) => c.validate(action_count),
        }
    }

    pub fn build<E>(&self, action_count: usize) -> Result<Box<dyn Planner<E>>, PlannerError>
    where
        E: EnvironmentModel,
        E::State: 'static,
    {
        Ok(match self {
            PlannerChoice::MaxEnt(c) => {
                Box::new(MaxEntPlanner::<E::State>::new(c.clone(), action_count)?)
            }
            PlannerChoice::Puct(c) => {
                Box::new(PuctPlanner::<E::State>::new(c.clone(), action_count)?)
            }
        })
    }
}

/// One decision taken during an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub root_qvalues: Vec<f64>,
    pub root_visits: Vec<u64>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog<S> {
    pub steps: Vec<StepRecord<S>>,
    pub terminated: bool,
}

impl<S> EpisodeLog<S> {
    /// Undiscounted sum of rewards.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Mean planner temperature over the episode's decisions (0 if none).
    pub fn mean_temperature(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.temperature).sum::<f64>() / self.steps.len() as f64
    }
}

/// Plays one episode from the initial state, planning before every step.
/// The planner is reset first.
pub fn play_episode<E: EnvironmentModel>(
    env: &E,
    planner: &mut dyn Planner<E>,
    estimator: &dyn QEstimator<E::State>,
    mode: ActionMode,
    max_steps: usize,
) -> Result<EpisodeLog<E::State>, PlannerError> {
    planner.reset();
    planner.set_mode(mode);
    let mut state = env.initial_state();
    let mut steps = Vec::new();
    let mut terminated = false;
    while steps.len() < max_steps {
        let d = planner.plan(&state, env, estimator)?;
        let t = env.step(&state, d.action)?;
        steps.push(StepRecord {
            state: std::mem::replace(&mut state, t.state),
            action: d.action,
            reward: t.reward,
            root_qvalues: d.root_qvalues,
            root_visits: d.root_visits,
            temperature: d.temperature,
        });
        if t.terminal {
            terminated = true;
            break;
        }
    }
    Ok(EpisodeLog { steps, terminated })
}

/// Deterministic seed for the `index`-th stream derived from `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
