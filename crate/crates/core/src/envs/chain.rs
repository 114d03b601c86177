use serde::{Deserialize, Serialize};

use super::{check_action, EnvError, EnvironmentModel, Transition};

/// Moves one position towards the goal.
pub const ADVANCE: usize = 0;
/// Takes the distractor exit at position 0; elsewhere falls back to 0.
pub const DISTRACT: usize = 1;

/// A corridor of `length` steps with a goal at the far end.
///
/// Positions are `0..=length`; reaching `length` pays `goal_reward` and ends
/// the episode. Taking [`DISTRACT`] at position 0 pays `distractor_reward`
/// and also ends it. [`DISTRACT`] anywhere else sends the agent back to
/// position 0, and actions `2..n_actions` keep it in place. Every transition
/// that neither reaches the goal nor exits costs `step_penalty`. All rewards
/// are multiplied by `reward_scale`.
///
/// With no step penalty, advancing everywhere is optimal whenever
/// `γ^(length-1)·goal_reward > distractor_reward`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainEnv {
    pub length: usize,
    pub n_actions: usize,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub distractor_reward: f64,
    pub reward_scale: f64,
}

impl Default for ChainEnv {
    fn default() -> Self {
        ChainEnv {
            length: 8,
            n_actions: 2,
            step_penalty: 0.0,
            goal_reward: 1.0,
            distractor_reward: 0.1,
            reward_scale: 1.0,
        }
    }
}

impl ChainEnv {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.length == 0 {
            return Err(EnvError::Config("chain length must be >= 1".into()));
        }
        if self.n_actions < 2 {
            return Err(EnvError::Config("chain needs at least 2 actions".into()));
        }
        let finite = [
            self.step_penalty,
            self.goal_reward,
            self.distractor_reward,
            self.reward_scale,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(EnvError::Config("chain rewards must be finite".into()));
        }
        Ok(())
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.reward_scale = scale;
        self
    }
}

impl EnvironmentModel for ChainEnv {
    type State = usize;

    fn action_count(&self) -> usize {
        self.n_actions
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn step(&self, &state: &usize, action: usize) -> Result<Transition<usize>, EnvError> {
        check_action(action, self.n_actions)?;
        if state > self.length {
            return Err(EnvError::InvalidState(state.to_string()));
        }
        if state == self.length {
            return Err(EnvError::TerminalState(state.to_string()));
        }
        let (next, reward, terminal) = match action {
            ADVANCE if state + 1 == self.length => (self.length, self.goal_reward, true),
            ADVANCE => (state + 1, -self.step_penalty, false),
            DISTRACT if state == 0 => (0, self.distractor_reward, true),
            DISTRACT => (0, -self.step_penalty, false),
            _ => (state, -self.step_penalty, false),
        };
        Ok(Transition {
            state: next,
            reward: reward * self.reward_scale,
            terminal,
        })
    }

    fn feature_len(&self) -> usize {
        self.length + 1
    }

    fn features(&self, &state: &usize) -> Vec<f64> {
        let mut f = vec![0.0; self.length + 1];
        if let Some(x) = f.get_mut(state) {
            *x = 1.0;
        }
        f
    }
}
