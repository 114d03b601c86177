//! Deterministic desk-scale environments with a perfect-model interface.

mod chain;
mod grid;
mod oracle;
mod tree;

use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{ChainEnv, ADVANCE, DISTRACT};
pub use grid::GridEnv;
pub use oracle::{
    exact_soft_values, OracleError, ValueBackup, ValueTable, MAX_STATE_HORIZON_PAIRS,
};
pub use tree::TreeEnv;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("state {0} is terminal")]
    TerminalState(String),
    #[error("state {0} is not part of the environment")]
    InvalidState(String),
    #[error("state index overflow")]
    StateOverflow,
    #[error("invalid environment parameters: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// A deterministic model `step(state, action) -> (state, reward, terminal)`.
///
/// `step` must be a pure function of its arguments.
pub trait EnvironmentModel: Sync {
    type State: Clone + PartialEq + Eq + Hash + Debug + Send + Sync;

    fn action_count(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    fn step(&self, state: &Self::State, action: usize)
        -> Result<Transition<Self::State>, EnvError>;

    /// Length of the vector returned by [`EnvironmentModel::features`].
    fn feature_len(&self) -> usize;

    fn features(&self, state: &Self::State) -> Vec<f64>;
}

pub(crate) fn check_action(action: usize, count: usize) -> Result<(), EnvError> {
    if action < count {
        Ok(())
    } else {
        Err(EnvError::InvalidAction { action, count })
    }
}

/// Environment fixtures addressable by name from experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvSpec {
    Chain(ChainEnv),
    Grid(GridEnv),
    Tree(TreeEnv),
}

impl EnvSpec {
    pub const FIXTURES: [&'static str; 4] = ["chain", "chain_x100", "grid", "tree"];

    /// Looks up a shipped fixture by name.
    pub fn fixture(name: &str) -> Option<EnvSpec> {
        Some(match name {
            "chain" => EnvSpec::Chain(ChainEnv::default()),
            "chain_x100" => EnvSpec::Chain(ChainEnv::default().with_scale(100.0)),
            "grid" => EnvSpec::Grid(GridEnv::default()),
            "tree" => EnvSpec::Tree(TreeEnv {
                terminal_depth: Some(8),
                ..TreeEnv::default()
            }),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            EnvSpec::Chain(e) => e.validate(),
            EnvSpec::Grid(e) => e.validate(),
            EnvSpec::Tree(e) => e.validate(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Chain(e) => format!("chain_l{}_x{}", e.length, e.reward_scale),
            EnvSpec::Grid(e) => format!("grid_{}x{}", e.width, e.height),
            EnvSpec::Tree(e) => format!("tree_k{}_s{}", e.branching, e.seed),
        }
    }
}

impl EnvironmentModel for EnvSpec {
    type State = usize;

    fn action_count(&self) -> usize {
        match self {
            EnvSpec::Chain(e) => e.action_count(),
            EnvSpec::Grid(e) => e.action_count(),
            EnvSpec::Tree(e) => e.action_count(),
        }
    }

    fn initial_state(&self) -> usize {
        match self {
            EnvSpec::Chain(e) => e.initial_state(),
            EnvSpec::Grid(e) => e.initial_state(),
            EnvSpec::Tree(e) => e.initial_state(),
        }
    }

    fn step(&self, state: &usize, action: usize) -> Result<Transition<usize>, EnvError> {
        match self {
            EnvSpec::Chain(e) => e.step(state, action),
            EnvSpec::Grid(e) => e.step(state, action),
            EnvSpec::Tree(e) => e.step(state, action),
        }
    }

    fn feature_len(&self) -> usize {
        match self {
            EnvSpec::Chain(e) => e.feature_len(),
            EnvSpec::Grid(e) => e.feature_len(),
            EnvSpec::Tree(e) => e.feature_len(),
        }
    }

    fn features(&self, state: &usize) -> Vec<f64> {
        match self {
            EnvSpec::Chain(e) => e.features(state),
            EnvSpec::Grid(e) => e.features(state),
            EnvSpec::Tree(e) => e.features(state),
        }
    }
}

/// One rollout. `states[i]` is the state in which `actions[i]` was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminated: bool,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Undiscounted sum of rewards.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.rewards
            .iter()
            .rev()
            .fold(0.0, |acc, r| r + gamma * acc)
    }
}

/// Rolls out `policy` from the initial state for at most `max_steps` steps,
/// stopping early at a terminal transition.
pub fn run_episode<E, P, Err>(
    env: &E,
    mut policy: P,
    max_steps: usize,
) -> Result<Trajectory<E::State>, Err>
where
    E: EnvironmentModel,
    P: FnMut(&E::State) -> Result<usize, Err>,
    Err: From<EnvError>,
{
    let mut trajectory = Trajectory {
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        terminated: false,
    };
    let mut state = env.initial_state();
    for _ in 0..max_steps {
        let action = policy(&state)?;
        let t = env.step(&state, action)?;
        trajectory
            .states
            .push(std::mem::replace(&mut state, t.state));
        trajectory.actions.push(action);
        trajectory.rewards.push(t.reward);
        if t.terminal {
            trajectory.terminated = true;
            break;
        }
    }
    Ok(trajectory)
}
