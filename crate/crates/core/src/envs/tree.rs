use serde::{Deserialize, Serialize};

use super::{check_action, EnvError, EnvironmentModel, Transition};

/// A full `branching`-ary tree with pseudo-random edge rewards.
///
/// States are heap indices: the root is 0 and action `a` from state `s`
/// leads to `s * branching + 1 + a`. Edge rewards are a hash of
/// `(seed, child index)` mapped uniformly into `[reward_low, reward_high)`.
/// When `terminal_depth` is set, children at that depth are terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeEnv {
    pub branching: usize,
    pub seed: u64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub terminal_depth: Option<usize>,
}

impl Default for TreeEnv {
    fn default() -> Self {
        TreeEnv {
            branching: 2,
            seed: 0,
            reward_low: -1.0,
            reward_high: 1.0,
            terminal_depth: None,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TreeEnv {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.branching < 1 {
            return Err(EnvError::Config("tree branching must be >= 1".into()));
        }
        if !(self.reward_low.is_finite()
            && self.reward_high.is_finite()
            && self.reward_low <= self.reward_high)
        {
            return Err(EnvError::Config(
                "tree reward range must be finite and ordered".into(),
            ));
        }
        Ok(())
    }

    /// Depth of a heap index (root has depth 0).
    pub fn depth(&self, mut state: usize) -> usize {
        let mut depth = 0;
        while state > 0 {
            state = (state - 1) / self.branching;
            depth += 1;
        }
        depth
    }

    pub fn edge_reward(&self, child: usize) -> f64 {
        let h = splitmix64(self.seed ^ splitmix64(child as u64));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        self.reward_low + (self.reward_high - self.reward_low) * u
    }
}

impl EnvironmentModel for TreeEnv {
    type State = usize;

    fn action_count(&self) -> usize {
        self.branching
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn step(&self, &state: &usize, action: usize) -> Result<Transition<usize>, EnvError> {
        check_action(action, self.branching)?;
        let depth = self.depth(state);
        if self.terminal_depth.is_some_and(|d| depth >= d) {
            return Err(EnvError::TerminalState(state.to_string()));
        }
        let child = state
            .checked_mul(self.branching)
            .and_then(|x| x.checked_add(1 + action))
            .ok_or(EnvError::StateOverflow)?;
        Ok(Transition {
            state: child,
            reward: self.edge_reward(child),
            terminal: self.terminal_depth.is_some_and(|d| depth + 1 >= d),
        })
    }

    fn feature_len(&self) -> usize {
        0
    }

    fn features(&self, _state: &usize) -> Vec<f64> {
        Vec::new()
    }
}
