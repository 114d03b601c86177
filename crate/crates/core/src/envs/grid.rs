use serde::{Deserialize, Serialize};

use super::{check_action, EnvError, EnvironmentModel, Transition};

/// A 4-connected grid world. Actions are up, right, down, left.
///
/// Moving into a wall or off the grid leaves the agent in place and still
/// costs `step_penalty`. Entering `goal` pays `goal_reward` and terminates.
/// States are cell indices `y * width + x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridEnv {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<(usize, usize)>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub step_penalty: f64,
    pub goal_reward: f64,
}

impl Default for GridEnv {
    fn default() -> Self {
        GridEnv {
            width: 4,
            height: 4,
            walls: vec![(1, 1), (2, 1), (1, 2)],
            start: (0, 0),
            goal: (3, 3),
            step_penalty: 0.01,
            goal_reward: 1.0,
        }
    }
}

const MOVES: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

impl GridEnv {
    pub fn validate(&self) -> Result<(), EnvError> {
        let inside = |(x, y): (usize, usize)| x < self.width && y < self.height;
        if self.width == 0 || self.height == 0 {
            return Err(EnvError::Config("grid must be non-empty".into()));
        }
        if !inside(self.start) || !inside(self.goal) {
            return Err(EnvError::Config(
                "start and goal must lie on the grid".into(),
            ));
        }
        if self.walls.contains(&self.start) || self.walls.contains(&self.goal) {
            return Err(EnvError::Config("start and goal cannot be walls".into()));
        }
        if self.start == self.goal {
            return Err(EnvError::Config("start and goal must differ".into()));
        }
        Ok(())
    }

    fn index(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }
}

impl EnvironmentModel for GridEnv {
    type State = usize;

    fn action_count(&self) -> usize {
        4
    }

    fn initial_state(&self) -> usize {
        self.index(self.start)
    }

    fn step(&self, &state: &usize, action: usize) -> Result<Transition<usize>, EnvError> {
        check_action(action, 4)?;
        if state >= self.width * self.height || self.walls.contains(&self.cell(state)) {
            return Err(EnvError::InvalidState(state.to_string()));
        }
        if state == self.index(self.goal) {
            return Err(EnvError::TerminalState(state.to_string()));
        }
        let (x, y) = self.cell(state);
        let (dx, dy) = MOVES[action];
        let nx = x.checked_add_signed(dx).filter(|&v| v < self.width);
        let ny = y.checked_add_signed(dy).filter(|&v| v < self.height);
        let next = match (nx, ny) {
            (Some(nx), Some(ny)) if !self.walls.contains(&(nx, ny)) => (nx, ny),
            _ => (x, y),
        };
        if next == self.goal {
            Ok(Transition {
                state: self.index(next),
                reward: self.goal_reward,
                terminal: true,
            })
        } else {
            Ok(Transition {
                state: self.index(next),
                reward: -self.step_penalty,
                terminal: false,
            })
        }
    }

    fn feature_len(&self) -> usize {
        self.width * self.height
    }

    fn features(&self, &state: &usize) -> Vec<f64> {
        let mut f = vec![0.0; self.width * self.height];
        if let Some(x) = f.get_mut(state) {
            *x = 1.0;
        }
        f
    }
}
