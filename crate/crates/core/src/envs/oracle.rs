//! Finite-horizon value iteration by backward induction.
//!
//! `V_0 = 0`, `Q_h(s, a) = r(s, a) + γ·V_{h-1}(s')` (no future value after a
//! terminal transition) and `V_h(s) = Ω*_τ(Q_h(s, ·))`, or `max_a Q_h(s, a)`
//! for the unregularized backup. This is the ground truth the planners are
//! checked against.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{EnvError, EnvironmentModel};
use crate::entropy::{soft_value, EntropyError, EntropyKind};

/// Upper bound on the number of `(state, horizon)` pairs a table may hold.
pub const MAX_STATE_HORIZON_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("state space too large: more than {limit} (state, horizon) pairs")]
    TooLarge { limit: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueBackup {
    Soft { kind: EntropyKind, tau: f64 },
    Max,
}

impl ValueBackup {
    fn apply(self, q: &[f64]) -> Result<f64, EntropyError> {
        match self {
            ValueBackup::Soft { kind, tau } => soft_value(q, kind, tau),
            ValueBackup::Max => Ok(q.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValueTable<S> {
    pub gamma: f64,
    pub horizon: usize,
    pub backup: ValueBackup,
    values: HashMap<(S, usize), f64>,
    qvalues: HashMap<(S, usize), Vec<f64>>,
}

impl<S> ValueTable<S>
where
    S: Clone + Eq + std::hash::Hash,
{
    /// Solves `V_h` for every state reachable from `roots` in `k` steps at
    /// horizon `h = horizon - k`.
    pub fn compute<E>(
        env: &E,
        roots: impl IntoIterator<Item = S>,
        gamma: f64,
        backup: ValueBackup,
        horizon: usize,
    ) -> Result<Self, OracleError>
    where
        E: EnvironmentModel<State = S>,
    {
        let k = env.action_count();
        // layers[d] = non-terminal states reachable in exactly d steps.
        let mut layers: Vec<Vec<S>> = Vec::with_capacity(horizon);
        let mut frontier: Vec<S> = Vec::new();
        let mut seen = HashSet::new();
        for r in roots {
            if seen.insert(r.clone()) {
                frontier.push(r);
            }
        }
        let mut pairs = 0usize;
        for _ in 0..horizon {
            pairs += frontier.len();
            if pairs > MAX_STATE_HORIZON_PAIRS {
                return Err(OracleError::TooLarge {
                    limit: MAX_STATE_HORIZON_PAIRS,
                });
            }
            let mut next = Vec::new();
            let mut next_seen = HashSet::new();
            for s in &frontier {
                for a in 0..k {
                    let t = env.step(s, a)?;
                    if !t.terminal && next_seen.insert(t.state.clone()) {
                        next.push(t.state);
                    }
                }
            }
            layers.push(std::mem::replace(&mut frontier, next));
        }

        let mut table = ValueTable {
            gamma,
            horizon,
            backup,
            values: HashMap::new(),
            qvalues: HashMap::new(),
        };
        for (depth, layer) in layers.iter().enumerate().rev() {
            let h = horizon - depth;
            for s in layer {
                if table.values.contains_key(&(s.clone(), h)) {
                    continue;
                }
                let mut q = Vec::with_capacity(k);
                for a in 0..k {
                    let t = env.step(s, a)?;
                    let future = if t.terminal || h == 1 {
                        0.0
                    } else {
                        table.values[&(t.state, h - 1)]
                    };
                    q.push(t.reward + gamma * future);
                }
                let v = backup.apply(&q)?;
                table.values.insert((s.clone(), h), v);
                table.qvalues.insert((s.clone(), h), q);
            }
        }
        Ok(table)
    }

    /// `V_h(s)`; zero at horizon 0.
    pub fn value(&self, state: &S, h: usize) -> Option<f64> {
        if h == 0 {
            return Some(0.0);
        }
        self.values.get(&(state.clone(), h)).copied()
    }

    pub fn qvalues(&self, state: &S, h: usize) -> Option<&[f64]> {
        self.qvalues.get(&(state.clone(), h)).map(Vec::as_slice)
    }

    /// Largest `|Q|` over all stored entries (0 for an empty table).
    pub fn max_abs_q(&self) -> f64 {
        self.qvalues
            .values()
            .flatten()
            .fold(0.0, |m, q| m.max(q.abs()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Soft values from the environment's initial state.
pub fn exact_soft_values<E>(
    env: &E,
    gamma: f64,
    tau: f64,
    kind: EntropyKind,
    horizon: usize,
) -> Result<ValueTable<E::State>, OracleError>
where
    E: EnvironmentModel,
{
    ValueTable::compute(
        env,
        [env.initial_state()],
        gamma,
        ValueBackup::Soft { kind, tau },
        horizon,
    )
}
