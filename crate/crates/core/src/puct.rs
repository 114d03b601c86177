//! PUCT baseline: prior-weighted upper-confidence selection, running-mean
//! backups of discounted returns and visit-count action selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{self, EntropyKind, PolicyDistribution};
use crate::envs::EnvironmentModel;
use crate::estimator::QEstimator;
use crate::planner::{ActionMode, Decision, Planner, PlannerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PuctConfig {
    pub c: f64,
    /// Temperature of the softmax prior over estimator values.
    pub tau_init: f64,
    pub tau_sel: f64,
    pub gamma: f64,
    pub n_passes: usize,
    pub depth_limit: usize,
    pub reuse_tree: bool,
    pub seed: u64,
}

impl Default for PuctConfig {
    fn default() -> Self {
        PuctConfig {
            c: 1.0,
            tau_init: 1.0,
            tau_sel: 0.2,
            gamma: 0.99,
            n_passes: 100,
            depth_limit: 50,
            reuse_tree: true,
            seed: 0,
        }
    }
}

impl PuctConfig {
    pub fn validate(&self, action_count: usize) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if action_count == 0 {
            return bad("environment has no actions");
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad("c must be positive");
        }
        if !(self.tau_init.is_finite() && self.tau_init >= entropy::MIN_TEMPERATURE) {
            return bad("tau_init must be positive");
        }
        if !(self.tau_sel > 0.0 && self.tau_sel <= 1.0) {
            return bad("tau_sel must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.n_passes == 0 || self.depth_limit == 0 {
            return bad("n_passes and depth_limit must be >= 1");
        }
        Ok(())
    }
}

/// `Q(s, a) + c·π(a|s)·√N(s) / (N(s, a) + 1)`.
pub fn puct_score(q: f64, prior: f64, parent_count: u64, child_count: u64, c: f64) -> f64 {
    q + c * prior * (parent_count as f64).sqrt() / (child_count as f64 + 1.0)
}

/// `softmax(Q̂ / τ_init)`.
pub fn puct_prior(q_hat: &[f64], tau_init: f64) -> Result<PolicyDistribution, PlannerError> {
    Ok(entropy::soft_policy(q_hat, EntropyKind::Shannon, tau_init)?)
}

/// Running mean after folding in the `count`-th sample.
pub fn running_mean(mean: f64, sample: f64, count: u64) -> f64 {
    if count <= 1 {
        return sample;
    }
    mean + (sample - mean) / count as f64
}

/// Normalized visit counts; uniform when nothing was visited.
pub fn visit_distribution(counts: &[u64]) -> PolicyDistribution {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return PolicyDistribution::uniform(counts.len());
    }
    PolicyDistribution::from_probs_unchecked(
        counts.iter().map(|&n| n as f64 / total as f64).collect(),
    )
}

/// Sampling weights `N(s, a)^{1/τ_sel}` computed in log space.
pub fn sharpened_visits(counts: &[u64], tau_sel: f64) -> PolicyDistribution {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return PolicyDistribution::uniform(counts.len());
    }
    let top = (max as f64).ln();
    let w: Vec<f64> = counts
        .iter()
        .map(|&n| {
            if n == 0 {
                0.0
            } else {
                (((n as f64).ln() - top) / tau_sel).exp()
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    PolicyDistribution::from_probs_unchecked(w.into_iter().map(|x| x / z).collect())
}

/// Eval picks the most visited action (first index on ties); train samples
/// from the sharpened visit counts. Draws one variate in both modes.
pub fn puct_action<R: Rng>(counts: &[u64], tau_sel: f64, mode: ActionMode, rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    match mode {
        ActionMode::Eval => {
            let mut best = 0;
            for (a, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = a;
                }
            }
            best
        }
        ActionMode::Train => sharpened_visits(counts, tau_sel).sample_with(u),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuctNode<S> {
    pub state: S,
    pub edge_reward: f64,
    pub count: u64,
    /// Mean discounted return observed through the edge entering this node.
    pub qvalue: f64,
    pub prior: Vec<f64>,
    pub children: Vec<usize>,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct PuctTree<S> {
    nodes: Vec<PuctNode<S>>,
}

impl<S: Clone> PuctTree<S> {
    pub fn new(state: S) -> Self {
        PuctTree {
            nodes: vec![PuctNode {
                state,
                edge_reward: 0.0,
                count: 0,
                qvalue: 0.0,
                prior: Vec::new(),
                children: Vec::new(),
                terminal: false,
            }],
        }
    }

    pub fn root(&self) -> &PuctNode<S> {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &PuctNode<S> {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn child_counts(&self, id: usize) -> Vec<u64> {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| self.nodes[c].count)
            .collect()
    }

    pub fn child_qvalues(&self, id: usize) -> Vec<f64> {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| self.nodes[c].qvalue)
            .collect()
    }

    /// Highest-scoring child (first index on ties).
    pub fn best_child(&self, id: usize, c: f64) -> usize {
        let node = &self.nodes[id];
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (a, &child) in node.children.iter().enumerate() {
            let ch = &self.nodes[child];
            let s = puct_score(ch.qvalue, node.prior[a], node.count, ch.count, c);
            if s > best_score {
                best = a;
                best_score = s;
            }
        }
        best
    }

    /// Expands `id`, sets the prior and initial child values from `q_hat`.
    fn expand<E>(
        &mut self,
        id: usize,
        env: &E,
        q_hat: &[f64],
        tau_init: f64,
    ) -> Result<(), PlannerError>
    where
        E: EnvironmentModel<State = S>,
    {
        if self.nodes[id].terminal {
            return Err(PlannerError::ExpandTerminal);
        }
        if !self.nodes[id].children.is_empty() {
            return Err(PlannerError::AlreadyExpanded(id));
        }
        let state = self.nodes[id].state.clone();
        let mut children = Vec::with_capacity(q_hat.len());
        for (a, &q) in q_hat.iter().enumerate() {
            let t = env.step(&state, a)?;
            children.push(self.nodes.len());
            self.nodes.push(PuctNode {
                state: t.state,
                edge_reward: t.reward,
                count: 0,
                qvalue: if t.terminal { t.reward } else { q },
                prior: Vec::new(),
                children: Vec::new(),
                terminal: t.terminal,
            });
        }
        self.nodes[id].prior = puct_prior(q_hat, tau_init)?.into_inner();
        self.nodes[id].children = children;
        Ok(())
    }

    /// Folds the bootstrapped return `leaf_value` into every node on `path`.
    pub fn backup(&mut self, path: &[usize], leaf_value: f64, gamma: f64) {
        let mut ret = leaf_value;
        for &id in path.iter().rev() {
            let node = &mut self.nodes[id];
            node.count += 1;
            if id != 0 {
                ret = node.edge_reward + gamma * ret;
                node.qvalue = running_mean(node.qvalue, ret, node.count);
            }
        }
    }

    fn into_subtree(self, id: usize) -> PuctTree<S> {
        let mut old: Vec<Option<PuctNode<S>>> = self.nodes.into_iter().map(Some).collect();
        let mut nodes = Vec::new();
        let mut queue = std::collections::VecDeque::from([id]);
        while let Some(old_id) = queue.pop_front() {
            let node = old[old_id].take().expect("tree nodes have a single parent");
            queue.extend(node.children.iter().copied());
            nodes.push(node);
        }
        let mut next = 1;
        for node in nodes.iter_mut() {
            let k = node.children.len();
            node.children = (next..next + k).collect();
            next += k;
        }
        nodes[0].edge_reward = 0.0;
        PuctTree { nodes }
    }
}

pub struct PuctPlanner<S> {
    config: PuctConfig,
    rng: ChaCha8Rng,
    tree: Option<PuctTree<S>>,
    mode: ActionMode,
}

impl<S: Clone + PartialEq> PuctPlanner<S> {
    pub fn new(config: PuctConfig, action_count: usize) -> Result<Self, PlannerError> {
        config.validate(action_count)?;
        Ok(PuctPlanner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            tree: None,
            mode: ActionMode::Train,
            config,
        })
    }

    pub fn config(&self) -> &PuctConfig {
        &self.config
    }

    pub fn tree(&self) -> Option<&PuctTree<S>> {
        self.tree.as_ref()
    }

    pub fn search<E>(
        &mut self,
        state: &S,
        env: &E,
        estimator: &dyn QEstimator<S>,
    ) -> Result<(PuctTree<S>, usize), PlannerError>
    where
        E: EnvironmentModel<State = S>,
    {
        let cfg = &self.config;
        let k = env.action_count();
        let mut tree = match self.tree.take() {
            Some(t) if cfg.reuse_tree && t.root().state == *state => t,
            _ => PuctTree::new(state.clone()),
        };
        for _ in 0..cfg.n_passes {
            let mut path = vec![0];
            let mut id = 0;
            while !tree.nodes[id].children.is_empty()
                && !tree.nodes[id].terminal
                && path.len() <= cfg.depth_limit
            {
                id = tree.nodes[id].children[tree.best_child(id, cfg.c)];
                path.push(id);
            }
            let leaf_value = if tree.nodes[id].terminal {
                0.0
            } else {
                let q_hat = estimator.evaluate_all(&tree.nodes[id].state, k, cfg.tau_init);
                if tree.nodes[id].children.is_empty() && path.len() <= cfg.depth_limit {
                    tree.expand(id, env, &q_hat, cfg.tau_init)?;
                }
                q_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            tree.backup(&path, leaf_value, cfg.gamma);
        }
        let action = puct_action(&tree.child_counts(0), cfg.tau_sel, self.mode, &mut self.rng);
        Ok((tree, action))
    }
}

impl<E> Planner<E> for PuctPlanner<E::State>
where
    E: EnvironmentModel,
{
    fn plan(
        &mut self,
        state: &E::State,
        env: &E,
        estimator: &dyn QEstimator<E::State>,
    ) -> Result<Decision, PlannerError> {
        let (tree, action) = self.search(state, env, estimator)?;
        let decision = Decision {
            action,
            root_qvalues: tree.child_qvalues(0),
            root_visits: tree.child_counts(0),
            temperature: self.config.tau_init,
        };
        if self.config.reuse_tree {
            let child = tree.root().children[action];
            if !tree.node(child).terminal {
                self.tree = Some(tree.into_subtree(child));
            }
        }
        Ok(decision)
    }

    fn reset(&mut self) {
        self.tree = None;
    }

    fn set_mode(&mut self, mode: ActionMode) {
        self.mode = mode;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainEnv, TreeEnv};
    use crate::estimator::{RewardEstimator, ZeroEstimator};

    #[test]
    fn score_arithmetic() {
        assert_eq!(puct_score(0.3, 0.9, 0, 5, 2.0), 0.3);
        let s: Vec<f64> = [(0.0, 0.75, 3), (1.0, 0.25, 1)]
            .iter()
            .map(|&(q, p, n)| puct_score(q, p, 16, n, 1.0))
            .collect();
        assert_eq!(s, vec![0.75, 1.5]);
    }

    #[test]
    fn prior_shapes() {
        assert_eq!(puct_prior(&[2.0; 4], 0.3).unwrap().probs(), &[0.25; 4]);
        for p in puct_prior(&[1.0, -3.0, 0.5], 1e6).unwrap().iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
        let p = puct_prior(&[1.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn running_mean_matches_batch_mean() {
        let samples = [0.3, -1.2, 4.5, 0.0, 2.2, -0.7, 1.1, 3.3, -2.0, 0.9];
        let mut mean = 123.0;
        for (i, &x) in samples.iter().enumerate() {
            mean = running_mean(mean, x, i as u64 + 1);
            if i == 0 {
                assert_eq!(mean, 0.3);
            }
            if i == 1 {
                assert!((mean - (0.3 - 1.2) / 2.0).abs() < 1e-15);
            }
        }
        let batch = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean - batch).abs() < 1e-12);
    }

    #[test]
    fn action_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(puct_action(&[5, 5], 0.5, ActionMode::Eval, &mut rng), 0);
        assert_eq!(puct_action(&[1, 7, 7], 0.5, ActionMode::Eval, &mut rng), 1);
        assert_eq!(sharpened_visits(&[3, 1], 1.0).probs(), &[0.75, 0.25]);
        assert_eq!(sharpened_visits(&[0, 0, 0], 0.5).probs(), &[1.0 / 3.0; 3]);
        let p = sharpened_visits(&[9, 1], 0.5);
        assert!((p[0] - 81.0 / 82.0).abs() < 1e-12);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| puct_action(&[9, 1], 0.5, ActionMode::Train, &mut rng) == 1)
            .count();
        let p1 = 1.0 / 82.0;
        let sd = (n as f64 * p1 * (1.0 - p1)).sqrt();
        assert!((hits as f64 - n as f64 * p1).abs() < 3.0 * sd);
    }

    #[test]
    fn visit_targets() {
        assert_eq!(visit_distribution(&[3, 1]).probs(), &[0.75, 0.25]);
        assert_eq!(visit_distribution(&[0, 0]).probs(), &[0.5, 0.5]);
    }

    #[test]
    fn counts_and_priors_are_consistent() {
        let env = TreeEnv {
            branching: 3,
            seed: 2,
            ..TreeEnv::default()
        };
        let cfg = PuctConfig {
            n_passes: 50,
            depth_limit: 10,
            reuse_tree: false,
            ..PuctConfig::default()
        };
        let mut planner = PuctPlanner::new(cfg, 3).unwrap();
        let (tree, _) = planner.search(&0, &env, &RewardEstimator(&env)).unwrap();
        assert_eq!(tree.root().count, 50);
        // The first pass only expands the root.
        assert_eq!(tree.child_counts(0).iter().sum::<u64>(), 49);
        for id in 0..tree.len() {
            let node = tree.node(id);
            if !node.children.is_empty() {
                assert!((node.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(node.qvalue.is_finite());
        }
    }

    #[test]
    fn zero_exploration_is_greedy_by_value() {
        // With c → 0 the search keeps following the best current estimate.
        let env = TreeEnv {
            branching: 2,
            seed: 9,
            terminal_depth: Some(2),
            ..TreeEnv::default()
        };
        let cfg = PuctConfig {
            c: 1e-300,
            n_passes: 20,
            reuse_tree: false,
            ..PuctConfig::default()
        };
        let mut planner = PuctPlanner::new(cfg, 2).unwrap();
        let (tree, _) = planner.search(&0, &env, &ZeroEstimator).unwrap();
        let q = tree.child_qvalues(0);
        let counts = tree.child_counts(0);
        let greedy = if q[0] >= q[1] { 0 } else { 1 };
        assert!(counts[greedy] >= counts[1 - greedy]);
    }

    #[test]
    fn deterministic_under_seed() {
        let env = ChainEnv::default();
        let run = || {
            let cfg = PuctConfig {
                n_passes: 30,
                depth_limit: 10,
                seed: 3,
                ..PuctConfig::default()
            };
            let mut planner = PuctPlanner::new(cfg, 2).unwrap();
            crate::envs::run_episode(
                &env,
                |s: &usize| {
                    Planner::<ChainEnv>::plan(&mut planner, s, &env, &ZeroEstimator)
                        .map(|d| d.action)
                },
                20,
            )
            .unwrap()
            .actions
        };
        assert_eq!(run(), run());
    }
}
