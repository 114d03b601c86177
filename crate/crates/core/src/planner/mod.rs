//! Maximum-entropy tree search with adaptive temperature.
//!
//! One planner covers the adaptive Shannon and Tsallis searches as well as
//! their fixed-temperature baselines: the baselines switch off adaptation and
//! shaping and initialize leaves from the centered, rescaled estimator output.

pub mod temperature;
pub mod tree;

use log::trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{self, EntropyError, EntropyKind};
use crate::envs::{EnvError, EnvironmentModel};
use crate::estimator::QEstimator;
use crate::root::RootError;

pub use temperature::{
    adapt_temperature, mean_entropy, smooth_temperature, solve_temperature, Adaptation,
    TemperatureConfig, TemperatureController,
};
pub use tree::{e3w_policy, exploration_weight, Node, NodeId, SearchTree, SelectParams, Selection};

/// `τ_sel` at or below this value means greedy action selection.
pub const EVAL_TAU_SEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("cannot expand a terminal node")]
    ExpandTerminal,
    #[error("node {0} is already expanded")]
    AlreadyExpanded(NodeId),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("temperature search failed: {0}")]
    Root(#[from] RootError),
}

/// How freshly expanded children get their initial Q-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LeafInit {
    /// `Q̂(s, a, τ̃)` as is.
    Raw,
    /// `(Q̂(s, a) - Ω*_{τ_init}(Q̂(s, ·))) / τ_init`.
    Ments { tau_init: f64 },
}

/// Parameters of the soft backup shared by backprop and recalculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupRule {
    pub kind: EntropyKind,
    pub gamma: f64,
    /// Subtract `τ·H_max` from every backed-up value.
    pub shaping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Sample the final action from the sharpened exploration policy.
    #[default]
    Train,
    /// Take the best action.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub entropy: EntropyKind,
    pub n_passes: usize,
    pub depth_limit: usize,
    pub epsilon: f64,
    pub tau_sel: f64,
    pub gamma: f64,
    pub leaf_init: LeafInit,
    pub shaping: bool,
    pub e3w: bool,
    /// When false the temperature stays at `temperature.tau0`.
    pub adapt: bool,
    pub reuse_tree: bool,
    pub seed: u64,
    pub temperature: TemperatureConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            entropy: EntropyKind::Shannon,
            n_passes: 100,
            depth_limit: 50,
            epsilon: 0.01,
            tau_sel: 0.5,
            gamma: 0.99,
            leaf_init: LeafInit::Raw,
            shaping: true,
            e3w: true,
            adapt: true,
            reuse_tree: true,
            seed: 0,
            temperature: TemperatureConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, action_count: usize) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if action_count == 0 {
            return bad("environment has no actions");
        }
        if self.n_passes == 0 {
            return bad("n_passes must be >= 1");
        }
        if self.depth_limit == 0 {
            return bad("depth_limit must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.tau_sel > 0.0 && self.tau_sel <= 1.0) {
            return bad("tau_sel must lie in (0, 1]");
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad("epsilon must be finite and >= 0");
        }
        if let LeafInit::Ments { tau_init } = self.leaf_init {
            if !(tau_init.is_finite() && tau_init >= entropy::MIN_TEMPERATURE) {
                return bad("tau_init must be positive");
            }
        }
        if self.adapt {
            self.temperature.validate(self.entropy, action_count)
        } else {
            self.temperature.validate_schedule()
        }
    }

    pub fn backup_rule(&self) -> BackupRule {
        BackupRule {
            kind: self.entropy,
            gamma: self.gamma,
            shaping: self.shaping,
        }
    }

    pub fn select_params(&self) -> SelectParams {
        SelectParams {
            kind: self.entropy,
            epsilon: self.epsilon,
            e3w: self.e3w,
            depth_limit: self.depth_limit,
        }
    }
}

/// Outcome of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: usize,
    /// Q-values of the root's children after search (regression targets).
    pub root_qvalues: Vec<f64>,
    /// Visit counts of the root's children.
    pub root_visits: Vec<u64>,
    /// Temperature in effect when the action was chosen.
    pub temperature: f64,
}

/// Common driver interface for the tree-search planners.
pub trait Planner<E: EnvironmentModel>: Send {
    fn plan(
        &mut self,
        state: &E::State,
        env: &E,
        estimator: &dyn QEstimator<E::State>,
    ) -> Result<Decision, PlannerError>;

    /// Drops the retained tree and restores the initial temperature and
    /// pass count. The random stream continues.
    fn reset(&mut self);

    fn set_mode(&mut self, mode: ActionMode);
}

/// Picks the action at the root.
///
/// Train mode with `τ_sel > 10⁻³` samples E3W at `τ̃·τ_sel`; otherwise the
/// child with the highest Q-value is taken, ties broken uniformly. Either way
/// exactly one variate is drawn.
pub fn final_action<S: Clone, R: Rng>(
    tree: &SearchTree<S>,
    tau: f64,
    cfg: &PlannerConfig,
    mode: ActionMode,
    rng: &mut R,
) -> Result<usize, PlannerError> {
    let q = tree.child_qvalues(SearchTree::<S>::ROOT);
    let u = rng.random::<f64>();
    if mode == ActionMode::Eval || cfg.tau_sel <= EVAL_TAU_SEL {
        let best = entropy::argmax_set(&q);
        return Ok(best[((u * best.len() as f64) as usize).min(best.len() - 1)]);
    }
    let epsilon = if cfg.e3w { cfg.epsilon } else { 0.0 };
    let policy = e3w_policy(
        &q,
        tree.root().count as f64,
        tau * cfg.tau_sel,
        epsilon,
        cfg.entropy,
    )?;
    Ok(policy.sample_with(u))
}

pub struct MaxEntPlanner<S> {
    config: PlannerConfig,
    controller: TemperatureController,
    rng: ChaCha8Rng,
    tree: Option<SearchTree<S>>,
    mode: ActionMode,
    adaptations: Vec<Adaptation>,
    /// Passes run since the last reset; adaptation triggers on multiples
    /// of the adaptation frequency, so it also fires when a single call
    /// runs fewer passes than the frequency.
    passes: usize,
}

impl<S: Clone + PartialEq> MaxEntPlanner<S> {
    /// Builds a planner for an environment with `action_count` actions.
    pub fn new(config: PlannerConfig, action_count: usize) -> Result<Self, PlannerError> {
        config.validate(action_count)?;
        let mut controller = TemperatureController::new(config.temperature);
        controller.alpha = config.temperature.step_alpha(config.n_passes);
        Ok(MaxEntPlanner {
            controller,
            passes: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            tree: None,
            mode: ActionMode::Train,
            adaptations: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn temperature(&self) -> f64 {
        self.controller.tau
    }

    pub fn controller(&self) -> &TemperatureController {
        &self.controller
    }

    /// Tree kept for the next call, if any.
    pub fn tree(&self) -> Option<&SearchTree<S>> {
        self.tree.as_ref()
    }

    /// Adaptation steps taken during the most recent call.
    pub fn adaptations(&self) -> &[Adaptation] {
        &self.adaptations
    }

    /// Runs the passes on the tree rooted at `state` and returns it together
    /// with the chosen action, without retaining anything.
    pub fn search<E>(
        &mut self,
        state: &S,
        env: &E,
        estimator: &dyn QEstimator<S>,
    ) -> Result<(SearchTree<S>, usize), PlannerError>
    where
        E: EnvironmentModel<State = S>,
    {
        let mut tree = match self.tree.take() {
            Some(t) if self.config.reuse_tree && t.root().state == *state => t,
            _ => SearchTree::new(state.clone()),
        };
        self.adaptations.clear();
        let cfg = &self.config;
        let rule = cfg.backup_rule();
        let params = cfg.select_params();
        let freq = cfg.temperature.adaptation_frequency;
        for _ in 0..cfg.n_passes {
            self.passes += 1;
            let pass = self.passes;
            let tau = self.controller.tau;
            let selection = tree.select(&mut self.rng, tau, params)?;
            let leaf = selection.leaf();
            if tree.node(leaf).is_leaf()
                && !tree.node(leaf).terminal
                && selection.depth() < cfg.depth_limit
            {
                tree.expand(leaf, env)?;
                tree.simulate(leaf, estimator, tau, cfg.leaf_init, cfg.entropy)?;
            }
            tree.backpropagate(&selection, tau, rule)?;
            if cfg.adapt && pass.is_multiple_of(freq) {
                let adaptation = adapt_temperature(&tree, &self.controller, cfg.entropy)?;
                if adaptation.internal_nodes > 0 {
                    let tau = self.controller.smooth(adaptation.tau);
                    tree.recalculate_qvalues(tau, rule)?;
                    trace!(
                        "pass {pass}: root {:.6e}, smoothed {tau:.6e}",
                        adaptation.tau
                    );
                }
                self.adaptations.push(adaptation);
            }
        }
        let action = final_action(&tree, self.controller.tau, cfg, self.mode, &mut self.rng)?;
        Ok((tree, action))
    }
}

impl<E> Planner<E> for MaxEntPlanner<E::State>
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
        let root = tree.root();
        let decision = Decision {
            action,
            root_qvalues: tree.child_qvalues(SearchTree::<E::State>::ROOT),
            root_visits: root.children.iter().map(|&c| tree.node(c).count).collect(),
            temperature: self.controller.tau,
        };
        if self.config.reuse_tree {
            let child = root.children[action];
            if !tree.node(child).terminal {
                self.tree = Some(tree.into_subtree(child));
            }
        }
        Ok(decision)
    }

    fn reset(&mut self) {
        self.tree = None;
        self.controller.reset();
        self.passes = 0;
    }

    fn set_mode(&mut self, mode: ActionMode) {
        self.mode = mode;
    }
}

/// Expands every reachable non-terminal node above `cfg.depth_limit` in
/// breadth-first order, backing up each expansion along its path at the
/// fixed temperature `cfg.temperature.tau0`.
pub fn exhaustive_tree<E>(
    env: &E,
    state: E::State,
    estimator: &dyn QEstimator<E::State>,
    cfg: &PlannerConfig,
) -> Result<SearchTree<E::State>, PlannerError>
where
    E: EnvironmentModel,
{
    cfg.validate(env.action_count())?;
    let tau = cfg.temperature.tau0;
    let rule = cfg.backup_rule();
    let mut tree = SearchTree::new(state);
    let root = SearchTree::<E::State>::ROOT;
    let mut queue = std::collections::VecDeque::from([Selection {
        path: vec![root],
        rewards: Vec::new(),
    }]);
    while let Some(selection) = queue.pop_front() {
        let leaf = selection.leaf();
        if tree.node(leaf).terminal || selection.depth() >= cfg.depth_limit {
            continue;
        }
        tree.expand(leaf, env)?;
        tree.simulate(leaf, estimator, tau, cfg.leaf_init, cfg.entropy)?;
        tree.backpropagate(&selection, tau, rule)?;
        for &child in &tree.node(leaf).children {
            let mut next = selection.clone();
            next.path.push(child);
            next.rewards.push(tree.node(child).edge_reward);
            queue.push_back(next);
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainEnv, TreeEnv, ValueBackup, ValueTable};
    use crate::estimator::{RewardEstimator, ZeroEstimator};

    fn fixed(kind: EntropyKind, tau: f64) -> PlannerConfig {
        PlannerConfig {
            entropy: kind,
            adapt: false,
            shaping: false,
            epsilon: 0.0,
            reuse_tree: false,
            temperature: TemperatureConfig {
                tau0: tau,
                ..TemperatureConfig::default()
            },
            ..PlannerConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate(2).is_ok());
        for cfg in [
            PlannerConfig {
                n_passes: 0,
                ..PlannerConfig::default()
            },
            PlannerConfig {
                depth_limit: 0,
                ..PlannerConfig::default()
            },
            PlannerConfig {
                gamma: 1.0,
                ..PlannerConfig::default()
            },
            PlannerConfig {
                tau_sel: 0.0,
                ..PlannerConfig::default()
            },
            PlannerConfig {
                epsilon: -0.1,
                ..PlannerConfig::default()
            },
            PlannerConfig {
                leaf_init: LeafInit::Ments { tau_init: 0.0 },
                ..PlannerConfig::default()
            },
        ] {
            assert!(
                matches!(cfg.validate(2), Err(PlannerError::Config(_))),
                "{cfg:?}"
            );
        }
        // Target entropy of 0.2 is unreachable for a one-action tree.
        assert!(PlannerConfig::default().validate(1).is_err());
        assert!(fixed(EntropyKind::Shannon, 1.0).validate(1).is_ok());
    }

    #[test]
    fn single_pass_expands_root_once() {
        let env = TreeEnv {
            branching: 3,
            ..TreeEnv::default()
        };
        let cfg = PlannerConfig {
            n_passes: 1,
            reuse_tree: false,
            ..PlannerConfig::default()
        };
        let mut planner = MaxEntPlanner::new(cfg, 3).unwrap();
        let (tree, _) = planner.search(&0, &env, &ZeroEstimator).unwrap();
        assert_eq!(tree.internal_count(), 1);
        assert_eq!(tree.len(), 4);
        assert_eq!(tree.root().count, 1);
    }

    #[test]
    fn internal_nodes_equal_passes_without_cutoffs() {
        let env = TreeEnv::default();
        for n in [1, 10, 100] {
            let cfg = PlannerConfig {
                n_passes: n,
                depth_limit: 1000,
                reuse_tree: false,
                ..PlannerConfig::default()
            };
            let mut planner = MaxEntPlanner::new(cfg, 2).unwrap();
            let (tree, _) = planner.search(&0, &env, &ZeroEstimator).unwrap();
            assert_eq!(tree.internal_count(), n);
            assert_eq!(tree.root().count, n as u64);
        }
    }

    #[test]
    fn temperature_stays_above_floor() {
        let env = TreeEnv {
            branching: 3,
            seed: 11,
            ..TreeEnv::default()
        };
        let cfg = PlannerConfig {
            n_passes: 200,
            depth_limit: 20,
            temperature: TemperatureConfig {
                adaptation_frequency: 5,
                ..TemperatureConfig::default()
            },
            ..PlannerConfig::default()
        };
        let mut planner = MaxEntPlanner::new(cfg, 3).unwrap();
        let mut state = 0;
        for _ in 0..5 {
            let d = Planner::<TreeEnv>::plan(&mut planner, &state, &env, &ZeroEstimator).unwrap();
            assert!(d.temperature >= 0.01);
            assert!(!planner.adaptations().is_empty());
            state = state * 3 + 1 + d.action;
        }
    }

    #[test]
    fn adaptation_count_carries_across_calls() {
        let env = TreeEnv::default();
        let cfg = PlannerConfig {
            n_passes: 30,
            depth_limit: 20,
            temperature: TemperatureConfig {
                adaptation_frequency: 50,
                ..TemperatureConfig::default()
            },
            ..PlannerConfig::default()
        };
        let mut planner = MaxEntPlanner::new(cfg, 2).unwrap();
        let mut state = 0;
        let mut adapted = Vec::new();
        for _ in 0..5 {
            let d = Planner::<TreeEnv>::plan(&mut planner, &state, &env, &ZeroEstimator).unwrap();
            adapted.push(planner.adaptations().len());
            state = state * 2 + 1 + d.action;
        }
        // Cumulative passes 30, 60, 90, 120, 150 cross multiples of 50 at
        // calls 2, 4 and 5.
        assert_eq!(adapted, vec![0, 1, 0, 1, 1]);
        Planner::<TreeEnv>::reset(&mut planner);
        assert_eq!(planner.temperature(), 10.0);
    }

    #[test]
    fn exhaustive_tree_matches_oracle() {
        let env = TreeEnv {
            branching: 3,
            seed: 7,
            ..TreeEnv::default()
        };
        for kind in [EntropyKind::Shannon, EntropyKind::Tsallis2] {
            for depth in 1..=3 {
                let cfg = PlannerConfig {
                    depth_limit: depth,
                    ..fixed(kind, 0.5)
                };
                let tree = exhaustive_tree(&env, 0, &RewardEstimator(&env), &cfg).unwrap();
                let table = ValueTable::compute(
                    &env,
                    [0],
                    cfg.gamma,
                    ValueBackup::Soft { kind, tau: 0.5 },
                    depth,
                )
                .unwrap();
                let expected = table.qvalues(&0, depth).unwrap();
                for (a, b) in tree.child_qvalues(0).iter().zip(expected) {
                    assert!((a - b).abs() < 1e-12, "{kind:?} depth {depth}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn depth_one_action_distribution_is_sharpened_soft_policy() {
        let env = TreeEnv {
            branching: 3,
            seed: 3,
            ..TreeEnv::default()
        };
        let cfg = PlannerConfig {
            n_passes: 4,
            depth_limit: 1,
            tau_sel: 0.5,
            ..fixed(EntropyKind::Shannon, 0.4)
        };
        let q: Vec<f64> = (0..3).map(|a| env.step(&0, a).unwrap().reward).collect();
        let expected = entropy::soft_policy(&q, EntropyKind::Shannon, 0.2).unwrap();
        let mut planner = MaxEntPlanner::new(cfg, 3).unwrap();
        let n = 20_000;
        let mut hits = [0usize; 3];
        for _ in 0..n {
            let d =
                Planner::<TreeEnv>::plan(&mut planner, &0, &env, &RewardEstimator(&env)).unwrap();
            hits[d.action] += 1;
        }
        for (h, p) in hits.iter().zip(expected.iter()) {
            let freq = *h as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * sd + 1e-9, "{freq} vs {p}");
        }
    }

    #[test]
    fn same_seed_same_episode() {
        let env = ChainEnv::default();
        let run = || {
            let cfg = PlannerConfig {
                n_passes: 40,
                depth_limit: 10,
                seed: 5,
                ..PlannerConfig::default()
            };
            let mut planner = MaxEntPlanner::new(cfg, 2).unwrap();
            crate::envs::run_episode(
                &env,
                |s: &usize| {
                    Planner::<ChainEnv>::plan(&mut planner, s, &env, &ZeroEstimator)
                        .map(|d| d.action)
                },
                30,
            )
            .unwrap()
            .actions
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tree_reuse_keeps_chosen_subtree() {
        let env = TreeEnv::default();
        let cfg = PlannerConfig {
            n_passes: 30,
            depth_limit: 1000,
            ..PlannerConfig::default()
        };
        let mut planner = MaxEntPlanner::new(cfg, 2).unwrap();
        let d = Planner::<TreeEnv>::plan(&mut planner, &0, &env, &ZeroEstimator).unwrap();
        let kept = planner.tree().unwrap();
        assert_eq!(kept.root().state, 1 + d.action);
        assert_eq!(kept.root().count, d.root_visits[d.action]);
        // A mismatched state starts a fresh tree.
        let cfg = PlannerConfig {
            n_passes: 1,
            ..planner.config().clone()
        };
        let mut fresh = MaxEntPlanner::new(cfg, 2).unwrap();
        fresh.tree = planner.tree.take();
        let (tree, _) = fresh.search(&2, &env, &ZeroEstimator).unwrap();
        assert_eq!(tree.len(), 3);
    }

    #[test]
    fn eval_mode_takes_best_child() {
        let env = TreeEnv {
            branching: 3,
            seed: 1,
            ..TreeEnv::default()
        };
        let mut cfg = fixed(EntropyKind::Shannon, 1.0);
        cfg.depth_limit = 1;
        cfg.n_passes = 3;
        cfg.tau_sel = 1e-6;
        let q: Vec<f64> = (0..3).map(|a| env.step(&0, a).unwrap().reward).collect();
        let best = entropy::argmax_set(&q)[0];
        let mut planner = MaxEntPlanner::new(cfg, 3).unwrap();
        for _ in 0..1000 {
            let d =
                Planner::<TreeEnv>::plan(&mut planner, &0, &env, &RewardEstimator(&env)).unwrap();
            assert_eq!(d.action, best);
        }
    }
}
