//! Search tree storage and the four MCTS phases for the max-ent planner.
//!
//! Nodes live in an arena indexed by [`NodeId`]. Children are always
//! allocated after their parent, so iterating ids in reverse visits every
//! node after all of its descendants (a valid post-order for backups).

use rand::Rng;

use super::{BackupRule, LeafInit, PlannerError};
use crate::entropy::{self, EntropyKind, PolicyDistribution};
use crate::envs::EnvironmentModel;
use crate::estimator::QEstimator;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node<S> {
    pub state: S,
    /// Reward received on the edge entering this node.
    pub edge_reward: f64,
    /// Number of backpropagations through this node.
    pub count: u64,
    /// Q-value of the edge entering this node.
    pub qvalue: f64,
    /// One child per action once expanded; empty for leaves.
    pub children: Vec<NodeId>,
    pub terminal: bool,
}

impl<S> Node<S> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A root-to-leaf walk produced by [`SearchTree::select`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Node ids from the root to the selected leaf, inclusive.
    pub path: Vec<NodeId>,
    /// `rewards[i]` is the reward on the edge `path[i] -> path[i + 1]`.
    pub rewards: Vec<f64>,
}

impl Selection {
    pub fn leaf(&self) -> NodeId {
        *self.path.last().expect("selection path is never empty")
    }

    pub fn depth(&self) -> usize {
        self.path.len() - 1
    }
}

/// Exploration weight of E3W: `min(1, ε·K / ln(N + 1))`, or 1 at `N = 0`.
pub fn exploration_weight(epsilon: f64, k: usize, count: f64) -> f64 {
    let denom = (count + 1.0).ln();
    if denom <= 0.0 {
        1.0
    } else {
        (epsilon * k as f64 / denom).min(1.0)
    }
}

/// `(1 - λ)·∇Ω*_τ(q) + λ·uniform` for a node visited `count` times.
pub fn e3w_policy(
    child_q: &[f64],
    count: f64,
    tau: f64,
    epsilon: f64,
    kind: EntropyKind,
) -> Result<PolicyDistribution, PlannerError> {
    let k = child_q.len();
    let soft = entropy::soft_policy(child_q, kind, tau)?;
    let lambda = exploration_weight(epsilon, k, count);
    if lambda == 0.0 {
        return Ok(soft);
    }
    let uniform = lambda / k as f64;
    let mixed = soft.iter().map(|p| (1.0 - lambda) * p + uniform).collect();
    Ok(PolicyDistribution::from_probs_unchecked(mixed))
}

#[derive(Debug, Clone, Copy)]
pub struct SelectParams {
    pub kind: EntropyKind,
    pub epsilon: f64,
    /// `false` samples straight from the soft policy (λ = 0).
    pub e3w: bool,
    pub depth_limit: usize,
}

#[derive(Debug, Clone)]
pub struct SearchTree<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Clone> SearchTree<S> {
    pub fn new(root_state: S) -> Self {
        SearchTree {
            nodes: vec![Node {
                state: root_state,
                edge_reward: 0.0,
                count: 0,
                qvalue: 0.0,
                children: Vec::new(),
                terminal: false,
            }],
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn root(&self) -> &Node<S> {
        &self.nodes[Self::ROOT]
    }

    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node<S> {
        &mut self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn child_qvalues(&self, id: NodeId) -> Vec<f64> {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| self.nodes[c].qvalue)
            .collect()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_leaf())
            .map(|(i, _)| i)
    }

    pub fn internal_count(&self) -> usize {
        self.internal_nodes().count()
    }

    /// Walks E3W-sampled actions from the root until a leaf, a terminal node
    /// or `depth_limit`. Draws exactly one uniform variate per internal node
    /// passed through, root first.
    pub fn select<R: Rng>(
        &self,
        rng: &mut R,
        tau: f64,
        params: SelectParams,
    ) -> Result<Selection, PlannerError> {
        let mut node = Self::ROOT;
        let mut path = vec![node];
        let mut rewards = Vec::new();
        while !self.nodes[node].is_leaf()
            && !self.nodes[node].terminal
            && rewards.len() < params.depth_limit
        {
            let q = self.child_qvalues(node);
            let epsilon = if params.e3w { params.epsilon } else { 0.0 };
            let policy = e3w_policy(&q, self.nodes[node].count as f64, tau, epsilon, params.kind)?;
            let action = policy.sample_with(rng.random::<f64>());
            node = self.nodes[node].children[action];
            path.push(node);
            rewards.push(self.nodes[node].edge_reward);
        }
        Ok(Selection { path, rewards })
    }

    /// Adds one child per action, each from a single model step. Child
    /// Q-values are left at zero until [`SearchTree::simulate`].
    pub fn expand<E>(&mut self, leaf: NodeId, env: &E) -> Result<(), PlannerError>
    where
        E: EnvironmentModel<State = S>,
    {
        let node = &self.nodes[leaf];
        if node.terminal {
            return Err(PlannerError::ExpandTerminal);
        }
        if !node.is_leaf() {
            return Err(PlannerError::AlreadyExpanded(leaf));
        }
        let state = node.state.clone();
        let k = env.action_count();
        let mut children = Vec::with_capacity(k);
        for action in 0..k {
            let t = env.step(&state, action)?;
            children.push(self.nodes.len());
            self.nodes.push(Node {
                state: t.state,
                edge_reward: t.reward,
                count: 0,
                qvalue: 0.0,
                children: Vec::new(),
                terminal: t.terminal,
            });
        }
        self.nodes[leaf].children = children;
        Ok(())
    }

    /// Initializes the Q-values of a freshly expanded node's children.
    ///
    /// Terminal children get their edge reward; the rest get `Q̂(s, a, τ̃)`
    /// (raw) or `(Q̂(s, a) - Ω*_{τ_init}(Q̂(s, ·))) / τ_init` (ments).
    pub fn simulate<Q>(
        &mut self,
        leaf: NodeId,
        estimator: &Q,
        tau: f64,
        leaf_init: LeafInit,
        kind: EntropyKind,
    ) -> Result<(), PlannerError>
    where
        Q: QEstimator<S> + ?Sized,
    {
        let k = self.nodes[leaf].children.len();
        if k == 0 {
            return Ok(());
        }
        let q_hat = estimator.evaluate_all(&self.nodes[leaf].state, k, tau);
        let init: Vec<f64> = match leaf_init {
            LeafInit::Raw => q_hat,
            LeafInit::Ments { tau_init } => {
                let v = entropy::soft_value(&q_hat, kind, tau_init)?;
                q_hat.iter().map(|q| (q - v) / tau_init).collect()
            }
        };
        for (a, value) in init.into_iter().enumerate() {
            let child = self.nodes[leaf].children[a];
            let child = &mut self.nodes[child];
            child.qvalue = if child.terminal {
                child.edge_reward
            } else {
                value
            };
        }
        Ok(())
    }

    /// Backed-up Q-value of an internal node at temperature `tau`.
    pub fn backup_value(
        &self,
        id: NodeId,
        tau: f64,
        rule: BackupRule,
    ) -> Result<f64, PlannerError> {
        let node = &self.nodes[id];
        if node.is_leaf() {
            return Ok(node.qvalue);
        }
        let q = self.child_qvalues(id);
        let mut v = entropy::soft_value(&q, rule.kind, tau)?;
        if rule.shaping {
            v -= tau * entropy::max_entropy(rule.kind, q.len())?;
        }
        Ok(node.edge_reward + rule.gamma * v)
    }

    /// Bottom-up along `selection`: bump counts and recompute Q-values.
    pub fn backpropagate(
        &mut self,
        selection: &Selection,
        tau: f64,
        rule: BackupRule,
    ) -> Result<(), PlannerError> {
        debug_assert_eq!(selection.rewards.len() + 1, selection.path.len());
        for (i, &id) in selection.path.iter().enumerate().rev() {
            if i > 0 {
                self.nodes[id].edge_reward = selection.rewards[i - 1];
            }
            self.nodes[id].count += 1;
            self.nodes[id].qvalue = self.backup_value(id, tau, rule)?;
        }
        Ok(())
    }

    /// Recomputes every internal node's Q-value at `tau`, leaves first.
    pub fn recalculate_qvalues(&mut self, tau: f64, rule: BackupRule) -> Result<(), PlannerError> {
        for id in (0..self.nodes.len()).rev() {
            if !self.nodes[id].is_leaf() {
                self.nodes[id].qvalue = self.backup_value(id, tau, rule)?;
            }
        }
        Ok(())
    }

    /// Re-roots the tree at `id`, dropping everything outside its subtree.
    pub fn into_subtree(self, id: NodeId) -> SearchTree<S> {
        let mut old: Vec<Option<Node<S>>> = self.nodes.into_iter().map(Some).collect();
        let mut nodes: Vec<Node<S>> = Vec::new();
        // Breadth-first copy keeps parents ahead of their children.
        let mut queue = std::collections::VecDeque::from([id]);
        let mut remap = Vec::new();
        while let Some(old_id) = queue.pop_front() {
            let node = old[old_id].take().expect("tree nodes have a single parent");
            remap.push(node.children.clone());
            queue.extend(node.children.iter().copied());
            nodes.push(node);
        }
        let mut next = 1;
        for (new_id, children) in remap.into_iter().enumerate() {
            let ids: Vec<NodeId> = (next..next + children.len()).collect();
            next += children.len();
            nodes[new_id].children = ids;
        }
        let mut tree = SearchTree { nodes };
        tree.nodes[Self::ROOT].edge_reward = 0.0;
        tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainEnv, EnvironmentModel, TreeEnv};
    use crate::estimator::{RewardEstimator, ZeroEstimator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rule(kind: EntropyKind, gamma: f64, shaping: bool) -> BackupRule {
        BackupRule {
            kind,
            gamma,
            shaping,
        }
    }

    fn params(depth_limit: usize) -> SelectParams {
        SelectParams {
            kind: EntropyKind::Shannon,
            epsilon: 0.1,
            e3w: true,
            depth_limit,
        }
    }

    #[test]
    fn lambda_clamp_and_formula() {
        assert_eq!(exploration_weight(0.01, 4, 0.0), 1.0);
        let n = 4f64.exp() - 1.0;
        assert!((exploration_weight(0.01, 4, n) - 0.01).abs() < 1e-15);
        assert_eq!(exploration_weight(1.0, 4, 1.0), 1.0);
        assert_eq!(exploration_weight(0.0, 4, 10.0), 0.0);
    }

    #[test]
    fn e3w_without_exploration_is_soft_policy() {
        let q = [0.3, -0.2, 0.9];
        let p = e3w_policy(&q, 10.0, 0.5, 0.0, EntropyKind::Shannon).unwrap();
        assert_eq!(
            p,
            entropy::soft_policy(&q, EntropyKind::Shannon, 0.5).unwrap()
        );
    }

    #[test]
    fn e3w_mixture_matches_scalar_evaluation() {
        let p = e3w_policy(&[1.0, 0.0, 0.0, 0.0], 10.0, 0.5, 0.1, EntropyKind::Shannon).unwrap();
        let lambda = 0.1 * 4.0 / 11f64.ln();
        let e2 = 2f64.exp();
        let z = e2 + 3.0;
        let expected = [
            (1.0 - lambda) * e2 / z + lambda / 4.0,
            (1.0 - lambda) / z + lambda / 4.0,
            (1.0 - lambda) / z + lambda / 4.0,
            (1.0 - lambda) / z + lambda / 4.0,
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn selecting_on_a_lone_root_returns_it() {
        let tree = SearchTree::new(0usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = tree.select(&mut rng, 1.0, params(5)).unwrap();
        assert_eq!(s.path, vec![SearchTree::<usize>::ROOT]);
        assert!(s.rewards.is_empty());
    }

    fn full_tree(env: &TreeEnv, depth: usize) -> SearchTree<usize> {
        let mut tree = SearchTree::new(env.initial_state());
        let mut frontier = vec![SearchTree::<usize>::ROOT];
        for _ in 0..depth {
            let mut next = Vec::new();
            for id in frontier {
                tree.expand(id, env).unwrap();
                tree.simulate(id, &ZeroEstimator, 1.0, LeafInit::Raw, EntropyKind::Shannon)
                    .unwrap();
                next.extend(tree.node(id).children.clone());
            }
            frontier = next;
        }
        tree
    }

    #[test]
    fn depth_limit_caps_path_length() {
        let env = TreeEnv::default();
        let tree = full_tree(&env, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = tree.select(&mut rng, 1.0, params(1)).unwrap();
            assert_eq!(s.depth(), 1);
            let s = tree.select(&mut rng, 1.0, params(10)).unwrap();
            assert_eq!(s.depth(), 3);
            for (i, r) in s.rewards.iter().enumerate() {
                assert_eq!(*r, env.edge_reward(tree.node(s.path[i + 1]).state));
            }
        }
    }

    #[test]
    fn selection_is_reproducible_under_a_seed() {
        let env = TreeEnv {
            branching: 3,
            ..TreeEnv::default()
        };
        let tree = full_tree(&env, 3);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| tree.select(&mut rng, 0.7, params(10)).unwrap().path)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn expansion_creates_one_child_per_action() {
        let env = ChainEnv {
            length: 5,
            n_actions: 4,
            step_penalty: 0.1,
            ..ChainEnv::default()
        };
        let mut tree = SearchTree::new(2usize);
        tree.expand(SearchTree::<usize>::ROOT, &env).unwrap();
        let root = tree.root();
        assert_eq!(root.children.len(), 4);
        let advance = tree.node(root.children[0]);
        assert_eq!(advance.state, 3);
        assert_eq!(advance.edge_reward, -0.1);
        assert!(!advance.terminal);
        assert!(matches!(
            tree.expand(SearchTree::<usize>::ROOT, &env),
            Err(PlannerError::AlreadyExpanded(0))
        ));
    }

    #[test]
    fn terminal_leaves_refuse_expansion() {
        let env = ChainEnv {
            length: 1,
            ..ChainEnv::default()
        };
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        let goal = tree.root().children[0];
        assert!(tree.node(goal).terminal);
        assert!(matches!(
            tree.expand(goal, &env),
            Err(PlannerError::ExpandTerminal)
        ));
    }

    #[test]
    fn raw_simulation_with_zero_network() {
        let env = TreeEnv::default();
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        tree.simulate(0, &ZeroEstimator, 1.0, LeafInit::Raw, EntropyKind::Shannon)
            .unwrap();
        assert_eq!(tree.child_qvalues(0), vec![0.0, 0.0]);
    }

    struct Fixed(Vec<f64>);
    impl QEstimator<usize> for Fixed {
        fn evaluate(&self, _: &usize, a: usize, _: f64) -> f64 {
            self.0[a]
        }
    }

    #[test]
    fn ments_simulation_of_equal_values_is_minus_ln2() {
        let env = TreeEnv::default();
        for (c, tau_init) in [(0.0, 1.0), (3.5, 0.01), (-2.0, 7.0)] {
            let mut tree = SearchTree::new(0usize);
            tree.expand(0, &env).unwrap();
            tree.simulate(
                0,
                &Fixed(vec![c, c]),
                1.0,
                LeafInit::Ments { tau_init },
                EntropyKind::Shannon,
            )
            .unwrap();
            for q in tree.child_qvalues(0) {
                assert!((q + 2f64.ln()).abs() < 1e-9, "{c} {tau_init}: {q}");
            }
        }
    }

    #[test]
    fn ments_simulation_matches_formula() {
        let env = TreeEnv::default();
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        tree.simulate(
            0,
            &Fixed(vec![1.0, 0.0]),
            1.0,
            LeafInit::Ments { tau_init: 0.01 },
            EntropyKind::Shannon,
        )
        .unwrap();
        // V = 0.01·ln(e^100 + 1) = 1 + 0.01·ln(1 + e^-100)
        let v = 1.0 + 0.01 * (-100f64).exp().ln_1p();
        let q = tree.child_qvalues(0);
        assert!((q[0] - (1.0 - v) / 0.01).abs() < 1e-9);
        assert!((q[1] - (0.0 - v) / 0.01).abs() < 1e-9);
        assert!((q[1] + 100.0).abs() < 1e-9);
    }

    #[test]
    fn terminal_children_take_edge_reward() {
        let env = ChainEnv {
            length: 1,
            n_actions: 3,
            ..ChainEnv::default()
        };
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        tree.simulate(
            0,
            &Fixed(vec![7.0, 7.0, 7.0]),
            1.0,
            LeafInit::Raw,
            EntropyKind::Shannon,
        )
        .unwrap();
        assert_eq!(tree.child_qvalues(0), vec![1.0, 0.1, 7.0]);
    }

    #[test]
    fn shaping_cancels_for_uniform_children() {
        let env = TreeEnv::default();
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        let leaf = tree.root().children[1];
        tree.expand(leaf, &env).unwrap();
        tree.simulate(
            leaf,
            &ZeroEstimator,
            1.0,
            LeafInit::Raw,
            EntropyKind::Shannon,
        )
        .unwrap();
        let sel = Selection {
            path: vec![0, leaf],
            rewards: vec![tree.node(leaf).edge_reward],
        };
        tree.backpropagate(&sel, 0.7, rule(EntropyKind::Shannon, 0.9, true))
            .unwrap();
        assert!((tree.node(leaf).qvalue - tree.node(leaf).edge_reward).abs() < 1e-15);
        assert_eq!(tree.node(leaf).count, 1);
        assert_eq!(tree.root().count, 1);
    }

    #[test]
    fn unshaped_backup_adds_entropy_bonus() {
        let env = TreeEnv::default();
        let mut tree = SearchTree::new(0usize);
        tree.expand(0, &env).unwrap();
        let leaf = tree.root().children[0];
        tree.expand(leaf, &env).unwrap();
        tree.simulate(
            leaf,
            &ZeroEstimator,
            1.0,
            LeafInit::Raw,
            EntropyKind::Shannon,
        )
        .unwrap();
        let r = tree.node(leaf).edge_reward;
        let sel = Selection {
            path: vec![0, leaf],
            rewards: vec![r],
        };
        tree.backpropagate(&sel, 1.0, rule(EntropyKind::Shannon, 0.9, false))
            .unwrap();
        assert!((tree.node(leaf).qvalue - (r + 0.9 * 2f64.ln())).abs() < 1e-15);
    }

    /// Recursive soft value of a hand-built tree, independent of the arena.
    fn recursive_q(tree: &SearchTree<usize>, id: NodeId, tau: f64, gamma: f64) -> f64 {
        let node = tree.node(id);
        if node.is_leaf() {
            return node.qvalue;
        }
        let q: Vec<f64> = node
            .children
            .iter()
            .map(|&c| recursive_q(tree, c, tau, gamma))
            .collect();
        let lse = q.iter().map(|x| (x / tau).exp()).sum::<f64>().ln() * tau;
        node.edge_reward + gamma * lse
    }

    fn hand_set_tree() -> SearchTree<usize> {
        let env = TreeEnv {
            seed: 4,
            ..TreeEnv::default()
        };
        let mut tree = full_tree(&env, 2);
        let leaves: Vec<NodeId> = (0..tree.len())
            .filter(|&i| tree.node(i).is_leaf())
            .collect();
        for (i, id) in leaves.into_iter().enumerate() {
            tree.node_mut(id).qvalue = [0.4, -1.2, 2.0, 0.3][i];
        }
        tree
    }

    #[test]
    fn two_level_backprop_matches_recursion() {
        let mut tree = hand_set_tree();
        let r = rule(EntropyKind::Shannon, 0.95, false);
        // Back up every leaf's path; the tree ends consistent regardless of order.
        for leaf in [3, 6, 4, 5] {
            let parent = (leaf - 1) / 2;
            let sel = Selection {
                path: vec![0, parent, leaf],
                rewards: vec![tree.node(parent).edge_reward, tree.node(leaf).edge_reward],
            };
            tree.backpropagate(&sel, 0.5, r).unwrap();
        }
        let expected = recursive_q(&tree, 0, 0.5, 0.95);
        assert!((tree.root().qvalue - expected).abs() < 1e-12);
        assert_eq!(tree.root().count, 4);
    }

    #[test]
    fn recalculation_tracks_new_temperature() {
        let mut tree = hand_set_tree();
        let r = rule(EntropyKind::Shannon, 0.95, false);
        tree.recalculate_qvalues(1.0, r).unwrap();
        let before: Vec<f64> = (0..tree.len()).map(|i| tree.node(i).qvalue).collect();
        tree.recalculate_qvalues(1.0, r).unwrap();
        let again: Vec<f64> = (0..tree.len()).map(|i| tree.node(i).qvalue).collect();
        for (a, b) in before.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
        tree.recalculate_qvalues(0.1, r).unwrap();
        assert!((tree.root().qvalue - recursive_q(&tree, 0, 0.1, 0.95)).abs() < 1e-12);
        for (i, &q) in before.iter().enumerate().take(7).skip(3) {
            assert_eq!(tree.node(i).qvalue, q);
        }
    }

    #[test]
    fn recalculation_on_leaf_only_tree_is_a_no_op() {
        let mut tree = SearchTree::new(0usize);
        tree.node_mut(0).qvalue = 1.5;
        tree.recalculate_qvalues(0.3, rule(EntropyKind::Shannon, 0.9, true))
            .unwrap();
        assert_eq!(tree.root().qvalue, 1.5);
    }

    #[test]
    fn subtree_extraction_preserves_structure() {
        let env = TreeEnv {
            branching: 3,
            seed: 2,
            ..TreeEnv::default()
        };
        let tree = full_tree(&env, 3);
        let child = tree.root().children[2];
        let child_state = tree.node(child).state;
        let grandchildren: Vec<usize> = tree
            .node(child)
            .children
            .iter()
            .map(|&c| tree.node(c).state)
            .collect();
        let sub = tree.into_subtree(child);
        assert_eq!(sub.len(), 1 + 3 + 9);
        assert_eq!(sub.root().state, child_state);
        assert_eq!(sub.root().edge_reward, 0.0);
        let states: Vec<usize> = sub
            .root()
            .children
            .iter()
            .map(|&c| sub.node(c).state)
            .collect();
        assert_eq!(states, grandchildren);
        for id in 0..sub.len() {
            for &c in &sub.node(id).children {
                assert!(c > id);
                assert_eq!((sub.node(c).state - 1) / 3, sub.node(id).state);
            }
        }
        let _ = RewardEstimator(&env);
    }
}
