//! Maximum-entropy Monte Carlo tree search with adaptive temperature,
//! PUCT and softmax-bandit baselines, small deterministic environments with
//! exact oracles, and a planning-learning loop.

pub mod algorithm;
pub mod bandit;
pub mod entropy;
pub mod envs;
pub mod estimator;
pub mod harness;
pub mod learning;
pub mod planner;
pub mod puct;
pub mod root;

pub use algorithm::PlannerChoice;
pub use bandit::{BanditConfig, BanditTrial};
pub use entropy::{EntropyError, EntropyKind, PolicyDistribution};
pub use envs::{ChainEnv, EnvError, EnvSpec, EnvironmentModel, GridEnv, Transition, TreeEnv};
pub use estimator::{QEstimator, RewardEstimator, TableEstimator, ZeroEstimator};
pub use harness::{Algorithm, Budget, ExperimentConfig, HarnessError};
pub use learning::{run_loop, LoopConfig};
pub use planner::{
    ActionMode, Decision, LeafInit, MaxEntPlanner, Planner, PlannerConfig, PlannerError,
    TemperatureConfig, TemperatureController,
};
pub use puct::{PuctConfig, PuctPlanner};
