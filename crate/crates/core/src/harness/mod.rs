//! Experiment driver: JSON configs, seed sweeps, CSV emission and the
//! robustness metric.
//!
//! Every run writes fixed-header CSV files into the configured output
//! directory. Cells run in parallel and rows are written in a fixed order,
//! so a fixed config produces byte-identical files.

mod metrics;
mod presets;
mod report;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub use metrics::{normalized_score, population_variance, robustness_metric, ScoreTable};
pub use presets::{
    entropy_grid, linear_grid, log_grid, reference_entropy_grid, Algorithm, Budget, TEMPERATURE_SET,
};
pub use report::{summarize, SummaryRow};

use crate::algorithm::{derive_seed, EpisodeLog, PlannerChoice};
use crate::bandit::{run_trials, BanditConfig, BanditError, CheckpointRow};
use crate::entropy::{self, EntropyKind};
use crate::envs::{EnvError, EnvSpec, EnvironmentModel, OracleError, ValueBackup, ValueTable};
use crate::estimator::{QEstimator, TableEstimator, ZeroEstimator};
use crate::learning::{run_episodes, run_loop, CurveRow, LoopConfig, LoopError};
use crate::planner::{ActionMode, PlannerError};

pub const EPISODES_FILE: &str = "episodes.csv";
pub const TRACE_FILE: &str = "temperature_trace.csv";
pub const BANDIT_FILE: &str = "bandit.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Learning-curve file name for one seed.
pub fn curve_file(seed: u64) -> String {
    format!("learning_curve_seed{seed}.csv")
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration errors, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Leaf evaluator used by `plan` and `sweep`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    #[default]
    Zero,
    /// Exact optimal `Q` at a fixed horizon.
    Oracle { horizon: usize },
    /// The exact `Q` plus a deterministic per state-action perturbation of
    /// amplitude `noise·max|Q|`, seeded by the run seed. Relative amplitude
    /// keeps the estimator equally informative across reward scales.
    NoisyOracle { horizon: usize, noise: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Adaptive temperature with the grid value as target entropy.
    Entropy,
    /// Fixed temperature equal to the grid value.
    Temperature,
}

impl Parameterization {
    pub fn name(self) -> &'static str {
        match self {
            Parameterization::Entropy => "entropy",
            Parameterization::Temperature => "temperature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: GridScale,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            GridScale::Linear => linear_grid(self.lo, self.hi, self.points),
            GridScale::Log => log_grid(self.lo, self.hi, self.points),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.points >= 1
            && self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo > 0.0
            && self.hi >= self.lo;
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("bad grid {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    #[serde(deserialize_with = "deserialize_envs")]
    pub fixtures: Vec<EnvSpec>,
    pub parameterizations: Vec<Parameterization>,
    /// Target entropies; defaults to `i·H_max/10` for `i = 1..=9`.
    pub entropy_grid: Option<GridSpec>,
    pub temperature_grid: GridSpec,
    /// Episodes of the uniform random policy measuring the low reference.
    pub random_episodes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            fixtures: vec![
                EnvSpec::fixture("chain").expect("shipped fixture"),
                EnvSpec::fixture("chain_x100").expect("shipped fixture"),
            ],
            parameterizations: vec![Parameterization::Entropy, Parameterization::Temperature],
            entropy_grid: None,
            temperature_grid: GridSpec {
                lo: 1e-3,
                hi: 10.0,
                points: 9,
                scale: GridScale::Log,
            },
            random_episodes: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditExperiment {
    pub config: BanditConfig,
    /// Number of consecutive seeds, starting at the first configured seed.
    pub trials: u64,
}

impl Default for BanditExperiment {
    fn default() -> Self {
        BanditExperiment {
            config: BanditConfig::default(),
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    /// A fixture name or a full environment spec.
    #[serde(deserialize_with = "deserialize_env")]
    pub env: EnvSpec,
    pub seeds: Vec<u64>,
    /// Episodes per seed (`plan`) or per seed and grid cell (`sweep`).
    pub episodes: usize,
    pub max_steps: usize,
    /// Search budget; `plan` and `sweep` default to the pretrained budget,
    /// `loop` to the smaller loop budget.
    pub budget: Option<Budget>,
    pub mode: ActionMode,
    pub estimator: EstimatorSpec,
    pub trace_temperature: bool,
    pub out: PathBuf,
    /// Replaces the algorithm preset when set.
    pub planner: Option<PlannerChoice>,
    pub learning: LoopConfig,
    pub bandit: BanditExperiment,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::AntsS,
            env: EnvSpec::fixture("chain").expect("shipped fixture"),
            seeds: vec![0],
            episodes: 1,
            max_steps: 30,
            budget: None,
            mode: ActionMode::Train,
            estimator: EstimatorSpec::Zero,
            trace_temperature: false,
            out: PathBuf::from("out"),
            planner: None,
            learning: LoopConfig::default(),
            bandit: BanditExperiment::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EnvRepr {
    Name(String),
    Spec(EnvSpec),
}

impl EnvRepr {
    fn resolve<E: serde::de::Error>(self) -> Result<EnvSpec, E> {
        match self {
            EnvRepr::Spec(s) => Ok(s),
            EnvRepr::Name(n) => EnvSpec::fixture(&n).ok_or_else(|| {
                E::custom(format!(
                    "unknown fixture {n:?}; expected one of {:?}",
                    EnvSpec::FIXTURES
                ))
            }),
        }
    }
}

fn deserialize_env<'de, D: Deserializer<'de>>(d: D) -> Result<EnvSpec, D::Error> {
    EnvRepr::deserialize(d)?.resolve()
}

fn deserialize_envs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<EnvSpec>, D::Error> {
    Vec::<EnvRepr>::deserialize(d)?
        .into_iter()
        .map(EnvRepr::resolve)
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The planner used under `default_budget` unless `budget` is set.
    pub fn planner_choice(&self, default_budget: Budget) -> PlannerChoice {
        match &self.planner {
            Some(p) => p.clone(),
            None => self.algorithm.preset(self.budget.unwrap_or(default_budget)),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: &dyn std::fmt::Display| HarnessError::Config(e.to_string());
        self.env.validate().map_err(|e| cfg(&e))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.max_steps == 0 {
            return Err(HarnessError::Config("max_steps must be >= 1".into()));
        }
        let k = self.env.action_count();
        for budget in [Budget::Pretrained, Budget::Loop] {
            self.planner_choice(budget)
                .validate(k)
                .map_err(|e| cfg(&e))?;
        }
        if let EstimatorSpec::Oracle { horizon } | EstimatorSpec::NoisyOracle { horizon, .. } =
            self.estimator
        {
            if horizon == 0 {
                return Err(HarnessError::Config("oracle horizon must be >= 1".into()));
            }
        }
        if let EstimatorSpec::NoisyOracle { noise, .. } = self.estimator {
            if !(noise.is_finite() && noise >= 0.0) {
                return Err(HarnessError::Config("oracle noise must be >= 0".into()));
            }
        }
        self.learning.validate().map_err(|e| cfg(&e))?;
        self.bandit.config.validate().map_err(|e| cfg(&e))?;
        for f in &self.sweep.fixtures {
            f.validate().map_err(|e| cfg(&e))?;
        }
        self.sweep.temperature_grid.validate()?;
        if let Some(g) = &self.sweep.entropy_grid {
            g.validate()?;
        }
        Ok(())
    }
}

/// Every non-terminal state reachable from the initial state within `depth`
/// steps, in breadth-first order.
pub fn reachable_states<E: EnvironmentModel>(
    env: &E,
    depth: usize,
) -> Result<Vec<E::State>, EnvError> {
    let mut seen = std::collections::HashSet::new();
    let root = env.initial_state();
    seen.insert(root.clone());
    let mut order = vec![root];
    let mut frontier = order.clone();
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in &frontier {
            for a in 0..env.action_count() {
                let t = env.step(s, a)?;
                if !t.terminal && seen.insert(t.state.clone()) {
                    order.push(t.state.clone());
                    next.push(t.state);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(order)
}

fn build_estimator(
    env: &EnvSpec,
    spec: &EstimatorSpec,
    gamma: f64,
    seed: u64,
) -> Result<Box<dyn QEstimator<usize>>, HarnessError> {
    let table = |horizon| -> Result<TableEstimator<usize>, HarnessError> {
        let roots = reachable_states(env, horizon)?;
        Ok(TableEstimator::new(ValueTable::compute(
            env,
            roots,
            gamma,
            ValueBackup::Max,
            horizon,
        )?))
    };
    Ok(match *spec {
        EstimatorSpec::Zero => Box::new(ZeroEstimator),
        EstimatorSpec::Oracle { horizon } => Box::new(table(horizon)?),
        EstimatorSpec::NoisyOracle { horizon, noise } => {
            let t = table(horizon)?;
            let amplitude = noise * t.table().max_abs_q();
            Box::new(t.with_noise(amplitude, seed))
        }
    })
}

fn planner_gamma(choice: &PlannerChoice) -> f64 {
    match choice {
        PlannerChoice::MaxEnt(c) => c.gamma,
        PlannerChoice::Puct(c) => c.gamma,
    }
}

/// One row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub steps: usize,
    pub mean_tau: f64,
}

/// One row of `temperature_trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub seed: u64,
    pub episode: usize,
    pub step: usize,
    pub tau: f64,
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fixture: String,
    pub param: String,
    pub value: f64,
    pub score: f64,
    pub raw_return: f64,
}

/// One row of `robustness.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub parameterization: String,
    pub rho: f64,
}

/// Header rows of every output file, in column order.
pub const HEADERS: [(&str, &str); 7] = [
    (EPISODES_FILE, "seed,episode,return,steps,mean_tau"),
    (TRACE_FILE, "seed,episode,step,tau"),
    (
        "learning_curve_seed<N>.csv",
        "epoch,episodes_collected,mean_return,mean_loss,mean_tau",
    ),
    (BANDIT_FILE, "seed,t,gap,greedy_correct,tau_t"),
    (SWEEP_FILE, "fixture,param,value,score,raw_return"),
    (ROBUSTNESS_FILE, "parameterization,rho"),
    (SUMMARY_FILE, "file,column,count,mean,std,min,max"),
];

/// Writes `rows` with a header row, even when `rows` is empty.
pub fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn header_of(file: &str) -> &'static str {
    HEADERS
        .iter()
        .find(|(f, _)| *f == file)
        .map(|(_, h)| *h)
        .expect("known output file")
}

/// Output of [`run_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub episodes: Vec<EpisodeRow>,
    pub trace: Vec<TraceRow>,
}

type SeedEpisodes = (u64, Vec<EpisodeLog<usize>>);

fn play_cells(
    env: &EnvSpec,
    choice: &PlannerChoice,
    estimator: &EstimatorSpec,
    mode: ActionMode,
    seeds: &[u64],
    episodes: usize,
    max_steps: usize,
) -> Result<Vec<SeedEpisodes>, HarnessError> {
    let gamma = planner_gamma(choice);
    seeds
        .par_iter()
        .map(|&seed| {
            let est = build_estimator(env, estimator, gamma, seed)?;
            let logs = run_episodes(
                env,
                choice,
                est.as_ref(),
                mode,
                seed,
                0..episodes as u64,
                max_steps,
            )?;
            Ok((seed, logs))
        })
        .collect()
}

/// Plays `episodes` episodes per seed; episode `i` of seed `s` uses planner
/// seed `derive_seed(s, i)`.
pub fn run_plan(cfg: &ExperimentConfig) -> Result<PlanOutput, HarnessError> {
    cfg.validate()?;
    let choice = cfg.planner_choice(Budget::Pretrained);
    let cells = play_cells(
        &cfg.env,
        &choice,
        &cfg.estimator,
        cfg.mode,
        &cfg.seeds,
        cfg.episodes,
        cfg.max_steps,
    )?;
    let mut out = PlanOutput {
        episodes: Vec::new(),
        trace: Vec::new(),
    };
    for (seed, logs) in cells {
        for (episode, log) in logs.iter().enumerate() {
            out.episodes.push(EpisodeRow {
                seed,
                episode,
                total_return: log.total_reward(),
                steps: log.len(),
                mean_tau: log.mean_temperature(),
            });
            if cfg.trace_temperature {
                out.trace
                    .extend(log.steps.iter().enumerate().map(|(step, s)| TraceRow {
                        seed,
                        episode,
                        step,
                        tau: s.temperature,
                    }));
            }
        }
    }
    write_csv(
        &cfg.out.join(EPISODES_FILE),
        header_of(EPISODES_FILE),
        &out.episodes,
    )?;
    if cfg.trace_temperature {
        write_csv(&cfg.out.join(TRACE_FILE), header_of(TRACE_FILE), &out.trace)?;
    }
    Ok(out)
}

/// Runs the planning-learning loop once per seed.
pub fn run_learning(cfg: &ExperimentConfig) -> Result<Vec<(u64, Vec<CurveRow>)>, HarnessError> {
    cfg.validate()?;
    let choice = cfg.planner_choice(Budget::Loop);
    let curves: Vec<(u64, Vec<CurveRow>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let lc = LoopConfig {
                seed,
                ..cfg.learning.clone()
            };
            Ok((seed, run_loop(&cfg.env, &choice, &lc)?.curve))
        })
        .collect::<Result<_, HarnessError>>()?;
    for (seed, curve) in &curves {
        write_csv(&cfg.out.join(curve_file(*seed)), HEADERS[2].1, curve)?;
    }
    Ok(curves)
}

/// Runs `bandit.trials` trials with seeds `s, s+1, ...` where `s` is the
/// first configured seed.
pub fn run_bandit(cfg: &ExperimentConfig) -> Result<Vec<CheckpointRow>, HarnessError> {
    cfg.validate()?;
    let first = cfg.seeds[0];
    let seeds: Vec<u64> = (0..cfg.bandit.trials)
        .map(|i| first.wrapping_add(i))
        .collect();
    let rows = run_trials(&cfg.bandit.config, &seeds)?;
    write_csv(&cfg.out.join(BANDIT_FILE), header_of(BANDIT_FILE), &rows)?;
    Ok(rows)
}

/// Mean undiscounted return of the uniform random policy.
pub fn random_policy_return<E: EnvironmentModel>(
    env: &E,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<f64, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = env.initial_state();
        for _ in 0..max_steps {
            let t = env.step(&s, rng.random_range(0..env.action_count()))?;
            total += t.reward;
            if t.terminal {
                break;
            }
            s = t.state;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

/// Undiscounted return of acting greedily on the exact finite-horizon
/// optimal `Q` (first index on ties).
pub fn oracle_return<E: EnvironmentModel>(
    env: &E,
    gamma: f64,
    max_steps: usize,
) -> Result<f64, HarnessError> {
    let table = ValueTable::compute(
        env,
        [env.initial_state()],
        gamma,
        ValueBackup::Max,
        max_steps,
    )?;
    let mut s = env.initial_state();
    let mut total = 0.0;
    for step in 0..max_steps {
        let q = table
            .qvalues(&s, max_steps - step)
            .ok_or_else(|| HarnessError::Config(format!("oracle table misses state {s:?}")))?;
        let a = entropy::argmax_set(q)[0];
        let t = env.step(&s, a)?;
        total += t.reward;
        if t.terminal {
            break;
        }
        s = t.state;
    }
    Ok(total)
}

/// Output of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub robustness: Vec<RobustnessRow>,
}

/// Reparameterizes a max-entropy planner for one sweep cell.
fn cell_choice(
    base: &PlannerChoice,
    p: Parameterization,
    value: f64,
) -> Result<PlannerChoice, HarnessError> {
    let PlannerChoice::MaxEnt(c) = base else {
        return Err(HarnessError::Config(
            "sweep requires a max-entropy planner".into(),
        ));
    };
    let mut c = c.clone();
    match p {
        Parameterization::Entropy => {
            c.adapt = true;
            c.temperature.target_entropy = value;
        }
        Parameterization::Temperature => {
            c.adapt = false;
            c.temperature.tau0 = value;
            c.temperature.tau_min = c.temperature.tau_min.min(value);
        }
    }
    Ok(PlannerChoice::MaxEnt(c))
}

fn grid_for(cfg: &SweepConfig, p: Parameterization, kind: EntropyKind, k: usize) -> Vec<f64> {
    match p {
        Parameterization::Entropy => match &cfg.entropy_grid {
            Some(g) => g.values(),
            None => entropy_grid(kind, k),
        },
        Parameterization::Temperature => cfg.temperature_grid.values(),
    }
}

/// Evaluates every (fixture, parameterization, grid value) cell and the
/// robustness metric of each parameterization across fixtures.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let base = cfg.planner_choice(Budget::Pretrained);
    let PlannerChoice::MaxEnt(base_cfg) = &base else {
        return Err(HarnessError::Config(
            "sweep requires a max-entropy planner".into(),
        ));
    };
    let sw = &cfg.sweep;
    if sw.fixtures.is_empty() || sw.parameterizations.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs fixtures and parameterizations".into(),
        ));
    }
    let mut cells = Vec::new();
    for (fi, f) in sw.fixtures.iter().enumerate() {
        base.validate(f.action_count())
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        for &p in &sw.parameterizations {
            for (vi, v) in grid_for(sw, p, base_cfg.entropy, f.action_count())
                .into_iter()
                .enumerate()
            {
                let choice = cell_choice(&base, p, v)?;
                choice
                    .validate(f.action_count())
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                cells.push((fi, p, vi, v, choice));
            }
        }
    }
    let references: Vec<(f64, f64)> = sw
        .fixtures
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            let random = random_policy_return(
                f,
                sw.random_episodes,
                cfg.max_steps,
                derive_seed(fi as u64, 0),
            )?;
            Ok((random, oracle_return(f, base_cfg.gamma, cfg.max_steps)?))
        })
        .collect::<Result<_, HarnessError>>()?;
    let results: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|(fi, _, _, _, choice)| {
            let logs = play_cells(
                &sw.fixtures[*fi],
                choice,
                &cfg.estimator,
                cfg.mode,
                &cfg.seeds,
                cfg.episodes,
                cfg.max_steps,
            )?;
            let returns: Vec<f64> = logs
                .iter()
                .flat_map(|(_, l)| l.iter().map(EpisodeLog::total_reward))
                .collect();
            let raw = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
            let (random, oracle) = references[*fi];
            Ok((raw, normalized_score(raw, random, oracle)?))
        })
        .collect::<Result<_, HarnessError>>()?;

    let labels: Vec<String> = sw
        .fixtures
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{i}:{}", f.label()))
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut tables: std::collections::BTreeMap<Parameterization, ScoreTable> = Default::default();
    for ((fi, p, vi, v, _), (raw, score)) in cells.iter().zip(results) {
        rows.push(SweepRow {
            fixture: labels[*fi].clone(),
            param: p.name().into(),
            value: *v,
            score,
            raw_return: raw,
        });
        tables
            .entry(*p)
            .or_default()
            .entry(labels[*fi].clone())
            .or_default()
            .insert(*vi, score);
    }
    let robustness = tables
        .iter()
        .map(|(p, t)| {
            Ok(RobustnessRow {
                parameterization: p.name().into(),
                rho: robustness_metric(t)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    write_csv(&cfg.out.join(SWEEP_FILE), header_of(SWEEP_FILE), &rows)?;
    write_csv(
        &cfg.out.join(ROBUSTNESS_FILE),
        header_of(ROBUSTNESS_FILE),
        &robustness,
    )?;
    Ok(SweepOutput { rows, robustness })
}

/// Summarizes every CSV in `input` (except a previous summary) into
/// `out/summary.csv`.
pub fn run_report(input: &Path, out: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let rows = summarize(input)?;
    write_csv(&out.join(SUMMARY_FILE), header_of(SUMMARY_FILE), &rows)?;
    Ok(rows)
}
