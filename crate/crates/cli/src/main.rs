//! `ants`: run planning, learning, bandit and robustness experiments and
//! write their results as CSV.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on configuration error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use ants_core::harness::{self, Algorithm, ExperimentConfig, HarnessError};
use ants_core::EnvSpec;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ants",
    version,
    about = "Maximum-entropy tree search experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play episodes with a fixed leaf estimator.
    Plan(Overrides),
    /// Run the planning-learning loop, one learning curve per seed.
    Loop(Overrides),
    /// Run softmax-bandit trials.
    Bandit(Overrides),
    /// Sweep entropy and temperature grids and compute robustness.
    Sweep(Overrides),
    /// Summarize every CSV in a directory.
    Report {
        #[command(flatten)]
        overrides: Overrides,
        /// Directory to summarize; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ants_s, ants_t, ments, tents or puct.
    #[arg(long)]
    algo: Option<String>,
    /// Fixture name: chain, chain_x100, grid or tree.
    #[arg(long)]
    env: Option<String>,
    /// Seeds, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-decision temperature trace (`plan`).
    #[arg(long)]
    trace_temperature: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = &self.algo {
            cfg.algorithm = Algorithm::parse(a)
                .ok_or_else(|| HarnessError::Config(format!("unknown algorithm {a:?}")))?;
        }
        if let Some(e) = &self.env {
            cfg.env = EnvSpec::fixture(e).ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown fixture {e:?}; expected one of {:?}",
                    EnvSpec::FIXTURES
                ))
            })?;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.trace_temperature |= self.trace_temperature;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Plan(o) => {
            let cfg = o.resolve()?;
            let out = harness::run_plan(&cfg)?;
            println!(
                "{} episodes -> {}",
                out.episodes.len(),
                cfg.out.join(harness::EPISODES_FILE).display()
            );
            if cfg.trace_temperature {
                println!(
                    "{} decisions -> {}",
                    out.trace.len(),
                    cfg.out.join(harness::TRACE_FILE).display()
                );
            }
        }
        Command::Loop(o) => {
            let cfg = o.resolve()?;
            for (seed, curve) in harness::run_learning(&cfg)? {
                let last = curve.last().map_or(f64::NAN, |r| r.mean_return);
                println!(
                    "seed {seed}: {} epochs, final return {last} -> {}",
                    curve.len(),
                    cfg.out.join(harness::curve_file(seed)).display()
                );
            }
        }
        Command::Bandit(o) => {
            let cfg = o.resolve()?;
            let rows = harness::run_bandit(&cfg)?;
            println!(
                "{} checkpoints -> {}",
                rows.len(),
                cfg.out.join(harness::BANDIT_FILE).display()
            );
        }
        Command::Sweep(o) => {
            let cfg = o.resolve()?;
            let out = harness::run_sweep(&cfg)?;
            for r in &out.robustness {
                println!("rho[{}] = {}", r.parameterization, r.rho);
            }
            println!(
                "{} cells -> {}",
                out.rows.len(),
                cfg.out.join(harness::SWEEP_FILE).display()
            );
        }
        Command::Report { overrides, input } => {
            let cfg = overrides.resolve()?;
            let input = input.unwrap_or_else(|| cfg.out.clone());
            let rows = harness::run_report(&input, &cfg.out)?;
            println!(
                "{} columns -> {}",
                rows.len(),
                cfg.out.join(harness::SUMMARY_FILE).display()
            );
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(execute(std::env::args_os()))
}
