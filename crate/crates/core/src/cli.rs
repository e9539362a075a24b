//! Command-line front end. Each subcommand loads a config, applies flag
//! overrides, writes the resolved config to the output directory and then
//! its CSV outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::experiment::{self, Scenario};
use crate::output;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "satprecode", about = "Delayed-CSI LEO downlink precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serving-satellite trace with handover flags.
    Constellation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Trace length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Trace step in seconds.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Train the agent.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        /// Steps per episode.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Roll out a trained policy and the random reference on held-out channels.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding the trained networks (defaults to the output directory).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score the ZF, MRT and random precoders.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        /// Number of seeds to sweep.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run the oracle suite.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Observation width of the networks under test.
        #[arg(long, default_value_t = 648)]
        states: usize,
        /// Action width of the networks under test.
        #[arg(long, default_value_t = 36)]
        actions: usize,
    },
}

fn prepare(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.run.output_dir = out.to_string_lossy().into_owned();
    }
    let dir = PathBuf::from(&cfg.run.output_dir);
    Ok((cfg, dir))
}

fn finish_setup(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write_frozen_config(dir, cfg)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Constellation { common, epsilon, duration, dt } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(e) = epsilon {
                cfg.handover.epsilon = e;
            }
            if let Some(d) = duration {
                cfg.trace.duration_s = d;
            }
            if let Some(d) = dt {
                cfg.trace.step_s = d;
            }
            finish_setup(&cfg, &dir)?;
            let rows = experiment::constellation_trace(&cfg)?;
            output::write_trace(&dir.join(output::TRACE_FILE), &rows)?;
            let handovers = rows.iter().filter(|r| r.handover).count();
            println!("{} rows, {handovers} handovers -> {}", rows.len(), dir.display());
        }
        Command::Train { common, episodes, steps, epsilon } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(z) = episodes {
                cfg.ddpg.episodes = z;
            }
            if let Some(j) = steps {
                cfg.ddpg.steps_per_episode = j;
            }
            if let Some(e) = epsilon {
                cfg.handover.epsilon = e;
            }
            finish_setup(&cfg, &dir)?;
            let sc = Scenario::build(&cfg)?;
            let (_, log) = experiment::train_run(&sc, Some(&dir))?;
            output::write_steps(&dir.join(output::STEPS_FILE), &log.steps)?;
            output::write_episodes(&dir.join(output::EPISODES_FILE), &log.episodes)?;
            println!("{} episodes, {} updates -> {}", log.episodes.len(), log.updates, dir.display());
        }
        Command::Eval { common, checkpoint, episodes, steps } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(z) = episodes {
                cfg.eval.episodes = z;
            }
            if let Some(j) = steps {
                cfg.eval.steps = Some(j);
            }
            let sc = Scenario::build(&cfg)?;
            let agent = experiment::load_agent(&sc, checkpoint.as_deref().unwrap_or(&dir))?;
            finish_setup(&cfg, &dir)?;
            let out = experiment::eval_run(&sc, &agent)?;
            output::write_eval(&dir.join(output::EVAL_FILE), &out.policy, &out.random)?;
            println!(
                "policy {:.4} bit/s/Hz, random {:.4} bit/s/Hz -> {}",
                out.mean_policy_rate(),
                out.mean_random_rate(),
                dir.display()
            );
        }
        Command::Baseline { common, steps, seeds, epsilon } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(n) = steps {
                cfg.baseline.steps = n;
            }
            if let Some(n) = seeds {
                cfg.baseline.seeds = n;
            }
            if let Some(e) = epsilon {
                cfg.handover.epsilon = e;
            }
            finish_setup(&cfg, &dir)?;
            let rows = experiment::baseline_run(&cfg)?;
            output::write_baselines(&dir.join(output::BASELINE_FILE), &rows)?;
            for r in &rows {
                println!("seed {} {:<14} {:.4} bit/s/Hz", r.seed, r.kind.to_string(), r.mean_sum_rate);
            }
        }
        Command::Check { seed, states, actions } => {
            let results = crate::check::run_all(seed, states, actions);
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Error::NumericalFailure(format!("{failed} oracle check(s) failed")));
            }
        }
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
