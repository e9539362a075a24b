//! Turns a [`RunConfig`] into worlds, environments and finished runs.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::agent::{self, Agent, EpisodeRecord, StepRecord, TrainingLog};
use crate::baselines::{evaluate_baseline, mean_sum_rate, BaselineKind};
use crate::channel::{coherence_time, fspl, noise_power, ChannelConfig, ChannelProcess, UpaGeometry};
use crate::config::{Interval, IntervalRule, RunConfig};
use crate::constants::SPEED_OF_LIGHT;
use crate::env::{compute_delay_steps, ChannelTrace, DelayedCsiEnv, EnvConfig, World};
use crate::nn::Mlp;
use crate::orbits::{handover_trace, place_users, Constellation, GroundUser, HandoverPolicy, TraceRow};
use crate::rng::{stream, RngStreams};
use crate::{Error, Result};

/// Everything derived from a configuration before any channel is drawn.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: RunConfig,
    pub streams: RngStreams,
    pub constellation: Constellation,
    pub policy: HandoverPolicy,
    pub center: GroundUser,
    pub users: Vec<GroundUser>,
    pub channel: ChannelConfig,
    pub env: EnvConfig,
    /// Serving-link propagation delay at the start time (s).
    pub propagation_delay: f64,
}

fn resolve_interval(iv: Interval, coherence: f64, propagation: f64, key: &str) -> Result<f64> {
    let v = match iv {
        Interval::Seconds(s) => s,
        Interval::Named(IntervalRule::Coherence) => coherence,
        Interval::Named(IntervalRule::Propagation) => propagation,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must resolve to a positive duration, got {v}")))
    }
}

impl Scenario {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        cfg.ddpg.validate()?;
        let streams = RngStreams::new(cfg.run.seed);
        let sc = &cfg.scenario;
        if sc.users == 0 {
            return Err(Error::Config("scenario.users must be at least 1".into()));
        }
        let spec = cfg.constellation.to_spec();
        let constellation = Constellation::new(spec.clone())?;
        let policy = HandoverPolicy::new(cfg.handover.epsilon, cfg.handover.min_elevation_deg.to_radians())?;
        let center = GroundUser::new(sc.center_lat_deg.to_radians(), sc.center_lon_deg.to_radians(), 0.0);
        let users = place_users(&center, sc.radius_m, sc.users, sc.user_speed_mps, &mut streams.stream(stream::USERS));

        let ch = &cfg.channel;
        let coherence =
            coherence_time(ch.frequency_hz, ch.coherence_altitude_km * 1e3, ch.coherence_elevation_deg.to_radians())?;
        let sats = constellation.propagate(cfg.env.start_time_s);
        let distance = policy.clone().select_and_handover(&sats, &center)?.geometry.distance;
        let propagation_delay = distance / SPEED_OF_LIGHT;

        let channel = ChannelConfig {
            frequency: ch.frequency_hz,
            geometry: UpaGeometry::new(ch.m_x, ch.m_y)?,
            kappa_min: ch.kappa_min,
            kappa_max: ch.kappa_max,
            paths_min: ch.paths_min,
            paths_max: ch.paths_max,
            max_excess_delay: ch.max_excess_delay_s,
            refresh_period: resolve_interval(ch.refresh, coherence, propagation_delay, "channel.refresh")?,
            antenna_gain_db: ch.antenna_gain_db,
        };
        channel.validate()?;

        let e = &cfg.env;
        let delta_t = resolve_interval(e.pilot_interval, coherence, propagation_delay, "env.pilot_interval")?;
        let delay_steps = match e.delay_steps {
            Some(d) => d,
            None => compute_delay_steps(distance, delta_t)?,
        };
        let min_altitude = spec.layers.iter().map(|l| l.altitude).fold(f64::INFINITY, f64::min);
        // Brings the smallest plausible path loss to unit scale.
        let obs_scale = e
            .obs_scale
            .unwrap_or_else(|| fspl(min_altitude, ch.frequency_hz) / channel.antenna_gain_amplitude());
        let env = EnvConfig {
            delay_steps,
            delta_t,
            users: sc.users,
            antennas: channel.geometry.elements(),
            power: e.power_w,
            sigma2: noise_power(ch.temperature_k, ch.bandwidth()),
            eta1: e.eta1,
            eta2: e.eta2,
            obs_scale,
            episode_len: cfg.ddpg.steps_per_episode,
            start_time: e.start_time_s,
        };
        env.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            streams,
            constellation,
            policy,
            center,
            users,
            channel,
            env,
            propagation_delay,
        })
    }

    /// A fresh world (handover state reset) with its own channel draws.
    pub fn world(&self, channel_seed: u64) -> Result<World> {
        World::new(
            self.constellation.clone(),
            self.policy.clone(),
            self.center,
            self.users.clone(),
            ChannelProcess::new(self.channel.clone(), channel_seed)?,
        )
    }

    pub fn env_at(&self, channel_seed: u64, start_time: f64) -> Result<DelayedCsiEnv> {
        let mut cfg = self.env.clone();
        cfg.start_time = start_time;
        DelayedCsiEnv::new(cfg, self.world(channel_seed)?)
    }

    pub fn training_env(&self) -> Result<DelayedCsiEnv> {
        self.env_at(self.streams.seed(stream::CHANNEL), self.env.start_time)
    }

    pub fn eval_steps(&self) -> usize {
        self.cfg.eval.steps.unwrap_or(self.cfg.ddpg.steps_per_episode)
    }

    /// Held-out environment: fresh channel draws, starting after the last
    /// training instant.
    pub fn eval_env(&self) -> Result<DelayedCsiEnv> {
        let trained = self.cfg.ddpg.episodes * self.cfg.ddpg.steps_per_episode + self.env.delay_steps;
        let start = self.env.start_time + trained as f64 * self.env.delta_t;
        self.env_at(self.streams.seed(stream::EVAL), start)
    }
}

/// Serving-satellite trace of the scenario centre over the `[trace]` window.
pub fn constellation_trace(cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    let sc = Scenario::build(cfg)?;
    let mut policy = sc.policy.clone();
    handover_trace(&sc.constellation, &mut policy, &sc.center, cfg.env.start_time_s, cfg.trace.duration_s, cfg.trace.step_s)
}

pub fn save_network(net: &Mlp, path: &Path) -> Result<()> {
    net.save(BufWriter::new(File::create(path)?))
}

pub fn load_network(path: &Path) -> Result<Mlp> {
    let f = File::open(path).map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    Mlp::load(BufReader::new(f))
}

pub const ACTOR_FILE: &str = "actor.spnn";
pub const CRITIC_FILE: &str = "critic.spnn";

/// Trains on the scenario. With `checkpoint_dir`, the final networks are
/// saved there and, if `ddpg.checkpoint_every > 0`, intermediate ones too.
pub fn train_run(sc: &Scenario, checkpoint_dir: Option<&Path>) -> Result<(Agent, TrainingLog)> {
    let mut env = sc.training_env()?;
    let every = sc.cfg.ddpg.checkpoint_every;
    let mut hook = |a: &Agent, rec: &EpisodeRecord| -> Result<()> {
        if let Some(dir) = checkpoint_dir {
            if every > 0 && (rec.episode + 1).is_multiple_of(every) {
                let sub = dir.join("checkpoints");
                std::fs::create_dir_all(&sub)?;
                save_network(&a.actor, &sub.join(format!("actor_ep{:05}.spnn", rec.episode + 1)))?;
                save_network(&a.critic, &sub.join(format!("critic_ep{:05}.spnn", rec.episode + 1)))?;
            }
        }
        Ok(())
    };
    let (agent, log) = agent::train(&mut env, &sc.cfg.ddpg, &sc.streams, Some(&mut hook))?;
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        save_network(&agent.actor, &dir.join(ACTOR_FILE))?;
        save_network(&agent.critic, &dir.join(CRITIC_FILE))?;
    }
    Ok((agent, log))
}

pub fn load_agent(sc: &Scenario, dir: &Path) -> Result<Agent> {
    let actor = load_network(&dir.join(ACTOR_FILE))?;
    let critic = load_network(&dir.join(CRITIC_FILE))?;
    if actor.input_width() != sc.env.state_dim() || actor.output_width() != sc.env.action_dim() {
        return Err(Error::Checkpoint(format!(
            "actor is {}->{}, scenario needs {}->{}",
            actor.input_width(),
            actor.output_width(),
            sc.env.state_dim(),
            sc.env.action_dim()
        )));
    }
    Agent::from_networks(actor, critic, sc.env.power, sc.cfg.ddpg.clone())
}

/// Greedy policy and random-precoder rollouts over identical held-out channels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub policy: Vec<StepRecord>,
    pub random: Vec<StepRecord>,
}

impl EvalOutcome {
    pub fn mean_policy_rate(&self) -> f64 {
        mean_rate(&self.policy)
    }

    pub fn mean_random_rate(&self) -> f64 {
        mean_rate(&self.random)
    }
}

pub fn mean_rate(steps: &[StepRecord]) -> f64 {
    if steps.is_empty() {
        return f64::NAN;
    }
    steps.iter().map(|s| s.sum_rate).sum::<f64>() / steps.len() as f64
}

pub fn eval_run(sc: &Scenario, agent: &Agent) -> Result<EvalOutcome> {
    let (episodes, steps) = (sc.cfg.eval.episodes, sc.eval_steps());
    let policy = agent::evaluate_policy(agent, &mut sc.eval_env()?, episodes, steps, &mut sc.streams.stream(stream::EVAL))?;
    let random = agent::evaluate_random(&mut sc.eval_env()?, episodes, steps, &mut sc.streams.stream(stream::EVAL))?;
    Ok(EvalOutcome { policy, random })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub seed: u64,
    pub kind: BaselineKind,
    pub steps: usize,
    pub delay_steps: usize,
    pub mean_sum_rate: f64,
    pub handovers: usize,
}

fn baseline_for_seed(cfg: &RunConfig, kinds: &[BaselineKind], seed: u64) -> Result<Vec<BaselineRow>> {
    let mut cfg = cfg.clone();
    cfg.run.seed = seed;
    let sc = Scenario::build(&cfg)?;
    let mut world = sc.world(sc.streams.seed(stream::CHANNEL))?;
    let trace = ChannelTrace::record(&mut world, &sc.env, cfg.baseline.steps)?;
    let handovers = (0..trace.len()).filter(|&n| trace.current(n).handover).count();
    kinds
        .iter()
        .map(|&kind| {
            let mut rng = sc.streams.stream(&format!("{}/{kind}", stream::BASELINE));
            let reports = evaluate_baseline(kind, &trace, sc.env.power, sc.env.sigma2, &mut rng)?;
            Ok(BaselineRow {
                seed,
                kind,
                steps: trace.len(),
                delay_steps: sc.env.delay_steps,
                mean_sum_rate: mean_sum_rate(&reports),
                handovers,
            })
        })
        .collect()
}

/// Scores every configured baseline for each swept seed. Seeds are spread
/// over worker threads; rows come back in seed order regardless.
pub fn baseline_run(cfg: &RunConfig) -> Result<Vec<BaselineRow>> {
    let kinds = cfg
        .baseline
        .kinds
        .iter()
        .map(|k| k.parse::<BaselineKind>())
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..cfg.baseline.seeds).map(|i| cfg.run.seed.wrapping_add(i)).collect();
    let workers = cfg.baseline.workers.max(1).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let per_chunk: Vec<Result<Vec<BaselineRow>>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                let kinds = &kinds;
                s.spawn(move || -> Result<Vec<BaselineRow>> {
                    let mut rows = Vec::new();
                    for &seed in part {
                        rows.extend(baseline_for_seed(cfg, kinds, seed)?);
                    }
                    Ok(rows)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::NumericalFailure("baseline worker panicked".into()))))
            .collect()
    });
    let mut rows = Vec::new();
    for part in per_chunk {
        rows.extend(part?);
    }
    Ok(rows)
}
