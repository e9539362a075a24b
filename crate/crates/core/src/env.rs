//! The delayed-CSI decision process.
//!
//! At global step `n` the agent sees the channel from `T_d` steps ago and
//! the `T_d + 1` most recent precoders:
//!
//! ```text
//! s(n) = [ scale * H(n - T_d), V(n - T_d - 1), ..., V(n - 1) ]
//! ```
//!
//! Every block is flattened as real parts then imaginary parts with index
//! `k * M + m`, so `|s(n)| = 2 (T_d + 2) M K`. The action fixes `V(n)`; the
//! reward is computed from the oldest pair the satellite can score,
//! `(H(n - T_d), V(n - T_d))`, and the delivered rate uses `(H(n), V(n))`.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelProcess;
use crate::constants::SPEED_OF_LIGHT;
use crate::linalg::{euclidean_norm, CMatrix, C64};
use crate::orbits::{Constellation, GroundUser, HandoverPolicy, SatelliteId};
use crate::rate::{sum_rate, RateReport};
use crate::{Error, Result};

/// Radial projection onto the ball of the given radius,
/// `x * r / (|x| + max(0, r - |x|))`.
pub fn project_action(x: &[f64], radius: f64) -> Vec<f64> {
    let n = euclidean_norm(x);
    // Inside the ball the scale is exactly 1; skip the rounding of r / (n + r - n).
    if n <= radius {
        return x.to_vec();
    }
    let s = radius / n;
    x.iter().map(|v| v * s).collect()
}

/// `V[m, k] = a[k M + m] + j a[M K + k M + m]`.
pub fn action_to_precoder(a: &[f64], m: usize, k: usize) -> Result<CMatrix> {
    let mk = m * k;
    if a.len() != 2 * mk {
        return Err(Error::LengthMismatch { expected: 2 * mk, actual: a.len() });
    }
    Ok(CMatrix::from_fn(m, k, |mi, ki| C64::new(a[ki * m + mi], a[mk + ki * m + mi])))
}

pub fn precoder_to_action(v: &CMatrix) -> Vec<f64> {
    let mut out = vec![0.0; 2 * v.len()];
    write_block(v, 1.0, &mut out);
    out
}

fn write_block(v: &CMatrix, scale: f64, out: &mut [f64]) {
    let (m, k) = v.shape();
    let mk = m * k;
    for ki in 0..k {
        for mi in 0..m {
            let z = v[(mi, ki)];
            out[ki * m + mi] = scale * z.re;
            out[mk + ki * m + mi] = scale * z.im;
        }
    }
}

/// Observation delay in whole steps: `floor((d / c) / dt)`, at least 1
/// whenever the distance is positive.
pub fn compute_delay_steps(distance: f64, delta_t: f64) -> Result<usize> {
    if !(delta_t > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {delta_t} must be positive")));
    }
    if distance <= 0.0 {
        return Ok(0);
    }
    // Guard against 1.9e-3 / 1.9e-3 landing just below an integer.
    let ratio = distance / SPEED_OF_LIGHT / delta_t;
    let steps = (ratio * (1.0 + 1e-12)).floor() as usize;
    Ok(steps.max(1))
}

/// `max(ceil(r - eta1), 0) - eta2`, plus 1 if `r` strictly beats `r_prev`.
pub fn quantize_reward(r_con: f64, r_prev: f64, eta1: f64, eta2: f64) -> f64 {
    let base = (r_con - eta1).ceil().max(0.0) - eta2;
    if r_con > r_prev {
        base + 1.0
    } else {
        base
    }
}

/// Uniform draw from the ball of the given radius in `dim` dimensions.
pub fn random_ball_action<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = euclidean_norm(&dir);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    if n == 0.0 {
        return vec![0.0; dim];
    }
    dir.iter().map(|v| v * r / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub delay_steps: usize,
    pub delta_t: f64,
    pub users: usize,
    pub antennas: usize,
    /// Power budget `P` (W); actions live in the ball of radius `sqrt(P)`.
    pub power: f64,
    pub sigma2: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Multiplier applied to the channel block of the observation only.
    pub obs_scale: f64,
    pub episode_len: usize,
    /// Wall-clock time of the first pre-history channel.
    pub start_time: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.users == 0 || self.antennas == 0 {
            return bad(format!("need users and antennas, got K={} M={}", self.users, self.antennas));
        }
        if !(self.delta_t > 0.0) || !(self.power > 0.0) || !(self.sigma2 > 0.0) {
            return bad("time step, power and noise power must be positive".into());
        }
        if !(self.eta1.is_finite() && self.eta2.is_finite() && self.obs_scale.is_finite() && self.obs_scale > 0.0) {
            return bad("reward thresholds and observation scale must be finite".into());
        }
        if self.episode_len <= self.delay_steps {
            return bad(format!("episode length {} must exceed the delay {}", self.episode_len, self.delay_steps));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        2 * self.antennas * self.users
    }

    pub fn state_dim(&self) -> usize {
        2 * (self.delay_steps + 2) * self.antennas * self.users
    }

    pub fn action_radius(&self) -> f64 {
        self.power.sqrt()
    }
}

/// One channel snapshot together with the serving link that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub t: f64,
    pub h: CMatrix,
    pub serving: SatelliteId,
    pub distance: f64,
    pub elevation: f64,
    /// The serving satellite changed when reaching this instant.
    pub handover: bool,
}

/// The action-independent part of the simulation: satellites, handover,
/// users and their channels on a fixed time grid.
#[derive(Debug, Clone)]
pub struct World {
    constellation: Constellation,
    handover: HandoverPolicy,
    center: GroundUser,
    users: Vec<GroundUser>,
    channel: ChannelProcess,
}

impl World {
    pub fn new(
        constellation: Constellation,
        handover: HandoverPolicy,
        center: GroundUser,
        users: Vec<GroundUser>,
        channel: ChannelProcess,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidParameter("at least one user is required".into()));
        }
        Ok(Self { constellation, handover, center, users, channel })
    }

    pub fn users(&self) -> &[GroundUser] {
        &self.users
    }

    pub fn antennas(&self) -> usize {
        self.channel.config().geometry.elements()
    }

    pub fn handover_count(&self) -> u64 {
        self.handover.handover_count
    }

    /// Serving-link distance at `t` under a throwaway copy of the policy.
    pub fn serving_distance(&self, t: f64) -> Result<f64> {
        let mut policy = self.handover.clone();
        let sats = self.constellation.propagate(t);
        Ok(policy.select_and_handover(&sats, &self.center)?.geometry.distance)
    }

    /// Advances the handover state to `t` and returns the channel there.
    /// Calls must use non-decreasing `t`.
    pub fn sample(&mut self, t: f64) -> Result<ChannelSample> {
        let sats = self.constellation.propagate(t);
        let ev = self.handover.select_and_handover(&sats, &self.center)?;
        let sat = &sats[ev.serving_index];
        let real = self.channel.realize(&self.users, sat, t)?;
        Ok(ChannelSample {
            t,
            h: real.h,
            serving: ev.serving,
            distance: ev.geometry.distance,
            elevation: ev.geometry.elevation,
            handover: ev.handed_over,
        })
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_obs: Vec<f64>,
    /// Quantized reward.
    pub reward: f64,
    /// Rate of the delayed pair `(H(n - T_d), V(n - T_d))`.
    pub r_con: f64,
    /// Rate actually delivered, `(H(n), V(n))`.
    pub info: RateReport,
    /// The projected action that became `V(n)`.
    pub applied_action: Vec<f64>,
    pub t: f64,
    pub serving: SatelliteId,
    pub handover: bool,
}

#[derive(Debug, Clone)]
pub struct DelayedCsiEnv {
    cfg: EnvConfig,
    world: World,
    /// `H(n - T_d) .. H(n)`.
    channels: VecDeque<ChannelSample>,
    /// `V(n - T_d - 1) .. V(n - 1)`.
    precoders: VecDeque<CMatrix>,
    r_con_prev: f64,
    /// Global step index `n`.
    step: u64,
    initialized: bool,
}

impl DelayedCsiEnv {
    pub fn new(cfg: EnvConfig, world: World) -> Result<Self> {
        cfg.validate()?;
        if world.antennas() != cfg.antennas || world.users().len() != cfg.users {
            return Err(Error::DimensionMismatch(format!(
                "config expects M={} K={}, world has M={} K={}",
                cfg.antennas,
                cfg.users,
                world.antennas(),
                world.users().len()
            )));
        }
        Ok(Self {
            cfg,
            world,
            channels: VecDeque::new(),
            precoders: VecDeque::new(),
            r_con_prev: 0.0,
            step: 0,
            initialized: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn global_step(&self) -> u64 {
        self.step
    }

    fn time_of(&self, n: i64) -> f64 {
        self.cfg.start_time + (n + self.cfg.delay_steps as i64) as f64 * self.cfg.delta_t
    }

    /// Fills channels `H(-T_d) .. H(0)` and random precoders
    /// `V(-T_d - 1) .. V(-1)` and returns `s(0)`.
    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let td = self.cfg.delay_steps as i64;
        self.channels.clear();
        self.precoders.clear();
        for n in -td..=0 {
            let t = self.time_of(n);
            self.channels.push_back(self.world.sample(t)?);
        }
        for _ in 0..=td {
            let a = random_ball_action(rng, self.cfg.action_dim(), self.cfg.action_radius());
            self.precoders.push_back(action_to_precoder(&a, self.cfg.antennas, self.cfg.users)?);
        }
        self.r_con_prev = 0.0;
        self.step = 0;
        self.initialized = true;
        self.observation()
    }

    fn ensure_initialized(&self) -> Result<()> {
        if !self.initialized || self.channels.len() != self.cfg.delay_steps + 1 {
            return Err(Error::NotInitialized { needed: self.cfg.delay_steps + 1 });
        }
        Ok(())
    }

    pub fn observation(&self) -> Result<Vec<f64>> {
        self.ensure_initialized()?;
        let mk = self.cfg.antennas * self.cfg.users;
        let mut out = vec![0.0; self.cfg.state_dim()];
        write_block(&self.channels[0].h, self.cfg.obs_scale, &mut out[..2 * mk]);
        for (i, v) in self.precoders.iter().enumerate() {
            let start = 2 * mk * (i + 1);
            write_block(v, 1.0, &mut out[start..start + 2 * mk]);
        }
        Ok(out)
    }

    /// `H(n)`.
    pub fn current_channel(&self) -> Result<&ChannelSample> {
        self.ensure_initialized()?;
        Ok(self.channels.back().expect("initialized"))
    }

    /// `H(n - T_d)`.
    pub fn delayed_channel(&self) -> Result<&ChannelSample> {
        self.ensure_initialized()?;
        Ok(&self.channels[0])
    }

    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        random_ball_action(rng, self.cfg.action_dim(), self.cfg.action_radius())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.ensure_initialized()?;
        if action.len() != self.cfg.action_dim() {
            return Err(Error::LengthMismatch { expected: self.cfg.action_dim(), actual: action.len() });
        }
        let td = self.cfg.delay_steps;
        let applied = project_action(action, self.cfg.action_radius());
        let v_now = action_to_precoder(&applied, self.cfg.antennas, self.cfg.users)?;
        self.precoders.push_back(v_now);
        // precoders now holds V(n - T_d - 1) .. V(n); V(n - T_d) sits at index 1.
        let r_con = sum_rate(&self.channels[0].h, &self.precoders[1], self.cfg.sigma2)?.sum_rate;
        let reward = quantize_reward(r_con, self.r_con_prev, self.cfg.eta1, self.cfg.eta2);
        self.r_con_prev = r_con;
        let now = &self.channels[td];
        let info = sum_rate(&now.h, &self.precoders[td + 1], self.cfg.sigma2)?;
        let (t, serving, handover) = (now.t, now.serving, now.handover);
        self.precoders.pop_front();

        self.step += 1;
        let t_next = self.time_of(self.step as i64);
        let next = self.world.sample(t_next)?;
        self.channels.push_back(next);
        self.channels.pop_front();

        Ok(StepOutcome {
            next_obs: self.observation()?,
            reward,
            r_con,
            info,
            applied_action: applied,
            t,
            serving,
            handover,
        })
    }
}

/// Aligned `H(n)` / `H(n - T_d)` series for scoring fixed precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub delay_steps: usize,
    /// `samples[i]` is `H(i - T_d)`.
    pub samples: Vec<ChannelSample>,
}

impl ChannelTrace {
    /// Records `steps` instants `n = 0 .. steps - 1` plus the `T_d`
    /// pre-history channels, on the same clock as [`DelayedCsiEnv`].
    pub fn record(world: &mut World, cfg: &EnvConfig, steps: usize) -> Result<Self> {
        let td = cfg.delay_steps;
        let samples = (0..steps + td)
            .map(|i| world.sample(cfg.start_time + i as f64 * cfg.delta_t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { delay_steps: td, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len() - self.delay_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn current(&self, n: usize) -> &ChannelSample {
        &self.samples[n + self.delay_steps]
    }

    pub fn delayed(&self, n: usize) -> &ChannelSample {
        &self.samples[n]
    }
}
