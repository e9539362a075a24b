//! DDPG over the delayed-CSI environment.
//!
//! The deterministic policy is `a = Proj(sqrt(P) * mu(s))`; exploration adds
//! Gaussian noise after the `sqrt(P)` scaling and before the projection.
//! Actor gradients flow through the projection Jacobian.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{project_action, DelayedCsiEnv};
use crate::linalg::euclidean_norm;
use crate::nn::{actor_layers, critic_layers, Gradients, Mlp, Optimizer};
use crate::orbits::SatelliteId;
use crate::rng::{stream, RngStreams, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub discount: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_var_init: f64,
    pub noise_decay: f64,
    pub noise_var_floor: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Bootstrap every sample of a minibatch instead of treating the last
    /// one as terminal.
    pub bootstrap_all: bool,
    pub optimizer: OptimizerKind,
    /// Write checkpoints every this many episodes (0 disables).
    pub checkpoint_every: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            tau: 0.005,
            buffer_capacity: 50_000,
            batch_size: 64,
            actor_lr: 0.001,
            critic_lr: 0.002,
            noise_var_init: 0.11,
            noise_decay: 0.99996,
            noise_var_floor: 0.05,
            episodes: 416,
            steps_per_episode: 480,
            bootstrap_all: false,
            optimizer: OptimizerKind::Adam,
            checkpoint_every: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch size must be positive and fit in the buffer");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.noise_var_init >= 0.0 && self.noise_var_floor >= 0.0 && self.noise_decay > 0.0 && self.noise_decay <= 1.0)
        {
            return bad("noise schedule must be non-negative and non-increasing");
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("episodes and steps per episode must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, data: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.data.len() < self.capacity { 0 } else { self.next };
        self.data[split..].iter().chain(self.data[..split].iter())
    }

    /// Uniform without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<&Transition>> {
        if n == 0 || self.data.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if n > self.data.len() {
            return Err(Error::InvalidParameter(format!("batch of {n} from {} transitions", self.data.len())));
        }
        Ok(index::sample(rng, self.data.len(), n).into_iter().map(|i| &self.data[i]).collect())
    }
}

/// Exploration variance, decayed once per use down to a floor.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    variance: f64,
    decay: f64,
    floor: f64,
}

impl NoiseSchedule {
    pub fn new(init: f64, decay: f64, floor: f64) -> Self {
        Self { variance: init.max(floor), decay, floor }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn advance(&mut self) {
        self.variance = (self.variance * self.decay).max(self.floor);
    }
}

/// A critic as seen by the policy update: `Q(s, a)` and `dQ/da`.
pub trait ActionValue {
    fn value_and_action_grad(&self, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl ActionValue for Mlp {
    fn value_and_action_grad(&self, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
        let input = concat(s, a);
        let cache = self.forward_cached(&input)?;
        let q = cache.output()[0];
        let (_, gx) = self.backward(&cache, &[1.0])?;
        Ok((q, gx[s.len()..].to_vec()))
    }
}

fn concat(s: &[f64], a: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(s.len() + a.len());
    v.extend_from_slice(s);
    v.extend_from_slice(a);
    v
}

/// `J^T g` for the projection onto the ball of radius `r` at `x`.
fn projection_vjp(x: &[f64], r: f64, g: &[f64]) -> Vec<f64> {
    let n = euclidean_norm(x);
    if n <= r {
        return g.to_vec();
    }
    let xg: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    x.iter().zip(g).map(|(xi, gi)| r / n * (gi - xi * xg / (n * n))).collect()
}

/// Actor output mapped into the power ball.
pub fn policy_action(actor: &Mlp, s: &[f64], radius: f64) -> Result<Vec<f64>> {
    let y = actor.forward(s)?;
    Ok(project_action(&y.iter().map(|v| v * radius).collect::<Vec<_>>(), radius))
}

/// Gradient of `(1/B) sum_j Q(s_j, Proj(r mu(s_j)))` w.r.t. the actor
/// parameters, and the batch mean of that objective.
pub fn policy_gradient<C: ActionValue>(
    actor: &Mlp,
    critic: &C,
    states: &[&[f64]],
    radius: f64,
) -> Result<(Gradients, f64)> {
    if states.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grads = Gradients::zeros_like(actor);
    let mut mean_q = 0.0;
    let inv = 1.0 / states.len() as f64;
    for s in states {
        let cache = actor.forward_cached(s)?;
        let x: Vec<f64> = cache.output().iter().map(|v| v * radius).collect();
        let a = project_action(&x, radius);
        let (q, dq_da) = critic.value_and_action_grad(s, &a)?;
        mean_q += q * inv;
        let dq_dy: Vec<f64> = projection_vjp(&x, radius, &dq_da).iter().map(|g| g * radius * inv).collect();
        actor.backward_into(&cache, &dq_dy, &mut grads)?;
    }
    Ok((grads, mean_q))
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    pub noise: NoiseSchedule,
    pub cfg: DdpgConfig,
    radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// `-mean Q(s, mu(s))` over the batch before the actor step.
    pub actor_loss: f64,
    pub ascent_norm: f64,
}

impl Agent {
    /// Actor and critic stacks sized for the given observation and action
    /// widths; targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(
        states: usize,
        actions: usize,
        power: f64,
        cfg: DdpgConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = Mlp::new(&actor_layers(states, actions), rng)?;
        let critic = Mlp::new(&critic_layers(states, actions), rng)?;
        Self::from_networks(actor, critic, power, cfg)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, power: f64, cfg: DdpgConfig) -> Result<Self> {
        if critic.input_width() != actor.input_width() + actor.output_width() || critic.output_width() != 1 {
            return Err(Error::ShapeMismatch("critic must take [state, action] and return a scalar".into()));
        }
        let make_opt = |net: &Mlp, lr: f64| match cfg.optimizer {
            OptimizerKind::Adam => Optimizer::adam(net, lr),
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
        };
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: make_opt(&actor, cfg.actor_lr),
            critic_opt: make_opt(&critic, cfg.critic_lr),
            noise: NoiseSchedule::new(cfg.noise_var_init, cfg.noise_decay, cfg.noise_var_floor),
            actor,
            critic,
            cfg,
            radius: power.sqrt(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn act(&self, s: &[f64]) -> Result<Vec<f64>> {
        policy_action(&self.actor, s, self.radius)
    }

    /// `Proj(sqrt(P) mu(s) + N(0, var))`, then one noise decay.
    pub fn select_action<R: Rng + ?Sized>(&mut self, s: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let y = self.actor.forward(s)?;
        let sd = self.noise.variance().sqrt();
        let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let x: Vec<f64> = y.iter().map(|v| v * self.radius + normal.sample(rng)).collect();
        self.noise.advance();
        Ok(project_action(&x, self.radius))
    }

    /// `q_j = r_j + lambda Q*(s'_j, mu*(s'_j))`; in the default mode the last
    /// sample of the batch takes the terminal form `q = r`.
    pub fn q_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        q_targets(batch, &self.target_actor, &self.target_critic, self.cfg.discount, self.radius, self.cfg.bootstrap_all)
    }

    /// One optimizer step on the mean-squared TD loss; returns the
    /// pre-update loss.
    pub fn critic_update(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        let (grads, loss) = critic_loss_gradient(&self.critic, batch, targets)?;
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// One optimizer ascent step on `mean Q(s, mu(s))`; returns the norm of
    /// the ascent direction and the pre-update objective.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<(f64, f64)> {
        let states: Vec<&[f64]> = batch.iter().map(|t| t.s.as_slice()).collect();
        actor_update(&mut self.actor, &mut self.actor_opt, &self.critic, &states, self.radius)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.target_actor.soft_update(&self.actor, self.cfg.tau)?;
        self.target_critic.soft_update(&self.critic, self.cfg.tau)
    }

    pub fn learn<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateStats> {
        let batch = buffer.sample(rng, self.cfg.batch_size)?;
        let targets = self.q_targets(&batch)?;
        let critic_loss = self.critic_update(&batch, &targets)?;
        let (ascent_norm, mean_q) = self.actor_update(&batch)?;
        self.soft_update_targets()?;
        Ok(UpdateStats { critic_loss, actor_loss: -mean_q, ascent_norm })
    }
}

pub fn q_targets(
    batch: &[&Transition],
    target_actor: &Mlp,
    target_critic: &Mlp,
    discount: f64,
    radius: f64,
    bootstrap_all: bool,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let last = batch.len() - 1;
    batch
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if j == last && !bootstrap_all {
                return Ok(t.r);
            }
            let a = policy_action(target_actor, &t.s_next, radius)?;
            let q = target_critic.forward(&concat(&t.s_next, &a))?[0];
            Ok(t.r + discount * q)
        })
        .collect()
}

/// Gradient of `(1/B) sum_j (q_j - Q(s_j, a_j))^2` and the loss itself.
pub fn critic_loss_gradient(critic: &Mlp, batch: &[&Transition], targets: &[f64]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if targets.len() != batch.len() {
        return Err(Error::ShapeMismatch(format!("{} targets for {} samples", targets.len(), batch.len())));
    }
    let inv = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(critic);
    let mut loss = 0.0;
    for (t, q) in batch.iter().zip(targets) {
        let cache = critic.forward_cached(&concat(&t.s, &t.a))?;
        let err = cache.output()[0] - q;
        loss += err * err * inv;
        critic.backward_into(&cache, &[2.0 * err * inv], &mut grads)?;
    }
    Ok((grads, loss))
}

/// Generic over the critic so analytic action-values can stand in for a
/// network.
pub fn actor_update<C: ActionValue>(
    actor: &mut Mlp,
    opt: &mut Optimizer,
    critic: &C,
    states: &[&[f64]],
    radius: f64,
) -> Result<(f64, f64)> {
    let (mut grads, mean_q) = policy_gradient(actor, critic, states, radius)?;
    let norm = grads.norm();
    grads.scale(-1.0);
    opt.step(actor, &grads)?;
    Ok((norm, mean_q))
}

/// One environment step as logged during training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub t: f64,
    pub r_con: f64,
    pub reward: f64,
    pub sum_rate: f64,
    pub serving: SatelliteId,
    pub handover: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_sum_rate: f64,
    /// Mean of `-Q(s, mu(s))` over the episode's updates (NaN if none).
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub noise_var: f64,
    pub handovers: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeRecord>,
    pub buffer_len: usize,
    pub updates: usize,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn episode_summary(episode: usize, steps: &[StepRecord], actor: &[f64], critic: &[f64], noise: f64) -> EpisodeRecord {
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    let rates: Vec<f64> = steps.iter().map(|s| s.sum_rate).collect();
    EpisodeRecord {
        episode,
        mean_reward: mean(&rewards),
        mean_sum_rate: mean(&rates),
        actor_loss: mean(actor),
        critic_loss: mean(critic),
        noise_var: noise,
        handovers: steps.iter().filter(|s| s.handover).count(),
    }
}

/// Called after every episode with the agent and that episode's summary.
pub type EpisodeHook<'a> = dyn FnMut(&Agent, &EpisodeRecord) -> Result<()> + 'a;

/// Runs `episodes x steps_per_episode` environment steps. The first `T_d`
/// global steps use uniform random actions; updates start once the buffer
/// holds a full batch. Episodes are contiguous in time, so the history
/// carries across episode boundaries.
pub fn train(
    env: &mut DelayedCsiEnv,
    cfg: &DdpgConfig,
    streams: &RngStreams,
    on_episode: Option<&mut EpisodeHook<'_>>,
) -> Result<(Agent, TrainingLog)> {
    cfg.validate()?;
    let ec = env.config().clone();
    let mut init_rng = streams.stream(stream::INIT);
    let mut warm_rng = streams.stream(stream::WARMUP);
    let mut noise_rng = streams.stream(stream::NOISE);
    let mut buffer_rng = streams.stream(stream::BUFFER);
    let mut agent = Agent::new(ec.state_dim(), ec.action_dim(), ec.power, cfg.clone(), &mut init_rng)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainingLog::default();
    let mut hook = on_episode;

    let mut obs = env.initialize(&mut warm_rng)?;
    let mut global = 0usize;
    for episode in 0..cfg.episodes {
        let first = log.steps.len();
        let (mut actor_losses, mut critic_losses) = (Vec::new(), Vec::new());
        for step in 0..cfg.steps_per_episode {
            let a = if global < ec.delay_steps {
                env.random_action(&mut warm_rng)
            } else {
                agent.select_action(&obs, &mut noise_rng)?
            };
            let out = env.step(&a)?;
            buffer.push(Transition { s: obs, a: out.applied_action.clone(), r: out.reward, s_next: out.next_obs.clone() });
            if global >= ec.delay_steps && buffer.len() >= cfg.batch_size {
                let stats = agent.learn(&buffer, &mut buffer_rng)?;
                actor_losses.push(stats.actor_loss);
                critic_losses.push(stats.critic_loss);
                log.updates += 1;
            }
            log.steps.push(StepRecord {
                episode,
                step,
                t: out.t,
                r_con: out.r_con,
                reward: out.reward,
                sum_rate: out.info.sum_rate,
                serving: out.serving,
                handover: out.handover,
            });
            obs = out.next_obs;
            global += 1;
        }
        let rec = episode_summary(episode, &log.steps[first..], &actor_losses, &critic_losses, agent.noise.variance());
        if let Some(h) = hook.as_mut() {
            h(&agent, &rec)?;
        }
        log.episodes.push(rec);
    }
    log.buffer_len = buffer.len();
    Ok((agent, log))
}

/// Greedy rollout of a frozen policy for `episodes x steps` steps.
pub fn evaluate_policy<R: Rng + ?Sized>(
    agent: &Agent,
    env: &mut DelayedCsiEnv,
    episodes: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<StepRecord>> {
    let mut obs = env.initialize(rng)?;
    let mut out = Vec::with_capacity(episodes * steps);
    for episode in 0..episodes {
        for step in 0..steps {
            let a = agent.act(&obs)?;
            let r = env.step(&a)?;
            out.push(StepRecord {
                episode,
                step,
                t: r.t,
                r_con: r.r_con,
                reward: r.reward,
                sum_rate: r.info.sum_rate,
                serving: r.serving,
                handover: r.handover,
            });
            obs = r.next_obs;
        }
    }
    Ok(out)
}

/// Uniform random precoders (inside the power ball) through the same
/// environment, as a reference floor for [`evaluate_policy`].
pub fn evaluate_random(env: &mut DelayedCsiEnv, episodes: usize, steps: usize, rng: &mut SimRng) -> Result<Vec<StepRecord>> {
    env.initialize(rng)?;
    let mut out = Vec::with_capacity(episodes * steps);
    for episode in 0..episodes {
        for step in 0..steps {
            let a = env.random_action(rng);
            let r = env.step(&a)?;
            out.push(StepRecord {
                episode,
                step,
                t: r.t,
                r_con: r.r_con,
                reward: r.reward,
                sum_rate: r.info.sum_rate,
                serving: r.serving,
                handover: r.handover,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;
    use crate::nn::{Activation, LayerSpec};
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn transition(s: Vec<f64>, a: Vec<f64>, r: f64) -> Transition {
        Transition { s_next: s.clone(), s, a, r }
    }

    #[test]
    fn buffer_is_fifo_and_bounded() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(transition(vec![i as f64], vec![0.0], i as f64));
        }
        assert_eq!(b.len(), 5);
        let rs: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(rs, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        let batch = b.sample(&mut rng(1), 5).unwrap();
        let mut seen: Vec<f64> = batch.iter().map(|t| t.r).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, rs);
        assert!(matches!(ReplayBuffer::new(3).sample(&mut rng(1), 2), Err(Error::EmptyBatch)));
    }

    #[test]
    fn zero_actor_without_noise_outputs_zero() {
        let cfg = DdpgConfig { noise_var_init: 0.0, noise_var_floor: 0.0, ..DdpgConfig::default() };
        let actor = Mlp::zeros(&actor_layers(6, 4)).unwrap();
        let critic = Mlp::zeros(&critic_layers(6, 4)).unwrap();
        let mut agent = Agent::from_networks(actor, critic, 1.0, cfg).unwrap();
        assert_eq!(agent.select_action(&[0.5; 6], &mut rng(2)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn selected_actions_respect_the_budget() {
        let cfg = DdpgConfig { noise_var_init: 4.0, noise_var_floor: 4.0, ..DdpgConfig::default() };
        let mut r = rng(3);
        let mut agent = Agent::new(6, 4, 2.0, cfg, &mut r).unwrap();
        for _ in 0..10_000 {
            let a = agent.select_action(&[0.1, -0.2, 0.3, 0.0, 1.0, -1.0], &mut r).unwrap();
            assert!(euclidean_norm(&a) <= 2f64.sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn noise_schedule_decays_to_floor() {
        let mut n = NoiseSchedule::new(0.11, 0.99996, 0.05);
        for i in 1..=20_000u32 {
            n.advance();
            let closed = (0.11 * 0.99996f64.powi(i as i32)).max(0.05);
            assert!((n.variance() - closed).abs() < 1e-12);
        }
        assert!((0.11 * 0.99996f64.powi(20_000) - 0.0494).abs() < 1e-3);
        assert_eq!(n.variance(), 0.05);
        n.advance();
        assert_eq!(n.variance(), 0.05);
    }

    #[test]
    fn select_action_decays_once_per_call() {
        let mut r = rng(4);
        let mut agent = Agent::new(6, 4, 1.0, DdpgConfig::default(), &mut r).unwrap();
        for _ in 0..3 {
            agent.select_action(&[0.0; 6], &mut r).unwrap();
        }
        assert!((agent.noise.variance() - 0.11 * 0.99996f64.powi(3)).abs() < 1e-15);
    }

    fn constant_critic(states: usize, actions: usize, value: f64) -> Mlp {
        let mut c = Mlp::zeros(&critic_layers(states, actions)).unwrap();
        let last = c.layers().len() - 1;
        c.layers_mut()[last].bias[0] = value;
        c
    }

    #[test]
    fn target_examples() {
        let actor = Mlp::zeros(&actor_layers(2, 2)).unwrap();
        let t1 = transition(vec![0.1, 0.2], vec![0.0, 0.0], 1.0);
        let t2 = transition(vec![0.3, 0.4], vec![0.0, 0.0], 1.0);
        let batch = [&t1, &t2];
        let ten = constant_critic(2, 2, 10.0);
        assert_eq!(q_targets(&batch, &actor, &ten, 0.95, 1.0, false).unwrap(), vec![10.5, 1.0]);
        assert_eq!(q_targets(&batch, &actor, &ten, 0.95, 1.0, true).unwrap(), vec![10.5, 10.5]);
        assert_eq!(q_targets(&batch, &actor, &ten, 0.0, 1.0, true).unwrap(), vec![1.0, 1.0]);
        let zero = constant_critic(2, 2, 0.0);
        assert_eq!(q_targets(&batch, &actor, &zero, 0.95, 1.0, true).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(q_targets(&[], &actor, &zero, 0.95, 1.0, false), Err(Error::EmptyBatch)));
    }

    fn linear_critic(inputs: usize, seed: u64) -> Mlp {
        Mlp::new(&[LayerSpec::new(inputs, 1, Activation::Identity)], &mut rng(seed)).unwrap()
    }

    #[test]
    fn critic_loss_matches_direct_evaluation() {
        let mut r = rng(5);
        let critic = Mlp::new(&critic_layers(3, 2), &mut r).unwrap();
        let ts: Vec<Transition> = (0..7)
            .map(|i| transition(vec![0.1 * i as f64, -0.2, 0.3], vec![0.5, -0.1 * i as f64], i as f64))
            .collect();
        let batch: Vec<&Transition> = ts.iter().collect();
        let targets: Vec<f64> = (0..7).map(|i| 0.3 * i as f64).collect();
        let (_, loss) = critic_loss_gradient(&critic, &batch, &targets).unwrap();
        let mut direct = 0.0;
        for (t, q) in ts.iter().zip(&targets) {
            let v = critic.forward(&concat(&t.s, &t.a)).unwrap()[0];
            direct += (q - v) * (q - v);
        }
        direct /= 7.0;
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn perfect_critic_has_zero_loss_and_gradient() {
        let critic = linear_critic(3, 6);
        let t = transition(vec![0.2, 0.1], vec![-0.4], 0.0);
        let q = critic.forward(&concat(&t.s, &t.a)).unwrap()[0];
        let (g, loss) = critic_loss_gradient(&critic, &[&t], &[q]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn critic_step_reduces_single_sample_loss() {
        let actor = Mlp::zeros(&[LayerSpec::new(2, 1, Activation::Tanh)]).unwrap();
        let critic = linear_critic(3, 7);
        let cfg = DdpgConfig { optimizer: OptimizerKind::Sgd, critic_lr: 1e-3, ..DdpgConfig::default() };
        let mut agent = Agent::from_networks(actor, critic, 1.0, cfg).unwrap();
        let t = transition(vec![0.2, 0.1], vec![-0.4], 3.0);
        let before = agent.critic_update(&[&t], &[3.0]).unwrap();
        let (_, after) = critic_loss_gradient(&agent.critic, &[&t], &[3.0]).unwrap();
        assert!(after < before);
    }

    #[test]
    fn action_blind_critic_gives_zero_update() {
        let mut r = rng(8);
        let mut critic = Mlp::new(&critic_layers(3, 2), &mut r).unwrap();
        // Zero the action columns of the first layer.
        let n_in = 5;
        let l0 = &mut critic.layers_mut()[0];
        for o in 0..l0.spec.out_width {
            for i in 3..n_in {
                l0.weights[o * n_in + i] = 0.0;
            }
        }
        let mut actor = Mlp::new(&actor_layers(3, 2), &mut r).unwrap();
        let before = actor.clone();
        let mut opt = Optimizer::adam(&actor, 1e-3);
        let s = [0.3, -0.1, 0.7];
        let (norm, _) = actor_update(&mut actor, &mut opt, &critic, &[&s[..]], 1.0).unwrap();
        assert_eq!(norm, 0.0);
        assert_eq!(actor, before);
    }

    struct Parabola;

    impl ActionValue for Parabola {
        fn value_and_action_grad(&self, _s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((-(a[0] - 3.0).powi(2), vec![-2.0 * (a[0] - 3.0)]))
        }
    }

    #[test]
    fn actor_climbs_an_analytic_critic() {
        // Bias-only actor: constant output tanh(b); radius 5 lets a reach 3.
        let mut actor = Mlp::zeros(&[LayerSpec::new(1, 1, Activation::Tanh)]).unwrap();
        let mut opt = Optimizer::adam(&actor, 0.01);
        let s = [1.0];
        for _ in 0..3000 {
            actor_update(&mut actor, &mut opt, &Parabola, &[&s[..]], 5.0).unwrap();
        }
        let a = policy_action(&actor, &s, 5.0).unwrap()[0];
        assert!((a - 3.0).abs() < 1e-2, "{a}");
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let mut r = rng(9);
        let actor = Mlp::new(&actor_layers(4, 3), &mut r).unwrap();
        let critic = Mlp::new(&critic_layers(4, 3), &mut r).unwrap();
        let states: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        // Radius small enough that projection is active for some samples.
        let radius = 0.8;
        let (g, _) = policy_gradient(&actor, &critic, &refs, radius).unwrap();
        let flat = g.flat();
        let objective = |a: &Mlp| policy_gradient(a, &critic, &refs, radius).unwrap().1;
        let h = 1e-6;
        let mut checked = 0;
        let mut mismatched = Vec::new();
        for idx in 0..actor.param_count() {
            let mut p = actor.clone();
            *p.param_mut(idx) += h;
            let mut m = actor.clone();
            *m.param_mut(idx) -= h;
            let num = (objective(&p) - objective(&m)) / (2.0 * h);
            let scale = num.abs().max(flat[idx].abs());
            if scale < 1e-7 {
                assert!((num - flat[idx]).abs() < 1e-9);
                continue;
            }
            checked += 1;
            if (num - flat[idx]).abs() / scale >= 1e-3 {
                mismatched.push((idx, num, flat[idx]));
            }
        }
        assert!(checked >= 40, "{checked}");
        assert!(mismatched.is_empty(), "{mismatched:?}");
    }

    #[test]
    fn target_networks_move_by_exactly_one_polyak_step() {
        let mut r = rng(10);
        let mut agent = Agent::new(4, 2, 1.0, DdpgConfig { batch_size: 2, ..DdpgConfig::default() }, &mut r).unwrap();
        let ts: Vec<Transition> = (0..4).map(|i| transition(vec![0.1 * i as f64; 4], vec![0.2, -0.1], 1.0)).collect();
        let mut buffer = ReplayBuffer::new(10);
        ts.into_iter().for_each(|t| buffer.push(t));
        let target_before = agent.target_actor.clone();
        agent.learn(&buffer, &mut r).unwrap();
        let mut expect = target_before.clone();
        expect.soft_update(&agent.actor, agent.cfg.tau).unwrap();
        assert_eq!(agent.target_actor, expect);
    }

    fn tiny_cfg(episodes: usize, steps: usize) -> DdpgConfig {
        DdpgConfig { episodes, steps_per_episode: steps, batch_size: 8, buffer_capacity: 1000, ..DdpgConfig::default() }
    }

    #[test]
    fn warm_up_boundary_fills_buffer_without_learning() {
        for td in [1usize, 3] {
            let mut env = fixtures::env(td, 1);
            let cfg = DdpgConfig { batch_size: 64, ..tiny_cfg(1, td + 1) };
            let (_, log) = train(&mut env, &cfg, &RngStreams::new(1), None).unwrap();
            assert_eq!(log.buffer_len, td + 1);
            assert_eq!(log.steps.len(), td + 1);
            assert_eq!(log.updates, 0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut env = fixtures::env(1, 2);
            train(&mut env, &tiny_cfg(2, 12), &RngStreams::new(7), None).unwrap()
        };
        let (a1, l1) = run();
        let (a2, l2) = run();
        assert_eq!(l1, l2);
        assert_eq!(a1.actor, a2.actor);
        assert!(l1.updates > 0);
    }
}
