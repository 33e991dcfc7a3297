//! Soft actor-critic for continuous control.
//!
//! The agent keeps a squashed-Gaussian actor and twin Q critics with Polyak
//! target copies. Entropy regularization uses a fixed temperature `alpha` (no
//! auto-tuning). Actions live in a configurable box `[low, high]^dim`: the
//! Gaussian sample is squashed by `tanh` and affinely mapped into the box,
//! with the matching change-of-variables correction in the log-density.
//!
//! Training is driven by [`pretrain`], which steps `num_envs` environments
//! round-robin, stores transitions in a FIFO replay buffer and interleaves
//! gradient updates — all from explicitly seeded streams, so a fixed seed
//! reproduces parameters bit for bit.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::net::{adam_step, soft_update, Activation, Mat, Mlp, OptimState};
use crate::rng::{self, ChaCha8Rng};
use crate::sim::{ControlAction, DrivingEnv, TerminationCause};
use crate::Error;

/// Log-std clamp range for the actor head.
const LOG_STD_MIN: f64 = -20.0;
const LOG_STD_MAX: f64 = 2.0;

/// SAC-specific errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SacError {
    #[error("invalid SAC config: {0}")]
    InvalidConfig(&'static str),
    #[error("environments disagree on {0}")]
    EnvMismatch(&'static str),
    #[error("buffer holds {have} transitions but the batch needs {need}")]
    BufferTooSmall { need: usize, have: usize },
    #[error("non-finite loss at gradient step {step}")]
    NonFiniteLoss { step: u64 },
}

/// Hyperparameters for one SAC run.
#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    /// Hidden layer widths of actor and critics.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    /// Gradient steps per update trigger.
    pub gradient_steps: u32,
    /// Total environment steps to run.
    pub total_steps: u64,
    /// Polyak factor for target critics.
    pub tau: f64,
    pub gamma: f64,
    /// Fixed entropy temperature.
    pub alpha: f64,
    pub buffer_capacity: usize,
    /// Environment steps before learning starts; warmup actions are uniform.
    pub warmup_steps: u64,
    /// Update every this many environment steps; 0 means `num_envs`.
    pub update_every: u32,
    pub num_envs: u32,
}

impl Default for SacConfig {
    /// Full-size network with a short schedule; callers usually override.
    fn default() -> Self {
        SacConfig {
            hidden: vec![256, 256],
            lr: 1e-4,
            batch_size: 256,
            gradient_steps: 1,
            total_steps: 100_000,
            tau: 0.005,
            gamma: 0.99,
            alpha: 0.1,
            buffer_capacity: 100_000,
            warmup_steps: 1_000,
            update_every: 0,
            num_envs: 1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(SacError::InvalidConfig("hidden layers must be nonempty"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(SacError::InvalidConfig("lr must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(SacError::InvalidConfig(
                "batch_size must be in 1..=buffer_capacity",
            ));
        }
        if self.gradient_steps == 0 {
            return Err(SacError::InvalidConfig("gradient_steps must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(SacError::InvalidConfig("tau must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(SacError::InvalidConfig("gamma must lie in [0, 1]"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(SacError::InvalidConfig("alpha must be nonnegative"));
        }
        if self.num_envs == 0 {
            return Err(SacError::InvalidConfig("num_envs must be positive"));
        }
        Ok(())
    }

    fn effective_update_every(&self) -> u64 {
        if self.update_every == 0 {
            self.num_envs as u64
        } else {
            self.update_every as u64
        }
    }
}

/// One stored step. `done` marks true terminal states only (collision /
/// off-track); hitting the step cap stores `done = false` so bootstrapping
/// continues through the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    /// Action in environment space (for the master policy: the raw weight
    /// vector in `[0, 1]^m`).
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub done: bool,
}

/// Fixed-capacity FIFO replay buffer; once full, the oldest transition is
/// overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.data.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.data[idx]
    }

    /// Uniform indices with replacement.
    fn sample_indices(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| rand::Rng::random_range(rng, 0..self.data.len()))
            .collect()
    }
}

/// Losses from one update call, averaged over its gradient steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub actor_loss: f64,
}

/// Log-density of the squashed-Gaussian policy for one action dimension,
/// given the pre-squash noise `xi = (u - mu) / sigma`, the raw (unclamped)
/// log-std `ell`, and the affine half-width `h` of the action box.
///
/// Uses `ln(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))` for stability.
fn tanh_gauss_logp_dim(ell_clamped: f64, xi: f64, u: f64, half_width: f64) -> f64 {
    const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // 0.5 * ln(2*pi)
    let gauss = -ell_clamped - HALF_LN_TAU - 0.5 * xi * xi;
    let squash_correction = 2.0 * (core::f64::consts::LN_2 - u - math::softplus(-2.0 * u));
    gauss - squash_correction - math::log(half_width)
}

/// A soft actor-critic agent.
#[derive(Debug, Clone)]
pub struct SacAgent {
    actor: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    opt_actor: OptimState,
    opt_q1: OptimState,
    opt_q2: OptimState,
    cfg: SacConfig,
    obs_dim: usize,
    action_dim: usize,
    low: f64,
    high: f64,
    rng: ChaCha8Rng,
    grad_steps_done: u64,
}

impl SacAgent {
    /// Fresh agent. Networks are Xavier-initialized from `seed` in the order
    /// actor, q1, q2; targets start as exact copies of the critics.
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        bounds: (f64, f64),
        cfg: SacConfig,
        seed: u64,
    ) -> Result<Self, Error> {
        cfg.validate()?;
        let (low, high) = bounds;
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(SacError::InvalidConfig("action bounds must satisfy low < high").into());
        }
        if obs_dim == 0 || action_dim == 0 {
            return Err(SacError::InvalidConfig("obs and action dims must be positive").into());
        }
        let mut rng = rng::seeded(seed);
        let mut actor_dims = vec![obs_dim];
        actor_dims.extend_from_slice(&cfg.hidden);
        actor_dims.push(2 * action_dim);
        let mut critic_dims = vec![obs_dim + action_dim];
        critic_dims.extend_from_slice(&cfg.hidden);
        critic_dims.push(1);

        let actor = Mlp::new(&actor_dims, Activation::Relu, Activation::Identity, &mut rng)?;
        let q1 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng)?;
        let q2 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng)?;
        let (opt_actor, opt_q1, opt_q2) = (
            OptimState::new(&actor, cfg.lr),
            OptimState::new(&q1, cfg.lr),
            OptimState::new(&q2, cfg.lr),
        );
        Ok(SacAgent {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            opt_actor,
            opt_q1,
            opt_q2,
            cfg,
            obs_dim,
            action_dim,
            low,
            high,
            rng,
            grad_steps_done: 0,
        })
    }

    /// Rebuilds an agent around an existing actor (e.g. loaded from a
    /// checkpoint). Critics and targets are freshly initialized from `seed`,
    /// so this is primarily for inference and continued training from the
    /// actor only. The actor's head must be `[mean | log_std]`, i.e. have
    /// even width.
    pub fn from_actor(actor: Mlp, bounds: (f64, f64), cfg: SacConfig, seed: u64) -> Result<Self, Error> {
        if actor.output_dim() % 2 != 0 || actor.output_dim() == 0 {
            return Err(SacError::InvalidConfig("actor head width must be even").into());
        }
        let obs_dim = actor.input_dim();
        let action_dim = actor.output_dim() / 2;
        let mut agent = Self::new(obs_dim, action_dim, bounds, cfg, seed)?;
        agent.opt_actor = OptimState::new(&actor, agent.cfg.lr);
        agent.actor = actor;
        Ok(agent)
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_bounds(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    fn center(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    /// Maps a pre-squash value into the action box.
    fn squash(&self, u: f64) -> f64 {
        self.center() + self.half_width() * math::tanh(u)
    }

    /// Deterministic action for an actor network (mean head, squashed); usable
    /// without a full agent, e.g. for frozen skill checkpoints.
    pub fn deterministic_action(
        actor: &Mlp,
        obs: &[f32],
        bounds: (f64, f64),
    ) -> Result<Vec<f64>, Error> {
        let out = actor.forward(obs)?;
        let dim = out.len() / 2;
        let (low, high) = bounds;
        let (c, h) = (0.5 * (low + high), 0.5 * (high - low));
        Ok((0..dim)
            .map(|j| c + h * math::tanh(out[j] as f64))
            .collect())
    }

    /// Samples an action in environment space. Deterministic mode uses the
    /// mean head; stochastic mode draws reparameterized Gaussian noise from
    /// the agent's stream.
    pub fn sample_action(&mut self, obs: &[f32], deterministic: bool) -> Result<Vec<f64>, Error> {
        let out = self.actor.forward(obs)?;
        let mut action = Vec::with_capacity(self.action_dim);
        for j in 0..self.action_dim {
            let mu = out[j] as f64;
            let u = if deterministic {
                mu
            } else {
                let ell = (out[self.action_dim + j] as f64).clamp(LOG_STD_MIN, LOG_STD_MAX);
                mu + math::exp(ell) * rng::standard_normal(&mut self.rng)
            };
            action.push(self.squash(u));
        }
        Ok(action)
    }

    /// Uniform random action in the box, drawn from the agent's stream (used
    /// during warmup).
    pub fn warmup_action(&mut self) -> Vec<f64> {
        (0..self.action_dim)
            .map(|_| rng::uniform(&mut self.rng, self.low, self.high))
            .collect()
    }

    /// Runs `gradient_steps` SAC updates on batches from `buffer`.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<LossReport, Error> {
        if buffer.len() < self.cfg.batch_size {
            return Err(SacError::BufferTooSmall {
                need: self.cfg.batch_size,
                have: buffer.len(),
            }
            .into());
        }
        let mut acc = LossReport {
            q1_loss: 0.0,
            q2_loss: 0.0,
            actor_loss: 0.0,
        };
        for _ in 0..self.cfg.gradient_steps {
            let idx = buffer.sample_indices(&mut self.rng, self.cfg.batch_size);
            let batch = self.assemble(buffer, &idx);
            let y = self.target_values(&batch)?;
            let (l1, l2) = self.critic_step(&batch, &y)?;
            let la = self.actor_step(&batch.s)?;
            soft_update(&mut self.q1_target, &self.q1, self.cfg.tau)?;
            soft_update(&mut self.q2_target, &self.q2, self.cfg.tau)?;
            self.grad_steps_done += 1;
            if !(l1.is_finite() && l2.is_finite() && la.is_finite()) {
                return Err(SacError::NonFiniteLoss {
                    step: self.grad_steps_done,
                }
                .into());
            }
            acc.q1_loss += l1;
            acc.q2_loss += l2;
            acc.actor_loss += la;
        }
        let n = self.cfg.gradient_steps as f64;
        Ok(LossReport {
            q1_loss: acc.q1_loss / n,
            q2_loss: acc.q2_loss / n,
            actor_loss: acc.actor_loss / n,
        })
    }

    fn assemble(&self, buffer: &ReplayBuffer, idx: &[usize]) -> BatchData {
        let b = idx.len();
        let mut s = Mat::zeros(b, self.obs_dim);
        let mut a = Mat::zeros(b, self.action_dim);
        let mut s2 = Mat::zeros(b, self.obs_dim);
        let mut r = Vec::with_capacity(b);
        let mut done = Vec::with_capacity(b);
        for (row, &i) in idx.iter().enumerate() {
            let t = buffer.get(i);
            for (dst, src) in s.row_mut(row).iter_mut().zip(&t.state) {
                *dst = *src as f64;
            }
            for (dst, src) in a.row_mut(row).iter_mut().zip(&t.action) {
                *dst = *src as f64;
            }
            for (dst, src) in s2.row_mut(row).iter_mut().zip(&t.next_state) {
                *dst = *src as f64;
            }
            r.push(t.reward as f64);
            done.push(t.done);
        }
        BatchData { s, a, s2, r, done }
    }

    /// Bellman targets `y = r + gamma (1 - done) (min Q_target - alpha logp)`
    /// with next actions sampled from the current actor.
    fn target_values(&mut self, batch: &BatchData) -> Result<Vec<f64>, Error> {
        let b = batch.s2.rows;
        let out = self.actor.forward_mat(&batch.s2)?;
        let mut qin = Mat::zeros(b, self.obs_dim + self.action_dim);
        let mut logp = vec![0.0; b];
        for row in 0..b {
            let o = out.row(row);
            let dst = qin.row_mut(row);
            dst[..self.obs_dim].copy_from_slice(batch.s2.row(row));
            for j in 0..self.action_dim {
                let mu = o[j];
                let ell = o[self.action_dim + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let xi = rng::standard_normal(&mut self.rng);
                let u = mu + math::exp(ell) * xi;
                dst[self.obs_dim + j] = self.squash(u);
                logp[row] += tanh_gauss_logp_dim(ell, xi, u, self.half_width());
            }
        }
        let q1 = self.q1_target.forward_mat(&qin)?;
        let q2 = self.q2_target.forward_mat(&qin)?;
        Ok((0..b)
            .map(|row| {
                let qmin = q1.data[row].min(q2.data[row]);
                let soft = qmin - self.cfg.alpha * logp[row];
                let mask = if batch.done[row] { 0.0 } else { 1.0 };
                batch.r[row] + self.cfg.gamma * mask * soft
            })
            .collect())
    }

    /// One MSE step on both critics against fixed targets.
    fn critic_step(&mut self, batch: &BatchData, y: &[f64]) -> Result<(f64, f64), Error> {
        let b = batch.s.rows;
        let mut qin = Mat::zeros(b, self.obs_dim + self.action_dim);
        for row in 0..b {
            let dst = qin.row_mut(row);
            dst[..self.obs_dim].copy_from_slice(batch.s.row(row));
            dst[self.obs_dim..].copy_from_slice(batch.a.row(row));
        }
        let mut losses = [0.0; 2];
        for (k, (net, opt)) in [
            (&mut self.q1, &mut self.opt_q1),
            (&mut self.q2, &mut self.opt_q2),
        ]
        .into_iter()
        .enumerate()
        {
            let (pred, cache) = net.forward_mat_cached(&qin)?;
            let mut upstream = Mat::zeros(b, 1);
            let mut loss = 0.0;
            for row in 0..b {
                let e = pred.data[row] - y[row];
                loss += e * e;
                upstream.data[row] = 2.0 * e / b as f64;
            }
            losses[k] = loss / b as f64;
            let (tape, _) = net.backward_mat(&cache, &upstream, false)?;
            adam_step(net, &tape, opt)?;
        }
        Ok((losses[0], losses[1]))
    }

    /// One step on the actor: minimize `mean(alpha logp - min(Q1, Q2))` with
    /// reparameterized noise drawn from the agent's stream.
    fn actor_step(&mut self, s: &Mat) -> Result<f64, Error> {
        let b = s.rows;
        let mut xi = Mat::zeros(b, self.action_dim);
        for v in xi.data.iter_mut() {
            *v = rng::standard_normal(&mut self.rng);
        }
        let (out, cache) = self.actor.forward_mat_cached(s)?;
        let (loss, upstream) = self.actor_head_grads(s, &out, &xi)?;
        let (tape, _) = self.actor.backward_mat(&cache, &upstream, false)?;
        adam_step(&mut self.actor, &tape, &mut self.opt_actor)?;
        Ok(loss)
    }

    /// Actor loss and its gradient w.r.t. the actor head outputs
    /// `[mu | log_std]`, as a pure function of the head values and the noise.
    /// Split out so tests can finite-difference it.
    fn actor_head_grads(&self, s: &Mat, head: &Mat, xi: &Mat) -> Result<(f64, Mat), Error> {
        let b = s.rows;
        let (adim, odim) = (self.action_dim, self.obs_dim);
        let h = self.half_width();

        // Forward through the squash.
        let mut qin = Mat::zeros(b, odim + adim);
        let mut t_all = Mat::zeros(b, adim);
        let mut clamped = vec![false; b * adim];
        let mut logp = vec![0.0; b];
        for row in 0..b {
            let o = head.row(row);
            let dst = qin.row_mut(row);
            dst[..odim].copy_from_slice(s.row(row));
            for j in 0..adim {
                let mu = o[j];
                let ell_raw = o[adim + j];
                let ell = ell_raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                clamped[row * adim + j] = ell_raw < LOG_STD_MIN || ell_raw > LOG_STD_MAX;
                let u = mu + math::exp(ell) * xi.row(row)[j];
                let t = math::tanh(u);
                t_all.row_mut(row)[j] = t;
                dst[odim + j] = self.center() + h * t;
                logp[row] += tanh_gauss_logp_dim(ell, xi.row(row)[j], u, h);
            }
        }

        let (v1, c1) = self.q1.forward_mat_cached(&qin)?;
        let (v2, c2) = self.q2.forward_mat_cached(&qin)?;
        let mut loss = 0.0;
        let mut up1 = Mat::zeros(b, 1);
        let mut up2 = Mat::zeros(b, 1);
        let inv_b = 1.0 / b as f64;
        for row in 0..b {
            let (q1v, q2v) = (v1.data[row], v2.data[row]);
            let qmin = q1v.min(q2v);
            loss += self.cfg.alpha * logp[row] - qmin;
            // Route the -qmin gradient to whichever critic is active.
            if q1v <= q2v {
                up1.data[row] = -inv_b;
            } else {
                up2.data[row] = -inv_b;
            }
        }
        loss *= inv_b;

        // d(-mean qmin)/d qin, summed over the two (masked) critics.
        let g1 = self.q1.backward_mat(&c1, &up1, true)?.1.expect("input grad");
        let g2 = self.q2.backward_mat(&c2, &up2, true)?.1.expect("input grad");

        let mut upstream = Mat::zeros(b, 2 * adim);
        for row in 0..b {
            let o = head.row(row);
            let dst = upstream.row_mut(row);
            for j in 0..adim {
                let t = t_all.row(row)[j];
                let ga = g1.row(row)[odim + j] + g2.row(row)[odim + j];
                // dL/du: critic path through the squash plus the entropy
                // term's 2*tanh(u).
                let g_u = ga * h * (1.0 - t * t) + self.cfg.alpha * inv_b * 2.0 * t;
                dst[j] = g_u;
                if !clamped[row * adim + j] {
                    let ell = o[adim + j];
                    let sigma = math::exp(ell);
                    dst[adim + j] = g_u * sigma * xi.row(row)[j] - self.cfg.alpha * inv_b;
                }
            }
        }
        Ok((loss, upstream))
    }

    /// Hash of every learnable parameter (actor, critics, targets).
    pub fn param_hash(&self) -> u64 {
        let mut h = crate::net::Fnv1a::new();
        for net in [&self.actor, &self.q1, &self.q2, &self.q1_target, &self.q2_target] {
            h.write(&net.param_hash().to_le_bytes());
        }
        h.finish()
    }
}

struct BatchData {
    s: Mat,
    a: Mat,
    s2: Mat,
    r: Vec<f64>,
    done: Vec<bool>,
}

/// What an environment returns from one step.
#[derive(Debug, Clone)]
pub struct EnvTransition {
    pub obs: Vec<f32>,
    pub reward: f64,
    /// True terminal state (bootstrap target is cut off here).
    pub terminal: bool,
    /// Episode is over for any reason, including truncation.
    pub episode_end: bool,
}

/// Minimal environment interface for the training driver.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Uniform per-dimension action box.
    fn action_bounds(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
    fn reset(&mut self) -> Result<Vec<f32>, Error>;
    fn step(&mut self, action: &[f64]) -> Result<EnvTransition, Error>;
}

impl Environment for DrivingEnv {
    fn obs_dim(&self) -> usize {
        crate::sim::OBS_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Result<Vec<f32>, Error> {
        Ok(DrivingEnv::reset(self)?.as_slice().to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvTransition, Error> {
        let r = DrivingEnv::step(self, ControlAction::new(action[0], action[1]))?;
        Ok(EnvTransition {
            obs: r.observation.as_slice().to_vec(),
            reward: r.reward,
            // The step cap truncates without a terminal state.
            terminal: matches!(
                r.cause,
                TerminationCause::Collision | TerminationCause::OffTrack
            ),
            episode_end: r.terminated,
        })
    }
}

/// A deterministic continuous bandit: observation is always `[0]`, reward is
/// `-(a - target)^2` summed over dimensions, episodes last one step. Used by
/// convergence diagnostics.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    target: Vec<f64>,
}

impl BanditEnv {
    pub fn new(target: Vec<f64>) -> Self {
        BanditEnv { target }
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

impl Environment for BanditEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        self.target.len()
    }

    fn reset(&mut self) -> Result<Vec<f32>, Error> {
        Ok(vec![0.0])
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvTransition, Error> {
        let reward = -action
            .iter()
            .zip(&self.target)
            .map(|(a, t)| (a - t) * (a - t))
            .sum::<f64>();
        Ok(EnvTransition {
            obs: vec![0.0],
            reward,
            terminal: true,
            episode_end: true,
        })
    }
}

/// One row of the training log; a row is emitted whenever an episode ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    /// Global environment steps completed when the episode ended.
    pub step: u64,
    /// 1-based index of the completed episode.
    pub episode: u64,
    pub episodic_reward: f64,
    /// Losses from the most recent update (0 until learning starts).
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub actor_loss: f64,
}

pub type TrainLog = Vec<TrainLogRow>;

/// Trains a fresh SAC agent by stepping environments round-robin.
///
/// `make_env(i)` builds the environment for rank `i`; factories should derive
/// per-rank randomness from their own seed plus the rank so runs are
/// reproducible. The agent's streams derive from `seed`.
pub fn pretrain<F>(mut make_env: F, cfg: &SacConfig, seed: u64) -> Result<(SacAgent, TrainLog), Error>
where
    F: FnMut(u32) -> Result<Box<dyn Environment>, Error>,
{
    cfg.validate()?;
    let mut envs: Vec<Box<dyn Environment>> = (0..cfg.num_envs)
        .map(&mut make_env)
        .collect::<Result<_, _>>()?;
    let first = &envs[0];
    let (obs_dim, action_dim, bounds) =
        (first.obs_dim(), first.action_dim(), first.action_bounds());
    for e in &envs {
        if e.obs_dim() != obs_dim || e.action_dim() != action_dim {
            return Err(SacError::EnvMismatch("observation/action dims").into());
        }
        if e.action_bounds() != bounds {
            return Err(SacError::EnvMismatch("action bounds").into());
        }
    }
    let mut agent = SacAgent::new(obs_dim, action_dim, bounds, cfg.clone(), seed)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let log = run_driver(&mut agent, &mut envs, &mut buffer, cfg)?;
    Ok((agent, log))
}

/// The shared collect-and-train loop; also used by the master-policy trainer.
pub(crate) fn run_driver(
    agent: &mut SacAgent,
    envs: &mut [Box<dyn Environment>],
    buffer: &mut ReplayBuffer,
    cfg: &SacConfig,
) -> Result<TrainLog, Error> {
    let n = envs.len();
    let mut obs: Vec<Vec<f32>> = Vec::with_capacity(n);
    for env in envs.iter_mut() {
        obs.push(env.reset()?);
    }
    let mut ep_reward = vec![0.0f64; n];
    let mut log = TrainLog::new();
    let mut episodes = 0u64;
    let mut last_losses = LossReport {
        q1_loss: 0.0,
        q2_loss: 0.0,
        actor_loss: 0.0,
    };
    let update_every = cfg.effective_update_every();

    for step in 0..cfg.total_steps {
        let k = (step % n as u64) as usize;
        let action = if step < cfg.warmup_steps {
            agent.warmup_action()
        } else {
            agent.sample_action(&obs[k], false)?
        };
        let tr = envs[k].step(&action)?;
        buffer.push(Transition {
            state: core::mem::take(&mut obs[k]),
            action: action.iter().map(|&a| a as f32).collect(),
            reward: tr.reward as f32,
            next_state: tr.obs.clone(),
            done: tr.terminal,
        });
        ep_reward[k] += tr.reward;
        let steps_done = step + 1;

        if tr.episode_end {
            episodes += 1;
            log.push(TrainLogRow {
                step: steps_done,
                episode: episodes,
                episodic_reward: ep_reward[k],
                q1_loss: last_losses.q1_loss,
                q2_loss: last_losses.q2_loss,
                actor_loss: last_losses.actor_loss,
            });
            ep_reward[k] = 0.0;
            obs[k] = envs[k].reset()?;
        } else {
            obs[k] = tr.obs;
        }

        if steps_done >= cfg.warmup_steps
            && buffer.len() >= cfg.batch_size
            && steps_done % update_every == 0
        {
            last_losses = agent.update(buffer)?;
        }
    }
    Ok(log)
}
