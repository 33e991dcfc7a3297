//! Composition of frozen skill policies under a trainable master.
//!
//! A [`PolicySet`] holds the frozen skill actors. The master policy is a SAC
//! agent whose action is a weight vector `w` in `[0, 1]^m`; the executed
//! control is the weighted average of the skills' deterministic actions,
//!
//! ```text
//! a = sum_i w_i a_i / max(sum_i w_i, WEIGHT_EPS)
//! ```
//!
//! [`BlendedEnv`] exposes this construction as an ordinary environment whose
//! action space is the weight simplex box, so the standard SAC driver trains
//! the master while the replay buffer stores weight vectors. [`train_master`]
//! wires it together and verifies afterwards that no frozen parameter moved.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::net::Mlp;
use crate::sac::{self, EnvTransition, Environment, SacAgent, SacConfig, TrainLog};
use crate::Error;

/// Floor for the weight normalizer: an all-zero weight vector blends to the
/// zero action instead of dividing by zero.
pub const WEIGHT_EPS: f64 = 1e-6;

/// Composition errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("policy set must contain at least one policy")]
    EmptyPolicySet,
    #[error("policy set mismatch: {0}")]
    PolicyMismatch(&'static str),
    #[error("expected {want} weights, got {got}")]
    WeightCount { want: usize, got: usize },
    #[error("weight {index} is {value} but must be nonnegative and finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("frozen policy {index} changed during master training")]
    FrozenPolicyMutated { index: usize },
}

/// An immutable, labelled collection of frozen skill actors. All actors must
/// share one observation space and one action space.
#[derive(Debug, Clone)]
pub struct PolicySet {
    labels: Vec<String>,
    actors: Vec<Mlp>,
    obs_dim: usize,
    action_dim: usize,
    /// Action box shared by every skill.
    bounds: (f64, f64),
}

impl PolicySet {
    /// Validates and freezes a set of skill actors. Actor outputs are
    /// `[mean | log_std]` heads, so their output width must be twice the
    /// action dimension.
    pub fn new(labels: Vec<String>, actors: Vec<Mlp>, bounds: (f64, f64)) -> Result<Self, Error> {
        if actors.is_empty() {
            return Err(ComposeError::EmptyPolicySet.into());
        }
        if labels.len() != actors.len() {
            return Err(ComposeError::PolicyMismatch("label and actor counts differ").into());
        }
        let obs_dim = actors[0].input_dim();
        let head = actors[0].output_dim();
        if head % 2 != 0 || head == 0 {
            return Err(ComposeError::PolicyMismatch("actor head width must be even").into());
        }
        for a in &actors {
            if a.input_dim() != obs_dim {
                return Err(ComposeError::PolicyMismatch("observation dims differ").into());
            }
            if a.output_dim() != head {
                return Err(ComposeError::PolicyMismatch("action dims differ").into());
            }
        }
        let (low, high) = bounds;
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(ComposeError::PolicyMismatch("invalid action bounds").into());
        }
        Ok(PolicySet {
            labels,
            actors,
            obs_dim,
            action_dim: head / 2,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.actors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actors.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn actor(&self, i: usize) -> &Mlp {
        &self.actors[i]
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Parameter hash of every actor, in order.
    pub fn param_hashes(&self) -> Vec<u64> {
        self.actors.iter().map(Mlp::param_hash).collect()
    }

    /// Deterministic action of every skill for one observation.
    pub fn actions(&self, obs: &[f32]) -> Result<Vec<Vec<f64>>, Error> {
        self.actors
            .iter()
            .map(|a| SacAgent::deterministic_action(a, obs, self.bounds))
            .collect()
    }
}

/// Weighted average of per-skill actions with an epsilon-floored normalizer.
/// Weights must be nonnegative and finite; the normalization makes the blend
/// invariant to positive rescaling, and an all-zero vector yields the zero
/// action. The result is clamped to `[-1, 1]` per component (a no-op for
/// genuinely convex combinations; it only guards rounding at the box edge).
pub fn combine_actions(actions: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>, Error> {
    if actions.is_empty() {
        return Err(ComposeError::EmptyPolicySet.into());
    }
    if weights.len() != actions.len() {
        return Err(ComposeError::WeightCount {
            want: actions.len(),
            got: weights.len(),
        }
        .into());
    }
    let dim = actions[0].len();
    if actions.iter().any(|a| a.len() != dim) {
        return Err(ComposeError::PolicyMismatch("action dims differ").into());
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(ComposeError::InvalidWeight { index, value: w }.into());
        }
    }
    let total: f64 = weights.iter().sum();
    let norm = total.max(WEIGHT_EPS);
    let mut out = alloc::vec![0.0; dim];
    for (a, &w) in actions.iter().zip(weights) {
        for (o, &v) in out.iter_mut().zip(a) {
            *o += w * v;
        }
    }
    for o in out.iter_mut() {
        *o = (*o / norm).clamp(-1.0, 1.0);
    }
    Ok(out)
}

/// A frozen policy set plus a trained master: the complete composed agent.
#[derive(Debug, Clone)]
pub struct IkhAgent {
    policies: Arc<PolicySet>,
    master: SacAgent,
}

impl IkhAgent {
    /// Pairs a master with its skills, validating that the master's action
    /// space is the weight box over exactly these skills.
    pub fn new(policies: Arc<PolicySet>, master: SacAgent) -> Result<Self, Error> {
        if master.obs_dim() != policies.obs_dim() {
            return Err(ComposeError::PolicyMismatch("master observation dim").into());
        }
        if master.action_dim() != policies.len() {
            return Err(ComposeError::WeightCount {
                want: policies.len(),
                got: master.action_dim(),
            }
            .into());
        }
        if master.action_bounds() != (0.0, 1.0) {
            return Err(ComposeError::PolicyMismatch("master bounds must be [0, 1]").into());
        }
        Ok(IkhAgent { policies, master })
    }

    pub fn policies(&self) -> &PolicySet {
        &self.policies
    }

    pub fn master(&self) -> &SacAgent {
        &self.master
    }

    /// Blended action under the master's weights; returns `(action, weights)`.
    pub fn act(&mut self, obs: &[f32], deterministic: bool) -> Result<(Vec<f64>, Vec<f64>), Error> {
        let weights = self.master.sample_action(obs, deterministic)?;
        let action = self.act_with_weights(obs, &weights)?;
        Ok((action, weights))
    }

    /// Blended action under externally forced weights (used for one-hot
    /// skill inspection).
    pub fn act_with_weights(&self, obs: &[f32], weights: &[f64]) -> Result<Vec<f64>, Error> {
        combine_actions(&self.policies.actions(obs)?, weights)
    }
}

/// Wraps an environment so its action space becomes the master's weight box:
/// each step blends the frozen skills' actions under the given weights and
/// forwards the result to the inner environment.
pub struct BlendedEnv {
    inner: Box<dyn Environment>,
    policies: Arc<PolicySet>,
    last_obs: Vec<f32>,
}

impl BlendedEnv {
    pub fn new(inner: Box<dyn Environment>, policies: Arc<PolicySet>) -> Result<Self, Error> {
        if inner.obs_dim() != policies.obs_dim() {
            return Err(ComposeError::PolicyMismatch("environment observation dim").into());
        }
        if inner.action_bounds() != policies.bounds() {
            return Err(ComposeError::PolicyMismatch("environment action bounds").into());
        }
        Ok(BlendedEnv {
            inner,
            policies,
            last_obs: Vec::new(),
        })
    }
}

impl Environment for BlendedEnv {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.policies.len()
    }

    fn action_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn reset(&mut self) -> Result<Vec<f32>, Error> {
        self.last_obs = self.inner.reset()?;
        Ok(self.last_obs.clone())
    }

    fn step(&mut self, weights: &[f64]) -> Result<EnvTransition, Error> {
        let blended = combine_actions(&self.policies.actions(&self.last_obs)?, weights)?;
        let tr = self.inner.step(&blended)?;
        self.last_obs = tr.obs.clone();
        Ok(tr)
    }
}

/// Trains a master policy over a frozen skill set with SAC, storing weight
/// vectors in replay. After training, every skill's parameter hash is checked
/// against its pre-training value; any drift is an error.
pub fn train_master<F>(
    policies: Arc<PolicySet>,
    mut make_env: F,
    cfg: &SacConfig,
    seed: u64,
) -> Result<(IkhAgent, TrainLog), Error>
where
    F: FnMut(u32) -> Result<Box<dyn Environment>, Error>,
{
    cfg.validate()?;
    let hashes_before = policies.param_hashes();
    let mut envs: Vec<Box<dyn Environment>> = (0..cfg.num_envs)
        .map(|i| {
            let inner = make_env(i)?;
            Ok::<_, Error>(Box::new(BlendedEnv::new(inner, Arc::clone(&policies))?)
                as Box<dyn Environment>)
        })
        .collect::<Result<_, _>>()?;
    let mut master = SacAgent::new(policies.obs_dim(), policies.len(), (0.0, 1.0), cfg.clone(), seed)?;
    let mut buffer = sac::ReplayBuffer::new(cfg.buffer_capacity);
    let log = sac::run_driver(&mut master, &mut envs, &mut buffer, cfg)?;
    for (index, (before, after)) in hashes_before
        .iter()
        .zip(policies.param_hashes())
        .enumerate()
    {
        if *before != after {
            return Err(ComposeError::FrozenPolicyMutated { index }.into());
        }
    }
    let agent = IkhAgent::new(policies, master)?;
    Ok((agent, log))
}
