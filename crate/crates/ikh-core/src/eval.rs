//! Evaluation harness: episode rollouts, sector statistics, spawn-position
//! heatmaps and step-level weight traces.
//!
//! Progress is scored in completed track sectors per episode and aggregated
//! into coarse bins (`0-2`, `3-5`, `6-8`, `9+`). Evaluations run the same
//! episode count under several seeds so that means come with a variance. The
//! heatmap groups episodes by the track segment the ego spawned in, which
//! localizes where a policy tends to fail; traces record the master's
//! blending weights at every step alongside the executed control.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::compose::IkhAgent;
use crate::math;
use crate::net::Mlp;
use crate::sac::SacAgent;
use crate::sim::{ControlAction, DrivingEnv, EnvConfig, TerminationCause, LAT_CLIP, VEL_CLIP};
use crate::track::TrackSpec;
use crate::Error;

/// Labels for the sector-count bins, in order.
pub const BIN_LABELS: [&str; 4] = ["0-2", "3-5", "6-8", "9+"];

/// Maps a sector count to its bin index (0..4).
pub fn sector_bin(sectors: u32) -> usize {
    match sectors {
        0..=2 => 0,
        3..=5 => 1,
        6..=8 => 2,
        _ => 3,
    }
}

/// Evaluation errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("policy does not expose blending weights; tracing needs a composed agent")]
    NotComposable,
    #[error("forced skill index {index} out of range for {count} skills")]
    BadForcedSkill { index: usize, count: usize },
}

/// Counts completed sectors along a sequence of centerline arc lengths, the
/// first being the spawn position. Reverse crossings are paid back before
/// forward progress counts again; the result never decreases.
pub fn count_sectors(track: &TrackSpec, s_sequence: &[f64]) -> u32 {
    let Some((first, rest)) = s_sequence.split_first() else {
        return 0;
    };
    let mut counter = crate::track::SectorCounter::new(track, *first);
    for &s in rest {
        counter.observe(track, s);
    }
    counter.completed()
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode index within its seed run.
    pub episode: u64,
    /// Track segment the ego spawned in.
    pub spawn_sector: usize,
    pub steps: u32,
    /// Net sectors completed (never negative).
    pub sectors: u32,
    pub total_reward: f64,
    pub cause: TerminationCause,
}

/// Episodes gathered under one evaluation seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

/// Aggregated evaluation results across seeds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub runs: Vec<SeedRun>,
}

impl EvalReport {
    /// All episode records across every seed, in run order.
    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.runs.iter().flat_map(|r| r.episodes.iter())
    }

    pub fn episode_count(&self) -> usize {
        self.runs.iter().map(|r| r.episodes.len()).sum()
    }

    pub fn mean_sectors(&self) -> f64 {
        let n = self.episode_count();
        if n == 0 {
            return 0.0;
        }
        self.records().map(|e| e.sectors as f64).sum::<f64>() / n as f64
    }

    /// Population variance of per-episode sector counts.
    pub fn variance_sectors(&self) -> f64 {
        let n = self.episode_count();
        if n == 0 {
            return 0.0;
        }
        let mean = self.mean_sectors();
        self.records()
            .map(|e| {
                let d = e.sectors as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64
    }

    pub fn mean_reward(&self) -> f64 {
        let n = self.episode_count();
        if n == 0 {
            return 0.0;
        }
        self.records().map(|e| e.total_reward).sum::<f64>() / n as f64
    }

    /// Episodes per sector bin.
    pub fn bin_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for e in self.records() {
            counts[sector_bin(e.sectors)] += 1;
        }
        counts
    }

    /// Fraction of episodes per sector bin (zero for an empty report).
    pub fn bin_fractions(&self) -> [f64; 4] {
        let counts = self.bin_counts();
        let n = self.episode_count().max(1) as f64;
        [
            counts[0] as f64 / n,
            counts[1] as f64 / n,
            counts[2] as f64 / n,
            counts[3] as f64 / n,
        ]
    }
}

/// Per-spawn-segment aggregate for the heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    /// Track segment index the episodes spawned in.
    pub segment: usize,
    pub episodes: u64,
    pub mean_sectors: f64,
    pub mean_reward: f64,
}

/// Groups a report by spawn segment, ascending. Segments the ego never
/// spawned in are absent from the result.
pub fn spawn_heatmap(report: &EvalReport) -> Vec<HeatmapRow> {
    let mut groups: BTreeMap<usize, (u64, f64, f64)> = BTreeMap::new();
    for e in report.records() {
        let g = groups.entry(e.spawn_sector).or_insert((0, 0.0, 0.0));
        g.0 += 1;
        g.1 += e.sectors as f64;
        g.2 += e.total_reward;
    }
    groups
        .into_iter()
        .map(|(segment, (n, sectors, reward))| HeatmapRow {
            segment,
            episodes: n,
            mean_sectors: sectors / n as f64,
            mean_reward: reward / n as f64,
        })
        .collect()
}

/// One step of a weight trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based step within the episode.
    pub step: u64,
    /// 1-based episode index.
    pub episode: u64,
    /// Track segment the ego occupied after the step.
    pub sector: usize,
    pub reward: f64,
    /// Master weights used for this step, one per skill in manifest order.
    pub weights: Vec<f64>,
    /// Executed (blended) control after clamping to the action box.
    pub steer: f64,
    pub accel: f64,
}

/// A deterministic controller that can drive the simulator. Implementations
/// may expose the blending weights behind each action; `None` means the
/// policy is not a composition.
pub trait Policy {
    fn act(&mut self, obs: &[f32]) -> Result<(ControlAction, Option<Vec<f64>>), Error>;
    /// Called at every episode start; stateless policies ignore it.
    fn reset(&mut self) {}
}

/// Never steers, never accelerates: the floor any driving policy must beat.
#[derive(Debug, Clone, Default)]
pub struct StationaryPolicy;

impl Policy for StationaryPolicy {
    fn act(&mut self, _obs: &[f32]) -> Result<(ControlAction, Option<Vec<f64>>), Error> {
        Ok((ControlAction::new(0.0, 0.0), None))
    }
}

/// Proportional lane-keeping controller driven purely by the ego row of the
/// observation. Steers against lateral and angular offset and regulates
/// speed toward a target.
#[derive(Debug, Clone)]
pub struct ScriptedLaneKeeper {
    /// Steering angle per meter of lateral offset (radians).
    pub lat_gain: f64,
    /// Steering angle per radian of heading error.
    pub ang_gain: f64,
    /// Desired speed in m/s.
    pub target_speed: f64,
    /// Maximum physical steering angle, used to normalize the command.
    pub steer_max: f64,
    /// Maximum acceleration, used to normalize the throttle command.
    pub accel_max: f64,
}

impl ScriptedLaneKeeper {
    /// Gains that lap the bundled tracks at the given cruise speed.
    pub fn with_speed(target_speed: f64, steer_max: f64, accel_max: f64) -> Self {
        ScriptedLaneKeeper {
            lat_gain: 0.06,
            ang_gain: 0.9,
            target_speed,
            steer_max,
            accel_max,
        }
    }

    /// Keeper matched to an environment's target speed and control limits.
    pub fn for_config(cfg: &EnvConfig) -> Self {
        Self::with_speed(cfg.v_target, cfg.steer_max, cfg.accel_max)
    }
}

impl Policy for ScriptedLaneKeeper {
    fn act(&mut self, obs: &[f32]) -> Result<(ControlAction, Option<Vec<f64>>), Error> {
        // Ego row layout: [presence, x, y, vx, vy, heading, long, lat, ang].
        let lat = obs[7] as f64 * LAT_CLIP;
        let ang = obs[8] as f64 * math::PI;
        let speed = math::hypot(obs[3] as f64 * VEL_CLIP, obs[4] as f64 * VEL_CLIP);
        let steer_angle = -(self.lat_gain * lat + self.ang_gain * ang);
        let steer = (steer_angle / self.steer_max).clamp(-1.0, 1.0);
        let accel = ((self.target_speed - speed) / self.accel_max).clamp(-1.0, 1.0);
        Ok((ControlAction::new(steer, accel), None))
    }
}

/// Deterministic wrapper around a trained SAC driving actor.
#[derive(Debug, Clone)]
pub struct SacPolicy {
    actor: Mlp,
}

impl SacPolicy {
    pub fn new(actor: Mlp) -> Self {
        SacPolicy { actor }
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }
}

impl Policy for SacPolicy {
    fn act(&mut self, obs: &[f32]) -> Result<(ControlAction, Option<Vec<f64>>), Error> {
        let a = SacAgent::deterministic_action(&self.actor, obs, (-1.0, 1.0))?;
        Ok((ControlAction::new(a[0], a[1]), None))
    }
}

/// Deterministic wrapper around a composed agent. With `forced_skill` set,
/// the master is bypassed and a one-hot weight vector selects that skill.
pub struct IkhPolicy {
    agent: IkhAgent,
    forced_skill: Option<usize>,
}

impl IkhPolicy {
    pub fn new(agent: IkhAgent) -> Self {
        IkhPolicy {
            agent,
            forced_skill: None,
        }
    }

    pub fn with_forced_skill(agent: IkhAgent, index: usize) -> Result<Self, Error> {
        let count = agent.policies().len();
        if index >= count {
            return Err(EvalError::BadForcedSkill { index, count }.into());
        }
        Ok(IkhPolicy {
            agent,
            forced_skill: Some(index),
        })
    }

    pub fn agent(&self) -> &IkhAgent {
        &self.agent
    }
}

impl Policy for IkhPolicy {
    fn act(&mut self, obs: &[f32]) -> Result<(ControlAction, Option<Vec<f64>>), Error> {
        let (action, weights) = match self.forced_skill {
            Some(i) => {
                let mut w = alloc::vec![0.0; self.agent.policies().len()];
                w[i] = 1.0;
                (self.agent.act_with_weights(obs, &w)?, w)
            }
            None => self.agent.act(obs, true)?,
        };
        Ok((ControlAction::new(action[0], action[1]), Some(weights)))
    }
}

/// Runs `episodes` full episodes on one environment and collects records.
/// The environment's own stream drives spawning, so results are reproducible
/// for a fixed seed. Zero episodes yield an empty list.
pub fn evaluate(
    env: &mut DrivingEnv,
    policy: &mut dyn Policy,
    episodes: u64,
) -> Result<Vec<EpisodeRecord>, Error> {
    let mut records = Vec::new();
    for episode in 1..=episodes {
        policy.reset();
        let mut obs = env.reset()?;
        let mut total_reward = 0.0;
        loop {
            let (action, _) = policy.act(obs.as_slice())?;
            let step = env.step(action)?;
            total_reward += step.reward;
            if step.terminated {
                break;
            }
            obs = step.observation;
        }
        records.push(EpisodeRecord {
            episode,
            spawn_sector: env.spawn_sector(),
            steps: env.step_count(),
            sectors: env.sectors_completed(),
            total_reward,
            cause: env.termination_cause(),
        });
    }
    Ok(records)
}

/// Runs `episodes` episodes under each seed in turn, rebuilding the
/// environment with that spawn seed, and aggregates everything into a report.
pub fn evaluate_seeds(
    cfg: &EnvConfig,
    policy: &mut dyn Policy,
    episodes: u64,
    seeds: &[u64],
) -> Result<EvalReport, Error> {
    let mut report = EvalReport::default();
    for &seed in seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.spawn.seed = seed;
        let mut env = DrivingEnv::new(run_cfg)?;
        report.runs.push(SeedRun {
            seed,
            episodes: evaluate(&mut env, policy, episodes)?,
        });
    }
    Ok(report)
}

/// Runs episodes like [`evaluate`] but records every step's weights and
/// executed control. Fails with [`EvalError::NotComposable`] if the policy
/// does not expose weights.
pub fn record_trace(
    env: &mut DrivingEnv,
    policy: &mut dyn Policy,
    episodes: u64,
) -> Result<Vec<TraceRow>, Error> {
    let mut rows = Vec::new();
    for episode in 1..=episodes {
        policy.reset();
        let mut obs = env.reset()?;
        let mut step_idx = 0u64;
        loop {
            let (action, weights) = policy.act(obs.as_slice())?;
            let weights = weights.ok_or(EvalError::NotComposable)?;
            let clamped = action.clamped();
            let step = env.step(action)?;
            step_idx += 1;
            rows.push(TraceRow {
                step: step_idx,
                episode,
                sector: env.track().sector_of(step.lane_frame.s),
                reward: step.reward,
                weights,
                steer: clamped.steer,
                accel: clamped.accel,
            });
            if step.terminated {
                break;
            }
            obs = step.observation;
        }
    }
    Ok(rows)
}
