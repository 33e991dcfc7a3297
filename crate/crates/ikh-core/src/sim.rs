//! Kinematic driving simulator.
//!
//! One ego vehicle under continuous steering/acceleration control, plus
//! scripted traffic that follows the centerline with simple gap keeping.
//! Episodes end on collision, leaving the lane, or a step cap.
//!
//! The bicycle model is integrated exactly along constant-curvature arcs:
//! within one step the path curvature `tan(steer * steer_max) / wheelbase` is
//! held fixed, so a constant steering input traces a perfect circle rather
//! than a polygonal approximation of one.

use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::rng::{self, ChaCha8Rng};
use crate::track::{sample_spawn, LaneFrame, Pose, SectorCounter, SpawnConfig, SpawnError, TrackSpec};

/// Observation rows: ego plus up to four traffic vehicles.
pub const OBS_ROWS: usize = 5;
/// Features per row.
pub const OBS_COLS: usize = 9;
/// Total observation length.
pub const OBS_DIM: usize = OBS_ROWS * OBS_COLS;

/// Clip range for positions and longitudinal offsets, meters.
pub const POS_CLIP: f64 = 100.0;
/// Clip range for velocities, m/s.
pub const VEL_CLIP: f64 = 20.0;
/// Clip range for lateral offsets, meters.
pub const LAT_CLIP: f64 = 10.0;

/// Simulator errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step() called on a terminated episode; call reset() first")]
    SteppedAfterTermination,
    #[error("invalid environment config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Spawn(#[from] SpawnError),
}

/// Why an episode ended (or [`TerminationCause::None`] while it runs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationCause {
    None,
    /// Ego rectangle overlapped a traffic rectangle.
    Collision,
    /// Ego center left the lane: `|d_lat| > lane_width / 2`.
    OffTrack,
    /// Step cap reached; not a failure, bootstrapping may continue.
    MaxSteps,
}

/// Continuous control input; both channels are clamped into `[-1, 1]` and
/// scaled by `steer_max` / `accel_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    pub steer: f64,
    pub accel: f64,
}

impl ControlAction {
    pub fn new(steer: f64, accel: f64) -> Self {
        ControlAction { steer, accel }
    }

    pub fn clamped(self) -> Self {
        ControlAction {
            steer: self.steer.clamp(-1.0, 1.0),
            accel: self.accel.clamp(-1.0, 1.0),
        }
    }
}

/// Physical state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians, wrapped to `(-pi, pi]`.
    pub heading: f64,
    /// Forward speed, m/s; never negative.
    pub speed: f64,
}

impl VehicleState {
    fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }

    fn velocity(&self) -> (f64, f64) {
        (
            self.speed * math::cos(self.heading),
            self.speed * math::sin(self.heading),
        )
    }
}

/// A scripted traffic vehicle pinned to the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficCar {
    /// Arc-length position along the track.
    pub s: f64,
    pub speed: f64,
    /// Preferred cruising speed.
    pub cruise: f64,
}

/// Full environment configuration.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub track: Arc<TrackSpec>,
    pub spawn: SpawnConfig,
    /// Simulation step, seconds (5 Hz default).
    pub dt: f64,
    /// Episode step cap.
    pub max_steps: u32,
    /// Speed that earns the full speed reward, m/s.
    pub v_target: f64,
    /// Hard speed cap, m/s.
    pub v_max: f64,
    /// Maximum steering angle at |steer| = 1, radians.
    pub steer_max: f64,
    /// Maximum acceleration at |accel| = 1, m/s^2.
    pub accel_max: f64,
    /// Bicycle wheelbase, meters.
    pub wheelbase: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Speed-term weight in the reward.
    pub c_v: f64,
    /// Lane-centering weight in the reward.
    pub c_l: f64,
    pub off_track_penalty: f64,
    pub collision_penalty: f64,
}

impl EnvConfig {
    /// Defaults for a given track: 5 Hz, 300-step episodes, 8 m/s target.
    pub fn new(track: Arc<TrackSpec>) -> Self {
        EnvConfig {
            track,
            spawn: SpawnConfig::default(),
            dt: 0.2,
            max_steps: 300,
            v_target: 8.0,
            v_max: 12.0,
            steer_max: 0.4,
            accel_max: 4.0,
            wheelbase: 2.5,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            c_v: 0.4,
            c_l: 0.6,
            off_track_penalty: 1.0,
            collision_penalty: 1.0,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.dt) {
            return Err(SimError::InvalidConfig("dt must be positive"));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidConfig("max_steps must be positive"));
        }
        if !ok(self.v_target) || !ok(self.v_max) || self.v_max < self.v_target {
            return Err(SimError::InvalidConfig(
                "need 0 < v_target <= v_max",
            ));
        }
        if !(ok(self.steer_max) && self.steer_max < math::PI / 2.0) {
            return Err(SimError::InvalidConfig("steer_max must lie in (0, pi/2)"));
        }
        if !ok(self.accel_max) || !ok(self.wheelbase) {
            return Err(SimError::InvalidConfig(
                "accel_max and wheelbase must be positive",
            ));
        }
        if !ok(self.vehicle_length) || !ok(self.vehicle_width) {
            return Err(SimError::InvalidConfig("vehicle dims must be positive"));
        }
        if !(self.c_v >= 0.0 && self.c_l >= 0.0 && math::fabs(self.c_v + self.c_l - 1.0) <= 1e-9)
        {
            return Err(SimError::InvalidConfig(
                "reward weights must be nonnegative and sum to 1",
            ));
        }
        if self.off_track_penalty < 0.0 || self.collision_penalty < 0.0 {
            return Err(SimError::InvalidConfig("penalties must be nonnegative"));
        }
        Ok(())
    }

    /// Shaped reward for a post-step state. Without a termination penalty the
    /// value lies in `[0, 1]`: a lane-centered ego at `v_target` earns 1.
    pub fn reward(&self, frame: &LaneFrame, speed: f64, cause: TerminationCause) -> f64 {
        let speed_term = (speed / self.v_target).clamp(0.0, 1.0);
        let half = self.track.lane_width() / 2.0;
        let lane_pos = frame.d_lat / half;
        let lane_term = (1.0 - lane_pos * lane_pos).max(0.0);
        let mut r = self.c_v * speed_term + self.c_l * lane_term;
        match cause {
            TerminationCause::Collision => r -= self.collision_penalty,
            TerminationCause::OffTrack => r -= self.off_track_penalty,
            TerminationCause::None | TerminationCause::MaxSteps => {}
        }
        r
    }
}

/// Flat observation: 5 rows x 9 columns, row-major.
///
/// Row 0 is the ego in absolute coordinates; rows 1-4 are the nearest traffic
/// vehicles ordered by Euclidean distance, with positions and velocities
/// relative to the ego (world axes). Columns:
///
/// ```text
/// 0 presence | 1 x | 2 y | 3 vx | 4 vy | 5 heading | 6 long_off | 7 lat_off | 8 ang_off
/// ```
///
/// Scaling: positions and `long_off` are clipped to +-100 m and divided by
/// 100; velocities clipped to +-20 m/s and divided by 20; `lat_off` clipped
/// to +-10 m and divided by 10; angles wrapped and divided by pi; presence is
/// 0 or 1 unscaled. Absent rows are all zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f32; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.0[i * OBS_COLS..(i + 1) * OBS_COLS]
    }
}

/// Outcome of one simulator step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// True when the episode is over for any cause, including the step cap.
    pub terminated: bool,
    pub cause: TerminationCause,
    /// Ego lane frame after the step.
    pub lane_frame: LaneFrame,
}

/// The driving environment.
#[derive(Debug, Clone)]
pub struct DrivingEnv {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    ego: VehicleState,
    traffic: Vec<TrafficCar>,
    frame: LaneFrame,
    sectors: SectorCounter,
    spawn_sector: usize,
    step_count: u32,
    terminated: bool,
    cause: TerminationCause,
}

impl DrivingEnv {
    /// Builds the environment for rank 0 of `cfg.spawn.seed`. The first
    /// episode starts only after [`DrivingEnv::reset`].
    pub fn new(cfg: EnvConfig) -> Result<Self, SimError> {
        Self::with_rank(cfg, 0)
    }

    /// Builds the environment for a parallel rank; rank `i` draws its episode
    /// stream from `seed + i`.
    pub fn with_rank(cfg: EnvConfig, env_index: u32) -> Result<Self, SimError> {
        cfg.validate()?;
        let rng = rng::env_stream(cfg.spawn.seed, env_index);
        let sectors = SectorCounter::new(&cfg.track, 0.0);
        Ok(DrivingEnv {
            rng,
            ego: VehicleState {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                speed: 0.0,
            },
            traffic: Vec::new(),
            frame: LaneFrame {
                s: 0.0,
                d_lat: 0.0,
                d_ang: 0.0,
            },
            sectors,
            spawn_sector: 0,
            step_count: 0,
            terminated: true,
            cause: TerminationCause::None,
            cfg,
        })
    }

    /// Replaces the episode stream (used by evaluation to pin seeds).
    pub fn reseed(&mut self, seed: u64, env_index: u32) {
        self.rng = rng::env_stream(seed, env_index);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn track(&self) -> &TrackSpec {
        &self.cfg.track
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn traffic(&self) -> &[TrafficCar] {
        &self.traffic
    }

    /// Ego lane frame after the most recent step or reset.
    pub fn lane_frame(&self) -> &LaneFrame {
        &self.frame
    }

    /// Sector the current episode spawned in.
    pub fn spawn_sector(&self) -> usize {
        self.spawn_sector
    }

    /// Sectors completed in the current episode.
    pub fn sectors_completed(&self) -> u32 {
        self.sectors.completed()
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn termination_cause(&self) -> TerminationCause {
        self.cause
    }

    /// Starts a new episode: samples a spawn, resets traffic and counters.
    pub fn reset(&mut self) -> Result<Observation, SimError> {
        let spawn = sample_spawn(&self.cfg.track, &self.cfg.spawn, &mut self.rng)?;
        self.ego = VehicleState {
            x: spawn.ego.pose.x,
            y: spawn.ego.pose.y,
            heading: spawn.ego.pose.heading,
            speed: 0.0,
        };
        self.traffic = spawn
            .traffic
            .iter()
            .map(|p| {
                let cruise = rng::uniform(&mut self.rng, 0.35, 0.6) * self.cfg.v_target;
                TrafficCar {
                    s: p.s,
                    speed: cruise,
                    cruise,
                }
            })
            .collect();
        self.frame = LaneFrame {
            s: spawn.ego.s,
            d_lat: 0.0,
            d_ang: 0.0,
        };
        self.sectors = SectorCounter::new(&self.cfg.track, spawn.ego.s);
        self.spawn_sector = self.sectors.current_sector();
        self.step_count = 0;
        self.terminated = false;
        self.cause = TerminationCause::None;
        Ok(self.observation())
    }

    /// Advances the simulation by one step.
    pub fn step(&mut self, action: ControlAction) -> Result<StepResult, SimError> {
        if self.terminated {
            return Err(SimError::SteppedAfterTermination);
        }
        let a = action.clamped();

        // Ego: move along a constant-curvature arc at the pre-step speed,
        // then update the speed.
        let v = self.ego.speed;
        let steer_angle = a.steer * self.cfg.steer_max;
        let curvature = math::tan(steer_angle) / self.cfg.wheelbase;
        let theta = self.ego.heading;
        let ds = v * self.cfg.dt;
        if math::fabs(curvature) < 1e-9 {
            self.ego.x += ds * math::cos(theta);
            self.ego.y += ds * math::sin(theta);
        } else {
            let theta2 = theta + curvature * ds;
            self.ego.x += (math::sin(theta2) - math::sin(theta)) / curvature;
            self.ego.y -= (math::cos(theta2) - math::cos(theta)) / curvature;
        }
        self.ego.heading = math::wrap_angle(theta + curvature * ds);
        self.ego.speed =
            (v + a.accel * self.cfg.accel_max * self.cfg.dt).clamp(0.0, self.cfg.v_max);

        self.frame = self.cfg.track.project(&self.ego.pose());
        self.sectors.observe(&self.cfg.track, self.frame.s);
        self.step_traffic();
        self.step_count += 1;

        // Termination, most severe cause first.
        let mut cause = TerminationCause::None;
        if self.collided() {
            cause = TerminationCause::Collision;
        } else if math::fabs(self.frame.d_lat) > self.cfg.track.lane_width() / 2.0 {
            cause = TerminationCause::OffTrack;
        } else if self.step_count >= self.cfg.max_steps {
            cause = TerminationCause::MaxSteps;
        }
        self.terminated = cause != TerminationCause::None;
        self.cause = cause;

        Ok(StepResult {
            observation: self.observation(),
            reward: self.cfg.reward(&self.frame, self.ego.speed, cause),
            terminated: self.terminated,
            cause,
            lane_frame: self.frame,
        })
    }

    /// Traffic follows the centerline, easing off when close behind another
    /// vehicle (traffic or ego) and stopping at the end of open tracks.
    fn step_traffic(&mut self) {
        let track = &self.cfg.track;
        let total = track.total_length();
        let ego_s = self.frame.s;
        let others: Vec<f64> = self.traffic.iter().map(|t| t.s).collect();
        for (i, car) in self.traffic.iter_mut().enumerate() {
            // Nearest vehicle strictly ahead along the track.
            let mut gap = f64::INFINITY;
            let forward = |from: f64, to: f64| -> f64 {
                let mut d = to - from;
                if track.closed() {
                    d = d.rem_euclid(total);
                } else if d < 0.0 {
                    return f64::INFINITY;
                }
                d
            };
            for (j, &s) in others.iter().enumerate() {
                if j != i {
                    let d = forward(car.s, s);
                    if d > 1e-9 && d < gap {
                        gap = d;
                    }
                }
            }
            let d = forward(car.s, ego_s);
            if d > 1e-9 && d < gap {
                gap = d;
            }
            if !track.closed() {
                // Treat the end of the road as a stopped leader.
                gap = gap.min((total - car.s).max(0.0));
            }

            let target = if gap < 6.0 {
                0.0
            } else if gap < 15.0 {
                car.cruise * (gap - 6.0) / 9.0
            } else {
                car.cruise
            };
            let dv = (target - car.speed).clamp(-3.0 * self.cfg.dt, 1.5 * self.cfg.dt);
            car.speed = (car.speed + dv).max(0.0);
            car.s = track.normalize_s(car.s + car.speed * self.cfg.dt);
        }
    }

    fn collided(&self) -> bool {
        let ego_rect = rect_corners(
            self.ego.x,
            self.ego.y,
            self.ego.heading,
            self.cfg.vehicle_length,
            self.cfg.vehicle_width,
        );
        self.traffic.iter().any(|car| {
            let pose = self.cfg.track.centerline_pose(car.s);
            let rect = rect_corners(
                pose.x,
                pose.y,
                pose.heading,
                self.cfg.vehicle_length,
                self.cfg.vehicle_width,
            );
            rects_overlap(&ego_rect, &rect)
        })
    }

    /// Builds the observation for the current state.
    pub fn observation(&self) -> Observation {
        let mut obs = [0.0f32; OBS_DIM];
        let (evx, evy) = self.ego.velocity();

        // Ego row: absolute pose and velocity plus own lane frame.
        write_row(
            &mut obs[0..OBS_COLS],
            self.ego.x,
            self.ego.y,
            evx,
            evy,
            self.ego.heading,
            self.frame.s,
            self.frame.d_lat,
            self.frame.d_ang,
        );

        // Traffic rows: nearest first by Euclidean distance (ties keep the
        // lower traffic index), relative position/velocity in world axes.
        let mut order: Vec<(f64, usize)> = self
            .traffic
            .iter()
            .enumerate()
            .map(|(i, car)| {
                let pose = self.cfg.track.centerline_pose(car.s);
                let d2 = (pose.x - self.ego.x) * (pose.x - self.ego.x)
                    + (pose.y - self.ego.y) * (pose.y - self.ego.y);
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        for (row, &(_, i)) in order.iter().take(OBS_ROWS - 1).enumerate() {
            let car = &self.traffic[i];
            let pose = self.cfg.track.centerline_pose(car.s);
            let (cvx, cvy) = (
                car.speed * math::cos(pose.heading),
                car.speed * math::sin(pose.heading),
            );
            write_row(
                &mut obs[(row + 1) * OBS_COLS..(row + 2) * OBS_COLS],
                pose.x - self.ego.x,
                pose.y - self.ego.y,
                cvx - evx,
                cvy - evy,
                pose.heading,
                car.s,
                0.0, // traffic is pinned to the centerline
                0.0,
            );
        }
        Observation(obs)
    }
}

#[allow(clippy::too_many_arguments)]
fn write_row(
    row: &mut [f32],
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    heading: f64,
    long_off: f64,
    lat_off: f64,
    ang_off: f64,
) {
    row[0] = 1.0;
    row[1] = (x.clamp(-POS_CLIP, POS_CLIP) / POS_CLIP) as f32;
    row[2] = (y.clamp(-POS_CLIP, POS_CLIP) / POS_CLIP) as f32;
    row[3] = (vx.clamp(-VEL_CLIP, VEL_CLIP) / VEL_CLIP) as f32;
    row[4] = (vy.clamp(-VEL_CLIP, VEL_CLIP) / VEL_CLIP) as f32;
    row[5] = (math::wrap_angle(heading) / math::PI) as f32;
    row[6] = (long_off.clamp(-POS_CLIP, POS_CLIP) / POS_CLIP) as f32;
    row[7] = (lat_off.clamp(-LAT_CLIP, LAT_CLIP) / LAT_CLIP) as f32;
    row[8] = (math::wrap_angle(ang_off) / math::PI) as f32;
}

type Rect = [(f64, f64); 4];

fn rect_corners(x: f64, y: f64, heading: f64, length: f64, width: f64) -> Rect {
    let (c, s) = (math::cos(heading), math::sin(heading));
    let (hl, hw) = (length / 2.0, width / 2.0);
    let corner = |dx: f64, dy: f64| (x + dx * c - dy * s, y + dx * s + dy * c);
    [
        corner(hl, hw),
        corner(hl, -hw),
        corner(-hl, -hw),
        corner(-hl, hw),
    ]
}

/// Separating-axis overlap test for two oriented rectangles. Touching counts
/// as overlap.
fn rects_overlap(a: &Rect, b: &Rect) -> bool {
    let axes = |r: &Rect| {
        [
            (r[1].0 - r[0].0, r[1].1 - r[0].1),
            (r[3].0 - r[0].0, r[3].1 - r[0].1),
        ]
    };
    for (ax, ay) in axes(a).into_iter().chain(axes(b)) {
        let project = |r: &Rect| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (px, py) in r {
                let p = px * ax + py * ay;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(a);
        let (blo, bhi) = project(b);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}
