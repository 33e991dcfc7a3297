//! Parametric track centerlines.
//!
//! A track is a chain of straight and circular-arc segments with a constant
//! lane width. Arc-length `s` along the chain is the canonical coordinate:
//! poses on the centerline, lane-frame projections of arbitrary poses, sector
//! lookups and spawn sampling all speak `s`.
//!
//! Sectors are the contiguous intervals between a strictly increasing list of
//! boundary values in `[0, total_length)`. On a closed track the last sector
//! wraps through `s = 0`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::rng::{self, ChaCha8Rng};

/// Minimum arc-length separation between spawned vehicles, in meters.
pub const MIN_SPAWN_SEPARATION: f64 = 8.0;

/// Gap above which a segment chain is rejected as discontinuous (meters for
/// positions, radians for headings).
pub const CHAIN_TOLERANCE: f64 = 1e-6;

/// Errors from building a [`TrackSpec`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("track has no segments")]
    EmptyTrack,
    #[error("segment {index} is invalid: {reason}")]
    InvalidSegment { index: usize, reason: &'static str },
    #[error("lane width must be positive and finite")]
    InvalidLaneWidth,
    #[error("segment {index} does not start where the previous segment ends (gap {gap:.3e})")]
    DiscontinuousChain { index: usize, gap: f64 },
    #[error("closed track does not loop back to its start (gap {gap:.3e})")]
    NonClosedLoop { gap: f64 },
    #[error("sector boundaries must be strictly increasing within [0, total length)")]
    InvalidSectorBoundaries,
}

/// Errors from spawn sampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpawnError {
    #[error("could not place traffic with {MIN_SPAWN_SEPARATION} m separation after {0} attempts")]
    SpawnOverflow(u32),
    #[error("spawnable sector index {0} is out of range")]
    BadSectorIndex(usize),
}

/// A planar pose: position plus heading (radians, wrapped to `(-pi, pi]` by
/// consumers that compare headings).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }

    fn distance_to(&self, other: &Pose) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Turn direction of an arc segment, viewed from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcDirection {
    /// Counterclockwise = left turn.
    Ccw,
    /// Clockwise = right turn.
    Cw,
}

impl ArcDirection {
    fn sign(self) -> f64 {
        match self {
            ArcDirection::Ccw => 1.0,
            ArcDirection::Cw => -1.0,
        }
    }
}

/// Geometry of a single segment, relative to its start pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    Straight {
        length: f64,
    },
    Arc {
        radius: f64,
        /// Swept angle in radians, always positive; `direction` carries the
        /// sign.
        sweep: f64,
        direction: ArcDirection,
    },
}

/// A positioned segment: start pose plus geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Pose,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn new(start: Pose, kind: SegmentKind) -> Self {
        Segment { start, kind }
    }

    /// Arc length of the segment.
    pub fn length(&self) -> f64 {
        match self.kind {
            SegmentKind::Straight { length } => length,
            SegmentKind::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    /// Center of the arc circle (arcs only).
    fn arc_center(&self) -> Option<(f64, f64, f64, f64)> {
        match self.kind {
            SegmentKind::Straight { .. } => None,
            SegmentKind::Arc {
                radius, direction, ..
            } => {
                let sgn = direction.sign();
                // Center sits perpendicular to the heading: left for CCW,
                // right for CW.
                let cx = self.start.x - sgn * radius * math::sin(self.start.heading);
                let cy = self.start.y + sgn * radius * math::cos(self.start.heading);
                Some((cx, cy, radius, sgn))
            }
        }
    }

    /// Centerline pose at arc length `s_local` from the segment start.
    /// `s_local` is clamped into `[0, length]`.
    pub fn pose_at(&self, s_local: f64) -> Pose {
        let s = s_local.clamp(0.0, self.length());
        match self.kind {
            SegmentKind::Straight { .. } => Pose {
                x: self.start.x + s * math::cos(self.start.heading),
                y: self.start.y + s * math::sin(self.start.heading),
                heading: self.start.heading,
            },
            SegmentKind::Arc { .. } => {
                let (cx, cy, r, sgn) = self.arc_center().expect("arc");
                let theta0 = math::atan2(self.start.y - cy, self.start.x - cx);
                let theta = theta0 + sgn * s / r;
                Pose {
                    x: cx + r * math::cos(theta),
                    y: cy + r * math::sin(theta),
                    heading: math::wrap_angle(self.start.heading + sgn * s / r),
                }
            }
        }
    }

    /// Pose at the end of the segment.
    pub fn end_pose(&self) -> Pose {
        self.pose_at(self.length())
    }

    /// Closest point on this segment to `(x, y)`: returns
    /// `(squared distance, s_local, signed lateral offset, tangent heading)`.
    /// The lateral offset is positive to the left of the direction of travel.
    fn project(&self, x: f64, y: f64) -> (f64, f64, f64, f64) {
        let s_local = match self.kind {
            SegmentKind::Straight { length } => {
                let (dx, dy) = (math::cos(self.start.heading), math::sin(self.start.heading));
                let t = (x - self.start.x) * dx + (y - self.start.y) * dy;
                t.clamp(0.0, length)
            }
            SegmentKind::Arc { sweep, .. } => {
                let (cx, cy, r, sgn) = self.arc_center().expect("arc");
                let (rx, ry) = (x - cx, y - cy);
                if math::hypot(rx, ry) < 1e-12 {
                    // Degenerate: the query sits on the arc center.
                    0.0
                } else {
                    let theta0 = math::atan2(self.start.y - cy, self.start.x - cx);
                    let theta_p = math::atan2(ry, rx);
                    // Angle traveled from the segment start to the query
                    // direction, measured along the travel direction, in
                    // [0, 2*pi).
                    let mut delta = sgn * (theta_p - theta0) % math::TAU;
                    if delta < 0.0 {
                        delta += math::TAU;
                    }
                    if delta <= sweep {
                        r * delta
                    } else {
                        // Off the arc: snap to whichever endpoint is closer
                        // in angle.
                        let past_end = delta - sweep;
                        let before_start = math::TAU - delta;
                        if past_end <= before_start {
                            r * sweep
                        } else {
                            0.0
                        }
                    }
                }
            }
        };
        let on = self.pose_at(s_local);
        let (vx, vy) = (x - on.x, y - on.y);
        let d2 = vx * vx + vy * vy;
        // Signed offset: cross(tangent, v), positive to the left.
        let lat = math::cos(on.heading) * vy - math::sin(on.heading) * vx;
        (d2, s_local, lat, on.heading)
    }
}

/// Chains segment geometries head-to-tail starting from `start`.
pub fn chain_segments(start: Pose, kinds: &[SegmentKind]) -> Vec<Segment> {
    let mut out = Vec::with_capacity(kinds.len());
    let mut pose = start;
    for &kind in kinds {
        let seg = Segment::new(pose, kind);
        pose = seg.end_pose();
        out.push(seg);
    }
    out
}

/// Raw track description, not yet validated.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackDef {
    pub segments: Vec<Segment>,
    pub lane_width: f64,
    pub closed: bool,
    /// Strictly increasing sector boundaries in `[0, total length)`. Empty
    /// means one sector spanning the whole track.
    pub sector_boundaries: Vec<f64>,
}

/// Position of a pose relative to the track: arc length of the closest
/// centerline point, signed lateral offset (positive left of travel) and the
/// heading error wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneFrame {
    pub s: f64,
    pub d_lat: f64,
    pub d_ang: f64,
}

/// A validated track ready for queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    segments: Vec<Segment>,
    lane_width: f64,
    closed: bool,
    boundaries: Vec<f64>,
    /// `cum[i]` = arc length at the start of segment `i`; last entry = total.
    cum: Vec<f64>,
}

impl TrackSpec {
    /// Validates a definition: non-empty, positive dimensions, continuous
    /// chain (gaps above [`CHAIN_TOLERANCE`] are rejected), closure when
    /// `closed`, and well-formed sector boundaries.
    pub fn build(def: TrackDef) -> Result<Self, TrackError> {
        if def.segments.is_empty() {
            return Err(TrackError::EmptyTrack);
        }
        if !(def.lane_width.is_finite() && def.lane_width > 0.0) {
            return Err(TrackError::InvalidLaneWidth);
        }
        for (index, seg) in def.segments.iter().enumerate() {
            let reason = match seg.kind {
                SegmentKind::Straight { length } => (!(length.is_finite() && length > 0.0))
                    .then_some("straight length must be positive and finite"),
                SegmentKind::Arc { radius, sweep, .. } => {
                    if !(radius.is_finite() && radius > 0.0) {
                        Some("arc radius must be positive and finite")
                    } else if !(sweep.is_finite() && sweep > 0.0 && sweep <= math::TAU) {
                        Some("arc sweep must lie in (0, 2*pi]")
                    } else {
                        None
                    }
                }
            };
            if let Some(reason) = reason {
                return Err(TrackError::InvalidSegment { index, reason });
            }
        }
        for index in 1..def.segments.len() {
            let prev_end = def.segments[index - 1].end_pose();
            let start = def.segments[index].start;
            let gap = pose_gap(&prev_end, &start);
            if gap > CHAIN_TOLERANCE {
                return Err(TrackError::DiscontinuousChain { index, gap });
            }
        }
        if def.closed {
            let last_end = def.segments.last().expect("nonempty").end_pose();
            let first = def.segments[0].start;
            let gap = pose_gap(&last_end, &first);
            if gap > CHAIN_TOLERANCE {
                return Err(TrackError::NonClosedLoop { gap });
            }
        }
        let mut cum = Vec::with_capacity(def.segments.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for seg in &def.segments {
            acc += seg.length();
            cum.push(acc);
        }
        let total = acc;
        let boundaries = if def.sector_boundaries.is_empty() {
            vec![0.0]
        } else {
            def.sector_boundaries
        };
        let increasing = boundaries.windows(2).all(|w| w[0] < w[1]);
        let in_range = boundaries.iter().all(|&b| (0.0..total).contains(&b));
        if !increasing || !in_range {
            return Err(TrackError::InvalidSectorBoundaries);
        }
        Ok(TrackSpec {
            segments: def.segments,
            lane_width: def.lane_width,
            closed: def.closed,
            boundaries,
            cum,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn total_length(&self) -> f64 {
        *self.cum.last().expect("nonempty")
    }

    pub fn sector_boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn sector_count(&self) -> usize {
        self.boundaries.len()
    }

    /// Wraps (closed) or clamps (open) an arc length into `[0, total)`.
    pub fn normalize_s(&self, s: f64) -> f64 {
        let total = self.total_length();
        if self.closed {
            let r = s % total;
            if r < 0.0 { r + total } else { r }
        } else {
            s.clamp(0.0, total)
        }
    }

    /// Index of the segment containing `s`.
    pub fn segment_of(&self, s: f64) -> usize {
        let s = self.normalize_s(s);
        let idx = self.cum.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(self.segments.len() - 1)
    }

    /// Centerline pose at arc length `s`.
    pub fn centerline_pose(&self, s: f64) -> Pose {
        let s = self.normalize_s(s);
        let i = self.segment_of(s);
        self.segments[i].pose_at(s - self.cum[i])
    }

    /// Sector index for an arc length, with left-closed / right-open
    /// intervals: `s` exactly on a boundary belongs to the sector the
    /// boundary opens. On a closed track values below the first boundary wrap
    /// into the last sector; on an open track they belong to the first.
    pub fn sector_of(&self, s: f64) -> usize {
        let s = self.normalize_s(s);
        let idx = self.boundaries.partition_point(|&b| b <= s);
        if idx == 0 {
            if self.closed {
                self.boundaries.len() - 1
            } else {
                0
            }
        } else {
            idx - 1
        }
    }

    /// Start and end arc length of a sector. On a closed track the last
    /// sector's end wraps past `total_length`; on an open track it is
    /// `total_length`.
    pub fn sector_span(&self, sector: usize) -> (f64, f64) {
        let n = self.boundaries.len();
        let start = self.boundaries[sector];
        let end = if sector + 1 < n {
            self.boundaries[sector + 1]
        } else if self.closed {
            self.boundaries[0] + self.total_length()
        } else {
            self.total_length()
        };
        (start, end)
    }

    /// Arc-length distance between two `s` values; on a closed track this is
    /// the shorter way around.
    pub fn arc_distance(&self, a: f64, b: f64) -> f64 {
        let d = math::fabs(self.normalize_s(a) - self.normalize_s(b));
        if self.closed {
            d.min(self.total_length() - d)
        } else {
            d
        }
    }

    /// Projects a pose to the closest centerline point across all segments
    /// (ties break toward the lower segment index).
    pub fn project(&self, pose: &Pose) -> LaneFrame {
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            let (d2, s_local, lat, tangent) = seg.project(pose.x, pose.y);
            let better = match &best {
                None => true,
                Some((bd2, ..)) => d2 < *bd2,
            };
            if better {
                best = Some((d2, i, s_local, lat, tangent));
            }
        }
        let (_, i, s_local, d_lat, tangent) = best.expect("validated track is nonempty");
        let mut s = self.cum[i] + s_local;
        if self.closed && s >= self.total_length() {
            s -= self.total_length();
        }
        LaneFrame {
            s,
            d_lat,
            d_ang: math::wrap_angle(pose.heading - tangent),
        }
    }
}

fn pose_gap(a: &Pose, b: &Pose) -> f64 {
    let pos = a.distance_to(b);
    let ang = math::fabs(math::wrap_angle(a.heading - b.heading));
    pos.max(ang)
}

/// Tracks net forward sector crossings for one episode.
///
/// `completed` is the running maximum of the net crossing count, so driving
/// backwards across a boundary first "pays back" the crossing before forward
/// progress counts again — oscillating on a boundary cannot inflate the
/// count.
#[derive(Debug, Clone)]
pub struct SectorCounter {
    sectors: usize,
    current: usize,
    net: i64,
    max_net: i64,
}

impl SectorCounter {
    /// Starts counting from the sector containing the spawn position.
    pub fn new(track: &TrackSpec, start_s: f64) -> Self {
        SectorCounter {
            sectors: track.sector_count(),
            current: track.sector_of(start_s),
            net: 0,
            max_net: 0,
        }
    }

    /// Feeds the next arc-length sample; returns the sector it falls in.
    pub fn observe(&mut self, track: &TrackSpec, s: f64) -> usize {
        let sector = track.sector_of(s);
        if sector != self.current {
            let n = self.sectors as i64;
            let mut delta = sector as i64 - self.current as i64;
            // Shortest cyclic interpretation of the jump.
            if delta > n / 2 {
                delta -= n;
            } else if delta < -(n / 2) {
                delta += n;
            }
            self.net += delta;
            self.max_net = self.max_net.max(self.net);
            self.current = sector;
        }
        sector
    }

    pub fn current_sector(&self) -> usize {
        self.current
    }

    /// Sectors completed so far (never negative).
    pub fn completed(&self) -> u32 {
        self.max_net.max(0) as u32
    }
}

/// Spawn sampling configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SpawnConfig {
    /// Base seed for the environment's episode stream.
    pub seed: u64,
    /// Traffic count is drawn uniformly from `{0, ..., max_traffic}`.
    pub max_traffic: u32,
    /// Sectors the ego may spawn in; empty means every sector.
    pub spawnable_sectors: Vec<usize>,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        SpawnConfig {
            seed: 0,
            max_traffic: 0,
            spawnable_sectors: Vec::new(),
        }
    }
}

/// A sampled spawn location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnPoint {
    pub pose: Pose,
    pub s: f64,
}

/// Result of [`sample_spawn`]: ego plus traffic placements, all on the
/// centerline facing along the track.
#[derive(Debug, Clone, PartialEq)]
pub struct Spawn {
    pub ego: SpawnPoint,
    pub traffic: Vec<SpawnPoint>,
}

/// Samples a spawn: the ego uniformly inside a uniformly chosen spawnable
/// sector, then `U{0..=max_traffic}` traffic vehicles uniformly over the
/// whole track, rejecting placements closer than [`MIN_SPAWN_SEPARATION`]
/// arc-length meters to any other vehicle. Fails with
/// [`SpawnError::SpawnOverflow`] after 1000 rejected attempts.
pub fn sample_spawn(
    track: &TrackSpec,
    cfg: &SpawnConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Spawn, SpawnError> {
    const MAX_ATTEMPTS: u32 = 1000;
    let sectors: Vec<usize> = if cfg.spawnable_sectors.is_empty() {
        (0..track.sector_count()).collect()
    } else {
        cfg.spawnable_sectors.clone()
    };
    for &sec in &sectors {
        if sec >= track.sector_count() {
            return Err(SpawnError::BadSectorIndex(sec));
        }
    }
    let sector = sectors[rand::Rng::random_range(rng, 0..sectors.len())];
    let (lo, hi) = track.sector_span(sector);
    let ego_s = track.normalize_s(rng::uniform(rng, lo, hi));
    let ego = SpawnPoint {
        pose: track.centerline_pose(ego_s),
        s: ego_s,
    };

    let count = rand::Rng::random_range(rng, 0..=cfg.max_traffic);
    let mut traffic: Vec<SpawnPoint> = Vec::with_capacity(count as usize);
    let mut attempts = 0;
    while traffic.len() < count as usize {
        if attempts >= MAX_ATTEMPTS {
            return Err(SpawnError::SpawnOverflow(MAX_ATTEMPTS));
        }
        attempts += 1;
        let s = rng::uniform(rng, 0.0, track.total_length());
        let clear = track.arc_distance(s, ego_s) >= MIN_SPAWN_SEPARATION
            && traffic
                .iter()
                .all(|t| track.arc_distance(s, t.s) >= MIN_SPAWN_SEPARATION);
        if clear {
            traffic.push(SpawnPoint {
                pose: track.centerline_pose(s),
                s,
            });
        }
    }
    Ok(Spawn { ego, traffic })
}
