//! The `.track` file format and the bundled track library.
//!
//! A track file is `key = value` lines describing a chain of segments that
//! starts at the origin facing `+x`:
//!
//! ```text
//! lane_width = 8.0          # metres, required
//! closed = true             # default false
//! sectors = auto            # auto | comma-separated arc lengths | absent
//!
//! segment.0.kind = straight
//! segment.0.length = 110.0
//! segment.1.kind = arc
//! segment.1.radius = 24.0
//! segment.1.sweep = 1.5707963267948966
//! segment.1.direction = ccw
//! ```
//!
//! `sectors = auto` places one sector boundary at the start of every segment;
//! an explicit list gives arc lengths in `[0, total)`; omitting the key makes
//! the whole track a single sector. Segment indices must be contiguous from
//! zero. Unknown keys are errors so typos cannot silently change a track.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ikh_core::track::{chain_segments, ArcDirection, Pose, SegmentKind, TrackDef, TrackSpec};
use thiserror::Error;

use crate::kv::{self, KvPair};

/// Errors raised while loading a track description.
#[derive(Debug, Error)]
pub enum TrackFileError {
    #[error("{0}")]
    Syntax(#[from] kv::KvError),
    #[error("line {line}: unknown track key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{0}")]
    BadValue(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("segment indices must be contiguous from 0; missing segment.{0}")]
    MissingSegment(usize),
    #[error("track has no segments")]
    NoSegments,
    #[error("invalid track geometry: {0}")]
    Geometry(#[from] ikh_core::track::TrackError),
    #[error("`{name}` is not a bundled track ({known}) and not a readable file{detail}")]
    UnknownTrack {
        name: String,
        known: String,
        detail: String,
    },
}

/// Bundled tracks compiled into the binary, sorted by name.
pub const BUNDLED_TRACKS: &[(&str, &str)] = &[
    ("highway", include_str!("../data/highway.track")),
    ("indiana", include_str!("../data/indiana.track")),
    ("lane_centering", include_str!("../data/lane_centering.track")),
    ("merge", include_str!("../data/merge.track")),
    ("racetrack", include_str!("../data/racetrack.track")),
    ("racetrack_mini", include_str!("../data/racetrack_mini.track")),
    ("roundabout", include_str!("../data/roundabout.track")),
    ("uturn", include_str!("../data/uturn.track")),
];

/// Returns the source of a bundled track, if `name` is one.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED_TRACKS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
}

/// Comma-separated bundled track names, for error messages and `--help`.
pub fn bundled_names() -> String {
    let mut out = String::new();
    for (i, (name, _)) in BUNDLED_TRACKS.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(name);
    }
    out
}

#[derive(Default)]
struct SegmentBuilder {
    kind: Option<(String, usize)>,
    length: Option<f64>,
    radius: Option<f64>,
    sweep: Option<f64>,
    direction: Option<ArcDirection>,
}

/// Parses track-file text into a validated [`TrackSpec`].
pub fn parse_track(text: &str) -> Result<TrackSpec, TrackFileError> {
    let pairs = kv::parse(text)?;
    let mut lane_width: Option<f64> = None;
    let mut closed: Option<bool> = None;
    let mut sectors: Option<(String, usize)> = None;
    let mut segments: BTreeMap<usize, SegmentBuilder> = BTreeMap::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for pair in &pairs {
        if let Some(prev) = seen.insert(pair.key.clone(), pair.line) {
            let _ = prev;
            return Err(TrackFileError::DuplicateKey {
                line: pair.line,
                key: pair.key.clone(),
            });
        }
        match pair.key.as_str() {
            "lane_width" => lane_width = Some(kv::parse_f64(pair).map_err(TrackFileError::BadValue)?),
            "closed" => closed = Some(kv::parse_bool(pair).map_err(TrackFileError::BadValue)?),
            "sectors" => sectors = Some((pair.value.clone(), pair.line)),
            key => {
                let Some((index, field)) = split_segment_key(key) else {
                    return Err(TrackFileError::UnknownKey {
                        line: pair.line,
                        key: key.to_string(),
                    });
                };
                let builder = segments.entry(index).or_default();
                apply_segment_field(builder, field, pair)?;
            }
        }
    }

    let lane_width = lane_width.ok_or_else(|| TrackFileError::MissingKey("lane_width".into()))?;
    let closed = closed.unwrap_or(false);
    if segments.is_empty() {
        return Err(TrackFileError::NoSegments);
    }

    let mut kinds = Vec::with_capacity(segments.len());
    for (want, (index, builder)) in segments.iter().enumerate() {
        if *index != want {
            return Err(TrackFileError::MissingSegment(want));
        }
        kinds.push(build_kind(*index, builder)?);
    }

    let segs = chain_segments(Pose::new(0.0, 0.0, 0.0), &kinds);
    let total: f64 = segs.iter().map(|s| s.length()).sum();
    let sector_boundaries = match sectors {
        None => Vec::new(),
        Some((value, line)) if value == "auto" => {
            let mut bounds = Vec::with_capacity(segs.len());
            let mut acc = 0.0;
            for seg in &segs {
                bounds.push(acc);
                acc += seg.length();
            }
            let _ = line;
            bounds
        }
        Some((value, line)) => {
            let pair = KvPair {
                key: "sectors".into(),
                value,
                line,
            };
            let bounds = kv::parse_f64_list(&pair).map_err(TrackFileError::BadValue)?;
            if let Some(bad) = bounds.iter().find(|&&b| !(0.0..total).contains(&b)) {
                return Err(TrackFileError::BadValue(format!(
                    "line {line}: sector boundary {bad} outside [0, {total})"
                )));
            }
            bounds
        }
    };

    Ok(TrackSpec::build(TrackDef {
        segments: segs,
        lane_width,
        closed,
        sector_boundaries,
    })?)
}

/// Loads a track by bundled name or, failing that, by file path.
pub fn resolve_track(spec: &str) -> Result<TrackSpec, TrackFileError> {
    if let Some(src) = bundled_source(spec) {
        return parse_track(src);
    }
    match std::fs::read_to_string(Path::new(spec)) {
        Ok(text) => parse_track(&text),
        Err(err) => Err(TrackFileError::UnknownTrack {
            name: spec.to_string(),
            known: bundled_names(),
            detail: format!(": {err}"),
        }),
    }
}

fn split_segment_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("segment.")?;
    let (index, field) = rest.split_once('.')?;
    Some((index.parse().ok()?, field))
}

fn apply_segment_field(
    builder: &mut SegmentBuilder,
    field: &str,
    pair: &KvPair,
) -> Result<(), TrackFileError> {
    match field {
        "kind" => builder.kind = Some((pair.value.clone(), pair.line)),
        "length" => builder.length = Some(kv::parse_f64(pair).map_err(TrackFileError::BadValue)?),
        "radius" => builder.radius = Some(kv::parse_f64(pair).map_err(TrackFileError::BadValue)?),
        "sweep" => builder.sweep = Some(kv::parse_f64(pair).map_err(TrackFileError::BadValue)?),
        "direction" => {
            builder.direction = Some(match pair.value.as_str() {
                "ccw" => ArcDirection::Ccw,
                "cw" => ArcDirection::Cw,
                other => {
                    return Err(TrackFileError::BadValue(format!(
                        "line {}: direction must be ccw or cw, found `{other}`",
                        pair.line
                    )))
                }
            })
        }
        _ => {
            return Err(TrackFileError::UnknownKey {
                line: pair.line,
                key: pair.key.clone(),
            })
        }
    }
    Ok(())
}

fn build_kind(index: usize, builder: &SegmentBuilder) -> Result<SegmentKind, TrackFileError> {
    let Some((kind, line)) = &builder.kind else {
        return Err(TrackFileError::MissingKey(format!("segment.{index}.kind")));
    };
    match kind.as_str() {
        "straight" => {
            if builder.radius.is_some() || builder.sweep.is_some() || builder.direction.is_some() {
                return Err(TrackFileError::BadValue(format!(
                    "segment.{index}: straight segments take only `length`"
                )));
            }
            let length = builder
                .length
                .ok_or_else(|| TrackFileError::MissingKey(format!("segment.{index}.length")))?;
            Ok(SegmentKind::Straight { length })
        }
        "arc" => {
            if builder.length.is_some() {
                return Err(TrackFileError::BadValue(format!(
                    "segment.{index}: arcs take `radius`, `sweep`, `direction`, not `length`"
                )));
            }
            let radius = builder
                .radius
                .ok_or_else(|| TrackFileError::MissingKey(format!("segment.{index}.radius")))?;
            let sweep = builder
                .sweep
                .ok_or_else(|| TrackFileError::MissingKey(format!("segment.{index}.sweep")))?;
            let direction = builder
                .direction
                .ok_or_else(|| TrackFileError::MissingKey(format!("segment.{index}.direction")))?;
            Ok(SegmentKind::Arc {
                radius,
                sweep,
                direction,
            })
        }
        other => Err(TrackFileError::BadValue(format!(
            "line {line}: segment kind must be straight or arc, found `{other}`"
        ))),
    }
}

/// Renders a track back to the file format (used by tests and tooling).
pub fn format_track(track: &TrackSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lane_width = {}", track.lane_width());
    let _ = writeln!(out, "closed = {}", track.closed());
    let bounds = track.sector_boundaries();
    if !bounds.is_empty() {
        let list: Vec<String> = bounds.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "sectors = {}", list.join(", "));
    }
    for (i, seg) in track.segments().iter().enumerate() {
        match seg.kind {
            SegmentKind::Straight { length } => {
                let _ = writeln!(out, "segment.{i}.kind = straight");
                let _ = writeln!(out, "segment.{i}.length = {length}");
            }
            SegmentKind::Arc {
                radius,
                sweep,
                direction,
            } => {
                let _ = writeln!(out, "segment.{i}.kind = arc");
                let _ = writeln!(out, "segment.{i}.radius = {radius}");
                let _ = writeln!(out, "segment.{i}.sweep = {sweep}");
                let dir = match direction {
                    ArcDirection::Ccw => "ccw",
                    ArcDirection::Cw => "cw",
                };
                let _ = writeln!(out, "segment.{i}.direction = {dir}");
            }
        }
    }
    out
}
