//! Hyperparameter presets, config files and flag overlays.
//!
//! A run's settings are resolved in three layers, later layers winning:
//!
//! 1. a named preset (`--preset table2-RT`), which replaces the core
//!    schedule wholesale;
//! 2. a config file (`--config run.cfg`), a `key = value` overlay;
//! 3. individual command-line flags (`--lr 3e-4`).
//!
//! Config files and flags share one vocabulary. The short learner keys are
//! `lr`, `bs` (batch size), `gs` (gradient steps per update), `ts` (total
//! environment steps), `tau`, `gamma`, `alpha`; extended learner keys are
//! `hidden` (comma-separated widths), `buffer_capacity`, `warmup_steps`,
//! `update_every`, `num_envs`. Environment keys are `max_traffic`,
//! `spawnable_sectors`, `dt`, `max_steps`, `v_target`, `v_max`, `steer_max`,
//! `accel_max`, `speed_weight`, `lane_weight`, `off_track_penalty`,
//! `collision_penalty`. Unknown keys are hard errors.

use ikh_core::sac::SacConfig;
use ikh_core::sim::EnvConfig;
use thiserror::Error;

use crate::kv::{self, KvPair};

/// Errors raised while resolving run settings.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{name}`; known presets: {known}")]
    UnknownPreset { name: String, known: String },
    #[error("{0}")]
    Syntax(#[from] kv::KvError),
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{0}")]
    BadValue(String),
}

/// Environment overrides layered on top of a track's [`EnvConfig`] defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvTweaks {
    pub max_traffic: Option<u32>,
    pub spawnable_sectors: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub max_steps: Option<u32>,
    pub v_target: Option<f64>,
    pub v_max: Option<f64>,
    pub steer_max: Option<f64>,
    pub accel_max: Option<f64>,
    pub speed_weight: Option<f64>,
    pub lane_weight: Option<f64>,
    pub off_track_penalty: Option<f64>,
    pub collision_penalty: Option<f64>,
}

impl EnvTweaks {
    /// Applies every set field to `cfg` (spawn seed is managed elsewhere).
    pub fn apply(&self, cfg: &mut EnvConfig) {
        if let Some(v) = self.max_traffic {
            cfg.spawn.max_traffic = v;
        }
        if let Some(v) = &self.spawnable_sectors {
            cfg.spawn.spawnable_sectors = v.clone();
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.v_target {
            cfg.v_target = v;
        }
        if let Some(v) = self.v_max {
            cfg.v_max = v;
        }
        if let Some(v) = self.steer_max {
            cfg.steer_max = v;
        }
        if let Some(v) = self.accel_max {
            cfg.accel_max = v;
        }
        if let Some(v) = self.speed_weight {
            cfg.c_v = v;
        }
        if let Some(v) = self.lane_weight {
            cfg.c_l = v;
        }
        if let Some(v) = self.off_track_penalty {
            cfg.off_track_penalty = v;
        }
        if let Some(v) = self.collision_penalty {
            cfg.collision_penalty = v;
        }
    }

    fn overlay(&mut self, other: &EnvTweaks) {
        macro_rules! take {
            ($field:ident) => {
                if other.$field.is_some() {
                    self.$field = other.$field.clone();
                }
            };
        }
        take!(max_traffic);
        take!(spawnable_sectors);
        take!(dt);
        take!(max_steps);
        take!(v_target);
        take!(v_max);
        take!(steer_max);
        take!(accel_max);
        take!(speed_weight);
        take!(lane_weight);
        take!(off_track_penalty);
        take!(collision_penalty);
    }
}

/// A partial assignment of learner and environment settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overlay {
    pub lr: Option<f64>,
    pub bs: Option<usize>,
    pub gs: Option<u32>,
    pub ts: Option<u64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub buffer_capacity: Option<usize>,
    pub warmup_steps: Option<u64>,
    pub update_every: Option<u32>,
    pub num_envs: Option<u32>,
    pub env: EnvTweaks,
}

impl Overlay {
    /// Applies every set field to `settings`.
    pub fn apply(&self, settings: &mut Settings) {
        let sac = &mut settings.sac;
        if let Some(v) = self.lr {
            sac.lr = v;
        }
        if let Some(v) = self.bs {
            sac.batch_size = v;
        }
        if let Some(v) = self.gs {
            sac.gradient_steps = v;
        }
        if let Some(v) = self.ts {
            sac.total_steps = v;
        }
        if let Some(v) = self.tau {
            sac.tau = v;
        }
        if let Some(v) = self.gamma {
            sac.gamma = v;
        }
        if let Some(v) = self.alpha {
            sac.alpha = v;
        }
        if let Some(v) = &self.hidden {
            sac.hidden = v.clone();
        }
        if let Some(v) = self.buffer_capacity {
            sac.buffer_capacity = v;
        }
        if let Some(v) = self.warmup_steps {
            sac.warmup_steps = v;
        }
        if let Some(v) = self.update_every {
            sac.update_every = v;
        }
        if let Some(v) = self.num_envs {
            sac.num_envs = v;
        }
        settings.env.overlay(&self.env);
    }
}

/// Fully resolved run settings: the learner schedule plus env overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub sac: SacConfig,
    pub env: EnvTweaks,
}

/// One preset column: `(tau, gamma, alpha, lr, bs)`.
type Column = (f64, f64, f64, f64, usize);

const COLUMNS: &[(&str, Column)] = &[
    ("H", (0.9, 0.99, 0.5, 1e-4, 1024)),
    ("M", (0.005, 0.99, 0.5, 1e-4, 1024)),
    ("I", (0.9, 0.99, 0.5, 1e-4, 1024)),
    ("IN", (0.1, 0.65, 0.5, 5e-5, 8192)),
    ("LC", (0.005, 0.99, 1.0, 1e-4, 1024)),
    ("R", (0.9, 0.99, 0.5, 1e-4, 1024)),
    ("U", (0.9, 0.65, 0.5, 5e-5, 4096)),
    ("RT", (0.9, 0.99, 0.5, 1e-4, 1024)),
];

/// Total steps used by the `desk-*` presets.
pub const DESK_TOTAL_STEPS: u64 = 200_000;

/// Total steps used by the `table2-*` presets.
pub const TABLE2_TOTAL_STEPS: u64 = 10_000_000;

/// Comma-separated preset names, for error messages and `--help`.
pub fn preset_names() -> String {
    let mut names = Vec::new();
    for prefix in ["table2", "desk"] {
        for (suffix, _) in COLUMNS {
            names.push(format!("{prefix}-{suffix}"));
        }
        names.push(format!("{prefix}-L"));
    }
    names.join(", ")
}

/// Resolves a preset name to settings, or errors with the known names.
///
/// `table2-*` presets carry the full published schedule (ten million steps);
/// `desk-*` presets are identical except for a short total-step budget so a
/// run finishes on one workstation core. `*-L` is an alias for `*-LC`.
pub fn preset(name: &str) -> Result<Settings, ConfigError> {
    let unknown = || ConfigError::UnknownPreset {
        name: name.to_string(),
        known: preset_names(),
    };
    let (prefix, suffix) = name.split_once('-').ok_or_else(unknown)?;
    let total_steps = match prefix {
        "table2" => TABLE2_TOTAL_STEPS,
        "desk" => DESK_TOTAL_STEPS,
        _ => return Err(unknown()),
    };
    let suffix = if suffix == "L" { "LC" } else { suffix };
    let (_, (tau, gamma, alpha, lr, bs)) = COLUMNS
        .iter()
        .find(|(s, _)| *s == suffix)
        .ok_or_else(unknown)?;
    let mut settings = Settings::default();
    settings.sac.lr = *lr;
    settings.sac.batch_size = *bs;
    settings.sac.gradient_steps = 10;
    settings.sac.total_steps = total_steps;
    settings.sac.tau = *tau;
    settings.sac.gamma = *gamma;
    settings.sac.alpha = *alpha;
    Ok(settings)
}

/// Parses config-file text into an overlay. Unknown keys are errors.
pub fn parse_overlay(text: &str) -> Result<Overlay, ConfigError> {
    let pairs = kv::parse(text)?;
    let mut overlay = Overlay::default();
    let mut seen: std::collections::BTreeSet<String> = Default::default();
    for pair in &pairs {
        if !seen.insert(pair.key.clone()) {
            return Err(ConfigError::DuplicateKey {
                line: pair.line,
                key: pair.key.clone(),
            });
        }
        apply_key(&mut overlay, pair)?;
    }
    Ok(overlay)
}

fn apply_key(overlay: &mut Overlay, pair: &KvPair) -> Result<(), ConfigError> {
    let bad = ConfigError::BadValue;
    let f = || kv::parse_f64(pair).map_err(bad);
    let u = || kv::parse_u64(pair).map_err(bad);
    match pair.key.as_str() {
        "lr" => overlay.lr = Some(f()?),
        "bs" => overlay.bs = Some(u()? as usize),
        "gs" => overlay.gs = Some(u()? as u32),
        "ts" => overlay.ts = Some(u()?),
        "tau" => overlay.tau = Some(f()?),
        "gamma" => overlay.gamma = Some(f()?),
        "alpha" => overlay.alpha = Some(f()?),
        "hidden" => {
            let widths = kv::parse_u64_list(pair).map_err(bad)?;
            overlay.hidden = Some(widths.into_iter().map(|w| w as usize).collect());
        }
        "buffer_capacity" => overlay.buffer_capacity = Some(u()? as usize),
        "warmup_steps" => overlay.warmup_steps = Some(u()?),
        "update_every" => overlay.update_every = Some(u()? as u32),
        "num_envs" => overlay.num_envs = Some(u()? as u32),
        "max_traffic" => overlay.env.max_traffic = Some(u()? as u32),
        "spawnable_sectors" => {
            let sectors = kv::parse_u64_list(pair).map_err(bad)?;
            overlay.env.spawnable_sectors = Some(sectors.into_iter().map(|s| s as usize).collect());
        }
        "dt" => overlay.env.dt = Some(f()?),
        "max_steps" => overlay.env.max_steps = Some(u()? as u32),
        "v_target" => overlay.env.v_target = Some(f()?),
        "v_max" => overlay.env.v_max = Some(f()?),
        "steer_max" => overlay.env.steer_max = Some(f()?),
        "accel_max" => overlay.env.accel_max = Some(f()?),
        "speed_weight" => overlay.env.speed_weight = Some(f()?),
        "lane_weight" => overlay.env.lane_weight = Some(f()?),
        "off_track_penalty" => overlay.env.off_track_penalty = Some(f()?),
        "collision_penalty" => overlay.env.collision_penalty = Some(f()?),
        key => {
            return Err(ConfigError::UnknownKey {
                line: pair.line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Resolves preset, optional file overlay and flag overlay in that order.
pub fn resolve(
    preset_name: Option<&str>,
    file: Option<&Overlay>,
    flags: &Overlay,
) -> Result<Settings, ConfigError> {
    let mut settings = match preset_name {
        Some(name) => preset(name)?,
        None => Settings::default(),
    };
    if let Some(file) = file {
        file.apply(&mut settings);
    }
    flags.apply(&mut settings);
    Ok(settings)
}

/// Renders resolved settings as `key = value` lines (stable order).
pub fn format_settings(settings: &Settings) -> String {
    let sac = &settings.sac;
    let mut out = String::new();
    let hidden: Vec<String> = sac.hidden.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("lr = {}\n", sac.lr));
    out.push_str(&format!("bs = {}\n", sac.batch_size));
    out.push_str(&format!("gs = {}\n", sac.gradient_steps));
    out.push_str(&format!("ts = {}\n", sac.total_steps));
    out.push_str(&format!("tau = {}\n", sac.tau));
    out.push_str(&format!("gamma = {}\n", sac.gamma));
    out.push_str(&format!("alpha = {}\n", sac.alpha));
    out.push_str(&format!("hidden = {}\n", hidden.join(", ")));
    out.push_str(&format!("buffer_capacity = {}\n", sac.buffer_capacity));
    out.push_str(&format!("warmup_steps = {}\n", sac.warmup_steps));
    out.push_str(&format!("update_every = {}\n", sac.update_every));
    out.push_str(&format!("num_envs = {}\n", sac.num_envs));
    let env = &settings.env;
    macro_rules! opt {
        ($field:ident) => {
            if let Some(v) = &env.$field {
                out.push_str(&format!("{} = {}\n", stringify!($field), v));
            }
        };
    }
    opt!(max_traffic);
    if let Some(sectors) = &env.spawnable_sectors {
        let list: Vec<String> = sectors.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("spawnable_sectors = {}\n", list.join(", ")));
    }
    opt!(dt);
    opt!(max_steps);
    opt!(v_target);
    opt!(v_max);
    opt!(steer_max);
    opt!(accel_max);
    opt!(speed_weight);
    opt!(lane_weight);
    opt!(off_track_penalty);
    opt!(collision_penalty);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_schedule() {
        let cases: &[(&str, f64, f64, f64, f64, usize)] = &[
            ("table2-H", 0.9, 0.99, 0.5, 1e-4, 1024),
            ("table2-M", 0.005, 0.99, 0.5, 1e-4, 1024),
            ("table2-I", 0.9, 0.99, 0.5, 1e-4, 1024),
            ("table2-IN", 0.1, 0.65, 0.5, 5e-5, 8192),
            ("table2-LC", 0.005, 0.99, 1.0, 1e-4, 1024),
            ("table2-R", 0.9, 0.99, 0.5, 1e-4, 1024),
            ("table2-U", 0.9, 0.65, 0.5, 5e-5, 4096),
            ("table2-RT", 0.9, 0.99, 0.5, 1e-4, 1024),
        ];
        for &(name, tau, gamma, alpha, lr, bs) in cases {
            let s = preset(name).unwrap().sac;
            assert_eq!(s.tau, tau, "{name}");
            assert_eq!(s.gamma, gamma, "{name}");
            assert_eq!(s.alpha, alpha, "{name}");
            assert_eq!(s.lr, lr, "{name}");
            assert_eq!(s.batch_size, bs, "{name}");
            assert_eq!(s.gradient_steps, 10, "{name}");
            assert_eq!(s.total_steps, TABLE2_TOTAL_STEPS, "{name}");
        }
    }

    #[test]
    fn lane_centering_alias_and_desk_variants() {
        assert_eq!(preset("table2-L").unwrap(), preset("table2-LC").unwrap());
        let desk = preset("desk-RT").unwrap().sac;
        let full = preset("table2-RT").unwrap().sac;
        assert_eq!(desk.total_steps, DESK_TOTAL_STEPS);
        assert_eq!(full.total_steps, TABLE2_TOTAL_STEPS);
        // Only the step budget differs between desk and table2.
        let mut full_short = full.clone();
        full_short.total_steps = DESK_TOTAL_STEPS;
        assert_eq!(desk, full_short);
    }

    #[test]
    fn unknown_preset_lists_known_names() {
        let err = preset("table2-X").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("table2-RT") && msg.contains("desk-H"), "{msg}");
        assert!(preset("warp-H").is_err());
        assert!(preset("table2").is_err());
    }

    #[test]
    fn overlay_parsing_and_precedence() {
        let file = parse_overlay("lr = 3e-4\nts = 1e6\nmax_traffic = 4\nhidden = 64, 64\n").unwrap();
        let mut flags = Overlay::default();
        flags.ts = Some(5_000);
        let settings = resolve(Some("table2-RT"), Some(&file), &flags).unwrap();
        assert_eq!(settings.sac.lr, 3e-4); // file beats preset
        assert_eq!(settings.sac.total_steps, 5_000); // flag beats file
        assert_eq!(settings.sac.batch_size, 1024); // preset survives elsewhere
        assert_eq!(settings.sac.hidden, vec![64, 64]);
        assert_eq!(settings.env.max_traffic, Some(4));
    }

    #[test]
    fn overlay_rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            parse_overlay("learning_rate = 1e-4\n"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            parse_overlay("lr = 1e-4\nlr = 2e-4\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(parse_overlay("lr = fast\n"), Err(ConfigError::BadValue(_))));
    }

    #[test]
    fn tweaks_apply_to_env_config() {
        use ikh_core::track::{chain_segments, Pose, SegmentKind, TrackDef, TrackSpec};
        let track = TrackSpec::build(TrackDef {
            segments: chain_segments(
                Pose::new(0.0, 0.0, 0.0),
                &[SegmentKind::Straight { length: 100.0 }],
            ),
            lane_width: 8.0,
            closed: false,
            sector_boundaries: vec![],
        })
        .unwrap();
        let mut cfg = EnvConfig::new(std::sync::Arc::new(track));
        let overlay = parse_overlay(
            "max_traffic = 3\nspawnable_sectors = 0\nv_target = 6\nlane_weight = 0.2\nmax_steps = 77\n",
        )
        .unwrap();
        overlay.env.apply(&mut cfg);
        assert_eq!(cfg.spawn.max_traffic, 3);
        assert_eq!(cfg.spawn.spawnable_sectors, vec![0]);
        assert_eq!(cfg.v_target, 6.0);
        assert_eq!(cfg.c_l, 0.2);
        assert_eq!(cfg.max_steps, 77);
    }

    #[test]
    fn format_settings_round_trips_through_parse() {
        let mut settings = preset("desk-IN").unwrap();
        settings.env.max_traffic = Some(2);
        settings.env.v_target = Some(7.5);
        let text = format_settings(&settings);
        let overlay = parse_overlay(&text).unwrap();
        let mut rebuilt = Settings::default();
        overlay.apply(&mut rebuilt);
        assert_eq!(rebuilt, settings);
    }
}
