//! Standard-library companion to `ikh-core`: file formats, configuration
//! resolution and the `ikh` command-line tool.
//!
//! This crate owns everything that touches the filesystem or a terminal:
//!
//! * [`kv`] — the line-oriented `key = value` format used by track files,
//!   config files and policy manifests.
//! * [`trackfile`] — the track description format plus the bundled tracks.
//! * [`config`] — hyperparameter presets, config files and flag overlays,
//!   resolved with precedence flags > file > preset.
//! * [`artifact`] — actor checkpoints, master bundles and policy manifests.
//! * [`report`] — CSV, plain-text and SVG output writers.
//! * [`cli`] — the `pretrain`, `train-master`, `eval` and `trace` commands.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod kv;
pub mod report;
pub mod trackfile;
