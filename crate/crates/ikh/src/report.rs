//! Plain-text output formats: training-log, evaluation, heatmap and trace
//! CSVs, the evaluation summary, and an SVG heatmap strip.
//!
//! All builders are pure string functions so output bytes are exactly
//! reproducible; the CLI only wraps them in `fs::write`. Floats use Rust's
//! shortest round-trip formatting except in the human-oriented summary.

use std::fmt::Write as _;

use ikh_core::eval::{EvalReport, HeatmapRow, TraceRow, BIN_LABELS};
use ikh_core::sac::TrainLogRow;
use ikh_core::sim::TerminationCause;

/// Stable lower-case name for a termination cause.
pub fn cause_label(cause: TerminationCause) -> &'static str {
    match cause {
        TerminationCause::None => "none",
        TerminationCause::Collision => "collision",
        TerminationCause::OffTrack => "off_track",
        TerminationCause::MaxSteps => "max_steps",
    }
}

/// Training log: `step,episode,episodic_reward,q1_loss,q2_loss,actor_loss`.
pub fn train_log_csv(log: &[TrainLogRow]) -> String {
    let mut out = String::from("step,episode,episodic_reward,q1_loss,q2_loss,actor_loss\n");
    for row in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.step, row.episode, row.episodic_reward, row.q1_loss, row.q2_loss, row.actor_loss
        );
    }
    out
}

/// Per-episode evaluation records:
/// `seed,episode,spawn_sector,steps,sectors,total_reward,cause`.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("seed,episode,spawn_sector,steps,sectors,total_reward,cause\n");
    for run in &report.runs {
        for e in &run.episodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                run.seed,
                e.episode,
                e.spawn_sector,
                e.steps,
                e.sectors,
                e.total_reward,
                cause_label(e.cause)
            );
        }
    }
    out
}

/// Spawn heatmap: `segment,mean_sectors,n_episodes`. Segments that never
/// hosted a spawn are absent.
pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    let mut out = String::from("segment,mean_sectors,n_episodes\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.segment, row.mean_sectors, row.episodes);
    }
    out
}

/// Step trace: `step,episode,sector,reward,w_1..w_m,steer,accel`.
pub fn trace_csv(rows: &[TraceRow], skill_count: usize) -> String {
    let mut out = String::from("step,episode,sector,reward");
    for i in 1..=skill_count {
        let _ = write!(out, ",w_{i}");
    }
    out.push_str(",steer,accel\n");
    for row in rows {
        let _ = write!(out, "{},{},{},{}", row.step, row.episode, row.sector, row.reward);
        for w in &row.weights {
            let _ = write!(out, ",{w}");
        }
        let _ = writeln!(out, ",{},{}", row.steer, row.accel);
    }
    out
}

/// Human-oriented evaluation summary: aggregates, sector-bin histogram and
/// per-seed means.
pub fn summary_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let n = report.episode_count();
    let _ = writeln!(out, "episodes = {n}");
    let _ = writeln!(out, "mean_sectors = {:.4}", report.mean_sectors());
    let _ = writeln!(out, "var_sectors = {:.4}", report.variance_sectors());
    let _ = writeln!(out, "mean_reward = {:.4}", report.mean_reward());
    let counts = report.bin_counts();
    let fractions = report.bin_fractions();
    for (i, label) in BIN_LABELS.iter().enumerate() {
        let _ = writeln!(
            out,
            "bin {label} = {} ({:.1}%)",
            counts[i],
            fractions[i] * 100.0
        );
    }
    for run in &report.runs {
        let episodes = run.episodes.len();
        let (mean_sectors, mean_reward) = if episodes == 0 {
            (0.0, 0.0)
        } else {
            let s: f64 = run.episodes.iter().map(|e| e.sectors as f64).sum();
            let r: f64 = run.episodes.iter().map(|e| e.total_reward).sum();
            (s / episodes as f64, r / episodes as f64)
        };
        let _ = writeln!(
            out,
            "seed {} = {} episodes, mean_sectors {:.4}, mean_reward {:.4}",
            run.seed, episodes, mean_sectors, mean_reward
        );
    }
    out
}

/// Full-scale sector count for the heatmap color ramp.
const HEAT_FULL_SCALE: f64 = 9.0;

fn heat_color(mean_sectors: f64) -> String {
    let t = (mean_sectors / HEAT_FULL_SCALE).clamp(0.0, 1.0);
    // Light blue to dark blue ramp.
    let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 81.0), lerp(255.0, 156.0))
}

/// Renders the spawn heatmap as one SVG strip: one cell per track segment,
/// colored by mean sectors completed; gray cells mark segments with no
/// spawns. `segment_count` is the number of segments on the track.
pub fn heatmap_svg(rows: &[HeatmapRow], segment_count: usize) -> String {
    const CELL: usize = 64;
    const HEIGHT: usize = 72;
    let width = CELL * segment_count.max(1) + 2;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {width} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">"
    );
    for segment in 0..segment_count {
        let x = 1 + segment * CELL;
        let row = rows.iter().find(|r| r.segment == segment);
        let (fill, label) = match row {
            Some(r) => (heat_color(r.mean_sectors), format!("{:.2}", r.mean_sectors)),
            None => ("#cccccc".to_string(), "-".to_string()),
        };
        let text_fill = match row {
            Some(r) if r.mean_sectors / HEAT_FULL_SCALE > 0.55 => "#ffffff",
            _ => "#000000",
        };
        let _ = writeln!(
            out,
            "  <rect x=\"{x}\" y=\"1\" width=\"{CELL}\" height=\"46\" fill=\"{fill}\" \
             stroke=\"#333333\"/>"
        );
        let cx = x + CELL / 2;
        let _ = writeln!(
            out,
            "  <text x=\"{cx}\" y=\"28\" text-anchor=\"middle\" fill=\"{text_fill}\">{label}</text>"
        );
        let _ = writeln!(
            out,
            "  <text x=\"{cx}\" y=\"64\" text-anchor=\"middle\">{segment}</text>"
        );
    }
    out.push_str("</svg>\n");
    out
}
