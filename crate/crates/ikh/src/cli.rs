//! The `ikh` command line.
//!
//! Four subcommands cover the whole workflow:
//!
//! * `pretrain` — train one skill with SAC on a task, saving `actor.ikhm`
//!   and `rewards.csv`;
//! * `train-master` — train a master over frozen skills named by a
//!   manifest, saving `master.ikha` and `rewards.csv`;
//! * `eval` — evaluate an agent over episodes and seeds, saving
//!   `report.csv`, `summary.txt`, `heatmap.csv` and `heatmap.svg`;
//! * `trace` — record per-step weights of a composite agent to `trace.csv`.
//!
//! Agents are addressed as `scripted:NAME`, `sac:PATH` or
//! `ikh:MANIFEST:MASTER`. Outputs land in `--out`, else `$IKH_DATA_DIR`,
//! else `./ikh-out`. Exit codes: 0 success, 2 configuration or usage error,
//! 3 runtime failure.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ikh_core::compose::{train_master, IkhAgent, PolicySet};
use ikh_core::eval::{
    evaluate_seeds, record_trace, spawn_heatmap, IkhPolicy, Policy, SacPolicy,
    ScriptedLaneKeeper, StationaryPolicy,
};
use ikh_core::sac::{pretrain, Environment, SacAgent, SacConfig};
use ikh_core::sim::{DrivingEnv, EnvConfig, OBS_DIM};

use crate::artifact::{self, MasterBundle};
use crate::config::{self, EnvTweaks, Overlay, Settings};
use crate::report;
use crate::trackfile;

/// Decorrelates the environment spawn stream from the learner stream that
/// shares the user-facing base seed.
const ENV_SEED_OFFSET: u64 = 0x5EED_0FF5;

const TASK_HELP: &str = "Track name (highway, indiana, lane_centering, merge, racetrack, \
racetrack_mini, roundabout, uturn) or path to a .track file";

const PRESET_HELP: &str = "Hyperparameter preset: table2-{H,M,I,IN,LC,R,U,RT} for the full \
schedule, desk-* for a short-run variant; *-L is an alias for *-LC";

const AGENT_HELP: &str = "Agent to run: scripted:NAME (stationary, lane_keeper), \
sac:ACTOR.ikhm, or ikh:MANIFEST:MASTER.ikha";

/// A CLI failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files, names or shapes the user can fix: exit code 2.
    Usage(String),
    /// Failure while running or writing results: exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn usage(err: impl std::fmt::Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

#[derive(Parser)]
#[command(
    name = "ikh",
    version,
    about = "Hierarchical driving agents: pretrain skills, train blending masters, evaluate, trace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one skill with SAC on a driving task.
    Pretrain(PretrainArgs),
    /// Train a master policy that blends frozen skills.
    TrainMaster(TrainMasterArgs),
    /// Evaluate an agent over episodes and seeds.
    Eval(EvalArgs),
    /// Record per-step blending weights of a composite agent.
    Trace(TraceArgs),
}

#[derive(Args, Default)]
struct HyperArgs {
    #[arg(long, help = PRESET_HELP)]
    preset: Option<String>,
    /// Config file overlaying the preset (same keys as the flags).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size.
    #[arg(long)]
    bs: Option<usize>,
    /// Gradient steps per update trigger.
    #[arg(long)]
    gs: Option<u32>,
    /// Total environment steps.
    #[arg(long)]
    ts: Option<u64>,
    /// Polyak averaging factor for target critics.
    #[arg(long)]
    tau: Option<f64>,
    /// Discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Entropy temperature.
    #[arg(long)]
    alpha: Option<f64>,
    /// Hidden layer widths, comma-separated (e.g. 256,256).
    #[arg(long)]
    hidden: Option<String>,
    /// Replay buffer capacity.
    #[arg(long)]
    buffer_capacity: Option<usize>,
    /// Environment steps before learning starts.
    #[arg(long)]
    warmup_steps: Option<u64>,
    /// Update every this many environment steps (0 = once per sweep).
    #[arg(long)]
    update_every: Option<u32>,
    /// Parallel environments stepped round-robin.
    #[arg(long)]
    num_envs: Option<u32>,
    /// Print the resolved configuration and exit without training.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Default)]
struct EnvArgs {
    /// Upper bound on sampled traffic vehicles per episode.
    #[arg(long)]
    max_traffic: Option<u32>,
    /// Comma-separated sector indices the ego may spawn in.
    #[arg(long)]
    spawnable_sectors: Option<String>,
    /// Simulation step, seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Episode step cap.
    #[arg(long)]
    max_steps: Option<u32>,
    /// Reward-maximizing cruise speed, m/s.
    #[arg(long)]
    v_target: Option<f64>,
    /// Hard speed cap, m/s.
    #[arg(long)]
    v_max: Option<f64>,
    /// Maximum steering angle, radians.
    #[arg(long)]
    steer_max: Option<f64>,
    /// Maximum acceleration, m/s^2.
    #[arg(long)]
    accel_max: Option<f64>,
    /// Weight of the speed-tracking reward term.
    #[arg(long)]
    speed_weight: Option<f64>,
    /// Weight of the lane-keeping reward term.
    #[arg(long)]
    lane_weight: Option<f64>,
    /// Penalty applied when the ego leaves the lane.
    #[arg(long)]
    off_track_penalty: Option<f64>,
    /// Penalty applied on collision.
    #[arg(long)]
    collision_penalty: Option<f64>,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long, help = TASK_HELP)]
    task: String,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default $IKH_DATA_DIR, else ./ikh-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Args)]
struct TrainMasterArgs {
    #[arg(long, default_value = "racetrack", help = TASK_HELP)]
    task: String,
    /// Manifest of frozen skills: ordered `label = checkpoint` lines.
    #[arg(long)]
    policies: PathBuf,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default $IKH_DATA_DIR, else ./ikh-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, help = TASK_HELP)]
    task: String,
    #[arg(long, help = AGENT_HELP)]
    agent: String,
    /// Episodes per seed.
    #[arg(long, default_value_t = 100)]
    episodes: u64,
    /// Number of evaluation seeds (base, base+1, ...).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default $IKH_DATA_DIR, else ./ikh-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, help = TASK_HELP)]
    task: String,
    #[arg(long, help = AGENT_HELP)]
    agent: String,
    /// Episodes to trace.
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    /// Force one skill's weight to 1 (label or index) instead of the master.
    #[arg(long)]
    forced_skill: Option<String>,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default $IKH_DATA_DIR, else ./ikh-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
}

/// Parses `std::env::args`, runs the command and returns the process exit
/// code. Help and version requests exit 0; parse errors exit 2.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::TrainMaster(args) => cmd_train_master(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("{what}: `{}` is not an integer", tok.trim())))
        })
        .collect()
}

fn env_overlay(env: &EnvArgs) -> Result<EnvTweaks, CliError> {
    let mut tweaks = EnvTweaks {
        max_traffic: env.max_traffic,
        spawnable_sectors: None,
        dt: env.dt,
        max_steps: env.max_steps,
        v_target: env.v_target,
        v_max: env.v_max,
        steer_max: env.steer_max,
        accel_max: env.accel_max,
        speed_weight: env.speed_weight,
        lane_weight: env.lane_weight,
        off_track_penalty: env.off_track_penalty,
        collision_penalty: env.collision_penalty,
    };
    if let Some(text) = &env.spawnable_sectors {
        tweaks.spawnable_sectors = Some(parse_usize_list(text, "--spawnable-sectors")?);
    }
    Ok(tweaks)
}

fn flags_overlay(hyper: &HyperArgs, env: &EnvArgs) -> Result<Overlay, CliError> {
    let mut overlay = Overlay {
        lr: hyper.lr,
        bs: hyper.bs,
        gs: hyper.gs,
        ts: hyper.ts,
        tau: hyper.tau,
        gamma: hyper.gamma,
        alpha: hyper.alpha,
        hidden: None,
        buffer_capacity: hyper.buffer_capacity,
        warmup_steps: hyper.warmup_steps,
        update_every: hyper.update_every,
        num_envs: hyper.num_envs,
        env: env_overlay(env)?,
    };
    if let Some(text) = &hyper.hidden {
        overlay.hidden = Some(parse_usize_list(text, "--hidden")?);
    }
    Ok(overlay)
}

fn resolve_settings(hyper: &HyperArgs, env: &EnvArgs) -> Result<Settings, CliError> {
    let file_overlay = match &hyper.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some(
                config::parse_overlay(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let flags = flags_overlay(hyper, env)?;
    config::resolve(hyper.preset.as_deref(), file_overlay.as_ref(), &flags).map_err(usage)
}

/// Builds the task's environment config: bundled or file track, tweaks,
/// spawn seed, then a one-off validation pass so bad settings fail as usage
/// errors before any work starts.
fn build_env_config(
    task: &str,
    tweaks: &EnvTweaks,
    spawn_seed: u64,
) -> Result<EnvConfig, CliError> {
    let track = trackfile::resolve_track(task).map_err(usage)?;
    let mut cfg = EnvConfig::new(Arc::new(track));
    tweaks.apply(&mut cfg);
    cfg.spawn.seed = spawn_seed;
    let sectors = cfg.track.sector_count();
    if let Some(&bad) = cfg.spawn.spawnable_sectors.iter().find(|&&s| s >= sectors) {
        return Err(CliError::Usage(format!(
            "spawnable sector {bad} out of range; track has {sectors} sectors"
        )));
    }
    DrivingEnv::new(cfg.clone()).map_err(usage)?;
    Ok(cfg)
}

fn resolve_out(out: &Option<PathBuf>) -> PathBuf {
    out.clone()
        .or_else(|| std::env::var_os("IKH_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("ikh-out"))
}

fn prepare_out(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = resolve_out(out);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_config(task: &str, seed: u64, settings: &Settings) {
    print!(
        "task = {task}\nseed = {seed}\n{}",
        config::format_settings(settings)
    );
}

fn cmd_pretrain(args: PretrainArgs) -> Result<(), CliError> {
    let settings = resolve_settings(&args.hyper, &args.env)?;
    let env_cfg = build_env_config(
        &args.task,
        &settings.env,
        args.seed.wrapping_add(ENV_SEED_OFFSET),
    )?;
    if args.hyper.print_config {
        print_config(&args.task, args.seed, &settings);
        return Ok(());
    }
    let (agent, log) = pretrain(
        |rank| Ok(Box::new(DrivingEnv::with_rank(env_cfg.clone(), rank)?) as Box<dyn Environment>),
        &settings.sac,
        args.seed,
    )
    .map_err(runtime)?;
    let dir = prepare_out(&args.out)?;
    artifact::save_actor(&dir.join("actor.ikhm"), agent.actor()).map_err(runtime)?;
    println!("wrote {}", dir.join("actor.ikhm").display());
    write_text(&dir, "rewards.csv", &report::train_log_csv(&log))
}

fn cmd_train_master(args: TrainMasterArgs) -> Result<(), CliError> {
    let settings = resolve_settings(&args.hyper, &args.env)?;
    let env_cfg = build_env_config(
        &args.task,
        &settings.env,
        args.seed.wrapping_add(ENV_SEED_OFFSET),
    )?;
    if args.hyper.print_config {
        print_config(&args.task, args.seed, &settings);
        return Ok(());
    }
    let policies = artifact::load_policy_set(&args.policies, (-1.0, 1.0)).map_err(usage)?;
    check_driving_shape(&policies)?;
    let (agent, log) = train_master(
        policies,
        |rank| Ok(Box::new(DrivingEnv::with_rank(env_cfg.clone(), rank)?) as Box<dyn Environment>),
        &settings.sac,
        args.seed,
    )
    .map_err(runtime)?;
    let dir = prepare_out(&args.out)?;
    let bundle = MasterBundle {
        labels: agent.policies().labels().to_vec(),
        actor: agent.master().actor().clone(),
    };
    artifact::save_master(&dir.join("master.ikha"), &bundle).map_err(runtime)?;
    println!("wrote {}", dir.join("master.ikha").display());
    write_text(&dir, "rewards.csv", &report::train_log_csv(&log))
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let spec = parse_agent_spec(&args.agent)?;
    let tweaks = env_overlay(&args.env)?;
    let env_cfg = build_env_config(&args.task, &tweaks, args.seed)?;
    let (mut policy, _skills) = build_policy(&spec, &env_cfg, None)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| args.seed.wrapping_add(i)).collect();
    let eval_report =
        evaluate_seeds(&env_cfg, policy.as_mut(), args.episodes, &seeds).map_err(runtime)?;
    let dir = prepare_out(&args.out)?;
    write_text(&dir, "report.csv", &report::report_csv(&eval_report))?;
    write_text(&dir, "summary.txt", &report::summary_text(&eval_report))?;
    let heatmap = spawn_heatmap(&eval_report);
    write_text(&dir, "heatmap.csv", &report::heatmap_csv(&heatmap))?;
    let segments = env_cfg.track.segments().len();
    write_text(&dir, "heatmap.svg", &report::heatmap_svg(&heatmap, segments))
}

fn cmd_trace(args: TraceArgs) -> Result<(), CliError> {
    let spec = parse_agent_spec(&args.agent)?;
    if !matches!(spec, AgentSpec::Ikh { .. }) {
        return Err(CliError::Usage(
            "trace requires a composite agent (ikh:MANIFEST:MASTER); scripted and sac agents \
             produce no blending weights"
                .into(),
        ));
    }
    let tweaks = env_overlay(&args.env)?;
    let env_cfg = build_env_config(&args.task, &tweaks, args.seed)?;
    let (mut policy, skills) = build_policy(&spec, &env_cfg, args.forced_skill.as_deref())?;
    let skills = skills.expect("ikh agent always carries its skill set");
    let mut env = DrivingEnv::new(env_cfg).map_err(runtime)?;
    let rows = record_trace(&mut env, policy.as_mut(), args.episodes).map_err(runtime)?;
    let dir = prepare_out(&args.out)?;
    write_text(&dir, "trace.csv", &report::trace_csv(&rows, skills.len()))
}

/// How the user names an agent on the command line.
enum AgentSpec {
    Scripted(String),
    Sac(PathBuf),
    Ikh { manifest: PathBuf, master: PathBuf },
}

fn parse_agent_spec(text: &str) -> Result<AgentSpec, CliError> {
    if let Some(name) = text.strip_prefix("scripted:") {
        return Ok(AgentSpec::Scripted(name.to_string()));
    }
    if let Some(path) = text.strip_prefix("sac:") {
        return Ok(AgentSpec::Sac(PathBuf::from(path)));
    }
    if let Some(rest) = text.strip_prefix("ikh:") {
        let Some((manifest, master)) = rest.split_once(':') else {
            return Err(CliError::Usage(format!(
                "`{text}`: composite agents are written ikh:MANIFEST:MASTER"
            )));
        };
        return Ok(AgentSpec::Ikh {
            manifest: PathBuf::from(manifest),
            master: PathBuf::from(master),
        });
    }
    Err(CliError::Usage(format!(
        "`{text}`: agent must be scripted:NAME, sac:PATH or ikh:MANIFEST:MASTER"
    )))
}

fn check_driving_shape(policies: &PolicySet) -> Result<(), CliError> {
    if policies.obs_dim() != OBS_DIM {
        return Err(CliError::Usage(format!(
            "skills expect {}-dim observations but the driving task provides {OBS_DIM}",
            policies.obs_dim()
        )));
    }
    if policies.action_dim() != 2 {
        return Err(CliError::Usage(format!(
            "skills output {} action dims but driving control has 2 (steer, accel)",
            policies.action_dim()
        )));
    }
    Ok(())
}

/// Builds the evaluation policy named by `spec`. For composite agents the
/// frozen skill set is returned alongside so callers know the weight count;
/// `forced_skill` selects one skill by label or index instead of the master.
fn build_policy(
    spec: &AgentSpec,
    env_cfg: &EnvConfig,
    forced_skill: Option<&str>,
) -> Result<(Box<dyn Policy>, Option<Arc<PolicySet>>), CliError> {
    match spec {
        AgentSpec::Scripted(name) => {
            let policy: Box<dyn Policy> = match name.as_str() {
                "stationary" => Box::new(StationaryPolicy),
                "lane_keeper" => Box::new(ScriptedLaneKeeper::for_config(env_cfg)),
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown scripted policy `{other}`; available: stationary, lane_keeper"
                    )))
                }
            };
            Ok((policy, None))
        }
        AgentSpec::Sac(path) => {
            let actor = artifact::load_actor(path).map_err(usage)?;
            if actor.input_dim() != OBS_DIM || actor.output_dim() != 4 {
                return Err(CliError::Usage(format!(
                    "{}: actor maps {} -> {} but the driving task needs {OBS_DIM} -> 4",
                    path.display(),
                    actor.input_dim(),
                    actor.output_dim()
                )));
            }
            Ok((Box::new(SacPolicy::new(actor)), None))
        }
        AgentSpec::Ikh { manifest, master } => {
            let policies = artifact::load_policy_set(manifest, (-1.0, 1.0)).map_err(usage)?;
            check_driving_shape(&policies)?;
            let bundle = artifact::load_master(master).map_err(usage)?;
            if bundle.labels != policies.labels() {
                return Err(CliError::Usage(format!(
                    "master {} was trained over skills [{}] but the manifest lists [{}]",
                    master.display(),
                    bundle.labels.join(", "),
                    policies.labels().join(", ")
                )));
            }
            let master_agent =
                SacAgent::from_actor(bundle.actor, (0.0, 1.0), SacConfig::default(), 0)
                    .map_err(usage)?;
            let agent = IkhAgent::new(policies.clone(), master_agent).map_err(usage)?;
            let policy = match forced_skill {
                None => IkhPolicy::new(agent),
                Some(token) => {
                    let index = match token.parse::<usize>() {
                        Ok(i) => i,
                        Err(_) => {
                            policies.labels().iter().position(|l| l == token).ok_or_else(|| {
                                CliError::Usage(format!(
                                    "unknown skill `{token}`; the manifest lists: {}",
                                    policies.labels().join(", ")
                                ))
                            })?
                        }
                    };
                    IkhPolicy::with_forced_skill(agent, index).map_err(usage)?
                }
            };
            Ok((Box::new(policy), Some(policies)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_spec_grammar_parses_and_rejects() {
        assert!(matches!(
            parse_agent_spec("scripted:stationary"),
            Ok(AgentSpec::Scripted(name)) if name == "stationary"
        ));
        assert!(matches!(
            parse_agent_spec("sac:runs/actor.ikhm"),
            Ok(AgentSpec::Sac(_))
        ));
        match parse_agent_spec("ikh:skills.manifest:runs/master.ikha") {
            Ok(AgentSpec::Ikh { manifest, master }) => {
                assert_eq!(manifest, PathBuf::from("skills.manifest"));
                assert_eq!(master, PathBuf::from("runs/master.ikha"));
            }
            other => panic!("unexpected: {:?}", other.map(|_| ()).map_err(|e| e.message().to_string())),
        }
        assert!(parse_agent_spec("ikh:only_manifest").is_err());
        assert!(parse_agent_spec("dqn:foo").is_err());
        assert!(parse_agent_spec("scripted:").is_ok()); // name checked later
    }

    #[test]
    fn exit_codes_map_to_error_kinds() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 3);
    }

    #[test]
    fn cli_parses_representative_command_lines() {
        let cli = Cli::try_parse_from([
            "ikh",
            "pretrain",
            "--task",
            "highway",
            "--preset",
            "desk-H",
            "--ts",
            "1000",
            "--seed",
            "7",
        ])
        .unwrap();
        match cli.command {
            Command::Pretrain(args) => {
                assert_eq!(args.task, "highway");
                assert_eq!(args.seed, 7);
                assert_eq!(args.hyper.preset.as_deref(), Some("desk-H"));
                assert_eq!(args.hyper.ts, Some(1000));
            }
            _ => panic!("wrong subcommand"),
        }

        let cli = Cli::try_parse_from([
            "ikh",
            "eval",
            "--task",
            "racetrack",
            "--agent",
            "scripted:stationary",
        ])
        .unwrap();
        match cli.command {
            Command::Eval(args) => {
                assert_eq!(args.episodes, 100);
                assert_eq!(args.seeds, 5);
                assert_eq!(args.seed, 0);
            }
            _ => panic!("wrong subcommand"),
        }

        assert!(Cli::try_parse_from(["ikh", "pretrain"]).is_err()); // --task required
        assert!(Cli::try_parse_from(["ikh", "unknown-cmd"]).is_err());
    }

    #[test]
    fn out_dir_resolution_prefers_flag() {
        let flag = Some(PathBuf::from("explicit"));
        assert_eq!(resolve_out(&flag), PathBuf::from("explicit"));
        // Without the flag the fallback is either $IKH_DATA_DIR or ikh-out;
        // both are fine here since tests must not mutate process env.
        let fallback = resolve_out(&None);
        let var = std::env::var_os("IKH_DATA_DIR").map(PathBuf::from);
        assert_eq!(fallback, var.unwrap_or_else(|| PathBuf::from("ikh-out")));
    }

    #[test]
    fn spawnable_sector_bounds_are_checked() {
        let tweaks = EnvTweaks {
            spawnable_sectors: Some(vec![0, 99]),
            ..EnvTweaks::default()
        };
        let err = build_env_config("racetrack", &tweaks, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("99"), "{}", err.message());
    }
}
