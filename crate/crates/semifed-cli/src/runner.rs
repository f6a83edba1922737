//! Experiment orchestration: builds the world from a config, executes
//! the requested modes, and writes trace/summary/comparison artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use semifed_core::bandwidth::{verify_plan, BandwidthPlan, BandwidthPolicy, PayloadLedger};
use semifed_core::engine::{run, BandwidthSource, Mode, Objective, RunConfig, SimTrace};
use semifed_core::learning::Task;
use semifed_core::scheduling::{greedy_schedule, SchedulingMatrix};
use semifed_core::wireless::{ChannelParams, ChannelTrace, UEProfile};

use crate::config::{mode_tag, parse_mode, parse_objective, ExperimentConfig};
use crate::io::{
    atomic_write, compare, plan_to_csv, schedule_to_csv, summarize, trace_to_csv, RunSummary,
};

/// Everything derived from a config that runs share.
pub struct World {
    pub task: Task,
    pub profiles: Vec<UEProfile>,
    pub channel: ChannelParams,
    pub rounds: usize,
    pub participants: usize,
    pub policy: BandwidthPolicy,
    pub objective: Objective,
    pub modes: Vec<Mode>,
}

/// Instantiates task, population and resolved protocol parameters.
pub fn prepare(config: &ExperimentConfig) -> Result<World, crate::config::ConfigError> {
    let profiles = config.build_profiles()?;
    let eta_min = profiles.iter().map(|p| p.eta).fold(f64::INFINITY, f64::min);
    let (rounds, participants) = config.resolve_rounds(eta_min)?;
    let task = config.build_task()?;
    let channel = config.channel_params()?;
    let policy = config
        .bandwidth_policy()
        .map_err(crate::config::ConfigError::Semantic)?;
    let objective = parse_objective(&config.protocol.objective)
        .map_err(crate::config::ConfigError::Semantic)?;
    let modes = config
        .protocol
        .modes
        .iter()
        .map(|m| parse_mode(m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(crate::config::ConfigError::Semantic)?;
    Ok(World {
        task,
        profiles,
        channel,
        rounds,
        participants,
        policy,
        objective,
        modes,
    })
}

/// The greedy schedule for the world's frequencies and horizon.
pub fn build_schedule(
    config: &ExperimentConfig,
    world: &World,
) -> Result<SchedulingMatrix, semifed_core::Error> {
    let eta: Vec<f64> = world.profiles.iter().map(|p| p.eta).collect();
    greedy_schedule(
        &eta,
        world.participants,
        world.rounds,
        config.protocol.staleness_bound,
    )
}

/// Run configuration for one mode.
pub fn run_config(config: &ExperimentConfig, world: &World, mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        objective: world.objective,
        participants: world.participants,
        staleness_bound: config.protocol.staleness_bound,
        rounds: world.rounds,
        local_lr: config.learning.local_lr,
        global_lr: config.learning.global_lr,
        batch: config.batch_spec().expect("validated"),
        payload_units: config.learning.payload_units,
        seed: config.seed,
        redistribute_stale: match mode {
            Mode::SemiSync => config.protocol.redistribute_stale,
            _ => false,
        },
        abandon_on_redistribute: config.protocol.abandon_on_redistribute,
        fosp_epsilon: config.protocol.epsilon,
    }
}

/// Executes one mode. Baseline modes always share the band across the
/// whole population; the configured policy applies to the
/// semi-synchronous protocol.
pub fn execute_mode(
    config: &ExperimentConfig,
    world: &World,
    mode: Mode,
) -> Result<(RunConfig, SimTrace)> {
    let cfg = run_config(config, world, mode);
    let trace = match mode {
        Mode::SemiSync => {
            let schedule = build_schedule(config, world)?;
            run(
                &cfg,
                &world.task,
                &world.profiles,
                &world.channel,
                &BandwidthSource::Policy(world.policy),
                Some(&schedule),
            )?
        }
        Mode::Sync | Mode::Async => run(
            &cfg,
            &world.task,
            &world.profiles,
            &world.channel,
            &BandwidthSource::Policy(BandwidthPolicy::AllShareExtreme),
            None,
        )?,
    };
    Ok((cfg, trace))
}

/// Output of a full `simulate` invocation.
pub struct SimulateOutcome {
    pub summaries: Vec<RunSummary>,
    pub any_flags: bool,
}

/// Runs the requested modes, writing one trace CSV and one summary
/// JSON per mode (tagged by `suffix` when sweeping), plus a comparison
/// JSON when more than one mode ran.
pub fn simulate(
    config: &ExperimentConfig,
    out_dir: &Path,
    suffix: &str,
    parallel: bool,
) -> Result<SimulateOutcome> {
    let world = prepare(config)?;
    let objective_name = config.protocol.objective.clone();

    let jobs: Vec<Mode> = world.modes.clone();
    let runs: Vec<Result<(Mode, RunConfig, SimTrace)>> = if parallel {
        jobs.par_iter()
            .map(|&mode| execute_mode(config, &world, mode).map(|(c, t)| (mode, c, t)))
            .collect()
    } else {
        jobs.iter()
            .map(|&mode| execute_mode(config, &world, mode).map(|(c, t)| (mode, c, t)))
            .collect()
    };

    let mut summaries = Vec::new();
    let mut any_flags = false;
    for item in runs {
        let (mode, cfg, trace) = item?;
        let tag = mode_tag(mode);
        let trace_path = out_dir.join(format!("trace_{tag}{suffix}.csv"));
        atomic_write(&trace_path, trace_to_csv(&trace).as_bytes())
            .with_context(|| format!("writing {}", trace_path.display()))?;
        let summary = summarize(tag, &objective_name, &cfg, &trace);
        let summary_path = out_dir.join(format!("summary_{tag}{suffix}.json"));
        atomic_write(
            &summary_path,
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )?;
        any_flags |= !trace.flags.is_empty();
        summaries.push(summary);
    }
    if summaries.len() > 1 {
        let comparison = compare(summaries.clone());
        atomic_write(
            &out_dir.join(format!("comparison{suffix}.json")),
            serde_json::to_string_pretty(&comparison)?.as_bytes(),
        )?;
    }
    // Echo the resolved config for exact reruns.
    atomic_write(
        &out_dir.join(format!("config{suffix}.json")),
        serde_json::to_string_pretty(config)?.as_bytes(),
    )?;
    Ok(SimulateOutcome {
        summaries,
        any_flags,
    })
}

/// Emits the greedy schedule as CSV.
pub fn emit_schedule(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let world = prepare(config)?;
    let schedule = build_schedule(config, &world)?;
    let path = out_dir.join("schedule.csv");
    atomic_write(&path, schedule_to_csv(&schedule).as_bytes())?;
    Ok(path)
}

/// Emits the bandwidth plan for the configured policy as CSV and
/// reports any validity violations (empty report means valid).
pub fn emit_bandwidth(config: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, usize)> {
    let world = prepare(config)?;
    let schedule = build_schedule(config, &world)?;
    let channel_trace = ChannelTrace::generate(
        config.seed,
        world.rounds,
        world.profiles.len(),
        &world.channel,
    );
    let plan = BandwidthPlan::from_policy(
        world.policy,
        &schedule,
        &world.profiles,
        &channel_trace,
        &world.channel,
    )?;
    let ledger = PayloadLedger::new(
        world.rounds,
        world.profiles.len(),
        config.learning.payload_units,
    );
    let report = verify_plan(
        &plan,
        &ledger,
        &schedule,
        &world.profiles,
        &channel_trace,
        &world.channel,
    )?;
    for violation in &report {
        eprintln!("plan violation: {violation:?}");
    }
    let path = out_dir.join("plan.csv");
    atomic_write(&path, plan_to_csv(&plan).as_bytes())?;
    Ok((path, report.len()))
}

/// The `bound` report: smoothness/variance constants, step condition,
/// the stationarity bound and the estimated horizon.
pub fn bound_report(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let profiles = config.build_profiles()?;
    let eta_min = profiles.iter().map(|p| p.eta).fold(f64::INFINITY, f64::min);
    let (rounds, _) = config.resolve_rounds(eta_min)?;
    let constants = config.convergence_constants(rounds)?;
    constants.validate()?;
    let step_ok = semifed_core::analysis::step_condition(&constants);
    let bound = if step_ok {
        Some(semifed_core::analysis::stationarity_bound(&constants)?)
    } else {
        None
    };
    let size =
        semifed_core::analysis::estimate_run_size(&constants, config.protocol.epsilon, eta_min)?;
    Ok(serde_json::json!({
        "L_F": semifed_core::analysis::meta_smoothness(&constants),
        "sigma_F_sq": semifed_core::analysis::meta_grad_variance(&constants),
        "gamma_F_sq": semifed_core::analysis::meta_grad_diversity(&constants),
        "step_ok": step_ok,
        "bound": bound,
        "K_star": size.rounds,
        "A_star": size.participants.min(profiles.len()).max(1),
    }))
}

/// Applies one sweep override to a config.
pub fn apply_sweep_value(
    config: &ExperimentConfig,
    param: &str,
    value: usize,
) -> Result<ExperimentConfig, String> {
    let mut next = config.clone();
    match param {
        "participants" => next.protocol.participants = value,
        "staleness" => next.protocol.staleness_bound = value,
        "level" => match &mut next.learning.task {
            crate::config::TaskConfig::Classification { labels_per_ue, .. } => {
                *labels_per_ue = value;
            }
            crate::config::TaskConfig::Quadratic { .. } => {
                return Err("sweep over `level` needs a classification task".into());
            }
        },
        other => {
            return Err(format!(
                "sweep parameter must be participants|staleness|level, got {other:?}"
            ));
        }
    }
    Ok(next)
}

/// Runs a sweep over one parameter; each point writes its own tagged
/// artifacts plus a combined sweep summary.
pub fn sweep(
    config: &ExperimentConfig,
    param: &str,
    values: &[usize],
    out_dir: &Path,
    parallel: bool,
) -> Result<SimulateOutcome> {
    let points: Vec<(usize, ExperimentConfig)> = values
        .iter()
        .map(|&v| {
            apply_sweep_value(config, param, v)
                .map(|c| (v, c))
                .map_err(anyhow::Error::msg)
        })
        .collect::<Result<_>>()?;
    // Validate every point before running any.
    for (v, point) in &points {
        point
            .validate()
            .with_context(|| format!("sweep point {param}={v}"))?;
    }
    let outcomes: Vec<Result<SimulateOutcome>> = if parallel {
        points
            .par_iter()
            .map(|(v, point)| simulate(point, out_dir, &format!("_{param}{v}"), false))
            .collect()
    } else {
        points
            .iter()
            .map(|(v, point)| simulate(point, out_dir, &format!("_{param}{v}"), false))
            .collect()
    };
    let mut summaries = Vec::new();
    let mut any_flags = false;
    for outcome in outcomes {
        let outcome = outcome?;
        any_flags |= outcome.any_flags;
        summaries.extend(outcome.summaries);
    }
    atomic_write(
        &out_dir.join(format!("sweep_{param}.json")),
        serde_json::to_string_pretty(&summaries)?.as_bytes(),
    )?;
    Ok(SimulateOutcome {
        summaries,
        any_flags,
    })
}
