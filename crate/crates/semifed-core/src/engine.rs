//! Discrete-event executor for semi-synchronous, synchronous and
//! asynchronous training runs.
//!
//! The loop is single-threaded and strictly deterministic: events are
//! processed in (time, UE index) order, gradients are pure functions of
//! counter-based randomness keyed by (seed, local iteration, UE), and
//! bandwidth rows change only at round closures. A round closes when
//! the A-th gradient reaches the server; the new model goes to that
//! round's participants and, in the semi-synchronous protocol, to any
//! UE whose model has aged past the staleness bound.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::bandwidth::{BandwidthPlan, BandwidthPolicy, PayloadLedger};
use crate::error::{Error, Result};
use crate::learning::{
    fl_grad, meta_grad_stochastic, meta_objective_grad, meta_objective_value,
    plain_accuracy, plain_objective_grad, plain_objective_value, post_adaptation_accuracy,
    BatchSize, BatchSpec, GradientUpdate, ModelParams, Task,
};
use crate::rng::{stream_rng, Domain};
use crate::scheduling::SchedulingMatrix;
use crate::wireless::{
    compute_delay, rate_from_snr, snr_hz, validate_population, ChannelParams, ChannelTrace,
    UEProfile,
};

/// Aggregation discipline of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    /// Close a round after A arrivals; bounded staleness.
    SemiSync,
    /// Wait for the whole population every round.
    Sync,
    /// Update on every single arrival.
    Async,
}

/// Which objective the UEs optimize and the trace reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Objective {
    /// One-step personalized (meta) objective.
    Personalized,
    /// Conventional averaged objective.
    Plain,
}

/// Where per-round bandwidth rows come from.
#[derive(Debug, Clone)]
pub enum BandwidthSource {
    /// Recompute shares each round from a policy and the realized
    /// channel.
    Policy(BandwidthPolicy),
    /// Use a precomputed K x n plan.
    Fixed(BandwidthPlan),
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    /// Aggregation discipline.
    pub mode: Mode,
    /// Objective optimized by the UEs.
    pub objective: Objective,
    /// Participants per round A (semi-sync; sync uses n, async uses 1).
    pub participants: usize,
    /// Staleness bound S.
    pub staleness_bound: usize,
    /// Communication rounds K.
    pub rounds: usize,
    /// Local adaptation step size alpha.
    pub local_lr: f64,
    /// Global aggregation step size beta.
    pub global_lr: f64,
    /// Batch sizes of the stochastic gradients.
    pub batch: BatchSpec,
    /// Upload payload Z in information units.
    pub payload_units: f64,
    /// Master seed.
    pub seed: u64,
    /// Redistribute the fresh model to UEs whose staleness exceeded S
    /// (the semi-synchronous protocol rule).
    pub redistribute_stale: bool,
    /// On redistribution, abandon in-flight work and restart from the
    /// fresh model; otherwise finish the upload and discard it.
    pub abandon_on_redistribute: bool,
    /// Accuracy target used for the stationarity verdict.
    pub fosp_epsilon: f64,
}

impl RunConfig {
    /// Effective participants per round given the population size.
    pub fn effective_participants(&self, population: usize) -> usize {
        match self.mode {
            Mode::SemiSync => self.participants,
            Mode::Sync => population,
            Mode::Async => 1,
        }
    }

    fn validate(&self, population: usize) -> Result<()> {
        let a = self.effective_participants(population);
        if a == 0 || a > population {
            return Err(Error::TooManyParticipants {
                participants: a,
                population,
            });
        }
        if self.rounds == 0 {
            return Err(Error::InvalidParameter {
                name: "rounds",
                value: 0.0,
            });
        }
        if !(self.payload_units > 0.0) {
            return Err(Error::InvalidParameter {
                name: "payload_units",
                value: self.payload_units,
            });
        }
        if !(self.global_lr > 0.0) {
            return Err(Error::InvalidParameter {
                name: "global_lr",
                value: self.global_lr,
            });
        }
        if self.local_lr < 0.0 {
            return Err(Error::InvalidParameter {
                name: "local_lr",
                value: self.local_lr,
            });
        }
        self.batch.validate()
    }
}

/// One closed round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index k.
    pub round: usize,
    /// Simulated close time in seconds.
    pub close_time_s: f64,
    /// UEs whose gradients closed the round, in arrival order.
    pub participants: Vec<usize>,
    /// Staleness of each participant's update (aggregation round minus
    /// the index of the model it was computed from).
    pub staleness: Vec<usize>,
    /// Objective value at the round's model.
    pub loss: f64,
    /// Squared norm of the objective gradient at the round's model.
    pub grad_norm_sq: f64,
    /// Held-out accuracy (classification tasks only).
    pub accuracy: Option<f64>,
}

impl RoundRecord {
    /// Largest staleness among the round's updates.
    pub fn max_staleness(&self) -> usize {
        self.staleness.iter().copied().max().unwrap_or(0)
    }
}

/// Invariant breaches observed while running (non-fatal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceFlag {
    /// An aggregated update exceeded the staleness bound.
    StalenessExceeded {
        /// Round of aggregation.
        round: usize,
        /// Offending UE.
        ue: usize,
        /// Observed staleness.
        staleness: usize,
        /// Configured bound.
        bound: usize,
    },
    /// A UE abandoned an in-flight iteration on redistribution.
    IterationAbandoned {
        /// Round of the redistribution.
        round: usize,
        /// Restarted UE.
        ue: usize,
    },
}

/// Full simulation record.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Per-round records, one per closed round.
    pub records: Vec<RoundRecord>,
    /// Non-fatal invariant flags raised during the run.
    pub flags: Vec<TraceFlag>,
    /// Transmitted payload accounting.
    pub ledger: PayloadLedger,
    /// Global models w_0 ..= w_K.
    pub models: Vec<ModelParams>,
}

impl SimTrace {
    /// Final global model w_K.
    pub fn final_model(&self) -> &ModelParams {
        self.models.last().expect("trace holds at least w_0")
    }

    /// Average squared objective-gradient norm over the recorded rounds.
    pub fn avg_sq_grad_norm(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.grad_norm_sq).sum::<f64>() / self.records.len() as f64
    }

    /// Largest staleness observed in any aggregated update.
    pub fn max_staleness(&self) -> usize {
        self.records.iter().map(|r| r.max_staleness()).max().unwrap_or(0)
    }
}

/// Total simulated training time: the close time of the last round.
pub fn total_time(trace: &SimTrace) -> f64 {
    trace.records.last().map_or(0.0, |r| r.close_time_s)
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    /// Local computation in progress; fires at `done_at`.
    Computing { done_at: f64 },
    /// Upload in progress; `remaining` units outstanding, position
    /// last settled at `last_change`.
    Transmitting { remaining: f64, last_change: f64 },
    /// Uploaded and waiting to be aggregated / re-supplied.
    Waiting,
}

#[derive(Debug, Clone)]
struct UeState {
    phase: Phase,
    /// Index of the global model this UE works from.
    version: usize,
    /// Gradient carried by the current iteration.
    grad: Vec<f64>,
    /// 1-based local iteration counter (ledger segment id).
    iteration: u32,
    /// Finish the current upload but drop it on arrival.
    discard_upload: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    ComputeDone,
    Arrival,
}

struct Engine<'a> {
    config: &'a RunConfig,
    task: &'a Task,
    profiles: &'a [UEProfile],
    channel: &'a ChannelParams,
    channel_trace: &'a ChannelTrace,
    bandwidth: &'a BandwidthSource,
    schedule: Option<&'a SchedulingMatrix>,
    participants: usize,
    tcmp: Vec<f64>,
    states: Vec<UeState>,
    rates: Vec<f64>,
    pending: VecDeque<(usize, usize, Vec<f64>)>,
    models: Vec<ModelParams>,
    records: Vec<RoundRecord>,
    flags: Vec<TraceFlag>,
    ledger: PayloadLedger,
    round: usize,
    now: f64,
}

/// Executes a run with the counter-based channel realization derived
/// from the master seed. In semi-synchronous mode the schedule must be
/// provided and satisfy the staleness-window and frequency lower-bound
/// constraints; the population's frequencies must sum to one.
pub fn run(
    config: &RunConfig,
    task: &Task,
    profiles: &[UEProfile],
    channel: &ChannelParams,
    bandwidth: &BandwidthSource,
    schedule: Option<&SchedulingMatrix>,
) -> Result<SimTrace> {
    let trace = ChannelTrace::generate(config.seed, config.rounds, profiles.len(), channel);
    run_with_channel(config, task, profiles, channel, &trace, bandwidth, schedule)
}

/// Executes a run against an explicit channel realization (replay or
/// idealized scenarios).
pub fn run_with_channel(
    config: &RunConfig,
    task: &Task,
    profiles: &[UEProfile],
    channel: &ChannelParams,
    channel_trace: &ChannelTrace,
    bandwidth: &BandwidthSource,
    schedule: Option<&SchedulingMatrix>,
) -> Result<SimTrace> {
    let population = profiles.len();
    if population == 0 || task.population() != population {
        return Err(Error::DimensionMismatch {
            expected: task.population(),
            got: population,
        });
    }
    config.validate(population)?;
    validate_population(profiles)?;
    let participants = config.effective_participants(population);

    if matches!(config.mode, Mode::SemiSync) {
        let sched = schedule.ok_or(Error::InvalidRunConfig(
            "semi-synchronous runs need a schedule",
        ))?;
        if sched.rounds() != config.rounds || sched.population() != population {
            return Err(Error::ShapeMismatch("schedule vs run horizon"));
        }
        if sched.participants_per_round() != participants {
            return Err(Error::InvalidRunConfig(
                "schedule participants differ from run participants",
            ));
        }
        if !crate::scheduling::check_staleness(sched, config.staleness_bound).is_empty() {
            return Err(Error::InvalidRunConfig(
                "schedule violates the staleness windows",
            ));
        }
        let eta: Vec<f64> = profiles.iter().map(|p| p.eta).collect();
        let ok = crate::scheduling::eta_lower_bound_check(
            &eta,
            config.staleness_bound,
            config.rounds,
        );
        if ok.iter().any(|&b| !b) {
            return Err(Error::InvalidRunConfig(
                "a participation frequency is below S / K",
            ));
        }
    }
    if let BandwidthSource::Fixed(plan) = bandwidth {
        if plan.rounds() != config.rounds || plan.population() != population {
            return Err(Error::ShapeMismatch("bandwidth plan vs run horizon"));
        }
    }
    if channel_trace.rounds() < config.rounds || channel_trace.population() != population {
        return Err(Error::ShapeMismatch("channel trace vs run horizon"));
    }

    let mut engine = Engine {
        config,
        task,
        profiles,
        channel,
        channel_trace,
        bandwidth,
        schedule,
        participants,
        tcmp: profiles.iter().map(compute_delay).collect(),
        states: Vec::new(),
        rates: vec![0.0; population],
        pending: VecDeque::new(),
        models: vec![ModelParams::zeros(task.dim())],
        records: Vec::with_capacity(config.rounds),
        flags: Vec::new(),
        ledger: PayloadLedger::new(config.rounds, population, config.payload_units),
        round: 0,
        now: 0.0,
    };
    let initial_states = (0..population)
        .map(|ue| {
            let grad = engine.gradient(ue, 0, 1)?;
            Ok(UeState {
                phase: Phase::Computing { done_at: engine.tcmp[ue] },
                version: 0,
                grad,
                iteration: 1,
                discard_upload: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    engine.states = initial_states;
    engine.refresh_rates()?;
    engine.event_loop()?;

    Ok(SimTrace {
        records: engine.records,
        flags: engine.flags,
        ledger: engine.ledger,
        models: engine.models,
    })
}

/// Synchronous baseline: every round waits for the whole population.
pub fn run_sync(
    config: &RunConfig,
    task: &Task,
    profiles: &[UEProfile],
    channel: &ChannelParams,
    bandwidth: &BandwidthSource,
) -> Result<SimTrace> {
    let mut cfg = config.clone();
    cfg.mode = Mode::Sync;
    cfg.redistribute_stale = false;
    run(&cfg, task, profiles, channel, bandwidth, None)
}

/// Asynchronous baseline: the server updates on every arrival and
/// staleness is tracked but never enforced.
pub fn run_async(
    config: &RunConfig,
    task: &Task,
    profiles: &[UEProfile],
    channel: &ChannelParams,
    bandwidth: &BandwidthSource,
) -> Result<SimTrace> {
    let mut cfg = config.clone();
    cfg.mode = Mode::Async;
    cfg.redistribute_stale = false;
    run(&cfg, task, profiles, channel, bandwidth, None)
}

impl<'a> Engine<'a> {
    /// Gradient of one UE computed from `models[version]` with the
    /// iteration-keyed randomness stream.
    fn gradient(&self, ue: usize, version: usize, iteration: u32) -> Result<Vec<f64>> {
        let w = self.models[version].values();
        let mut rng = stream_rng(
            self.config.seed,
            Domain::GradNoise,
            iteration as u64,
            ue as u64,
        );
        match self.config.objective {
            Objective::Personalized => meta_grad_stochastic(
                self.task,
                ue,
                w,
                self.config.local_lr,
                self.config.batch,
                &mut rng,
            ),
            Objective::Plain => {
                let batch = match self.config.batch {
                    BatchSpec::Full => BatchSize::Full,
                    BatchSpec::Sampled { outer, .. } => BatchSize::Sampled(outer),
                };
                fl_grad(self.task, ue, w, batch, &mut rng)
            }
        }
    }

    fn start_iteration(&mut self, ue: usize, version: usize, at: f64) -> Result<()> {
        let iteration = self.states[ue].iteration + 1;
        let grad = self.gradient(ue, version, iteration)?;
        let state = &mut self.states[ue];
        state.version = version;
        state.iteration = iteration;
        state.grad = grad;
        state.discard_upload = false;
        state.phase = Phase::Computing { done_at: at + self.tcmp[ue] };
        Ok(())
    }

    /// Applies the current round's channel draws and bandwidth shares
    /// and re-rates in-flight uploads.
    fn refresh_rates(&mut self) -> Result<()> {
        let population = self.profiles.len();
        let hs: Vec<f64> = self.channel_trace.row(self.round).to_vec();
        let shares: Vec<f64> = match self.bandwidth {
            BandwidthSource::Policy(policy) => policy.round_shares(
                self.schedule.map(|s| s.row(self.round)),
                self.profiles,
                &hs,
                self.channel,
            )?,
            BandwidthSource::Fixed(plan) => plan.row(self.round).to_vec(),
        };
        if let Some(sched) = self.schedule {
            for ue in 0..population {
                if sched.scheduled(self.round, ue) && !(shares[ue] > 0.0) {
                    return Err(Error::ZeroShare { round: self.round, ue });
                }
            }
        }
        for ue in 0..population {
            self.rates[ue] = if shares[ue] > 0.0 {
                rate_from_snr(shares[ue], snr_hz(&self.profiles[ue], hs[ue], self.channel))
            } else {
                0.0
            };
        }
        Ok(())
    }

    /// Books transmitted units of every in-flight upload into the
    /// current round's ledger row up to time `t`.
    fn settle_transmissions(&mut self, t: f64) {
        for ue in 0..self.states.len() {
            if let Phase::Transmitting { remaining, last_change } = self.states[ue].phase {
                let chunk = (self.rates[ue] * (t - last_change)).min(remaining);
                if chunk > 0.0 {
                    self.ledger.add(self.round, ue, chunk, self.states[ue].iteration);
                }
                self.states[ue].phase = Phase::Transmitting {
                    remaining: remaining - chunk,
                    last_change: t,
                };
            }
        }
    }

    fn next_event(&self) -> Option<(f64, usize, EventKind)> {
        let mut best: Option<(f64, usize, EventKind)> = None;
        for (ue, state) in self.states.iter().enumerate() {
            let candidate = match state.phase {
                Phase::Computing { done_at } => Some((done_at, ue, EventKind::ComputeDone)),
                Phase::Transmitting { remaining, last_change } => {
                    if remaining <= 0.0 {
                        Some((last_change, ue, EventKind::Arrival))
                    } else if self.rates[ue] > 0.0 {
                        Some((
                            last_change + remaining / self.rates[ue],
                            ue,
                            EventKind::Arrival,
                        ))
                    } else {
                        None
                    }
                }
                Phase::Waiting => None,
            };
            if let Some((t, ue, kind)) = candidate {
                let better = match best {
                    None => true,
                    Some((bt, bue, _)) => t < bt || (t == bt && ue < bue),
                };
                if better {
                    best = Some((t, ue, kind));
                }
            }
        }
        best
    }

    fn event_loop(&mut self) -> Result<()> {
        while self.round < self.config.rounds {
            let (t, ue, kind) = self.next_event().ok_or(Error::Deadlock(self.round))?;
            // Internal ordering harness: simulated time never reverses.
            debug_assert!(t >= self.now - 1e-9 * self.now.abs().max(1.0));
            if t < self.now - 1e-6 * self.now.abs().max(1.0) {
                return Err(Error::SolverFailure("event time regression"));
            }
            self.now = t.max(self.now);
            match kind {
                EventKind::ComputeDone => {
                    self.states[ue].phase = Phase::Transmitting {
                        remaining: self.config.payload_units,
                        last_change: t,
                    };
                }
                EventKind::Arrival => self.process_arrival(ue, t)?,
            }
        }
        Ok(())
    }

    fn process_arrival(&mut self, ue: usize, t: f64) -> Result<()> {
        // Book the final chunk exactly, so iteration totals reach the
        // payload with no floating drift.
        let remaining = match self.states[ue].phase {
            Phase::Transmitting { remaining, .. } => remaining,
            _ => unreachable!("arrival from a non-transmitting UE"),
        };
        if remaining > 0.0 {
            self.ledger.add(self.round, ue, remaining, self.states[ue].iteration);
        }
        if self.states[ue].discard_upload {
            // Finish-then-discard redistribution: the upload is dropped
            // and the UE restarts from the newest model.
            let version = self.models.len() - 1;
            self.states[ue].phase = Phase::Waiting;
            return self.start_iteration(ue, version, t);
        }
        self.states[ue].phase = Phase::Waiting;
        self.pending.push_back((ue, self.states[ue].version, self.states[ue].grad.clone()));
        if self.pending.len() >= self.participants {
            self.close_round(t)?;
        }
        Ok(())
    }

    fn close_round(&mut self, t: f64) -> Result<()> {
        let k = self.round;
        self.settle_transmissions(t);

        let mut participants = Vec::with_capacity(self.participants);
        let mut staleness = Vec::with_capacity(self.participants);
        let mut updates = Vec::with_capacity(self.participants);
        for _ in 0..self.participants {
            let (ue, version, grad) = self.pending.pop_front().expect("A pending arrivals");
            let tau = k - version;
            if tau > self.config.staleness_bound {
                self.flags.push(TraceFlag::StalenessExceeded {
                    round: k,
                    ue,
                    staleness: tau,
                    bound: self.config.staleness_bound,
                });
            }
            participants.push(ue);
            staleness.push(tau);
            updates.push(GradientUpdate {
                ue,
                model_version: version,
                grad,
            });
        }

        // Metrics are evaluated at the model in force during round k.
        let w_k = self.models[k].clone();
        let (loss, grad_norm_sq, accuracy) = self.evaluate(&w_k)?;

        let next = crate::learning::global_update(
            &self.models[k],
            &updates,
            self.config.global_lr,
            self.participants,
        )?;
        self.models.push(next);
        let fresh_version = self.models.len() - 1;

        self.records.push(RoundRecord {
            round: k,
            close_time_s: t,
            participants: participants.clone(),
            staleness,
            loss,
            grad_norm_sq,
            accuracy,
        });

        // Distribution: participants always receive the new model;
        // with the semi-synchronous rule, so does any UE whose model
        // aged past the bound (unless its gradient already sits in the
        // server queue).
        for &ue in &participants {
            self.start_iteration(ue, fresh_version, t)?;
        }
        if self.config.redistribute_stale {
            for ue in 0..self.states.len() {
                if participants.contains(&ue) {
                    continue;
                }
                if matches!(self.states[ue].phase, Phase::Waiting) {
                    continue;
                }
                if k - self.states[ue].version > self.config.staleness_bound {
                    if self.config.abandon_on_redistribute {
                        self.flags.push(TraceFlag::IterationAbandoned { round: k, ue });
                        self.start_iteration(ue, fresh_version, t)?;
                    } else {
                        self.states[ue].discard_upload = true;
                    }
                }
            }
        }

        self.round += 1;
        if self.round < self.config.rounds {
            self.refresh_rates()?;
        }
        Ok(())
    }

    fn evaluate(&self, w: &ModelParams) -> Result<(f64, f64, Option<f64>)> {
        let values = w.values();
        let (loss, grad) = match self.config.objective {
            Objective::Personalized => (
                meta_objective_value(self.task, values, self.config.local_lr)?,
                meta_objective_grad(self.task, values, self.config.local_lr)?,
            ),
            Objective::Plain => (
                plain_objective_value(self.task, values)?,
                plain_objective_grad(self.task, values)?,
            ),
        };
        let grad_norm_sq = grad.iter().map(|g| g * g).sum();
        let accuracy = match self.task {
            Task::Classification(_) => Some(match self.config.objective {
                Objective::Personalized => {
                    post_adaptation_accuracy(self.task, values, self.config.local_lr)?
                }
                Objective::Plain => plain_accuracy(self.task, values)?,
            }),
            Task::Quadratic(_) => None,
        };
        Ok((loss, grad_norm_sq, accuracy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{QuadraticSpec, QuadraticTask};
    use crate::scheduling::greedy_schedule;

    fn channel() -> ChannelParams {
        ChannelParams::from_dbm(1e6, 3.8, -174.0, 40.0).unwrap()
    }

    fn profiles(n: usize, cpu_hz: &[f64]) -> Vec<UEProfile> {
        (0..n)
            .map(|i| {
                UEProfile::new(
                    i,
                    0.01,
                    100.0,
                    1e4,
                    cpu_hz[i % cpu_hz.len()],
                    100,
                    1.0 / n as f64,
                )
                .unwrap()
            })
            .collect()
    }

    fn quad_task(n: usize) -> Task {
        Task::Quadratic(
            QuadraticTask::generate(
                n,
                &QuadraticSpec {
                    dim: 4,
                    eig_range: (0.4, 1.0),
                    center_spread: 0.5,
                    ..QuadraticSpec::default()
                },
                17,
            )
            .unwrap(),
        )
    }

    fn base_config(mode: Mode, a: usize, k: usize) -> RunConfig {
        RunConfig {
            mode,
            objective: Objective::Personalized,
            participants: a,
            staleness_bound: 4,
            rounds: k,
            local_lr: 0.1,
            global_lr: 0.2,
            batch: BatchSpec::Full,
            payload_units: 1e4,
            seed: 7,
            redistribute_stale: matches!(mode, Mode::SemiSync),
            abandon_on_redistribute: true,
            fosp_epsilon: 1e-3,
        }
    }

    /// Fixed plan giving every UE a constant rate; with the profile's
    /// parameters the uplink time is payload / rate.
    fn uniform_plan(k: usize, n: usize) -> BandwidthSource {
        let share = 1e6 / n as f64;
        BandwidthSource::Fixed(
            BandwidthPlan::from_shares(
                k,
                n,
                vec![share; k * n],
                crate::bandwidth::PolicyTag::Custom,
            )
            .unwrap(),
        )
    }

    #[test]
    fn single_ue_modes_agree() {
        let task = quad_task(1);
        let ues = profiles(1, &[1e9]);
        let ch = channel();
        let cfg = base_config(Mode::SemiSync, 1, 6);
        let sched = greedy_schedule(&[1.0], 1, 6, 4).unwrap();
        let semi = run(
            &cfg,
            &task,
            &ues,
            &ch,
            &BandwidthSource::Policy(BandwidthPolicy::AllShareExtreme),
            Some(&sched),
        )
        .unwrap();
        let sync = run_sync(
            &cfg,
            &task,
            &ues,
            &ch,
            &BandwidthSource::Policy(BandwidthPolicy::AllShareExtreme),
        )
        .unwrap();
        let asy = run_async(
            &cfg,
            &task,
            &ues,
            &ch,
            &BandwidthSource::Policy(BandwidthPolicy::AllShareExtreme),
        )
        .unwrap();
        assert_eq!(semi.records, sync.records);
        assert_eq!(semi.records, asy.records);
        assert_eq!(semi.models, sync.models);
    }

    #[test]
    fn hand_trace_two_ues_async_order() {
        // Compute delays 0.5 s and 2.5 s with sub-millisecond uplinks:
        // the fast UE closes the early rounds and the slow UE's first
        // aggregated update carries staleness >= 2.
        let task = quad_task(2);
        let mut ues = profiles(2, &[1e9]);
        ues[0].cpu_hz = 1e4 * 100.0 / 0.5;
        ues[1].cpu_hz = 1e4 * 100.0 / 2.5;
        let cfg = base_config(Mode::Async, 1, 6);
        let trace =
            super::run_async(&cfg, &task, &ues, &channel(), &uniform_plan(6, 2)).unwrap();
        assert_eq!(trace.records[0].participants, vec![0]);
        let slow_round = trace
            .records
            .iter()
            .find(|r| r.participants == vec![1])
            .expect("slow UE closes a round");
        assert!(slow_round.max_staleness() >= 2, "{slow_round:?}");
        for pair in trace.records.windows(2) {
            assert!(pair[1].close_time_s >= pair[0].close_time_s);
        }
    }

    #[test]
    fn async_equal_delays_round_robin() {
        // Identical UEs over a flat channel realization have exactly
        // equal delays: whole waves arrive simultaneously, ties break
        // by index, rounds close in index order, and steady-state
        // staleness is n - 1 for each update.
        let n = 4;
        let k = 12;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9]);
        let ch = channel();
        let flat = crate::wireless::ChannelTrace::constant(k, n, 40.0);
        let mut cfg = base_config(Mode::Async, 1, k);
        cfg.redistribute_stale = false;
        let trace = super::run_with_channel(
            &cfg,
            &task,
            &ues,
            &ch,
            &flat,
            &BandwidthSource::Policy(BandwidthPolicy::AllShareExtreme),
            None,
        )
        .unwrap();
        for (idx, rec) in trace.records.iter().enumerate() {
            assert_eq!(rec.participants, vec![idx % n], "round {idx}");
        }
        // After the first wave, every update has staleness n - 1.
        for rec in trace.records.iter().skip(n) {
            assert_eq!(rec.staleness, vec![n - 1], "round {}", rec.round);
        }
    }

    #[test]
    fn semi_sync_period_two_fixture() {
        // n = 4, A = 2, identical UEs, the period-2 schedule: every UE
        // participates in exactly half the rounds.
        let n = 4;
        let k = 8;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9]);
        let sched = greedy_schedule(&[0.25; 4], 2, k, 2).unwrap();
        let mut cfg = base_config(Mode::SemiSync, 2, k);
        cfg.staleness_bound = 2;
        let trace = run(
            &cfg,
            &task,
            &ues,
            &channel(),
            &BandwidthSource::Policy(BandwidthPolicy::ActiveExtreme),
            Some(&sched),
        )
        .unwrap();
        let mut counts = [0usize; 4];
        for rec in &trace.records {
            assert_eq!(rec.participants.len(), 2);
            for &ue in &rec.participants {
                counts[ue] += 1;
            }
        }
        assert_eq!(counts, [4, 4, 4, 4]);
        assert!(trace.max_staleness() <= 2, "max {}", trace.max_staleness());
        assert!(trace.flags.is_empty(), "{:?}", trace.flags);
        // Participant sets match the schedule rows.
        for (kk, rec) in trace.records.iter().enumerate() {
            let mut expect = sched.scheduled_set(kk);
            let mut got = rec.participants.clone();
            expect.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expect, "round {kk}");
        }
    }

    #[test]
    fn round_cardinality_always_a() {
        let n = 6;
        let k = 12;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9, 5e8, 2.5e8]);
        let sched = greedy_schedule(&[1.0 / 6.0; 6], 3, k, 2).unwrap();
        let mut cfg = base_config(Mode::SemiSync, 3, k);
        cfg.staleness_bound = 2;
        let trace = run(
            &cfg,
            &task,
            &ues,
            &channel(),
            &BandwidthSource::Policy(BandwidthPolicy::ActiveExtreme),
            Some(&sched),
        )
        .unwrap();
        assert_eq!(trace.records.len(), k);
        for rec in &trace.records {
            assert_eq!(rec.participants.len(), 3);
        }
    }

    #[test]
    fn sync_round_time_tracks_slowest() {
        // Compute heterogeneity 10:1 with n = 2: the first close time
        // equals the slow UE's compute delay plus its upload time.
        let n = 2;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9, 1e8]);
        let cfg = base_config(Mode::Sync, n, 3);
        let trace = super::run_sync(
            &cfg,
            &task,
            &ues,
            &channel(),
            &uniform_plan(3, n),
        )
        .unwrap();
        let slow_cmp = compute_delay(&ues[1]);
        assert!(trace.records[0].close_time_s >= slow_cmp);
        // No staleness in synchronous training.
        assert_eq!(trace.max_staleness(), 0);
        // Constant per-round duration under a deterministic plan and
        // constant channel draws? Channel redraws per round, but the
        // uniform plan keeps shares constant; durations still vary with
        // h. Close times must strictly increase here (no ties).
        for pair in trace.records.windows(2) {
            assert!(pair[1].close_time_s > pair[0].close_time_s);
        }
    }

    #[test]
    fn trace_is_bit_identical_across_runs() {
        let n = 4;
        let k = 8;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9, 6e8]);
        let sched = greedy_schedule(&[0.25; 4], 2, k, 2).unwrap();
        let mut cfg = base_config(Mode::SemiSync, 2, k);
        cfg.staleness_bound = 2;
        cfg.batch = BatchSpec::Sampled { inner: 2, outer: 2, hessian: 2 };
        let source = BandwidthSource::Policy(BandwidthPolicy::ActiveExtreme);
        let a = run(&cfg, &task, &ues, &channel(), &source, Some(&sched)).unwrap();
        let b = run(&cfg, &task, &ues, &channel(), &source, Some(&sched)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ledger_iterations_complete_exactly() {
        let n = 4;
        let k = 8;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9]);
        let sched = greedy_schedule(&[0.25; 4], 2, k, 2).unwrap();
        let mut cfg = base_config(Mode::SemiSync, 2, k);
        cfg.staleness_bound = 2;
        let trace = run(
            &cfg,
            &task,
            &ues,
            &channel(),
            &BandwidthSource::Policy(BandwidthPolicy::ActiveExtreme),
            Some(&sched),
        )
        .unwrap();
        for (ue, iteration, units) in trace.ledger.iteration_totals() {
            assert!(
                units <= cfg.payload_units * (1.0 + 1e-12),
                "ue {ue} iteration {iteration} transported {units}"
            );
        }
        // Completed uploads hit the payload exactly: every aggregated
        // participant completed its iteration's transfer.
        let totals = trace.ledger.iteration_totals();
        let complete = totals
            .iter()
            .filter(|(_, _, u)| (u - cfg.payload_units).abs() <= 1e-9)
            .count();
        assert!(complete >= trace.records.len() * 2 - n, "complete {complete}");
    }

    #[test]
    fn semi_sync_equals_sync_at_full_participation() {
        let n = 3;
        let k = 5;
        let task = quad_task(n);
        let ues = profiles(n, &[1e9, 8e8]);
        let sched = greedy_schedule(&[1.0 / 3.0; 3], 3, k, 1).unwrap();
        let mut cfg = base_config(Mode::SemiSync, 3, k);
        cfg.staleness_bound = 1;
        cfg.redistribute_stale = false;
        let source = uniform_plan(k, n);
        let semi = run(&cfg, &task, &ues, &channel(), &source, Some(&sched)).unwrap();
        let sync = super::run_sync(&cfg, &task, &ues, &channel(), &source).unwrap();
        assert_eq!(semi.records, sync.records);
        assert_eq!(semi.models, sync.models);
    }

    #[test]
    fn empty_trace_total_time_is_zero() {
        let trace = SimTrace {
            records: Vec::new(),
            flags: Vec::new(),
            ledger: PayloadLedger::new(0, 1, 1.0),
            models: vec![ModelParams::zeros(2)],
        };
        assert_eq!(total_time(&trace), 0.0);
    }

    #[test]
    fn total_time_is_last_close() {
        let task = quad_task(2);
        let ues = profiles(2, &[1e9]);
        let cfg = base_config(Mode::Sync, 2, 2);
        let trace = super::run_sync(&cfg, &task, &ues, &channel(), &uniform_plan(2, 2)).unwrap();
        assert_eq!(total_time(&trace), trace.records[1].close_time_s);
    }
}
