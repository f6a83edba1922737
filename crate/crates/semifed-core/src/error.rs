//! Shared error type for the core library.

/// Errors raised by construction, solvers and the simulation engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar parameter violates its domain (named for diagnostics).
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Matrix shapes disagree between related structures.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// Argument outside the domain of the requested Lambert-W branch.
    #[error("argument {value} outside the {branch} Lambert-W branch domain")]
    LambertDomain { branch: &'static str, value: f64 },
    /// The Lambert-W expression sits at its branch point and the
    /// enclosing formula degenerates (denominator within 1e-12 of zero).
    #[error("degenerate Lambert-W branch point: denominator factor {0} vanishes")]
    DegenerateBranch(f64),
    /// A timing budget does not leave room for computation.
    #[error("infeasible timing: budget {total_s} s does not exceed compute delay {compute_s} s")]
    InfeasibleTime { total_s: f64, compute_s: f64 },
    /// A bandwidth round has no scheduled participant.
    #[error("no scheduled participant in round {0}")]
    EmptySchedule(usize),
    /// More participants per round than UEs.
    #[error("participants per round ({participants}) exceeds population size ({population})")]
    TooManyParticipants { participants: usize, population: usize },
    /// Relative participation frequencies do not sum to one.
    #[error("participation frequencies sum to {0}, expected 1")]
    EtaSum(f64),
    /// Empty batch where at least one sample is required.
    #[error("empty batch for `{0}`")]
    EmptyBatch(&'static str),
    /// Aggregation received the wrong number of updates.
    #[error("protocol violation: expected {expected} updates, got {got}")]
    UpdateCount { expected: usize, got: usize },
    /// A configuration produces a division by zero in an estimator.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    /// The task family does not support the requested operation.
    #[error("unsupported task kind for `{0}`")]
    UnsupportedTask(&'static str),
    /// A linear system arising from a task is singular.
    #[error("degenerate task: {0}")]
    DegenerateTask(&'static str),
    /// Numerical solver failed to bracket or converge.
    #[error("solver failure: {0}")]
    SolverFailure(&'static str),
    /// The step-size condition required by the convergence bound fails.
    #[error("step-size condition violated (lhs {0} > 1)")]
    StepCondition(f64),
    /// Run configuration is inconsistent with the requested mode.
    #[error("invalid run configuration: {0}")]
    InvalidRunConfig(&'static str),
    /// A scheduled UE was assigned zero bandwidth.
    #[error("infeasible bandwidth: scheduled UE {ue} has zero share in round {round}")]
    ZeroShare { round: usize, ue: usize },
    /// No event can fire: every UE is paused without bandwidth.
    #[error("simulation deadlocked in round {0}: no UE can make progress")]
    Deadlock(usize),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
