//! Convergence-bound calculus: smoothness and variance constants of the
//! personalized objective, the stationarity bound, the step-size
//! condition and the horizon estimators used to size runs.

use num_traits::Float;

use crate::error::{Error, Result};

/// Problem constants feeding the convergence bound.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceConstants {
    /// Gradient Lipschitz constant of the per-UE losses (L).
    pub grad_lipschitz: f64,
    /// Uniform gradient norm bound (C), possibly a trajectory surrogate.
    pub grad_bound: f64,
    /// Hessian Lipschitz constant (rho).
    pub hessian_lipschitz: f64,
    /// Per-sample gradient noise level (sigma_G).
    pub grad_noise_sd: f64,
    /// Per-sample Hessian noise level (sigma_H).
    pub hessian_noise_sd: f64,
    /// Inter-UE gradient diversity (gamma_G).
    pub grad_diversity: f64,
    /// Inter-UE Hessian diversity (gamma_H).
    pub hessian_diversity: f64,
    /// Local adaptation step size (alpha).
    pub local_lr: f64,
    /// Global aggregation step size (beta).
    pub global_lr: f64,
    /// Staleness bound S.
    pub staleness_bound: usize,
    /// Participants aggregated per round A.
    pub participants: usize,
    /// Planned communication rounds K.
    pub rounds: usize,
    /// Inner-adaptation batch size.
    pub batch_inner: usize,
    /// Outer-gradient batch size.
    pub batch_outer: usize,
    /// Hessian-estimate batch size.
    pub batch_hessian: usize,
    /// Initial optimality gap F(w0) - F(w*).
    pub initial_gap: f64,
}

impl ConvergenceConstants {
    /// Validates non-negativity and batch-size invariants.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("grad_lipschitz", self.grad_lipschitz),
            ("grad_bound", self.grad_bound),
            ("hessian_lipschitz", self.hessian_lipschitz),
            ("grad_noise_sd", self.grad_noise_sd),
            ("hessian_noise_sd", self.hessian_noise_sd),
            ("grad_diversity", self.grad_diversity),
            ("hessian_diversity", self.hessian_diversity),
            ("local_lr", self.local_lr),
            ("global_lr", self.global_lr),
            ("initial_gap", self.initial_gap),
        ];
        for (name, value) in named {
            if !(value >= 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if self.grad_lipschitz > 0.0 && self.local_lr > 1.0 / self.grad_lipschitz {
            return Err(Error::InvalidParameter {
                name: "local_lr",
                value: self.local_lr,
            });
        }
        for (name, value) in [
            ("batch_inner", self.batch_inner),
            ("batch_outer", self.batch_outer),
            ("batch_hessian", self.batch_hessian),
        ] {
            if value < 1 {
                return Err(Error::InvalidParameter { name, value: value as f64 });
            }
        }
        Ok(())
    }
}

/// Smoothness constant of the personalized objective:
/// `L_F = 4 L + alpha rho C`.
pub fn meta_smoothness(c: &ConvergenceConstants) -> f64 {
    4.0 * c.grad_lipschitz + c.local_lr * c.hessian_lipschitz * c.grad_bound
}

/// Variance proxy of the stochastic meta-gradient:
/// `12 [C^2 + sigma_G^2 (1/D_o + (alpha L)^2 / D_in)]
///     [1 + sigma_H^2 alpha^2 / (4 D_h)] - 12 C^2`.
pub fn meta_grad_variance(c: &ConvergenceConstants) -> f64 {
    let c2 = c.grad_bound * c.grad_bound;
    let al = c.local_lr * c.grad_lipschitz;
    let inner = c2
        + c.grad_noise_sd * c.grad_noise_sd
            * (1.0 / c.batch_outer as f64 + al * al / c.batch_inner as f64);
    let hess = 1.0
        + c.hessian_noise_sd * c.hessian_noise_sd * c.local_lr * c.local_lr
            / (4.0 * c.batch_hessian as f64);
    12.0 * inner * hess - 12.0 * c2
}

/// Diversity proxy of the per-UE meta-gradients:
/// `3 C^2 alpha^2 gamma_H^2 + 192 gamma_G^2`.
pub fn meta_grad_diversity(c: &ConvergenceConstants) -> f64 {
    3.0 * c.grad_bound * c.grad_bound * c.local_lr * c.local_lr
        * c.hessian_diversity * c.hessian_diversity
        + 192.0 * c.grad_diversity * c.grad_diversity
}

/// Left-hand side of the step-size condition
/// `L_F beta^2 - beta + 2 L_F^2 beta^2 S^2 <= 1`.
pub fn step_condition_lhs(c: &ConvergenceConstants) -> f64 {
    let lf = meta_smoothness(c);
    let beta = c.global_lr;
    let s = c.staleness_bound as f64;
    lf * beta * beta - beta + 2.0 * lf * lf * beta * beta * s * s
}

/// Whether the step-size condition holds.
pub fn step_condition(c: &ConvergenceConstants) -> bool {
    step_condition_lhs(c) <= 1.0
}

/// Upper bound on the average squared gradient norm after K rounds:
/// `2 (F(w0) - F(w*)) / (beta K)
///  + 4 (L_F beta + 2 L_F^2 beta^2 S^2)(sigma_F^2 + gamma_F^2) sqrt(A)`.
///
/// Requires the step-size condition; callers holding weaker steps get a
/// precondition error rather than a meaningless number.
pub fn stationarity_bound(c: &ConvergenceConstants) -> Result<f64> {
    let lhs = step_condition_lhs(c);
    if lhs > 1.0 {
        return Err(Error::StepCondition(lhs));
    }
    let lf = meta_smoothness(c);
    let beta = c.global_lr;
    let s = c.staleness_bound as f64;
    let first = 2.0 * c.initial_gap / (beta * c.rounds as f64);
    let prefactor = 4.0 * (lf * beta + 2.0 * lf * lf * beta * beta * s * s);
    let noise = meta_grad_variance(c) + meta_grad_diversity(c);
    Ok(first + prefactor * noise * Float::sqrt(c.participants as f64))
}

/// Estimated horizon: rounds and participants per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunSize {
    /// Estimated number of communication rounds K*.
    pub rounds: usize,
    /// Estimated participants per round A*.
    pub participants: usize,
}

/// Sizes a run for target accuracy `epsilon`:
/// `K* = ceil(min(2 gap / (beta eps), S / eta_min))` and
/// `A* = round(min(eps^2 / (16 (L_F beta + 2 L_F^2 beta^2 S^2)^2
///                 (sigma_F^2 + gamma_F^2)^2), 1 / (eta_min S)))`,
/// both at least 1. Callers cap A* at the population size.
pub fn estimate_run_size(
    c: &ConvergenceConstants,
    epsilon: f64,
    eta_min: f64,
) -> Result<RunSize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
    }
    if !(eta_min > 0.0) {
        return Err(Error::InvalidParameter { name: "eta_min", value: eta_min });
    }
    if !(c.global_lr > 0.0) {
        return Err(Error::DegenerateConfiguration("global_lr must be positive"));
    }
    let s = c.staleness_bound as f64;
    if !(s > 0.0) {
        return Err(Error::DegenerateConfiguration("staleness bound must be positive"));
    }
    let k_accuracy = 2.0 * c.initial_gap / (c.global_lr * epsilon);
    let k_staleness = s / eta_min;
    let k = Float::ceil(k_accuracy.min(k_staleness)).max(1.0);

    let lf = meta_smoothness(c);
    let prefactor = lf * c.global_lr
        + 2.0 * lf * lf * c.global_lr * c.global_lr * s * s;
    let noise = meta_grad_variance(c) + meta_grad_diversity(c);
    if prefactor * noise == 0.0 {
        return Err(Error::DegenerateConfiguration(
            "noise and smoothness terms vanish; participant estimate divides by zero",
        ));
    }
    let a_accuracy = epsilon * epsilon / (16.0 * prefactor * prefactor * noise * noise);
    let a_staleness = 1.0 / (eta_min * s);
    let a = Float::round(a_accuracy.min(a_staleness)).max(1.0);
    Ok(RunSize {
        rounds: k as usize,
        participants: a as usize,
    })
}

/// First-order stationarity test: average squared gradient norm within
/// `epsilon` (closed inequality).
pub fn fosp_satisfied(avg_sq_grad_norm: f64, epsilon: f64) -> bool {
    avg_sq_grad_norm <= epsilon
}
