//! Synthetic task families and the personalized-learning math: exact
//! and stochastic one-step meta-gradients, plain gradients for the
//! conventional baseline, and global aggregation.
//!
//! Both task kinds expose loss/gradient/Hessian-vector primitives; the
//! meta-gradient `(I - alpha H(w)) g(w - alpha g(w))` is assembled on
//! top of them, with the Hessian always applied as a product and never
//! materialized.

mod quadratic;
mod softmax;

pub use quadratic::{QuadraticSpec, QuadraticTask, QuadraticUe};
pub use softmax::{make_noniid_partition, ClassificationSpec, ClassificationTask, UeDataset};

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Flat model parameter vector shared by server and UEs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    values: Vec<f64>,
}

impl ModelParams {
    /// Wraps a parameter vector, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "model entry",
                value: f64::NAN,
            });
        }
        Ok(Self { values })
    }

    /// All-zero model of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    /// Model dimension m.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Raw parameter slice.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean distance to another model.
    pub fn distance(&self, other: &ModelParams) -> f64 {
        norm(&sub(&self.values, &other.values))
    }
}

/// Batch sizes for the three independent samples of the stochastic
/// meta-gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BatchSpec {
    /// Use the whole dataset (noiseless for the quadratic family).
    Full,
    /// Independent batches for the inner adaptation step, the outer
    /// gradient and the Hessian estimate.
    Sampled {
        /// Inner-adaptation batch size.
        inner: usize,
        /// Outer-gradient batch size.
        outer: usize,
        /// Hessian-estimate batch size.
        hessian: usize,
    },
}

impl BatchSpec {
    /// Validates that sampled batches are non-empty.
    pub fn validate(&self) -> Result<()> {
        if let BatchSpec::Sampled { inner, outer, hessian } = *self {
            if inner == 0 || outer == 0 || hessian == 0 {
                return Err(Error::EmptyBatch("meta-gradient batch"));
            }
        }
        Ok(())
    }
}

/// Batch size of the plain (non-personalized) gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// Use the whole dataset.
    Full,
    /// Sample this many points.
    Sampled(usize),
}

/// One uploaded gradient with its model-version stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientUpdate {
    /// Uploading UE.
    pub ue: usize,
    /// Index of the global model the gradient was computed from.
    pub model_version: usize,
    /// Gradient vector.
    pub grad: Vec<f64>,
}

/// A synthetic task instance held by the whole population.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    /// Per-UE quadratics with configurable curvature and centers.
    Quadratic(QuadraticTask),
    /// Label-skewed linear softmax classification.
    Classification(ClassificationTask),
}

impl Task {
    /// Number of UEs holding data.
    pub fn population(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.population(),
            Task::Classification(t) => t.population(),
        }
    }

    /// Model dimension m.
    pub fn dim(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.dim(),
            Task::Classification(t) => t.dim(),
        }
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    num_traits::Float::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

/// Local loss of one UE: exact for quadratics, empirical mean over the
/// UE's dataset for classification.
pub fn local_loss(task: &Task, ue: usize, w: &[f64]) -> Result<f64> {
    task.check_dim(w)?;
    match task {
        Task::Quadratic(t) => Ok(t.loss(ue, w)),
        Task::Classification(t) => Ok(t.loss_full(ue, w)),
    }
}

/// Exact local gradient of one UE.
pub fn local_grad_exact(task: &Task, ue: usize, w: &[f64]) -> Result<Vec<f64>> {
    task.check_dim(w)?;
    match task {
        Task::Quadratic(t) => Ok(t.grad(ue, w)),
        Task::Classification(t) => Ok(t.grad_full(ue, w)),
    }
}

fn exact_hvp(task: &Task, ue: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
    match task {
        Task::Quadratic(t) => t.hessian_vec(ue, v),
        Task::Classification(t) => t.hvp_full(ue, w, v),
    }
}

/// Personalized loss: the local loss after one exact adaptation step,
/// `f_i(w - alpha grad f_i(w))`.
pub fn meta_loss_exact(task: &Task, ue: usize, w: &[f64], alpha: f64) -> Result<f64> {
    task.check_dim(w)?;
    let mut adapted = w.to_vec();
    let g = local_grad_exact(task, ue, w)?;
    axpy(&mut adapted, -alpha, &g);
    local_loss(task, ue, &adapted)
}

/// Exact meta-gradient `(I - alpha H_i(w)) grad f_i(w - alpha grad f_i(w))`.
pub fn meta_grad_exact(task: &Task, ue: usize, w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    task.check_dim(w)?;
    let g1 = local_grad_exact(task, ue, w)?;
    let mut adapted = w.to_vec();
    axpy(&mut adapted, -alpha, &g1);
    let g2 = local_grad_exact(task, ue, &adapted)?;
    let hv = exact_hvp(task, ue, w, &g2);
    let mut out = g2;
    axpy(&mut out, -alpha, &hv);
    Ok(out)
}

/// Stochastic meta-gradient with three independently sampled batches.
/// With `BatchSpec::Full` it degenerates to the exact meta-gradient.
pub fn meta_grad_stochastic(
    task: &Task,
    ue: usize,
    w: &[f64],
    alpha: f64,
    batches: BatchSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    task.check_dim(w)?;
    batches.validate()?;
    let (inner, outer, hessian) = match batches {
        BatchSpec::Full => return meta_grad_exact(task, ue, w, alpha),
        BatchSpec::Sampled { inner, outer, hessian } => (inner, outer, hessian),
    };
    match task {
        Task::Quadratic(t) => {
            let g1 = t.grad_noisy(ue, w, inner, rng);
            let mut adapted = w.to_vec();
            axpy(&mut adapted, -alpha, &g1);
            let g2 = t.grad_noisy(ue, &adapted, outer, rng);
            let hv = t.hessian_vec_noisy(ue, &g2, hessian, rng);
            let mut out = g2.clone();
            axpy(&mut out, -alpha, &hv);
            Ok(out)
        }
        Task::Classification(t) => {
            let b_in = t.sample_batch(ue, inner, rng);
            let g1 = t.grad_batch(ue, w, &b_in);
            let mut adapted = w.to_vec();
            axpy(&mut adapted, -alpha, &g1);
            let b_out = t.sample_batch(ue, outer, rng);
            let g2 = t.grad_batch(ue, &adapted, &b_out);
            let b_h = t.sample_batch(ue, hessian, rng);
            let hv = t.hvp_batch(ue, w, &g2, &b_h);
            let mut out = g2.clone();
            axpy(&mut out, -alpha, &hv);
            Ok(out)
        }
    }
}

/// Stochastic gradient of the plain local loss (conventional federated
/// baseline).
pub fn fl_grad(
    task: &Task,
    ue: usize,
    w: &[f64],
    batch: BatchSize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    task.check_dim(w)?;
    let size = match batch {
        BatchSize::Full => return local_grad_exact(task, ue, w),
        BatchSize::Sampled(0) => return Err(Error::EmptyBatch("plain gradient batch")),
        BatchSize::Sampled(d) => d,
    };
    match task {
        Task::Quadratic(t) => Ok(t.grad_noisy(ue, w, size, rng)),
        Task::Classification(t) => {
            let batch = t.sample_batch(ue, size, rng);
            Ok(t.grad_batch(ue, w, &batch))
        }
    }
}

/// Server-side aggregation: `w - (beta / A) sum_i grad_i`.
pub fn global_update(
    w: &ModelParams,
    updates: &[GradientUpdate],
    beta: f64,
    participants: usize,
) -> Result<ModelParams> {
    if updates.len() != participants {
        return Err(Error::UpdateCount {
            expected: participants,
            got: updates.len(),
        });
    }
    let mut next = w.values.clone();
    let scale = -beta / participants as f64;
    for update in updates {
        if update.grad.len() != next.len() {
            return Err(Error::DimensionMismatch {
                expected: next.len(),
                got: update.grad.len(),
            });
        }
        axpy(&mut next, scale, &update.grad);
    }
    ModelParams::new(next)
}

/// Mean personalized loss over the population.
pub fn meta_objective_value(task: &Task, w: &[f64], alpha: f64) -> Result<f64> {
    let n = task.population();
    let mut total = 0.0;
    for ue in 0..n {
        total += meta_loss_exact(task, ue, w, alpha)?;
    }
    Ok(total / n as f64)
}

/// Gradient of the mean personalized loss.
pub fn meta_objective_grad(task: &Task, w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = task.population();
    let mut total = vec![0.0; task.dim()];
    for ue in 0..n {
        let g = meta_grad_exact(task, ue, w, alpha)?;
        axpy(&mut total, 1.0 / n as f64, &g);
    }
    Ok(total)
}

/// Mean plain loss over the population.
pub fn plain_objective_value(task: &Task, w: &[f64]) -> Result<f64> {
    let n = task.population();
    let mut total = 0.0;
    for ue in 0..n {
        total += local_loss(task, ue, w)?;
    }
    Ok(total / n as f64)
}

/// Gradient of the mean plain loss.
pub fn plain_objective_grad(task: &Task, w: &[f64]) -> Result<Vec<f64>> {
    let n = task.population();
    let mut total = vec![0.0; task.dim()];
    for ue in 0..n {
        let g = local_grad_exact(task, ue, w)?;
        axpy(&mut total, 1.0 / n as f64, &g);
    }
    Ok(total)
}

/// Exact minimizer of the personalized objective for the quadratic
/// family, solved from the normal equations of the adapted quadratic.
/// Returns the minimizer and the objective value there.
pub fn meta_objective_minimizer(task: &Task, alpha: f64) -> Result<(ModelParams, f64)> {
    match task {
        Task::Quadratic(t) => {
            let w = t.meta_minimizer(alpha)?;
            let model = ModelParams::new(w.clone())?;
            let value = meta_objective_value(task, &w, alpha)?;
            Ok((model, value))
        }
        Task::Classification(_) => Err(Error::UnsupportedTask("meta_objective_minimizer")),
    }
}

/// Held-out accuracy of the raw model (classification only).
pub fn plain_accuracy(task: &Task, w: &[f64]) -> Result<f64> {
    match task {
        Task::Classification(t) => Ok(t.heldout_accuracy(w)),
        Task::Quadratic(_) => Err(Error::UnsupportedTask("plain_accuracy")),
    }
}

/// Held-out accuracy after one per-UE adaptation step on the UE's own
/// training data (the personalization metric).
pub fn post_adaptation_accuracy(task: &Task, w: &[f64], alpha: f64) -> Result<f64> {
    match task {
        Task::Classification(t) => {
            let n = t.population();
            let mut total = 0.0;
            for ue in 0..n {
                let g = t.grad_full(ue, w);
                let mut adapted = w.to_vec();
                axpy(&mut adapted, -alpha, &g);
                total += t.heldout_accuracy_for(ue, &adapted);
            }
            Ok(total / n as f64)
        }
        Task::Quadratic(_) => Err(Error::UnsupportedTask("post_adaptation_accuracy")),
    }
}

/// Serializable snapshot for exact run reproduction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TaskSnapshot {
    /// Quadratic family stored as per-UE eigendecompositions.
    Quadratic {
        /// Model dimension.
        dim: usize,
        /// Gradient noise level.
        grad_noise_sd: f64,
        /// Hessian noise level.
        hessian_noise_sd: f64,
        /// Per-UE eigenvalues, row-major eigenvector basis and center.
        ues: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    },
    /// Classification family stored as raw dataset arrays.
    Classification {
        /// Number of classes.
        classes: usize,
        /// Feature dimension (without bias).
        features: usize,
        /// Per-class mean vectors.
        class_means: Vec<Vec<f64>>,
        /// Labels each UE holds.
        labels_per_ue: usize,
        /// Per-UE train/held-out arrays.
        ues: Vec<UeDataset>,
    },
}

impl Task {
    /// Captures the task for serialization.
    pub fn snapshot(&self) -> TaskSnapshot {
        match self {
            Task::Quadratic(t) => t.snapshot(),
            Task::Classification(t) => t.snapshot(),
        }
    }

    /// Rebuilds a task from a snapshot.
    pub fn from_snapshot(snapshot: &TaskSnapshot) -> Result<Task> {
        match snapshot {
            TaskSnapshot::Quadratic { .. } => {
                Ok(Task::Quadratic(QuadraticTask::from_snapshot(snapshot)?))
            }
            TaskSnapshot::Classification { .. } => {
                Ok(Task::Classification(ClassificationTask::from_snapshot(snapshot)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Domain};

    fn quad_task() -> Task {
        let spec = QuadraticSpec {
            dim: 4,
            eig_range: (0.3, 1.0),
            center_spread: 1.0,
            grad_noise_sd: 0.0,
            hessian_noise_sd: 0.0,
            shared_curvature: false,
        };
        Task::Quadratic(QuadraticTask::generate(3, &spec, 42).unwrap())
    }

    #[test]
    fn loss_vanishes_at_center() {
        let task = quad_task();
        if let Task::Quadratic(t) = &task {
            let center = t.center(1).to_vec();
            assert!(local_loss(&task, 1, &center).unwrap().abs() < 1e-18);
            // Any alpha keeps the minimizer fixed.
            assert!(meta_loss_exact(&task, 1, &center, 0.7).unwrap().abs() < 1e-18);
        }
    }

    #[test]
    fn scalar_quadratic_examples() {
        // m=1, curvature 2, center 0, w=1: loss = 1.
        let t = QuadraticTask::from_parts(
            1,
            alloc::vec![(alloc::vec![2.0], alloc::vec![1.0], alloc::vec![0.0])],
            0.0,
            0.0,
        )
        .unwrap();
        let task = Task::Quadratic(t);
        assert!((local_loss(&task, 0, &[1.0]).unwrap() - 1.0).abs() < 1e-15);

        // m=1, curvature 1, center 0, w=2, alpha=0.5:
        // adapted point = 2 - 0.5*2 = 1, meta loss = 0.5,
        // meta grad = (1 - 0.5) * 1 * 1 = 0.5.
        let t = QuadraticTask::from_parts(
            1,
            alloc::vec![(alloc::vec![1.0], alloc::vec![1.0], alloc::vec![0.0])],
            0.0,
            0.0,
        )
        .unwrap();
        let task = Task::Quadratic(t);
        assert!((meta_loss_exact(&task, 0, &[2.0], 0.5).unwrap() - 0.5).abs() < 1e-15);
        let g = meta_grad_exact(&task, 0, &[2.0], 0.5).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_collapses_meta_ops() {
        let task = quad_task();
        let w = [0.3, -0.2, 0.9, 0.1];
        assert!(
            (meta_loss_exact(&task, 0, &w, 0.0).unwrap()
                - local_loss(&task, 0, &w).unwrap())
            .abs()
                < 1e-15
        );
        let mg = meta_grad_exact(&task, 0, &w, 0.0).unwrap();
        let g = local_grad_exact(&task, 0, &w).unwrap();
        for (a, b) in mg.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn meta_grad_matches_finite_differences() {
        let task = quad_task();
        let alpha = 0.25;
        let mut rng = stream_rng(5, Domain::TaskGen, 99, 0);
        for _ in 0..6 {
            let w: alloc::vec::Vec<f64> =
                (0..4).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let g = meta_grad_exact(&task, 0, &w, alpha).unwrap();
            let step = 1e-5;
            for j in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += step;
                wm[j] -= step;
                let fd = (meta_loss_exact(&task, 0, &wp, alpha).unwrap()
                    - meta_loss_exact(&task, 0, &wm, alpha).unwrap())
                    / (2.0 * step);
                let denom = g[j].abs().max(1e-8);
                assert!(
                    ((g[j] - fd) / denom).abs() <= 1e-6,
                    "component {j}: {g:?} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn full_batch_stochastic_equals_exact() {
        let task = quad_task();
        let w = [0.4, 0.1, -0.3, 0.2];
        let mut rng = stream_rng(5, Domain::GradNoise, 0, 0);
        let exact = meta_grad_exact(&task, 2, &w, 0.2).unwrap();
        let stoch = meta_grad_stochastic(&task, 2, &w, 0.2, BatchSpec::Full, &mut rng).unwrap();
        for (a, b) in exact.iter().zip(&stoch) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn noisy_grad_mean_matches_exact() {
        // Monte-Carlo oracle: the mean of noisy draws stays within a
        // 3-sigma band of the exact gradient.
        let spec = QuadraticSpec {
            dim: 4,
            eig_range: (0.5, 1.0),
            center_spread: 1.0,
            grad_noise_sd: 0.5,
            hessian_noise_sd: 0.0,
            shared_curvature: false,
        };
        let t = QuadraticTask::generate(1, &spec, 9).unwrap();
        let task = Task::Quadratic(t);
        let w = [0.7, -0.1, 0.2, 0.5];
        let exact = local_grad_exact(&task, 0, &w).unwrap();
        let draws = 10_000usize;
        let outer = 2usize;
        let mut mean = alloc::vec![0.0; 4];
        for d in 0..draws {
            let mut rng = stream_rng(77, Domain::GradNoise, d as u64, 0);
            let g = fl_grad(&task, 0, &w, BatchSize::Sampled(outer), &mut rng).unwrap();
            axpy(&mut mean, 1.0 / draws as f64, &g);
        }
        let dev = norm(&sub(&mean, &exact));
        let band = 3.0 * 0.5 / num_traits::Float::sqrt((draws * outer) as f64);
        assert!(dev <= band, "dev {dev} band {band}");
    }

    #[test]
    fn empty_batches_rejected() {
        let task = quad_task();
        let mut rng = stream_rng(0, Domain::GradNoise, 0, 0);
        assert!(meta_grad_stochastic(
            &task,
            0,
            &[0.0; 4],
            0.1,
            BatchSpec::Sampled { inner: 0, outer: 1, hessian: 1 },
            &mut rng
        )
        .is_err());
        assert!(fl_grad(&task, 0, &[0.0; 4], BatchSize::Sampled(0), &mut rng).is_err());
    }

    #[test]
    fn global_update_examples() {
        let w = ModelParams::new(alloc::vec![1.0, 2.0]).unwrap();
        // All-zero gradients leave the model unchanged.
        let zero = GradientUpdate { ue: 0, model_version: 0, grad: alloc::vec![0.0, 0.0] };
        let next = global_update(&w, core::slice::from_ref(&zero), 0.5, 1).unwrap();
        assert_eq!(next.values(), w.values());
        // A = 1, beta = 1: w - g.
        let g = GradientUpdate { ue: 0, model_version: 0, grad: alloc::vec![0.5, -1.0] };
        let next = global_update(&w, core::slice::from_ref(&g), 1.0, 1).unwrap();
        assert_eq!(next.values(), &[0.5, 3.0]);
        // A = 2, beta = 0.5: w - 0.25 (g1 + g2).
        let g1 = GradientUpdate { ue: 0, model_version: 0, grad: alloc::vec![1.0, 0.0] };
        let g2 = GradientUpdate { ue: 1, model_version: 0, grad: alloc::vec![3.0, 4.0] };
        let next = global_update(&w, &[g1, g2], 0.5, 2).unwrap();
        assert_eq!(next.values(), &[0.0, 1.0]);
        // Wrong count is a protocol error.
        assert!(matches!(
            global_update(&w, &[], 0.5, 1),
            Err(Error::UpdateCount { .. })
        ));
    }

    #[test]
    fn aggregation_linearity() {
        let w = ModelParams::new(alloc::vec![0.4, -0.7, 0.1]).unwrap();
        let g = alloc::vec![0.3, 0.9, -0.2];
        let half = GradientUpdate {
            ue: 0,
            model_version: 0,
            grad: g.iter().map(|x| x / 2.0).collect(),
        };
        let full = GradientUpdate { ue: 0, model_version: 0, grad: g.clone() };
        let twice = global_update(
            &global_update(&w, core::slice::from_ref(&half), 1.0, 1).unwrap(),
            core::slice::from_ref(&half),
            1.0,
            1,
        )
        .unwrap();
        let once = global_update(&w, core::slice::from_ref(&full), 1.0, 1).unwrap();
        for (a, b) in twice.values().iter().zip(once.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn minimizer_symmetric_cases() {
        // Identical UEs: the common center minimizes.
        let q = alloc::vec![1.0, 0.0, 0.0, 1.0];
        let basis = alloc::vec![1.0, 0.0, 0.0, 1.0];
        let t = QuadraticTask::from_parts(
            2,
            alloc::vec![
                (alloc::vec![1.0, 1.0], basis.clone(), alloc::vec![0.3, -0.4]),
                (alloc::vec![1.0, 1.0], basis.clone(), alloc::vec![0.3, -0.4]),
            ],
            0.0,
            0.0,
        )
        .unwrap();
        let _ = q;
        let task = Task::Quadratic(t);
        let (w, value) = meta_objective_minimizer(&task, 0.4).unwrap();
        assert!((w.values()[0] - 0.3).abs() < 1e-12);
        assert!((w.values()[1] + 0.4).abs() < 1e-12);
        assert!(value.abs() < 1e-18);

        // m = 1, centers -1 and +1, unit curvature: symmetry gives 0.
        let t = QuadraticTask::from_parts(
            1,
            alloc::vec![
                (alloc::vec![1.0], alloc::vec![1.0], alloc::vec![-1.0]),
                (alloc::vec![1.0], alloc::vec![1.0], alloc::vec![1.0]),
            ],
            0.0,
            0.0,
        )
        .unwrap();
        let task = Task::Quadratic(t);
        let (w, _) = meta_objective_minimizer(&task, 0.5).unwrap();
        assert!(w.values()[0].abs() < 1e-12);
    }

    #[test]
    fn minimizer_is_stationary_on_random_instance() {
        let task = quad_task();
        let (w, _) = meta_objective_minimizer(&task, 0.3).unwrap();
        let g = meta_objective_grad(&task, w.values(), 0.3).unwrap();
        assert!(norm(&g) <= 1e-10, "residual gradient {}", norm(&g));
    }

    #[test]
    fn snapshot_round_trip_quadratic() {
        let task = quad_task();
        let snap = task.snapshot();
        let back = Task::from_snapshot(&snap).unwrap();
        assert_eq!(task, back);
    }
}
