//! Label-skewed synthetic classification: each UE holds samples from a
//! configurable number of the available classes, features drawn from
//! per-class Gaussian generators, and the model is a linear softmax
//! classifier (weights plus bias per class) trained with cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Domain};

use super::TaskSnapshot;

/// One UE's train and held-out arrays (row-major feature matrices).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UeDataset {
    /// Train features, `train_len * features` values.
    pub features: Vec<f64>,
    /// Train labels.
    pub labels: Vec<u8>,
    /// Held-out features.
    pub heldout_features: Vec<f64>,
    /// Held-out labels.
    pub heldout_labels: Vec<u8>,
}

/// Generation knobs for the label-skew partition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassificationSpec {
    /// Number of classes (labels).
    pub classes: usize,
    /// Feature dimension (bias is added internally).
    pub features: usize,
    /// Labels held by each UE: the skew level, from 1 (single-class
    /// UEs) to `classes` (every UE sees all labels).
    pub labels_per_ue: usize,
    /// Per-UE train set size, drawn uniformly from this inclusive range
    /// (unbalanced populations).
    pub train_size_range: (usize, usize),
    /// Held-out samples per UE.
    pub heldout_per_ue: usize,
    /// Standard deviation of features around their class mean.
    pub feature_sd: f64,
    /// Scale of the Gaussian class means.
    pub class_mean_scale: f64,
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            features: 8,
            labels_per_ue: 2,
            train_size_range: (40, 120),
            heldout_per_ue: 50,
            feature_sd: 0.6,
            class_mean_scale: 1.0,
        }
    }
}

/// The classification task held by a population of UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTask {
    classes: usize,
    features: usize,
    labels_per_ue: usize,
    class_means: Vec<Vec<f64>>,
    ues: Vec<UeDataset>,
}

impl ClassificationTask {
    /// Generates the label-skewed partition: every UE draws
    /// `labels_per_ue` distinct labels, an unbalanced train size, and
    /// Gaussian features around the class means.
    pub fn generate(population: usize, spec: &ClassificationSpec, seed: u64) -> Result<Self> {
        if spec.labels_per_ue < 1 || spec.labels_per_ue > spec.classes {
            return Err(Error::InvalidParameter {
                name: "labels_per_ue",
                value: spec.labels_per_ue as f64,
            });
        }
        if spec.classes < 2 || spec.features == 0 {
            return Err(Error::InvalidParameter {
                name: "classes",
                value: spec.classes as f64,
            });
        }
        if spec.train_size_range.0 < 1 || spec.train_size_range.1 < spec.train_size_range.0 {
            return Err(Error::InvalidParameter {
                name: "train_size_range",
                value: spec.train_size_range.0 as f64,
            });
        }
        let class_means: Vec<Vec<f64>> = (0..spec.classes)
            .map(|c| {
                let mut rng = stream_rng(seed, Domain::TaskGen, 1, c as u64);
                (0..spec.features)
                    .map(|_| spec.class_mean_scale * normal(&mut rng))
                    .collect()
            })
            .collect();
        let mut ues = Vec::with_capacity(population);
        for ue in 0..population {
            let mut rng = stream_rng(seed, Domain::Partition, 0, ue as u64);
            let mut label_pool: Vec<u8> = (0..spec.classes as u8).collect();
            label_pool.shuffle(&mut rng);
            label_pool.truncate(spec.labels_per_ue);
            let train_len = rng.random_range(spec.train_size_range.0..=spec.train_size_range.1);
            let mut dataset = UeDataset {
                features: Vec::with_capacity(train_len * spec.features),
                labels: Vec::with_capacity(train_len),
                heldout_features: Vec::with_capacity(spec.heldout_per_ue * spec.features),
                heldout_labels: Vec::with_capacity(spec.heldout_per_ue),
            };
            for _ in 0..train_len {
                let label = label_pool[rng.random_range(0..label_pool.len())];
                dataset.labels.push(label);
                let mean = &class_means[label as usize];
                for j in 0..spec.features {
                    dataset.features.push(mean[j] + spec.feature_sd * normal(&mut rng));
                }
            }
            for _ in 0..spec.heldout_per_ue {
                let label = label_pool[rng.random_range(0..label_pool.len())];
                dataset.heldout_labels.push(label);
                let mean = &class_means[label as usize];
                for j in 0..spec.features {
                    dataset
                        .heldout_features
                        .push(mean[j] + spec.feature_sd * normal(&mut rng));
                }
            }
            ues.push(dataset);
        }
        Ok(Self {
            classes: spec.classes,
            features: spec.features,
            labels_per_ue: spec.labels_per_ue,
            class_means,
            ues,
        })
    }

    /// Number of UEs.
    pub fn population(&self) -> usize {
        self.ues.len()
    }

    /// Model dimension: one weight row plus bias per class.
    pub fn dim(&self) -> usize {
        self.classes * (self.features + 1)
    }

    /// Labels held per UE (the skew level).
    pub fn labels_per_ue(&self) -> usize {
        self.labels_per_ue
    }

    /// Number of classes.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Distinct labels present in one UE's train set.
    pub fn label_set(&self, ue: usize) -> Vec<u8> {
        let mut labels = self.ues[ue].labels.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Train set size of one UE.
    pub fn train_len(&self, ue: usize) -> usize {
        self.ues[ue].labels.len()
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.features + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * stride..(c + 1) * stride];
            let mut acc = row[self.features];
            for j in 0..self.features {
                acc += row[j] * x[j];
            }
            *o = acc;
        }
    }

    fn softmax(logits: &mut [f64]) {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = Float::exp(*l - max);
            total += *l;
        }
        for l in logits.iter_mut() {
            *l /= total;
        }
    }

    fn sample_loss(&self, w: &[f64], x: &[f64], y: u8, probs: &mut [f64]) -> f64 {
        self.logits(w, x, probs);
        Self::softmax(probs);
        -Float::ln(probs[y as usize].max(f64::MIN_POSITIVE))
    }

    /// Empirical mean loss over a UE's full train set.
    pub fn loss_full(&self, ue: usize, w: &[f64]) -> f64 {
        let data = &self.ues[ue];
        let n = data.labels.len();
        let mut probs = vec![0.0; self.classes];
        let mut total = 0.0;
        for s in 0..n {
            let x = &data.features[s * self.features..(s + 1) * self.features];
            total += self.sample_loss(w, x, data.labels[s], &mut probs);
        }
        total / n as f64
    }

    fn accumulate_grad(
        &self,
        w: &[f64],
        x: &[f64],
        y: u8,
        scale: f64,
        probs: &mut [f64],
        grad: &mut [f64],
    ) {
        self.logits(w, x, probs);
        Self::softmax(probs);
        let stride = self.features + 1;
        for c in 0..self.classes {
            let mut coeff = probs[c];
            if c == y as usize {
                coeff -= 1.0;
            }
            coeff *= scale;
            let row = &mut grad[c * stride..(c + 1) * stride];
            for j in 0..self.features {
                row[j] += coeff * x[j];
            }
            row[self.features] += coeff;
        }
    }

    /// Exact (full train set) gradient for one UE.
    pub fn grad_full(&self, ue: usize, w: &[f64]) -> Vec<f64> {
        let data = &self.ues[ue];
        let n = data.labels.len();
        let mut grad = vec![0.0; self.dim()];
        let mut probs = vec![0.0; self.classes];
        for s in 0..n {
            let x = &data.features[s * self.features..(s + 1) * self.features];
            self.accumulate_grad(w, x, data.labels[s], 1.0 / n as f64, &mut probs, &mut grad);
        }
        grad
    }

    /// Gradient over an explicit batch of sample indices.
    pub fn grad_batch(&self, ue: usize, w: &[f64], batch: &[usize]) -> Vec<f64> {
        let data = &self.ues[ue];
        let mut grad = vec![0.0; self.dim()];
        let mut probs = vec![0.0; self.classes];
        let scale = 1.0 / batch.len() as f64;
        for &s in batch {
            let x = &data.features[s * self.features..(s + 1) * self.features];
            self.accumulate_grad(w, x, data.labels[s], scale, &mut probs, &mut grad);
        }
        grad
    }

    fn accumulate_hvp(
        &self,
        w: &[f64],
        x: &[f64],
        v: &[f64],
        scale: f64,
        probs: &mut [f64],
        out: &mut [f64],
    ) {
        self.logits(w, x, probs);
        Self::softmax(probs);
        let stride = self.features + 1;
        // a_c = (V x)_c including the bias column.
        let mut weighted = 0.0;
        let mut a = vec![0.0; self.classes];
        for c in 0..self.classes {
            let row = &v[c * stride..(c + 1) * stride];
            let mut acc = row[self.features];
            for j in 0..self.features {
                acc += row[j] * x[j];
            }
            a[c] = acc;
            weighted += probs[c] * acc;
        }
        for c in 0..self.classes {
            let coeff = scale * probs[c] * (a[c] - weighted);
            let row = &mut out[c * stride..(c + 1) * stride];
            for j in 0..self.features {
                row[j] += coeff * x[j];
            }
            row[self.features] += coeff;
        }
    }

    /// Hessian-vector product over the full train set; the softmax
    /// Hessian has closed form, so no matrix is ever materialized.
    pub fn hvp_full(&self, ue: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
        let data = &self.ues[ue];
        let n = data.labels.len();
        let mut out = vec![0.0; self.dim()];
        let mut probs = vec![0.0; self.classes];
        for s in 0..n {
            let x = &data.features[s * self.features..(s + 1) * self.features];
            self.accumulate_hvp(w, x, v, 1.0 / n as f64, &mut probs, &mut out);
        }
        out
    }

    /// Hessian-vector product over an explicit batch.
    pub fn hvp_batch(&self, ue: usize, w: &[f64], v: &[f64], batch: &[usize]) -> Vec<f64> {
        let data = &self.ues[ue];
        let mut out = vec![0.0; self.dim()];
        let mut probs = vec![0.0; self.classes];
        let scale = 1.0 / batch.len() as f64;
        for &s in batch {
            let x = &data.features[s * self.features..(s + 1) * self.features];
            self.accumulate_hvp(w, x, v, scale, &mut probs, &mut out);
        }
        out
    }

    /// Samples `size` train indices with replacement.
    pub fn sample_batch(&self, ue: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.ues[ue].labels.len();
        (0..size).map(|_| rng.random_range(0..n)).collect()
    }

    /// Held-out accuracy of one UE under a model.
    pub fn heldout_accuracy_for(&self, ue: usize, w: &[f64]) -> f64 {
        let data = &self.ues[ue];
        let n = data.heldout_labels.len();
        if n == 0 {
            return 0.0;
        }
        let mut logits = vec![0.0; self.classes];
        let mut hits = 0usize;
        for s in 0..n {
            let x = &data.heldout_features[s * self.features..(s + 1) * self.features];
            self.logits(w, x, &mut logits);
            let mut best = 0usize;
            for c in 1..self.classes {
                if logits[c] > logits[best] {
                    best = c;
                }
            }
            if best == data.heldout_labels[s] as usize {
                hits += 1;
            }
        }
        hits as f64 / n as f64
    }

    /// Population-mean held-out accuracy.
    pub fn heldout_accuracy(&self, w: &[f64]) -> f64 {
        let n = self.population();
        (0..n).map(|ue| self.heldout_accuracy_for(ue, w)).sum::<f64>() / n as f64
    }

    /// Snapshot of the raw dataset arrays.
    pub fn snapshot(&self) -> TaskSnapshot {
        TaskSnapshot::Classification {
            classes: self.classes,
            features: self.features,
            class_means: self.class_means.clone(),
            labels_per_ue: self.labels_per_ue,
            ues: self.ues.clone(),
        }
    }

    /// Rebuilds the task from a snapshot.
    pub fn from_snapshot(snapshot: &TaskSnapshot) -> Result<Self> {
        match snapshot {
            TaskSnapshot::Classification {
                classes,
                features,
                class_means,
                labels_per_ue,
                ues,
            } => {
                for ue in ues {
                    if ue.features.len() != ue.labels.len() * features
                        || ue.heldout_features.len() != ue.heldout_labels.len() * features
                    {
                        return Err(Error::ShapeMismatch("dataset arrays"));
                    }
                }
                Ok(Self {
                    classes: *classes,
                    features: *features,
                    labels_per_ue: *labels_per_ue,
                    class_means: class_means.clone(),
                    ues: ues.clone(),
                })
            }
            _ => Err(Error::UnsupportedTask("classification snapshot")),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Builds the non-i.i.d. label-skew partition for `population` UEs with
/// `spec.labels_per_ue` labels each.
///
/// Direction of the skew level: this library reads the level as the
/// number of labels per UE, so a *smaller* level means fewer labels per
/// UE and therefore more heterogeneous local datasets. Callers that
/// interpret the level the other way around should invert it before
/// configuring runs; no invariant here ties the level's direction to
/// convergence behavior.
pub fn make_noniid_partition(
    population: usize,
    spec: &ClassificationSpec,
    seed: u64,
) -> Result<ClassificationTask> {
    ClassificationTask::generate(population, spec, seed)
}
