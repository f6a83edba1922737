//! Per-UE quadratic losses `f_i(w) = 1/2 (w - c_i)^T Q_i (w - c_i)`
//! with symmetric positive-definite curvature. Gradients, Hessians and
//! the personalized-objective minimizer are available in closed form,
//! which makes this family the oracle task for convergence tests.
//!
//! Stochastic gradients model per-sample noise as additive Gaussians on
//! the gradient (level `grad_noise_sd`) and on the Hessian (level
//! `hessian_noise_sd`), averaged over the batch, so the variance
//! constants of the bound calculus hold exactly by construction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Domain};

use super::TaskSnapshot;

/// One UE's quadratic loss, stored as an eigendecomposition plus the
/// materialized curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticUe {
    eigenvalues: Vec<f64>,
    /// Row-major orthonormal basis; columns are eigenvectors.
    basis: Vec<f64>,
    center: Vec<f64>,
    curvature: DMatrix<f64>,
}

impl QuadraticUe {
    fn assemble(eigenvalues: Vec<f64>, basis: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        let dim = eigenvalues.len();
        if basis.len() != dim * dim || center.len() != dim {
            return Err(Error::ShapeMismatch("quadratic eigendecomposition"));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "eigenvalue",
                value: *eigenvalues
                    .iter()
                    .find(|&&l| !(l > 0.0))
                    .unwrap_or(&f64::NAN),
            });
        }
        let u = DMatrix::from_row_slice(dim, dim, &basis);
        let ortho_defect = (&u.transpose() * &u - DMatrix::<f64>::identity(dim, dim)).norm();
        if ortho_defect > 1e-8 {
            return Err(Error::InvalidParameter {
                name: "basis orthogonality defect",
                value: ortho_defect,
            });
        }
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&eigenvalues));
        let curvature = &u * lambda * u.transpose();
        Ok(Self {
            eigenvalues,
            basis,
            center,
            curvature,
        })
    }
}

/// Generation knobs for a quadratic population.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadraticSpec {
    /// Model dimension m.
    pub dim: usize,
    /// Curvature eigenvalues are drawn uniformly from this range.
    pub eig_range: (f64, f64),
    /// Standard deviation of the Gaussian centers.
    pub center_spread: f64,
    /// Per-sample gradient noise level (sigma_G).
    pub grad_noise_sd: f64,
    /// Per-sample Hessian noise level (sigma_H).
    pub hessian_noise_sd: f64,
    /// Give every UE the same curvature (keeps the diversity constants
    /// of the bound calculus exact).
    pub shared_curvature: bool,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            eig_range: (0.2, 1.0),
            center_spread: 1.0,
            grad_noise_sd: 0.0,
            hessian_noise_sd: 0.0,
            shared_curvature: false,
        }
    }
}

/// The quadratic task held by a population of UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    dim: usize,
    ues: Vec<QuadraticUe>,
    grad_noise_sd: f64,
    hessian_noise_sd: f64,
}

impl QuadraticTask {
    /// Generates a seeded population.
    pub fn generate(population: usize, spec: &QuadraticSpec, seed: u64) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", value: 0.0 });
        }
        let (lo, hi) = spec.eig_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidParameter { name: "eig_range", value: lo });
        }
        let shared = if spec.shared_curvature {
            let mut rng = stream_rng(seed, Domain::TaskGen, 1, 0);
            Some(random_spd_factors(spec.dim, lo, hi, &mut rng))
        } else {
            None
        };
        let mut ues = Vec::with_capacity(population);
        for ue in 0..population {
            let mut rng = stream_rng(seed, Domain::TaskGen, 0, ue as u64);
            let (eigenvalues, basis) = match &shared {
                Some((vals, b)) => (vals.clone(), b.clone()),
                None => random_spd_factors(spec.dim, lo, hi, &mut rng),
            };
            let center: Vec<f64> = (0..spec.dim)
                .map(|_| spec.center_spread * standard_normal(&mut rng))
                .collect();
            ues.push(QuadraticUe::assemble(eigenvalues, basis, center)?);
        }
        Ok(Self {
            dim: spec.dim,
            ues,
            grad_noise_sd: spec.grad_noise_sd,
            hessian_noise_sd: spec.hessian_noise_sd,
        })
    }

    /// Builds a task from explicit per-UE
    /// (eigenvalues, row-major basis, center) triples.
    pub fn from_parts(
        dim: usize,
        parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
        grad_noise_sd: f64,
        hessian_noise_sd: f64,
    ) -> Result<Self> {
        let mut ues = Vec::with_capacity(parts.len());
        for (eigenvalues, basis, center) in parts {
            if eigenvalues.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: eigenvalues.len(),
                });
            }
            ues.push(QuadraticUe::assemble(eigenvalues, basis, center)?);
        }
        Ok(Self {
            dim,
            ues,
            grad_noise_sd,
            hessian_noise_sd,
        })
    }

    /// Number of UEs.
    pub fn population(&self) -> usize {
        self.ues.len()
    }

    /// Model dimension m.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Minimizer of one UE's local loss.
    pub fn center(&self, ue: usize) -> &[f64] {
        &self.ues[ue].center
    }

    /// Largest curvature eigenvalue over the population (the gradient
    /// Lipschitz constant L).
    pub fn smoothness_constant(&self) -> f64 {
        self.ues
            .iter()
            .flat_map(|u| u.eigenvalues.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Gradient noise level sigma_G.
    pub fn grad_noise_sd(&self) -> f64 {
        self.grad_noise_sd
    }

    /// Hessian noise level sigma_H.
    pub fn hessian_noise_sd(&self) -> f64 {
        self.hessian_noise_sd
    }

    /// Local loss value.
    pub fn loss(&self, ue: usize, w: &[f64]) -> f64 {
        let u = &self.ues[ue];
        let d = DVector::from_iterator(self.dim, w.iter().zip(&u.center).map(|(a, b)| a - b));
        0.5 * (&u.curvature * &d).dot(&d)
    }

    /// Exact local gradient.
    pub fn grad(&self, ue: usize, w: &[f64]) -> Vec<f64> {
        let u = &self.ues[ue];
        let d = DVector::from_iterator(self.dim, w.iter().zip(&u.center).map(|(a, b)| a - b));
        (&u.curvature * d).data.into()
    }

    /// Exact Hessian-vector product (the Hessian is the constant
    /// curvature).
    pub fn hessian_vec(&self, ue: usize, v: &[f64]) -> Vec<f64> {
        let u = &self.ues[ue];
        (&u.curvature * DVector::from_column_slice(v)).data.into()
    }

    /// Stochastic gradient: exact gradient plus batch-averaged Gaussian
    /// noise with per-sample level sigma_G.
    pub fn grad_noisy(&self, ue: usize, w: &[f64], batch: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut g = self.grad(ue, w);
        if self.grad_noise_sd > 0.0 {
            let sd = self.grad_noise_sd / Float::sqrt((self.dim * batch) as f64);
            for gi in &mut g {
                *gi += sd * standard_normal(rng);
            }
        }
        g
    }

    /// Stochastic Hessian-vector product. The batch-averaged symmetric
    /// Gaussian noise matrix acts on `v` without being materialized:
    /// its action is distributed as `s (|v| z + v zeta)`, which matches
    /// a symmetric ensemble with `E |N|_F^2 = s^2 m (m + 1)`; the scale
    /// `s = sigma_H / sqrt(m (m + 1) batch)` therefore realizes the
    /// per-sample Hessian variance sigma_H^2 exactly.
    pub fn hessian_vec_noisy(
        &self,
        ue: usize,
        v: &[f64],
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let mut hv = self.hessian_vec(ue, v);
        if self.hessian_noise_sd > 0.0 {
            let m = self.dim as f64;
            let s = self.hessian_noise_sd / Float::sqrt(m * (m + 1.0) * batch as f64);
            let vnorm = super::norm(v);
            let zeta: f64 = standard_normal(rng);
            for (i, hvi) in hv.iter_mut().enumerate() {
                let z: f64 = standard_normal(rng);
                *hvi += s * (vnorm * z + v[i] * zeta);
            }
        }
        hv
    }

    /// Exact minimizer of the personalized objective: solves
    /// `sum_i M_i Q_i M_i w = sum_i M_i Q_i M_i c_i` with
    /// `M_i = I - alpha Q_i`.
    pub fn meta_minimizer(&self, alpha: f64) -> Result<Vec<f64>> {
        let m = self.dim;
        let eye = DMatrix::<f64>::identity(m, m);
        let mut lhs = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for u in &self.ues {
            let adapt = &eye - alpha * &u.curvature;
            let h = &adapt * &u.curvature * &adapt;
            rhs += &h * DVector::from_column_slice(&u.center);
            lhs += h;
        }
        let chol = lhs
            .cholesky()
            .ok_or(Error::DegenerateTask("personalized normal equations are singular"))?;
        Ok(chol.solve(&rhs).data.into())
    }

    /// The gradient-norm surrogate for the bound calculus: an upper
    /// bound on `max_i |grad f_i(w)|` over the ball of radius `radius`
    /// around `center_w`.
    pub fn grad_bound_over_ball(&self, center_w: &[f64], radius: f64) -> f64 {
        self.ues
            .iter()
            .map(|u| {
                let d = DVector::from_iterator(
                    self.dim,
                    center_w.iter().zip(&u.center).map(|(a, b)| a - b),
                );
                let at_center = (&u.curvature * d).norm();
                let lmax = u.eigenvalues.iter().copied().fold(0.0, f64::max);
                at_center + lmax * radius
            })
            .fold(0.0, f64::max)
    }

    /// Exact inter-UE diversity constants `(gamma_G, gamma_H)`. Only
    /// defined when all UEs share one curvature: the gradient spread is
    /// then the constant `Q (c_i - mean c)` and the Hessian spread is
    /// zero. Returns `None` for heterogeneous curvatures, whose
    /// diversity is unbounded over all of model space.
    pub fn exact_diversity(&self) -> Option<(f64, f64)> {
        let first = &self.ues[0];
        if self
            .ues
            .iter()
            .any(|u| u.curvature != first.curvature)
        {
            return None;
        }
        let n = self.ues.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for u in &self.ues {
            super::axpy(&mut mean, 1.0 / n, &u.center);
        }
        let mut total = 0.0;
        for u in &self.ues {
            let d = DVector::from_iterator(self.dim, u.center.iter().zip(&mean).map(|(a, b)| a - b));
            total += (&first.curvature * d).norm_squared();
        }
        Some((Float::sqrt(total / n), 0.0))
    }

    /// Snapshot of the eigendecompositions for serialization.
    pub fn snapshot(&self) -> TaskSnapshot {
        TaskSnapshot::Quadratic {
            dim: self.dim,
            grad_noise_sd: self.grad_noise_sd,
            hessian_noise_sd: self.hessian_noise_sd,
            ues: self
                .ues
                .iter()
                .map(|u| (u.eigenvalues.clone(), u.basis.clone(), u.center.clone()))
                .collect(),
        }
    }

    /// Rebuilds the task from a snapshot.
    pub fn from_snapshot(snapshot: &TaskSnapshot) -> Result<Self> {
        match snapshot {
            TaskSnapshot::Quadratic {
                dim,
                grad_noise_sd,
                hessian_noise_sd,
                ues,
            } => Self::from_parts(*dim, ues.clone(), *grad_noise_sd, *hessian_noise_sd),
            _ => Err(Error::UnsupportedTask("quadratic snapshot")),
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random SPD factors: eigenvalues uniform in `[lo, hi]` and an
/// orthonormal basis from the QR decomposition of a Gaussian matrix.
fn random_spd_factors(dim: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|_| lo + (hi - lo) * rand::Rng::random::<f64>(rng))
        .collect();
    let gauss = DMatrix::from_fn(dim, dim, |_, _| standard_normal(rng));
    let q = gauss.qr().q();
    let mut basis = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            basis.push(q[(r, c)]);
        }
    }
    (eigenvalues, basis)
}
