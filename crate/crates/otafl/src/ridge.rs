//! The federated ridge-regression task.
//!
//! Inputs are i.i.d. standard normal; the label of a sample is
//! `tau = x(2) + 3*x(5) + 0.2*z` (1-based components, `z` standard normal).
//! Each UE holds an equal-size local dataset and runs full-batch gradient
//! descent between aggregation rounds.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// One UE's local training data.
#[derive(Debug, Clone)]
pub struct RidgeDataset {
    /// D x q matrix of input samples, one row per sample.
    pub inputs: DMatrix<f64>,
    /// Length-D label vector.
    pub labels: DVector<f64>,
    /// Owning UE index.
    pub owner: usize,
}

impl RidgeDataset {
    pub fn n_samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }
}

/// Learning-task hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TaskHyperparams {
    /// L2 regularization weight rho.
    pub rho: f64,
    /// Learning rate per round (fixed across rounds).
    pub eta: f64,
    /// Local epochs per round.
    pub omega: usize,
    /// Model dimension q.
    pub model_dim: usize,
}

impl Default for TaskHyperparams {
    fn default() -> Self {
        Self {
            rho: 5e-5,
            eta: 0.05,
            omega: 1,
            model_dim: 10,
        }
    }
}

/// Generates UE `owner`'s dataset from its own named stream.
pub fn generate_dataset(
    seed: u64,
    owner: usize,
    n_samples: usize,
    dim: usize,
) -> Result<RidgeDataset> {
    if dim < 5 {
        return Err(Error::Config(format!(
            "label rule references components 2 and 5; model dim {dim} < 5"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Data, owner as u64);
    let mut inputs = DMatrix::zeros(n_samples, dim);
    let mut labels = DVector::zeros(n_samples);
    for i in 0..n_samples {
        for j in 0..dim {
            inputs[(i, j)] = rng.sample(StandardNormal);
        }
        let z: f64 = rng.sample(StandardNormal);
        labels[i] = inputs[(i, 1)] + 3.0 * inputs[(i, 4)] + 0.2 * z;
    }
    Ok(RidgeDataset {
        inputs,
        labels,
        owner,
    })
}

/// Local loss `F_k(w) = mean_i [ (x_i'w - tau_i)^2 / 2 ] + rho * ||w||^2`.
pub fn local_loss(w: &DVector<f64>, data: &RidgeDataset, rho: f64) -> f64 {
    let residual = &data.inputs * w - &data.labels;
    0.5 * residual.norm_squared() / data.n_samples() as f64 + rho * w.norm_squared()
}

/// Gradient of the local loss: `mean_i x_i (x_i'w - tau_i) + 2 rho w`.
pub fn local_gradient(w: &DVector<f64>, data: &RidgeDataset, rho: f64) -> DVector<f64> {
    let residual = &data.inputs * w - &data.labels;
    data.inputs.transpose() * residual / data.n_samples() as f64 + 2.0 * rho * w
}

/// Runs `omega` full-batch gradient steps from the global model.
pub fn local_update(
    w_global: &DVector<f64>,
    data: &RidgeDataset,
    hyper: &TaskHyperparams,
) -> DVector<f64> {
    let mut w = w_global.clone();
    for _ in 0..hyper.omega {
        w -= hyper.eta * local_gradient(&w, data, hyper.rho);
    }
    w
}

/// Global loss `F(w)`, the mean of the per-UE losses (equal dataset sizes).
pub fn global_loss(w: &DVector<f64>, datasets: &[RidgeDataset], rho: f64) -> f64 {
    datasets.iter().map(|d| local_loss(w, d, rho)).sum::<f64>() / datasets.len() as f64
}

/// Mean of the per-UE gradients.
pub fn global_gradient(w: &DVector<f64>, datasets: &[RidgeDataset], rho: f64) -> DVector<f64> {
    let mut g = DVector::zeros(w.len());
    for d in datasets {
        g += local_gradient(w, d, rho);
    }
    g / datasets.len() as f64
}

/// Exact minimizer of the pooled ridge objective and its loss value `F*`.
///
/// Solves `(sum_i x_i x_i' / D_tot + 2 rho I) w = sum_i x_i tau_i / D_tot`.
pub fn optimal_loss(datasets: &[RidgeDataset], rho: f64) -> Result<(DVector<f64>, f64)> {
    let dim = datasets
        .first()
        .ok_or_else(|| Error::Config("no datasets".into()))?
        .dim();
    let d_tot: usize = datasets.iter().map(RidgeDataset::n_samples).sum();
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for d in datasets {
        gram += d.inputs.transpose() * &d.inputs;
        rhs += d.inputs.transpose() * &d.labels;
    }
    gram /= d_tot as f64;
    rhs /= d_tot as f64;
    gram += DMatrix::identity(dim, dim) * (2.0 * rho);
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::Singular(
            "pooled ridge system is not positive definite (rho = 0 with rank-deficient data?)"
                .into(),
        )
    })?;
    let w_star = chol.solve(&rhs);
    let f_star = global_loss(&w_star, datasets, rho);
    Ok((w_star, f_star))
}
