//! Regularized GP posterior shared by every output.
//!
//! All outputs use the same kernel and the same evaluated inputs, so the
//! posterior standard deviation `sigma_t` is common to all of them and one
//! triangular solve per query serves the whole block of targets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::{check_dims, Kernel};

/// Full refactorization cadence for the incrementally grown Cholesky factor.
pub const REFACTOR_EVERY: usize = 64;

pub const POWER_ITERATION_CAP: usize = 10_000;
pub const POWER_ITERATION_TOL: f64 = 1e-12;
/// Largest matrix order for which a non-converged power iteration falls
/// back to a dense symmetric eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 256;

#[derive(Clone, Debug)]
pub struct SurrogateModel {
    kernel: Kernel,
    eta: f64,
    n_outputs: usize,
    inputs: Vec<Vec<f64>>,
    /// `t x |I|`, one column per output.
    targets: DMatrix<f64>,
    /// Lower Cholesky factor of `K_t + eta I`.
    factor: DMatrix<f64>,
    /// `(K_t + eta I)^{-1} Y`.
    weights: DMatrix<f64>,
    updates_since_refactor: usize,
}

/// Posterior at a single query point.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub means: Vec<f64>,
    pub std: f64,
}

/// Posterior over a batch of query points.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPosterior {
    /// `means[i][s]`: output `i` at query `s`.
    pub means: Vec<Vec<f64>>,
    pub std: Vec<f64>,
}

impl SurrogateModel {
    pub fn new(kernel: Kernel, eta: f64, n_outputs: usize) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1], got {eta}")));
        }
        if n_outputs == 0 {
            return Err(Error::param("n_outputs", "at least one output is required"));
        }
        Ok(Self {
            kernel,
            eta,
            n_outputs,
            inputs: Vec::new(),
            targets: DMatrix::zeros(0, n_outputs),
            factor: DMatrix::zeros(0, 0),
            weights: DMatrix::zeros(0, n_outputs),
            updates_since_refactor: 0,
        })
    }

    /// Builds a model from a full history with a single factorization.
    pub fn from_data(kernel: Kernel, eta: f64, inputs: Vec<Vec<f64>>, targets: &[Vec<f64>]) -> Result<Self> {
        let n_outputs = targets.first().map(Vec::len).unwrap_or(1);
        let mut model = Self::new(kernel, eta, n_outputs)?;
        check_dims(inputs.len(), targets.len())?;
        if let Some(first) = inputs.first() {
            for p in &inputs {
                check_dims(first.len(), p.len())?;
            }
        }
        for y in targets {
            check_dims(n_outputs, y.len())?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("targets"));
            }
        }
        let t = inputs.len();
        model.targets = DMatrix::from_fn(t, n_outputs, |s, i| targets[s][i]);
        model.inputs = inputs;
        model.refactor()?;
        Ok(model)
    }

    /// Returns a new model with one more observation; `self` is unchanged.
    pub fn with_observation(&self, a: &[f64], y: &[f64]) -> Result<Self> {
        check_dims(self.n_outputs, y.len())?;
        if let Some(first) = self.inputs.first() {
            check_dims(first.len(), a.len())?;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        let mut next = self.clone();
        let t = self.inputs.len();
        next.inputs.push(a.to_vec());
        next.targets = self.targets.clone().insert_row(t, 0.0);
        for (i, &v) in y.iter().enumerate() {
            next.targets[(t, i)] = v;
        }
        next.updates_since_refactor += 1;
        if next.updates_since_refactor >= REFACTOR_EVERY || !next.extend_factor(a)? {
            next.refactor()?;
        } else {
            next.update_weights();
        }
        Ok(next)
    }

    /// Appends one row to the Cholesky factor. Returns `false` when the new
    /// pivot is not positive, in which case the caller refactorizes.
    fn extend_factor(&mut self, a: &[f64]) -> Result<bool> {
        let t = self.inputs.len() - 1;
        let mut k_new = DVector::zeros(t);
        for (s, x) in self.inputs[..t].iter().enumerate() {
            k_new[s] = self.kernel.evaluate(x, a)?;
        }
        let c = match self.factor.solve_lower_triangular(&k_new) {
            Some(c) => c,
            None => return Ok(false),
        };
        let pivot = self.kernel.output_scale() + self.eta - c.norm_squared();
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Ok(false);
        }
        let mut l = self.factor.clone().insert_row(t, 0.0).insert_column(t, 0.0);
        for s in 0..t {
            l[(t, s)] = c[s];
        }
        l[(t, t)] = pivot.sqrt();
        self.factor = l;
        Ok(true)
    }

    fn refactor(&mut self) -> Result<()> {
        self.updates_since_refactor = 0;
        let t = self.inputs.len();
        if t == 0 {
            self.factor = DMatrix::zeros(0, 0);
            self.weights = DMatrix::zeros(0, self.n_outputs);
            return Ok(());
        }
        let regularized = self.kernel.gram(&self.inputs)? + DMatrix::identity(t, t) * self.eta;
        let chol = regularized.cholesky().ok_or(Error::Factorization)?;
        self.factor = chol.unpack();
        self.update_weights();
        Ok(())
    }

    fn update_weights(&mut self) {
        let mut w = self.targets.clone();
        // factor has a strictly positive diagonal, both solves succeed
        self.factor.solve_lower_triangular_mut(&mut w);
        self.factor.tr_solve_lower_triangular_mut(&mut w);
        self.weights = w;
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Number of observations `t`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `K_t` without regularization.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        if self.inputs.is_empty() {
            return Ok(DMatrix::zeros(0, 0));
        }
        self.kernel.gram(&self.inputs)
    }

    pub fn posterior(&self, query: &[f64]) -> Result<Posterior> {
        let batch = self.posterior_batch(std::slice::from_ref(&query.to_vec()))?;
        Ok(Posterior {
            means: batch.means.into_iter().map(|m| m[0]).collect(),
            std: batch.std[0],
        })
    }

    pub fn posterior_batch(&self, queries: &[Vec<f64>]) -> Result<BatchPosterior> {
        let n = queries.len();
        let prior = self.kernel.output_scale();
        if self.inputs.is_empty() {
            return Ok(BatchPosterior {
                means: vec![vec![0.0; n]; self.n_outputs],
                std: vec![prior.sqrt(); n],
            });
        }
        let cross = self.kernel.cross(&self.inputs, queries)?;
        let means = cross.tr_mul(&self.weights);
        let mut v = cross;
        self.factor.solve_lower_triangular_mut(&mut v);
        let std = (0..n)
            .map(|s| (prior - v.column(s).norm_squared()).max(0.0).sqrt())
            .collect();
        let means = (0..self.n_outputs)
            .map(|i| means.column(i).iter().copied().collect())
            .collect();
        Ok(BatchPosterior { means, std })
    }

    /// `lambda_max(K_t (K_t + eta I)^{-1}) = lambda_max(K_t) / (lambda_max(K_t) + eta)`;
    /// zero for an empty history.
    pub fn xi_lambda_max(&self) -> Result<f64> {
        if self.inputs.is_empty() {
            return Ok(0.0);
        }
        xi_lambda_max_of_gram(&self.gram()?, self.eta)
    }

    /// `1/2 log det(I + K_t / eta)`, zero for an empty history.
    pub fn log_det_information_gain(&self) -> Result<f64> {
        let t = self.inputs.len();
        if t == 0 {
            return Ok(0.0);
        }
        let log_det: f64 = (0..t).map(|s| self.factor[(s, s)].ln()).sum::<f64>() * 2.0;
        let gain = 0.5 * (log_det - t as f64 * self.eta.ln());
        if !gain.is_finite() {
            return Err(Error::Factorization);
        }
        Ok(gain)
    }
}

/// Spectral quantity from a Gram matrix and regularizer.
pub fn xi_lambda_max_of_gram(gram: &DMatrix<f64>, eta: f64) -> Result<f64> {
    if gram.is_empty() {
        return Ok(0.0);
    }
    let top = largest_eigenvalue(gram)?.max(0.0);
    Ok(top / (top + eta))
}

/// Largest eigenvalue of a symmetric PSD matrix.
///
/// Power iteration from the all-ones vector, stopped once the eigen-residual
/// `|A v - theta v|` drops below `POWER_ITERATION_TOL * theta`. Non-converged
/// runs on matrices of order at most `DENSE_EIGEN_LIMIT` are handed to a dense
/// symmetric eigensolver.
pub fn largest_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    check_dims(n, a.ncols())?;
    if n == 0 {
        return Ok(0.0);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..POWER_ITERATION_CAP {
        let w = a * &v;
        let theta = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let residual = (&w - &v * theta).norm();
        if residual <= POWER_ITERATION_TOL * theta.abs() {
            return Ok(theta);
        }
        v = w / norm;
    }
    if n <= DENSE_EIGEN_LIMIT {
        let eig = SymmetricEigen::new(a.clone());
        return Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Err(Error::EigenNonConvergence(POWER_ITERATION_CAP))
}
