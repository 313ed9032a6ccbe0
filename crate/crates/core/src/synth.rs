//! Synthetic ground truth: random pre-RKHS functions with unit RKHS norm.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel};

/// Attempts at drawing distinct centers before giving up.
const CENTER_RETRIES: usize = 1000;

/// `f(a) = sum_j c_j k(a, x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RkhsFunction {
    kernel: Kernel,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    rkhs_norm: f64,
}

impl RkhsFunction {
    pub fn new(kernel: Kernel, centers: Vec<Vec<f64>>, coefficients: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::param("centers", "at least one center is required"));
        }
        if centers.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        let rkhs_norm = quadratic_norm(&kernel, &centers, &coefficients)?;
        Ok(Self {
            kernel,
            centers,
            coefficients,
            rkhs_norm,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `sqrt(c^T K_X c)`.
    pub fn rkhs_norm(&self) -> f64 {
        self.rkhs_norm
    }

    /// Same norm through `|L^T c|` with `K_X + jitter I = L L^T`.
    pub fn rkhs_norm_cholesky(&self) -> Result<f64> {
        let n = self.centers.len();
        let gram = self.kernel.gram(&self.centers)? + DMatrix::identity(n, n) * self.kernel.jitter();
        let l = gram.cholesky().ok_or(Error::Factorization)?.unpack();
        let c = DVector::from_column_slice(&self.coefficients);
        Ok((l.transpose() * c).norm())
    }

    /// Rescales the coefficients to unit RKHS norm.
    pub fn normalized(mut self) -> Result<Self> {
        if !(self.rkhs_norm > 0.0) {
            return Err(Error::param("coefficients", "cannot normalize a zero function"));
        }
        let scale = 1.0 / self.rkhs_norm;
        for c in &mut self.coefficients {
            *c *= scale;
        }
        self.rkhs_norm = quadratic_norm(&self.kernel, &self.centers, &self.coefficients)?;
        Ok(self)
    }

    pub fn evaluate(&self, a: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(x, c)| c * self.kernel.of_distance(crate::kernel::euclidean(a, x)))
            .sum()
    }

    pub fn evaluate_domain(&self, domain: &Domain) -> Vec<f64> {
        domain.points().iter().map(|a| self.evaluate(a)).collect()
    }
}

fn quadratic_norm(kernel: &Kernel, centers: &[Vec<f64>], coefficients: &[f64]) -> Result<f64> {
    let gram = kernel.gram(centers)?;
    let c = DVector::from_column_slice(coefficients);
    let q = (c.transpose() * &gram * &c)[(0, 0)];
    Ok(q.max(0.0).sqrt())
}

/// Draws `n_centers` distinct centers uniformly inside the domain bounds and
/// standard-normal coefficients, then normalizes to unit RKHS norm.
pub fn sample_rkhs_function(
    kernel: &Kernel,
    domain: &Domain,
    n_centers: usize,
    rng: &mut dyn RngCore,
) -> Result<RkhsFunction> {
    if n_centers == 0 {
        return Err(Error::param("n_centers", "at least one center is required"));
    }
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_centers);
    let mut retries = 0;
    while centers.len() < n_centers {
        let x: Vec<f64> = domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect();
        if centers.contains(&x) {
            retries += 1;
            if retries > CENTER_RETRIES {
                return Err(Error::param("n_centers", "could not draw distinct centers"));
            }
            continue;
        }
        centers.push(x);
    }
    let coefficients: Vec<f64> = (0..n_centers).map(|_| rng.sample(StandardNormal)).collect();
    RkhsFunction::new(*kernel, centers, coefficients)?.normalized()
}

/// Nearest-rank threshold leaving `ceil((1 - q) n)` values at or above it.
pub fn quantile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("must lie in (0, 1), got {q}")));
    }
    if values.is_empty() {
        return Err(Error::param("values", "quantile of an empty set"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantile input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against 0.6 * 5 landing on 3.0000000000000004
    let keep = (((1.0 - q) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[n - keep])
}

/// `g(a) = f(a) - threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedFunction {
    pub base: RkhsFunction,
    pub threshold: f64,
}

impl ShiftedFunction {
    pub fn evaluate(&self, a: &[f64]) -> f64 {
        self.base.evaluate(a) - self.threshold
    }
}

/// Shifts `f` so that zero sits at its nearest-rank `q`-quantile over the grid.
pub fn shift_to_quantile(f: RkhsFunction, domain: &Domain, q: f64) -> Result<ShiftedFunction> {
    let threshold = quantile_threshold(&f.evaluate_domain(domain), q)?;
    Ok(ShiftedFunction { base: f, threshold })
}
