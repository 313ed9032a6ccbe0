//! Safety parameter `beta` and the running intersected confidence intervals.

use std::cmp::Ordering;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack below which `lower > upper` is treated as roundoff, not collapse.
pub const COLLAPSE_TOLERANCE: f64 = 1e-12;

/// Inputs to the scenario-based `beta`.
#[derive(Clone, Copy, Debug)]
pub struct BetaInputs<'a> {
    /// `||h_i||_k` per output.
    pub norm_bounds: &'a [f64],
    pub eta: f64,
    /// `lambda_max(K_t (K_t + eta I)^{-1})`.
    pub lambda_max: f64,
    /// `noise_bounds[i]` is the history `eps_bar_{i,1:t}`.
    pub noise_bounds: &'a [Vec<f64>],
}

/// `beta_{i,t} = ||h_i||_k + sqrt(lambda_max / eta) * ||eps_bar_{i,1:t}||_2`.
pub fn beta(inputs: &BetaInputs<'_>, i: usize) -> Result<f64> {
    if !(inputs.eta > 0.0) {
        return Err(Error::param("eta", format!("must be positive, got {}", inputs.eta)));
    }
    let norm = *inputs
        .norm_bounds
        .get(i)
        .ok_or_else(|| Error::param("output", format!("no norm bound for output {i}")))?;
    if !(norm > 0.0) {
        return Err(Error::param("norm_bound", format!("must be positive, got {norm}")));
    }
    let history = inputs
        .noise_bounds
        .get(i)
        .ok_or_else(|| Error::param("output", format!("no noise history for output {i}")))?;
    if history.is_empty() {
        return Ok(norm);
    }
    let l2 = history.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(norm + (inputs.lambda_max.max(0.0) / inputs.eta).sqrt() * l2)
}

/// Interval width; fresh intervals are unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Width {
    Finite(f64),
    Unbounded,
}

impl Width {
    pub fn is_unbounded(self) -> bool {
        matches!(self, Width::Unbounded)
    }

    /// Numeric value, `+inf` when unbounded.
    pub fn value(self) -> f64 {
        match self {
            Width::Finite(w) => w,
            Width::Unbounded => f64::INFINITY,
        }
    }

    pub fn below(self, threshold: f64) -> bool {
        match self {
            Width::Finite(w) => w < threshold,
            Width::Unbounded => false,
        }
    }
}

impl PartialOrd for Width {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Width::Unbounded, Width::Unbounded) => Some(Ordering::Equal),
            (Width::Unbounded, Width::Finite(_)) => Some(Ordering::Greater),
            (Width::Finite(_), Width::Unbounded) => Some(Ordering::Less),
            (Width::Finite(a), Width::Finite(b)) => a.partial_cmp(b),
        }
    }
}

/// What to do when an intersection comes out empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapsePolicy {
    #[default]
    Strict,
    /// Replace the collapsed interval with the fresh `[mu +- beta sigma]`.
    Reset,
}

/// Per-output, per-point intervals `C_{i,t}(a)`. `None` bounds are unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceState {
    n_outputs: usize,
    n_points: usize,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl ConfidenceState {
    pub fn new(n_outputs: usize, n_points: usize) -> Self {
        Self {
            n_outputs,
            n_points,
            lower: vec![None; n_outputs * n_points],
            upper: vec![None; n_outputs * n_points],
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    fn at(&self, i: usize, a: usize) -> usize {
        i * self.n_points + a
    }

    pub fn lower(&self, i: usize, a: usize) -> Option<f64> {
        self.lower[self.at(i, a)]
    }

    pub fn upper(&self, i: usize, a: usize) -> Option<f64> {
        self.upper[self.at(i, a)]
    }

    /// Lower bound with `-inf` standing in for unbounded.
    pub fn lower_value(&self, i: usize, a: usize) -> f64 {
        self.lower(i, a).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper_value(&self, i: usize, a: usize) -> f64 {
        self.upper(i, a).unwrap_or(f64::INFINITY)
    }

    pub fn width(&self, i: usize, a: usize) -> Width {
        match (self.lower(i, a), self.upper(i, a)) {
            (Some(l), Some(u)) => Width::Finite((u - l).max(0.0)),
            _ => Width::Unbounded,
        }
    }

    /// `max_i w_{i,t}(a)`.
    pub fn max_width(&self, a: usize) -> Width {
        (0..self.n_outputs)
            .map(|i| self.width(i, a))
            .fold(Width::Finite(0.0), |acc, w| if w > acc { w } else { acc })
    }

    /// Sets one interval directly. Used to build fixtures.
    pub fn set(&mut self, i: usize, a: usize, lower: Option<f64>, upper: Option<f64>) {
        let k = self.at(i, a);
        self.lower[k] = lower;
        self.upper[k] = upper;
    }

    /// Intersects every interval with `[mu_i(a) +- beta_i sigma(a)]`.
    ///
    /// `means[i][a]`, `std[a]` and `betas[i]` describe the current posterior.
    /// Returns the new state and the number of intervals that collapsed and
    /// were reset (always zero under [`CollapsePolicy::Strict`]).
    pub fn updated(
        &self,
        means: &[Vec<f64>],
        std: &[f64],
        betas: &[f64],
        policy: CollapsePolicy,
    ) -> Result<(ConfidenceState, usize)> {
        if means.len() != self.n_outputs || betas.len() != self.n_outputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_outputs,
                got: means.len().min(betas.len()),
            });
        }
        if std.len() != self.n_points {
            return Err(Error::DimensionMismatch {
                expected: self.n_points,
                got: std.len(),
            });
        }
        if let Some(s) = std.iter().find(|s| !(**s >= 0.0)) {
            return Err(Error::param(
                "std",
                format!("posterior std must be non-negative, got {s}"),
            ));
        }
        let mut next = self.clone();
        let mut resets = 0;
        for (i, (mu, &beta)) in means.iter().zip(betas).enumerate() {
            if mu.len() != self.n_points {
                return Err(Error::DimensionMismatch {
                    expected: self.n_points,
                    got: mu.len(),
                });
            }
            for a in 0..self.n_points {
                let half = beta * std[a];
                let (lo, hi) = (mu[a] - half, mu[a] + half);
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::NonFinite("confidence interval"));
                }
                let k = self.at(i, a);
                let new_lo = self.lower[k].map_or(lo, |l| l.max(lo));
                let new_hi = self.upper[k].map_or(hi, |u| u.min(hi));
                if new_lo > new_hi + COLLAPSE_TOLERANCE {
                    match policy {
                        CollapsePolicy::Strict => {
                            return Err(Error::ConfidenceCollapse {
                                output: i,
                                point: a,
                                lower: new_lo,
                                upper: new_hi,
                            })
                        }
                        CollapsePolicy::Reset => {
                            warn!(
                                "confidence interval collapsed for output {i} at point {a} \
                                 ({new_lo} > {new_hi}); resetting to the current posterior band"
                            );
                            next.lower[k] = Some(lo);
                            next.upper[k] = Some(hi);
                            resets += 1;
                            continue;
                        }
                    }
                }
                next.lower[k] = Some(new_lo);
                next.upper[k] = Some(new_hi);
            }
        }
        Ok((next, resets))
    }

    /// `true` when every interval of `self` lies inside the matching one of
    /// `outer` (exact comparison).
    pub fn nested_in(&self, outer: &ConfidenceState) -> bool {
        self.lower.len() == outer.lower.len()
            && self.lower.iter().zip(&outer.lower).all(|(l, o)| match (l, o) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(l), Some(o)) => l >= o,
            })
            && self.upper.iter().zip(&outer.upper).all(|(u, o)| match (u, o) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(u), Some(o)) => u <= o,
            })
    }
}
