//! Noise models and scenario-based noise bounds.
//!
//! At measurement `t` the bounder draws `m_t` i.i.d. noise vectors and keeps
//! the element-wise maximum absolute value. `m_t` is the smallest count with
//!
//! ```text
//! sum_{s=0}^{|I|-1} C(m_t, s) nu^s (1 - nu)^(m_t - s) <= kappa_t,   kappa_t = 6 kappa / (pi^2 t^2)
//! ```
//!
//! so that the bound is violated with probability above `nu` at confidence
//! at most `kappa`, simultaneously over all `t`.

use std::f64::consts::PI;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper limit on `m_t`.
pub const MAX_SCENARIOS: u64 = 1_000_000_000;

/// Something the scenario bounder can sample noise from.
pub trait NoiseSource {
    /// One draw of the noise on output `output` at location `a`.
    fn draw(&self, a: &[f64], output: usize, rng: &mut dyn RngCore) -> f64;

    /// Whether the draw distribution is independent of the location.
    fn is_homoscedastic(&self) -> bool;
}

/// Location-dependent scale of a heteroscedastic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseScale {
    /// `|a| / divisor` with `|a|` the Euclidean norm.
    Norm {
        divisor: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for NoiseScale {
    fn default() -> Self {
        NoiseScale::Norm { divisor: 5.0 }
    }
}

impl NoiseScale {
    pub fn at(&self, a: &[f64]) -> f64 {
        match *self {
            NoiseScale::Norm { divisor } => a.iter().map(|x| x * x).sum::<f64>().sqrt() / divisor,
            NoiseScale::Constant { value } => value,
        }
    }
}

/// Built-in noise families. The same family applies independently to every
/// output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Zero,
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        variance: f64,
    },
    /// `N(0, R^2)`, the conservative stand-in for an `R`-sub-Gaussian family.
    SubGaussian {
        r: f64,
    },
    StudentTScaled {
        dof: f64,
        #[serde(default)]
        scale: NoiseScale,
    },
}

impl NoiseModel {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = NoiseModel::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        let m = NoiseModel::Gaussian { variance };
        m.validate()?;
        Ok(m)
    }

    pub fn sub_gaussian_surrogate(r: f64) -> Result<Self> {
        let m = NoiseModel::SubGaussian { r };
        m.validate()?;
        Ok(m)
    }

    pub fn student_t_scaled(dof: f64, scale: NoiseScale) -> Result<Self> {
        let m = NoiseModel::StudentTScaled { dof, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::param("uniform", format!("need lo < hi, got [{lo}, {hi}]")))
                }
            }
            NoiseModel::Gaussian { variance } => {
                if variance >= 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "variance",
                        format!("must be non-negative, got {variance}"),
                    ))
                }
            }
            NoiseModel::SubGaussian { r } => {
                if r >= 0.0 && r.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("r", format!("must be non-negative, got {r}")))
                }
            }
            NoiseModel::StudentTScaled { dof, scale } => {
                if !(dof > 0.0 && dof.is_finite()) {
                    return Err(Error::param("dof", format!("must be positive, got {dof}")));
                }
                match scale {
                    NoiseScale::Norm { divisor } if !(divisor > 0.0 && divisor.is_finite()) => {
                        Err(Error::param("divisor", format!("must be positive, got {divisor}")))
                    }
                    NoiseScale::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                        Err(Error::param("scale", format!("must be non-negative, got {value}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            NoiseModel::Zero => "zero",
            NoiseModel::Uniform { .. } => "uniform",
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::SubGaussian { .. } => "sub_gaussian",
            NoiseModel::StudentTScaled { .. } => "student_t_scaled",
        }
    }

    fn normal_draw(std: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    }
}

impl NoiseSource for NoiseModel {
    fn draw(&self, a: &[f64], _output: usize, rng: &mut dyn RngCore) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Uniform { lo, hi } => Uniform::new(lo, hi).sample(rng),
            NoiseModel::Gaussian { variance } => Self::normal_draw(variance.sqrt(), rng),
            NoiseModel::SubGaussian { r } => Self::normal_draw(r, rng),
            NoiseModel::StudentTScaled { dof, scale } => {
                let t: f64 = StudentT::new(dof).expect("validated dof").sample(rng);
                scale.at(a) * t
            }
        }
    }

    fn is_homoscedastic(&self) -> bool {
        match self {
            NoiseModel::StudentTScaled { scale, .. } => matches!(scale, NoiseScale::Constant { .. }),
            _ => true,
        }
    }
}

/// Catalog entry describing a built-in family and its JSON parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub family: &'static str,
    pub parameters: &'static str,
    pub homoscedastic: bool,
    pub example: NoiseModel,
}

pub fn builtin_models() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            family: "uniform",
            parameters: "lo, hi",
            homoscedastic: true,
            example: NoiseModel::Uniform { lo: -1e-3, hi: 1e-3 },
        },
        CatalogEntry {
            family: "gaussian",
            parameters: "variance",
            homoscedastic: true,
            example: NoiseModel::Gaussian { variance: 1e-4 },
        },
        CatalogEntry {
            family: "sub_gaussian",
            parameters: "r (draws from N(0, r^2))",
            homoscedastic: true,
            example: NoiseModel::SubGaussian { r: 1e-3 },
        },
        CatalogEntry {
            family: "student_t_scaled",
            parameters: "dof, scale {kind: norm, divisor} | {kind: constant, value}",
            homoscedastic: false,
            example: NoiseModel::StudentTScaled {
                dof: 10.0,
                scale: NoiseScale::default(),
            },
        },
        CatalogEntry {
            family: "zero",
            parameters: "",
            homoscedastic: true,
            example: NoiseModel::Zero,
        },
    ]
}

/// Violation level `nu`, confidence `kappa` and output count `|I|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    nu: f64,
    kappa: f64,
    n_outputs: usize,
}

impl ScenarioSchedule {
    pub fn new(nu: f64, kappa: f64, n_outputs: usize) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::param("nu", format!("must lie in (0, 1), got {nu}")));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::param("kappa", format!("must lie in (0, 1), got {kappa}")));
        }
        if n_outputs == 0 {
            return Err(Error::param("n_outputs", "at least one output is required"));
        }
        Ok(Self { nu, kappa, n_outputs })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// `m_t` for measurement `t`.
    pub fn scenarios_at(&self, t: u64) -> Result<u64> {
        min_scenarios(self, iteration_confidence(self.kappa, t)?)
    }
}

/// `kappa_t = 6 kappa / (pi^2 t^2)`; these sum to at most `kappa` over `t >= 1`.
pub fn iteration_confidence(kappa: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::param("t", "iterations are counted from 1"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0, 1), got {kappa}")));
    }
    let t = t as f64;
    Ok(6.0 * kappa / (PI * PI * t * t))
}

/// Natural log of `P[Binomial(m, nu) <= k - 1]`.
///
/// Terms follow the ratio recurrence
/// `term_{s+1} = term_s * (m - s) / (s + 1) * nu / (1 - nu)` in log space and
/// are combined with log-sum-exp, so counts in the millions stay finite.
pub fn log_binomial_lower_tail(m: u64, k: usize, nu: f64) -> f64 {
    let log_ratio = nu.ln() - (-nu).ln_1p();
    let top = (k as u64).min(m + 1);
    let mut log_term = m as f64 * (-nu).ln_1p();
    let mut terms = Vec::with_capacity(top as usize);
    for s in 0..top {
        terms.push(log_term);
        log_term += ((m - s) as f64).ln() - ((s + 1) as f64).ln() + log_ratio;
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + terms.iter().map(|l| (l - peak).exp()).sum::<f64>().ln()
}

/// Smallest `m` with `P[Binomial(m, nu) <= |I| - 1] <= kappa_t`.
pub fn min_scenarios(schedule: &ScenarioSchedule, kappa_t: f64) -> Result<u64> {
    if !(kappa_t > 0.0 && kappa_t < 1.0) {
        return Err(Error::param("kappa_t", format!("must lie in (0, 1), got {kappa_t}")));
    }
    let nu = schedule.nu;
    let k = schedule.n_outputs;
    let log_kappa = kappa_t.ln();
    let holds = |m: u64| log_binomial_lower_tail(m, k, nu) <= log_kappa;

    // (1 - nu)^m <= kappa_t is necessary for any |I|, so its solution is a
    // lower bound; step back one in case roundoff pushed it too high.
    let analytic = (log_kappa / (-nu).ln_1p()).ceil();
    if !analytic.is_finite() || analytic > MAX_SCENARIOS as f64 {
        return Err(Error::ScenarioOverflow(MAX_SCENARIOS));
    }
    let mut lo = (analytic as u64).saturating_sub(1);
    while lo > 0 && holds(lo) {
        lo -= 1;
    }
    // `lo` fails (m = 0 always fails since the s = 0 term is 1). Gallop, then
    // bisect; the tail is strictly decreasing in m.
    let mut step = 1u64;
    let mut hi = lo + 1;
    while !holds(hi) {
        lo = hi;
        hi = hi.saturating_add(step);
        step = step.saturating_mul(2);
        if lo > MAX_SCENARIOS {
            return Err(Error::ScenarioOverflow(MAX_SCENARIOS));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi > MAX_SCENARIOS {
        return Err(Error::ScenarioOverflow(MAX_SCENARIOS));
    }
    Ok(hi)
}

/// Result of one scenario bounding step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBound {
    pub t: u64,
    pub kappa_t: f64,
    pub scenarios: u64,
    /// Per-output maximum absolute scenario value.
    pub eps_bar: Vec<f64>,
    pub location: Vec<f64>,
    /// Full `m_t x |I|` scenario matrix, only when retention was requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub draws: Option<Vec<Vec<f64>>>,
}

/// Computes the bound for measurement `t` at location `a`.
pub fn scenario_bound(
    source: &dyn NoiseSource,
    schedule: &ScenarioSchedule,
    t: u64,
    a: &[f64],
    rng: &mut dyn RngCore,
    retain: bool,
) -> Result<ScenarioBound> {
    let kappa_t = iteration_confidence(schedule.kappa, t)?;
    let m = min_scenarios(schedule, kappa_t)?;
    let mut bound = scenario_bound_with_count(source, schedule.n_outputs, m, a, rng, retain)?;
    bound.t = t;
    bound.kappa_t = kappa_t;
    Ok(bound)
}

/// Element-wise max-absolute over exactly `m` scenario vectors. Scenarios are
/// drawn output by output within each vector.
pub fn scenario_bound_with_count(
    source: &dyn NoiseSource,
    n_outputs: usize,
    m: u64,
    a: &[f64],
    rng: &mut dyn RngCore,
    retain: bool,
) -> Result<ScenarioBound> {
    let mut eps_bar = vec![0.0f64; n_outputs];
    let mut draws = retain.then(Vec::new);
    for _ in 0..m {
        let mut row = Vec::with_capacity(if retain { n_outputs } else { 0 });
        for (i, bar) in eps_bar.iter_mut().enumerate() {
            let e = source.draw(a, i, rng);
            if !e.is_finite() {
                return Err(Error::NonFinite("noise scenario"));
            }
            *bar = bar.max(e.abs());
            if retain {
                row.push(e);
            }
        }
        if let Some(d) = draws.as_mut() {
            d.push(row);
        }
    }
    Ok(ScenarioBound {
        t: 0,
        kappa_t: f64::NAN,
        scenarios: m,
        eps_bar,
        location: a.to_vec(),
        draws,
    })
}
