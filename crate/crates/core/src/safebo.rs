//! Safe exploration on a finite domain.
//!
//! Each step refreshes the GP posterior, intersects the confidence intervals,
//! grows the safe set through the kernel-metric continuity bound and samples
//! the most uncertain point among the potential maximizers and expanders.
//! Output 0 is the reward; `constraints` lists the outputs that must stay at
//! or above their safety threshold.

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::confidence::{beta, BetaInputs, CollapsePolicy, ConfidenceState, Width};
use crate::error::{Error, Result};
use crate::gp::{BatchPosterior, SurrogateModel};
use crate::kernel::{Domain, Kernel, MetricTable};
use crate::noise::{scenario_bound, NoiseSource, ScenarioSchedule};

/// Measurement callback: point in, one noisy value per output out.
pub type Experiment<'a> = dyn FnMut(&[f64], &mut dyn RngCore) -> Result<Vec<f64>> + 'a;

/// How the confidence multiplier is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaMode {
    /// Scenario noise bounds and `lambda_max(Xi_t)`.
    Scenario,
    /// Homoscedastic `R`-sub-Gaussian baseline driven by the log-det
    /// information gain.
    ClassicSubgaussian { r: f64 },
}

impl BetaMode {
    pub fn label(&self) -> &'static str {
        match self {
            BetaMode::Scenario => "scenario",
            BetaMode::ClassicSubgaussian { .. } => "classic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// `||h_i||_k` per output; its length fixes `|I|`.
    pub norm_bounds: Vec<f64>,
    /// Outputs treated as safety constraints.
    pub constraints: Vec<usize>,
    /// Per-output safety threshold; constraint `i` requires `h_i(a) >= thresholds[i]`.
    pub thresholds: Vec<f64>,
    pub eta: f64,
    pub delta: f64,
    pub nu: f64,
    pub kappa: f64,
    pub max_iterations: usize,
    pub safe_seed: Vec<usize>,
    pub beta_mode: BetaMode,
    #[serde(default)]
    pub collapse: CollapsePolicy,
    #[serde(default)]
    pub retain_scenarios: bool,
}

impl OptimizerConfig {
    pub fn n_outputs(&self) -> usize {
        self.norm_bounds.len()
    }

    pub fn schedule(&self) -> Result<ScenarioSchedule> {
        ScenarioSchedule::new(self.nu, self.kappa, self.n_outputs())
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        let n = self.n_outputs();
        if n == 0 {
            return Err(Error::param("norm_bounds", "at least one output is required"));
        }
        if let Some(b) = self.norm_bounds.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::param("norm_bounds", format!("must be positive, got {b}")));
        }
        if self.thresholds.len() != n {
            return Err(Error::param(
                "thresholds",
                format!("expected {n} entries, got {}", self.thresholds.len()),
            ));
        }
        if self.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("thresholds"));
        }
        if let Some(c) = self.constraints.iter().find(|c| **c >= n) {
            return Err(Error::param("constraints", format!("output {c} does not exist")));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::param("delta", format!("must be positive, got {}", self.delta)));
        }
        self.schedule()?;
        if self.safe_seed.is_empty() {
            return Err(Error::param("safe_seed", "the initial safe set must be non-empty"));
        }
        if let Some(s) = self.safe_seed.iter().find(|s| **s >= n_points) {
            return Err(Error::param("safe_seed", format!("grid index {s} out of range")));
        }
        if let BetaMode::ClassicSubgaussian { r } = self.beta_mode {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::param("r", format!("must be non-negative, got {r}")));
            }
        }
        Ok(())
    }
}

/// Domain, kernel and the cached pairwise kernel metric.
#[derive(Debug)]
pub struct SafeProblem {
    pub domain: Domain,
    pub kernel: Kernel,
    pub metric: MetricTable,
}

impl SafeProblem {
    pub fn new(domain: Domain, kernel: Kernel) -> Result<Self> {
        let metric = MetricTable::new(&kernel, &domain)?;
        Ok(Self { domain, kernel, metric })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Running,
    /// The next candidate's widest interval fell below `delta`.
    Converged {
        candidate: usize,
        width: f64,
    },
    MaxIterations,
    /// No point qualified as maximizer or expander.
    Stalled,
}

/// One executed experiment together with the quantities that led to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub iteration: usize,
    pub index: usize,
    pub point: Vec<f64>,
    pub y: Vec<f64>,
    /// Scenario bound attached to this measurement (scenario mode only).
    pub eps_bar: Option<Vec<f64>>,
    pub scenarios: u64,
    pub beta: Vec<f64>,
    pub safe_set_size: usize,
    pub max_width: Width,
    pub best_index: usize,
    pub best_lower: f64,
    pub collapses: usize,
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    problem: Arc<SafeProblem>,
    model: SurrogateModel,
    intervals: ConfidenceState,
    safe: Vec<usize>,
    maximizers: Vec<usize>,
    expanders: Vec<usize>,
    expander_counts: Vec<usize>,
    history: Vec<Observation>,
    noise_bounds: Vec<Vec<f64>>,
    betas: Vec<f64>,
    lambda_max: f64,
    posterior: Option<BatchPosterior>,
    iteration: usize,
    collapses: usize,
    status: Status,
}

impl OptimizerState {
    pub fn new(problem: Arc<SafeProblem>, config: &OptimizerConfig) -> Result<Self> {
        config.validate(problem.domain.len())?;
        let n_outputs = config.n_outputs();
        let model = SurrogateModel::new(problem.kernel, config.eta, n_outputs)?;
        let mut safe = config.safe_seed.clone();
        safe.sort_unstable();
        safe.dedup();
        let intervals = ConfidenceState::new(n_outputs, problem.domain.len());
        let status = if config.max_iterations == 0 {
            Status::MaxIterations
        } else {
            Status::Running
        };
        Ok(Self {
            problem,
            model,
            intervals,
            safe,
            maximizers: Vec::new(),
            expanders: Vec::new(),
            expander_counts: Vec::new(),
            history: Vec::new(),
            noise_bounds: vec![Vec::new(); n_outputs],
            betas: config.norm_bounds.clone(),
            lambda_max: 0.0,
            posterior: None,
            iteration: 0,
            collapses: 0,
            status,
        })
    }

    pub fn problem(&self) -> &Arc<SafeProblem> {
        &self.problem
    }

    pub fn model(&self) -> &SurrogateModel {
        &self.model
    }

    pub fn intervals(&self) -> &ConfidenceState {
        &self.intervals
    }

    /// `S_t` as ascending grid indices.
    pub fn safe_set(&self) -> &[usize] {
        &self.safe
    }

    pub fn maximizers(&self) -> &[usize] {
        &self.maximizers
    }

    pub fn expanders(&self) -> &[usize] {
        &self.expanders
    }

    /// `e_t(a)` for each member of the safe set, aligned with [`Self::safe_set`].
    pub fn expander_counts(&self) -> &[usize] {
        &self.expander_counts
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// `beta_{i,t}` of the most recent iteration.
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn posterior(&self) -> Option<&BatchPosterior> {
        self.posterior.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn collapses(&self) -> usize {
        self.collapses
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    /// `argmax_{a in S_t} l_{0,t}(a)`.
    pub fn best_parameter(&self) -> usize {
        best_parameter(&self.intervals, &self.safe)
    }

    /// One loop body; `oracle` returns the noiseless `h(a)` and the step adds
    /// noise drawn from `noise`.
    pub fn step(
        &self,
        config: &OptimizerConfig,
        oracle: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
        noise: &dyn NoiseSource,
        rng: &mut dyn RngCore,
    ) -> Result<OptimizerState> {
        self.advance(config, noise, rng, &mut |a, rng| {
            let h = oracle(a)?;
            Ok(h.iter().enumerate().map(|(i, v)| v + noise.draw(a, i, rng)).collect())
        })
    }

    /// One loop body where `measure` returns the noisy observation directly;
    /// `noise` only feeds the scenario bounds.
    pub fn step_observed(
        &self,
        config: &OptimizerConfig,
        measure: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
        noise: &dyn NoiseSource,
        rng: &mut dyn RngCore,
    ) -> Result<OptimizerState> {
        self.advance(config, noise, rng, &mut |a, _| measure(a))
    }

    fn advance(
        &self,
        config: &OptimizerConfig,
        noise: &dyn NoiseSource,
        rng: &mut dyn RngCore,
        experiment: &mut Experiment<'_>,
    ) -> Result<OptimizerState> {
        if !self.is_running() {
            return Err(Error::Terminated);
        }
        let problem = Arc::clone(&self.problem);
        let mut next = self.clone();
        next.iteration += 1;

        let posterior = self.model.posterior_batch(problem.domain.points())?;
        next.betas = match config.beta_mode {
            BetaMode::Scenario => {
                next.lambda_max = self.lambda_max.max(self.model.xi_lambda_max()?);
                let inputs = BetaInputs {
                    norm_bounds: &config.norm_bounds,
                    eta: config.eta,
                    lambda_max: next.lambda_max,
                    noise_bounds: &self.noise_bounds,
                };
                (0..config.n_outputs())
                    .map(|i| beta(&inputs, i))
                    .collect::<Result<_>>()?
            }
            BetaMode::ClassicSubgaussian { r } => {
                let gain = self.model.log_det_information_gain()?;
                config
                    .norm_bounds
                    .iter()
                    .map(|&b| classic_beta(b, r, gain, config.nu))
                    .collect()
            }
        };
        let (intervals, resets) =
            self.intervals
                .updated(&posterior.means, &posterior.std, &next.betas, config.collapse)?;
        next.intervals = intervals;
        next.collapses += resets;

        if next.iteration > 1 {
            next.safe = safe_set(&next.intervals, &self.safe, &problem.metric, config);
        }
        next.maximizers = maximizers(&next.intervals, &next.safe);
        let exp = expanders(&next.intervals, &next.safe, &problem.metric, config);
        next.expanders = exp.members;
        next.expander_counts = exp.counts;

        let candidates = union_sorted(&next.maximizers, &next.expanders);
        let chosen = match acquire(&next.intervals, &candidates, &posterior.std) {
            Ok(c) => c,
            Err(Error::EmptyAcquisitionSet) => {
                next.status = Status::Stalled;
                next.posterior = Some(posterior);
                return Ok(next);
            }
            Err(e) => return Err(e),
        };
        let width = next.intervals.max_width(chosen);
        if width.below(config.delta) {
            next.status = Status::Converged {
                candidate: chosen,
                width: width.value(),
            };
            next.posterior = Some(posterior);
            return Ok(next);
        }

        let point = problem.domain.point(chosen).to_vec();
        let measurement = self.history.len() as u64 + 1;
        let (eps_bar, scenarios) = match config.beta_mode {
            BetaMode::Scenario => {
                let bound = scenario_bound(
                    noise,
                    &config.schedule()?,
                    measurement,
                    &point,
                    rng,
                    config.retain_scenarios,
                )?;
                (Some(bound.eps_bar), bound.scenarios)
            }
            BetaMode::ClassicSubgaussian { .. } => (None, 0),
        };
        let y = experiment(&point, rng)?;
        if y.len() != config.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: config.n_outputs(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Objective(format!(
                "non-finite measurement at grid point {chosen}"
            )));
        }
        next.model = self.model.with_observation(&point, &y)?;
        if let Some(eps) = &eps_bar {
            for (hist, e) in next.noise_bounds.iter_mut().zip(eps) {
                hist.push(*e);
            }
        }
        let best_index = next.best_parameter();
        next.history.push(Observation {
            iteration: next.iteration,
            index: chosen,
            point,
            y,
            eps_bar,
            scenarios,
            beta: next.betas.clone(),
            safe_set_size: next.safe.len(),
            max_width: width,
            best_index,
            best_lower: next.intervals.lower_value(0, best_index),
            collapses: resets,
        });
        next.posterior = Some(posterior);
        if next.history.len() >= config.max_iterations {
            next.status = Status::MaxIterations;
        }
        Ok(next)
    }
}

/// Steps until the run terminates.
pub fn run(
    mut state: OptimizerState,
    config: &OptimizerConfig,
    oracle: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    noise: &dyn NoiseSource,
    rng: &mut dyn RngCore,
) -> Result<OptimizerState> {
    while state.is_running() {
        state = state.step(config, oracle, noise, rng)?;
    }
    Ok(state)
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Grows the safe set: `a'` joins when some `a` in `previous` certifies
/// `l_i(a) - tau_i - ||h_i||_k d_k(a, a') >= 0` for every constraint `i`.
/// The previous safe set is always kept.
pub fn safe_set(
    intervals: &ConfidenceState,
    previous: &[usize],
    metric: &MetricTable,
    config: &OptimizerConfig,
) -> Vec<usize> {
    let n = metric.len();
    let mut certified = vec![true; n];
    for &i in &config.constraints {
        let norm = config.norm_bounds[i];
        let tau = config.thresholds[i];
        let mut reach = vec![false; n];
        for &a in previous {
            let Some(lower) = intervals.lower(i, a) else {
                continue;
            };
            if lower - tau < 0.0 {
                continue;
            }
            for (b, r) in reach.iter_mut().enumerate() {
                if !*r && lower - tau - norm * metric.get(a, b) >= 0.0 {
                    *r = true;
                }
            }
        }
        for (c, r) in certified.iter_mut().zip(&reach) {
            *c &= *r;
        }
    }
    for &a in previous {
        certified[a] = true;
    }
    (0..n).filter(|&a| certified[a]).collect()
}

/// Points of `safe` whose reward upper bound reaches the best reward lower bound.
pub fn maximizers(intervals: &ConfidenceState, safe: &[usize]) -> Vec<usize> {
    let best = safe
        .iter()
        .map(|&a| intervals.lower_value(0, a))
        .fold(f64::NEG_INFINITY, f64::max);
    safe.iter()
        .copied()
        .filter(|&a| match intervals.upper(0, a) {
            None => true,
            Some(u) => u >= best,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expanders {
    pub members: Vec<usize>,
    /// `e_t(a)` aligned with the safe set passed in.
    pub counts: Vec<usize>,
}

/// Safe points whose optimistic constraint bounds could certify at least one
/// point outside the safe set.
pub fn expanders(
    intervals: &ConfidenceState,
    safe: &[usize],
    metric: &MetricTable,
    config: &OptimizerConfig,
) -> Expanders {
    let n = metric.len();
    let mut inside = vec![false; n];
    for &a in safe {
        inside[a] = true;
    }
    let outside: Vec<usize> = (0..n).filter(|&b| !inside[b]).collect();
    let mut members = Vec::new();
    let mut counts = Vec::with_capacity(safe.len());
    for &a in safe {
        let count = outside
            .iter()
            .filter(|&&b| {
                config.constraints.iter().any(|&i| match intervals.upper(i, a) {
                    None => true,
                    Some(u) => u - config.thresholds[i] - config.norm_bounds[i] * metric.get(a, b) >= 0.0,
                })
            })
            .count();
        if count > 0 {
            members.push(a);
        }
        counts.push(count);
    }
    Expanders { members, counts }
}

/// Most uncertain candidate by `max_i w_i(a)`. Ties go to unbounded widths,
/// then the larger posterior std, then the lowest index.
pub fn acquire(intervals: &ConfidenceState, candidates: &[usize], std: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, Width, f64)> = None;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    for a in sorted {
        let w = intervals.max_width(a);
        let s = std.get(a).copied().unwrap_or(0.0);
        let better = match best {
            None => true,
            Some((_, bw, bs)) => w > bw || (w == bw && s > bs),
        };
        if better {
            best = Some((a, w, s));
        }
    }
    best.map(|(a, _, _)| a).ok_or(Error::EmptyAcquisitionSet)
}

/// `argmax_{a in safe} l_0(a)`, lowest index on ties.
pub fn best_parameter(intervals: &ConfidenceState, safe: &[usize]) -> usize {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for &a in safe {
        let l = intervals.lower_value(0, a);
        if best.0 == usize::MAX || l > best.1 || (l == best.1 && a < best.0) {
            best = (a, l);
        }
    }
    best.0
}

/// `||h||_k + R sqrt(2 (gamma + 1 + ln(1 / nu)))`.
pub fn classic_beta(norm_bound: f64, r: f64, info_gain: f64, nu: f64) -> f64 {
    norm_bound + r * (2.0 * (info_gain + 1.0 + (1.0 / nu).ln())).sqrt()
}

/// Fixpoint of the reachability operator on the grid, using ground truth.
///
/// `truth[i][a]` is `h_i` at grid point `a`. A point joins when, for every
/// constraint, some member `a'` of the current set satisfies
/// `h_i(a') - tau_i - delta - ||h_i||_k d_k(a, a') >= 0`.
pub fn reachable_set_diagnostic(
    config: &OptimizerConfig,
    metric: &MetricTable,
    truth: &[Vec<f64>],
    delta: f64,
) -> Vec<usize> {
    let n = metric.len();
    let mut member = vec![false; n];
    for &s in &config.safe_seed {
        member[s] = true;
    }
    loop {
        let current: Vec<usize> = (0..n).filter(|&a| member[a]).collect();
        let mut grew = false;
        for (a, m) in member.iter_mut().enumerate() {
            if *m {
                continue;
            }
            let reached = config.constraints.iter().all(|&i| {
                current.iter().any(|&b| {
                    truth[i][b] - config.thresholds[i] - delta - config.norm_bounds[i] * metric.get(a, b) >= 0.0
                })
            });
            if reached {
                *m = true;
                grew = true;
            }
        }
        if !grew {
            return (0..n).filter(|&a| member[a]).collect();
        }
    }
}
