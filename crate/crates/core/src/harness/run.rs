use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProblemLayout, SafeSeedSpec};
use crate::error::{Error, Result};
use crate::kernel::Domain;
use crate::safebo::{reachable_set_diagnostic, BetaMode, OptimizerConfig, OptimizerState, SafeProblem, Status};
use crate::synth::{quantile_threshold, sample_rkhs_function, RkhsFunction};

/// rng stream used for ground-truth sampling; noise uses `NOISE_STREAM`.
const TRUTH_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Synthetic outputs for one seed. Output 0 is the reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub functions: Vec<RkhsFunction>,
    pub constraints: Vec<usize>,
    pub thresholds: Vec<f64>,
}

impl GroundTruth {
    pub fn generate(config: &ExperimentConfig, domain: &Domain, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TRUTH_STREAM);
        let n = config.layout.n_outputs();
        let functions = (0..n)
            .map(|_| sample_rkhs_function(&config.kernel, domain, config.n_centers(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let (constraints, thresholds) = match config.layout {
            ProblemLayout::RewardAsConstraint => {
                let tau = quantile_threshold(&functions[0].evaluate_domain(domain), config.safety_quantile)?;
                (vec![0], vec![tau])
            }
            ProblemLayout::IndependentConstraint => {
                let tau = quantile_threshold(&functions[1].evaluate_domain(domain), config.safety_quantile)?;
                (vec![1], vec![0.0, tau])
            }
        };
        Ok(Self {
            functions,
            constraints,
            thresholds,
        })
    }

    pub fn evaluate(&self, a: &[f64]) -> Vec<f64> {
        self.functions.iter().map(|f| f.evaluate(a)).collect()
    }

    /// Smallest constraint margin `min_i h_i(a) - tau_i`.
    pub fn margin(&self, a: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|&i| self.functions[i].evaluate(a) - self.thresholds[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violates(&self, a: &[f64]) -> bool {
        self.margin(a) < 0.0
    }

    /// Default seed: the grid point closest to the domain center among those
    /// whose margin is at least half of the best margin on the grid.
    pub fn auto_safe_seed(&self, domain: &Domain) -> Result<usize> {
        let margins: Vec<f64> = domain.points().iter().map(|a| self.margin(a)).collect();
        let best = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(best >= 0.0) {
            return Err(Error::Config("no grid point satisfies the constraints".into()));
        }
        let center: Vec<f64> = domain.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut choice: Option<(usize, f64)> = None;
        for (s, p) in domain.points().iter().enumerate() {
            if margins[s] < 0.5 * best {
                continue;
            }
            let d = crate::kernel::euclidean(p, &center);
            if choice.is_none_or(|(_, cd)| d < cd) {
                choice = Some((s, d));
            }
        }
        Ok(choice.expect("best point qualifies").0)
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub index: usize,
    pub point: Vec<f64>,
    pub y: Vec<f64>,
    pub eps_bar: Option<Vec<f64>>,
    pub scenarios: u64,
    pub beta: Vec<f64>,
    pub safe_set_size: usize,
    pub max_width: f64,
    pub best_lower: f64,
    pub violation: bool,
}

impl TraceRow {
    pub fn beta_bar(&self) -> f64 {
        self.beta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub beta_mode: BetaMode,
    pub dim: usize,
    pub n_outputs: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub beta_mode: BetaMode,
    pub status: Status,
    pub iterations: usize,
    pub experiments: usize,
    pub violations: usize,
    pub collapses: usize,
    pub safe_seed: Vec<usize>,
    pub final_safe_set_size: usize,
    pub reachable_set_size: usize,
    pub best_index: usize,
    pub best_point: Vec<f64>,
    /// True reward at the recommended parameter.
    pub final_best_reward: f64,
    /// Best true reward over the domain, for reference.
    pub global_best_reward: f64,
    pub beta_bar: Vec<f64>,
    pub best_lower: Vec<f64>,
    /// Running maximum of the true reward over evaluated points.
    pub best_observed_reward: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace: RunTrace,
    pub summary: RunSummary,
    pub truth: GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAggregate {
    pub beta_mode: BetaMode,
    pub runs: usize,
    pub experiments: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub seeds_with_violation: usize,
    pub mean_final_best_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<ModeAggregate>,
}

impl ExperimentResult {
    pub fn aggregate_for(&self, mode: &BetaMode) -> Option<&ModeAggregate> {
        self.aggregate.iter().find(|a| &a.beta_mode == mode)
    }
}

/// Optimizer settings derived from an experiment config and a ground truth.
pub fn optimizer_config(
    config: &ExperimentConfig,
    truth: &GroundTruth,
    domain: &Domain,
    mode: BetaMode,
) -> Result<OptimizerConfig> {
    let safe_seed = match &config.safe_seed {
        SafeSeedSpec::Indices(ix) => ix.clone(),
        SafeSeedSpec::Keyword(_) => vec![truth.auto_safe_seed(domain)?],
    };
    let n = truth.functions.len();
    Ok(OptimizerConfig {
        norm_bounds: vec![config.norm_bound; n],
        constraints: truth.constraints.clone(),
        thresholds: truth.thresholds.clone(),
        eta: config.eta,
        delta: config.delta,
        nu: config.nu,
        kappa: config.kappa,
        max_iterations: config.max_iterations,
        safe_seed,
        beta_mode: mode,
        collapse: config.collapse,
        retain_scenarios: false,
    })
}

/// Runs one `(seed, mode)` pair and keeps every intermediate state when
/// `keep_states` is set (used by invariant checks).
pub fn run_single_with_states(
    config: &ExperimentConfig,
    seed: u64,
    mode: BetaMode,
    keep_states: bool,
) -> Result<(RunResult, Vec<OptimizerState>)> {
    let domain = config.domain.build()?;
    let truth = GroundTruth::generate(config, &domain, seed)?;
    let opt = optimizer_config(config, &truth, &domain, mode)?;
    let problem = Arc::new(SafeProblem::new(domain, config.kernel)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);

    let mut state = OptimizerState::new(Arc::clone(&problem), &opt)?;
    let mut states = Vec::new();
    if keep_states {
        states.push(state.clone());
    }
    let mut oracle = |a: &[f64]| Ok(truth.evaluate(a));
    while state.is_running() {
        state = state.step(&opt, &mut oracle, &config.noise, &mut rng)?;
        if keep_states {
            states.push(state.clone());
        }
    }

    let rows: Vec<TraceRow> = state
        .history()
        .iter()
        .map(|o| TraceRow {
            t: o.iteration,
            index: o.index,
            point: o.point.clone(),
            y: o.y.clone(),
            eps_bar: o.eps_bar.clone(),
            scenarios: o.scenarios,
            beta: o.beta.clone(),
            safe_set_size: o.safe_set_size,
            max_width: o.max_width.value(),
            best_lower: o.best_lower,
            violation: truth.violates(&o.point),
        })
        .collect();

    let domain = &problem.domain;
    let best_index = state.best_parameter();
    let rewards: Vec<f64> = truth.functions[0].evaluate_domain(domain);
    let mut running = f64::NEG_INFINITY;
    let best_observed_reward = rows
        .iter()
        .map(|r| {
            running = running.max(rewards[r.index]);
            running
        })
        .collect();
    let grid_truth: Vec<Vec<f64>> = truth.functions.iter().map(|f| f.evaluate_domain(domain)).collect();
    let reachable = reachable_set_diagnostic(&opt, &problem.metric, &grid_truth, config.delta);

    let summary = RunSummary {
        seed,
        beta_mode: mode,
        status: state.status(),
        iterations: state.iteration(),
        experiments: rows.len(),
        violations: rows.iter().filter(|r| r.violation).count(),
        collapses: state.collapses(),
        safe_seed: opt.safe_seed.clone(),
        final_safe_set_size: state.safe_set().len(),
        reachable_set_size: reachable.len(),
        best_index,
        best_point: domain.point(best_index).to_vec(),
        final_best_reward: rewards[best_index],
        global_best_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        beta_bar: rows.iter().map(TraceRow::beta_bar).collect(),
        best_lower: rows.iter().map(|r| r.best_lower).collect(),
        best_observed_reward,
    };
    let trace = RunTrace {
        seed,
        beta_mode: mode,
        dim: domain.dim(),
        n_outputs: truth.functions.len(),
        rows,
    };
    Ok((RunResult { trace, summary, truth }, states))
}

pub fn run_single(config: &ExperimentConfig, seed: u64, mode: BetaMode) -> Result<RunResult> {
    Ok(run_single_with_states(config, seed, mode, false)?.0)
}

/// Executes every `(seed, beta mode)` pair, seed-parallel on `jobs` threads
/// (0 uses all cores). Results are ordered by mode, then seed.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let pairs: Vec<(BetaMode, u64)> = config
        .beta_modes
        .iter()
        .flat_map(|&m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(mode, seed)| run_single(config, seed, mode))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = config
        .beta_modes
        .iter()
        .map(|mode| {
            let of_mode: Vec<&RunResult> = runs.iter().filter(|r| &r.summary.beta_mode == mode).collect();
            let experiments: usize = of_mode.iter().map(|r| r.summary.experiments).sum();
            let violations: usize = of_mode.iter().map(|r| r.summary.violations).sum();
            ModeAggregate {
                beta_mode: *mode,
                runs: of_mode.len(),
                experiments,
                violations,
                violation_rate: if experiments == 0 {
                    0.0
                } else {
                    violations as f64 / experiments as f64
                },
                seeds_with_violation: of_mode.iter().filter(|r| r.summary.violations > 0).count(),
                mean_final_best_reward: of_mode.iter().map(|r| r.summary.final_best_reward).sum::<f64>()
                    / of_mode.len().max(1) as f64,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        runs,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;

    fn small() -> ExperimentConfig {
        let mut c = preset("paper-synthetic-1").unwrap();
        c.seeds = vec![0, 1];
        c.max_iterations = 15;
        c
    }

    #[test]
    fn auto_seed_is_safe() {
        let c = small();
        let domain = c.domain.build().unwrap();
        for seed in 0..5 {
            let truth = GroundTruth::generate(&c, &domain, seed).unwrap();
            let s = truth.auto_safe_seed(&domain).unwrap();
            assert!(truth.margin(domain.point(s)) >= 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic_and_ordered() {
        let c = small();
        let a = run_experiment(&c, 2).unwrap();
        let b = run_experiment(&c, 1).unwrap();
        assert_eq!(a, b);
        let order: Vec<(&str, u64)> = a
            .runs
            .iter()
            .map(|r| (r.summary.beta_mode.label(), r.summary.seed))
            .collect();
        assert_eq!(
            order,
            [("scenario", 0), ("scenario", 1), ("classic", 0), ("classic", 1)]
        );
        for r in &a.runs {
            assert!(r.trace.rows.len() <= 15);
            assert_eq!(r.summary.beta_bar.len(), r.trace.rows.len());
        }
    }

    #[test]
    fn independent_layout_has_two_outputs() {
        let mut c = small();
        c.layout = ProblemLayout::IndependentConstraint;
        c.seeds = vec![3];
        c.beta_modes = vec![BetaMode::Scenario];
        let r = run_single(&c, 3, BetaMode::Scenario).unwrap();
        assert_eq!(r.truth.functions.len(), 2);
        assert_eq!(r.truth.constraints, vec![1]);
        assert!(r.trace.rows.iter().all(|row| row.y.len() == 2));
    }
}
