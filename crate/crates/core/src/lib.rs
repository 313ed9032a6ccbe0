//! Safe Bayesian optimization under general observation noise.
//!
//! The noise enters only through samples: at every measurement a scenario
//! bound on the noise magnitude is computed from i.i.d. draws, and that bound
//! sizes the GP confidence intervals used to certify safety.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | Matérn-3/2 and squared-exponential kernels, kernel metric, grids |
//! | [`gp`] | Regularized GP posterior, `lambda_max(Xi_t)`, information gain |
//! | [`noise`] | Noise models, scenario counts and scenario bounds |
//! | [`confidence`] | `beta` and intersected confidence intervals |
//! | [`safebo`] | Safe set, maximizers, expanders, acquisition and the loop |
//! | [`synth`] | Random unit-norm RKHS ground truths |
//! | [`harness`] | Experiment configs, runners, reports and CSV/JSON output |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod noise;
pub mod safebo;
pub mod synth;

pub use confidence::{beta, BetaInputs, CollapsePolicy, ConfidenceState, Width};
pub use error::{Error, Result};
pub use gp::SurrogateModel;
pub use kernel::{Domain, Kernel, KernelFamily, MetricTable};
pub use noise::{
    iteration_confidence, min_scenarios, scenario_bound, NoiseModel, NoiseScale, NoiseSource, ScenarioBound,
    ScenarioSchedule,
};
pub use safebo::{BetaMode, OptimizerConfig, OptimizerState, SafeProblem, Status};
pub use synth::RkhsFunction;
