//! C ABI for the `scenopt` optimizer.
//!
//! Every entry point returns a [`ScenoptStatus`]. On failure the message is
//! available from [`scenopt_last_error`] on the same thread. Optimizer
//! handles are opaque and must be released with [`scenopt_optimizer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenopt::harness::{run_experiment, write_experiment, DomainSpec, ExperimentConfig};
use scenopt::noise::{iteration_confidence, min_scenarios, NoiseModel, ScenarioSchedule};
use scenopt::{Error, Kernel, OptimizerConfig, OptimizerState, SafeProblem, Status};
use serde::Deserialize;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    ConfidenceCollapse = 4,
    EmptyAcquisition = 5,
    Numerical = 6,
    Io = 7,
    Callback = 8,
    Terminated = 9,
    Panic = 10,
}

/// Optimizer progress as reported by [`scenopt_optimizer_status`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenoptRunState {
    Running = 0,
    Converged = 1,
    MaxIterations = 2,
    Stalled = 3,
}

/// Measures the system at `point` (length `dim`) and writes `n_outputs`
/// noisy values to `out`. Returns 0 on success.
pub type ScenoptMeasureFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        point: *const f64,
        dim: usize,
        out: *mut f64,
        n_outputs: usize,
    ) -> c_int,
>;

/// Opaque optimizer handle.
pub struct ScenoptOptimizer {
    state: OptimizerState,
    config: OptimizerConfig,
    noise: NoiseModel,
    rng: ChaCha8Rng,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSpec {
    domain: DomainSpec,
    kernel: Kernel,
    /// Model used to draw the scenario noise bounds.
    noise: NoiseModel,
    optimizer: OptimizerConfig,
    #[serde(default)]
    rng_seed: u64,
}

struct Failure {
    status: ScenoptStatus,
    message: String,
}

impl Failure {
    fn new(status: ScenoptStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::Json(_) => ScenoptStatus::Config,
            Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } => ScenoptStatus::InvalidArgument,
            Error::ConfidenceCollapse { .. } => ScenoptStatus::ConfidenceCollapse,
            Error::EmptyAcquisitionSet => ScenoptStatus::EmptyAcquisition,
            Error::Terminated => ScenoptStatus::Terminated,
            Error::Io(_) | Error::Csv(_) => ScenoptStatus::Io,
            Error::Objective(_) => ScenoptStatus::Callback,
            _ => ScenoptStatus::Numerical,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScenoptStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure::new(ScenoptStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => ScenoptStatus::Ok,
        Err(f) => {
            set_last_error(&f.message);
            f.status
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(ScenoptStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(ScenoptStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a>(h: *const ScenoptOptimizer) -> Result<&'a ScenoptOptimizer, Failure> {
    non_null(h, "optimizer")?;
    Ok(&*h)
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scenopt_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Minimal scenario count `m` for violation level `nu`, per-iteration
/// confidence `kappa_t` and `n_outputs` outputs.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_min_scenarios(
    nu: f64,
    kappa_t: f64,
    n_outputs: usize,
    out: *mut u64,
) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        let schedule = ScenarioSchedule::new(nu, 0.5, n_outputs)?;
        *out = min_scenarios(&schedule, kappa_t)?;
        Ok(())
    })
}

/// `kappa_t = 6 kappa / (pi^2 t^2)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_iteration_confidence(kappa: f64, t: u64, out: *mut f64) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = iteration_confidence(kappa, t)?;
        Ok(())
    })
}

/// Builds an optimizer from a JSON document with keys `domain`, `kernel`,
/// `noise`, `optimizer` and optional `rng_seed`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_new(json: *const c_char, out: *mut *mut ScenoptOptimizer) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let spec: OptimizerSpec =
            serde_json::from_str(text).map_err(|e| Failure::new(ScenoptStatus::Config, e.to_string()))?;
        spec.noise.validate()?;
        let problem = Arc::new(SafeProblem::new(spec.domain.build()?, spec.kernel)?);
        let state = OptimizerState::new(problem, &spec.optimizer)?;
        let boxed = Box::new(ScenoptOptimizer {
            state,
            config: spec.optimizer,
            noise: spec.noise,
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
        });
        *out = Box::into_raw(boxed);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from [`scenopt_optimizer_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_free(h: *mut ScenoptOptimizer) {
    if !h.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(h))));
    }
}

/// Runs one iteration: selects a point, calls `measure` on it and updates
/// the model. Writes the selected grid index to `out_index` when an
/// experiment was executed, or `SIZE_MAX` if the optimizer stopped instead.
///
/// # Safety
/// `h` must be a live handle, `measure` must honour its contract and
/// `out_index` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_step(
    h: *mut ScenoptOptimizer,
    measure: ScenoptMeasureFn,
    user_data: *mut c_void,
    out_index: *mut usize,
) -> ScenoptStatus {
    guard(|| {
        non_null(h, "optimizer")?;
        let measure = measure.ok_or_else(|| Failure::new(ScenoptStatus::NullPointer, "measure is null"))?;
        let opt = &mut *h;
        let n_outputs = opt.config.n_outputs();
        let mut callback = |a: &[f64]| {
            let mut y = vec![0.0; n_outputs];
            let rc = measure(user_data, a.as_ptr(), a.len(), y.as_mut_ptr(), n_outputs);
            if rc != 0 {
                return Err(Error::Objective(format!("measure callback returned {rc}")));
            }
            Ok(y)
        };
        let before = opt.state.history().len();
        let next = opt
            .state
            .step_observed(&opt.config, &mut callback, &opt.noise, &mut opt.rng)?;
        opt.state = next;
        if !out_index.is_null() {
            *out_index = match opt.state.history().get(before) {
                Some(o) => o.index,
                None => usize::MAX,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_status(
    h: *const ScenoptOptimizer,
    out: *mut ScenoptRunState,
) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = match handle(h)?.state.status() {
            Status::Running => ScenoptRunState::Running,
            Status::Converged { .. } => ScenoptRunState::Converged,
            Status::MaxIterations => ScenoptRunState::MaxIterations,
            Status::Stalled => ScenoptRunState::Stalled,
        };
        Ok(())
    })
}

/// Grid index with the largest reward lower bound in the safe set.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_best_parameter(
    h: *const ScenoptOptimizer,
    out: *mut usize,
) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = handle(h)?.state.best_parameter();
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_safe_set_size(h: *const ScenoptOptimizer, out: *mut usize) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = handle(h)?.state.safe_set().len();
        Ok(())
    })
}

/// Number of experiments executed so far.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_experiments(h: *const ScenoptOptimizer, out: *mut usize) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = handle(h)?.state.history().len();
        Ok(())
    })
}

/// Grid size, parameter dimension and output count.
///
/// # Safety
/// `h` must be a live handle; each out pointer must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_shape(
    h: *const ScenoptOptimizer,
    n_points: *mut usize,
    dim: *mut usize,
    n_outputs: *mut usize,
) -> ScenoptStatus {
    guard(|| {
        let opt = handle(h)?;
        let domain = &opt.state.problem().domain;
        if !n_points.is_null() {
            *n_points = domain.len();
        }
        if !dim.is_null() {
            *dim = domain.dim();
        }
        if !n_outputs.is_null() {
            *n_outputs = opt.config.n_outputs();
        }
        Ok(())
    })
}

/// Copies grid point `index` into `out` (capacity `len`, at least the
/// parameter dimension).
///
/// # Safety
/// `h` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn scenopt_optimizer_grid_point(
    h: *const ScenoptOptimizer,
    index: usize,
    out: *mut f64,
    len: usize,
) -> ScenoptStatus {
    guard(|| {
        non_null(out, "out")?;
        let domain = &handle(h)?.state.problem().domain;
        if index >= domain.len() {
            return Err(Failure::new(
                ScenoptStatus::InvalidArgument,
                format!("index {index} outside the {}-point grid", domain.len()),
            ));
        }
        let p = domain.point(index);
        if len < p.len() {
            return Err(Failure::new(
                ScenoptStatus::InvalidArgument,
                format!("buffer holds {len} values, point has {}", p.len()),
            ));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), out, p.len());
        Ok(())
    })
}

/// Runs a full experiment config (the CLI's JSON format) and writes traces
/// and `summary.json` into `out_dir`.
///
/// # Safety
/// Both arguments must be nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn scenopt_run_experiment(config_json: *const c_char, out_dir: *const c_char) -> ScenoptStatus {
    guard(|| {
        let config = ExperimentConfig::from_json(read_str(config_json, "config_json")?)?;
        let dir = read_str(out_dir, "out_dir")?;
        let result = run_experiment(&config, 1)?;
        write_experiment(&result, Path::new(dir))?;
        Ok(())
    })
}
