//! C ABI over the ionboost library.
//!
//! Conventions:
//! - Handles (`IbPopulation`, `IbTrainingSet`, `IbEnsemble`) are opaque;
//!   create them with `ib_*_new`/`ib_*_fit` and release them with the
//!   matching `ib_*_free`. Freeing NULL is a no-op.
//! - Fallible calls return an [`IbStatus`]; on failure the thread-local
//!   message from [`ib_last_error_message`] describes what went wrong and
//!   stays valid until the next failing call on the same thread.
//! - No call panics across the boundary; panics are caught and reported as
//!   `IB_STATUS_RUNTIME_ERROR`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ionboost::boost::{fit_adaboost, BoostConfig, BoostedEnsemble};
use ionboost::ion::{estimate_ion, MethodSpec};
use ionboost::population::{Population, PopulationKind, TrainingSet};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Status code of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RuntimeError = 3,
}

/// Population geometries; `XorK` takes its order from the `xor_k` argument
/// of `ib_population_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbPopulationKind {
    HalfPlane2d = 0,
    Parity6d = 1,
    XorK = 2,
    Ring2d = 3,
    Diagonal2d = 4,
}

/// AdaBoost hyperparameters (see the library's `BoostConfig`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IbBoostConfig {
    pub n_steps: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    pub err_clip_epsilon: f64,
}

/// Monte Carlo estimates for one (method, training set) pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IbIonReport {
    pub ion: f64,
    pub test_error: f64,
    pub bayes_disagreement: f64,
    pub training_error: f64,
    pub mc_samples: u64,
    pub half_width_95: f64,
}

/// Opaque population handle.
#[repr(C)]
pub struct IbPopulation {
    _private: [u8; 0],
}

/// Opaque training-set handle.
#[repr(C)]
pub struct IbTrainingSet {
    _private: [u8; 0],
}

/// Opaque boosted-ensemble handle.
#[repr(C)]
pub struct IbEnsemble {
    _private: [u8; 0],
}

fn pop_ref<'a>(p: *const IbPopulation) -> Option<&'a Population> {
    unsafe { (p as *const Population).as_ref() }
}

fn ts_ref<'a>(p: *const IbTrainingSet) -> Option<&'a TrainingSet> {
    unsafe { (p as *const TrainingSet).as_ref() }
}

fn ens_ref<'a>(p: *const IbEnsemble) -> Option<&'a BoostedEnsemble> {
    unsafe { (p as *const BoostedEnsemble).as_ref() }
}

fn guard<F: FnOnce() -> IbStatus>(f: F) -> IbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            set_error(msg);
            IbStatus::RuntimeError
        }
    }
}

/// Message describing the most recent failure on this thread. Never NULL;
/// empty before any failure. Valid until the next failing call on the same
/// thread.
#[no_mangle]
pub extern "C" fn ib_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ib_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a population. `xor_k` is only read for `IB_POPULATION_KIND_XOR_K`
/// and must be >= 2; `bayes_error` must lie in [0, 0.5).
#[no_mangle]
pub extern "C" fn ib_population_new(
    kind: IbPopulationKind,
    xor_k: u32,
    bayes_error: f64,
    out: *mut *mut IbPopulation,
) -> IbStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is NULL".into());
            return IbStatus::NullPointer;
        }
        let kind = match kind {
            IbPopulationKind::HalfPlane2d => PopulationKind::HalfPlane2d,
            IbPopulationKind::Parity6d => PopulationKind::Parity6d,
            IbPopulationKind::XorK => PopulationKind::XorK(xor_k as usize),
            IbPopulationKind::Ring2d => PopulationKind::Ring2d,
            IbPopulationKind::Diagonal2d => PopulationKind::Diagonal2d,
        };
        match Population::new(kind, bayes_error) {
            Ok(pop) => {
                unsafe { *out = Box::into_raw(Box::new(pop)) as *mut IbPopulation };
                IbStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                IbStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn ib_population_free(pop: *mut IbPopulation) {
    if !pop.is_null() {
        drop(unsafe { Box::from_raw(pop as *mut Population) });
    }
}

/// Input dimension of the population, or 0 for NULL.
#[no_mangle]
pub extern "C" fn ib_population_dimension(pop: *const IbPopulation) -> u32 {
    pop_ref(pop).map_or(0, |p| p.dimension() as u32)
}

/// Bayes label (+1/-1) at `x` (length `dimension`).
#[no_mangle]
pub extern "C" fn ib_population_bayes_label(
    pop: *const IbPopulation,
    x: *const f64,
    x_len: usize,
    out: *mut i32,
) -> IbStatus {
    guard(|| {
        let (Some(p), false, false) = (pop_ref(pop), x.is_null(), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        if x_len != p.dimension() {
            set_error(format!(
                "point has dimension {x_len}, population expects {}",
                p.dimension()
            ));
            return IbStatus::InvalidArgument;
        }
        let x = unsafe { std::slice::from_raw_parts(x, x_len) };
        unsafe { *out = i32::from(p.bayes_label(x)) };
        IbStatus::Ok
    })
}

/// Draw `n` labeled points (labels flipped with the population's Bayes
/// error), deterministic in `seed`.
#[no_mangle]
pub extern "C" fn ib_population_sample(
    pop: *const IbPopulation,
    n: u64,
    seed: u64,
    out: *mut *mut IbTrainingSet,
) -> IbStatus {
    guard(|| {
        let (Some(p), false) = (pop_ref(pop), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        if n == 0 {
            set_error("sample size must be >= 1".into());
            return IbStatus::InvalidArgument;
        }
        let (t, _) = p.sample(n as usize, seed);
        unsafe { *out = Box::into_raw(Box::new(t)) as *mut IbTrainingSet };
        IbStatus::Ok
    })
}

/// Replace every label with the population's Bayes label (a fresh handle).
#[no_mangle]
pub extern "C" fn ib_population_purify(
    pop: *const IbPopulation,
    ts: *const IbTrainingSet,
    out: *mut *mut IbTrainingSet,
) -> IbStatus {
    guard(|| {
        let (Some(p), Some(t), false) = (pop_ref(pop), ts_ref(ts), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        if t.dimension() != p.dimension() {
            set_error("training set and population dimensions differ".into());
            return IbStatus::InvalidArgument;
        }
        let purified = p.purify(t);
        unsafe { *out = Box::into_raw(Box::new(purified)) as *mut IbTrainingSet };
        IbStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn ib_training_set_free(ts: *mut IbTrainingSet) {
    if !ts.is_null() {
        drop(unsafe { Box::from_raw(ts as *mut TrainingSet) });
    }
}

/// Number of points, or 0 for NULL.
#[no_mangle]
pub extern "C" fn ib_training_set_len(ts: *const IbTrainingSet) -> u64 {
    ts_ref(ts).map_or(0, |t| t.len() as u64)
}

/// Feature dimension, or 0 for NULL.
#[no_mangle]
pub extern "C" fn ib_training_set_dimension(ts: *const IbTrainingSet) -> u32 {
    ts_ref(ts).map_or(0, |t| t.dimension() as u32)
}

fn boost_config(cfg: *const IbBoostConfig) -> Option<BoostConfig> {
    let c = unsafe { cfg.as_ref() }?;
    Some(BoostConfig {
        n_steps: c.n_steps as usize,
        max_depth: c.max_depth as usize,
        learning_rate: c.learning_rate,
        err_clip_epsilon: c.err_clip_epsilon,
    })
}

/// Run AdaBoost.M1 on a training set.
#[no_mangle]
pub extern "C" fn ib_adaboost_fit(
    ts: *const IbTrainingSet,
    cfg: *const IbBoostConfig,
    out: *mut *mut IbEnsemble,
) -> IbStatus {
    guard(|| {
        let (Some(t), Some(config), false) = (ts_ref(ts), boost_config(cfg), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        match fit_adaboost(t, &config) {
            Ok(ens) => {
                unsafe { *out = Box::into_raw(Box::new(ens)) as *mut IbEnsemble };
                IbStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                IbStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn ib_ensemble_free(ens: *mut IbEnsemble) {
    if !ens.is_null() {
        drop(unsafe { Box::from_raw(ens as *mut BoostedEnsemble) });
    }
}

/// Number of fitted stages (may be fewer than `n_steps` on early
/// termination), or 0 for NULL.
#[no_mangle]
pub extern "C" fn ib_ensemble_stages(ens: *const IbEnsemble) -> u64 {
    ens_ref(ens).map_or(0, |e| e.stages().len() as u64)
}

/// Ensemble margin at `x`.
#[no_mangle]
pub extern "C" fn ib_ensemble_predict_margin(
    ens: *const IbEnsemble,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> IbStatus {
    guard(|| {
        let (Some(e), false, false) = (ens_ref(ens), x.is_null(), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        if x_len != e.dimension() {
            set_error(format!(
                "point has dimension {x_len}, ensemble expects {}",
                e.dimension()
            ));
            return IbStatus::InvalidArgument;
        }
        let x = unsafe { std::slice::from_raw_parts(x, x_len) };
        unsafe { *out = e.predict_margin(x) };
        IbStatus::Ok
    })
}

/// Sign of the ensemble margin at `x` (+1/-1; exact zero maps to +1).
#[no_mangle]
pub extern "C" fn ib_ensemble_predict_label(
    ens: *const IbEnsemble,
    x: *const f64,
    x_len: usize,
    out: *mut i32,
) -> IbStatus {
    guard(|| {
        let (Some(e), false, false) = (ens_ref(ens), x.is_null(), out.is_null()) else {
            set_error("NULL argument".into());
            return IbStatus::NullPointer;
        };
        if x_len != e.dimension() {
            set_error(format!(
                "point has dimension {x_len}, ensemble expects {}",
                e.dimension()
            ));
            return IbStatus::InvalidArgument;
        }
        let x = unsafe { std::slice::from_raw_parts(x, x_len) };
        unsafe { *out = i32::from(e.predict_label(x)) };
        IbStatus::Ok
    })
}

fn run_ion(
    method: MethodSpec,
    pop: *const IbPopulation,
    ts: *const IbTrainingSet,
    mc_samples: u64,
    seed: u64,
    out: *mut IbIonReport,
) -> IbStatus {
    let (Some(p), Some(t), false) = (pop_ref(pop), ts_ref(ts), out.is_null()) else {
        set_error("NULL argument".into());
        return IbStatus::NullPointer;
    };
    match estimate_ion(&method, p, t, mc_samples as usize, seed) {
        Ok(r) => {
            unsafe {
                *out = IbIonReport {
                    ion: r.ion_hat,
                    test_error: r.test_error_hat,
                    bayes_disagreement: r.bayes_disagreement_hat,
                    training_error: r.training_error,
                    mc_samples: r.mc_samples as u64,
                    half_width_95: r.half_width_95,
                }
            };
            IbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            IbStatus::InvalidArgument
        }
    }
}

/// Influence-of-noise report for AdaBoost on `ts` drawn from `pop`:
/// trains on the set and its purified twin, then evaluates both on
/// `mc_samples` fresh draws seeded by `seed`.
#[no_mangle]
pub extern "C" fn ib_estimate_ion_adaboost(
    pop: *const IbPopulation,
    ts: *const IbTrainingSet,
    cfg: *const IbBoostConfig,
    mc_samples: u64,
    seed: u64,
    out: *mut IbIonReport,
) -> IbStatus {
    guard(|| {
        let Some(config) = boost_config(cfg) else {
            set_error("config pointer is NULL".into());
            return IbStatus::NullPointer;
        };
        run_ion(MethodSpec::AdaBoost(config), pop, ts, mc_samples, seed, out)
    })
}

/// Influence-of-noise report for the 1-nearest-neighbor baseline.
#[no_mangle]
pub extern "C" fn ib_estimate_ion_1nn(
    pop: *const IbPopulation,
    ts: *const IbTrainingSet,
    mc_samples: u64,
    seed: u64,
    out: *mut IbIonReport,
) -> IbStatus {
    guard(|| run_ion(MethodSpec::OneNn, pop, ts, mc_samples, seed, out))
}
