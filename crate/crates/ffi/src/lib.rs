//! C ABI over `chiplet-sched`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `cs_*_load`/`cs_*_train`/`cs_run` call and released by the matching
//! `cs_*_free`. Functions return a [`CsStatus`]; on failure the message is
//! kept per thread and can be read with [`cs_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use chiplet_sched::experiment::{run_point, validate_experiment, Experiment, ExperimentConfig, PointKey, ValidateOptions};
use chiplet_sched::morl::{train, PolicyFile, Preference};
use chiplet_sched::sim::{write_metrics_csv, SimReport};
use chiplet_sched::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Topology = 6,
    Thermal = 7,
    Invariant = 8,
    Diverged = 9,
    Validation = 10,
    Panic = 11,
}

/// A loaded experiment.
pub struct CsExperiment(Experiment);

/// A trained policy.
pub struct CsPolicy(PolicyFile);

/// The result of one simulation run.
pub struct CsReport(SimReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsMetrics {
    pub completed: u64,
    pub measured: u64,
    pub rejected: u64,
    /// Completed jobs per second after warm-up.
    pub throughput: f64,
    pub mean_exec_time_s: f64,
    pub mean_e2e_latency_s: f64,
    pub mean_energy_j: f64,
    pub mean_edp_js: f64,
    pub makespan_s: f64,
    pub throttle_events: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::Validation(_) => CsStatus::Validation,
        Error::Graph(_) | Error::Config(_) => CsStatus::Config,
        Error::Parse { .. } => CsStatus::Parse,
        Error::Topology(_) => CsStatus::Topology,
        Error::Thermal(_) => CsStatus::Thermal,
        Error::Invariant(_) => CsStatus::Invariant,
        Error::Diverged(_) => CsStatus::Diverged,
        Error::Io { .. } => CsStatus::Io,
    }
}

struct Fail(CsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let mut msg = e.to_string();
        let mut src = std::error::Error::source(&e);
        while let Some(s) = src {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            src = s.source();
        }
        Fail(status_of(&e), msg)
    }
}

/// Runs `f`, converting errors and panics into a status and the last-error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(CsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(CsStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(CsStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated)
/// and returns its length without the terminator. Returns 0 if there is no
/// error. If `buf` is null or `len` too small nothing is copied, so callers
/// can query the size first.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len >= bytes.len() {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
            }
            bytes.len() - 1
        }
    })
}

/// Loads an experiment file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_experiment_load(path: *const c_char, out: *mut *mut CsExperiment) -> CsStatus {
    guard(|| {
        out_arg(out)?;
        let path = str_arg(path, "path")?;
        let exp = Experiment::load(&PathBuf::from(path))?;
        *out = Box::into_raw(Box::new(CsExperiment(exp)));
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a pointer from [`cs_experiment_load`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn cs_experiment_free(exp: *mut CsExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs the invariant checks of an experiment file; `passed` receives 1 if
/// every check passed. `jobs` of 0 keeps the configured stream length.
///
/// # Safety
/// `path` must be a NUL-terminated string and `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_validate(path: *const c_char, seed: u64, jobs: u64, passed: *mut i32) -> CsStatus {
    guard(|| {
        if passed.is_null() {
            return Err(Fail(CsStatus::NullPointer, "passed is null".into()));
        }
        let path = PathBuf::from(str_arg(path, "path")?);
        let cfg = ExperimentConfig::load(&path)?;
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        let opts = ValidateOptions { seed, jobs: (jobs > 0).then_some(jobs as usize), ..Default::default() };
        let report = validate_experiment(&cfg, &base, &opts)?;
        if let Some(f) = report.failures().next() {
            set_error(format!("{}: {}", f.name, f.detail));
        }
        *passed = report.passed() as i32;
        Ok(())
    })
}

/// Loads a policy file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_load(path: *const c_char, out: *mut *mut CsPolicy) -> CsStatus {
    guard(|| {
        out_arg(out)?;
        let p = PolicyFile::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CsPolicy(p)));
        Ok(())
    })
}

/// Trains a policy on the experiment. `total_steps` of 0 keeps the configured budget.
///
/// # Safety
/// `exp` must come from [`cs_experiment_load`] and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_train(
    exp: *const CsExperiment,
    seed: u64,
    total_steps: u64,
    out: *mut *mut CsPolicy,
) -> CsStatus {
    guard(|| {
        out_arg(out)?;
        let exp = &ref_arg(exp, "experiment")?.0;
        let mut cfg = exp.config.train.clone();
        if total_steps > 0 {
            cfg.total_steps = total_steps as usize;
        }
        let trained = train(&cfg, &exp.train_env(), seed, |_| {})?;
        *out = Box::into_raw(Box::new(CsPolicy(PolicyFile::from_trained(&trained, &cfg, seed))));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_save(policy: *const CsPolicy, path: *const c_char) -> CsStatus {
    guard(|| {
        let p = &ref_arg(policy, "policy")?.0;
        p.save(&PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a pointer from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_free(policy: *mut CsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Simulates one workload stream. `policy` may be null unless `scheduler`
/// is `"thermos"`; the preference is ignored by the baselines.
///
/// # Safety
/// Pointers must come from this library (or be null where allowed) and
/// `scheduler` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_run(
    exp: *const CsExperiment,
    scheduler: *const c_char,
    policy: *const CsPolicy,
    omega_latency: f64,
    omega_energy: f64,
    admit_rate: f64,
    seed: u64,
    out: *mut *mut CsReport,
) -> CsStatus {
    guard(|| {
        out_arg(out)?;
        let exp = &ref_arg(exp, "experiment")?.0;
        let scheduler = str_arg(scheduler, "scheduler")?;
        let pref = Preference::new(omega_latency, omega_energy)?;
        let key = PointKey { scheduler: scheduler.to_string(), preference: Some(pref), admit_rate, seed };
        let policy = policy.as_ref().map(|p| &p.0);
        let report = run_point(exp, &key, policy)?;
        *out = Box::into_raw(Box::new(CsReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`cs_run`] and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_report_metrics(report: *const CsReport, out: *mut CsMetrics) -> CsStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        if out.is_null() {
            return Err(Fail(CsStatus::NullPointer, "output pointer is null".into()));
        }
        let m = &r.metrics;
        *out = CsMetrics {
            completed: m.completed as u64,
            measured: m.measured as u64,
            rejected: m.rejected as u64,
            throughput: m.throughput,
            mean_exec_time_s: m.mean_exec_time,
            mean_e2e_latency_s: m.mean_e2e_latency,
            mean_energy_j: m.mean_energy,
            mean_edp_js: m.mean_edp,
            makespan_s: m.makespan,
            throttle_events: r.thermal.throttle_events,
        };
        Ok(())
    })
}

/// Writes the per-job metrics CSV of a run.
///
/// # Safety
/// `report` must come from [`cs_run`] and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_report_write_csv(report: *const CsReport, path: *const c_char) -> CsStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        write_metrics_csv(r, &PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a pointer from [`cs_run`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn cs_report_free(report: *mut CsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
