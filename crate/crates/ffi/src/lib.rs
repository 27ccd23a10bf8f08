//! C ABI for the scimap pipeline.
//!
//! Configurations are opaque handles created by [`scimap_config_load`] and
//! released by [`scimap_config_free`]. Every fallible call returns a
//! [`ScimapStatus`]; on failure, [`scimap_last_error_message`] returns a
//! thread-local description valid until the next failing call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use libc::c_char;

use scimap::pipeline::{
    cmd_build_networks, cmd_cluster, cmd_evaluate, cmd_prepare_topics, cmd_report, PipelineConfig,
};
use scimap::synth::{write_synthetic, SyntheticSpec};
use scimap::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScimapStatus {
    Ok = 0,
    /// File system failure.
    Io = 1,
    /// A file exists but could not be parsed.
    Parse = 2,
    /// Input data violates a structural invariant.
    Data = 3,
    /// Strict validation rejected the corpus.
    Validation = 4,
    /// Invalid configuration or parameter.
    Config = 5,
    /// Missing upstream artifact or locked work directory.
    State = 6,
    /// A required pointer argument was null.
    NullPointer = 7,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 8,
    /// The callee panicked; this is a bug worth reporting.
    Panic = 9,
}

/// Pipeline stage selector for [`scimap_run_stage`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScimapStage {
    BuildNetworks = 0,
    Cluster = 1,
    PrepareTopics = 2,
    Evaluate = 3,
    Report = 4,
}

/// Opaque pipeline configuration handle.
pub struct ScimapConfig {
    inner: PipelineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> ScimapStatus {
    match err.category() {
        "io" => ScimapStatus::Io,
        "parse" => ScimapStatus::Parse,
        "data" => ScimapStatus::Data,
        "validation" => ScimapStatus::Validation,
        "config" => ScimapStatus::Config,
        "state" => ScimapStatus::State,
        _ => ScimapStatus::Data,
    }
}

fn fail(err: &Error) -> ScimapStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> ScimapStatus>(f: F) -> ScimapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            ScimapStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, ScimapStatus> {
    if ptr.is_null() {
        set_last_error("null path argument");
        return Err(ScimapStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_last_error("path argument is not valid UTF-8");
            Err(ScimapStatus::InvalidUtf8)
        }
    }
}

/// Message of the last failing call on this thread. The pointer stays valid
/// until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn scimap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn scimap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Load a pipeline configuration file. On success `*out` owns a new handle
/// that must be released with [`scimap_config_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn scimap_config_load(
    path: *const c_char,
    out: *mut *mut ScimapConfig,
) -> ScimapStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null output handle");
            return ScimapStatus::NullPointer;
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match PipelineConfig::load(&path) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(ScimapConfig { inner: cfg }));
                ScimapStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a configuration handle. Null is a no-op.
///
/// # Safety
/// `cfg` must be a handle returned by [`scimap_config_load`] that has not
/// been freed yet, or null.
#[no_mangle]
pub unsafe extern "C" fn scimap_config_free(cfg: *mut ScimapConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Override the clustering seed of a loaded configuration.
///
/// # Safety
/// `cfg` must be a live handle from [`scimap_config_load`].
#[no_mangle]
pub unsafe extern "C" fn scimap_config_set_seed(cfg: *mut ScimapConfig, seed: u64) -> ScimapStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            set_last_error("null config handle");
            return ScimapStatus::NullPointer;
        };
        cfg.inner.clustering.seed = seed;
        ScimapStatus::Ok
    })
}

/// Run one pipeline stage against the configuration's work directory.
///
/// # Safety
/// `cfg` must be a live handle from [`scimap_config_load`].
#[no_mangle]
pub unsafe extern "C" fn scimap_run_stage(
    cfg: *const ScimapConfig,
    stage: ScimapStage,
) -> ScimapStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            set_last_error("null config handle");
            return ScimapStatus::NullPointer;
        };
        let result = match stage {
            ScimapStage::BuildNetworks => cmd_build_networks(&cfg.inner).map(|_| ()),
            ScimapStage::Cluster => cmd_cluster(&cfg.inner).map(|_| ()),
            ScimapStage::PrepareTopics => cmd_prepare_topics(&cfg.inner).map(|_| ()),
            ScimapStage::Evaluate => cmd_evaluate(&cfg.inner).map(|_| ()),
            ScimapStage::Report => cmd_report(&cfg.inner).map(|_| ()),
        };
        match result {
            Ok(()) => ScimapStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Generate a synthetic corpus from a spec file into `out_dir`.
///
/// # Safety
/// Both arguments must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn scimap_synth(
    spec_path: *const c_char,
    out_dir: *const c_char,
) -> ScimapStatus {
    guard(|| {
        let spec_path = match path_arg(spec_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let out_dir = match path_arg(out_dir) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let spec = match SyntheticSpec::load(&spec_path) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        match write_synthetic(&spec, &out_dir) {
            Ok(_) => ScimapStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}
