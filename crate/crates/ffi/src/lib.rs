//! C interface to the coreecs scenarios, safety checker and fuzzer.
//!
//! Every function returns a [`CoreecsStatus`]. On failure the message is kept
//! per thread and can be read with [`coreecs_last_error`]. Strings handed out
//! by the library must be released with [`coreecs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coreecs::fuzz::fuzz;
use coreecs::scenario::{scenario_by_name, Scenario};
use coreecs::{apply_schedule, check_safe, run_parallel, EcsError, RunConfig, Verdict, WorldState};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreecsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownScenario = 3,
    Schema = 4,
    Capacity = 5,
    Shape = 6,
    TooManyLinearizations = 7,
    Analysis = 8,
    Runtime = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreecsVerdict {
    Safe = 0,
    Unsafe = 1,
    Unknown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreecsFuzzSummary {
    pub instances: u64,
    pub safe_deterministic: u64,
    pub unknown_deterministic: u64,
    pub unknown_nondeterministic: u64,
    pub skipped: u64,
    pub safe_nondeterministic: u64,
    pub parallel_divergences: u64,
    pub undeclared_writes: u64,
}

/// A scenario together with its current state.
pub struct CoreecsWorld {
    scenario: Scenario,
    state: WorldState,
    frame: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(CoreecsStatus, String);

impl From<EcsError> for Failure {
    fn from(e: EcsError) -> Self {
        let status = match e {
            EcsError::Schema(_) => CoreecsStatus::Schema,
            EcsError::Capacity => CoreecsStatus::Capacity,
            EcsError::Shape(_) => CoreecsStatus::Shape,
            EcsError::TooManyLinearizations { .. } => CoreecsStatus::TooManyLinearizations,
            EcsError::Analysis(_) => CoreecsStatus::Analysis,
            EcsError::Runtime(_) => CoreecsStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CoreecsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CoreecsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CoreecsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside coreecs".into());
            CoreecsStatus::Panic
        }
    }
}

unsafe fn world_mut<'a>(w: *mut CoreecsWorld) -> Result<&'a mut CoreecsWorld, Failure> {
    w.as_mut().ok_or_else(|| null("world"))
}

unsafe fn world_ref<'a>(w: *const CoreecsWorld) -> Result<&'a CoreecsWorld, Failure> {
    w.as_ref().ok_or_else(|| null("world"))
}

/// Creates a world running the named scenario, at its start state.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer. The
/// handle written to `*out` must be released with [`coreecs_world_free`].
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_new(name: *const c_char, out: *mut *mut CoreecsWorld) -> CoreecsStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(CoreecsStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let scenario = scenario_by_name(name)
            .ok_or_else(|| Failure(CoreecsStatus::UnknownScenario, format!("unknown scenario {name}")))?;
        let state = scenario.start_state()?;
        *out = Box::into_raw(Box::new(CoreecsWorld { scenario, state, frame: 0 }));
        Ok(())
    })
}

/// Releases a world. Null is ignored.
///
/// # Safety
/// `w` must come from [`coreecs_world_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_free(w: *mut CoreecsWorld) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Advances the world by `frames` frames. `workers == 0` uses the reference
/// interpreter; otherwise the threaded runtime runs with `workers` threads and
/// a per-frame seed derived from `seed`.
///
/// # Safety
/// `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_step(
    w: *mut CoreecsWorld,
    frames: u32,
    workers: u32,
    seed: u64,
) -> CoreecsStatus {
    guard(|| {
        let w = world_mut(w)?;
        for _ in 0..frames {
            w.state = if workers == 0 {
                apply_schedule(&w.state, &w.scenario.schedule)?
            } else {
                let cfg = RunConfig::new(workers as usize, seed.wrapping_add(w.frame));
                run_parallel(&w.state, &w.scenario.schedule, cfg)?.0
            };
            w.frame += 1;
        }
        Ok(())
    })
}

/// Number of frames run so far.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_frame(w: *const CoreecsWorld, out: *mut u64) -> CoreecsStatus {
    guard(|| {
        let w = world_ref(w)?;
        *out.as_mut().ok_or_else(|| null("out"))? = w.frame;
        Ok(())
    })
}

/// The id the next fresh entity would receive.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_next_fresh(w: *const CoreecsWorld, out: *mut u64) -> CoreecsStatus {
    guard(|| {
        let w = world_ref(w)?;
        *out.as_mut().ok_or_else(|| null("out"))? = w.state.next_fresh().value();
        Ok(())
    })
}

/// Renders the current state as one line of text.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer. The string written
/// to `*out` must be released with [`coreecs_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_render(w: *const CoreecsWorld, out: *mut *mut c_char) -> CoreecsStatus {
    guard(|| {
        let w = world_ref(w)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let text = CString::new(w.state.render())
            .map_err(|_| Failure(CoreecsStatus::InvalidArgument, "state text contains NUL".into()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Safety verdict of the scenario's schedule at the current state.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coreecs_world_check(w: *const CoreecsWorld, out: *mut CoreecsVerdict) -> CoreecsStatus {
    guard(|| {
        let w = world_ref(w)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match check_safe(&w.state, &w.scenario.schedule)?.verdict {
            Verdict::Safe => CoreecsVerdict::Safe,
            Verdict::Unsafe => CoreecsVerdict::Unsafe,
            Verdict::Unknown => CoreecsVerdict::Unknown,
        };
        Ok(())
    })
}

/// Runs the randomised determinism check.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coreecs_fuzz(
    instances: u32,
    max_invocations: u32,
    seed: u64,
    out: *mut CoreecsFuzzSummary,
) -> CoreecsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = fuzz(instances as usize, max_invocations as usize, seed)?;
        *out = CoreecsFuzzSummary {
            instances: s.instances as u64,
            safe_deterministic: s.safe_deterministic as u64,
            unknown_deterministic: s.unknown_deterministic as u64,
            unknown_nondeterministic: s.unknown_nondeterministic as u64,
            skipped: s.skipped as u64,
            safe_nondeterministic: s.safe_nondeterministic as u64,
            parallel_divergences: s.parallel_divergences as u64,
            undeclared_writes: s.undeclared_writes as u64,
        };
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn coreecs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coreecs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
