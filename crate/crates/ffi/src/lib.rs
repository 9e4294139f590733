//! C interface to the lcplan planner.
//!
//! Graphs are opaque handles. Every fallible call returns an [`LcStatus`];
//! the message for the last failure on the calling thread is available from
//! [`lcplan_last_error_message`]. Strings returned through out-parameters are
//! owned by the caller and released with [`lcplan_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcplan::api::{solve, Instance, SolveRequest};
use lcplan::submodular::guarantee_alpha;
use lcplan::Error;

/// Opaque exchange graph with any contexts loaded alongside it.
pub struct LcGraph {
    inst: Instance,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidGraph = 4,
    Infeasible = 5,
    InstanceTooLarge = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LcStatus {
    match e {
        Error::Parse(_) | Error::Io(_) => LcStatus::Parse,
        Error::InvalidBudget(_)
        | Error::BlockMismatch { .. }
        | Error::InvalidConfig(_)
        | Error::MissingContext(_)
        | Error::InfeasiblePlan(_)
        | Error::TooFewRobots(_) => LcStatus::Infeasible,
        Error::InstanceTooLarge { .. } => LcStatus::InstanceTooLarge,
        Error::SolverStall(_) | Error::InvalidLp(_) => LcStatus::Internal,
        _ => LcStatus::InvalidGraph,
    }
}

fn guard(f: impl FnOnce() -> Result<(), LcStatus>) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            LcStatus::Internal
        }
    }
}

fn fail(e: Error) -> LcStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, LcStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(LcStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        LcStatus::InvalidUtf8
    })
}

unsafe fn graph_ref<'a>(g: *const LcGraph) -> Result<&'a LcGraph, LcStatus> {
    g.as_ref().ok_or_else(|| {
        set_error("null graph handle");
        LcStatus::NullPointer
    })
}

/// Parses a graph or world JSON document into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcplan_graph_from_json(json: *const c_char, out: *mut *mut LcGraph) -> LcStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(LcStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let text = read_str(json)?;
        let inst = Instance::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(LcGraph { inst }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `g` must come from [`lcplan_graph_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lcplan_graph_free(g: *mut LcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcplan_graph_num_vertices(g: *const LcGraph, out: *mut usize) -> LcStatus {
    write_count(g, out, |g| g.inst.graph.num_vertices())
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcplan_graph_num_edges(g: *const LcGraph, out: *mut usize) -> LcStatus {
    write_count(g, out, |g| g.inst.graph.num_edges())
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcplan_graph_max_degree(g: *const LcGraph, out: *mut usize) -> LcStatus {
    write_count(g, out, |g| g.inst.graph.max_degree())
}

unsafe fn write_count(g: *const LcGraph, out: *mut usize, f: impl FnOnce(&LcGraph) -> usize) -> LcStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(LcStatus::NullPointer);
        }
        *out = f(g);
        Ok(())
    })
}

/// Runs a planner. `request_json` holds the solve request (objective,
/// algorithm, comm, b, bi, k, ki, kij, lazy, seed); on success `*out`
/// receives the plan JSON, to be freed with [`lcplan_string_free`].
///
/// # Safety
/// `g` must be a live handle, `request_json` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lcplan_solve(g: *const LcGraph, request_json: *const c_char, out: *mut *mut c_char) -> LcStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(LcStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let g = graph_ref(g)?;
        let req: SolveRequest = serde_json::from_str(read_str(request_json)?).map_err(|e| fail(e.into()))?;
        let solved = solve(&g.inst, &req).map_err(fail)?;
        let text = serde_json::to_string(&solved.to_output(&g.inst.graph)).map_err(|e| fail(e.into()))?;
        *out = CString::new(text).map_err(|_| LcStatus::Internal)?.into_raw();
        Ok(())
    })
}

/// A-priori Submodular-Greedy ratio for budgets `b`, `k` and maximum degree `delta`.
#[no_mangle]
pub extern "C" fn lcplan_guarantee_alpha(b: usize, k: usize, delta: usize) -> f64 {
    guarantee_alpha(b, k, delta).alpha
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lcplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lcplan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn lcplan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
