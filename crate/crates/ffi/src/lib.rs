//! C ABI over mgkernel. Handles are opaque and owned by the caller, who frees
//! them with the matching `*_free`. Every fallible call returns an `MgStatus`;
//! on failure `mg_last_error` holds a message for the calling thread.

use mgkernel::graph::{GraphPoint, MetricGraph};
use mgkernel::kernel::{kernel_eval, GraphKernelRequest, Targets};
use mgkernel::profile::KernelProfile;
use mgkernel::spectral::{eigenvalues_via_reduction, EdgePotential, SpectrumReport};
use mgkernel::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    /// malformed graph, point or parameter
    InvalidInput = 1,
    /// a numerical method could not meet its tolerance
    Numerical = 2,
    Unsupported = 3,
    NullPointer = 4,
    /// a Rust panic was caught at the boundary
    Panic = 5,
}

/// A metric graph.
pub struct MgGraph(MetricGraph);

/// Eigenvalues found in a window, ascending.
pub struct MgSpectrum(SpectrumReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MgStatus {
    match err {
        Error::Unsupported(_) => MgStatus::Unsupported,
        e if e.is_input() => MgStatus::InvalidInput,
        _ => MgStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MgStatus, String)>) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MgStatus::Panic
        }
    }
}

fn lift(e: Error) -> (MgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MgStatus, String) {
    (MgStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn mg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a graph from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_from_json(json: *const c_char, out: *mut *mut MgGraph) -> MgStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json).to_str().map_err(|e| (MgStatus::InvalidInput, e.to_string()))?;
        let g = MetricGraph::from_json(text).map_err(lift)?;
        *out = Box::into_raw(Box::new(MgGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from `mg_graph_from_json` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_free(g: *mut MgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn mg_graph_edge_count(g: *const MgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `g` must be a live graph handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn mg_graph_vertex_count(g: *const MgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.vertex_count())
}

/// Heat kernel K_t(x, y) between (x_edge, x_pos) and (y_edge, y_pos), with the
/// certified truncation bound written to `bound`.
///
/// # Safety
/// `g` must be a live graph handle; `value` and `bound` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mg_heat_kernel(
    g: *const MgGraph,
    x_edge: usize,
    x_pos: f64,
    y_edge: usize,
    y_pos: f64,
    t: f64,
    eps: f64,
    value: *mut f64,
    bound: *mut f64,
) -> MgStatus {
    guard(|| {
        let g = &g.as_ref().ok_or_else(|| null("graph"))?.0;
        if value.is_null() || bound.is_null() {
            return Err(null("output"));
        }
        let x = GraphPoint::new(g, x_edge, x_pos).map_err(lift)?;
        let y = GraphPoint::new(g, y_edge, y_pos).map_err(lift)?;
        let req = GraphKernelRequest { x, targets: Targets::Points(vec![y]), profile: KernelProfile::heat(t).map_err(lift)?, eps };
        let r = kernel_eval(g, &req).map_err(lift)?;
        *value = r.values[0];
        *bound = r.truncation_bound;
        Ok(())
    })
}

/// Kirchhoff Laplacian eigenvalues in [lo, hi] on an equilateral graph.
///
/// # Safety
/// `g` must be a live graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_spectrum(g: *const MgGraph, lo: f64, hi: f64, out: *mut *mut MgSpectrum) -> MgStatus {
    guard(|| {
        let g = &g.as_ref().ok_or_else(|| null("graph"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = eigenvalues_via_reduction(g, &EdgePotential::zero(), (lo, hi)).map_err(lift)?;
        *out = Box::into_raw(Box::new(MgSpectrum(r)));
        Ok(())
    })
}

/// Number of distinct eigenvalues away from the Dirichlet points.
///
/// # Safety
/// `s` must be a live spectrum handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn mg_spectrum_len(s: *const MgSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.eigenvalues.len())
}

/// # Safety
/// `s` must be a live spectrum handle; `lambda` and `multiplicity` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mg_spectrum_get(s: *const MgSpectrum, index: usize, lambda: *mut f64, multiplicity: *mut usize) -> MgStatus {
    guard(|| {
        let s = &s.as_ref().ok_or_else(|| null("spectrum"))?.0;
        if lambda.is_null() || multiplicity.is_null() {
            return Err(null("output"));
        }
        let e = s
            .eigenvalues
            .get(index)
            .ok_or_else(|| (MgStatus::InvalidInput, format!("index {index} out of range ({} eigenvalues)", s.eigenvalues.len())))?;
        *lambda = e.lambda;
        *multiplicity = e.multiplicity;
        Ok(())
    })
}

/// Number of Dirichlet points in the window, where the reduction is not used.
///
/// # Safety
/// `s` must be a live spectrum handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn mg_spectrum_dirichlet_len(s: *const MgSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.dirichlet.len())
}

/// # Safety
/// `s` must be from `mg_spectrum` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mg_spectrum_free(s: *mut MgSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
