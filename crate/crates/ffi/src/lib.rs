//! C ABI over `sllg-core`: node families, quasi-optimal sparse grids, scalar
//! sparse-grid interpolants and single LLG sample paths.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns an [`SllgStatus`]; the message of the last
//! failure on the calling thread is available from [`sllg_last_error`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sllg_core::collocation::{Discretization, GridSequence, ProblemSpec};
use sllg_core::lc_wiener::wiener_eval;
use sllg_core::{NodeFamily1D, ProfitParams, ProfitVariant, SparseGrid, SparseGridInterpolant};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SllgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SllgProfit {
    Basic = 0,
    Improved = 1,
}

pub struct SllgNodeFamily(NodeFamily1D);

pub struct SllgGrid(SparseGrid);

pub struct SllgInterpolant(SparseGridInterpolant<f64>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(SllgStatus, String);

fn fail(status: SllgStatus, message: impl ToString) -> Failure {
    Failure(status, message.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SllgStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(fail(SllgStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => SllgStatus::Ok,
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

fn non_null<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    // SAFETY: callers pass handles obtained from this library or valid pointers.
    unsafe { p.as_ref() }.ok_or_else(|| fail(SllgStatus::NullPointer, "null pointer"))
}

fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: as above; the caller owns the output location.
    unsafe { p.as_mut() }.ok_or_else(|| fail(SllgStatus::NullPointer, "null output pointer"))
}

fn input<'a>(data: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(SllgStatus::NullPointer, "null input array"));
    }
    // SAFETY: the caller guarantees `len` readable values.
    Ok(unsafe { slice::from_raw_parts(data, len) })
}

/// Copies `values` to `buf` if it fits and always reports the needed length.
fn output(values: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> Result<(), Failure> {
    *out_ptr(len_out)? = values.len();
    if values.len() > cap {
        return Err(fail(
            SllgStatus::BufferTooSmall,
            format!("need {} values", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(fail(SllgStatus::NullPointer, "null output buffer"));
        }
        // SAFETY: `buf` holds at least `cap >= values.len()` values.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
    }
    Ok(())
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `cap`; returns its full length in bytes.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            // SAFETY: `buf` holds `cap` bytes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_node_family_new(
    p: u32,
    sigma2: f64,
    out: *mut *mut SllgNodeFamily,
) -> SllgStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let fam = NodeFamily1D::new(p, sigma2).map_err(|e| fail(SllgStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SllgNodeFamily(fam)));
        Ok(())
    })
}

/// # Safety
/// `family` must come from [`sllg_node_family_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sllg_node_family_free(family: *mut SllgNodeFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Nodes of one level in increasing order.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_nodes(
    family: *const SllgNodeFamily,
    level: u32,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SllgStatus {
    guard(|| {
        let fam = &non_null(family)?.0;
        let nodes = fam
            .make_nodes(level)
            .map_err(|e| fail(SllgStatus::InvalidArgument, e))?;
        let mut values = nodes.all().to_vec();
        values.sort_by(f64::total_cmp);
        output(&values, buf, cap, len_out)
    })
}

/// Brownian path value at `t` from Lévy-Ciesielski coefficients.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_wiener_eval(
    y: *const f64,
    len: usize,
    t: f64,
    out: *mut f64,
) -> SllgStatus {
    guard(|| {
        let y = input(y, len)?;
        *out_ptr(out)? = wiener_eval(y, t).map_err(|e| fail(SllgStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Largest quasi-optimal sparse grid with at most `max_points` points.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_grid_new(
    family: *const SllgNodeFamily,
    profit: SllgProfit,
    max_points: usize,
    out: *mut *mut SllgGrid,
) -> SllgStatus {
    guard(|| {
        let fam = non_null(family)?.0;
        let out = out_ptr(out)?;
        if max_points == 0 {
            return Err(fail(
                SllgStatus::InvalidArgument,
                "max_points must be positive",
            ));
        }
        let variant = match profit {
            SllgProfit::Basic => ProfitVariant::Basic,
            SllgProfit::Improved => ProfitVariant::Improved,
        };
        let seq = GridSequence::with_points(ProfitParams::new(fam.p(), variant), max_points)
            .map_err(|e| fail(SllgStatus::SolverFailure, e))?;
        let prefix = seq.prefix_at_most(max_points).unwrap_or(1);
        let grid = seq
            .grid(prefix, fam)
            .map_err(|e| fail(SllgStatus::SolverFailure, e))?;
        *out = Box::into_raw(Box::new(SllgGrid(grid)));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`sllg_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sllg_grid_free(grid: *mut SllgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_grid_len(grid: *const SllgGrid, out: *mut usize) -> SllgStatus {
    guard(|| {
        *out_ptr(out)? = non_null(grid)?.0.len();
        Ok(())
    })
}

/// Number of parameter dimensions spanned by the grid.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_grid_dims(grid: *const SllgGrid, out: *mut usize) -> SllgStatus {
    guard(|| {
        *out_ptr(out)? = non_null(grid)?.0.dims();
        Ok(())
    })
}

/// Parameter vector of grid point `index`, of length `sllg_grid_dims`.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_grid_point(
    grid: *const SllgGrid,
    index: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SllgStatus {
    guard(|| {
        let grid = &non_null(grid)?.0;
        let point = grid.points().get(index).ok_or_else(|| {
            fail(
                SllgStatus::InvalidArgument,
                format!("point {index} out of range"),
            )
        })?;
        let y = point.to_param(grid.family(), grid.dims());
        output(&y, buf, cap, len_out)
    })
}

/// Interpolant of one value per grid point, in grid point order.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_interpolant_new(
    grid: *const SllgGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut SllgInterpolant,
) -> SllgStatus {
    guard(|| {
        let grid = non_null(grid)?.0.clone();
        let values = input(values, len)?.to_vec();
        let out = out_ptr(out)?;
        let interp = SparseGridInterpolant::from_samples(grid, values)
            .map_err(|e| fail(SllgStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SllgInterpolant(interp)));
        Ok(())
    })
}

/// # Safety
/// `interp` must come from [`sllg_interpolant_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sllg_interpolant_free(interp: *mut SllgInterpolant) {
    if !interp.is_null() {
        drop(Box::from_raw(interp));
    }
}

/// Interpolant at `z`; missing coordinates count as zero.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_interpolant_eval(
    interp: *const SllgInterpolant,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> SllgStatus {
    guard(|| {
        let interp = &non_null(interp)?.0;
        let z = input(z, len)?;
        *out_ptr(out)? = interp.evaluate(z);
        Ok(())
    })
}

/// Solves one sample path on the `n x n` mesh with `steps` time steps, unit
/// example noise scaled by `noise_scale` and initial state `(0, 0, 1)`.
/// Writes the final magnetisation as `3 (n + 1)^2` values, vertex-major.
///
/// # Safety
/// Pointer arguments must be null or valid for the documented lengths;
/// handles must come from the matching `*_new` call.
#[no_mangle]
pub unsafe extern "C" fn sllg_sample_final_state(
    n: usize,
    steps: usize,
    noise_scale: f64,
    y: *const f64,
    len: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SllgStatus {
    guard(|| {
        if n == 0 || steps == 0 || n > 1024 || steps > 1 << 16 {
            return Err(fail(
                SllgStatus::InvalidArgument,
                "mesh size and steps must be positive",
            ));
        }
        if !noise_scale.is_finite() {
            return Err(fail(
                SllgStatus::InvalidArgument,
                "noise scale must be finite",
            ));
        }
        let y = input(y, len)?;
        let mut spec = ProblemSpec::sg_experiment();
        spec.noise = spec.noise.with_intensity(noise_scale);
        let path = spec
            .build(Discretization::new(n, steps))
            .sample_path(y)
            .map_err(|e| fail(SllgStatus::SolverFailure, e))?;
        let last: Vec<f64> = path.field(steps).iter().flatten().copied().collect();
        output(&last, buf, cap, len_out)
    })
}
