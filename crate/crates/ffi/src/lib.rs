//! C ABI over `eqtensor`.
//!
//! Every function returns an [`EqStatus`]. Objects cross the boundary as
//! opaque handles that the caller releases with the matching `*_free`
//! function. After a non-OK status, `eq_last_error` returns a description
//! of the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eqtensor::basis::isotropic_basis;
use eqtensor::experiments::audit::audit_suite;
use eqtensor::models::checkpoint::{decode_checkpoint, Checkpoint, SavedModel};
use eqtensor::nalgebra::DMatrix;
use eqtensor::{group_act, Error, GroupElement, MetricSignature, Parity, TensorValue};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Dense tensor handle.
pub struct EqTensor(TensorValue);

/// Trained model handle.
pub struct EqModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut v = msg.as_bytes().to_vec();
        v.retain(|b| *b != 0);
        v.push(0);
        *e.borrow_mut() = v;
    });
}

fn status_of(e: &Error) -> EqStatus {
    match e {
        Error::Io(_) => EqStatus::Io,
        e if e.is_numerical() => EqStatus::Numerical,
        _ => EqStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EqStatus, String)>) -> EqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EqStatus::Panic
        }
    }
}

fn lib<T>(r: eqtensor::Result<T>) -> Result<T, (EqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EqStatus, String) {
    (EqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EqStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (EqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (EqStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn parity_of(p: i32) -> Result<Parity, (EqStatus, String)> {
    lib(Parity::from_sign(p as i8))
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize, written: *mut usize) -> Result<(), (EqStatus, String)> {
    if !written.is_null() {
        *written = values.len();
    }
    if out_len < values.len() {
        return Err((EqStatus::BufferTooSmall, format!("need {} values, buffer holds {out_len}", values.len())));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (EqStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length including the
/// terminator, or 0 when no error was recorded.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn eq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 && !msg.is_empty() {
            let n = msg.len().min(len);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        msg.len()
    })
}

/// Creates a tensor of `dim^order` row-major components. `parity` is +1 or -1.
///
/// # Safety
/// `data` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eq_tensor_new(
    dim: usize,
    order: usize,
    parity: i32,
    data: *const f64,
    len: usize,
    out: *mut *mut EqTensor,
) -> EqStatus {
    guard(|| {
        let values = slice(data, len, "data")?.to_vec();
        let t = lib(TensorValue::new(dim, order, parity_of(parity)?, values))?;
        put(out, EqTensor(t))
    })
}

/// Releases a tensor. Null is ignored.
///
/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eq_tensor_free(t: *mut EqTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Reports dimension, order and parity of a tensor. Any output may be null.
///
/// # Safety
/// `t` must be a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn eq_tensor_shape(t: *const EqTensor, dim: *mut usize, order: *mut usize, parity: *mut i32) -> EqStatus {
    guard(|| {
        let t = &t.as_ref().ok_or_else(|| null("tensor"))?.0;
        if !dim.is_null() {
            *dim = t.dim();
        }
        if !order.is_null() {
            *order = t.order();
        }
        if !parity.is_null() {
            *parity = t.parity().sign() as i32;
        }
        Ok(())
    })
}

/// Copies the components into `out`. `written` receives the component count
/// even when the buffer is too small.
///
/// # Safety
/// `out` must point to `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn eq_tensor_data(t: *const EqTensor, out: *mut f64, out_len: usize, written: *mut usize) -> EqStatus {
    guard(|| {
        let t = &t.as_ref().ok_or_else(|| null("tensor"))?.0;
        write_out(t.components(), out, out_len, written)
    })
}

/// Applies the group element with row-major `dim×dim` matrix `matrix` of the
/// group of `metric` (e.g. "euclidean:3", "lorentz") to `t`.
///
/// # Safety
/// `metric` must be a NUL-terminated string, `matrix` must hold `dim*dim`
/// values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eq_group_act(
    metric: *const c_char,
    matrix: *const f64,
    t: *const EqTensor,
    out: *mut *mut EqTensor,
) -> EqStatus {
    guard(|| {
        let metric: MetricSignature = lib(text(metric, "metric")?.parse())?;
        let d = metric.dim();
        let m = DMatrix::from_row_slice(d, d, slice(matrix, d * d, "matrix")?);
        let g = lib(GroupElement::new(m, metric))?;
        let t = &t.as_ref().ok_or_else(|| null("tensor"))?.0;
        put(out, EqTensor(lib(group_act(&g, t))?))
    })
}

/// Number of isotropic basis elements of the given order and parity.
///
/// # Safety
/// `metric` must be a NUL-terminated string and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn eq_basis_count(order: usize, parity: i32, metric: *const c_char, count: *mut usize) -> EqStatus {
    guard(|| {
        let metric: MetricSignature = lib(text(metric, "metric")?.parse())?;
        let basis = lib(isotropic_basis(order, parity_of(parity)?, &metric))?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = basis.len();
        Ok(())
    })
}

/// Element `index` of the isotropic basis as a new tensor.
///
/// # Safety
/// `metric` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eq_basis_element(
    order: usize,
    parity: i32,
    metric: *const c_char,
    index: usize,
    out: *mut *mut EqTensor,
) -> EqStatus {
    guard(|| {
        let metric: MetricSignature = lib(text(metric, "metric")?.parse())?;
        let mut basis = lib(isotropic_basis(order, parity_of(parity)?, &metric))?;
        if index >= basis.len() {
            return Err((EqStatus::InvalidArgument, format!("index {index} out of range for {} elements", basis.len())));
        }
        put(out, EqTensor(basis.elements.swap_remove(index).tensor))
    })
}

/// Loads a checkpoint written by `eqtensor train`.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eq_model_load(data: *const u8, len: usize, out: *mut *mut EqModel) -> EqStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let ckpt = lib(decode_checkpoint(std::slice::from_raw_parts(data, len)))?;
        put(out, EqModel(ckpt))
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eq_model_free(m: *mut EqModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Evaluates a model on raw inputs.
///
/// Vectors-to-tensor models take `n*d` values (n vectors, row-major) and
/// write every output head back to back. Spectral models take a symmetric
/// `d×d` matrix. Dense baselines are applied to the raw input without the
/// checkpoint's normalization.
///
/// # Safety
/// `input` must hold `input_len` values; `out` must hold `out_len`.
#[no_mangle]
pub unsafe extern "C" fn eq_model_forward(
    m: *const EqModel,
    input: *const f64,
    input_len: usize,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> EqStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| null("model"))?.0;
        let x = slice(input, input_len, "input")?;
        let values = match &m.model {
            SavedModel::VecToTensor(model) => {
                let expected = model.options().n * model.dim();
                if x.len() != expected {
                    return Err((EqStatus::InvalidArgument, format!("expected {expected} inputs, got {}", x.len())));
                }
                let (heads, _) = lib(model.forward_batch(&[x]))?;
                heads.into_iter().flatten().flatten().collect::<Vec<f64>>()
            }
            SavedModel::Eigen(model) => {
                let d = model.dim();
                let a = lib(TensorValue::new(d, 2, Parity::Even, x.to_vec()))?;
                lib(model.forward_sym(&a))?.into_components()
            }
            SavedModel::Mlp(net) => lib(net.forward(x))?,
        };
        write_out(&values, out, out_len, written)
    })
}

/// Runs the equivariance audit suite for `metric` and reports the largest
/// defect over audited models and whether all thresholds held.
///
/// # Safety
/// `metric` must be a NUL-terminated string; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eq_audit(
    metric: *const c_char,
    trials: usize,
    seed: u64,
    max_defect: *mut f64,
    all_passed: *mut bool,
) -> EqStatus {
    guard(|| {
        let metric: MetricSignature = lib(text(metric, "metric")?.parse())?;
        let records = lib(audit_suite(&metric, trials, seed))?;
        if max_defect.is_null() || all_passed.is_null() {
            return Err(null("output"));
        }
        *max_defect = records.iter().filter(|r| r.threshold.is_some()).map(|r| r.defect).fold(0.0, f64::max);
        *all_passed = records.iter().all(|r| r.passed());
        Ok(())
    })
}
