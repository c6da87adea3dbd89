//! C ABI over the vibaug core.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`VbStatus`]; on failure [`vb_last_error_message`] describes the most
//! recent error on the calling thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ndarray::ArrayView2;
use vibaug::chemio::{parse_modes, parse_xyz, Molecule, ModeSet};
use vibaug::experiment::Pipeline;
use vibaug::featurize::{encode, Conditions, Substrate, FEATURE_DIMS};
use vibaug::metrics::evaluate;
use vibaug::persist::load_pipeline;
use vibaug::rng::RngStream;
use vibaug::vibration::{max_amplitude, perturb, VibrationConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    IoError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

pub struct VbMolecule(Molecule);
pub struct VbModeSet(ModeSet);
pub struct VbModel(Pipeline);

/// Bit flags for [`VbMetrics::defined`].
pub const VB_METRIC_PCC: u32 = 1;
pub const VB_METRIC_R2: u32 = 2;
pub const VB_METRIC_MRE: u32 = 4;

/// Metric values; a value is meaningful only when its bit is set in `defined`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VbMetrics {
    pub pcc: f64,
    pub r2: f64,
    pub mre_percent: f64,
    pub rmse: f64,
    pub mse: f64,
    pub n: usize,
    pub defined: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn guard(f: impl FnOnce() -> Result<(), (VbStatus, String)>) -> VbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VbStatus::Panic
        }
    }
}

fn null(what: &str) -> (VbStatus, String) {
    (VbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (VbStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (VbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err((VbStatus::BufferTooSmall, format!("{what} holds {len} values, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn vb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_molecule_parse_xyz(text: *const c_char, out: *mut *mut VbMolecule) -> VbStatus {
    guard(|| {
        let t = unsafe { c_str(text, "text") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = parse_xyz(t).map_err(|e| (VbStatus::ParseError, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(VbMolecule(m))) };
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vb_molecule_free(m: *mut VbMolecule) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_molecule_atom_count(m: *const VbMolecule, out: *mut usize) -> VbStatus {
    guard(|| {
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("molecule"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = m.0.len() };
        Ok(())
    })
}

/// Writes `3 × atom_count` coordinates (Å), atom-major.
///
/// # Safety
/// `m` must be a live handle; `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vb_molecule_coordinates(m: *const VbMolecule, out: *mut f64, len: usize) -> VbStatus {
    guard(|| {
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("molecule"))?;
        let dst = unsafe { out_slice(out, len, 3 * m.0.len(), "out") }?;
        for (chunk, a) in dst.chunks_exact_mut(3).zip(&m.0.atoms) {
            chunk.copy_from_slice(&a.position);
        }
        Ok(())
    })
}

/// # Safety
/// `text` must be a NUL-terminated string, `owner` a live handle and `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_modeset_parse(
    text: *const c_char,
    owner: *const VbMolecule,
    out: *mut *mut VbModeSet,
) -> VbStatus {
    guard(|| {
        let t = unsafe { c_str(text, "text") }?;
        let owner = unsafe { owner.as_ref() }.ok_or_else(|| null("owner"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = parse_modes(t, &owner.0).map_err(|e| (VbStatus::ParseError, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(VbModeSet(s))) };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vb_modeset_free(s: *mut VbModeSet) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_max_amplitude(force_constant: f64, temperature: f64, out: *mut f64) -> VbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = max_amplitude(force_constant, temperature).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        unsafe { *out = a };
        Ok(())
    })
}

/// Draws one perturbed geometry from stream `(seed, stream_id)`.
///
/// # Safety
/// `m` and `modes` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_perturb(
    m: *const VbMolecule,
    modes: *const VbModeSet,
    temperature: f64,
    sigma_fraction: f64,
    modes_per_sample: usize,
    seed: u64,
    stream_id: u64,
    out: *mut *mut VbMolecule,
) -> VbStatus {
    guard(|| {
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("molecule"))?;
        let s = unsafe { modes.as_ref() }.ok_or_else(|| null("modes"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = VibrationConfig {
            temperature,
            sigma_fraction,
            modes_per_sample,
            ..VibrationConfig::default()
        };
        let mut rng = RngStream::new(seed, stream_id);
        let p = perturb(&m.0, &s.0, &cfg, &mut rng).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(VbMolecule(p))) };
        Ok(())
    })
}

/// Fills `out[0..444]` with the descriptor vector. `substrate` is 0 (PSF),
/// 1 (PES) or 2 (PAN).
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vb_encode(
    aqueous_conc: f64,
    organic_conc: f64,
    pressure: f64,
    substrate: u8,
    a: *const VbMolecule,
    b: *const VbMolecule,
    out: *mut f64,
    len: usize,
) -> VbStatus {
    guard(|| {
        let a = unsafe { a.as_ref() }.ok_or_else(|| null("monomer a"))?;
        let b = unsafe { b.as_ref() }.ok_or_else(|| null("monomer b"))?;
        let dst = unsafe { out_slice(out, len, FEATURE_DIMS, "out") }?;
        let substrate = Substrate::from_code(substrate)
            .ok_or_else(|| (VbStatus::InvalidArgument, format!("substrate code {substrate} is not 0, 1 or 2")))?;
        let c = Conditions {
            aqueous_conc,
            organic_conc,
            pressure,
            substrate,
        };
        c.validate().map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        let v = encode(&c, &a.0, &b.0).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        dst[..FEATURE_DIMS].copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// # Safety
/// `y` and `yhat` must be valid for `n` doubles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_evaluate(y: *const f64, yhat: *const f64, n: usize, out: *mut VbMetrics) -> VbStatus {
    guard(|| {
        if y.is_null() || yhat.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let (y, p) = unsafe { (std::slice::from_raw_parts(y, n), std::slice::from_raw_parts(yhat, n)) };
        let r = evaluate(y, p).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        let mut m = VbMetrics {
            rmse: r.rmse,
            mse: r.mse,
            n: r.n,
            ..VbMetrics::default()
        };
        for (v, slot, bit) in [
            (r.pcc, &mut m.pcc, VB_METRIC_PCC),
            (r.r2, &mut m.r2, VB_METRIC_R2),
            (r.mre_percent, &mut m.mre_percent, VB_METRIC_MRE),
        ] {
            if let Some(v) = v {
                *slot = v;
                m.defined |= bit;
            }
        }
        unsafe { *out = m };
        Ok(())
    })
}

/// Loads a model file written by `vibaug train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vb_model_load(path: *const c_char, out: *mut *mut VbModel) -> VbStatus {
    guard(|| {
        let p = unsafe { c_str(path, "path") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_pipeline(Path::new(p)).map_err(|e| (VbStatus::IoError, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(VbModel(model))) };
        Ok(())
    })
}

/// Predicts `rows` unscaled descriptor rows (row-major, `cols` = 444).
///
/// # Safety
/// `model` must be a live handle; `x` valid for `rows × cols` doubles and
/// `out` for `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn vb_model_predict(
    model: *const VbModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> VbStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let dst = unsafe { out_slice(out, rows, rows, "out") }?;
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| (VbStatus::InvalidArgument, "rows × cols overflows".to_string()))?;
        let data = unsafe { std::slice::from_raw_parts(x, total) };
        let view = ArrayView2::from_shape((rows, cols), data).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        let pred = model.0.predict(view).map_err(|e| (VbStatus::InvalidArgument, e.to_string()))?;
        dst.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vb_model_free(m: *mut VbModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
