//! C ABI over the eigensr toolkit.
//!
//! Cubes and models are opaque heap handles created by `esr_*` constructors
//! and released with the matching `*_free`. Every fallible call returns an
//! [`EsrStatus`]; on failure the message is kept per thread and can be read
//! with [`esr_last_error`]. Output handles are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use eigensr::inference::{eigensr, InferenceConfig};
use eigensr::metrics::evaluate;
use eigensr::model::checkpoint::load_weights;
use eigensr::model::{SrOperator, SuperResolve};
use eigensr::{io, Error, HsiCube, ScaleFactor};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Format = 5,
    Io = 6,
    Checkpoint = 7,
    ScaleMismatch = 8,
    Degenerate = 9,
    Panic = 10,
    Other = 11,
}

/// A hyperspectral cube, `bands × height × width`, band-major.
pub struct EsrCube(HsiCube);

/// A single-channel super-resolution operator.
pub struct EsrModel(SrOperator);

/// Scores of a prediction against a reference.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EsrMetrics {
    /// Mean PSNR over finite bands, dB. `+inf` when every band is exact.
    pub psnr: f64,
    /// Bands with zero error, excluded from the PSNR mean.
    pub psnr_infinite_bands: usize,
    /// Mean SSIM. Only meaningful when `ssim_valid` is nonzero.
    pub ssim: f64,
    /// Zero when the bands are smaller than the SSIM window.
    pub ssim_valid: i32,
    /// Mean spectral angle, degrees.
    pub sam: f64,
    pub peak: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> EsrStatus {
    match err {
        Error::DimensionMismatch(_) => EsrStatus::DimensionMismatch,
        Error::NonFinite { .. } | Error::NonFiniteInput(_) => EsrStatus::NonFinite,
        Error::Empty(_) | Error::RankOutOfRange { .. } | Error::InvalidArgument(_) => {
            EsrStatus::InvalidArgument
        }
        Error::Degenerate(_) => EsrStatus::Degenerate,
        Error::Format(_) | Error::UnrecognizedFormat(_) | Error::Json(_) => EsrStatus::Format,
        Error::Io(_) => EsrStatus::Io,
        Error::Checkpoint(_) => EsrStatus::Checkpoint,
        Error::ScaleMismatch { .. } => EsrStatus::ScaleMismatch,
        Error::NotTrainable => EsrStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EsrStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(format!("invalid argument: {msg}"));
            EsrStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            EsrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn scale_arg(scale: usize) -> Result<ScaleFactor, Fail> {
    Ok(ScaleFactor::new(scale)?)
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn esr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn esr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` values (band-major) into a new cube.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_new(
    bands: usize,
    height: usize,
    width: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut EsrCube,
) -> EsrStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let expected = bands
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Fail::Arg("shape overflows".into()))?;
        if len != expected {
            return Err(Fail::Arg(format!(
                "{len} values for shape {bands}x{height}x{width}"
            )));
        }
        let values = std::slice::from_raw_parts(data, len).to_vec();
        put(out, EsrCube(HsiCube::new(bands, height, width, values)?))
    })
}

/// Reads a `.hsc` or `.npy` cube.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_read(path: *const c_char, out: *mut *mut EsrCube) -> EsrStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, EsrCube(io::read_cube(path)?))
    })
}

/// Writes a cube; the format follows the file extension.
///
/// # Safety
/// `cube` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_write(cube: *const EsrCube, path: *const c_char) -> EsrStatus {
    guard(|| {
        let cube = deref(cube, "cube")?;
        let path = path_arg(path)?;
        Ok(io::write_cube(&cube.0, path)?)
    })
}

/// Shape of a cube. Any of the out pointers may be null.
///
/// # Safety
/// `cube` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_shape(
    cube: *const EsrCube,
    bands: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> EsrStatus {
    guard(|| {
        let (l, h, w) = deref(cube, "cube")?.0.shape();
        for (p, v) in [(bands, l), (height, h), (width, w)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Borrowed pointer to the cube's values, band-major; null for a null handle.
/// Valid until the cube is freed.
///
/// # Safety
/// `cube` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_data(cube: *const EsrCube) -> *const f64 {
    cube.as_ref().map_or(ptr::null(), |c| c.0.data().as_ptr())
}

/// # Safety
/// `cube` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn esr_cube_free(cube: *mut EsrCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// The plain bicubic operator at an integer scale of at least 2.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_model_bicubic(scale: usize, out: *mut *mut EsrModel) -> EsrStatus {
    guard(|| put(out, EsrModel(SrOperator::bicubic(scale_arg(scale)?))))
}

/// Loads trained weights from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_model_load(path: *const c_char, out: *mut *mut EsrModel) -> EsrStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, EsrModel(load_weights(path)?))
    })
}

/// Upscaling factor of a model, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esr_model_scale(model: *const EsrModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.scale().get())
}

/// # Safety
/// `model` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn esr_model_free(model: *mut EsrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn infer(
    cube: *const EsrCube,
    model: *const EsrModel,
    cfg: impl FnOnce(usize) -> InferenceConfig,
    out: *mut *mut EsrCube,
) -> EsrStatus {
    guard(|| {
        let cube = deref(cube, "cube")?;
        let model = deref(model, "model")?;
        let cfg = cfg(model.0.scale().get());
        put(out, EsrCube(eigensr(&cube.0, &model.0, &cfg)?))
    })
}

/// Single-pass eigenimage super-resolution. `rank` 0 picks the default.
///
/// # Safety
/// `cube` and `model` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_infer_alpha(
    cube: *const EsrCube,
    model: *const EsrModel,
    rank: usize,
    out: *mut *mut EsrCube,
) -> EsrStatus {
    infer(
        cube,
        model,
        |scale| {
            let cfg = InferenceConfig::alpha(scale);
            if rank > 0 {
                cfg.with_rank(rank)
            } else {
                cfg
            }
        },
        out,
    )
}

/// Iterative eigenimage super-resolution. `rank` and `iterations` 0 and a
/// non-positive `lambda` pick the defaults.
///
/// # Safety
/// `cube` and `model` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_infer_beta(
    cube: *const EsrCube,
    model: *const EsrModel,
    rank: usize,
    iterations: usize,
    lambda: f64,
    out: *mut *mut EsrCube,
) -> EsrStatus {
    infer(
        cube,
        model,
        |scale| {
            let mut cfg = InferenceConfig::beta(scale);
            if rank > 0 {
                cfg = cfg.with_rank(rank);
            }
            if iterations > 0 {
                cfg = cfg.with_iterations(iterations);
            }
            if lambda > 0.0 || lambda.is_nan() {
                cfg = cfg.with_lambda(lambda);
            }
            cfg
        },
        out,
    )
}

/// PSNR, SSIM and SAM of `pred` against `reference`. A non-positive `peak`
/// uses the reference maximum.
///
/// # Safety
/// `pred` and `reference` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esr_evaluate(
    pred: *const EsrCube,
    reference: *const EsrCube,
    peak: f64,
    out: *mut EsrMetrics,
) -> EsrStatus {
    guard(|| {
        let pred = deref(pred, "pred")?;
        let reference = deref(reference, "reference")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let peak = (peak > 0.0 || peak.is_nan()).then_some(peak);
        let r = evaluate(&pred.0, &reference.0, peak)?;
        *out = EsrMetrics {
            psnr: r.psnr,
            psnr_infinite_bands: r.psnr_infinite_bands,
            ssim: r.ssim.unwrap_or(f64::NAN),
            ssim_valid: r.ssim.is_some() as i32,
            sam: r.sam,
            peak: r.peak,
        };
        Ok(())
    })
}
