//! C ABI over `flowdeblur`.
//!
//! Images and flows cross the boundary as opaque handles. Every fallible
//! call returns an [`FdStatus`]; on failure the message is kept per thread
//! and can be fetched with [`fd_last_error`].
//!
//! Image data is planar `float`, channel-major, row-major inside a plane.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use flowdeblur::hqs::{global_iterate, HqsSchedule, StoredFlow};
use flowdeblur::io::BitDepth;
use flowdeblur::priors::{DenoiserPrior, IdentityPrior, TvParams, TvPrior};
use flowdeblur::{BoundaryPolicy, Error, Image, MotionFlowMap};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    Parameter = 3,
    Io = 4,
    Image = 5,
    Format = 6,
    Numerical = 7,
    External = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdBoundary {
    Replicate = 0,
    Zero = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdPrior {
    Identity = 0,
    Tv = 1,
}

/// Options for [`fd_hqs_deblur`]. Start from [`fd_deblur_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdDeblurOptions {
    /// Strictly increasing coupling weights; null selects the default schedule.
    pub betas: *const f64,
    pub n_betas: usize,
    pub cg_tol: f64,
    pub cg_max_iter: u32,
    /// The stored flow is reused on every pass.
    pub global_iterations: u32,
    pub boundary: FdBoundary,
    pub prior: FdPrior,
    /// Uniform TV weight; zero or less halves a default weight per level.
    pub tv_weight: f64,
    pub tv_inner_iters: u32,
}

pub struct FdImage {
    inner: Image,
}

pub struct FdFlow {
    inner: MotionFlowMap,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FdStatus {
    match err {
        Error::Shape(_) => FdStatus::Shape,
        Error::Parameter(_) => FdStatus::Parameter,
        Error::Io { .. } => FdStatus::Io,
        Error::Image { .. } => FdStatus::Image,
        Error::Format(_) => FdStatus::Format,
        Error::Numerical { .. } => FdStatus::Numerical,
        Error::External(_) => FdStatus::External,
    }
}

struct Fail(FdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FdStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FdStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FdStatus::Parameter, "path is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boundary(b: FdBoundary) -> BoundaryPolicy {
    match b {
        FdBoundary::Replicate => BoundaryPolicy::Replicate,
        FdBoundary::Zero => BoundaryPolicy::Zero,
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Black image.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_image_new(width: usize, height: usize, channels: usize, out: *mut *mut FdImage) -> FdStatus {
    guard(|| put(out, FdImage { inner: Image::zeros(width, height, channels)? }))
}

/// Copies `width * height * channels` planar floats.
///
/// # Safety
/// `data` must point to that many floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_image_from_data(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f32,
    out: *mut *mut FdImage,
) -> FdStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(channels))
            .ok_or_else(|| Fail(FdStatus::Parameter, "image size overflows".into()))?;
        let data = slice(data, n, "data")?.to_vec();
        put(out, FdImage { inner: Image::from_planar(width, height, channels, data)? })
    })
}

/// # Safety
/// `image` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fd_image_free(image: *mut FdImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// # Safety
/// `image` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn fd_image_width(image: *const FdImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.width())
}

/// # Safety
/// As [`fd_image_width`].
#[no_mangle]
pub unsafe extern "C" fn fd_image_height(image: *const FdImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.height())
}

/// # Safety
/// As [`fd_image_width`].
#[no_mangle]
pub unsafe extern "C" fn fd_image_channels(image: *const FdImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.channels())
}

/// Borrowed planar samples, valid while the handle lives.
///
/// # Safety
/// As [`fd_image_width`].
#[no_mangle]
pub unsafe extern "C" fn fd_image_data(image: *const FdImage) -> *const f32 {
    image.as_ref().map_or(ptr::null(), |i| i.inner.data().as_ptr())
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_image_read_png(path_: *const c_char, out: *mut *mut FdImage) -> FdStatus {
    guard(|| put(out, FdImage { inner: flowdeblur::read_image(path(path_)?)? }))
}

/// `bit_depth` is 8 or 16.
///
/// # Safety
/// `image` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fd_image_write_png(image: *const FdImage, path_: *const c_char, bit_depth: u32) -> FdStatus {
    guard(|| {
        let image = as_ref(image, "image")?;
        let depth = match bit_depth {
            8 => BitDepth::Eight,
            16 => BitDepth::Sixteen,
            d => return Err(Fail(FdStatus::Parameter, format!("bit depth must be 8 or 16, got {d}"))),
        };
        flowdeblur::write_image(&image.inner, path(path_)?, depth)?;
        Ok(())
    })
}

/// Copies `width * height` floats from each of `u` and `v`. Both null gives a
/// zero flow.
///
/// # Safety
/// `u` and `v` must each point to `width * height` floats or both be null.
#[no_mangle]
pub unsafe extern "C" fn fd_flow_new(
    width: usize,
    height: usize,
    u: *const f32,
    v: *const f32,
    out: *mut *mut FdFlow,
) -> FdStatus {
    guard(|| {
        let flow = if u.is_null() && v.is_null() {
            MotionFlowMap::zeros(width, height)?
        } else {
            let n = width
                .checked_mul(height)
                .ok_or_else(|| Fail(FdStatus::Parameter, "flow size overflows".into()))?;
            MotionFlowMap::new(width, height, slice(u, n, "u")?.to_vec(), slice(v, n, "v")?.to_vec())?
        };
        put(out, FdFlow { inner: flow })
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_flow_read(path_: *const c_char, out: *mut *mut FdFlow) -> FdStatus {
    guard(|| put(out, FdFlow { inner: flowdeblur::read_flow(path(path_)?)? }))
}

/// # Safety
/// `flow` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fd_flow_write(flow: *const FdFlow, path_: *const c_char) -> FdStatus {
    guard(|| {
        flowdeblur::write_flow(&as_ref(flow, "flow")?.inner, path(path_)?)?;
        Ok(())
    })
}

/// # Safety
/// `flow` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fd_flow_free(flow: *mut FdFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// # Safety
/// `flow` must be live or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn fd_flow_width(flow: *const FdFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.inner.width())
}

/// # Safety
/// As [`fd_flow_width`].
#[no_mangle]
pub unsafe extern "C" fn fd_flow_height(flow: *const FdFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.inner.height())
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_forward_blur(
    sharp: *const FdImage,
    flow: *const FdFlow,
    boundary_: FdBoundary,
    out: *mut *mut FdImage,
) -> FdStatus {
    guard(|| {
        let img = flowdeblur::forward_blur(
            &as_ref(sharp, "image")?.inner,
            &as_ref(flow, "flow")?.inner,
            boundary(boundary_),
        )?;
        put(out, FdImage { inner: img })
    })
}

/// # Safety
/// As [`fd_forward_blur`].
#[no_mangle]
pub unsafe extern "C" fn fd_adjoint_blur(
    residual: *const FdImage,
    flow: *const FdFlow,
    boundary_: FdBoundary,
    out: *mut *mut FdImage,
) -> FdStatus {
    guard(|| {
        let img = flowdeblur::adjoint_blur(
            &as_ref(residual, "image")?.inner,
            &as_ref(flow, "flow")?.inner,
            boundary(boundary_),
        )?;
        put(out, FdImage { inner: img })
    })
}

/// PSNR in dB against a reference; identical images give +infinity.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_psnr(a: *const FdImage, b: *const FdImage, out: *mut f64) -> FdStatus {
    guard(|| {
        let v = flowdeblur::psnr(&as_ref(a, "image")?.inner, &as_ref(b, "reference")?.inner)?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = v;
        Ok(())
    })
}

/// # Safety
/// As [`fd_psnr`].
#[no_mangle]
pub unsafe extern "C" fn fd_ssim(a: *const FdImage, b: *const FdImage, out: *mut f64) -> FdStatus {
    guard(|| {
        let v = flowdeblur::ssim(&as_ref(a, "image")?.inner, &as_ref(b, "reference")?.inner)?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = v;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn fd_deblur_options_default() -> FdDeblurOptions {
    let s = HqsSchedule::default();
    let tv = TvParams::default();
    FdDeblurOptions {
        betas: ptr::null(),
        n_betas: 0,
        cg_tol: s.cg_tol,
        cg_max_iter: s.cg_max_iter as u32,
        global_iterations: 1,
        boundary: FdBoundary::Replicate,
        prior: FdPrior::Tv,
        tv_weight: 0.0,
        tv_inner_iters: tv.inner_iters as u32,
    }
}

/// Non-blind restoration of `observed` under a known flow.
///
/// # Safety
/// Handles must be live; `options` may be null for defaults; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fd_hqs_deblur(
    observed: *const FdImage,
    flow: *const FdFlow,
    options: *const FdDeblurOptions,
    out: *mut *mut FdImage,
) -> FdStatus {
    guard(|| {
        let observed = &as_ref(observed, "image")?.inner;
        let flow = &as_ref(flow, "flow")?.inner;
        let opts = options.as_ref().copied().unwrap_or_else(|| fd_deblur_options_default());
        let betas = slice(opts.betas, opts.n_betas, "betas")?;
        let mut schedule = if betas.is_empty() {
            HqsSchedule::default()
        } else {
            HqsSchedule {
                betas: betas.to_vec(),
                ..HqsSchedule::default()
            }
        };
        schedule.cg_tol = opts.cg_tol;
        schedule.cg_max_iter = opts.cg_max_iter as usize;
        schedule.global_iterations = opts.global_iterations as usize;
        schedule.boundary = boundary(opts.boundary);
        let mut prior: Box<dyn DenoiserPrior> = match opts.prior {
            FdPrior::Identity => Box::new(IdentityPrior),
            FdPrior::Tv => {
                let mut params = if opts.tv_weight > 0.0 {
                    TvParams::uniform(opts.tv_weight)
                } else {
                    TvParams::halving(schedule.levels())
                };
                params.inner_iters = opts.tv_inner_iters as usize;
                Box::new(TvPrior::new(params)?)
            }
        };
        let (img, _) = global_iterate(observed, &mut StoredFlow(flow.clone()), prior.as_mut(), &schedule)?;
        put(out, FdImage { inner: img })
    })
}
