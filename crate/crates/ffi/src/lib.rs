//! C ABI for the `seqstab` library.
//!
//! The interface follows the usual handle-and-status conventions:
//!
//! * Control sequences live behind opaque [`SeqstabSequence`] handles
//!   created by [`seqstab_sequence_create`] and released by
//!   [`seqstab_sequence_free`].
//! * Every fallible function returns a [`SeqstabStatus`]; on failure a
//!   human-readable message is available from
//!   [`seqstab_last_error_message`] until the next failing call on the
//!   same thread.
//! * Panics never unwind across the boundary; they are caught and reported
//!   as [`SeqstabStatus::Panicked`].
//!
//! The matching C header is generated into `include/seqstab.h` at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::Array2;

use seqstab::aggregator::{aggregate, AttentionConfig, FrameFeatures};
use seqstab::error::Error;
use seqstab::metrics::{flv, rmse, roughness, FlowField};
use seqstab::stabilizer::{stabilize, ControlSequence, StabilizerConfig};

/// Result of a C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqstabStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// The input data was rejected (shape, finiteness, size overflow).
    InvalidInput = 2,
    /// The configuration was rejected (ensemble size, head count, …).
    InvalidConfig = 3,
    /// An internal panic was caught at the boundary.
    Panicked = 4,
}

/// Opaque handle to an in-memory control sequence (`frames × dims` doubles).
pub struct SeqstabSequence {
    inner: ControlSequence,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error message").expect("no interior NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(e: &Error) -> SeqstabStatus {
    match e {
        Error::InvalidConfig(_) => SeqstabStatus::InvalidConfig,
        _ => SeqstabStatus::InvalidInput,
    }
}

fn fail(e: &Error) -> SeqstabStatus {
    set_last_error(&e.to_string());
    status_of(e)
}

fn fail_null(what: &str) -> SeqstabStatus {
    set_last_error(&format!("{what} must not be null"));
    SeqstabStatus::NullPointer
}

/// Runs `body` with panics converted to [`SeqstabStatus::Panicked`].
fn guarded(body: impl FnOnce() -> SeqstabStatus) -> SeqstabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic caught at the C boundary");
            SeqstabStatus::Panicked
        }
    }
}

fn checked_area(a: usize, b: usize, what: &str) -> Result<usize, SeqstabStatus> {
    a.checked_mul(b).ok_or_else(|| {
        set_last_error(&format!("{what} dimensions overflow the address space"));
        SeqstabStatus::InvalidInput
    })
}

/// Message describing the most recent failure on this thread.
///
/// The pointer stays valid until the next failing `seqstab_*` call on the
/// same thread. Never null; initially the empty string.
///
/// # Safety
///
/// The returned pointer must not be freed or written through.
#[no_mangle]
pub unsafe extern "C" fn seqstab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a sequence handle from a row-major `frames × dims` buffer.
///
/// Returns null if `data` is null, the shape is degenerate (`frames < 2` or
/// `dims < 1`), or any entry is non-finite; the reason is available from
/// [`seqstab_last_error_message`].
///
/// # Safety
///
/// `data` must point to at least `frames * dims` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn seqstab_sequence_create(
    data: *const f64,
    frames: usize,
    dims: usize,
) -> *mut SeqstabSequence {
    let mut handle: *mut SeqstabSequence = std::ptr::null_mut();
    guarded(|| {
        if data.is_null() {
            return fail_null("data");
        }
        let len = match checked_area(frames, dims, "sequence") {
            Ok(len) => len,
            Err(status) => return status,
        };
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let array = match Array2::from_shape_vec((frames, dims), values) {
            Ok(array) => array,
            Err(e) => {
                set_last_error(&e.to_string());
                return SeqstabStatus::InvalidInput;
            }
        };
        match ControlSequence::from_array(array) {
            Ok(inner) => {
                handle = Box::into_raw(Box::new(SeqstabSequence { inner }));
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    });
    handle
}

/// Releases a handle returned by this library. Null is a no-op.
///
/// # Safety
///
/// `seq` must be null or a live handle from this library; the handle must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn seqstab_sequence_free(seq: *mut SeqstabSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Number of frames in the sequence; 0 if `seq` is null.
///
/// # Safety
///
/// `seq` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn seqstab_sequence_frames(seq: *const SeqstabSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.inner.frames())
}

/// Number of dimensions per frame; 0 if `seq` is null.
///
/// # Safety
///
/// `seq` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn seqstab_sequence_dims(seq: *const SeqstabSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.inner.dims())
}

/// Copies the sequence out as a row-major `frames × dims` buffer.
///
/// `len` must equal `frames * dims` exactly.
///
/// # Safety
///
/// `seq` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn seqstab_sequence_copy_data(
    seq: *const SeqstabSequence,
    out: *mut f64,
    len: usize,
) -> SeqstabStatus {
    guarded(|| {
        let Some(seq) = seq.as_ref() else {
            return fail_null("seq");
        };
        if out.is_null() {
            return fail_null("out");
        }
        let expected = seq.inner.frames() * seq.inner.dims();
        if len != expected {
            set_last_error(&format!("out holds {len} doubles, sequence has {expected}"));
            return SeqstabStatus::InvalidInput;
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for (dst, src) in out.iter_mut().zip(seq.inner.values().iter()) {
            *dst = *src;
        }
        SeqstabStatus::Ok
    })
}

/// Stabilizes `seq` with an `m`-member spline ensemble and writes a new
/// handle to `out`.
///
/// `inlier_fraction` is the fraction of ensemble members kept per
/// timestamp (pass 2.0/3.0 for the default policy). On failure `out` is
/// untouched.
///
/// # Safety
///
/// `seq` must be a live handle; `out` must be a valid location for one
/// pointer. The new handle must be released with
/// [`seqstab_sequence_free`].
#[no_mangle]
pub unsafe extern "C" fn seqstab_stabilize(
    seq: *const SeqstabSequence,
    m: usize,
    inlier_fraction: f64,
    out: *mut *mut SeqstabSequence,
) -> SeqstabStatus {
    guarded(|| {
        let Some(seq) = seq.as_ref() else {
            return fail_null("seq");
        };
        if out.is_null() {
            return fail_null("out");
        }
        let config = StabilizerConfig { m, inlier_fraction };
        match stabilize(&seq.inner, &config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SeqstabSequence { inner }));
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Root-mean-square difference between two sequences of identical shape.
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be a valid location for
/// one double.
#[no_mangle]
pub unsafe extern "C" fn seqstab_rmse(
    a: *const SeqstabSequence,
    b: *const SeqstabSequence,
    out: *mut f64,
) -> SeqstabStatus {
    guarded(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return fail_null("a and b");
        };
        if out.is_null() {
            return fail_null("out");
        }
        match rmse(&a.inner, &b.inner) {
            Ok(value) => {
                *out = value;
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mean squared second difference of a sequence (larger = jerkier).
///
/// # Safety
///
/// `seq` must be a live handle; `out` must be a valid location for one
/// double.
#[no_mangle]
pub unsafe extern "C" fn seqstab_roughness(
    seq: *const SeqstabSequence,
    out: *mut f64,
) -> SeqstabStatus {
    guarded(|| {
        let Some(seq) = seq.as_ref() else {
            return fail_null("seq");
        };
        if out.is_null() {
            return fail_null("out");
        }
        match roughness(&seq.inner) {
            Ok(value) => {
                *out = value;
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mean per-pixel Euclidean displacement over `count` flow fields.
///
/// `u` and `v` each hold `count` consecutive row-major `height × width`
/// planes: entry `f*height*width + y*width + x` is the component at pixel
/// `(x, y)` of field `f`.
///
/// # Safety
///
/// `u` and `v` must point to `count * width * height` readable doubles;
/// `out` must be a valid location for one double.
#[no_mangle]
pub unsafe extern "C" fn seqstab_flv(
    u: *const f64,
    v: *const f64,
    width: usize,
    height: usize,
    count: usize,
    out: *mut f64,
) -> SeqstabStatus {
    guarded(|| {
        if u.is_null() || v.is_null() {
            return fail_null("u and v");
        }
        if out.is_null() {
            return fail_null("out");
        }
        let area = match checked_area(width, height, "flow") {
            Ok(area) => area,
            Err(status) => return status,
        };
        let total = match checked_area(area, count, "flow stack") {
            Ok(total) => total,
            Err(status) => return status,
        };
        let u = std::slice::from_raw_parts(u, total);
        let v = std::slice::from_raw_parts(v, total);
        let mut flows = Vec::with_capacity(count);
        for f in 0..count {
            let plane = |data: &[f64]| {
                Array2::from_shape_vec((height, width), data[f * area..(f + 1) * area].to_vec())
                    .expect("plane slice matches the declared shape")
            };
            match FlowField::new(plane(u), plane(v)) {
                Ok(flow) => flows.push(flow),
                Err(e) => return fail(&e),
            }
        }
        match flv(&flows) {
            Ok(value) => {
                *out = value;
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fuses per-frame latent codes with multi-head cross-attention.
///
/// Buffer layout, all row-major and frame-major:
/// * `queries`, `keys`: `frame_count × key_dim`;
/// * `latents`: `frame_count × layers × channels`;
/// * `out`: one `layers × channels` code.
///
/// `heads` must divide both `key_dim` and `channels`.
///
/// # Safety
///
/// The buffers must be readable (resp. writable for `out`) at the sizes
/// implied by the layout above.
#[no_mangle]
pub unsafe extern "C" fn seqstab_aggregate(
    queries: *const f64,
    keys: *const f64,
    latents: *const f64,
    frame_count: usize,
    key_dim: usize,
    layers: usize,
    channels: usize,
    heads: usize,
    out: *mut f64,
) -> SeqstabStatus {
    guarded(|| {
        if queries.is_null() || keys.is_null() || latents.is_null() {
            return fail_null("queries, keys, and latents");
        }
        if out.is_null() {
            return fail_null("out");
        }
        let qk_len = match checked_area(frame_count, key_dim, "query/key stack") {
            Ok(len) => len,
            Err(status) => return status,
        };
        let code_len = match checked_area(layers, channels, "latent code") {
            Ok(len) => len,
            Err(status) => return status,
        };
        let latent_len = match checked_area(frame_count, code_len, "latent stack") {
            Ok(len) => len,
            Err(status) => return status,
        };
        let queries = std::slice::from_raw_parts(queries, qk_len);
        let keys = std::slice::from_raw_parts(keys, qk_len);
        let latents = std::slice::from_raw_parts(latents, latent_len);

        let mut frames = Vec::with_capacity(frame_count);
        for f in 0..frame_count {
            let latent = Array2::from_shape_vec(
                (layers, channels),
                latents[f * code_len..(f + 1) * code_len].to_vec(),
            )
            .expect("latent slice matches the declared shape");
            match FrameFeatures::new(
                queries[f * key_dim..(f + 1) * key_dim].to_vec(),
                keys[f * key_dim..(f + 1) * key_dim].to_vec(),
                latent,
            ) {
                Ok(frame) => frames.push(frame),
                Err(e) => return fail(&e),
            }
        }
        let config = AttentionConfig {
            heads,
            key_dim,
            layers,
            channels,
        };
        match aggregate(&frames, &config) {
            Ok(code) => {
                let out = std::slice::from_raw_parts_mut(out, code_len);
                for (dst, src) in out.iter_mut().zip(code.values().iter()) {
                    *dst = *src;
                }
                SeqstabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
