//! C ABI over trajkit.
//!
//! Every function returns a [`TkStatus`] (or a plain value for accessors)
//! and never unwinds across the boundary. On failure the message is kept
//! per thread and can be read with [`tk_last_error_message`].
//!
//! Coordinates are row-major `f64` buffers with 34 columns per frame
//! (`x1, y1, ..., x17, y17`), already normalized by the video resolution.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use trajkit::backbone::BackboneModel;
use trajkit::classifier::{fuse_late, ClassifierModel};
use trajkit::error::TrajkitError;
use trajkit::ground_truth::{fit_gmm, score_trajectory, silhouette, GmmModel};
use trajkit::matrix::Matrix;
use trajkit::trajectory::{
    ClassLabel, JointFrame, Segment, SegmentRef, Trajectory, TrajectoryLabel, COORDS,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad input: wrong shape, non-finite values, malformed files.
    Invalid = 2,
    Io = 3,
    /// A computation failed on valid input.
    Runtime = 4,
    Panic = 5,
}

/// Trained autoencoder backbone.
pub struct TkBackbone(BackboneModel);

/// Two-component Gaussian mixture over anomaly scores.
pub struct TkGmm(GmmModel);

/// Trained segment classifier.
pub struct TkClassifier(ClassifierModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Lib(TrajkitError),
}

impl From<TrajkitError> for Fail {
    fn from(e: TrajkitError) -> Self {
        Fail::Lib(e)
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Lib(TrajkitError::InvalidArgument(msg.into()))
}

fn status_of(e: &TrajkitError) -> TkStatus {
    match e {
        TrajkitError::Io { .. } => TkStatus::Io,
        TrajkitError::Context { source, .. } | TrajkitError::Stage { source, .. } => {
            status_of(source)
        }
        e if e.is_validation() => TkStatus::Invalid,
        _ => TkStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TkStatus::Ok,
        Ok(Err(Fail::Null(arg))) => {
            set_error(format!("null pointer passed as `{arg}`"));
            TkStatus::NullPointer
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
            set_error(format!("panic: {msg}"));
            TkStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tk_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if the last
/// call succeeded. Valid until the next trajkit call on the same thread.
#[no_mangle]
pub extern "C" fn tk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a backbone checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
/// The handle must be released with [`tk_backbone_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_backbone_load(
    path: *const c_char,
    out: *mut *mut TkBackbone,
) -> TkStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, TkBackbone(BackboneModel::load(&p)?))
    })
}

/// # Safety
/// `b` must be null or a handle from [`tk_backbone_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tk_backbone_free(b: *mut TkBackbone) {
    free(b)
}

/// Hidden size of the backbone, 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live backbone handle.
#[no_mangle]
pub unsafe extern "C" fn tk_backbone_hidden(b: *const TkBackbone) -> usize {
    b.as_ref().map_or(0, |b| b.0.hidden())
}

/// Segment length the backbone was built for, 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live backbone handle.
#[no_mangle]
pub unsafe extern "C" fn tk_backbone_window(b: *const TkBackbone) -> usize {
    b.as_ref().map_or(0, |b| b.0.window())
}

/// Anomaly score of one trajectory: mean reconstruction loss over its
/// segments taken every `stride` frames. Frames are numbered from 0.
///
/// # Safety
/// `coords` must hold `frames * 34` values; `out_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tk_backbone_score(
    b: *const TkBackbone,
    coords: *const f64,
    frames: usize,
    stride: usize,
    out_score: *mut f64,
) -> TkStatus {
    guard(|| {
        let b = non_null(b, "backbone")?;
        let n = frames
            .checked_mul(COORDS)
            .ok_or_else(|| invalid("frame count overflows"))?;
        let data = slice(coords, n, "coords")?;
        let out = slice_mut(out_score, 1, "out_score")?;
        let frames: Vec<JointFrame> = data
            .chunks_exact(COORDS)
            .enumerate()
            .map(|(i, row)| JointFrame {
                frame_index: i as u64,
                coords: row.try_into().expect("chunk of COORDS"),
            })
            .collect();
        let t = Trajectory::new("ffi", "0", ClassLabel::NORMAL, frames)?;
        out[0] = score_trajectory(&b.0, &t, stride)?.alpha;
        Ok(())
    })
}

/// Fits the two-component mixture to `n` scores.
///
/// # Safety
/// `scores` must hold `n` values; `out` must be writable. Release the
/// handle with [`tk_gmm_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_gmm_fit(
    scores: *const f64,
    n: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
    out: *mut *mut TkGmm,
) -> TkStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        put(out, TkGmm(fit_gmm(s, max_iter, tol, seed)?))
    })
}

/// # Safety
/// `g` must be null or a handle from [`tk_gmm_fit`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tk_gmm_free(g: *mut TkGmm) {
    free(g)
}

/// Copies weights, means and variances (two values each). Any output
/// pointer may be null to skip it.
///
/// # Safety
/// Non-null outputs must have room for two values.
#[no_mangle]
pub unsafe extern "C" fn tk_gmm_params(
    g: *const TkGmm,
    weights: *mut f64,
    means: *mut f64,
    variances: *mut f64,
) -> TkStatus {
    guard(|| {
        let g = non_null(g, "gmm")?;
        for (dst, src) in [
            (weights, g.0.weights),
            (means, g.0.means),
            (variances, g.0.variances),
        ] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, 2).copy_from_slice(&src);
            }
        }
        Ok(())
    })
}

/// Writes 1 for scores assigned to the abnormal component, 0 otherwise.
///
/// # Safety
/// `scores` and `out_abnormal` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn tk_gmm_assign(
    g: *const TkGmm,
    scores: *const f64,
    n: usize,
    out_abnormal: *mut u8,
) -> TkStatus {
    guard(|| {
        let g = non_null(g, "gmm")?;
        let s = slice(scores, n, "scores")?;
        let out = slice_mut(out_abnormal, n, "out_abnormal")?;
        for (o, &x) in out.iter_mut().zip(s) {
            *o = u8::from(g.0.assign(x) == TrajectoryLabel::Abnormal);
        }
        Ok(())
    })
}

/// Silhouette of a two-way split of one-dimensional scores. `abnormal[i]`
/// is nonzero for points in the abnormal cluster.
///
/// # Safety
/// `scores` and `abnormal` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn tk_silhouette(
    scores: *const f64,
    abnormal: *const u8,
    n: usize,
    out: *mut f64,
) -> TkStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        if abnormal.is_null() {
            return Err(Fail::Null("abnormal"));
        }
        let labels: Vec<TrajectoryLabel> = std::slice::from_raw_parts(abnormal, n)
            .iter()
            .map(|&a| {
                if a != 0 {
                    TrajectoryLabel::Abnormal
                } else {
                    TrajectoryLabel::Normal
                }
            })
            .collect();
        let out = slice_mut(out, 1, "out")?;
        out[0] = silhouette(s, &labels)?;
        Ok(())
    })
}

/// Late fusion of two probability vectors of length `n`.
///
/// # Safety
/// `a`, `b` and `out` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn tk_fuse_late(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut f64,
) -> TkStatus {
    guard(|| {
        let fused = fuse_late(slice(a, n, "a")?, slice(b, n, "b")?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&fused);
        Ok(())
    })
}

/// Loads a classifier checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
/// Release the handle with [`tk_classifier_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_classifier_load(
    path: *const c_char,
    out: *mut *mut TkClassifier,
) -> TkStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, TkClassifier(ClassifierModel::load(&p)?))
    })
}

/// # Safety
/// `c` must be null or a handle from [`tk_classifier_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tk_classifier_free(c: *mut TkClassifier) {
    free(c)
}

/// Number of classes, 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live classifier handle.
#[no_mangle]
pub unsafe extern "C" fn tk_classifier_classes(c: *const TkClassifier) -> usize {
    c.as_ref().map_or(0, |c| c.0.classes)
}

/// Class probabilities of one segment of `window * 34` coordinates. The
/// backbone must be the one the classifier was trained on.
///
/// # Safety
/// `coords` must hold `tk_backbone_window(b) * 34` values and `out_probs`
/// `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn tk_classifier_predict(
    c: *const TkClassifier,
    b: *const TkBackbone,
    coords: *const f64,
    out_probs: *mut f64,
    out_len: usize,
) -> TkStatus {
    guard(|| {
        let c = non_null(c, "classifier")?;
        let b = non_null(b, "backbone")?;
        c.0.check_backbone(&b.0)?;
        if out_len < c.0.classes {
            return Err(invalid(format!(
                "output holds {out_len} values, need {}",
                c.0.classes
            )));
        }
        let w = b.0.window();
        let raw = Matrix::from_vec(w, COORDS, slice(coords, w * COORDS, "coords")?.to_vec())?;
        let source = SegmentRef {
            video_id: "ffi".into(),
            person_id: "0".into(),
            start_frame: 0,
        };
        let seg = Segment::from_raw(source, ClassLabel::NORMAL, raw)?;
        let p = c.0.predict_proba(&b.0, &seg)?;
        slice_mut(out_probs, p.len(), "out_probs")?.copy_from_slice(&p);
        Ok(())
    })
}
