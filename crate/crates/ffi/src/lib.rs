//! C ABI for the botsort tracker, evaluator and motion estimator.
//!
//! Every fallible function returns a [`BotsortStatus`]. On failure a
//! human-readable message is available from [`botsort_last_error`] on the
//! same thread. Handles are opaque and must be released with the matching
//! `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use botsort::gmc::{self, GmcConfig, GrayImage};
use botsort::metrics::{self, EvalFrame};
use botsort::tracker::{normalize, Detection, TrackOutput, Tracker, TrackerConfig};
use botsort::{AffineWarp, BBox, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BotsortStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidBox = 3,
    DegenerateWarp = 4,
    Numerical = 5,
    FrameOrder = 6,
    MissingEmbedding = 7,
    BufferTooSmall = 8,
    ImageError = 9,
    UndefinedMetric = 10,
    DuplicateId = 11,
    Internal = 99,
}

impl From<&Error> for BotsortStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidBox(_) | Error::InvalidMeasurement(_) => BotsortStatus::InvalidBox,
            Error::DegenerateWarp { .. } => BotsortStatus::DegenerateWarp,
            Error::SingularInnovation | Error::NoMotion(_) => BotsortStatus::Numerical,
            Error::NonMonotonicFrame { .. } => BotsortStatus::FrameOrder,
            Error::MissingEmbedding { .. } => BotsortStatus::MissingEmbedding,
            Error::ImageTooSmall { .. } | Error::DimensionMismatch(..) => BotsortStatus::ImageError,
            Error::UndefinedMetric(_) => BotsortStatus::UndefinedMetric,
            Error::DuplicateId { .. } => BotsortStatus::DuplicateId,
            Error::InvalidParameter(_) | Error::ShapeMismatch(_) | Error::Embedding(_) => {
                BotsortStatus::InvalidArgument
            }
            Error::Parse { .. } | Error::Io { .. } => BotsortStatus::Internal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: BotsortStatus, msg: &str) -> BotsortStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), BotsortStatus>) -> BotsortStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BotsortStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(BotsortStatus::Internal, "internal panic"),
    }
}

fn check(r: botsort::Result<()>) -> Result<(), BotsortStatus> {
    r.map_err(|e| fail(BotsortStatus::from(&e), &e.to_string()))
}

fn lift<T>(r: botsort::Result<T>) -> Result<T, BotsortStatus> {
    r.map_err(|e| fail(BotsortStatus::from(&e), &e.to_string()))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], BotsortStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(BotsortStatus::NullPointer, &format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, BotsortStatus> {
    ptr.as_mut().ok_or_else(|| fail(BotsortStatus::NullPointer, &format!("{what} is null")))
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next botsort call on the same thread.
#[no_mangle]
pub extern "C" fn botsort_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn botsort_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Axis-aligned box in pixels: top-left corner and extent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BotsortBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BotsortBox {
    fn to_bbox(self) -> botsort::Result<BBox> {
        BBox::new(self.x, self.y, self.w, self.h)
    }

    fn from_bbox(b: &BBox) -> Self {
        BotsortBox { x: b.x_left, y: b.y_top, w: b.width, h: b.height }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BotsortDetection {
    pub bbox: BotsortBox,
    pub score: f64,
}

/// Row-major 2x3 affine map from previous-frame to current-frame pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BotsortWarp {
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
}

impl BotsortWarp {
    fn to_warp(self) -> botsort::Result<AffineWarp> {
        AffineWarp::new(self.a11, self.a12, self.a13, self.a21, self.a22, self.a23)
    }

    fn from_warp(w: &AffineWarp) -> Self {
        let [a11, a12, a13, a21, a22, a23] = w.as_array();
        BotsortWarp { a11, a12, a13, a21, a22, a23 }
    }
}

#[no_mangle]
pub extern "C" fn botsort_warp_identity() -> BotsortWarp {
    BotsortWarp::from_warp(&AffineWarp::IDENTITY)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BotsortConfig {
    pub tau: f64,
    pub eta: f64,
    pub low_floor: f64,
    pub match_thresh_first: f64,
    pub match_thresh_second: f64,
    pub match_thresh_unconfirmed: f64,
    pub track_buffer: u32,
    pub alpha: f64,
    pub theta_iou: f64,
    pub theta_emb: f64,
    pub use_reid: bool,
    pub require_embeddings: bool,
    pub use_cmc: bool,
    pub cmc_cov: bool,
    pub output_pred: bool,
    pub pred_horizon: u32,
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub sigma_m: f64,
}

impl From<&TrackerConfig> for BotsortConfig {
    fn from(c: &TrackerConfig) -> Self {
        BotsortConfig {
            tau: c.tau,
            eta: c.eta,
            low_floor: c.low_floor,
            match_thresh_first: c.match_thresh_first,
            match_thresh_second: c.match_thresh_second,
            match_thresh_unconfirmed: c.match_thresh_unconfirmed,
            track_buffer: c.track_buffer,
            alpha: c.alpha,
            theta_iou: c.fusion.theta_iou,
            theta_emb: c.fusion.theta_emb,
            use_reid: c.use_reid,
            require_embeddings: c.require_embeddings,
            use_cmc: c.use_cmc,
            cmc_cov: c.cmc_cov,
            output_pred: c.output_pred,
            pred_horizon: c.pred_horizon,
            sigma_p: c.kf.sigma_p,
            sigma_v: c.kf.sigma_v,
            sigma_m: c.kf.sigma_m,
        }
    }
}

impl From<&BotsortConfig> for TrackerConfig {
    fn from(c: &BotsortConfig) -> Self {
        let mut t = TrackerConfig {
            tau: c.tau,
            eta: c.eta,
            low_floor: c.low_floor,
            match_thresh_first: c.match_thresh_first,
            match_thresh_second: c.match_thresh_second,
            match_thresh_unconfirmed: c.match_thresh_unconfirmed,
            track_buffer: c.track_buffer,
            alpha: c.alpha,
            use_reid: c.use_reid,
            require_embeddings: c.require_embeddings,
            use_cmc: c.use_cmc,
            cmc_cov: c.cmc_cov,
            output_pred: c.output_pred,
            pred_horizon: c.pred_horizon,
            ..TrackerConfig::default()
        };
        t.fusion.theta_iou = c.theta_iou;
        t.fusion.theta_emb = c.theta_emb;
        t.kf.sigma_p = c.sigma_p;
        t.kf.sigma_v = c.sigma_v;
        t.kf.sigma_m = c.sigma_m;
        t
    }
}

/// Default configuration (BoT-SORT without ReID, CMC on).
#[no_mangle]
pub extern "C" fn botsort_config_default() -> BotsortConfig {
    BotsortConfig::from(&TrackerConfig::default())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BotsortTrackOutput {
    pub track_id: u64,
    pub bbox: BotsortBox,
    pub score: f64,
    /// True for an extrapolated box of a just-lost track.
    pub predicted: bool,
}

impl From<&TrackOutput> for BotsortTrackOutput {
    fn from(o: &TrackOutput) -> Self {
        BotsortTrackOutput {
            track_id: o.track_id,
            bbox: BotsortBox::from_bbox(&o.bbox),
            score: o.score,
            predicted: o.predicted,
        }
    }
}

/// Opaque tracker handle.
pub struct BotsortTracker {
    inner: Tracker,
    last: Vec<BotsortTrackOutput>,
}

/// Creates a tracker. `config` may be null for defaults.
///
/// # Safety
/// `config` must be null or point to a valid config; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn botsort_tracker_new(
    config: *const BotsortConfig,
    out: *mut *mut BotsortTracker,
) -> BotsortStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = match config.as_ref() {
            Some(c) => TrackerConfig::from(c),
            None => TrackerConfig::default(),
        };
        let inner = lift(Tracker::new(cfg))?;
        *out = Box::into_raw(Box::new(BotsortTracker { inner, last: Vec::new() }));
        Ok(())
    })
}

/// # Safety
/// `tracker` must be null or a handle from `botsort_tracker_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn botsort_tracker_free(tracker: *mut BotsortTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

unsafe fn copy_out(
    src: &[BotsortTrackOutput],
    out: *mut BotsortTrackOutput,
    capacity: usize,
    out_len: *mut usize,
) -> Result<(), BotsortStatus> {
    *out_ref(out_len, "out_len")? = src.len();
    let n = src.len().min(capacity);
    if n > 0 {
        if out.is_null() {
            return Err(fail(BotsortStatus::NullPointer, "output buffer is null"));
        }
        std::ptr::copy_nonoverlapping(src.as_ptr(), out, n);
    }
    if src.len() > capacity {
        return Err(fail(
            BotsortStatus::BufferTooSmall,
            &format!("{} outputs do not fit in a buffer of {capacity}; fetch them with botsort_tracker_last_outputs", src.len()),
        ));
    }
    Ok(())
}

/// Advances the tracker by one frame. Frames must be consecutive.
///
/// `embeddings` is null or `num_dets * dim` floats, one row per detection;
/// `has_embedding` is null (every row present) or `num_dets` flags. Rows are
/// normalized here. `warp` null means identity. Up to `capacity` outputs,
/// sorted by id, are copied to `out`, and `*out_len` receives the total. If
/// the total exceeds `capacity` the step still happened, the status is
/// `BufferTooSmall`, and the full list stays available through
/// `botsort_tracker_last_outputs`.
///
/// # Safety
/// All non-null pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn botsort_tracker_step(
    tracker: *mut BotsortTracker,
    frame: u32,
    dets: *const BotsortDetection,
    num_dets: usize,
    embeddings: *const f32,
    dim: usize,
    has_embedding: *const u8,
    warp: *const BotsortWarp,
    out: *mut BotsortTrackOutput,
    capacity: usize,
    out_len: *mut usize,
) -> BotsortStatus {
    guard(|| {
        let t = out_ref(tracker, "tracker")?;
        let raw = slice(dets, num_dets, "dets")?;
        let embs = if embeddings.is_null() {
            None
        } else {
            if dim == 0 {
                return Err(fail(BotsortStatus::InvalidArgument, "embedding dim is zero"));
            }
            Some(slice(embeddings, num_dets * dim, "embeddings")?)
        };
        let mask = if has_embedding.is_null() { None } else { Some(slice(has_embedding, num_dets, "has_embedding")?) };
        let mut list = Vec::with_capacity(num_dets);
        for (i, d) in raw.iter().enumerate() {
            let mut det = Detection::new(lift(d.bbox.to_bbox())?, d.score);
            if let Some(e) = embs {
                if mask.is_none_or(|m| m[i] != 0) {
                    let v = normalize(&e[i * dim..(i + 1) * dim]).ok_or_else(|| {
                        fail(BotsortStatus::InvalidArgument, &format!("embedding {i} is zero or non-finite"))
                    })?;
                    det = det.with_embedding(v);
                }
            }
            list.push(det);
        }
        let w = match warp.as_ref() {
            Some(w) => lift(w.to_warp())?,
            None => AffineWarp::IDENTITY,
        };
        let outputs = lift(t.inner.step(frame, &list, &w))?;
        t.last = outputs.iter().map(BotsortTrackOutput::from).collect();
        copy_out(&t.last, out, capacity, out_len)
    })
}

/// Copies the outputs of the most recent step.
///
/// # Safety
/// As for `botsort_tracker_step`.
#[no_mangle]
pub unsafe extern "C" fn botsort_tracker_last_outputs(
    tracker: *const BotsortTracker,
    out: *mut BotsortTrackOutput,
    capacity: usize,
    out_len: *mut usize,
) -> BotsortStatus {
    guard(|| {
        let t = tracker.as_ref().ok_or_else(|| fail(BotsortStatus::NullPointer, "tracker is null"))?;
        copy_out(&t.last, out, capacity, out_len)
    })
}

/// Upper bound on the outputs of the next step given `num_dets` detections.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn botsort_tracker_max_outputs(tracker: *const BotsortTracker, num_dets: usize) -> usize {
    tracker.as_ref().map_or(0, |t| t.inner.tracks().len() + num_dets)
}

/// Opaque evaluation accumulator.
pub struct BotsortEvaluator {
    iou_thresh: f64,
    frames: Vec<EvalFrame>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BotsortEvalSummary {
    pub mota: f64,
    pub idf1: f64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub num_gt: u64,
    pub num_pred: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn botsort_evaluator_new(iou_thresh: f64, out: *mut *mut BotsortEvaluator) -> BotsortStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
            return Err(fail(BotsortStatus::InvalidArgument, &format!("iou threshold {iou_thresh} not in (0,1)")));
        }
        *out = Box::into_raw(Box::new(BotsortEvaluator { iou_thresh, frames: Vec::new() }));
        Ok(())
    })
}

/// # Safety
/// `ev` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn botsort_evaluator_free(ev: *mut BotsortEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Adds one frame; frame numbers must strictly increase.
///
/// # Safety
/// Arrays must be valid for their lengths.
#[no_mangle]
pub unsafe extern "C" fn botsort_evaluator_add_frame(
    ev: *mut BotsortEvaluator,
    frame: u32,
    gt_ids: *const i64,
    gt_boxes: *const BotsortBox,
    num_gt: usize,
    pred_ids: *const i64,
    pred_boxes: *const BotsortBox,
    num_pred: usize,
) -> BotsortStatus {
    guard(|| {
        let ev = out_ref(ev, "evaluator")?;
        if let Some(last) = ev.frames.last() {
            if frame <= last.frame {
                return Err(fail(
                    BotsortStatus::FrameOrder,
                    &format!("frame index {frame} does not follow {}", last.frame),
                ));
            }
        }
        let pairs = |ids: &[i64], boxes: &[BotsortBox]| -> Result<Vec<(i64, BBox)>, BotsortStatus> {
            ids.iter().zip(boxes).map(|(id, b)| Ok((*id, lift(b.to_bbox())?))).collect()
        };
        let gt = pairs(slice(gt_ids, num_gt, "gt_ids")?, slice(gt_boxes, num_gt, "gt_boxes")?)?;
        let pred = pairs(slice(pred_ids, num_pred, "pred_ids")?, slice(pred_boxes, num_pred, "pred_boxes")?)?;
        let f = EvalFrame { frame, gt, pred };
        // reject duplicates now rather than at summary time
        lift(metrics::match_frame(&mut Default::default(), &f, ev.iou_thresh))?;
        ev.frames.push(f);
        Ok(())
    })
}

/// # Safety
/// `ev` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn botsort_evaluator_summary(
    ev: *const BotsortEvaluator,
    out: *mut BotsortEvalSummary,
) -> BotsortStatus {
    guard(|| {
        let ev = ev.as_ref().ok_or_else(|| fail(BotsortStatus::NullPointer, "evaluator is null"))?;
        let out = out_ref(out, "out")?;
        let r = lift(metrics::evaluate(&ev.frames, ev.iou_thresh))?;
        *out = BotsortEvalSummary {
            mota: r.mota,
            idf1: r.id.idf1,
            fp: r.totals.fp,
            fn_: r.totals.fn_,
            idsw: r.totals.idsw,
            num_gt: r.totals.num_gt,
            num_pred: r.num_pred,
            idtp: r.id.idtp,
            idfp: r.id.idfp,
            idfn: r.id.idfn,
        };
        Ok(())
    })
}

/// Cumulative MOTA after each added frame, NaN where still undefined.
/// `*out_len` receives the number of frames.
///
/// # Safety
/// `out` must be valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn botsort_evaluator_cmota(
    ev: *const BotsortEvaluator,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> BotsortStatus {
    guard(|| {
        let ev = ev.as_ref().ok_or_else(|| fail(BotsortStatus::NullPointer, "evaluator is null"))?;
        let counts = lift(metrics::clear_counts(&ev.frames, ev.iou_thresh))?;
        let series = lift(metrics::cmota_series(&counts))?;
        *out_ref(out_len, "out_len")? = series.len();
        if series.len() > capacity {
            return Err(fail(BotsortStatus::BufferTooSmall, &format!("need {} entries", series.len())));
        }
        if !series.is_empty() {
            if out.is_null() {
                return Err(fail(BotsortStatus::NullPointer, "output buffer is null"));
            }
            for (i, (_, v)) in series.iter().enumerate() {
                *out.add(i) = v.unwrap_or(f64::NAN);
            }
        }
        Ok(())
    })
}

/// Estimates the warp from `prev` to `cur`, both `width * height` row-major
/// grayscale images. When there is too little texture or motion information
/// the identity is written and `*fallback` is set to true.
///
/// # Safety
/// Image buffers must hold `width * height` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn botsort_gmc_estimate(
    prev: *const f32,
    cur: *const f32,
    width: usize,
    height: usize,
    downscale: usize,
    seed: u64,
    out: *mut BotsortWarp,
    fallback: *mut bool,
) -> BotsortStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let n = width.checked_mul(height).ok_or_else(|| fail(BotsortStatus::InvalidArgument, "image too large"))?;
        let p = lift(GrayImage::new(width, height, slice(prev, n, "prev")?.to_vec()))?;
        let c = lift(GrayImage::new(width, height, slice(cur, n, "cur")?.to_vec()))?;
        if downscale < 1 {
            return Err(fail(BotsortStatus::InvalidArgument, "downscale must be >= 1"));
        }
        let cfg = GmcConfig { downscale, seed, ..GmcConfig::default() };
        let est = lift(gmc::estimate(&p, &c, &cfg))?;
        *out = BotsortWarp::from_warp(&est.warp);
        if let Some(f) = fallback.as_mut() {
            *f = est.warning.is_some();
        }
        Ok(())
    })
}

/// Validates a warp (finite entries, non-degenerate linear part).
#[no_mangle]
pub extern "C" fn botsort_warp_validate(warp: BotsortWarp) -> BotsortStatus {
    guard(|| check(warp.to_warp().map(|_| ())))
}
