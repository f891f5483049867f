//! Global (camera) motion estimation between consecutive frames.
//!
//! Pipeline: corner detection on the previous frame, pyramidal Lucas-Kanade
//! tracking into the current frame, per-cell translation consistency filter,
//! and a RANSAC affine fit. Failures degrade to the identity warp with a
//! warning so that tracking can always proceed.

pub mod corners;
pub mod flow;
pub mod image;
pub mod outliers;
pub mod ransac;
pub mod warp;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use corners::{detect_corners, CornerParams};
pub use flow::{track_flow, Correspondence, LkParams};
pub use image::{read_pgm, write_pgm, GrayImage, MIN_ESTIMATION_DIM};
pub use outliers::{reject_outliers, OutlierParams};
pub use ransac::{ransac_affine, ransac_affine_fit, AffineFit, RansacParams};
pub use warp::{load_warps, save_warps, AffineWarp, WarpTable};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmcConfig {
    /// Integer downscale applied to both frames before estimation.
    pub downscale: usize,
    pub corners: CornerParams,
    pub flow: LkParams,
    pub outliers: OutlierParams,
    pub ransac: RansacParams,
    pub seed: u64,
}

impl Default for GmcConfig {
    fn default() -> Self {
        GmcConfig {
            downscale: 1,
            corners: CornerParams::default(),
            flow: LkParams::default(),
            outliers: OutlierParams::default(),
            ransac: RansacParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionEstimate {
    pub warp: AffineWarp,
    /// Set when estimation failed and `warp` is the identity fallback.
    pub warning: Option<String>,
    pub inliers: usize,
}

/// Estimates the warp mapping `prev` pixel coordinates onto `cur`.
///
/// Dimension and size problems are errors; a scene with too little usable
/// motion information yields identity plus a warning.
pub fn estimate(prev: &GrayImage, cur: &GrayImage, cfg: &GmcConfig) -> Result<MotionEstimate> {
    prev.same_dims(cur)?;
    let k = cfg.downscale.max(1);
    let (p, c) = if k > 1 { (prev.downscale(k)?, cur.downscale(k)?) } else { (prev.clone(), cur.clone()) };
    p.ensure_min_dim(MIN_ESTIMATION_DIM)?;

    let fallback = |why: String| MotionEstimate { warp: AffineWarp::IDENTITY, warning: Some(why), inliers: 0 };

    let pts = detect_corners(&p, &cfg.corners)?;
    let tracked = track_flow(&p, &c, &pts, &cfg.flow)?;
    if tracked.is_empty() {
        return Ok(fallback(format!("no trackable features ({} corners)", pts.len())));
    }
    let filtered = reject_outliers(&tracked, p.width(), p.height(), &cfg.outliers);
    let fit = match ransac_affine_fit(&filtered, &cfg.ransac, cfg.seed) {
        Ok(f) => f,
        Err(Error::NoMotion(why)) => return Ok(fallback(why)),
        Err(e) => return Err(e),
    };
    let inliers = fit.inlier_count();
    let warp = if k > 1 { rescale(&fit.warp, k) } else { fit.warp };
    Ok(MotionEstimate { warp, warning: None, inliers })
}

/// Lifts a warp estimated on `k`-times area-downscaled frames back to full
/// resolution. Downscaled pixel `i` covers full pixels `[ik, ik + k)`, so
/// `x_full = k * x_small + (k - 1) / 2`.
fn rescale(w: &AffineWarp, k: usize) -> AffineWarp {
    let kf = k as f64;
    let c = (kf - 1.0) / 2.0;
    let m = w.linear();
    let t = w.offset() * kf + (nalgebra::Matrix2::identity() - m) * nalgebra::Vector2::new(c, c);
    AffineWarp { a13: t.x, a23: t.y, ..*w }
}

/// Frame files in `dir` named by their integer frame number (e.g. `12.pgm`,
/// `000012.pgm`), sorted by frame.
pub fn list_frames(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("pgm")) != Some(true) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if let Ok(frame) = stem.parse::<u32>() {
            frames.push((frame, path));
        }
    }
    frames.sort();
    for pair in frames.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::InvalidParameter(format!(
                "two files for frame {}: {} and {}",
                pair[0].0,
                pair[0].1.display(),
                pair[1].1.display()
            )));
        }
    }
    Ok(frames)
}

/// Warps for every consecutive pair of PGM frames in `dir`, keyed by the
/// later frame. Pairs are estimated in parallel; each pair seeds RANSAC with
/// `cfg.seed` mixed with its frame number so results do not depend on
/// scheduling. Failed pairs become identity and are reported in the returned
/// warnings.
pub fn estimate_directory(dir: &Path, cfg: &GmcConfig) -> Result<(WarpTable, Vec<(u32, String)>)> {
    let frames = list_frames(dir)?;
    let results: Vec<Result<(u32, MotionEstimate)>> = frames
        .par_windows(2)
        .map(|pair| {
            let (_, p0) = &pair[0];
            let (f1, p1) = &pair[1];
            let prev = read_pgm(p0)?;
            let cur = read_pgm(p1)?;
            let mut pair_cfg = *cfg;
            pair_cfg.seed = cfg.seed ^ (*f1 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let est = match estimate(&prev, &cur, &pair_cfg) {
                Ok(e) => e,
                Err(e @ (Error::DimensionMismatch(..) | Error::ImageTooSmall { .. })) => MotionEstimate {
                    warp: AffineWarp::IDENTITY,
                    warning: Some(e.to_string()),
                    inliers: 0,
                },
                Err(e) => return Err(e),
            };
            // across a numbering gap the warp spans several frames and is keyed
            // to the first frame after the gap
            Ok((*f1, est))
        })
        .collect();
    let mut table = WarpTable::new();
    let mut warnings = Vec::new();
    for r in results {
        let (frame, est) = r?;
        if let Some(w) = est.warning {
            warnings.push((frame, w));
        }
        table.insert(frame, est.warp);
    }
    Ok((table, warnings))
}
