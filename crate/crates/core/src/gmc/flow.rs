//! Pyramidal Lucas-Kanade sparse optical flow.

use crate::error::Result;
use crate::gmc::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub prev: (f64, f64),
    pub cur: (f64, f64),
}

impl Correspondence {
    pub fn displacement(&self) -> (f64, f64) {
        (self.cur.0 - self.prev.0, self.cur.1 - self.prev.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Pyramid levels including full resolution.
    pub levels: usize,
    /// Odd window side length in pixels.
    pub window: usize,
    pub max_iters: usize,
    /// Stop once an iteration moves the estimate less than this (pixels).
    pub epsilon: f64,
    /// Points whose normalized gradient matrix has a smaller eigenvalue are dropped.
    pub min_eigen: f64,
    /// Drop tracks whose mean absolute window residual exceeds this (intensity units).
    pub max_residual: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            levels: 3,
            window: 21,
            max_iters: 30,
            epsilon: 0.01,
            min_eigen: 1e-5,
            max_residual: 0.1,
        }
    }
}

struct Level {
    prev: GrayImage,
    cur: GrayImage,
    gx: GrayImage,
    gy: GrayImage,
}

fn build_pyramid(prev: &GrayImage, cur: &GrayImage, levels: usize) -> Vec<Level> {
    let mut out = Vec::with_capacity(levels);
    let (mut p, mut c) = (prev.clone(), cur.clone());
    for l in 0..levels.max(1) {
        if l > 0 {
            if p.width() < 8 || p.height() < 8 {
                break;
            }
            p = p.pyr_down();
            c = c.pyr_down();
        }
        let (gx, gy) = p.scharr();
        out.push(Level { prev: p.clone(), cur: c.clone(), gx, gy });
    }
    out
}

/// Tracks `pts` from `prev` into `cur`. Points that fail (flat texture,
/// divergence, leaving the image) are omitted from the result.
pub fn track_flow(
    prev: &GrayImage,
    cur: &GrayImage,
    pts: &[(f64, f64)],
    params: &LkParams,
) -> Result<Vec<Correspondence>> {
    prev.same_dims(cur)?;
    let pyramid = build_pyramid(prev, cur, params.levels);
    let half = (params.window / 2) as isize;
    let (w, h) = (prev.width() as f64, prev.height() as f64);

    let mut out = Vec::with_capacity(pts.len());
    for &pt in pts {
        if let Some(cur_pt) = track_point(&pyramid, pt, half, params) {
            let inside = cur_pt.0 >= 0.0 && cur_pt.1 >= 0.0 && cur_pt.0 <= w - 1.0 && cur_pt.1 <= h - 1.0;
            if inside {
                out.push(Correspondence { prev: pt, cur: cur_pt });
            }
        }
    }
    Ok(out)
}

fn track_point(pyramid: &[Level], pt: (f64, f64), half: isize, params: &LkParams) -> Option<(f64, f64)> {
    let n = ((2 * half + 1) * (2 * half + 1)) as f64;
    let mut guess = (0.0f64, 0.0f64);
    for (l, level) in pyramid.iter().enumerate().rev() {
        let scale = (1u32 << l) as f64;
        let (px, py) = (pt.0 / scale, pt.1 / scale);

        let mut patch = Vec::with_capacity(n as usize);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for oy in -half..=half {
            for ox in -half..=half {
                let (sx, sy) = (px + ox as f64, py + oy as f64);
                let ix = level.gx.sample(sx, sy);
                let iy = level.gy.sample(sx, sy);
                let iv = level.prev.sample(sx, sy);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                patch.push((iv, ix, iy, ox as f64, oy as f64));
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let min_eig = (0.5 * (gxx + gyy) - (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt()) / n;
        let textured = min_eig >= params.min_eigen && det > f64::EPSILON;
        if !textured {
            if l == 0 {
                return None;
            }
            guess = (2.0 * guess.0, 2.0 * guess.1);
            continue;
        }

        let mut nu = (0.0f64, 0.0f64);
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..params.max_iters {
            let (qx, qy) = (px + guess.0 + nu.0, py + guess.1 + nu.1);
            let (mut bx, mut by) = (0.0, 0.0);
            for &(iv, ix, iy, ox, oy) in &patch {
                let diff = iv - level.cur.sample(qx + ox, qy + oy);
                bx += diff * ix;
                by += diff * iy;
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            if !(ex.is_finite() && ey.is_finite()) {
                return None;
            }
            nu = (nu.0 + ex, nu.1 + ey);
            last_step = (ex * ex + ey * ey).sqrt();
            if last_step < params.epsilon {
                converged = true;
                break;
            }
        }

        if l == 0 {
            if !converged && last_step > 0.5 {
                return None;
            }
            let d = (guess.0 + nu.0, guess.1 + nu.1);
            let (qx, qy) = (px + d.0, py + d.1);
            let residual: f64 = patch
                .iter()
                .map(|&(iv, _, _, ox, oy)| (iv - level.cur.sample(qx + ox, qy + oy)).abs())
                .sum::<f64>()
                / n;
            if residual > params.max_residual {
                return None;
            }
            return Some((pt.0 + d.0, pt.1 + d.1));
        }
        guess = (2.0 * (guess.0 + nu.0), 2.0 * (guess.1 + nu.1));
    }
    None
}
