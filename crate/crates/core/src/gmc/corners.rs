//! Minimum-eigenvalue ("good features to track") corner detector.

use crate::error::{Error, Result};
use crate::gmc::image::{GrayImage, MIN_ESTIMATION_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Fraction of the strongest response a corner must reach.
    pub quality: f64,
    /// Minimum pixel distance between returned corners.
    pub min_dist: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        CornerParams { max_corners: 1000, quality: 0.01, min_dist: 7.0 }
    }
}

/// Smallest eigenvalue of the 3x3-window structure tensor at every pixel.
pub fn min_eigen_response(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let (gx, gy) = img.sobel();
    let mut xx = vec![0.0f64; w * h];
    let mut xy = vec![0.0f64; w * h];
    let mut yy = vec![0.0f64; w * h];
    for i in 0..w * h {
        let (dx, dy) = (gx.pixels()[i] as f64, gy.pixels()[i] as f64);
        xx[i] = dx * dx;
        xy[i] = dx * dy;
        yy[i] = dy * dy;
    }
    let box3 = |src: &[f64], x: usize, y: usize| -> f64 {
        let mut acc = 0.0;
        for oy in -1isize..=1 {
            let yy = (y as isize + oy).clamp(0, h as isize - 1) as usize;
            for ox in -1isize..=1 {
                let xx = (x as isize + ox).clamp(0, w as isize - 1) as usize;
                acc += src[yy * w + xx];
            }
        }
        acc
    };
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let a = box3(&xx, x, y);
            let b = box3(&xy, x, y);
            let c = box3(&yy, x, y);
            let half_tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            out[y * w + x] = (half_tr - disc).max(0.0);
        }
    }
    out
}

/// Corners ranked by response, strongest first.
pub fn detect_corners(img: &GrayImage, params: &CornerParams) -> Result<Vec<(f64, f64)>> {
    img.ensure_min_dim(MIN_ESTIMATION_DIM)?;
    if !(params.quality > 0.0 && params.quality < 1.0) {
        return Err(Error::InvalidParameter(format!("quality {} not in (0,1)", params.quality)));
    }
    if params.max_corners == 0 {
        return Ok(Vec::new());
    }
    let (w, h) = (img.width(), img.height());
    let resp = min_eigen_response(img);
    let max = resp.iter().copied().fold(0.0, f64::max);
    if max <= 1e-12 {
        return Ok(Vec::new());
    }
    let thresh = params.quality * max;

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    // one-pixel border excluded: the derivative kernels read outside the image there
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = resp[y * w + x];
            if v < thresh {
                continue;
            }
            let mut is_max = true;
            'nb: for oy in -1isize..=1 {
                for ox in -1isize..=1 {
                    let n = resp[(y as isize + oy) as usize * w + (x as isize + ox) as usize];
                    if n > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((v, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let min_d2 = params.min_dist * params.min_dist;
    let cell = params.min_dist.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gw * gh];
    let mut out = Vec::new();
    for (_, x, y) in candidates {
        let (px, py) = (x as f64, y as f64);
        let (cx, cy) = ((px / cell) as usize, (py / cell) as usize);
        let mut ok = true;
        'cells: for ny in cy.saturating_sub(1)..=(cy + 1).min(gh - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(gw - 1) {
                for &(qx, qy) in &grid[ny * gw + nx] {
                    if (qx - px).powi(2) + (qy - py).powi(2) < min_d2 {
                        ok = false;
                        break 'cells;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        grid[cy * gw + cx].push((px, py));
        out.push((px, py));
        if out.len() >= params.max_corners {
            break;
        }
    }
    Ok(out)
}
