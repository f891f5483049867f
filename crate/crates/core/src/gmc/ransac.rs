//! Robust 6-parameter affine fit: 3-point RANSAC followed by a least-squares
//! refit on the consensus set.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmc::flow::Correspondence;
use crate::gmc::warp::AffineWarp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iters: usize,
    /// Reprojection error (pixels) at or below which a correspondence is an inlier.
    pub inlier_tol: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams { iters: 200, inlier_tol: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    pub warp: AffineWarp,
    pub inliers: Vec<bool>,
}

impl AffineFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|b| **b).count()
    }
}

fn reprojection_error(w: &AffineWarp, c: &Correspondence) -> f64 {
    let (x, y) = w.apply(c.prev.0, c.prev.1);
    ((x - c.cur.0).powi(2) + (y - c.cur.1).powi(2)).sqrt()
}

/// Exact affine through three correspondences.
fn solve_minimal(c: [&Correspondence; 3]) -> Option<AffineWarp> {
    let a = Matrix3::new(
        c[0].prev.0, c[0].prev.1, 1.0,
        c[1].prev.0, c[1].prev.1, 1.0,
        c[2].prev.0, c[2].prev.1, 1.0,
    );
    // twice the triangle area; collinear samples carry no affine information
    if a.determinant().abs() < 1e-3 {
        return None;
    }
    let lu = a.lu();
    let rx = lu.solve(&Vector3::new(c[0].cur.0, c[1].cur.0, c[2].cur.0))?;
    let ry = lu.solve(&Vector3::new(c[0].cur.1, c[1].cur.1, c[2].cur.1))?;
    AffineWarp::new(rx[0], rx[1], rx[2], ry[0], ry[1], ry[2]).ok()
}

/// Least-squares affine over the selected correspondences (centered form).
pub fn fit_least_squares(corrs: &[Correspondence], select: &[bool]) -> Option<AffineWarp> {
    let chosen: Vec<&Correspondence> = corrs.iter().zip(select).filter(|(_, s)| **s).map(|(c, _)| c).collect();
    if chosen.len() < 3 {
        return None;
    }
    let n = chosen.len() as f64;
    let mut mp = Vector2::zeros();
    let mut mc = Vector2::zeros();
    for c in &chosen {
        mp += Vector2::new(c.prev.0, c.prev.1);
        mc += Vector2::new(c.cur.0, c.cur.1);
    }
    mp /= n;
    mc /= n;
    let mut spp = Matrix2::zeros();
    let mut scp = Matrix2::zeros();
    for c in &chosen {
        let dp = Vector2::new(c.prev.0, c.prev.1) - mp;
        let dc = Vector2::new(c.cur.0, c.cur.1) - mc;
        spp += dp * dp.transpose();
        scp += dc * dp.transpose();
    }
    let scale = spp.trace().max(f64::MIN_POSITIVE);
    if spp.determinant().abs() < 1e-12 * scale * scale {
        return None;
    }
    let m = scp * spp.try_inverse()?;
    let t = mc - m * mp;
    AffineWarp::new(m[(0, 0)], m[(0, 1)], t.x, m[(1, 0)], m[(1, 1)], t.y).ok()
}

fn score(w: &AffineWarp, corrs: &[Correspondence], tol: f64) -> (usize, f64, Vec<bool>) {
    let mut count = 0;
    let mut err_sum = 0.0;
    let mut mask = Vec::with_capacity(corrs.len());
    for c in corrs {
        let e = reprojection_error(w, c);
        let inl = e <= tol;
        if inl {
            count += 1;
            err_sum += e;
        }
        mask.push(inl);
    }
    (count, err_sum, mask)
}

pub fn ransac_affine(corrs: &[Correspondence], params: &RansacParams, seed: u64) -> Result<AffineWarp> {
    ransac_affine_fit(corrs, params, seed).map(|f| f.warp)
}

/// Deterministic for a fixed `seed`: the same inputs give a bit-identical fit.
pub fn ransac_affine_fit(corrs: &[Correspondence], params: &RansacParams, seed: u64) -> Result<AffineFit> {
    if corrs.len() < 3 {
        return Err(Error::NoMotion(format!("{} correspondences, need at least 3", corrs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, AffineWarp, Vec<bool>)> = None;

    let mut consider = |w: AffineWarp| {
        let (count, err, mask) = score(&w, corrs, params.inlier_tol);
        let better = match &best {
            None => true,
            Some((bc, be, _, _)) => count > *bc || (count == *bc && err < *be),
        };
        if better {
            best = Some((count, err, w, mask));
        }
    };

    if corrs.len() == 3 {
        if let Some(w) = solve_minimal([&corrs[0], &corrs[1], &corrs[2]]) {
            consider(w);
        }
    } else {
        for _ in 0..params.iters.max(1) {
            let idx = sample(&mut rng, corrs.len(), 3);
            if let Some(w) = solve_minimal([&corrs[idx.index(0)], &corrs[idx.index(1)], &corrs[idx.index(2)]]) {
                consider(w);
            }
        }
    }

    let (_, _, mut warp, mut mask) = best.ok_or_else(|| Error::NoMotion("all samples degenerate".into()))?;
    // refit on the consensus set; a second pass picks up points the refit brings inside
    for _ in 0..2 {
        let Some(refit) = fit_least_squares(corrs, &mask) else { break };
        let (_, _, new_mask) = score(&refit, corrs, params.inlier_tol);
        warp = refit;
        if new_mask == mask {
            break;
        }
        mask = new_mask;
    }
    Ok(AffineFit { warp, inliers: mask })
}
