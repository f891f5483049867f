//! Cost matrices between tracks and detections, and gated linear assignment.
//!
//! All costs live in `[0, 1]` with 1 meaning "never match". Appearance
//! distance is `(1 - cos_sim) / 2`, which maps the full cosine range onto that
//! interval before gating.

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::lap;

/// Slack (as a fraction of the per-side unmatched penalty) keeping an
/// at-threshold match preferable to leaving both sides unmatched.
const UNMATCHED_EPS: f64 = 1e-9;
/// Effectively forbidden entries in the augmented problem.
const FORBIDDEN: f64 = 1e6;

pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Row-major `rows x cols` matrix, rows are tracks and columns detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{rows}x{cols} matrix with {} entries", data.len())));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidParameter(format!("cost entry {bad} outside [0,1]")));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        CostMatrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn same_shape(&self, other: &CostMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    /// Proximity gate on IoU distance.
    pub theta_iou: f64,
    /// Appearance gate on cosine distance.
    pub theta_emb: f64,
    /// Appearance weight for the weighted-sum comparator.
    pub lambda: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { theta_iou: 0.5, theta_emb: 0.2, lambda: 0.98 }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta_iou", self.theta_iou), ("theta_emb", self.theta_emb), ("lambda", self.lambda)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must be in (0,1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

pub fn iou_cost(pred_boxes: &[BBox], det_boxes: &[BBox]) -> Result<CostMatrix> {
    for b in pred_boxes.iter().chain(det_boxes) {
        b.validate()?;
    }
    Ok(CostMatrix::from_fn(pred_boxes.len(), det_boxes.len(), |r, c| {
        1.0 - iou(&pred_boxes[r], &det_boxes[c])
    }))
}

fn check_unit(v: &[f32], what: &str) -> Result<()> {
    let n: f64 = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Embedding(format!("{what} has norm {n}, expected 1")));
    }
    Ok(())
}

/// Cosine distance for a single pair of unit vectors, in `[0, 1]`.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    ((1.0 - dot) / 2.0).clamp(0.0, 1.0)
}

pub fn cosine_cost<A: AsRef<[f32]>, B: AsRef<[f32]>>(track_embs: &[A], det_embs: &[B]) -> Result<CostMatrix> {
    let dim = track_embs.first().map(|e| e.as_ref().len()).or_else(|| det_embs.first().map(|e| e.as_ref().len()));
    if let Some(dim) = dim {
        for e in track_embs.iter().map(|e| e.as_ref()).chain(det_embs.iter().map(|e| e.as_ref())) {
            if e.len() != dim {
                return Err(Error::Embedding(format!("dimension {} vs {dim}", e.len())));
            }
            check_unit(e, "embedding")?;
        }
    }
    Ok(CostMatrix::from_fn(track_embs.len(), det_embs.len(), |r, c| {
        cosine_distance(track_embs[r].as_ref(), det_embs[c].as_ref())
    }))
}

/// Gated appearance cost for one pair: half the cosine distance when both the
/// appearance and proximity gates pass, otherwise 1.
#[inline]
pub fn gated_appearance(d_iou: f64, d_cos: f64, p: &FusionParams) -> f64 {
    if d_cos < p.theta_emb && d_iou < p.theta_iou {
        0.5 * d_cos
    } else {
        1.0
    }
}

/// Elementwise `min(d_iou, gated_appearance)`.
pub fn fuse(d_iou: &CostMatrix, d_cos: &CostMatrix, p: &FusionParams) -> Result<CostMatrix> {
    d_iou.same_shape(d_cos)?;
    Ok(CostMatrix::from_fn(d_iou.rows, d_iou.cols, |r, c| {
        let i = d_iou.get(r, c);
        i.min(gated_appearance(i, d_cos.get(r, c), p))
    }))
}

/// `lambda * d_cos + (1 - lambda) * d_iou`, kept for comparison runs.
pub fn weighted_sum(d_cos: &CostMatrix, d_iou: &CostMatrix, lambda: f64) -> Result<CostMatrix> {
    d_iou.same_shape(d_cos)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0,1]")));
    }
    Ok(CostMatrix::from_fn(d_iou.rows, d_iou.cols, |r, c| {
        (lambda * d_cos.get(r, c) + (1.0 - lambda) * d_iou.get(r, c)).clamp(0.0, 1.0)
    }))
}

/// Minimum-cost one-to-one assignment where leaving a track and a detection
/// unmatched costs `max_cost` (plus a hair), so no accepted pair exceeds
/// `max_cost`.
///
/// The rectangular problem is embedded in a square one of side
/// `rows + cols`: each real row gets a private dummy column and each real
/// column a private dummy row, both priced at half the unmatched cost.
pub fn solve_assignment(c: &CostMatrix, max_cost: f64) -> Assignment {
    let (n, m) = c.shape();
    if n == 0 || m == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_tracks: (0..n).collect(),
            unmatched_dets: (0..m).collect(),
        };
    }
    let half = 0.5 * max_cost * (1.0 + UNMATCHED_EPS) + UNMATCHED_EPS;
    let size = n + m;
    let mut big = vec![0.0f64; size * size];
    for r in 0..size {
        for col in 0..size {
            big[r * size + col] = match (r < n, col < m) {
                (true, true) => c.get(r, col),
                (true, false) => if col - m == r { half } else { FORBIDDEN },
                (false, true) => if r - n == col { half } else { FORBIDDEN },
                (false, false) => 0.0,
            };
        }
    }
    let sol = lap::solve_rows_le_cols(&big, size, size);
    let mut out = Assignment::default();
    let mut det_used = vec![false; m];
    for (r, &col) in sol.iter().enumerate().take(n) {
        if col < m && c.get(r, col) <= max_cost {
            out.matches.push((r, col));
            det_used[col] = true;
        } else {
            out.unmatched_tracks.push(r);
        }
    }
    out.unmatched_dets = (0..m).filter(|j| !det_used[*j]).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_cost_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        let c = iou_cost(&[a], &[a, bx(10.0, 10.0, 1.0, 1.0), bx(1.0, 0.0, 2.0, 2.0)]).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(0, 1), 1.0);
        assert!((c.get(0, 2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_cost_examples() {
        let e = [1.0f32, 0.0];
        let f = [0.0f32, 1.0];
        let neg = [-1.0f32, 0.0];
        let c = cosine_cost(&[e], &[e, neg, f]).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(0, 2), 0.5);
    }

    #[test]
    fn cosine_cost_validation() {
        assert!(matches!(cosine_cost(&[[1.0f32, 0.0]], &[[1.0f32, 0.0, 0.0]]), Err(Error::Embedding(_))));
        assert!(matches!(cosine_cost(&[[2.0f32, 0.0]], &[[1.0f32, 0.0]]), Err(Error::Embedding(_))));
    }

    #[test]
    fn fuse_examples() {
        let p = FusionParams::default();
        let one = |v: f64| CostMatrix::filled(1, 1, v);
        let c = fuse(&one(0.3), &one(0.1), &p).unwrap();
        assert!((c.get(0, 0) - 0.05).abs() < 1e-15);
        assert_eq!(fuse(&one(0.3), &one(0.3), &p).unwrap().get(0, 0), 0.3);
        assert_eq!(fuse(&one(0.9), &one(0.05), &p).unwrap().get(0, 0), 0.9);
        assert!(fuse(&CostMatrix::filled(1, 2, 0.0), &one(0.0), &p).is_err());
    }

    #[test]
    fn weighted_sum_examples() {
        let dc = CostMatrix::filled(1, 1, 0.5);
        let di = CostMatrix::filled(1, 1, 0.2);
        assert_eq!(weighted_sum(&dc, &di, 1.0).unwrap(), dc);
        assert_eq!(weighted_sum(&dc, &di, 0.0).unwrap(), di);
        assert!((weighted_sum(&dc, &di, 0.98).unwrap().get(0, 0) - 0.494).abs() < 1e-12);
    }

    #[test]
    fn assignment_examples() {
        let c = CostMatrix::new(2, 2, vec![0.1, 0.9, 0.9, 0.1]).unwrap();
        let a = solve_assignment(&c, 0.8);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert!(a.unmatched_tracks.is_empty() && a.unmatched_dets.is_empty());

        let a = solve_assignment(&CostMatrix::filled(1, 1, 0.95), 0.8);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracks, vec![0]);
        assert_eq!(a.unmatched_dets, vec![0]);
    }

    #[test]
    fn at_threshold_is_accepted() {
        let a = solve_assignment(&CostMatrix::filled(1, 1, 0.8), 0.8);
        assert_eq!(a.matches, vec![(0, 0)]);
    }

    #[test]
    fn empty_matrices() {
        let a = solve_assignment(&CostMatrix::filled(0, 3, 0.0), 0.8);
        assert_eq!(a.unmatched_dets, vec![0, 1, 2]);
        let a = solve_assignment(&CostMatrix::filled(2, 0, 0.0), 0.8);
        assert_eq!(a.unmatched_tracks, vec![0, 1]);
    }

    #[test]
    fn gate_prefers_leaving_unmatched_over_forced_bad_pairs() {
        // forcing both pairs would cost 0.85 + 0.85; one good pair plus two
        // unmatched sides is cheaper
        let c = CostMatrix::new(2, 2, vec![0.1, 0.85, 0.85, 0.9]).unwrap();
        let a = solve_assignment(&c, 0.8);
        assert_eq!(a.matches, vec![(0, 0)]);
        assert_eq!(a.unmatched_tracks, vec![1]);
        assert_eq!(a.unmatched_dets, vec![1]);
    }

    #[test]
    fn rejects_out_of_range_entries() {
        assert!(CostMatrix::new(1, 1, vec![1.5]).is_err());
        assert!(CostMatrix::new(1, 2, vec![0.5]).is_err());
    }
}
