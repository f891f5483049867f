//! CLEAR-style evaluation: per-frame ground-truth/prediction matching with
//! match carry-over, MOTA, IDF1, and cumulative (per-frame) series of both.

use std::collections::{BTreeMap, BTreeSet};

use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::lap;

pub const DEFAULT_IOU_THRESH: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalFrame {
    pub frame: u32,
    pub gt: Vec<(i64, BBox)>,
    pub pred: Vec<(i64, BBox)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub frame: u32,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub num_gt: u64,
    pub matches: u64,
}

/// Last prediction id each ground-truth id was matched to.
pub type MatchHistory = BTreeMap<i64, i64>;

fn check_unique(ids: impl Iterator<Item = i64>, kind: &'static str, frame: u32) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId { kind, id, frame });
        }
    }
    Ok(())
}

/// Matches one frame. Pairs from `history` that still overlap by at least
/// `iou_thresh` are kept first; the rest are resolved by minimum-cost
/// assignment on `1 - IoU`. A ground truth matched to a prediction other than
/// its previous one counts as an identity switch. `history` is updated.
pub fn match_frame(
    history: &mut MatchHistory,
    frame: &EvalFrame,
    iou_thresh: f64,
) -> Result<(Vec<(i64, i64)>, EvalCounts)> {
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(Error::InvalidParameter(format!("iou threshold {iou_thresh} not in (0,1)")));
    }
    check_unique(frame.gt.iter().map(|g| g.0), "ground-truth", frame.frame)?;
    check_unique(frame.pred.iter().map(|p| p.0), "prediction", frame.frame)?;

    let gt_pos: BTreeMap<i64, usize> = frame.gt.iter().enumerate().map(|(i, g)| (g.0, i)).collect();
    let pred_pos: BTreeMap<i64, usize> = frame.pred.iter().enumerate().map(|(i, p)| (p.0, i)).collect();
    let mut gt_used = vec![false; frame.gt.len()];
    let mut pred_used = vec![false; frame.pred.len()];
    let mut matches = Vec::new();

    for (&g, &p) in history.iter() {
        let (Some(&gi), Some(&pi)) = (gt_pos.get(&g), pred_pos.get(&p)) else { continue };
        if pred_used[pi] {
            continue;
        }
        if iou(&frame.gt[gi].1, &frame.pred[pi].1) >= iou_thresh {
            gt_used[gi] = true;
            pred_used[pi] = true;
            matches.push((g, p));
        }
    }

    let free_gt: Vec<usize> = (0..frame.gt.len()).filter(|&i| !gt_used[i]).collect();
    let free_pred: Vec<usize> = (0..frame.pred.len()).filter(|&i| !pred_used[i]).collect();
    let cost = CostMatrix::from_fn(free_gt.len(), free_pred.len(), |r, c| {
        let v = iou(&frame.gt[free_gt[r]].1, &frame.pred[free_pred[c]].1);
        if v >= iou_thresh {
            1.0 - v
        } else {
            1.0
        }
    });
    let assignment = solve_assignment(&cost, 1.0 - iou_thresh);
    let mut idsw = 0;
    for &(r, c) in &assignment.matches {
        let (g, p) = (frame.gt[free_gt[r]].0, frame.pred[free_pred[c]].0);
        if history.get(&g).is_some_and(|&prev| prev != p) {
            idsw += 1;
        }
        gt_used[free_gt[r]] = true;
        pred_used[free_pred[c]] = true;
        matches.push((g, p));
    }
    for &(g, p) in &matches {
        history.insert(g, p);
    }
    matches.sort_unstable();

    let n_matched = matches.len() as u64;
    let counts = EvalCounts {
        frame: frame.frame,
        fp: frame.pred.len() as u64 - n_matched,
        fn_: frame.gt.len() as u64 - n_matched,
        idsw,
        num_gt: frame.gt.len() as u64,
        matches: n_matched,
    };
    Ok((matches, counts))
}

/// Runs [`match_frame`] over a sequence, in order.
pub fn clear_counts(frames: &[EvalFrame], iou_thresh: f64) -> Result<Vec<EvalCounts>> {
    let mut history = MatchHistory::new();
    frames.iter().map(|f| match_frame(&mut history, f, iou_thresh).map(|(_, c)| c)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub num_gt: u64,
    pub matches: u64,
}

impl Totals {
    pub fn add(&mut self, c: &EvalCounts) {
        self.fp += c.fp;
        self.fn_ += c.fn_;
        self.idsw += c.idsw;
        self.num_gt += c.num_gt;
        self.matches += c.matches;
    }

    pub fn of(counts: &[EvalCounts]) -> Totals {
        let mut t = Totals::default();
        counts.iter().for_each(|c| t.add(c));
        t
    }

    pub fn mota(&self) -> Option<f64> {
        (self.num_gt > 0).then(|| 1.0 - (self.fp + self.fn_ + self.idsw) as f64 / self.num_gt as f64)
    }
}

pub fn mota(counts: &[EvalCounts]) -> Result<f64> {
    Totals::of(counts).mota().ok_or(Error::UndefinedMetric("MOTA with no ground truth"))
}

/// MOTA accumulated from the first frame through each frame. Entries before
/// any ground truth has appeared are `None`. The last entry equals
/// [`mota`] over the whole sequence.
pub fn cmota_series(counts: &[EvalCounts]) -> Result<Vec<(u32, Option<f64>)>> {
    let mut acc = Totals::default();
    let series: Vec<(u32, Option<f64>)> = counts
        .iter()
        .map(|c| {
            acc.add(c);
            (c.frame, acc.mota())
        })
        .collect();
    if acc.num_gt == 0 {
        return Err(Error::UndefinedMetric("cMOTA with no ground truth"));
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdScores {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub idf1: f64,
}

/// Incrementally maintained trajectory overlap statistics for IDF1.
#[derive(Debug, Clone, Default)]
pub struct IdAccumulator {
    gt_ids: BTreeMap<i64, usize>,
    pred_ids: BTreeMap<i64, usize>,
    /// overlap[(g, p)] = frames where both exist with IoU >= threshold
    overlap: BTreeMap<(usize, usize), u64>,
    gt_dets: u64,
    pred_dets: u64,
}

impl IdAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_frame(&mut self, frame: &EvalFrame, iou_thresh: f64) -> Result<()> {
        check_unique(frame.gt.iter().map(|g| g.0), "ground-truth", frame.frame)?;
        check_unique(frame.pred.iter().map(|p| p.0), "prediction", frame.frame)?;
        self.gt_dets += frame.gt.len() as u64;
        self.pred_dets += frame.pred.len() as u64;
        for (g, gb) in &frame.gt {
            let n = self.gt_ids.len();
            let gi = *self.gt_ids.entry(*g).or_insert(n);
            for (p, pb) in &frame.pred {
                let n = self.pred_ids.len();
                let pi = *self.pred_ids.entry(*p).or_insert(n);
                if iou(gb, pb) >= iou_thresh {
                    *self.overlap.entry((gi, pi)).or_insert(0) += 1;
                }
            }
        }
        for (p, _) in &frame.pred {
            let n = self.pred_ids.len();
            self.pred_ids.entry(*p).or_insert(n);
        }
        Ok(())
    }

    pub fn scores(&self) -> Result<IdScores> {
        if self.gt_dets == 0 {
            return Err(Error::UndefinedMetric("IDF1 with no ground truth"));
        }
        let (rows, cols) = (self.gt_ids.len(), self.pred_ids.len());
        let max = self.overlap.values().copied().max().unwrap_or(0) as f64;
        let mut cost = vec![max; rows * cols];
        for (&(g, p), &n) in &self.overlap {
            cost[g * cols + p] = max - n as f64;
        }
        let idtp: u64 = lap::solve_full(&cost, rows, cols)
            .into_iter()
            .map(|(g, p)| self.overlap.get(&(g, p)).copied().unwrap_or(0))
            .sum();
        let idfn = self.gt_dets - idtp;
        let idfp = self.pred_dets - idtp;
        let idf1 = 2.0 * idtp as f64 / (self.gt_dets + self.pred_dets) as f64;
        Ok(IdScores { idtp, idfp, idfn, idf1 })
    }
}

/// Global IDF1: trajectories are matched one-to-one to maximize the number
/// of frames where a ground truth and its assigned prediction overlap.
pub fn idf1(frames: &[EvalFrame], iou_thresh: f64) -> Result<IdScores> {
    let mut acc = IdAccumulator::new();
    for f in frames {
        acc.add_frame(f, iou_thresh)?;
    }
    acc.scores()
}

/// IDF1 over frames `first..=k` for every `k`; `None` before any ground truth.
pub fn idf1_series(frames: &[EvalFrame], iou_thresh: f64) -> Result<Vec<(u32, Option<f64>)>> {
    let mut acc = IdAccumulator::new();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        acc.add_frame(f, iou_thresh)?;
        let v = if acc.gt_dets > 0 { Some(acc.scores()?.idf1) } else { None };
        out.push((f.frame, v));
    }
    if acc.gt_dets == 0 {
        return Err(Error::UndefinedMetric("IDF1 with no ground truth"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub totals: Totals,
    pub num_pred: u64,
    pub mota: f64,
    pub id: IdScores,
    pub counts: Vec<EvalCounts>,
}

pub fn evaluate(frames: &[EvalFrame], iou_thresh: f64) -> Result<Report> {
    let counts = clear_counts(frames, iou_thresh)?;
    let totals = Totals::of(&counts);
    let mota = mota(&counts)?;
    let id = idf1(frames, iou_thresh)?;
    let num_pred = frames.iter().map(|f| f.pred.len() as u64).sum();
    Ok(Report { totals, num_pred, mota, id, counts })
}
