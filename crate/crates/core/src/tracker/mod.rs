//! Online two-stage tracker with camera-motion compensation and optional
//! appearance fusion.
//!
//! Per frame: split detections by confidence, predict every live track and
//! warp the prior into the current frame, associate high-confidence
//! detections (IoU, or IoU fused with appearance), then low-confidence ones
//! against still-unmatched tracked tracks, then leftover high detections
//! against unconfirmed tracks. Leftover confident detections start new
//! tracks.

mod track;

pub use track::{normalize, update_appearance, Detection, Track, TrackState};

use crate::association::{self, CostMatrix, FusionParams};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::gmc::AffineWarp;
use crate::kalman::{self, KfParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// High/low confidence split.
    pub tau: f64,
    /// Minimum score for starting a new track.
    pub eta: f64,
    /// Detections at or below this score are discarded.
    pub low_floor: f64,
    pub match_thresh_first: f64,
    pub match_thresh_second: f64,
    pub match_thresh_unconfirmed: f64,
    /// Frames a lost track is kept for re-identification.
    pub track_buffer: u32,
    /// EMA momentum of the appearance state.
    pub alpha: f64,
    pub fusion: FusionParams,
    pub use_reid: bool,
    /// Fail instead of falling back to IoU when a high-confidence detection
    /// lacks an embedding in ReID mode.
    pub require_embeddings: bool,
    pub use_cmc: bool,
    /// Also transform the prior covariance under camera motion.
    pub cmc_cov: bool,
    /// Emit extrapolated boxes for recently lost tracks.
    pub output_pred: bool,
    /// How many frames after loss extrapolated boxes are emitted.
    pub pred_horizon: u32,
    pub kf: KfParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tau: 0.6,
            eta: 0.7,
            low_floor: 0.1,
            match_thresh_first: 0.8,
            match_thresh_second: 0.5,
            match_thresh_unconfirmed: 0.7,
            track_buffer: 30,
            alpha: 0.9,
            fusion: FusionParams::default(),
            use_reid: false,
            require_embeddings: false,
            use_cmc: true,
            cmc_cov: true,
            output_pred: false,
            pred_horizon: 1,
            kf: KfParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.low_floor > 0.0 && self.low_floor < self.tau && self.tau <= 1.0) {
            return bad(format!("need 0 < low_floor ({}) < tau ({}) <= 1", self.low_floor, self.tau));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta {} not in (0,1]", self.eta));
        }
        for (name, v) in [
            ("match_thresh_first", self.match_thresh_first),
            ("match_thresh_second", self.match_thresh_second),
            ("match_thresh_unconfirmed", self.match_thresh_unconfirmed),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} not in (0,1]"));
            }
        }
        if self.track_buffer < 1 {
            return bad("track_buffer must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} not in [0,1]", self.alpha));
        }
        self.fusion.validate()?;
        self.kf.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub track_id: u64,
    pub bbox: BBox,
    pub score: f64,
    /// True for extrapolated boxes of a just-lost track.
    pub predicted: bool,
}

/// Splits into `(high, low)` index lists, preserving input order.
pub fn split_detections(dets: &[Detection], tau: f64, low_floor: f64) -> (Vec<usize>, Vec<usize>) {
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        if d.score > tau {
            high.push(i);
        } else if d.score > low_floor {
            low.push(i);
        }
    }
    (high, low)
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker { cfg, tracks: Vec::new(), next_id: 1, last_frame: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live (non-removed) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.last_frame
    }

    fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn prior_boxes(&self, idx: &[usize]) -> Vec<Option<BBox>> {
        idx.iter().map(|&i| self.tracks[i].bbox()).collect()
    }

    fn iou_costs(&self, tracks: &[usize], dets: &[Detection], det_idx: &[usize]) -> Result<CostMatrix> {
        let priors = self.prior_boxes(tracks);
        let det_boxes: Vec<BBox> = det_idx.iter().map(|&j| dets[j].bbox).collect();
        let mut out = CostMatrix::filled(tracks.len(), det_idx.len(), 1.0);
        for (r, prior) in priors.iter().enumerate() {
            // a collapsed prior can match nothing
            let Some(prior) = prior else { continue };
            let row = association::iou_cost(std::slice::from_ref(prior), &det_boxes)?;
            for c in 0..det_idx.len() {
                out.set(r, c, row.get(0, c));
            }
        }
        Ok(out)
    }

    fn first_stage_costs(&self, tracks: &[usize], dets: &[Detection], det_idx: &[usize]) -> Result<CostMatrix> {
        let d_iou = self.iou_costs(tracks, dets, det_idx)?;
        if !self.cfg.use_reid {
            return Ok(d_iou);
        }
        let p = &self.cfg.fusion;
        Ok(CostMatrix::from_fn(tracks.len(), det_idx.len(), |r, c| {
            let di = d_iou.get(r, c);
            match (&self.tracks[tracks[r]].emb, &dets[det_idx[c]].embedding) {
                (Some(e), Some(f)) => {
                    let dc = association::cosine_distance(e, f);
                    di.min(association::gated_appearance(di, dc, p))
                }
                _ => di,
            }
        }))
    }

    /// Advances the tracker by one frame.
    ///
    /// `warp` maps the previous frame onto this one and is ignored when CMC is
    /// off. Returns the boxes of all active tracks for this frame, sorted by id.
    pub fn step(&mut self, frame: u32, dets: &[Detection], warp: &AffineWarp) -> Result<Vec<TrackOutput>> {
        if let Some(prev) = self.last_frame {
            if frame != prev.wrapping_add(1) || prev == u32::MAX {
                return Err(Error::NonMonotonicFrame { prev, got: frame });
            }
        }
        for d in dets {
            d.validate()?;
        }
        if self.cfg.use_cmc {
            warp.validate()?;
        }
        let first_frame = self.last_frame.is_none();
        let cfg = self.cfg;

        let (high, low) = split_detections(dets, cfg.tau, cfg.low_floor);
        if cfg.use_reid {
            if let Some(&j) = high.iter().find(|&&j| dets[j].embedding.is_none()) {
                if cfg.require_embeddings {
                    return Err(Error::MissingEmbedding { frame, det_index: j });
                }
                log::warn!("frame {frame}: detection {j} has no embedding, using IoU only for it");
            }
        }

        // predict, then move priors into this frame's coordinates
        for t in &mut self.tracks {
            t.kf = kalman::predict(&t.kf, &cfg.kf, t.state != TrackState::Tracked);
            if cfg.use_cmc {
                t.kf = kalman::apply_warp(&t.kf, warp, cfg.cmc_cov)?;
            }
        }

        let pool: Vec<usize> = (0..self.tracks.len()).filter(|&i| self.tracks[i].is_activated).collect();
        let unconfirmed: Vec<usize> = (0..self.tracks.len()).filter(|&i| !self.tracks[i].is_activated).collect();

        // first association: activated tracks (tracked or lost) x high detections
        let cost = self.first_stage_costs(&pool, dets, &high)?;
        let first = association::solve_assignment(&cost, cfg.match_thresh_first);
        for &(r, c) in &first.matches {
            let det = &dets[high[c]];
            let t = &mut self.tracks[pool[r]];
            t.apply_detection(det, frame, &cfg.kf)?;
            if let Some(f) = &det.embedding {
                t.emb = Some(update_appearance(t.emb.as_deref(), f, cfg.alpha));
            }
        }
        let remaining_high: Vec<usize> = first.unmatched_dets.iter().map(|&c| high[c]).collect();

        // second association: still-unmatched tracked tracks x low detections
        let r_tracked: Vec<usize> = first
            .unmatched_tracks
            .iter()
            .map(|&r| pool[r])
            .filter(|&i| self.tracks[i].state == TrackState::Tracked)
            .collect();
        let cost = self.iou_costs(&r_tracked, dets, &low)?;
        let second = association::solve_assignment(&cost, cfg.match_thresh_second);
        for &(r, c) in &second.matches {
            self.tracks[r_tracked[r]].apply_detection(&dets[low[c]], frame, &cfg.kf)?;
        }
        for &r in &second.unmatched_tracks {
            self.tracks[r_tracked[r]].state = TrackState::Lost;
        }

        // unconfirmed tracks x leftover high detections
        let cost = self.iou_costs(&unconfirmed, dets, &remaining_high)?;
        let third = association::solve_assignment(&cost, cfg.match_thresh_unconfirmed);
        for &(r, c) in &third.matches {
            let det = &dets[remaining_high[c]];
            let id = self.allocate_id();
            let t = &mut self.tracks[unconfirmed[r]];
            t.apply_detection(det, frame, &cfg.kf)?;
            if let Some(f) = &det.embedding {
                t.emb = Some(update_appearance(t.emb.as_deref(), f, cfg.alpha));
            }
            t.is_activated = true;
            t.id = Some(id);
        }
        for &r in &third.unmatched_tracks {
            self.tracks[unconfirmed[r]].state = TrackState::Removed;
        }

        for t in &mut self.tracks {
            if t.state == TrackState::Lost && frame.saturating_sub(t.last_update_frame) > cfg.track_buffer {
                t.state = TrackState::Removed;
            }
        }

        let mut outputs = Vec::new();
        for t in &self.tracks {
            let Some(id) = t.id else { continue };
            match t.state {
                TrackState::Tracked if t.is_activated => {
                    if let Some(b) = t.bbox() {
                        outputs.push(TrackOutput { track_id: id, bbox: b, score: t.score, predicted: false });
                    }
                }
                TrackState::Lost if cfg.output_pred && frame - t.last_update_frame <= cfg.pred_horizon => {
                    if let Some(b) = t.bbox() {
                        outputs.push(TrackOutput { track_id: id, bbox: b, score: t.score, predicted: true });
                    }
                }
                _ => {}
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Removed);

        let new_dets: Vec<usize> = third.unmatched_dets.iter().map(|&c| remaining_high[c]).collect();
        for j in new_dets {
            let det = &dets[j];
            if det.score <= cfg.eta {
                continue;
            }
            let mut t = Track::spawn(det, frame, &cfg.kf)?;
            if first_frame {
                let id = self.allocate_id();
                t.id = Some(id);
                t.is_activated = true;
                t.state = TrackState::Tracked;
                if let Some(b) = t.bbox() {
                    outputs.push(TrackOutput { track_id: id, bbox: b, score: t.score, predicted: false });
                }
            }
            self.tracks.push(t);
        }

        outputs.sort_by_key(|o| o.track_id);
        self.last_frame = Some(frame);
        Ok(outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64, w: f64, h: f64, s: f64) -> Detection {
        Detection::new(BBox::new(x, y, w, h).unwrap(), s)
    }

    #[test]
    fn split_examples() {
        let d = vec![det(0.0, 0.0, 1.0, 1.0, 0.9), det(0.0, 0.0, 1.0, 1.0, 0.4), det(0.0, 0.0, 1.0, 1.0, 0.05)];
        assert_eq!(split_detections(&d, 0.6, 0.1), (vec![0], vec![1]));
        let d = vec![det(0.0, 0.0, 1.0, 1.0, 0.9), det(0.0, 0.0, 1.0, 1.0, 0.7)];
        assert_eq!(split_detections(&d, 0.6, 0.1), (vec![0, 1], vec![]));
        assert_eq!(split_detections(&[], 0.6, 0.1), (vec![], vec![]));
    }

    #[test]
    fn first_frame_activates() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let out = t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
        assert_eq!(out[0].bbox, BBox::new(10.0, 10.0, 20.0, 40.0).unwrap());
    }

    #[test]
    fn same_box_keeps_id() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let d = [det(10.0, 10.0, 20.0, 40.0, 0.9)];
        let a = t.step(1, &d, &AffineWarp::IDENTITY).unwrap();
        let b = t.step(2, &d, &AffineWarp::IDENTITY).unwrap();
        assert_eq!(a[0].track_id, b[0].track_id);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn low_score_does_not_start_track() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let out = t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.5)], &AffineWarp::IDENTITY).unwrap();
        assert!(out.is_empty());
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn later_tracks_need_a_second_match() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(1, &[], &AffineWarp::IDENTITY).unwrap();
        let d = [det(10.0, 10.0, 20.0, 40.0, 0.9)];
        assert!(t.step(2, &d, &AffineWarp::IDENTITY).unwrap().is_empty());
        let out = t.step(3, &d, &AffineWarp::IDENTITY).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
    }

    #[test]
    fn unconfirmed_without_match_is_removed() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(1, &[], &AffineWarp::IDENTITY).unwrap();
        t.step(2, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap();
        assert_eq!(t.tracks().len(), 1);
        t.step(3, &[], &AffineWarp::IDENTITY).unwrap();
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn frame_order_enforced() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(5, &[], &AffineWarp::IDENTITY).unwrap();
        assert!(matches!(t.step(5, &[], &AffineWarp::IDENTITY), Err(Error::NonMonotonicFrame { .. })));
        assert!(matches!(t.step(7, &[], &AffineWarp::IDENTITY), Err(Error::NonMonotonicFrame { .. })));
        assert!(t.step(6, &[], &AffineWarp::IDENTITY).is_ok());
    }

    #[test]
    fn lost_track_expires_after_buffer() {
        let cfg = TrackerConfig { track_buffer: 3, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap();
        for f in 2..=4 {
            t.step(f, &[], &AffineWarp::IDENTITY).unwrap();
            assert_eq!(t.tracks()[0].state, TrackState::Lost);
        }
        t.step(5, &[], &AffineWarp::IDENTITY).unwrap();
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn lost_track_is_reborn_with_same_id() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let d = [det(10.0, 10.0, 20.0, 40.0, 0.9)];
        t.step(1, &d, &AffineWarp::IDENTITY).unwrap();
        for f in 2..=6 {
            assert!(t.step(f, &[], &AffineWarp::IDENTITY).unwrap().is_empty());
        }
        let out = t.step(7, &d, &AffineWarp::IDENTITY).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
    }

    #[test]
    fn low_detection_keeps_track_alive() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap();
        let out = t.step(2, &[det(11.0, 10.0, 20.0, 40.0, 0.3)], &AffineWarp::IDENTITY).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.3);
    }

    #[test]
    fn output_pred_emits_one_extrapolated_frame() {
        let cfg = TrackerConfig { output_pred: true, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        let d = [det(10.0, 10.0, 20.0, 40.0, 0.9)];
        t.step(1, &d, &AffineWarp::IDENTITY).unwrap();
        t.step(2, &d, &AffineWarp::IDENTITY).unwrap();
        let out = t.step(3, &[], &AffineWarp::IDENTITY).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].predicted);
        assert!(t.step(4, &[], &AffineWarp::IDENTITY).unwrap().is_empty());
    }

    #[test]
    fn missing_embedding_policy() {
        let cfg = TrackerConfig { use_reid: true, require_embeddings: true, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        let err = t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding { frame: 1, det_index: 0 }));

        let cfg = TrackerConfig { use_reid: true, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        assert_eq!(t.step(1, &[det(10.0, 10.0, 20.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap().len(), 1);
    }

    #[test]
    fn cmc_moves_priors() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(1, &[det(100.0, 10.0, 10.0, 40.0, 0.9)], &AffineWarp::IDENTITY).unwrap();
        // camera pans so the object shifts 30 px left; no overlap without the warp
        let out = t.step(2, &[det(70.0, 10.0, 10.0, 40.0, 0.9)], &AffineWarp::translation(-30.0, 0.0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
    }

    #[test]
    fn config_validation() {
        assert!(Tracker::new(TrackerConfig { low_floor: 0.7, ..TrackerConfig::default() }).is_err());
        assert!(Tracker::new(TrackerConfig { track_buffer: 0, ..TrackerConfig::default() }).is_err());
        assert!(Tracker::new(TrackerConfig { eta: 0.0, ..TrackerConfig::default() }).is_err());
    }
}
