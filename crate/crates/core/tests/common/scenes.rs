//! Synthetic tracking scenes with exact ground truth.

use std::path::Path;

use botsort::io::{self, EmbeddingRecord, MotRow};
use botsort::metrics::EvalFrame;
use botsort::tracker::{normalize, Detection, TrackOutput, Tracker, TrackerConfig};
use botsort::{AffineWarp, BBox, WarpTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    /// Detections of frame `k + 1` at index `k`.
    pub dets: Vec<Vec<Detection>>,
    pub gt: Vec<Vec<(i64, BBox)>>,
    pub warps: WarpTable,
}

impl Scene {
    pub fn num_frames(&self) -> u32 {
        self.dets.len() as u32
    }

    pub fn run(&self, cfg: TrackerConfig) -> Vec<Vec<TrackOutput>> {
        let mut t = Tracker::new(cfg).unwrap();
        (1..=self.num_frames())
            .map(|f| t.step(f, &self.dets[f as usize - 1], &self.warps.get(f)).unwrap())
            .collect()
    }

    pub fn eval_frames(&self, outputs: &[Vec<TrackOutput>]) -> Vec<EvalFrame> {
        outputs
            .iter()
            .enumerate()
            .map(|(k, outs)| EvalFrame {
                frame: k as u32 + 1,
                gt: self.gt[k].clone(),
                pred: outs.iter().map(|o| (o.track_id as i64, o.bbox)).collect(),
            })
            .collect()
    }

    pub fn detection_rows(&self) -> Vec<MotRow> {
        let mut rows = Vec::new();
        for (k, dets) in self.dets.iter().enumerate() {
            for d in dets {
                rows.push(MotRow::from_bbox(k as u32 + 1, -1, &d.bbox, d.score));
            }
        }
        rows
    }

    pub fn gt_rows(&self) -> Vec<MotRow> {
        let mut rows = Vec::new();
        for (k, gt) in self.gt.iter().enumerate() {
            for (id, b) in gt {
                rows.push(MotRow::from_bbox(k as u32 + 1, *id, b, 1.0));
            }
        }
        rows
    }

    /// Writes detections in file order (`-1` ids), which
    /// `io::format_results` would reorder, so rows are emitted directly.
    pub fn write_detections(&self, path: &Path) {
        let mut text = String::new();
        for r in self.detection_rows() {
            text.push_str(&format!(
                "{},-1,{},{},{},{},{},-1,-1,-1\n",
                r.frame, r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf
            ));
        }
        std::fs::write(path, text).unwrap();
    }

    pub fn write_gt(&self, path: &Path) {
        io::write_results(path, &self.gt_rows()).unwrap();
    }

    pub fn write_warps(&self, path: &Path) {
        botsort::gmc::save_warps(path, &self.warps).unwrap();
    }

    pub fn embedding_records(&self) -> Vec<EmbeddingRecord> {
        let mut out = Vec::new();
        for (k, dets) in self.dets.iter().enumerate() {
            for (i, d) in dets.iter().enumerate() {
                if let Some(e) = &d.embedding {
                    out.push(EmbeddingRecord { frame: k as u32 + 1, det_index: i as u32, vector: e.clone() });
                }
            }
        }
        out
    }
}

pub const PAN_SPEED: f64 = 20.0;

/// Five static objects in a tight row filmed by a camera panning right at
/// 20 px/frame, so image content moves 20 px left per frame. Neighbours sit
/// 26 px apart; without motion compensation a track's stale prediction
/// overlaps its right neighbour's new detection more than its own.
pub fn panning_scene(frames: u32) -> Scene {
    let (w, h, spacing) = (24.0, 60.0, 26.0);
    let mut dets = Vec::new();
    let mut gt = Vec::new();
    let mut warps = WarpTable::new();
    for f in 1..=frames {
        let shift = -PAN_SPEED * (f - 1) as f64;
        let mut fd = Vec::new();
        let mut fg = Vec::new();
        for i in 0..5 {
            let b = BBox::new(1000.0 + spacing * i as f64 + shift, 300.0, w, h).unwrap();
            fd.push(Detection::new(b, 0.9));
            fg.push((i as i64 + 1, b));
        }
        dets.push(fd);
        gt.push(fg);
        if f > 1 {
            warps.insert(f, AffineWarp::translation(-PAN_SPEED, 0.0));
        }
    }
    Scene { dets, gt, warps }
}

fn noisy_unit(rng: &mut ChaCha8Rng, base: &[f32], noise: f32) -> Vec<f32> {
    let v: Vec<f32> = base.iter().map(|b| b + noise * (rng.gen::<f32>() * 2.0 - 1.0)).collect();
    normalize(&v).unwrap()
}

pub const OCCLUSION_START: u32 = 61;
pub const OCCLUSION_LEN: u32 = 10;

/// Two people approach each other at 0.8 px/frame, disappear together behind
/// an occluder for 10 frames while turning around, and reappear walking
/// back. A constant-velocity prediction carries each track onto the other
/// person, so motion alone swaps the identities; embeddings tell them apart.
pub fn occlusion_scene(seed: u64, noise: f32) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 32;
    let mut base_a = vec![0.0f32; dim];
    let mut base_b = vec![0.0f32; dim];
    base_a[0] = 1.0;
    base_b[1] = 1.0;
    let (w, h, v) = (40.0, 100.0, 0.8);
    let last_visible = OCCLUSION_START - 1;
    let turn = last_visible + OCCLUSION_LEN / 2;
    let gap_at_hide = 4.0;
    // signed offset from the meeting point, positive = towards the other person
    let advance = |f: u32| -> f64 {
        if f <= turn {
            v * f as f64
        } else {
            v * (2 * turn - f) as f64
        }
    };
    let frames = last_visible + OCCLUSION_LEN + 40;
    let xa0 = 500.0 - gap_at_hide / 2.0 - advance(last_visible) - w / 2.0;
    let xb0 = 500.0 + gap_at_hide / 2.0 + advance(last_visible) - w / 2.0;
    let mut dets = Vec::new();
    let mut gt = Vec::new();
    for f in 1..=frames {
        let a = BBox::new(xa0 + advance(f), 200.0, w, h).unwrap();
        let b = BBox::new(xb0 - advance(f), 200.0, w, h).unwrap();
        let hidden = (OCCLUSION_START..OCCLUSION_START + OCCLUSION_LEN).contains(&f);
        if hidden {
            dets.push(Vec::new());
            gt.push(Vec::new());
        } else {
            dets.push(vec![
                Detection::new(a, 0.9).with_embedding(noisy_unit(&mut rng, &base_a, noise)),
                Detection::new(b, 0.9).with_embedding(noisy_unit(&mut rng, &base_b, noise)),
            ]);
            gt.push(vec![(1, a), (2, b)]);
        }
    }
    Scene { dets, gt, warps: WarpTable::new() }
}
