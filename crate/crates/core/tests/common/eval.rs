//! Random evaluation instances: ground-truth trajectories and imperfect
//! predictions with misses, false positives and identity swaps.

use botsort::metrics::EvalFrame;
use botsort::BBox;
use rand::Rng;

pub struct InstanceSpec {
    pub frames: u32,
    pub max_gt: usize,
    pub miss_rate: f64,
    pub fp_rate: f64,
    pub swap_rate: f64,
    pub jitter: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec { frames: 30, max_gt: 6, miss_rate: 0.1, fp_rate: 0.1, swap_rate: 0.05, jitter: 3.0 }
    }
}

pub fn random_instance(rng: &mut impl Rng, spec: &InstanceSpec) -> Vec<EvalFrame> {
    let n = rng.gen_range(1..=spec.max_gt);
    // (start, end, x, y, vx, vy)
    let objs: Vec<(u32, u32, f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            let a = rng.gen_range(1..=spec.frames);
            let b = rng.gen_range(a..=spec.frames);
            (a, b, rng.gen_range(0.0..500.0), rng.gen_range(0.0..300.0), rng.gen_range(-4.0..4.0), rng.gen_range(-2.0..2.0))
        })
        .collect();
    // prediction id currently assigned to each object
    let mut pred_id: Vec<i64> = (0..n as i64).map(|i| 100 + i).collect();
    let mut next_id = 100 + n as i64;
    let mut out = Vec::new();
    for f in 1..=spec.frames {
        let mut frame = EvalFrame { frame: f, ..EvalFrame::default() };
        for (i, &(a, b, x, y, vx, vy)) in objs.iter().enumerate() {
            if f < a || f > b {
                continue;
            }
            let t = (f - a) as f64;
            let gb = BBox::new(x + vx * t, y + vy * t, 30.0, 60.0).unwrap();
            frame.gt.push((i as i64 + 1, gb));
            if rng.gen_bool(spec.swap_rate) {
                pred_id[i] = next_id;
                next_id += 1;
            }
            if !rng.gen_bool(spec.miss_rate) {
                let j = spec.jitter;
                let pb = gb.translated(rng.gen_range(-j..=j), rng.gen_range(-j..=j));
                frame.pred.push((pred_id[i], pb));
            }
        }
        if rng.gen_bool(spec.fp_rate) {
            let b = BBox::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..300.0), 30.0, 60.0).unwrap();
            frame.pred.push((next_id, b));
            next_id += 1;
        }
        out.push(frame);
    }
    out
}
