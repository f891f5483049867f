//! Offline gap filling for finished tracklets.

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackletSeries {
    pub id: i64,
    /// `(frame, box, score)` with strictly increasing frames.
    pub entries: Vec<(u32, BBox, f64)>,
}

/// Fills gaps of `f2 - f1 <= max_gap` frames by linear interpolation of every
/// box coordinate and the score. Longer gaps and existing entries are left
/// alone, so applying this twice is the same as applying it once.
pub fn interpolate(series: &TrackletSeries, max_gap: u32) -> TrackletSeries {
    let mut out = Vec::with_capacity(series.entries.len());
    for (i, &(f1, b1, s1)) in series.entries.iter().enumerate() {
        out.push((f1, b1, s1));
        let Some(&(f2, b2, s2)) = series.entries.get(i + 1) else { break };
        let gap = f2.saturating_sub(f1);
        if gap <= 1 || gap > max_gap {
            continue;
        }
        for f in f1 + 1..f2 {
            let t = (f - f1) as f64 / gap as f64;
            let lerp = |a: f64, b: f64| a + (b - a) * t;
            let b = BBox {
                x_left: lerp(b1.x_left, b2.x_left),
                y_top: lerp(b1.y_top, b2.y_top),
                width: lerp(b1.width, b2.width),
                height: lerp(b1.height, b2.height),
            };
            out.push((f, b, lerp(s1, s2)));
        }
    }
    TrackletSeries { id: series.id, entries: out }
}
