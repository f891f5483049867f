//! Local translation-consistency filter for flow correspondences.

use crate::gmc::flow::Correspondence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierParams {
    pub grid_cols: usize,
    pub grid_rows: usize,
    /// Maximum per-axis deviation from the cell median displacement (pixels).
    pub tol: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams { grid_cols: 10, grid_rows: 10, tol: 2.0 }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Buckets correspondences by their position in the previous frame over a
/// `grid_cols x grid_rows` partition of a `width x height` image, and drops
/// those whose displacement strays from their cell's median. Input order is
/// preserved among survivors.
pub fn reject_outliers(
    corrs: &[Correspondence],
    width: usize,
    height: usize,
    params: &OutlierParams,
) -> Vec<Correspondence> {
    let (gc, gr) = (params.grid_cols.max(1), params.grid_rows.max(1));
    let cell_of = |c: &Correspondence| -> usize {
        let cx = ((c.prev.0 / width as f64) * gc as f64).floor().clamp(0.0, (gc - 1) as f64) as usize;
        let cy = ((c.prev.1 / height as f64) * gr as f64).floor().clamp(0.0, (gr - 1) as f64) as usize;
        cy * gc + cx
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); gc * gr];
    for (i, c) in corrs.iter().enumerate() {
        members[cell_of(c)].push(i);
    }
    let mut keep = vec![false; corrs.len()];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for idx in members.iter().filter(|m| !m.is_empty()) {
        xs.clear();
        ys.clear();
        for &i in idx {
            let (dx, dy) = corrs[i].displacement();
            xs.push(dx);
            ys.push(dy);
        }
        let (mx, my) = (median(&mut xs), median(&mut ys));
        for &i in idx {
            let (dx, dy) = corrs[i].displacement();
            keep[i] = (dx - mx).abs() <= params.tol && (dy - my).abs() <= params.tol;
        }
    }
    corrs.iter().zip(keep).filter_map(|(c, k)| k.then_some(*c)).collect()
}
