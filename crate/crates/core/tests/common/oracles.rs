//! Straightforward reference implementations used to cross-check the library.

use botsort::metrics::EvalFrame;
use botsort::iou;

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn diag(d: &[f64]) -> Mat {
    let mut m = zeros(d.len(), d.len());
    for (i, v) in d.iter().enumerate() {
        m[i][i] = *v;
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

pub fn col(v: &[f64]) -> Mat {
    v.iter().map(|x| vec![*x]).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.iter().zip(eye(n)).map(|(r, e)| r.iter().copied().chain(e).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let pivot = m[c][c];
        assert!(pivot.abs() > 1e-300, "singular");
        for v in m[c].iter_mut() {
            *v /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let src = m[c].clone();
                    for (x, s) in m[r].iter_mut().zip(src) {
                        *x -= f * s;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Textbook Kalman filter for the 8-dim constant-velocity box model.
pub struct DenseKf {
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub sigma_m: f64,
    pub dt: f64,
}

impl DenseKf {
    fn f(&self) -> Mat {
        let mut f = eye(8);
        for i in 0..4 {
            f[i][i + 4] = self.dt;
        }
        f
    }

    fn h(&self) -> Mat {
        let mut h = zeros(4, 8);
        for i in 0..4 {
            h[i][i] = 1.0;
        }
        h
    }

    pub fn q(&self, w: f64, h: f64) -> Mat {
        let (p, v) = (self.sigma_p, self.sigma_v);
        diag(&[
            (p * w) * (p * w),
            (p * h) * (p * h),
            (p * w) * (p * w),
            (p * h) * (p * h),
            (v * w) * (v * w),
            (v * h) * (v * h),
            (v * w) * (v * w),
            (v * h) * (v * h),
        ])
    }

    pub fn r(&self, zw: f64, zh: f64) -> Mat {
        let m = self.sigma_m;
        diag(&[(m * zw) * (m * zw), (m * zh) * (m * zh), (m * zw) * (m * zw), (m * zh) * (m * zh)])
    }

    pub fn predict(&self, x: &[f64], p: &Mat, shape_frozen: bool) -> (Vec<f64>, Mat) {
        let mut x = x.to_vec();
        let q = self.q(x[2], x[3]);
        if shape_frozen {
            x[6] = 0.0;
            x[7] = 0.0;
        }
        let f = self.f();
        let xn = mul(&f, &col(&x)).into_iter().map(|r| r[0]).collect();
        let pn = add(&mul(&mul(&f, p), &transpose(&f)), &q);
        (xn, pn)
    }

    pub fn update(&self, x: &[f64], p: &Mat, z: &[f64]) -> (Vec<f64>, Mat) {
        let h = self.h();
        let s = add(&mul(&mul(&h, p), &transpose(&h)), &self.r(z[2], z[3]));
        let k = mul(&mul(p, &transpose(&h)), &inverse(&s));
        let hx = mul(&h, &col(x));
        let y: Vec<f64> = (0..4).map(|i| z[i] - hx[i][0]).collect();
        let ky = mul(&k, &col(&y));
        let xn = (0..8).map(|i| x[i] + ky[i][0]).collect();
        let pn = mul(&sub(&eye(8), &mul(&k, &h)), p);
        (xn, pn)
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest entrywise difference relative to the largest reference entry.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let d: Vec<f64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
    max_abs(&d) / max_abs(want).max(f64::MIN_POSITIVE)
}

fn injections(n: usize, m: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == n {
        f(cur);
        return;
    }
    for j in 0..m {
        if !used[j] {
            used[j] = true;
            cur.push(j);
            injections(n, m, cur, used, f);
            cur.pop();
            used[j] = false;
        }
    }
}

/// Minimum total cost over all maximum-cardinality matchings of a
/// `rows x cols` matrix, summed in row order.
pub fn brute_force_assignment(c: &[f64], rows: usize, cols: usize) -> f64 {
    let mut best = f64::INFINITY;
    if rows <= cols {
        injections(rows, cols, &mut Vec::new(), &mut vec![false; cols], &mut |p| {
            let s = p.iter().enumerate().fold(0.0, |acc, (r, &j)| acc + c[r * cols + j]);
            best = best.min(s);
        });
    } else {
        injections(cols, rows, &mut Vec::new(), &mut vec![false; rows], &mut |p| {
            // p[col] = row; re-sum in row order
            let mut pairs: Vec<(usize, usize)> = p.iter().enumerate().map(|(j, &r)| (r, j)).collect();
            pairs.sort();
            let s = pairs.iter().fold(0.0, |acc, &(r, j)| acc + c[r * cols + j]);
            best = best.min(s);
        });
    }
    if rows == 0 || cols == 0 {
        0.0
    } else {
        best
    }
}

/// IDF1 by enumerating every partial one-to-one matching of ground-truth
/// to predicted trajectories.
pub fn idf1_exhaustive(frames: &[EvalFrame], thr: f64) -> f64 {
    let mut gt_ids: Vec<i64> = frames.iter().flat_map(|f| f.gt.iter().map(|g| g.0)).collect();
    let mut pr_ids: Vec<i64> = frames.iter().flat_map(|f| f.pred.iter().map(|p| p.0)).collect();
    gt_ids.sort();
    gt_ids.dedup();
    pr_ids.sort();
    pr_ids.dedup();
    let (n, m) = (gt_ids.len(), pr_ids.len());
    let mut overlap = vec![vec![0u64; m]; n];
    for f in frames {
        for (g, gb) in &f.gt {
            for (p, pb) in &f.pred {
                if iou(gb, pb) >= thr {
                    let gi = gt_ids.binary_search(g).unwrap();
                    let pi = pr_ids.binary_search(p).unwrap();
                    overlap[gi][pi] += 1;
                }
            }
        }
    }
    // every gt either takes an unused pred or stays unmatched
    fn search(g: usize, used: &mut Vec<bool>, ov: &[Vec<u64>]) -> u64 {
        if g == ov.len() {
            return 0;
        }
        let mut best = search(g + 1, used, ov);
        for p in 0..used.len() {
            if !used[p] {
                used[p] = true;
                best = best.max(ov[g][p] + search(g + 1, used, ov));
                used[p] = false;
            }
        }
        best
    }
    let idtp = search(0, &mut vec![false; m], &overlap);
    let gt_dets: usize = frames.iter().map(|f| f.gt.len()).sum();
    let pr_dets: usize = frames.iter().map(|f| f.pred.len()).sum();
    2.0 * idtp as f64 / (gt_dets + pr_dets) as f64
}
