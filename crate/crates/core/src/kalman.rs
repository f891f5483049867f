//! Constant-velocity Kalman filter over `(x_c, y_c, w, h)` and their rates.
//!
//! Process and measurement noise scale with the box extent: `Q` uses the
//! posterior width/height of the previous step, `R` the measured ones.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::gmc::AffineWarp;

pub type StateVec = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;
pub type MeasVec = SVector<f64, 4>;
pub type MeasCov = SMatrix<f64, 4, 4>;

const IDX_VW: usize = 6;
const IDX_VH: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfParams {
    /// Position/size process noise factor.
    pub sigma_p: f64,
    /// Velocity process noise factor.
    pub sigma_v: f64,
    /// Measurement noise factor.
    pub sigma_m: f64,
    /// Frames per step.
    pub dt: f64,
}

impl Default for KfParams {
    fn default() -> Self {
        KfParams { sigma_p: 0.05, sigma_v: 0.00625, sigma_m: 0.05, dt: 1.0 }
    }
}

impl KfParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_p", self.sigma_p),
            ("sigma_v", self.sigma_v),
            ("sigma_m", self.sigma_m),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Observed `(z_xc, z_yc, z_w, z_h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement(pub MeasVec);

impl Measurement {
    pub fn new(xc: f64, yc: f64, w: f64, h: f64) -> Result<Self> {
        let m = Measurement(MeasVec::new(xc, yc, w, h));
        m.validate()?;
        Ok(m)
    }

    pub fn from_bbox(b: &BBox) -> Result<Self> {
        let [xc, yc, w, h] = b.to_center()?;
        Self::new(xc, yc, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMeasurement(format!("non-finite {:?}", self.0.as_slice())));
        }
        if self.0[2] <= 0.0 || self.0[3] <= 0.0 {
            return Err(Error::InvalidMeasurement(format!(
                "non-positive extent {}x{}",
                self.0[2], self.0[3]
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.0[2]
    }

    pub fn height(&self) -> f64 {
        self.0[3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVec,
    pub cov: StateCov,
}

impl KalmanState {
    /// Box at the current mean. Fails if the size components went non-positive.
    pub fn bbox(&self) -> Result<BBox> {
        BBox::from_center(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn width(&self) -> f64 {
        self.mean[2]
    }

    pub fn height(&self) -> f64 {
        self.mean[3]
    }

    /// Largest asymmetry `max |P_ij - P_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (self.cov - self.cov.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.cov + self.cov.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Transition matrix with `dt` coupling each coordinate to its rate.
pub fn transition(dt: f64) -> StateCov {
    let mut f = StateCov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = dt;
    }
    f
}

/// Observation matrix selecting `(x_c, y_c, w, h)`.
pub fn observation() -> SMatrix<f64, 4, 8> {
    SMatrix::<f64, 4, 8>::identity()
}

/// Initial state: measured box, zero rates, covariance from the box extent.
pub fn initiate(z: &Measurement, p: &KfParams) -> Result<KalmanState> {
    z.validate()?;
    let (w, h) = (z.width(), z.height());
    let pos = 2.0 * p.sigma_p;
    let vel = 10.0 * p.sigma_v;
    let std = [pos * w, pos * h, pos * w, pos * h, vel * w, vel * h, vel * w, vel * h];
    let mut mean = StateVec::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&z.0);
    Ok(KalmanState { mean, cov: StateCov::from_diagonal(&SVector::from(std.map(|s| s * s))) })
}

pub fn make_q(prev: &KalmanState, p: &KfParams) -> StateCov {
    let (w, h) = (prev.width(), prev.height());
    let (sp, sv) = (p.sigma_p, p.sigma_v);
    let d = [
        (sp * w).powi(2),
        (sp * h).powi(2),
        (sp * w).powi(2),
        (sp * h).powi(2),
        (sv * w).powi(2),
        (sv * h).powi(2),
        (sv * w).powi(2),
        (sv * h).powi(2),
    ];
    StateCov::from_diagonal(&SVector::from(d))
}

pub fn make_r(z: &Measurement, p: &KfParams) -> MeasCov {
    let (w, h) = (p.sigma_m * z.width(), p.sigma_m * z.height());
    MeasCov::from_diagonal(&MeasVec::new(w * w, h * h, w * w, h * h))
}

/// Prior for the next frame. With `shape_frozen` the size rates are zeroed
/// first, which keeps long extrapolations of lost tracks from deforming.
pub fn predict(s: &KalmanState, p: &KfParams, shape_frozen: bool) -> KalmanState {
    let mut mean = s.mean;
    if shape_frozen {
        mean[IDX_VW] = 0.0;
        mean[IDX_VH] = 0.0;
    }
    let f = transition(p.dt);
    let q = make_q(s, p);
    let cov = f * s.cov * f.transpose() + q;
    KalmanState { mean: f * mean, cov: symmetrize(cov) }
}

/// Moves a prior into the coordinates of the next frame.
///
/// The linear part acts on each `(x, y)`-like pair of the state; the
/// translation only shifts the center. With `correct_cov` the covariance is
/// rotated and scaled too.
pub fn apply_warp(s: &KalmanState, warp: &AffineWarp, correct_cov: bool) -> Result<KalmanState> {
    warp.validate()?;
    let m = warp.linear();
    let mut big = StateCov::zeros();
    for k in 0..4 {
        big.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&m);
    }
    let mut mean = big * s.mean;
    mean[0] += warp.a13;
    mean[1] += warp.a23;
    let cov = if correct_cov { symmetrize(big * s.cov * big.transpose()) } else { s.cov };
    Ok(KalmanState { mean, cov })
}

pub fn update(s: &KalmanState, z: &Measurement, p: &KfParams) -> Result<KalmanState> {
    z.validate()?;
    let h = observation();
    let r = make_r(z, p);
    let pht = s.cov * h.transpose();
    let innov_cov = h * pht + r;
    let chol = innov_cov.cholesky().ok_or(Error::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let gain = chol.solve(&pht.transpose()).transpose();
    let innovation = z.0 - h * s.mean;
    let mean = s.mean + gain * innovation;
    let cov = (StateCov::identity() - gain * h) * s.cov;
    Ok(KalmanState { mean, cov: symmetrize(cov) })
}

fn symmetrize(m: StateCov) -> StateCov {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(m: &StateCov) -> Vec<f64> {
        (0..8).map(|i| m[(i, i)]).collect()
    }

    fn state(mean: [f64; 8], cov_diag: f64) -> KalmanState {
        KalmanState { mean: StateVec::from(mean), cov: StateCov::identity() * cov_diag }
    }

    #[test]
    fn initiate_mean_and_cov() {
        let z = Measurement::new(5.0, 10.0, 10.0, 20.0).unwrap();
        let s = initiate(&z, &KfParams::default()).unwrap();
        assert_eq!(s.mean.as_slice(), &[5.0, 10.0, 10.0, 20.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = [1.0, 4.0, 1.0, 4.0, 0.390625, 1.5625, 0.390625, 1.5625];
        for (a, b) in diag(&s.cov).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(s.cov.cholesky().is_some());
    }

    #[test]
    fn initiate_rejects_bad_extent() {
        assert!(Measurement::new(0.0, 0.0, 0.0, 1.0).is_err());
        let z = Measurement(MeasVec::new(0.0, 0.0, 3.0, -1.0));
        assert!(initiate(&z, &KfParams::default()).is_err());
    }

    #[test]
    fn q_matches_hand_values() {
        let s = state([0.0, 0.0, 100.0, 200.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let q = make_q(&s, &KfParams::default());
        assert_eq!(diag(&q), vec![25.0, 100.0, 25.0, 100.0, 0.390625, 1.5625, 0.390625, 1.5625]);
        assert_eq!(q - StateCov::from_diagonal(&q.diagonal()), StateCov::zeros());
    }

    #[test]
    fn q_square_box_and_scaling() {
        let p = KfParams::default();
        let s = state([0.0, 0.0, 40.0, 40.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let d = diag(&make_q(&s, &p));
        assert!(d[..4].iter().all(|v| *v == d[0]));
        let scaled = state([0.0, 0.0, 120.0, 120.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let ds = diag(&make_q(&scaled, &p));
        for (a, b) in d.iter().zip(ds) {
            assert!((b - 9.0 * a).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn r_matches_hand_values() {
        let p = KfParams::default();
        let r = make_r(&Measurement::new(0.0, 0.0, 100.0, 200.0).unwrap(), &p);
        assert_eq!(r.diagonal().as_slice(), &[25.0, 100.0, 25.0, 100.0]);
        let r = make_r(&Measurement::new(0.0, 0.0, 30.0, 30.0).unwrap(), &p);
        assert!(r.diagonal().iter().all(|v| *v == r[(0, 0)] && *v > 0.0));
    }

    #[test]
    fn predict_constant_velocity() {
        let p = KfParams::default();
        let s = state([10.0, 20.0, 5.0, 8.0, 1.0, -1.0, 0.0, 0.0], 1.0);
        let n = predict(&s, &p, false);
        assert_eq!(&n.mean.as_slice()[..4], &[11.0, 19.0, 5.0, 8.0]);
        assert_eq!(&n.mean.as_slice()[4..], &[1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn predict_static_grows_by_q() {
        let p = KfParams::default();
        let s = state([10.0, 20.0, 5.0, 8.0, 0.0, 0.0, 0.0, 0.0], 0.0);
        let n = predict(&s, &p, false);
        assert_eq!(n.mean, s.mean);
        assert_eq!(n.cov, make_q(&s, &p));
    }

    #[test]
    fn predict_shape_frozen() {
        let p = KfParams::default();
        let s = state([10.0, 20.0, 5.0, 8.0, 0.0, 0.0, 2.0, 1.0], 1.0);
        let n = predict(&s, &p, true);
        assert_eq!(n.mean[2], 5.0);
        assert_eq!(n.mean[3], 8.0);
        assert_eq!(predict(&s, &p, false).mean[2], 7.0);
    }

    #[test]
    fn warp_identity_and_translation() {
        let s = state([100.0, 50.0, 10.0, 20.0, 1.0, 2.0, 0.0, 0.0], 3.0);
        assert_eq!(apply_warp(&s, &AffineWarp::IDENTITY, true).unwrap(), s);
        let t = apply_warp(&s, &AffineWarp::translation(5.0, -3.0), true).unwrap();
        assert_eq!(t.mean.as_slice(), &[105.0, 47.0, 10.0, 20.0, 1.0, 2.0, 0.0, 0.0]);
        assert_eq!(t.cov, s.cov);
    }

    #[test]
    fn warp_scaling_doubles_mean_quadruples_cov() {
        let s = state([100.0, 50.0, 10.0, 20.0, 1.0, 2.0, 3.0, 4.0], 3.0);
        let w = AffineWarp::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0).unwrap();
        let on = apply_warp(&s, &w, true).unwrap();
        assert_eq!(on.mean, s.mean * 2.0);
        assert_eq!(on.cov, s.cov * 4.0);
        let off = apply_warp(&s, &w, false).unwrap();
        assert_eq!(off.cov, s.cov);
    }

    #[test]
    fn degenerate_warp_rejected() {
        let s = state([0.0; 8], 1.0);
        let w = AffineWarp { a11: 1.0, a12: 2.0, a13: 0.0, a21: 0.5, a22: 1.0, a23: 0.0 };
        assert!(matches!(apply_warp(&s, &w, true), Err(Error::DegenerateWarp { .. })));
    }

    #[test]
    fn update_zero_innovation_keeps_position() {
        let p = KfParams::default();
        let s = predict(&initiate(&Measurement::new(50.0, 60.0, 20.0, 40.0).unwrap(), &p).unwrap(), &p, false);
        let z = Measurement(s.mean.fixed_rows::<4>(0).into_owned());
        let u = update(&s, &z, &p).unwrap();
        for i in 0..4 {
            assert!((u.mean[i] - s.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn update_with_huge_noise_keeps_prior() {
        let p = KfParams { sigma_m: 1e6, ..KfParams::default() };
        let s = state([100.0, 50.0, 10.0, 20.0, 1.0, 2.0, 0.0, 0.0], 4.0);
        let z = Measurement::new(130.0, 20.0, 15.0, 25.0).unwrap();
        let u = update(&s, &z, &p).unwrap();
        for i in 0..8 {
            let denom = s.mean[i].abs().max(1.0);
            assert!((u.mean[i] - s.mean[i]).abs() / denom < 1e-3);
        }
    }

    #[test]
    fn update_posterior_between_prior_and_measurement() {
        let p = KfParams::default();
        let s = state([100.0, 50.0, 10.0, 20.0, 0.0, 0.0, 0.0, 0.0], 4.0);
        let z = Measurement::new(104.0, 45.0, 12.0, 18.0).unwrap();
        let u = update(&s, &z, &p).unwrap();
        for i in 0..4 {
            let (lo, hi) = if s.mean[i] < z.0[i] { (s.mean[i], z.0[i]) } else { (z.0[i], s.mean[i]) };
            assert!(u.mean[i] >= lo && u.mean[i] <= hi);
            assert!(u.cov[(i, i)] <= s.cov[(i, i)]);
        }
    }

    #[test]
    fn converges_on_noiseless_trajectory() {
        let p = KfParams::default();
        let truth = |k: f64| [50.0 + 3.0 * k, 80.0 - 1.5 * k, 30.0 + 0.2 * k, 60.0 + 0.4 * k];
        let t0 = truth(0.0);
        let mut s = initiate(&Measurement::new(t0[0], t0[1], t0[2], t0[3]).unwrap(), &p).unwrap();
        for k in 1..=20 {
            s = predict(&s, &p, false);
            let t = truth(k as f64);
            s = update(&s, &Measurement::new(t[0], t[1], t[2], t[3]).unwrap(), &p).unwrap();
        }
        let t = truth(20.0);
        assert!((s.mean[0] - t[0]).abs() < 0.1 && (s.mean[1] - t[1]).abs() < 0.1);
    }
}
