//! Deterministic textured frames for motion-estimation tests.

use botsort::gmc::GrayImage;
use botsort::AffineWarp;

/// Smooth blobs plus a faint sinusoid; rich in corners, free of aliasing.
pub fn blob_texture(x: f64, y: f64) -> f64 {
    let mut v = 0.35;
    for i in 0..60 {
        let fi = i as f64;
        let cx = (fi * 73.13).rem_euclid(340.0) - 20.0;
        let cy = (fi * 41.71).rem_euclid(280.0) - 20.0;
        let s = 3.0 + (fi * 1.7).rem_euclid(5.0);
        let a = if i % 2 == 0 { 0.35 } else { -0.25 };
        v += a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
    }
    v + 0.05 * (0.21 * x).sin() * (0.17 * y).cos()
}

/// Renders the scene as seen after `warp` (scene point `p` lands at `warp(p)`).
pub fn render(w: usize, h: usize, warp: &AffineWarp) -> GrayImage {
    let m = warp.linear().try_inverse().unwrap();
    let t = warp.offset();
    GrayImage::from_fn(w, h, |x, y| {
        let s = m * (nalgebra::Vector2::new(x as f64, y as f64) - t);
        blob_texture(s.x, s.y).clamp(0.0, 1.0) as f32
    })
}
