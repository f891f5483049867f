//! Axis-aligned boxes in pixel coordinates.
//!
//! Boxes are stored as top-left corner plus extent, the layout used by
//! MOTChallenge files. The center form `(x_c, y_c, w, h)` only appears at the
//! Kalman filter boundary.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_left: f64,
    pub y_top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite fields and non-positive extents.
    pub fn new(x_left: f64, y_top: f64, width: f64, height: f64) -> Result<Self> {
        let b = BBox { x_left, y_top, width, height };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.x_left.is_finite()
            && self.y_top.is_finite()
            && self.width.is_finite()
            && self.height.is_finite();
        if !finite {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive extent {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn x_right(&self) -> f64 {
        self.x_left + self.width
    }

    pub fn y_bottom(&self) -> f64 {
        self.y_top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Center form `(x_c, y_c, w, h)`.
    pub fn to_center(&self) -> Result<[f64; 4]> {
        self.validate()?;
        Ok([
            self.x_left + self.width / 2.0,
            self.y_top + self.height / 2.0,
            self.width,
            self.height,
        ])
    }

    pub fn from_center(x_c: f64, y_c: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(x_c - w / 2.0, y_c - h / 2.0, w, h)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox { x_left: self.x_left + dx, y_top: self.y_top + dy, ..*self }
    }
}

/// Intersection-over-union of two boxes.
///
/// Touching edges give zero intersection, so the result is 0 rather than
/// 0/0 for boxes that only share a border.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x_right().min(b.x_right()) - a.x_left.max(b.x_left);
    let ih = a.y_bottom().min(b.y_bottom()) - a.y_top.max(b.y_top);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
