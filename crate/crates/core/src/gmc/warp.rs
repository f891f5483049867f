//! Frame-to-frame affine camera motion and its text file format.
//!
//! One line per frame: `frame a11 a12 a13 a21 a22 a23`, whitespace separated,
//! frames 1-based. Frames with no line are treated as identity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub const MIN_ABS_DET: f64 = 1e-6;

/// 2x3 affine `[M | T]` mapping frame k-1 pixel coordinates into frame k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineWarp {
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
}

impl Default for AffineWarp {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineWarp {
    pub const IDENTITY: AffineWarp =
        AffineWarp { a11: 1.0, a12: 0.0, a13: 0.0, a21: 0.0, a22: 1.0, a23: 0.0 };

    pub fn new(a11: f64, a12: f64, a13: f64, a21: f64, a22: f64, a23: f64) -> Result<Self> {
        let w = AffineWarp { a11, a12, a13, a21, a22, a23 };
        w.validate()?;
        Ok(w)
    }

    pub fn from_rows(rows: [[f64; 3]; 2]) -> Result<Self> {
        Self::new(rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2])
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineWarp { a13: tx, a23: ty, ..Self::IDENTITY }
    }

    /// Rotation by `angle` radians about `(cx, cy)`, followed by nothing else.
    pub fn rotation_about(angle: f64, cx: f64, cy: f64) -> Self {
        let (s, c) = angle.sin_cos();
        AffineWarp {
            a11: c,
            a12: -s,
            a13: cx - c * cx + s * cy,
            a21: s,
            a22: c,
            a23: cy - s * cx - c * cy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.as_array().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite warp {self:?}")));
        }
        let det = self.det();
        if det.abs() <= MIN_ABS_DET {
            return Err(Error::DegenerateWarp { det });
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn linear(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a21, self.a22)
    }

    pub fn offset(&self) -> Vector2<f64> {
        Vector2::new(self.a13, self.a23)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a13, self.a21, self.a22, self.a23]
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a11 * x + self.a12 * y + self.a13,
            self.a21 * x + self.a22 * y + self.a23,
        )
    }

    /// `other ∘ self`: first apply `self`, then `other`.
    pub fn then(&self, other: &AffineWarp) -> AffineWarp {
        let m = other.linear() * self.linear();
        let t = other.linear() * self.offset() + other.offset();
        AffineWarp { a11: m[(0, 0)], a12: m[(0, 1)], a13: t.x, a21: m[(1, 0)], a22: m[(1, 1)], a23: t.y }
    }

    pub fn is_identity_within(&self, tol: f64) -> bool {
        self.as_array()
            .iter()
            .zip(Self::IDENTITY.as_array())
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn max_abs_diff(&self, other: &AffineWarp) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-frame warps, keyed by 1-based frame index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarpTable {
    warps: BTreeMap<u32, AffineWarp>,
}

impl WarpTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: u32, warp: AffineWarp) {
        self.warps.insert(frame, warp);
    }

    /// Warp into `frame`; identity when none was recorded.
    pub fn get(&self, frame: u32) -> AffineWarp {
        self.warps.get(&frame).copied().unwrap_or(AffineWarp::IDENTITY)
    }

    pub fn len(&self) -> usize {
        self.warps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.warps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &AffineWarp)> {
        self.warps.iter().map(|(k, v)| (*k, v))
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut table = WarpTable::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(Error::parse(path, line_no, format!("expected 7 fields, got {}", fields.len())));
            }
            let frame: u32 = fields[0]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad frame index {:?}", fields[0])))?;
            if frame == 0 {
                return Err(Error::parse(path, line_no, "frame index must be 1-based"));
            }
            let mut a = [0.0f64; 6];
            for (slot, s) in a.iter_mut().zip(&fields[1..]) {
                *slot = s
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad number {s:?}")))?;
            }
            let warp = AffineWarp::new(a[0], a[1], a[2], a[3], a[4], a[5])
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            table.insert(frame, warp);
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (frame, w) in &self.warps {
            write!(out, "{frame}").unwrap();
            for v in w.as_array() {
                write!(out, " {v:.12e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_warps(path: impl AsRef<Path>) -> Result<WarpTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WarpTable::parse(&text, path)
}

pub fn save_warps(path: impl AsRef<Path>, table: &WarpTable) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), table.to_text().as_bytes())
}
