//! Grayscale images with intensities in `[0, 1]` and binary PGM I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// Smallest width/height accepted for motion estimation.
pub const MIN_ESTIMATION_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::InvalidParameter(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with replicated borders.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    /// Bilinear sample at a sub-pixel position, borders replicated.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi) as f64;
        let p10 = self.get_clamped(xi + 1, yi) as f64;
        let p01 = self.get_clamped(xi, yi + 1) as f64;
        let p11 = self.get_clamped(xi + 1, yi + 1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    pub fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    pub fn ensure_min_dim(&self, min: usize) -> Result<()> {
        if self.width < min || self.height < min {
            return Err(Error::ImageTooSmall { width: self.width, height: self.height, min });
        }
        Ok(())
    }

    /// Area-average downscale by an integer factor. Trailing rows/columns
    /// that do not fill a whole block are dropped.
    pub fn downscale(&self, factor: usize) -> Result<GrayImage> {
        if factor == 0 {
            return Err(Error::InvalidParameter("downscale factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width / factor, self.height / factor);
        if w == 0 || h == 0 {
            return Err(Error::ImageTooSmall { width: self.width, height: self.height, min: factor });
        }
        let norm = 1.0 / (factor * factor) as f32;
        Ok(GrayImage::from_fn(w, h, |x, y| {
            let mut acc = 0.0f32;
            for dy in 0..factor {
                let row = (y * factor + dy) * self.width;
                for dx in 0..factor {
                    acc += self.pixels[row + x * factor + dx];
                }
            }
            acc * norm
        }))
    }

    /// One pyramid level down: 5-tap binomial blur, then every other pixel.
    pub fn pyr_down(&self) -> GrayImage {
        const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let tmp = GrayImage::from_fn(self.width, self.height, |x, y| {
            K.iter()
                .enumerate()
                .map(|(i, k)| k * self.get_clamped(x as isize + i as isize - 2, y as isize))
                .sum()
        });
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        GrayImage::from_fn(w, h, |x, y| {
            K.iter()
                .enumerate()
                .map(|(i, k)| k * tmp.get_clamped(2 * x as isize, 2 * y as isize + i as isize - 2))
                .sum()
        })
    }

    /// Scharr derivatives, normalized so a unit ramp gives gradient 1.
    pub fn scharr(&self) -> (GrayImage, GrayImage) {
        let gx = GrayImage::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let d = |yy: isize| self.get_clamped(x + 1, yy) - self.get_clamped(x - 1, yy);
            (3.0 * d(y - 1) + 10.0 * d(y) + 3.0 * d(y + 1)) / 32.0
        });
        let gy = GrayImage::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let d = |xx: isize| self.get_clamped(xx, y + 1) - self.get_clamped(xx, y - 1);
            (3.0 * d(x - 1) + 10.0 * d(x) + 3.0 * d(x + 1)) / 32.0
        });
        (gx, gy)
    }

    /// Sobel derivatives (unnormalized 3x3 kernels).
    pub fn sobel(&self) -> (GrayImage, GrayImage) {
        let gx = GrayImage::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let d = |yy: isize| self.get_clamped(x + 1, yy) - self.get_clamped(x - 1, yy);
            d(y - 1) + 2.0 * d(y) + d(y + 1)
        });
        let gy = GrayImage::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let d = |xx: isize| self.get_clamped(xx, y + 1) - self.get_clamped(xx, y - 1);
            d(x - 1) + 2.0 * d(x) + d(x + 1)
        });
        (gx, gy)
    }

    /// Quantizes to 8-bit and writes binary PGM (P5).
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8], path: &Path) -> Result<GrayImage> {
        let mut cursor = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if cursor < bytes.len() && bytes[cursor] == b'#' {
                while cursor < bytes.len() && bytes[cursor] != b'\n' {
                    cursor += 1;
                }
                continue;
            }
            let start = cursor;
            while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if start == cursor {
                return Err(Error::parse(path, 1, "truncated PGM header"));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
        }
        if tokens[0] != "P5" {
            return Err(Error::parse(path, 1, format!("expected P5 magic, got {:?}", tokens[0])));
        }
        let num = |s: &str, what: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(path, 1, format!("bad {what} {s:?}")))
        };
        let width = num(&tokens[1], "width")?;
        let height = num(&tokens[2], "height")?;
        let maxval = num(&tokens[3], "maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::parse(path, 1, format!("maxval {maxval} out of range")));
        }
        // exactly one whitespace byte separates header and raster
        cursor += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let need = width * height * bpp;
        let raster = bytes
            .get(cursor..cursor + need)
            .ok_or_else(|| Error::parse(path, 1, format!("raster truncated: need {need} bytes")))?;
        let scale = 1.0 / maxval as f32;
        let pixels: Vec<f32> = if bpp == 1 {
            raster.iter().map(|&b| b as f32 * scale).collect()
        } else {
            raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale).collect()
        };
        GrayImage::new(width, height, pixels).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    GrayImage::from_pgm_bytes(&bytes, path)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &img.to_pgm_bytes())
}
