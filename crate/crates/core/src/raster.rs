//! The shared H×W×3 pixel container.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// How the pixel values of a [`RasterImage`] are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Linear radiance, non-negative and unbounded.
    Linear,
    /// Display-encoded (gamma) values in `[0, 1]`.
    Display,
}

/// Row-major RGB raster. Row 0 is the top of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    encoding: Encoding,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn zeros(width: usize, height: usize, encoding: Encoding) -> Self {
        Self {
            width,
            height,
            encoding,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn uniform(width: usize, height: usize, rgb: Rgb, encoding: Encoding) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            encoding,
            data,
        }
    }

    /// Builds an image from interleaved RGB data, checking the value-range
    /// invariants of the encoding.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>, encoding: Encoding) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "{} values supplied for a {width}x{height} RGB image",
                data.len()
            )));
        }
        let img = Self {
            width,
            height,
            encoding,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        encoding: Encoding,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Self {
            width,
            height,
            encoding,
            data,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.data.iter().enumerate() {
            let ok = match self.encoding {
                Encoding::Linear => v.is_finite() && v >= 0.0,
                Encoding::Display => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "value {v} at pixel {} channel {} violates {:?} range",
                    i / 3,
                    i % 3,
                    self.encoding
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> Rgb {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: Rgb) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl ExactSizeIterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn map_pixels(&self, mut f: impl FnMut(Rgb) -> Rgb) -> Self {
        let mut out = self.clone();
        for p in out.data.chunks_exact_mut(3) {
            let q = f([p[0], p[1], p[2]]);
            p.copy_from_slice(&q);
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        self.map_values(|v| v * k)
    }

    /// Per-channel arithmetic mean.
    pub fn mean_rgb(&self) -> Rgb {
        let mut acc = [0.0; 3];
        for p in self.pixels() {
            for c in 0..3 {
                acc[c] += p[c];
            }
        }
        let n = self.len().max(1) as f64;
        acc.map(|v| v / n)
    }

    pub fn ensure_same_dims(&self, other: &RasterImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_out_of_range() {
        assert!(RasterImage::from_vec(1, 1, vec![0.1, -0.2, 0.0], Encoding::Linear).is_err());
        assert!(RasterImage::from_vec(1, 1, vec![0.1, 1.2, 0.0], Encoding::Display).is_err());
        assert!(RasterImage::from_vec(1, 1, vec![0.1, f64::NAN, 0.0], Encoding::Linear).is_err());
        assert!(RasterImage::from_vec(2, 1, vec![0.1; 3], Encoding::Linear).is_err());
        assert!(RasterImage::from_vec(1, 1, vec![0.1, 7.0, 0.0], Encoding::Linear).is_ok());
    }

    #[test]
    fn pixel_indexing_is_row_major() {
        let img = RasterImage::from_fn(3, 2, Encoding::Linear, |r, c| [r as f64, c as f64, 0.0]);
        assert_eq!(img.pixel(1, 2), [1.0, 2.0, 0.0]);
        assert_eq!(img.data()[(1 * 3 + 2) * 3], 1.0);
    }
}
