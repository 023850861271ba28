//! Equirectangular panoramas: direction mapping, per-pixel solid angles,
//! area-weighted resampling and perspective crop extraction.
//!
//! Convention: row 0 is the zenith (+Z), row `H-1` the nadir. Column 0
//! starts at azimuth 0 (+X) and azimuth increases toward +Y. Samples sit at
//! pixel centers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::{Encoding, RasterImage, Rgb};

/// A linear-radiance equirectangular environment map.
#[derive(Clone, Debug, PartialEq)]
pub struct Panorama {
    img: RasterImage,
}

impl Panorama {
    pub fn new(img: RasterImage) -> Result<Self> {
        if img.width() < 2 || img.height() < 1 {
            return Err(Error::InvalidInput(format!(
                "panorama must be at least 2x1, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        let img = img.with_encoding(Encoding::Linear);
        img.validate()?;
        Ok(Self { img })
    }

    pub fn uniform(width: usize, height: usize, rgb: Rgb) -> Result<Self> {
        Self::new(RasterImage::uniform(width, height, rgb, Encoding::Linear))
    }

    /// Builds a panorama from a function of the unit direction at each pixel.
    pub fn from_direction_fn(width: usize, height: usize, mut f: impl FnMut([f64; 3]) -> Rgb) -> Result<Self> {
        let img = RasterImage::from_fn(width, height, Encoding::Linear, |r, c| {
            f(direction_unchecked(r, c, width, height))
        });
        Self::new(img)
    }

    pub fn width(&self) -> usize {
        self.img.width()
    }

    pub fn height(&self) -> usize {
        self.img.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.img.dims()
    }

    pub fn image(&self) -> &RasterImage {
        &self.img
    }

    pub fn into_image(self) -> RasterImage {
        self.img
    }

    pub fn scaled(&self, k: f64) -> Panorama {
        Panorama {
            img: self.img.map_values(|v| (v * k).max(0.0)),
        }
    }

    /// Shifts content by `k` columns: output column `c` holds input column `c-k`.
    pub fn rotate_columns(&self, k: isize) -> Panorama {
        let w = self.width();
        let img = RasterImage::from_fn(w, self.height(), Encoding::Linear, |r, c| {
            let src = (c as isize - k).rem_euclid(w as isize) as usize;
            self.img.pixel(r, src)
        });
        Panorama { img }
    }

    /// Solid-angle-weighted mean radiance.
    pub fn weighted_mean(&self) -> Rgb {
        let sa = solid_angle_map(self.width(), self.height());
        let mut acc = [0.0; 3];
        for r in 0..self.height() {
            let w = sa.row_weight(r);
            for c in 0..self.width() {
                let p = self.img.pixel(r, c);
                for k in 0..3 {
                    acc[k] += w * p[k];
                }
            }
        }
        let total = sa.total();
        acc.map(|v| v / total)
    }

    /// Area-weighted resampling onto a `width`×`height` grid. Each output pixel
    /// is the solid-angle-weighted average of the source area it covers.
    pub fn resample(&self, width: usize, height: usize) -> Result<Panorama> {
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        if width < 2 || height < 1 {
            return Err(Error::InvalidInput(format!("cannot resample to {width}x{height}")));
        }
        let cols = overlap_weights(self.width(), width, |t| t);
        let rows = overlap_weights(self.height(), height, |t| -(t * PI).cos());
        let mut out = RasterImage::zeros(width, height, Encoding::Linear);
        for (r, row_w) in rows.iter().enumerate() {
            let row_total: f64 = row_w.iter().map(|x| x.1).sum();
            for (c, col_w) in cols.iter().enumerate() {
                let col_total: f64 = col_w.iter().map(|x| x.1).sum();
                let mut acc = [0.0; 3];
                for &(sr, wr) in row_w {
                    for &(sc, wc) in col_w {
                        let p = self.img.pixel(sr, sc);
                        let w = wr * wc;
                        for k in 0..3 {
                            acc[k] += w * p[k];
                        }
                    }
                }
                let norm = row_total * col_total;
                out.set_pixel(r, c, acc.map(|v| if norm > 0.0 { (v / norm).max(0.0) } else { 0.0 }));
            }
        }
        Ok(Panorama { img: out })
    }
}

/// For each destination cell, the source cells it overlaps and the overlap
/// measure under `measure` (a monotone map of the normalized coordinate).
fn overlap_weights(src: usize, dst: usize, measure: impl Fn(f64) -> f64) -> Vec<Vec<(usize, f64)>> {
    (0..dst)
        .map(|d| {
            let lo = d as f64 / dst as f64;
            let hi = (d + 1) as f64 / dst as f64;
            let first = ((lo * src as f64).floor() as usize).min(src - 1);
            let last = ((hi * src as f64).ceil() as usize).clamp(first + 1, src);
            (first..last)
                .filter_map(|s| {
                    let a = lo.max(s as f64 / src as f64);
                    let b = hi.min((s + 1) as f64 / src as f64);
                    let w = measure(b) - measure(a);
                    (b > a && w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

fn direction_unchecked(row: usize, col: usize, width: usize, height: usize) -> [f64; 3] {
    let theta = PI * (row as f64 + 0.5) / height as f64;
    let phi = 2.0 * PI * (col as f64 + 0.5) / width as f64;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Unit direction through the center of pixel (`row`, `col`).
pub fn pixel_direction(row: usize, col: usize, width: usize, height: usize) -> Result<[f64; 3]> {
    if row >= height || col >= width {
        return Err(Error::InvalidInput(format!(
            "pixel ({row}, {col}) outside a {width}x{height} panorama"
        )));
    }
    Ok(direction_unchecked(row, col, width, height))
}

/// Per-row pixel solid angles of an equirectangular grid, in steradians.
#[derive(Clone, Debug, PartialEq)]
pub struct SolidAngleMap {
    width: usize,
    rows: Vec<f64>,
}

impl SolidAngleMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn row_weight(&self, row: usize) -> f64 {
        self.rows[row]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Sum over every pixel.
    pub fn total(&self) -> f64 {
        self.rows.iter().sum::<f64>() * self.width as f64
    }
}

pub fn solid_angle_map(width: usize, height: usize) -> SolidAngleMap {
    let dphi = 2.0 * PI / width as f64;
    let dtheta = PI / height as f64;
    // mirror the lower half so the weights are exactly symmetric about the equator
    let rows = (0..height)
        .map(|r| r.min(height - 1 - r))
        .map(|r| dphi * dtheta * (PI * (r as f64 + 0.5) / height as f64).sin())
        .collect();
    SolidAngleMap { width, rows }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Pinhole crop parameters. The optical axis lies on the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropSpec {
    pub azimuth: f64,
    pub fov: f64,
    pub size: usize,
    pub interpolation: Interpolation,
}

/// Default crop field of view (radians).
pub const DEFAULT_CROP_FOV: f64 = PI / 2.0;
pub const DEFAULT_CROP_SIZE: usize = 256;
pub const DEFAULT_CROP_AZIMUTHS_DEG: [f64; 3] = [0.0, 120.0, 240.0];

impl CropSpec {
    pub fn new(azimuth: f64, fov: f64, size: usize) -> Self {
        Self {
            azimuth,
            fov,
            size,
            interpolation: Interpolation::Bilinear,
        }
    }

    /// The three 90° crops at 120° spacing.
    pub fn default_set() -> [CropSpec; 3] {
        DEFAULT_CROP_AZIMUTHS_DEG.map(|a| CropSpec::new(a.to_radians(), DEFAULT_CROP_FOV, DEFAULT_CROP_SIZE))
    }
}

pub fn extract_crop(p: &Panorama, azimuth: f64, fov: f64, size: usize) -> Result<RasterImage> {
    extract_crop_with(p, &CropSpec::new(azimuth, fov, size))
}

/// Renders a square pinhole view of the panorama. Rays are mapped back to
/// equirectangular coordinates and sampled with horizontal wraparound and
/// vertical clamping.
pub fn extract_crop_with(p: &Panorama, spec: &CropSpec) -> Result<RasterImage> {
    if !(spec.fov > 0.0 && spec.fov < PI) {
        return Err(Error::InvalidInput(format!("crop fov {} outside (0, pi)", spec.fov)));
    }
    if spec.size < 2 {
        return Err(Error::InvalidInput(format!("crop size {} < 2", spec.size)));
    }
    let (sa, ca) = spec.azimuth.sin_cos();
    let forward = [ca, sa, 0.0];
    // forward x up
    let right = [sa, -ca, 0.0];
    let half = (spec.fov / 2.0).tan();
    let n = spec.size as f64;
    let (w, h) = (p.width() as f64, p.height() as f64);

    Ok(RasterImage::from_fn(spec.size, spec.size, Encoding::Linear, |i, j| {
        let u = (2.0 * (j as f64 + 0.5) / n - 1.0) * half;
        let v = (1.0 - 2.0 * (i as f64 + 0.5) / n) * half;
        let d = [forward[0] + u * right[0], forward[1] + u * right[1], v];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let theta = (d[2] / len).clamp(-1.0, 1.0).acos();
        let phi = d[1].atan2(d[0]).rem_euclid(2.0 * PI);
        let col_f = phi / (2.0 * PI) * w - 0.5;
        let row_f = theta / PI * h - 0.5;
        match spec.interpolation {
            Interpolation::Bilinear => sample_bilinear(&p.img, row_f, col_f),
            Interpolation::Nearest => sample_nearest(&p.img, row_f, col_f),
        }
    }))
}

fn sample_bilinear(img: &RasterImage, row_f: f64, col_f: f64) -> Rgb {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r0 = row_f.floor();
    let c0 = col_f.floor();
    let fr = row_f - r0;
    let fc = col_f - c0;
    let row = |r: isize| r.clamp(0, h - 1) as usize;
    let col = |c: isize| c.rem_euclid(w) as usize;
    let (r0, c0) = (r0 as isize, c0 as isize);
    let p00 = img.pixel(row(r0), col(c0));
    let p01 = img.pixel(row(r0), col(c0 + 1));
    let p10 = img.pixel(row(r0 + 1), col(c0));
    let p11 = img.pixel(row(r0 + 1), col(c0 + 1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = p00[k] + (p01[k] - p00[k]) * fc;
        let bottom = p10[k] + (p11[k] - p10[k]) * fc;
        out[k] = (top + (bottom - top) * fr).max(0.0);
    }
    out
}

fn sample_nearest(img: &RasterImage, row_f: f64, col_f: f64) -> Rgb {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = (row_f.round() as isize).clamp(0, h - 1) as usize;
    let c = (col_f.round() as isize).rem_euclid(w) as usize;
    img.pixel(r, c)
}
