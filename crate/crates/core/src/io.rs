//! HDR/LDR raster files and the exposure/gamma tonemapping conventions.
//!
//! PFM files are written as `PF`, little-endian (scale `-1.0`), rows stored
//! bottom to top. Reading a file this module wrote and writing it back
//! reproduces the bytes exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ColorType, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PfmError, Result};
use crate::raster::{Encoding, RasterImage};

pub const DEFAULT_TARGET_MEDIAN: f64 = 0.45;
pub const DEFAULT_GAMMA: f64 = 2.2;

pub fn encode_pfm(img: &RasterImage) -> Result<Vec<u8>> {
    if img.encoding() != Encoding::Linear {
        return Err(Error::InvalidInput(
            "PFM holds linear radiance; refusing to write a display-encoded image".into(),
        ));
    }
    let (w, h) = img.dims();
    let mut out = format!("PF\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 12);
    let data = img.data();
    for row in (0..h).rev() {
        for v in &data[row * w * 3..(row + 1) * w * 3] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<String, PfmError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PfmError::MalformedHeader(format!("missing {what}")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token("magic")?;
    match magic.as_str() {
        "PF" => {}
        "Pf" => return Err(PfmError::UnsupportedVariant(magic).into()),
        _ => return Err(PfmError::MalformedHeader(format!("bad magic {magic:?}")).into()),
    }
    let dim = |s: String, what: &str| -> Result<usize, PfmError> {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| PfmError::MalformedHeader(format!("bad {what} {s:?}")))
    };
    let width = dim(token("width")?, "width")?;
    let height = dim(token("height")?, "height")?;
    let scale_tok = token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite() && *v != 0.0)
        .ok_or_else(|| PfmError::MalformedHeader(format!("bad scale {scale_tok:?}")))?;
    if scale > 0.0 {
        return Err(PfmError::UnsupportedEndianness(scale_tok).into());
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PfmError::MalformedHeader("no separator after scale".into()).into());
    }
    pos += 1;

    let payload = &bytes[pos..];
    let expected = width * height * 12;
    if payload.len() < expected {
        return Err(PfmError::Truncated {
            expected,
            found: payload.len(),
        }
        .into());
    }
    let mut data = vec![0.0f64; width * height * 3];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let file_row = i / (width * 3);
        let row = height - 1 - file_row;
        data[row * width * 3 + i % (width * 3)] = v as f64;
    }
    RasterImage::from_vec(width, height, data, Encoding::Linear)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<RasterImage> {
    decode_pfm(&fs::read(path)?)
}

pub fn write_pfm(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    let bytes = encode_pfm(img)?;
    let mut f = BufWriter::new(fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

/// Reads an HDR panorama: PFM always, EXR when built with the `exr` feature.
pub fn read_hdr(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("exr") => read_exr(path),
        _ => read_pfm(path),
    }
}

#[cfg(feature = "exr")]
fn read_exr(path: &Path) -> Result<RasterImage> {
    let img = image::open(path)?.into_rgb32f();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| (v as f64).max(0.0)).collect();
    RasterImage::from_vec(w as usize, h as usize, data, Encoding::Linear)
}

#[cfg(not(feature = "exr"))]
fn read_exr(path: &Path) -> Result<RasterImage> {
    Err(Error::InvalidInput(format!(
        "{}: EXR support requires the `exr` feature; convert to PFM",
        path.display()
    )))
}

/// Reads an 8-bit PNG (or JPEG) as display-encoded values `v / 255`.
pub fn read_ldr(path: impl AsRef<Path>) -> Result<RasterImage> {
    let img = image::open(path)?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => return Err(Error::UnsupportedBitDepth(format!("{other:?}"))),
    }
    let rgb = img.into_rgb8();
    Ok(ldr_from_rgb8(&rgb))
}

pub(crate) fn ldr_from_rgb8(rgb: &RgbImage) -> RasterImage {
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    RasterImage::from_vec(w as usize, h as usize, data, Encoding::Display).expect("bytes map into [0, 1]")
}

/// Quantizes to the 1/255 grid.
pub fn quantize_rgb8(img: &RasterImage) -> RgbImage {
    let bytes = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes).expect("buffer sized from dims")
}

/// Writes an 8-bit RGB PNG. Values are clamped to `[0, 1]` and rounded.
pub fn write_ldr(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    quantize_rgb8(img).save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// How "median intensity" is measured when choosing an exposure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianMode {
    /// Mean of the three channels.
    #[default]
    ChannelMean,
    /// Rec. 709 luminance.
    Luminance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TonemapParams {
    pub target_median: f64,
    pub gamma: f64,
    pub median_mode: MedianMode,
}

impl Default for TonemapParams {
    fn default() -> Self {
        Self {
            target_median: DEFAULT_TARGET_MEDIAN,
            gamma: DEFAULT_GAMMA,
            median_mode: MedianMode::ChannelMean,
        }
    }
}

pub fn median_intensity(img: &RasterImage, mode: MedianMode) -> f64 {
    let mut vals: Vec<f64> = img
        .pixels()
        .map(|p| match mode {
            MedianMode::ChannelMean => (p[0] + p[1] + p[2]) / 3.0,
            MedianMode::Luminance => 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2],
        })
        .collect();
    median(&mut vals)
}

pub(crate) fn median(vals: &mut [f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Re-exposes so the median intensity hits `target_median`, clips to 1 and
/// applies the `1/gamma` power. Returns the exposure so it can be reused on
/// the matching panorama.
pub fn tonemap_ldr(hdr: &RasterImage, target_median: f64, gamma: f64) -> Result<(RasterImage, f64)> {
    tonemap_with(
        hdr,
        &TonemapParams {
            target_median,
            gamma,
            median_mode: MedianMode::ChannelMean,
        },
    )
}

pub fn tonemap_with(hdr: &RasterImage, params: &TonemapParams) -> Result<(RasterImage, f64)> {
    let exposure = exposure_for(hdr, params)?;
    Ok((apply_exposure(hdr, exposure, params.gamma), exposure))
}

pub fn exposure_for(hdr: &RasterImage, params: &TonemapParams) -> Result<f64> {
    let med = median_intensity(hdr, params.median_mode);
    if !(med > 0.0) {
        return Err(Error::ZeroMedian);
    }
    Ok(params.target_median / med)
}

/// `clip(exposure * hdr, 0, 1)^(1/gamma)`.
pub fn apply_exposure(hdr: &RasterImage, exposure: f64, gamma: f64) -> RasterImage {
    let inv = 1.0 / gamma;
    hdr.map_values(|v| (v * exposure).clamp(0.0, 1.0).powf(inv))
        .with_encoding(Encoding::Display)
}

/// Display encoding with unit exposure.
pub fn display_encode(linear: &RasterImage) -> RasterImage {
    apply_exposure(linear, 1.0, DEFAULT_GAMMA)
}

/// Per-channel `x^2.2`.
pub fn inverse_tonemap(ldr: &RasterImage) -> RasterImage {
    inverse_tonemap_with(ldr, DEFAULT_GAMMA)
}

pub fn inverse_tonemap_with(ldr: &RasterImage, gamma: f64) -> RasterImage {
    ldr.map_values(|v| v.max(0.0).powf(gamma)).with_encoding(Encoding::Linear)
}

/// Linear view of an image: decodes display-encoded data, passes linear
/// data through.
pub fn to_linear(img: &RasterImage) -> RasterImage {
    match img.encoding() {
        Encoding::Linear => img.clone(),
        Encoding::Display => inverse_tonemap(img),
    }
}
