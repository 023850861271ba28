//! Lighting estimators: analytic stand-ins for testing and the external
//! process adapter for real models.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::color::{apply_color_matrix, chromaticity_of, fit_color_matrix_with, unclipped_mask, FitMode};
use crate::error::{Error, Result};
use crate::io::{display_encode, read_hdr, to_linear, DEFAULT_GAMMA};
use crate::pano::Panorama;
use crate::process::CommandTemplate;
use crate::raster::{Encoding, RasterImage};
use crate::strategies::{white_balance, WhiteBalancer};

/// Output resolution of the built-in estimators.
pub const DEFAULT_ESTIMATE_DIMS: (usize, usize) = (128, 64);

#[derive(Clone, Debug)]
pub enum Estimator {
    /// Returns a fixed panorama regardless of the input.
    Oracle(Arc<Panorama>),
    /// Knows one neutral crop/panorama pair and follows any global linear
    /// recoloring of the crop: fits `M` with `M·crop_ref ≈ input` and returns
    /// `M·pano_ref`.
    EquivariantOracle {
        crop: Arc<RasterImage>,
        pano: Arc<Panorama>,
    },
    /// Uniform panorama at the crop's mean color.
    ConstantAmbient { dims: (usize, usize) },
    /// Ambient estimate whose color error grows with the input tint.
    TintBlind { beta: f64, dims: (usize, usize) },
    External(CommandTemplate),
}

impl Estimator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Estimator::TintBlind { beta, .. } if !(*beta >= 0.0 && beta.is_finite()) => {
                Err(Error::InvalidInput(format!("tint-blind beta {beta} must be >= 0")))
            }
            Estimator::ConstantAmbient { dims } | Estimator::TintBlind { dims, .. } if dims.0 < 2 || dims.1 < 1 => {
                Err(Error::InvalidInput(format!("estimator resolution {dims:?} too small")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Estimator::External(_))
    }
}

/// Runs the estimator on one crop.
pub fn estimate(e: &Estimator, img: &RasterImage) -> Result<Panorama> {
    e.validate()?;
    match e {
        Estimator::Oracle(p) => Ok((**p).clone()),
        Estimator::EquivariantOracle { crop, pano } => {
            let mask: Vec<bool> = unclipped_mask(crop)
                .into_iter()
                .zip(unclipped_mask(img))
                .map(|(a, b)| a && b)
                .collect();
            let mask = match (crop.encoding(), img.encoding()) {
                (Encoding::Linear, Encoding::Linear) => None,
                _ => Some(mask.as_slice()),
            };
            let fit = fit_color_matrix_with(&to_linear(crop), &to_linear(img), mask, FitMode::Full)?;
            Panorama::new(apply_color_matrix(pano.image(), &fit.matrix))
        }
        Estimator::ConstantAmbient { dims } => constant_ambient(img, *dims),
        Estimator::TintBlind { beta, dims } => tint_blind_estimate_with(img, *beta, *dims),
        Estimator::External(cmd) => cmd.run_and_read(img, "pfm", |p| Panorama::new(read_hdr(p)?)),
    }
}

/// Uniform panorama at the inverse tonemap of the crop's mean.
pub fn constant_ambient(img: &RasterImage, dims: (usize, usize)) -> Result<Panorama> {
    let mean = img.mean_rgb();
    let rgb = match img.encoding() {
        Encoding::Display => mean.map(|v| v.max(0.0).powf(DEFAULT_GAMMA)),
        Encoding::Linear => mean,
    };
    Panorama::uniform(dims.0, dims.1, rgb)
}

pub fn tint_blind_estimate(img: &RasterImage, beta: f64) -> Result<Panorama> {
    tint_blind_estimate_with(img, beta, DEFAULT_ESTIMATE_DIMS)
}

/// Ambient estimate from the gray-world-balanced crop, re-tinted per channel
/// by `(c̄ₖ / (1/3))^(1+β)` where `c̄` is the chromaticity of the crop's mean
/// linear color. `β = 0` reproduces the input tint, `β > 0` exaggerates it.
pub fn tint_blind_estimate_with(img: &RasterImage, beta: f64, dims: (usize, usize)) -> Result<Panorama> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!("tint-blind beta {beta} must be >= 0")));
    }
    let lin = to_linear(img);
    let cbar = chromaticity_of(lin.mean_rgb());
    let balanced = match white_balance(&lin, &WhiteBalancer::GrayWorld) {
        Ok(b) => b,
        Err(Error::DegenerateInput(_)) => lin.clone(),
        Err(e) => return Err(e),
    };
    let neutral_src = if balanced == lin {
        img.clone()
    } else if img.encoding() == Encoding::Display {
        display_encode(&balanced)
    } else {
        balanced
    };
    let neutral = constant_ambient(&neutral_src, dims)?;
    let third = 1.0 / 3.0;
    let gain = cbar.map(|c| (c / third).powf(1.0 + beta));
    Ok(neutral.map_channels(gain))
}

impl Panorama {
    fn map_channels(&self, gain: [f64; 3]) -> Panorama {
        if gain == [1.0; 3] {
            return self.clone();
        }
        let img = self.image().map_pixels(|p| [p[0] * gain[0], p[1] * gain[1], p[2] * gain[2]]);
        Panorama::new(img).expect("non-negative gains keep the panorama valid")
    }
}

/// Estimator choice as given on the command line, before per-record data
/// (ground truth, reference pair) is bound.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorSpec {
    Oracle,
    EquivariantOracle,
    Ambient,
    TintBlind { beta: f64 },
    External(CommandTemplate),
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head.trim() {
            "oracle" => Ok(EstimatorSpec::Oracle),
            "equivariant" | "equivariant_oracle" => Ok(EstimatorSpec::EquivariantOracle),
            "ambient" | "constant_ambient" => Ok(EstimatorSpec::Ambient),
            "tintblind" | "tint_blind" => {
                let beta = if rest.is_empty() {
                    1.0
                } else {
                    parse_param(rest, "beta")?
                };
                if !(beta >= 0.0) {
                    return Err(Error::InvalidInput(format!("beta {beta} must be >= 0")));
                }
                Ok(EstimatorSpec::TintBlind { beta })
            }
            "external" => Ok(EstimatorSpec::External(rest.parse()?)),
            _ => Err(Error::InvalidInput(format!("unknown estimator {s:?}"))),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Oracle => write!(f, "oracle"),
            EstimatorSpec::EquivariantOracle => write!(f, "equivariant"),
            EstimatorSpec::Ambient => write!(f, "ambient"),
            EstimatorSpec::TintBlind { beta } => write!(f, "tintblind:beta={beta}"),
            EstimatorSpec::External(c) => write!(f, "external:{c}"),
        }
    }
}

/// Parses `name=value` (or a bare value) as a float.
pub(crate) fn parse_param(s: &str, name: &str) -> Result<f64> {
    let v = match s.split_once('=') {
        Some((k, v)) if k.trim() == name => v,
        Some((k, _)) => return Err(Error::InvalidInput(format!("unknown parameter {k:?}, expected {name}"))),
        None => s,
    };
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad value {v:?} for {name}")))
}
