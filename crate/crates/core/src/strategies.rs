//! Color-adaptation strategies: white-balance wrapping at test time,
//! white-balanced training pairs, chromatic augmentation, and the classical
//! white balancers used in place of a learned one.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{
    apply_color_matrix, fit_color_matrix_with, rgb_adaptation, unclipped_mask, ColorFit, ColorMatrix3, FitMode,
    Illuminant,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate, parse_param, Estimator};
use crate::io::{display_encode, read_ldr, to_linear};
use crate::pano::Panorama;
use crate::process::CommandTemplate;
use crate::raster::{Encoding, RasterImage};

#[derive(Clone, Debug, PartialEq)]
pub enum WhiteBalancer {
    Identity,
    GrayWorld,
    /// Minkowski p-norm means, `p >= 1`.
    ShadesOfGray { p: f64 },
    /// Equalizes the given per-channel percentile, in `(0, 100]`.
    WhitePatch { percentile: f64 },
    /// A fixed linear transform, e.g. the exact inverse of a known tint.
    Matrix(ColorMatrix3),
    External(CommandTemplate),
}

impl WhiteBalancer {
    pub fn validate(&self) -> Result<()> {
        match self {
            WhiteBalancer::ShadesOfGray { p } if !(*p >= 1.0 && p.is_finite()) => {
                Err(Error::InvalidInput(format!("shades-of-gray p = {p} must be >= 1")))
            }
            WhiteBalancer::WhitePatch { percentile } if !(*percentile > 0.0 && *percentile <= 100.0) => Err(
                Error::InvalidInput(format!("white-patch percentile {percentile} outside (0, 100]")),
            ),
            WhiteBalancer::Matrix(m) if !m.is_finite() => Err(Error::InvalidInput("non-finite balancer matrix".into())),
            _ => Ok(()),
        }
    }
}

impl FromStr for WhiteBalancer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let wb = match head.trim() {
            "identity" | "none" => WhiteBalancer::Identity,
            "gray_world" | "grayworld" => WhiteBalancer::GrayWorld,
            "shades_of_gray" => WhiteBalancer::ShadesOfGray {
                p: if rest.is_empty() { 6.0 } else { parse_param(rest, "p")? },
            },
            "white_patch" => WhiteBalancer::WhitePatch {
                percentile: if rest.is_empty() { 95.0 } else { parse_param(rest, "pct")? },
            },
            "matrix" => {
                let v: Vec<f64> = rest
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidInput(format!("bad matrix {rest:?}")))?;
                if v.len() != 9 {
                    return Err(Error::InvalidInput("matrix balancer needs 9 row-major values".into()));
                }
                WhiteBalancer::Matrix(ColorMatrix3::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]))
            }
            "external" => WhiteBalancer::External(rest.parse()?),
            _ => return Err(Error::InvalidInput(format!("unknown white balancer {s:?}"))),
        };
        wb.validate()?;
        Ok(wb)
    }
}

impl fmt::Display for WhiteBalancer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WhiteBalancer::Identity => write!(f, "identity"),
            WhiteBalancer::GrayWorld => write!(f, "gray_world"),
            WhiteBalancer::ShadesOfGray { p } => write!(f, "shades_of_gray:p={p}"),
            WhiteBalancer::WhitePatch { percentile } => write!(f, "white_patch:pct={percentile}"),
            WhiteBalancer::Matrix(m) => {
                let v: Vec<String> = m.m.iter().flatten().map(|x| x.to_string()).collect();
                write!(f, "matrix:{}", v.join(","))
            }
            WhiteBalancer::External(c) => write!(f, "external:{c}"),
        }
    }
}

/// The color-adaptation strategies. At evaluation time `Baseline`, `AngLoss`
/// and `Augment` feed the crop straight to their estimator, while `WbTest`
/// and `WbTrain` wrap it in the white-balance pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    Baseline,
    AngLoss,
    Augment,
    WbTest,
    WbTrain,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [
        StrategyId::Baseline,
        StrategyId::AngLoss,
        StrategyId::Augment,
        StrategyId::WbTest,
        StrategyId::WbTrain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::Baseline => "baseline",
            StrategyId::AngLoss => "angloss",
            StrategyId::Augment => "augment",
            StrategyId::WbTest => "wbtest",
            StrategyId::WbTrain => "wbtrain",
        }
    }

    pub fn wraps_white_balance(self) -> bool {
        matches!(self, StrategyId::WbTest | StrategyId::WbTrain)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy {s:?}")))
    }
}

/// Balances a linear image. Display-encoded inputs are linearized first.
/// The output is linear and non-negative.
pub fn white_balance(img: &RasterImage, wb: &WhiteBalancer) -> Result<RasterImage> {
    wb.validate()?;
    let lin = to_linear(img);
    let stats = match wb {
        WhiteBalancer::Identity => return Ok(lin),
        WhiteBalancer::Matrix(m) => return Ok(apply_color_matrix(&lin, m)),
        WhiteBalancer::External(cmd) => {
            let out = cmd.run_and_read(&display_encode(&lin), "png", |p| read_ldr(p))?;
            if out.dims() != lin.dims() {
                return Err(Error::External {
                    message: format!("balancer returned {:?} for a {:?} input", out.dims(), lin.dims()),
                    stderr: String::new(),
                });
            }
            return Ok(to_linear(&out));
        }
        WhiteBalancer::GrayWorld => lin.mean_rgb(),
        WhiteBalancer::ShadesOfGray { p } => {
            let n = lin.len().max(1) as f64;
            let mut acc = [0.0; 3];
            for px in lin.pixels() {
                for c in 0..3 {
                    acc[c] += px[c].powf(*p);
                }
            }
            acc.map(|v| (v / n).powf(1.0 / p))
        }
        WhiteBalancer::WhitePatch { percentile } => {
            let mut out = [0.0; 3];
            for (c, slot) in out.iter_mut().enumerate() {
                let mut ch: Vec<f64> = lin.pixels().map(|p| p[c]).collect();
                *slot = nearest_rank(&mut ch, *percentile);
            }
            out
        }
    };
    if stats.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateInput(format!(
            "cannot balance: channel statistics {stats:?} contain a zero"
        )));
    }
    if stats[0] == stats[1] && stats[1] == stats[2] {
        return Ok(lin);
    }
    let target = (stats[0] + stats[1] + stats[2]) / 3.0;
    let gains = stats.map(|s| target / s);
    Ok(apply_color_matrix(&lin, &ColorMatrix3::diag(gains)))
}

fn nearest_rank(vals: &mut [f64], pct: f64) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * vals.len() as f64).ceil() as usize;
    vals[rank.clamp(1, vals.len()) - 1]
}

/// Encodes a balanced linear image the way `like` is encoded.
fn encode_like(balanced: RasterImage, like: &RasterImage) -> RasterImage {
    match like.encoding() {
        Encoding::Display => display_encode(&balanced),
        Encoding::Linear => balanced,
    }
}

/// Options for the white-balance wrap.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WrapOptions {
    pub fit_mode: FitMode,
}

/// Everything the wrap produced for one crop.
#[derive(Clone, Debug)]
pub struct WrapOutcome {
    pub panorama: Panorama,
    /// Fit of balanced → original input; `None` when the wrap fell back.
    pub fit: Option<ColorFit>,
    /// True when a degenerate crop forced the unwrapped estimate.
    pub fallback: bool,
}

/// Test-time wrap: balance the crop, estimate from the balanced crop, and
/// carry the estimate back to the input's colors with the least-squares
/// matrix fitted from the balanced crop to the original (linear, unclipped
/// pixels).
pub fn wb_test_pipeline(img: &RasterImage, wb: &WhiteBalancer, est: &Estimator) -> Result<Panorama> {
    wb_test_pipeline_with(img, wb, est, &WrapOptions::default()).map(|o| o.panorama)
}

pub fn wb_test_pipeline_with(
    img: &RasterImage,
    wb: &WhiteBalancer,
    est: &Estimator,
    opts: &WrapOptions,
) -> Result<WrapOutcome> {
    let lin = to_linear(img);
    let balanced = match white_balance(&lin, wb) {
        Ok(b) => b,
        Err(Error::DegenerateInput(msg)) => {
            log::warn!("white balance failed ({msg}); using the unwrapped estimate");
            return fallback(img, est);
        }
        Err(e) => return Err(e),
    };
    let mask = fit_mask(img);
    let fit = match fit_color_matrix_with(&balanced, &lin, mask.as_deref(), opts.fit_mode) {
        Ok(f) => f,
        Err(Error::DegenerateFit { rank }) => {
            log::warn!("color fit is rank {rank}; using the unwrapped estimate");
            return fallback(img, est);
        }
        Err(e) => return Err(e),
    };
    log::debug!("wrap fit {:?}, residual {:.3e}", fit.matrix.m, fit.residual_rms);
    let balanced_input = if balanced == lin {
        img.clone()
    } else {
        encode_like(balanced, img)
    };
    let estimate_balanced = estimate(est, &balanced_input)?;
    let panorama = if fit.matrix == ColorMatrix3::IDENTITY {
        estimate_balanced
    } else {
        Panorama::new(apply_color_matrix(estimate_balanced.image(), &fit.matrix))?
    };
    Ok(WrapOutcome {
        panorama,
        fit: Some(fit),
        fallback: false,
    })
}

fn fallback(img: &RasterImage, est: &Estimator) -> Result<WrapOutcome> {
    Ok(WrapOutcome {
        panorama: estimate(est, img)?,
        fit: None,
        fallback: true,
    })
}

fn fit_mask(img: &RasterImage) -> Option<Vec<bool>> {
    (img.encoding() == Encoding::Display).then(|| unclipped_mask(img))
}

/// A white-balanced training pair.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub input: RasterImage,
    pub target: Panorama,
    /// The balanced → original transform `T`; the target is `T⁻¹·L*`.
    pub transform: ColorMatrix3,
}

/// Training-data preparation: balance the crop, fit `T` with `T·I′ ≈ I`,
/// and correct the target panorama with `T⁻¹`.
pub fn wb_train_prepare(img: &RasterImage, l_star: &Panorama, wb: &WhiteBalancer) -> Result<(RasterImage, Panorama)> {
    wb_train_prepare_with(img, l_star, wb, &WrapOptions::default()).map(|p| (p.input, p.target))
}

pub fn wb_train_prepare_with(
    img: &RasterImage,
    l_star: &Panorama,
    wb: &WhiteBalancer,
    opts: &WrapOptions,
) -> Result<TrainPair> {
    let lin = to_linear(img);
    let balanced = white_balance(&lin, wb)?;
    let mask = fit_mask(img);
    let fit = fit_color_matrix_with(&balanced, &lin, mask.as_deref(), opts.fit_mode)?;
    let inv = fit.matrix.inverse()?;
    let target = if inv == ColorMatrix3::IDENTITY {
        l_star.clone()
    } else {
        Panorama::new(apply_color_matrix(l_star.image(), &inv))?
    };
    let input = if balanced == lin {
        img.clone()
    } else {
        encode_like(balanced, img)
    };
    Ok(TrainPair {
        input,
        target,
        transform: fit.matrix,
    })
}

/// Draws one of the twelve augmentation options uniformly from `seed`.
pub fn draw_illuminant(seed: u64) -> Illuminant {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Illuminant::ALL[rng.gen_range(0..Illuminant::ALL.len())]
}

/// Illuminant assumed for the augmentation source.
pub const AUGMENT_SOURCE: Illuminant = Illuminant::D65;

/// Chromatic augmentation: adapts the panorama from D65 to a uniformly drawn
/// standard illuminant (or leaves it unchanged).
pub fn augment_illuminant(l_star: &Panorama, seed: u64) -> Result<(Panorama, Illuminant)> {
    let ill = draw_illuminant(seed);
    Ok((adapt_panorama(l_star, AUGMENT_SOURCE, ill)?, ill))
}

pub fn adapt_panorama(p: &Panorama, src: Illuminant, dst: Illuminant) -> Result<Panorama> {
    if dst == Illuminant::None {
        return Ok(p.clone());
    }
    let m = rgb_adaptation(src, dst);
    Panorama::new(apply_color_matrix(p.image(), &m))
}
