//! Color math: chromaticity, CIELAB and ΔE, standard illuminants, Bradford
//! chromatic adaptation, and least-squares 3×3 color-matrix fitting.
//!
//! All linear RGB data is taken to use sRGB/BT.709 primaries with a D65
//! white. ΔE is CIE76.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;
use std::sync::LazyLock;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Encoding, RasterImage, Rgb};

/// Name recorded in output metadata for the ΔE formula in use.
pub const DELTA_E_VARIANT: &str = "CIE76";

/// Pixel vectors with a norm below this are treated as black.
pub const ZERO_NORM: f64 = 1e-12;

/// LDR channel value at or above which a pixel is treated as clipped.
pub const CLIP_THRESHOLD: f64 = 0.99;

const NEUTRAL: Rgb = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

/// Row-major 3×3 linear color transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorMatrix3 {
    pub m: [[f64; 3]; 3],
}

impl ColorMatrix3 {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub const fn diag(d: [f64; 3]) -> Self {
        Self {
            m: [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]],
        }
    }

    pub fn apply(&self, v: Rgb) -> Rgb {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Adjugate inverse; fails when `|det| <= 1e-12`.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::Singular { det });
        }
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Ok(Self {
            m: adj.map(|row| row.map(|v| v / det)),
        })
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..3).all(|r| (0..3).all(|c| r == c || self.m[r][c] == 0.0))
    }
}

impl Mul for ColorMatrix3 {
    type Output = ColorMatrix3;

    fn mul(self, rhs: ColorMatrix3) -> ColorMatrix3 {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[r][k] * rhs.m[k][c]).sum();
            }
        }
        ColorMatrix3 { m: out }
    }
}

impl Default for ColorMatrix3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// CIE standard illuminants (2° observer) used for augmentation and tints.
///
/// `None` is the augmentation "no change" option; it carries the assumed
/// source white (D65) so that adapting to or from it is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Illuminant {
    None,
    A,
    B,
    C,
    D50,
    D55,
    D65,
    D75,
    E,
    F2,
    F7,
    F11,
}

impl Illuminant {
    /// The twelve augmentation options, in draw order.
    pub const ALL: [Illuminant; 12] = [
        Illuminant::None,
        Illuminant::A,
        Illuminant::B,
        Illuminant::C,
        Illuminant::D50,
        Illuminant::D55,
        Illuminant::D65,
        Illuminant::D75,
        Illuminant::E,
        Illuminant::F2,
        Illuminant::F7,
        Illuminant::F11,
    ];

    /// The eleven real illuminants.
    pub const STANDARD: [Illuminant; 11] = [
        Illuminant::A,
        Illuminant::B,
        Illuminant::C,
        Illuminant::D50,
        Illuminant::D55,
        Illuminant::D65,
        Illuminant::D75,
        Illuminant::E,
        Illuminant::F2,
        Illuminant::F7,
        Illuminant::F11,
    ];

    pub fn white_xy(self) -> (f64, f64) {
        match self {
            Illuminant::None | Illuminant::D65 => (0.31271, 0.32902),
            Illuminant::A => (0.44757, 0.40745),
            Illuminant::B => (0.34842, 0.35161),
            Illuminant::C => (0.31006, 0.31616),
            Illuminant::D50 => (0.34567, 0.35850),
            Illuminant::D55 => (0.33242, 0.34743),
            Illuminant::D75 => (0.29902, 0.31485),
            Illuminant::E => (1.0 / 3.0, 1.0 / 3.0),
            Illuminant::F2 => (0.37208, 0.37529),
            Illuminant::F7 => (0.31292, 0.32933),
            Illuminant::F11 => (0.38052, 0.37713),
        }
    }

    /// White point in XYZ with Y = 1.
    pub fn white_xyz(self) -> [f64; 3] {
        xy_to_xyz(self.white_xy())
    }

    pub fn name(self) -> &'static str {
        match self {
            Illuminant::None => "none",
            Illuminant::A => "A",
            Illuminant::B => "B",
            Illuminant::C => "C",
            Illuminant::D50 => "D50",
            Illuminant::D55 => "D55",
            Illuminant::D65 => "D65",
            Illuminant::D75 => "D75",
            Illuminant::E => "E",
            Illuminant::F2 => "F2",
            Illuminant::F7 => "F7",
            Illuminant::F11 => "F11",
        }
    }
}

impl fmt::Display for Illuminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Illuminant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Illuminant::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown illuminant {s:?}")))
    }
}

fn xy_to_xyz((x, y): (f64, f64)) -> [f64; 3] {
    [x / y, 1.0, (1.0 - x - y) / y]
}

/// Linear sRGB (D65) to XYZ, derived from the primaries and the D65 entry of
/// the illuminant table so that RGB white maps exactly onto that white.
pub static RGB_TO_XYZ: LazyLock<ColorMatrix3> = LazyLock::new(|| {
    let prim = [(0.64, 0.33), (0.30, 0.60), (0.15, 0.06)].map(xy_to_xyz);
    let p = ColorMatrix3::from_rows([
        [prim[0][0], prim[1][0], prim[2][0]],
        [prim[0][1], prim[1][1], prim[2][1]],
        [prim[0][2], prim[1][2], prim[2][2]],
    ]);
    let s = p
        .inverse()
        .expect("sRGB primaries are independent")
        .apply(Illuminant::D65.white_xyz());
    p * ColorMatrix3::diag(s)
});

pub static XYZ_TO_RGB: LazyLock<ColorMatrix3> =
    LazyLock::new(|| RGB_TO_XYZ.inverse().expect("RGB_TO_XYZ is invertible"));

const BRADFORD: ColorMatrix3 = ColorMatrix3::from_rows([
    [0.8951, 0.2664, -0.1614],
    [-0.7502, 1.7135, 0.0367],
    [0.0389, -0.0685, 1.0296],
]);

static BRADFORD_INV: LazyLock<ColorMatrix3> =
    LazyLock::new(|| BRADFORD.inverse().expect("Bradford matrix is invertible"));

/// XYZ-space Bradford transform taking `src`'s white onto `dst`'s white.
pub fn bradford_adaptation(src: Illuminant, dst: Illuminant) -> ColorMatrix3 {
    let ws = src.white_xyz();
    let wd = dst.white_xyz();
    if ws == wd {
        return ColorMatrix3::IDENTITY;
    }
    let cs = BRADFORD.apply(ws);
    let cd = BRADFORD.apply(wd);
    *BRADFORD_INV * ColorMatrix3::diag([cd[0] / cs[0], cd[1] / cs[1], cd[2] / cs[2]]) * BRADFORD
}

/// The same adaptation expressed on linear sRGB values.
pub fn rgb_adaptation(src: Illuminant, dst: Illuminant) -> ColorMatrix3 {
    if src.white_xyz() == dst.white_xyz() {
        return ColorMatrix3::IDENTITY;
    }
    *XYZ_TO_RGB * bradford_adaptation(src, dst) * *RGB_TO_XYZ
}

/// RGB divided by its component sum. Black maps to the neutral triple.
pub fn chromaticity(rgb: Rgb) -> Result<Rgb> {
    if rgb.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "chromaticity of {rgb:?}: components must be non-negative"
        )));
    }
    Ok(chromaticity_of(rgb))
}

pub(crate) fn chromaticity_of(rgb: Rgb) -> Rgb {
    if rgb[0] == rgb[1] && rgb[1] == rgb[2] {
        return NEUTRAL;
    }
    let sum = rgb[0] + rgb[1] + rgb[2];
    if sum <= 0.0 {
        return NEUTRAL;
    }
    rgb.map(|v| v / sum)
}

/// Angle between two RGB vectors in degrees, or `None` when either is black.
pub fn pixel_angle_deg(a: Rgb, b: Rgb) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na < ZERO_NORM || nb < ZERO_NORM {
        return None;
    }
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    Some(norm(cross).atan2(dot(a, b)).to_degrees())
}

/// Mean per-pixel RGB angular error in degrees, skipping black pixels.
pub fn rgb_angular_error(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        if let Some(deg) = pixel_angle_deg(pa, pb) {
            sum += deg;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "RGB angular error: every pixel pair contains a black pixel",
        ));
    }
    Ok(sum / n as f64)
}

pub(crate) fn dot(a: Rgb, b: Rgb) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Rgb) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

pub fn rgb_to_xyz(rgb: Rgb) -> [f64; 3] {
    RGB_TO_XYZ.apply(rgb)
}

pub fn xyz_to_lab(xyz: [f64; 3], white: Illuminant) -> LabColor {
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let f = |t: f64| {
        if t > EPS {
            t.cbrt()
        } else {
            (KAPPA * t + 16.0) / 116.0
        }
    };
    let w = white.white_xyz();
    let fx = f(xyz[0] / w[0]);
    let fy = f(xyz[1] / w[1]);
    let fz = f(xyz[2] / w[2]);
    LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// Linear sRGB → CIELAB relative to `white`.
pub fn rgb_to_lab(rgb: Rgb, white: Illuminant) -> LabColor {
    xyz_to_lab(rgb_to_xyz(rgb), white)
}

/// CIE76 color difference.
pub fn delta_e(a: LabColor, b: LabColor) -> f64 {
    let dl = a.l - b.l;
    let da = a.a - b.a;
    let db = a.b - b.b;
    (dl * dl + da * da + db * db).sqrt()
}

/// Result of a least-squares color-matrix fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorFit {
    pub matrix: ColorMatrix3,
    /// RMS of `M·src − dst` over valid pixels and channels.
    pub residual_rms: f64,
    pub pixels_used: usize,
}

/// Restricts the fitted matrix family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Full,
    /// Per-channel gains only.
    Diagonal,
}

/// Pixels where every channel is below [`CLIP_THRESHOLD`].
pub fn unclipped_mask(img: &RasterImage) -> Vec<bool> {
    img.pixels()
        .map(|p| p.iter().all(|&v| v < CLIP_THRESHOLD))
        .collect()
}

/// Least-squares `M` with `M·src ≈ dst`. Without a mask, display-encoded
/// inputs exclude clipped pixels and linear inputs use every pixel.
pub fn fit_color_matrix(src: &RasterImage, dst: &RasterImage, mask: Option<&[bool]>) -> Result<ColorMatrix3> {
    fit_color_matrix_with(src, dst, mask, FitMode::Full).map(|f| f.matrix)
}

pub fn fit_color_matrix_with(
    src: &RasterImage,
    dst: &RasterImage,
    mask: Option<&[bool]>,
    mode: FitMode,
) -> Result<ColorFit> {
    src.ensure_same_dims(dst)?;
    let default_mask;
    let mask = match mask {
        Some(m) => {
            if m.len() != src.len() {
                return Err(Error::InvalidInput(format!(
                    "mask has {} entries for {} pixels",
                    m.len(),
                    src.len()
                )));
            }
            Some(m)
        }
        None if src.encoding() == Encoding::Display || dst.encoding() == Encoding::Display => {
            let (ms, md) = (unclipped_mask(src), unclipped_mask(dst));
            default_mask = ms.iter().zip(&md).map(|(a, b)| *a && *b).collect::<Vec<_>>();
            Some(default_mask.as_slice())
        }
        None => None,
    };
    let valid = |i: usize| mask.is_none_or(|m| m[i]);

    let mut gram = [[0.0f64; 3]; 3];
    let mut cross = [[0.0f64; 3]; 3];
    let mut used = 0usize;
    let mut identical = true;
    for (i, (s, d)) in src.pixels().zip(dst.pixels()).enumerate() {
        if !valid(i) {
            continue;
        }
        used += 1;
        identical &= s == d;
        for r in 0..3 {
            for c in 0..3 {
                gram[r][c] += s[r] * s[c];
                cross[r][c] += d[r] * s[c];
            }
        }
    }

    let g = Matrix3::from_fn(|r, c| gram[r][c]);
    let rank = numerical_rank(&g);
    if rank < 3 {
        return Err(Error::DegenerateFit { rank });
    }

    let matrix = if identical {
        // exact solution; skip the solve so the identity carries no rounding
        ColorMatrix3::IDENTITY
    } else {
        match mode {
            FitMode::Full => {
                let chol = g.cholesky().ok_or(Error::DegenerateFit { rank: 2 })?;
                // G is symmetric, so Mᵀ = G⁻¹·Bᵀ
                let bt = Matrix3::from_fn(|r, c| cross[c][r]);
                let mt = chol.solve(&bt);
                ColorMatrix3::from_rows([
                    [mt[(0, 0)], mt[(1, 0)], mt[(2, 0)]],
                    [mt[(0, 1)], mt[(1, 1)], mt[(2, 1)]],
                    [mt[(0, 2)], mt[(1, 2)], mt[(2, 2)]],
                ])
            }
            FitMode::Diagonal => ColorMatrix3::diag([0, 1, 2].map(|c| cross[c][c] / gram[c][c])),
        }
    };
    if !matrix.is_finite() {
        return Err(Error::DegenerateFit { rank });
    }

    let mut sq = 0.0;
    for (i, (s, d)) in src.pixels().zip(dst.pixels()).enumerate() {
        if valid(i) {
            let p = matrix.apply(s);
            sq += (0..3).map(|c| (p[c] - d[c]).powi(2)).sum::<f64>();
        }
    }
    Ok(ColorFit {
        matrix,
        residual_rms: (sq / (3 * used) as f64).sqrt(),
        pixels_used: used,
    })
}

fn numerical_rank(g: &Matrix3<f64>) -> usize {
    let eig = SymmetricEigen::new(*g);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max > 0.0) {
        return 0;
    }
    eig.eigenvalues.iter().filter(|v| v.abs() > max * 1e-10).count()
}

/// Per-pixel product with negatives clamped to zero.
pub fn apply_color_matrix(img: &RasterImage, m: &ColorMatrix3) -> RasterImage {
    img.map_pixels(|p| m.apply(p).map(|v| v.max(0.0)))
}
