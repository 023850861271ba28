//! Color-specific loss and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::color::{self, chromaticity_of, delta_e, rgb_angular_error, rgb_to_lab, Illuminant};
use crate::error::{Error, Result};
use crate::io::{exposure_for, to_linear, TonemapParams};
use crate::pano::{solid_angle_map, Panorama};
use crate::raster::RasterImage;
use crate::transport::{l1_mean, TransportMatrix};

/// Metrics of one estimate against its ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean CIE76 ΔE between the exposed renders.
    pub delta_e: f64,
    /// Mean RGB angular error between the linear renders, in degrees.
    pub rgb_angular_deg: f64,
    /// Mean absolute difference of the linear renders.
    pub render_l1: f64,
    /// Solid-angle-weighted chromaticity loss between the panoramas.
    pub ang_loss: f64,
}

/// `(1/4π) Σ (1 − cos∠(L̃ᵢ, L̃*ᵢ)) dωᵢ` with `L̃` the chromaticity of each
/// pixel. Black pixels count as neutral.
pub fn angular_chroma_loss(l: &Panorama, l_star: &Panorama) -> Result<f64> {
    l.image().ensure_same_dims(l_star.image())?;
    let (w, h) = l.dims();
    let sa = solid_angle_map(w, h);
    let a = l.image().data();
    let b = l_star.image().data();
    let mut total = 0.0;
    for row in 0..h {
        let mut row_sum = 0.0;
        for col in 0..w {
            let i = (row * w + col) * 3;
            let ca = chromaticity_of([a[i], a[i + 1], a[i + 2]]);
            let cb = chromaticity_of([b[i], b[i + 1], b[i + 2]]);
            let cos = (color::dot(ca, cb) / (color::norm(ca) * color::norm(cb))).clamp(-1.0, 1.0);
            row_sum += 1.0 - cos;
        }
        total += row_sum * sa.row_weight(row);
    }
    Ok(total / (4.0 * std::f64::consts::PI))
}

/// Renders both panoramas through `t` and compares them.
pub fn evaluate_pair(t: &TransportMatrix, l: &Panorama, l_star: &Panorama) -> Result<MetricReport> {
    l.image().ensure_same_dims(l_star.image())?;
    let renders = t.render_batch(&[l, l_star])?;
    evaluate_renders(&renders[0], &renders[1], angular_chroma_loss(l, l_star)?)
}

/// Metrics from precomputed linear renders of the estimate and the ground
/// truth. Both renders share the ground-truth render's exposure before the
/// Lab conversion.
pub fn evaluate_renders(render: &RasterImage, render_gt: &RasterImage, ang_loss: f64) -> Result<MetricReport> {
    render.ensure_same_dims(render_gt)?;
    let exposure = exposure_for(render_gt, &TonemapParams::default())?;
    let lab = |p: [f64; 3]| rgb_to_lab(p.map(|v| (v * exposure).clamp(0.0, 1.0)), Illuminant::D65);
    let de_sum: f64 = render
        .pixels()
        .zip(render_gt.pixels())
        .map(|(a, b)| delta_e(lab(a), lab(b)))
        .sum();
    let report = MetricReport {
        delta_e: de_sum / render.len().max(1) as f64,
        rgb_angular_deg: rgb_angular_error(render, render_gt)?,
        render_l1: l1_mean(render, render_gt),
        ang_loss,
    };
    if ![report.delta_e, report.rgb_angular_deg, report.render_l1, report.ang_loss]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::UndefinedMetric("non-finite metric"));
    }
    Ok(report)
}

/// Mean RGB angle between a crop and the same crop under auto white
/// balance, measured on linearized values.
pub fn awb_angular_distance(img_s: &RasterImage, img_awb: &RasterImage) -> Result<f64> {
    rgb_angular_error(&to_linear(img_s), &to_linear(img_awb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Encoding;
    use crate::transport::{build_transport, SceneConfig};

    #[test]
    fn chroma_loss_examples() {
        let a = Panorama::from_direction_fn(64, 32, |d| [1.0 + d[0], 1.0, 0.5 + d[2].abs()]).unwrap();
        assert!(angular_chroma_loss(&a, &a).unwrap().abs() < 1e-12);
        let r = Panorama::uniform(256, 128, [1.0, 0.0, 0.0]).unwrap();
        let g = Panorama::uniform(256, 128, [0.0, 1.0, 0.0]).unwrap();
        assert!((angular_chroma_loss(&r, &g).unwrap() - 1.0).abs() < 1e-3);
        let b = Panorama::from_direction_fn(64, 32, |d| [0.3, 1.0 + d[1], 0.7]).unwrap();
        let l0 = angular_chroma_loss(&a, &b).unwrap();
        let l1 = angular_chroma_loss(&a.scaled(3.5), &b).unwrap();
        assert!((l0 - l1).abs() < 1e-12);
        assert_eq!(l0, angular_chroma_loss(&b, &a).unwrap());
        let small = Panorama::uniform(8, 4, [1.0; 3]).unwrap();
        assert!(angular_chroma_loss(&a, &small).is_err());
    }

    #[test]
    fn evaluate_pair_examples() {
        let cfg = SceneConfig {
            render_size: 16,
            env_width: 32,
            env_height: 16,
            ..SceneConfig::default()
        };
        let t = build_transport(&cfg).unwrap();
        let gt = Panorama::from_direction_fn(32, 16, |d| {
            let sun = (d[0] * 0.6 + d[2] * 0.8).max(0.0).powi(8) * 20.0;
            [0.4 + sun, 0.5 + sun, 0.6 + 0.5 * sun]
        })
        .unwrap();
        let same = evaluate_pair(&t, &gt, &gt).unwrap();
        assert_eq!(same.rgb_angular_deg, 0.0);
        assert!(same.delta_e.abs() < 1e-6);
        assert_eq!(same.render_l1, 0.0);
        assert!(same.ang_loss.abs() < 1e-12);

        let tint = crate::color::ColorMatrix3::diag([1.2, 1.0, 0.8]);
        let tinted = Panorama::new(crate::color::apply_color_matrix(gt.image(), &tint)).unwrap();
        let r = evaluate_pair(&t, &tinted, &gt).unwrap();
        assert!(r.rgb_angular_deg > 0.0 && r.delta_e > 0.0);

        let doubled = evaluate_pair(&t, &gt.scaled(2.0), &gt).unwrap();
        assert!(doubled.delta_e > 0.1);
        assert!(doubled.rgb_angular_deg < 1e-6);
    }

    #[test]
    fn awb_distance_examples() {
        let awb = RasterImage::uniform(8, 8, [0.3, 0.3, 0.3], Encoding::Linear);
        assert_eq!(awb_angular_distance(&awb, &awb).unwrap(), 0.0);
        let s = RasterImage::uniform(8, 8, [0.6, 0.3, 0.3], Encoding::Linear);
        let want = (4.0 / (6f64.sqrt() * 3f64.sqrt())).acos().to_degrees();
        let d = awb_angular_distance(&s, &awb).unwrap();
        assert!((d - want).abs() < 1e-9);
        assert!((want - 19.47).abs() < 1e-2);
        assert_eq!(d, awb_angular_distance(&awb, &s).unwrap());
    }
}
