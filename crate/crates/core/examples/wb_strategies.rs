//! White balancers and the two white-balance strategies: the test-time wrap
//! and training-pair preparation.
//!
//! ```bash
//! cargo run --example wb_strategies
//! ```

use std::sync::Arc;

use chromalight::color::{apply_color_matrix, rgb_adaptation, rgb_angular_error, Illuminant};
use chromalight::estimators::{estimate, Estimator};
use chromalight::io::{display_encode, to_linear};
use chromalight::pano::extract_crop;
use chromalight::strategies::{wb_test_pipeline_with, wb_train_prepare, white_balance, WhiteBalancer, WrapOptions};
use chromalight::Panorama;

pub fn run_example() -> chromalight::Result<()> {
    let neutral = Panorama::from_direction_fn(64, 32, |d| {
        let lamp = (0.7 * d[1] + 0.7 * d[2]).max(0.0).powi(16) * 8.0;
        [0.2 + 0.2 * d[2].abs() + lamp, 0.21 + 0.1 * d[0].abs() + lamp, 0.19 + 0.15 * d[1].abs() + lamp]
    })?;
    let crop_neutral = display_encode(&extract_crop(&neutral, 0.0, std::f64::consts::FRAC_PI_2, 48)?.scaled(0.5));

    let tint = rgb_adaptation(Illuminant::D65, Illuminant::A);
    let crop = display_encode(&apply_color_matrix(&to_linear(&crop_neutral), &tint));
    let gt = Panorama::new(apply_color_matrix(neutral.image(), &tint))?;

    for wb in ["identity", "gray_world", "shades_of_gray:p=6", "white_patch:pct=95"] {
        let wb: WhiteBalancer = wb.parse()?;
        let balanced = white_balance(&crop, &wb)?;
        println!("{wb:<20} balanced mean {:.3?}", balanced.mean_rgb());
    }

    let est = Estimator::TintBlind { beta: 1.0, dims: (64, 32) };
    let baseline = estimate(&est, &crop)?;
    let wrapped = wb_test_pipeline_with(&crop, &WhiteBalancer::GrayWorld, &est, &WrapOptions::default())?;
    let err = |p: &Panorama| rgb_angular_error(p.image(), gt.image());
    println!("tint-blind baseline angular error: {:.2}°", err(&baseline)?);
    println!("with the gray-world wrap:          {:.2}°", err(&wrapped.panorama)?);
    if let Some(fit) = &wrapped.fit {
        println!("fitted matrix {:.3?} (residual {:.2e})", fit.matrix.m, fit.residual_rms);
    }

    // an estimator that follows global recolorings exactly, plus the exact inverse tint
    let oracle = Estimator::EquivariantOracle {
        crop: Arc::new(crop_neutral.clone()),
        pano: Arc::new(neutral.clone()),
    };
    let exact = WhiteBalancer::Matrix(tint.inverse()?);
    let out = wb_test_pipeline_with(&crop, &exact, &oracle, &WrapOptions::default())?;
    println!("equivariant oracle + exact balancer: {:.2e}°", err(&out.panorama)?);

    let (balanced_crop, corrected_gt) = wb_train_prepare(&crop, &gt, &WhiteBalancer::GrayWorld)?;
    println!(
        "training pair: crop mean {:.3?}, target mean {:.3?}",
        balanced_crop.mean_rgb(),
        corrected_gt.weighted_mean()
    );
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
