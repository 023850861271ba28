//! Chromatic adaptation, Lab conversion and the two color metrics.
//!
//! ```bash
//! cargo run --example color_metrics
//! ```

use chromalight::color::{
    bradford_adaptation, delta_e, rgb_adaptation, rgb_angular_error, rgb_to_lab, Illuminant,
};
use chromalight::{Encoding, RasterImage};

pub fn run_example() -> chromalight::Result<()> {
    // D65 -> A moves the D65 white onto the A white
    let m = bradford_adaptation(Illuminant::D65, Illuminant::A);
    let w = m.apply(Illuminant::D65.white_xyz());
    println!("D65 white adapted to A: {w:.5?} (A white {:.5?})", Illuminant::A.white_xyz());

    let to_a = rgb_adaptation(Illuminant::D65, Illuminant::A);
    let gray = [0.5, 0.5, 0.5];
    println!("mid gray under A: {:.4?}", to_a.apply(gray));

    let lab_gray = rgb_to_lab(gray, Illuminant::D65);
    let lab_warm = rgb_to_lab(to_a.apply(gray).map(|v| v.clamp(0.0, 1.0)), Illuminant::D65);
    println!("ΔE(gray, warm gray) = {:.2}", delta_e(lab_gray, lab_warm));

    let a = RasterImage::uniform(4, 4, [1.0, 1.0, 1.0], Encoding::Linear);
    let b = RasterImage::uniform(4, 4, [1.0, 1.0, 0.0], Encoding::Linear);
    println!("angular error white vs yellow: {:.3}°", rgb_angular_error(&a, &b)?);
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
