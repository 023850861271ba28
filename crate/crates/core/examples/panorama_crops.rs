//! Equirectangular geometry: solid angles, perspective crops and
//! area-weighted resampling.
//!
//! ```bash
//! cargo run --example panorama_crops -- /tmp/crops
//! ```

use std::path::PathBuf;

use chromalight::io::{tonemap_ldr, write_ldr};
use chromalight::pano::{extract_crop_with, solid_angle_map, CropSpec};
use chromalight::Panorama;

pub fn run_example() -> chromalight::Result<()> {
    for (w, h) in [(64, 32), (512, 256)] {
        let total = solid_angle_map(w, h).total();
        println!("{w}x{h}: Σ dω = {total:.8} (4π = {:.8})", 4.0 * std::f64::consts::PI);
    }

    // a sky that is blue overhead, warm toward +X, dark below the horizon
    let pano = Panorama::from_direction_fn(256, 128, |d| {
        let up = d[2].max(0.0);
        let sun = (0.9 * d[0] + 0.44 * d[2]).max(0.0).powi(32) * 40.0;
        [0.2 + 0.3 * up + sun, 0.25 + 0.4 * up + 0.9 * sun, 0.3 + 0.8 * up + 0.6 * sun]
    })?;
    println!("solid-angle mean radiance: {:.4?}", pano.weighted_mean());

    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    for (k, spec) in CropSpec::default_set().iter().enumerate() {
        let crop = extract_crop_with(&pano, &CropSpec { size: 64, ..*spec })?;
        let (ldr, exposure) = tonemap_ldr(&crop, 0.45, 2.2)?;
        println!("crop {k} at {:>3.0}°: mean {:.3?}, exposure {exposure:.3}", spec.azimuth.to_degrees(), crop.mean_rgb());
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            write_ldr(dir.join(format!("crop_{k}.png")), &ldr)?;
        }
    }

    let small = pano.resample(32, 16)?;
    println!("after resampling to 32x16: {:.4?}", small.weighted_mean());
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
