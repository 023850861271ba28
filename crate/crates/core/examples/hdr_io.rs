//! PFM reading and writing, tonemapping and its inverse.
//!
//! ```bash
//! cargo run --example hdr_io
//! ```

use chromalight::io::{inverse_tonemap, median_intensity, read_pfm, tonemap_ldr, write_ldr, write_pfm, read_ldr, MedianMode};
use chromalight::{Encoding, RasterImage};

pub fn run_example() -> chromalight::Result<()> {
    let dir = tempfile::tempdir()?;
    let hdr = RasterImage::from_fn(48, 32, Encoding::Linear, |r, c| {
        let x = c as f64 / 47.0;
        let y = r as f64 / 31.0;
        [0.1 + 3.0 * x * y, 0.2 + x, 0.05 + 0.5 * y]
    });

    let path = dir.path().join("radiance.pfm");
    write_pfm(&path, &hdr)?;
    let back = read_pfm(&path)?;
    let max_err = hdr.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("PFM round trip: max |Δ| = {max_err:.2e} (f32 storage)");

    let (ldr, exposure) = tonemap_ldr(&hdr, 0.45, 2.2)?;
    let png = dir.path().join("view.png");
    write_ldr(&png, &ldr)?;
    let decoded = read_ldr(&png)?;
    let lin = inverse_tonemap(&decoded);
    println!(
        "exposure {exposure:.4}; tonemapped median {:.4}; linear median after decode {:.4}",
        median_intensity(&ldr, MedianMode::ChannelMean),
        median_intensity(&lin, MedianMode::ChannelMean)
    );
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
