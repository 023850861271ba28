//! The angular chromaticity loss and chromatic augmentation.
//!
//! ```bash
//! cargo run --example chroma_loss
//! ```

use chromalight::metrics::angular_chroma_loss;
use chromalight::strategies::augment_illuminant;
use chromalight::Panorama;

pub fn run_example() -> chromalight::Result<()> {
    let gt = Panorama::from_direction_fn(64, 32, |d| {
        let window = (d[1].max(0.0) * d[2].max(0.0)).powi(2) * 20.0;
        [0.3 + window, 0.32 + window, 0.35 + 1.1 * window]
    })?;

    println!("loss(L*, L*)      = {:.3e}", angular_chroma_loss(&gt, &gt)?);
    println!("loss(3·L*, L*)    = {:.3e}", angular_chroma_loss(&gt.scaled(3.0), &gt)?);

    for seed in 0..6 {
        let (aug, ill) = augment_illuminant(&gt, seed)?;
        println!("seed {seed}: {:<4} loss {:.5}", ill.name(), angular_chroma_loss(&aug, &gt)?);
    }

    let red = Panorama::uniform(64, 32, [1.0, 0.0, 0.0])?;
    let green = Panorama::uniform(64, 32, [0.0, 1.0, 0.0])?;
    println!("loss(red, green)  = {:.4}", angular_chroma_loss(&red, &green)?);
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
