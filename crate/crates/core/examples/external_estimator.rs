//! Attaching an external lighting estimator through the process protocol:
//! the tool writes `input.png`, runs the command, and reads back a PFM
//! panorama. Here a shell one-liner stands in for a real model.
//!
//! ```bash
//! cargo run --example external_estimator
//! ```

use chromalight::estimators::{estimate, Estimator, EstimatorSpec};
use chromalight::io::write_pfm;
use chromalight::process::CommandTemplate;
use chromalight::{Encoding, Panorama, RasterImage};

pub fn run_example() -> chromalight::Result<()> {
    let dir = tempfile::tempdir()?;
    // PFM stores f32, so keep the reference exactly representable
    let fixed = Panorama::from_direction_fn(32, 16, |d| [(1.0 + d[2]) as f32 as f64, 0.75, 0.5])?;
    let fixed_path = dir.path().join("answer.pfm");
    write_pfm(&fixed_path, fixed.image())?;

    let cmd = format!("sh -c 'test -s \"$1\" && cp {} \"$2\"' stub {{input}} {{output}}", fixed_path.display());
    let template: CommandTemplate = cmd.parse()?;
    let crop = RasterImage::uniform(16, 16, [0.5, 0.4, 0.3], Encoding::Display);
    let got = estimate(&Estimator::External(template), &crop)?;
    println!("stub estimate identical to the stored panorama: {}", got == fixed);

    // the same thing as a command-line estimator spec
    let spec: EstimatorSpec = format!("external:{cmd}").parse()?;
    println!("spec: {spec}");

    let failing: CommandTemplate = "sh -c 'echo model crashed >&2; exit 2' {input} {output}".parse()?;
    match estimate(&Estimator::External(failing), &crop) {
        Err(chromalight::Error::External { message, stderr }) => {
            println!("failure reported: {message}; stderr: {}", stderr.trim())
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
