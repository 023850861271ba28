//! Precomputed Lambertian transport for the nine-sphere scene and batched
//! rendering of environment maps.
//!
//! ```bash
//! cargo run --release --example transport_render
//! ```

use chromalight::io::write_ldr;
use chromalight::io::tonemap_ldr;
use chromalight::transport::{load_or_build_transport, render, render_loss, SceneConfig};
use chromalight::Panorama;

pub fn run_example() -> chromalight::Result<()> {
    let cfg = SceneConfig {
        render_size: 32,
        env_width: 64,
        env_height: 32,
        ..SceneConfig::default()
    };
    let cache = tempfile::tempdir()?;
    let (t, status) = load_or_build_transport(cache.path(), &cfg)?;
    println!("transport {}x{} ({status:?})", t.rows(), t.cols());
    let (_, again) = load_or_build_transport(cache.path(), &cfg)?;
    println!("second load: {again:?}");

    let white = Panorama::uniform(64, 32, [1.0; 3])?;
    let r = render(&t, &white)?;
    // the ground plane at the image corner sees the whole upper hemisphere
    println!("unit sky, corner pixel: {:.4?} (albedo {})", r.pixel(0, 0), cfg.plane_albedo);

    let sun = Panorama::from_direction_fn(64, 32, |d| {
        let s = (0.5 * d[0] + 0.866 * d[2]).max(0.0).powi(64) * 200.0;
        [0.3 + s, 0.3 + 0.95 * s, 0.35 + 0.8 * s]
    })?;
    let lit = render(&t, &sun)?;
    println!("render loss sun vs white sky: {:.4}", render_loss(&t, &sun, &white)?);
    let out = std::env::temp_dir().join("chromalight_sun_render.png");
    write_ldr(&out, &tonemap_ldr(&lit, 0.45, 2.2)?.0)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
