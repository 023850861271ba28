//! End to end: generate a small synthetic dataset and compare the baseline
//! with the white-balance wrap.
//!
//! ```bash
//! cargo run --release --example synth_eval
//! ```

use chromalight::dataset::{synth_generate, MANIFEST_FILE};
use chromalight::eval::{cmd_eval, EvalConfig, Metric};
use chromalight::estimators::EstimatorSpec;
use chromalight::strategies::{StrategyId, WhiteBalancer};
use chromalight::transport::SceneConfig;

pub fn run_example() -> chromalight::Result<()> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("data");
    let manifest = synth_generate(3, 4, 11, &data)?;
    println!("{} scenes, {} settings", manifest.scenes.len(), manifest.setting_count());

    let cfg = EvalConfig {
        strategies: vec![StrategyId::Baseline, StrategyId::WbTest],
        balancer: WhiteBalancer::GrayWorld,
        estimator: EstimatorSpec::TintBlind { beta: 1.0 },
        scene: SceneConfig {
            render_size: 24,
            env_width: 64,
            env_height: 32,
            ..SceneConfig::default()
        },
        ..EvalConfig::default()
    };
    let out = cmd_eval(&data.join(MANIFEST_FILE), &cfg, &dir.path().join("eval"))?;
    for (s, stats) in &out.report.strategies {
        let a = stats[&Metric::RgbAngular];
        println!("{s:>9}: angular error median {:.2}° (q1 {:.2}, q3 {:.2}), n = {}", a.median, a.q1, a.q3, a.count);
    }
    for p in &out.report.curves {
        println!("  bin {} {:>9}: {:.2}°", p.bin, p.strategy, p.rgb_angular_deg);
    }
    Ok(())
}

fn main() -> chromalight::Result<()> {
    run_example()
}
