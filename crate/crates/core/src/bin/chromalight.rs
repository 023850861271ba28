use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chromalight::eval::{cmd_eval, cmd_report, cmd_synth, cmd_transport, load_scene_config, CurveBins, EvalConfig};
use chromalight::strategies::{StrategyId, WhiteBalancer};
use chromalight::transport::SceneConfig;
use chromalight::estimators::EstimatorSpec;

#[derive(Parser)]
#[command(name = "chromalight", version, about = "Color-adaptation evaluation for HDR lighting estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic multi-white-balance dataset.
    Synth {
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        /// Settings per scene, including AWB.
        #[arg(long, default_value_t = 8)]
        settings: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build (or reuse) the cached transport matrix.
    Transport {
        #[arg(long)]
        scene_cfg: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate strategies on a dataset.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "baseline,wbtest")]
        strategies: Vec<StrategyId>,
        #[arg(long, default_value = "gray_world")]
        balancer: WhiteBalancer,
        #[arg(long, default_value = "tintblind:beta=1")]
        estimator: EstimatorSpec,
        #[arg(long)]
        scene_cfg: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Transport cache directory (default: <out>/cache).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-aggregate an existing records.csv.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        #[arg(long, default_value_t = 8)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn scene_config(path: Option<PathBuf>) -> chromalight::Result<SceneConfig> {
    path.map_or_else(|| Ok(SceneConfig::default()), |p| load_scene_config(&p))
}

fn run(cli: Cli) -> chromalight::Result<()> {
    match cli.cmd {
        Cmd::Synth {
            scenes,
            settings,
            seed,
            jobs,
            out,
        } => {
            if jobs > 0 {
                rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
            }
            cmd_synth(scenes, settings, seed, &out)?;
            println!("{}", out.join(chromalight::dataset::MANIFEST_FILE).display());
        }
        Cmd::Transport { scene_cfg, out } => {
            let (t, status) = cmd_transport(&scene_config(scene_cfg)?, &out)?;
            println!("{status:?}: {} x {}", t.rows(), t.cols());
        }
        Cmd::Eval {
            manifest,
            strategies,
            balancer,
            estimator,
            scene_cfg,
            seed,
            jobs,
            cache_dir,
            out,
        } => {
            let cfg = EvalConfig {
                strategies,
                balancer,
                estimator,
                scene: scene_config(scene_cfg)?,
                seed,
                jobs: (jobs > 0).then_some(jobs),
                cache_dir,
                ..EvalConfig::default()
            };
            let res = cmd_eval(&manifest, &cfg, &out)?;
            for (s, stats) in &res.report.strategies {
                let a = &stats[&chromalight::eval::Metric::RgbAngular];
                let d = &stats[&chromalight::eval::Metric::DeltaE];
                println!("{s:>9}  n={:<5} angular median {:.3}°  ΔE median {:.3}", a.count, a.median, d.median);
            }
            if res.report.failure_count > 0 {
                println!("{} records failed", res.report.failure_count);
            }
        }
        Cmd::Report {
            records,
            bin_width,
            bins,
            out,
        } => {
            let rep = cmd_report(
                &records,
                CurveBins {
                    width_deg: bin_width,
                    count: bins,
                },
                &out,
            )?;
            println!("{} records aggregated", rep.record_count);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let chromalight::Error::External { stderr, .. } = &e {
                if !stderr.is_empty() {
                    eprintln!("--- stderr ---\n{stderr}");
                }
            }
            ExitCode::FAILURE
        }
    }
}
