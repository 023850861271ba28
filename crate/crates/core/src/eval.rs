//! Evaluation harness: runs strategies over a dataset, renders every estimate
//! and ground truth through the transport matrix, and aggregates the metrics
//! into box statistics and AWB-distance curves.
//!
//! `records.csv` has one row per (scene, setting, crop, strategy) with the
//! header
//!
//! ```text
//! scene_id,setting_name,crop_index,strategy,delta_e,rgb_angular_deg,render_l1,ang_loss,awb_distance_deg,fit_residual,fallback
//! ```
//!
//! `fit_residual` is empty for strategies that do not fit a color matrix.
//! Rows are sorted by key, so repeated runs produce identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::DELTA_E_VARIANT;
use crate::dataset::{load_manifest, synth_generate, DatasetManifest, SceneEntry, WbSetting};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Estimator, EstimatorSpec};
use crate::io::{exposure_for, TonemapParams};
use crate::metrics::{angular_chroma_loss, awb_angular_distance, evaluate_renders};
use crate::pano::{extract_crop_with, Panorama};
use crate::raster::RasterImage;
use crate::strategies::{wb_test_pipeline_with, StrategyId, WhiteBalancer, WrapOptions};
use crate::transport::{load_or_build_transport, CacheStatus, SceneConfig, TransportMatrix};

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene_id: String,
    pub setting_name: String,
    pub crop_index: usize,
    pub strategy: StrategyId,
    pub delta_e: f64,
    pub rgb_angular_deg: f64,
    pub render_l1: f64,
    pub ang_loss: f64,
    pub awb_distance_deg: f64,
    pub fit_residual: Option<f64>,
    pub fallback: bool,
}

impl EvalRecord {
    fn key(&self) -> (&str, &str, usize, StrategyId) {
        (&self.scene_id, &self.setting_name, self.crop_index, self.strategy)
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::DeltaE => self.delta_e,
            Metric::RgbAngular => self.rgb_angular_deg,
            Metric::RenderL1 => self.render_l1,
            Metric::AngLoss => self.ang_loss,
        }
    }
}

/// A record that could not be produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub scene_id: String,
    pub setting_name: String,
    pub crop_index: usize,
    pub strategy: StrategyId,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DeltaE,
    RgbAngular,
    RenderL1,
    AngLoss,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::DeltaE, Metric::RgbAngular, Metric::RenderL1, Metric::AngLoss];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DeltaE => "delta_e",
            Metric::RgbAngular => "rgb_angular_deg",
            Metric::RenderL1 => "render_l1",
            Metric::AngLoss => "ang_loss",
        }
    }
}

/// Box-plot statistics. Quartiles interpolate linearly between order
/// statistics; whiskers are the most extreme samples within 1.5·IQR of the
/// quartiles, never inside the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub mean: f64,
    pub count: usize,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    // interpolated quartiles can lie beyond every sample inside the fence;
    // the whisker then stops at the quartile
    let whisker_lo = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).map_or(q1, |x| x.min(q1));
    let whisker_hi = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).map_or(q3, |x| x.max(q3));
    Some(BoxStats {
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        mean: v.iter().sum::<f64>() / v.len() as f64,
        count: v.len(),
    })
}

/// Fixed-width AWB-distance bins starting at 0°; the last bin is open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBins {
    pub width_deg: f64,
    pub count: usize,
}

impl Default for CurveBins {
    fn default() -> Self {
        Self {
            width_deg: 5.0,
            count: 8,
        }
    }
}

impl CurveBins {
    pub fn index(&self, distance_deg: f64) -> usize {
        let i = (distance_deg.max(0.0) / self.width_deg).floor() as usize;
        i.min(self.count - 1)
    }

    /// Lower and upper edge; the last upper edge is infinite.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let lo = i as f64 * self.width_deg;
        let hi = if i + 1 == self.count {
            f64::INFINITY
        } else {
            lo + self.width_deg
        };
        (lo, hi)
    }
}

/// Mean metrics of one strategy within one distance bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bin: usize,
    pub bin_lo_deg: f64,
    /// `None` for the open last bin.
    pub bin_hi_deg: Option<f64>,
    pub strategy: StrategyId,
    pub count: usize,
    pub delta_e: f64,
    pub rgb_angular_deg: f64,
    pub render_l1: f64,
    pub ang_loss: f64,
}

impl CurvePoint {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::DeltaE => self.delta_e,
            Metric::RgbAngular => self.rgb_angular_deg,
            Metric::RenderL1 => self.render_l1,
            Metric::AngLoss => self.ang_loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Box statistics per strategy and metric.
    pub strategies: BTreeMap<StrategyId, BTreeMap<Metric, BoxStats>>,
    pub curves: Vec<CurvePoint>,
    pub bins: CurveBins,
    pub record_count: usize,
    pub failure_count: usize,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl AggregateReport {
    pub fn curve(&self, s: StrategyId) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|c| c.strategy == s).collect()
    }

    pub fn curve_point(&self, s: StrategyId, bin: usize) -> Option<&CurvePoint> {
        self.curves.iter().find(|c| c.strategy == s && c.bin == bin)
    }
}

/// Builds the aggregate from records; empty bins are omitted from the curves.
pub fn aggregate(records: &[EvalRecord], bins: CurveBins, failure_count: usize) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if bins.count == 0 || !(bins.width_deg > 0.0) {
        return Err(Error::InvalidInput(format!("bad curve bins {bins:?}")));
    }
    let mut by_strategy: BTreeMap<StrategyId, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_strategy.entry(r.strategy).or_default().push(r);
    }
    let mut strategies = BTreeMap::new();
    let mut curves = Vec::new();
    for (s, recs) in &by_strategy {
        let stats = Metric::ALL
            .iter()
            .map(|&m| {
                let v: Vec<f64> = recs.iter().map(|r| r.metric(m)).collect();
                (m, box_stats(&v).expect("non-empty group"))
            })
            .collect();
        strategies.insert(*s, stats);

        let mut binned: Vec<Vec<&EvalRecord>> = vec![Vec::new(); bins.count];
        for r in recs {
            binned[bins.index(r.awb_distance_deg)].push(r);
        }
        for (i, group) in binned.iter().enumerate().filter(|(_, g)| !g.is_empty()) {
            let mean = |m: Metric| group.iter().map(|r| r.metric(m)).sum::<f64>() / group.len() as f64;
            let (lo, hi) = bins.edges(i);
            curves.push(CurvePoint {
                bin: i,
                bin_lo_deg: lo,
                bin_hi_deg: hi.is_finite().then_some(hi),
                strategy: *s,
                count: group.len(),
                delta_e: mean(Metric::DeltaE),
                rgb_angular_deg: mean(Metric::RgbAngular),
                render_l1: mean(Metric::RenderL1),
                ang_loss: mean(Metric::AngLoss),
            });
        }
    }
    Ok(AggregateReport {
        strategies,
        curves,
        bins,
        record_count: records.len(),
        failure_count,
        metadata: BTreeMap::new(),
    })
}

/// Least-squares slope of `metric` against AWB distance for one strategy.
pub fn trend_slope(records: &[EvalRecord], s: StrategyId, metric: Metric) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.strategy == s)
        .map(|r| (r.awb_distance_deg, r.metric(metric)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub strategies: Vec<StrategyId>,
    pub balancer: WhiteBalancer,
    pub estimator: EstimatorSpec,
    pub scene: SceneConfig,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Transport cache directory; defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub bins: CurveBins,
    pub wrap: WrapOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            strategies: vec![StrategyId::Baseline, StrategyId::WbTest],
            balancer: WhiteBalancer::GrayWorld,
            estimator: EstimatorSpec::TintBlind { beta: 1.0 },
            scene: SceneConfig::default(),
            seed: 0,
            jobs: None,
            cache_dir: None,
            bins: CurveBins::default(),
            wrap: WrapOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<EvalFailure>,
    pub report: AggregateReport,
}

/// Runs the evaluation on a loaded manifest, without writing anything.
pub fn run_eval(manifest: &DatasetManifest, t: &TransportMatrix, cfg: &EvalConfig) -> Result<EvalOutput> {
    if cfg.strategies.is_empty() {
        return Err(Error::InvalidInput("no strategies selected".into()));
    }
    cfg.balancer.validate()?;
    let (env_w, env_h) = t.env_dims();
    if (env_w, env_h) != (cfg.scene.env_width, cfg.scene.env_height) {
        return Err(Error::DimensionMismatch {
            left: (env_w, env_h),
            right: (cfg.scene.env_width, cfg.scene.env_height),
        });
    }
    let work = || -> Result<Vec<(Vec<EvalRecord>, Vec<EvalFailure>)>> {
        manifest
            .scenes
            .par_iter()
            .map(|scene| eval_scene(manifest, scene, t, cfg))
            .collect()
    };
    let per_scene = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_scene {
        records.extend(r);
        failures.extend(f);
    }
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    for f in &failures {
        log::warn!(
            "{}/{}/{} {}: {}",
            f.scene_id,
            f.setting_name,
            f.crop_index,
            f.strategy,
            f.message
        );
    }
    let mut report = aggregate(&records, cfg.bins, failures.len())?;
    report.metadata = eval_metadata(cfg);
    Ok(EvalOutput {
        records,
        failures,
        report,
    })
}

fn eval_metadata(cfg: &EvalConfig) -> BTreeMap<String, serde_json::Value> {
    use serde_json::json;
    let mut m = BTreeMap::new();
    m.insert("tool".into(), json!(env!("CARGO_PKG_NAME")));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("delta_e_variant".into(), json!(DELTA_E_VARIANT));
    m.insert("per_image_aggregation".into(), json!("mean over render pixels"));
    m.insert("fit_pixels".into(), json!("masked: pixels with every channel below 0.99"));
    m.insert("fit_mode".into(), json!(format!("{:?}", cfg.wrap.fit_mode).to_ascii_lowercase()));
    m.insert("estimator".into(), json!(cfg.estimator.to_string()));
    m.insert("balancer".into(), json!(cfg.balancer.to_string()));
    m.insert(
        "strategies".into(),
        json!(cfg.strategies.iter().map(|s| s.name()).collect::<Vec<_>>()),
    );
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("scene_config".into(), json!(cfg.scene));
    m.insert(
        "nondeterministic_external".into(),
        json!(matches!(cfg.estimator, EstimatorSpec::External(_)) || matches!(cfg.balancer, WhiteBalancer::External(_))),
    );
    m
}

/// Ground truth for crop `k`: the setting's panorama at the crop's exposure,
/// resampled to the evaluation resolution.
pub fn ground_truth(
    manifest: &DatasetManifest,
    setting: &WbSetting,
    pano: &Panorama,
    k: usize,
    env_dims: (usize, usize),
) -> Result<Panorama> {
    let exposure = match setting.exposures.as_ref().and_then(|e| e.get(k)) {
        Some(&e) => e,
        None => {
            let specs = manifest.metadata.crop_specs();
            let spec = specs
                .get(k)
                .ok_or_else(|| Error::InvalidInput(format!("no crop spec for index {k}")))?;
            exposure_for(&extract_crop_with(pano, spec)?, &TonemapParams::default())?
        }
    };
    let resized = if pano.dims() == env_dims {
        pano.clone()
    } else {
        pano.resample(env_dims.0, env_dims.1)?
    };
    Ok(resized.scaled(exposure))
}

fn bind_estimator(
    spec: &EstimatorSpec,
    gt: &Panorama,
    awb_crop: &RasterImage,
    awb_gt: &Panorama,
    dims: (usize, usize),
) -> Estimator {
    match spec {
        EstimatorSpec::Oracle => Estimator::Oracle(Arc::new(gt.clone())),
        EstimatorSpec::EquivariantOracle => Estimator::EquivariantOracle {
            crop: Arc::new(awb_crop.clone()),
            pano: Arc::new(awb_gt.clone()),
        },
        EstimatorSpec::Ambient => Estimator::ConstantAmbient { dims },
        EstimatorSpec::TintBlind { beta } => Estimator::TintBlind { beta: *beta, dims },
        EstimatorSpec::External(c) => Estimator::External(c.clone()),
    }
}

struct Estimated {
    strategy: StrategyId,
    pano: Panorama,
    residual: Option<f64>,
    fallback: bool,
}

fn run_strategy(
    s: StrategyId,
    crop: &RasterImage,
    est: &Estimator,
    cfg: &EvalConfig,
    dims: (usize, usize),
) -> Result<Estimated> {
    let (pano, residual, fallback) = if s.wraps_white_balance() {
        let out = wb_test_pipeline_with(crop, &cfg.balancer, est, &cfg.wrap)?;
        if let Some(f) = &out.fit {
            log::debug!("{s}: fit {:?} residual {:.3e}", f.matrix.m, f.residual_rms);
        }
        let residual = out.fit.as_ref().map(|f| f.residual_rms);
        (out.panorama, residual, out.fallback)
    } else {
        (estimate(est, crop)?, None, false)
    };
    let pano = if pano.dims() == dims {
        pano
    } else {
        pano.resample(dims.0, dims.1)?
    };
    Ok(Estimated {
        strategy: s,
        pano,
        residual,
        fallback,
    })
}

struct CropJob<'a> {
    setting: &'a WbSetting,
    k: usize,
    gt: Panorama,
    awb_distance: f64,
    estimates: Vec<Estimated>,
}

fn eval_scene(
    manifest: &DatasetManifest,
    scene: &SceneEntry,
    t: &TransportMatrix,
    cfg: &EvalConfig,
) -> Result<(Vec<EvalRecord>, Vec<EvalFailure>)> {
    let dims = t.env_dims();
    let awb = scene
        .awb()
        .ok_or_else(|| Error::InvalidInput(format!("scene {} has no AWB setting", scene.scene_id)))?;
    let awb_pano = manifest.load_pano(awb)?;
    let n_crops = awb.crops.len();
    let awb_crops = (0..n_crops).map(|k| manifest.load_crop(awb, k)).collect::<Result<Vec<_>>>()?;
    let awb_gts = (0..n_crops)
        .map(|k| ground_truth(manifest, awb, &awb_pano, k, dims))
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut jobs = Vec::new();
    for setting in &scene.settings {
        let pano = manifest.load_pano(setting)?;
        for k in 0..setting.crops.len() {
            let crop = manifest.load_crop(setting, k)?;
            let gt = ground_truth(manifest, setting, &pano, k, dims)?;
            let awb_distance = if setting.name == awb.name {
                0.0
            } else {
                awb_angular_distance(&crop, &awb_crops[k])?
            };
            let est = bind_estimator(&cfg.estimator, &gt, &awb_crops[k], &awb_gts[k], dims);
            let mut estimates = Vec::new();
            for &s in &cfg.strategies {
                match run_strategy(s, &crop, &est, cfg, dims) {
                    Ok(e) => estimates.push(e),
                    Err(e) => failures.push(EvalFailure {
                        scene_id: scene.scene_id.clone(),
                        setting_name: setting.name.clone(),
                        crop_index: k,
                        strategy: s,
                        message: e.to_string(),
                    }),
                }
            }
            jobs.push(CropJob {
                setting,
                k,
                gt,
                awb_distance,
                estimates,
            });
        }
    }

    // one batched render per scene
    let mut envs: Vec<&Panorama> = Vec::new();
    for j in &jobs {
        envs.push(&j.gt);
        envs.extend(j.estimates.iter().map(|e| &e.pano));
    }
    let renders = t.render_batch(&envs)?;

    let mut records = Vec::new();
    let mut idx = 0;
    for j in &jobs {
        let render_gt = &renders[idx];
        idx += 1;
        for e in &j.estimates {
            let render = &renders[idx];
            idx += 1;
            let result = angular_chroma_loss(&e.pano, &j.gt).and_then(|ang| evaluate_renders(render, render_gt, ang));
            match result {
                Ok(m) => records.push(EvalRecord {
                    scene_id: scene.scene_id.clone(),
                    setting_name: j.setting.name.clone(),
                    crop_index: j.k,
                    strategy: e.strategy,
                    delta_e: m.delta_e,
                    rgb_angular_deg: m.rgb_angular_deg,
                    render_l1: m.render_l1,
                    ang_loss: m.ang_loss,
                    awb_distance_deg: j.awb_distance,
                    fit_residual: e.residual,
                    fallback: e.fallback,
                }),
                Err(err) => failures.push(EvalFailure {
                    scene_id: scene.scene_id.clone(),
                    setting_name: j.setting.name.clone(),
                    crop_index: j.k,
                    strategy: e.strategy,
                    message: err.to_string(),
                }),
            }
        }
    }
    Ok((records, failures))
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let records = rdr.deserialize().collect::<std::result::Result<Vec<EvalRecord>, _>>()?;
    Ok(records)
}

pub fn write_curves(path: &Path, report: &AggregateReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in &report.curves {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(out_dir: &Path, report: &AggregateReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(out_dir.join(AGGREGATE_FILE), json)?;
    write_curves(&out_dir.join(CURVES_FILE), report)
}

/// Loads the manifest and transport, evaluates, and writes `records.csv`,
/// `aggregate.json` and `curves.csv` into `out_dir`.
pub fn cmd_eval(manifest_path: &Path, cfg: &EvalConfig, out_dir: &Path) -> Result<EvalOutput> {
    let start = Instant::now();
    let manifest = load_manifest(manifest_path)?;
    fs::create_dir_all(out_dir)?;
    let cache = cfg.cache_dir.clone().unwrap_or_else(|| out_dir.join("cache"));
    let (t, _) = load_or_build_transport(&cache, &cfg.scene)?;
    let out = run_eval(&manifest, &t, cfg)?;
    write_records(&out_dir.join(RECORDS_FILE), &out.records)?;
    write_report(out_dir, &out.report)?;
    log::info!(
        "evaluated {} records ({} failures) in {:.1}s",
        out.records.len(),
        out.failures.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(out)
}

pub fn cmd_synth(n_scenes: usize, settings_per_scene: usize, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    let m = synth_generate(n_scenes, settings_per_scene, seed, out_dir)?;
    log::info!("wrote {} scenes, {} settings to {}", m.scenes.len(), m.setting_count(), out_dir.display());
    Ok(m)
}

pub fn cmd_transport(cfg: &SceneConfig, out_dir: &Path) -> Result<(TransportMatrix, CacheStatus)> {
    let (t, status) = load_or_build_transport(out_dir, cfg)?;
    log::info!("transport {:?}: {}x{} active entries", status, t.rows(), t.cols());
    Ok((t, status))
}

/// Re-aggregates an existing records file.
pub fn cmd_report(records_path: &Path, bins: CurveBins, out_dir: &Path) -> Result<AggregateReport> {
    let records = read_records(records_path)?;
    let mut report = aggregate(&records, bins, 0)?;
    report
        .metadata
        .insert("source".into(), serde_json::json!(records_path.display().to_string()));
    fs::create_dir_all(out_dir)?;
    write_report(out_dir, &report)?;
    Ok(report)
}

pub fn load_scene_config(path: &Path) -> Result<SceneConfig> {
    let cfg: SceneConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}
