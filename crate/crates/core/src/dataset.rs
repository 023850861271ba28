//! Multi-white-balance datasets: manifest schema, validation, a converter
//! for directory trees, and a synthetic generator.
//!
//! A manifest is a JSON file; every path in it is relative to the directory
//! holding the manifest.
//!
//! ```json
//! {
//!   "metadata": {
//!     "crop_fov_deg": 90.0,
//!     "crop_azimuths_deg": [0.0, 120.0, 240.0],
//!     "crop_size": 256,
//!     "tool": "chromalight",
//!     "version": "0.1.0",
//!     "seed": 7
//!   },
//!   "scenes": [{
//!     "scene_id": "scene_000",
//!     "awb_setting": "awb",
//!     "settings": [{
//!       "name": "awb",
//!       "pano": "scene_000/awb/pano.pfm",
//!       "crops": ["scene_000/awb/crop_0.png", "scene_000/awb/crop_1.png", "scene_000/awb/crop_2.png"],
//!       "exposures": [0.41, 0.52, 0.38],
//!       "tint": null
//!     }]
//!   }]
//! }
//! ```
//!
//! `exposures` (optional) are the tonemapping exposures of the crops, so the
//! ground truth for crop `k` is `exposures[k] · pano`. When absent they are
//! recomputed from the panorama with the default tonemap. `tint` (optional)
//! is the 3×3 transform a synthetic setting applied to the neutral panorama.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{apply_color_matrix, rgb_adaptation, ColorMatrix3, Illuminant};
use crate::error::{Error, ManifestError, Result, Violation};
use crate::io::{read_hdr, read_ldr, tonemap_with, write_ldr, write_pfm, TonemapParams};
use crate::pano::{extract_crop_with, pixel_direction, CropSpec, Panorama, DEFAULT_CROP_AZIMUTHS_DEG, DEFAULT_CROP_SIZE};
use crate::raster::{Encoding, RasterImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AWB_SETTING: &str = "awb";
pub const SYNTH_PANO_DIMS: (usize, usize) = (256, 128);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestMetadata {
    pub crop_fov_deg: f64,
    pub crop_azimuths_deg: Vec<f64>,
    #[serde(default = "default_crop_size")]
    pub crop_size: usize,
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_crop_size() -> usize {
    DEFAULT_CROP_SIZE
}

impl Default for ManifestMetadata {
    fn default() -> Self {
        Self {
            crop_fov_deg: 90.0,
            crop_azimuths_deg: DEFAULT_CROP_AZIMUTHS_DEG.to_vec(),
            crop_size: DEFAULT_CROP_SIZE,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
        }
    }
}

impl ManifestMetadata {
    pub fn crop_specs(&self) -> Vec<CropSpec> {
        self.crop_azimuths_deg
            .iter()
            .map(|a| CropSpec::new(a.to_radians(), self.crop_fov_deg.to_radians(), self.crop_size))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WbSetting {
    pub name: String,
    pub pano: PathBuf,
    pub crops: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposures: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tint: Option<ColorMatrix3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    pub awb_setting: String,
    pub settings: Vec<WbSetting>,
}

impl SceneEntry {
    pub fn setting(&self, name: &str) -> Option<&WbSetting> {
        self.settings.iter().find(|s| s.name == name)
    }

    pub fn awb(&self) -> Option<&WbSetting> {
        self.setting(&self.awb_setting)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub metadata: ManifestMetadata,
    pub scenes: Vec<SceneEntry>,
    /// Directory the relative paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// Schema checks that do not touch the filesystem.
    pub fn schema_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.scenes.is_empty() {
            out.push(Violation::NoScenes);
        }
        let expected = self.metadata.crop_azimuths_deg.len();
        let mut ids = HashSet::new();
        for scene in &self.scenes {
            if !ids.insert(scene.scene_id.as_str()) {
                out.push(Violation::DuplicateScene {
                    scene: scene.scene_id.clone(),
                });
            }
            let mut names = HashSet::new();
            for s in &scene.settings {
                if s.name.trim().is_empty() {
                    out.push(Violation::EmptyName {
                        scene: scene.scene_id.clone(),
                    });
                } else if !names.insert(s.name.as_str()) {
                    out.push(Violation::DuplicateSetting {
                        scene: scene.scene_id.clone(),
                        setting: s.name.clone(),
                    });
                }
                if s.crops.len() != expected {
                    out.push(Violation::CropCount {
                        scene: scene.scene_id.clone(),
                        setting: s.name.clone(),
                        found: s.crops.len(),
                        expected,
                    });
                }
            }
            if scene.awb().is_none() {
                out.push(Violation::MissingAwb {
                    scene: scene.scene_id.clone(),
                    awb: scene.awb_setting.clone(),
                });
            }
        }
        out
    }

    /// Every referenced path that does not exist.
    pub fn dangling_paths(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for scene in &self.scenes {
            for s in &scene.settings {
                for p in std::iter::once(&s.pano).chain(&s.crops) {
                    if !self.resolve(p).is_file() {
                        out.push(Violation::DanglingPath {
                            scene: scene.scene_id.clone(),
                            path: p.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = self.schema_violations();
        v.extend(self.dangling_paths());
        if v.is_empty() {
            Ok(())
        } else {
            Err(ManifestError { violations: v }.into())
        }
    }

    /// Decodes every referenced image; slower than [`validate`](Self::validate).
    pub fn verify_files(&self) -> Result<()> {
        self.scenes.par_iter().try_for_each(|scene| {
            for s in &scene.settings {
                Panorama::new(read_hdr(self.resolve(&s.pano))?)?;
                for c in &s.crops {
                    read_ldr(self.resolve(c))?;
                }
            }
            Ok(())
        })
    }

    pub fn load_pano(&self, s: &WbSetting) -> Result<Panorama> {
        Panorama::new(read_hdr(self.resolve(&s.pano))?)
    }

    pub fn load_crop(&self, s: &WbSetting, k: usize) -> Result<RasterImage> {
        let p = s
            .crops
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("setting {} has no crop {k}", s.name)))?;
        read_ldr(self.resolve(p))
    }

    pub fn setting_count(&self) -> usize {
        self.scenes.iter().map(|s| s.settings.len()).sum()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }
}

/// Reads and validates a manifest. All schema problems and missing files are
/// reported together.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut m: DatasetManifest = serde_json::from_str(&text)?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    Ok(m)
}

const LDR_EXTS: [&str; 3] = ["png", "jpg", "jpeg"];
const HDR_EXTS: [&str; 3] = ["pfm", "exr", "hdr"];

/// Builds a manifest from a directory tree laid out as
/// `<root>/<scene>/<img>_<Setting>_<cropidx>.{png,jpg}` for crops and
/// `<root>/<scene>/<img>_<Setting>.{pfm,exr}` (or `..._pano.{pfm,exr}`) for
/// panoramas. Setting names may contain underscores; crops are ordered by
/// index. The setting called `awb_name` (case-insensitive) is the AWB anchor.
pub fn manifest_from_directory(root: &Path, awb_name: &str) -> Result<DatasetManifest> {
    let mut scene_dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    scene_dirs.sort();
    let mut scenes = Vec::new();
    for dir in scene_dirs {
        let scene_id = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut panos: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut crops: BTreeMap<String, Vec<(u32, PathBuf)>> = BTreeMap::new();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        files.sort();
        for f in files {
            let (Some(stem), Some(ext)) = (f.file_stem(), f.extension()) else {
                continue;
            };
            let stem = stem.to_string_lossy();
            let ext = ext.to_string_lossy().to_ascii_lowercase();
            let rel = f.strip_prefix(root).unwrap_or(&f).to_path_buf();
            let parts: Vec<&str> = stem.split('_').collect();
            if parts.len() < 2 {
                continue;
            }
            if HDR_EXTS.contains(&ext.as_str()) {
                let end = if parts.last() == Some(&"pano") { parts.len() - 1 } else { parts.len() };
                if end < 2 {
                    continue;
                }
                panos.insert(parts[1..end].join("_"), rel);
            } else if LDR_EXTS.contains(&ext.as_str()) && parts.len() >= 3 {
                let Ok(idx) = parts[parts.len() - 1].parse::<u32>() else {
                    continue;
                };
                crops
                    .entry(parts[1..parts.len() - 1].join("_"))
                    .or_default()
                    .push((idx, rel));
            }
        }
        let mut settings = Vec::new();
        let mut awb_setting = awb_name.to_string();
        for (name, mut list) in crops {
            let Some(pano) = panos.get(&name) else {
                log::warn!("{scene_id}: setting {name} has crops but no panorama; skipped");
                continue;
            };
            list.sort();
            if name.eq_ignore_ascii_case(awb_name) {
                awb_setting = name.clone();
            }
            settings.push(WbSetting {
                name,
                pano: pano.clone(),
                crops: list.into_iter().map(|(_, p)| p).collect(),
                exposures: None,
                tint: None,
            });
        }
        if !settings.is_empty() {
            scenes.push(SceneEntry {
                scene_id,
                awb_setting,
                settings,
            });
        }
    }
    let m = DatasetManifest {
        metadata: ManifestMetadata::default(),
        scenes,
        root: root.to_path_buf(),
    };
    let v = m.schema_violations();
    if !v.is_empty() {
        return Err(ManifestError { violations: v }.into());
    }
    Ok(m)
}

/// Synthetic dataset parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_scenes: usize,
    /// Settings per scene, counting the AWB setting.
    pub settings_per_scene: usize,
    pub seed: u64,
    pub pano_dims: (usize, usize),
    pub crops: Vec<CropSpec>,
    pub tonemap: TonemapParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_scenes: 20,
            settings_per_scene: 8,
            seed: 0,
            pano_dims: SYNTH_PANO_DIMS,
            crops: CropSpec::default_set().to_vec(),
            tonemap: TonemapParams::default(),
        }
    }
}

pub fn synth_generate(n_scenes: usize, settings_per_scene: usize, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    synth_generate_with(
        &SynthConfig {
            n_scenes,
            settings_per_scene,
            seed,
            ..SynthConfig::default()
        },
        out_dir,
    )
}

/// Writes a synthetic dataset and its manifest under `out_dir`. Each scene
/// draws from its own RNG stream, so the output does not depend on thread
/// scheduling.
pub fn synth_generate_with(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.n_scenes == 0 {
        return Err(Error::InvalidInput("need at least one scene".into()));
    }
    if cfg.settings_per_scene < 2 {
        return Err(Error::InvalidInput("need the AWB setting plus at least one tint".into()));
    }
    let max_tints = Illuminant::STANDARD.len() * (Illuminant::STANDARD.len() - 1);
    if cfg.settings_per_scene - 1 > max_tints {
        return Err(Error::InvalidInput(format!("at most {max_tints} distinct tints per scene")));
    }
    if cfg.crops.is_empty() {
        return Err(Error::InvalidInput("no crop specs".into()));
    }
    fs::create_dir_all(out_dir)?;
    let scenes = (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| synth_scene(cfg, i, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let first = &cfg.crops[0];
    let m = DatasetManifest {
        metadata: ManifestMetadata {
            crop_fov_deg: first.fov.to_degrees(),
            crop_azimuths_deg: cfg.crops.iter().map(|c| c.azimuth.to_degrees()).collect(),
            crop_size: first.size,
            seed: Some(cfg.seed),
            ..ManifestMetadata::default()
        },
        scenes,
        root: out_dir.to_path_buf(),
    };
    m.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(m)
}

fn synth_scene(cfg: &SynthConfig, index: usize, out_dir: &Path) -> Result<SceneEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let scene_id = format!("scene_{index:03}");
    let neutral = neutral_panorama(&mut rng, cfg.pano_dims)?;

    let mut pairs = HashSet::new();
    let mut settings = vec![write_setting(cfg, out_dir, &scene_id, AWB_SETTING, &neutral, None)?];
    while settings.len() < cfg.settings_per_scene {
        let std = &Illuminant::STANDARD;
        let src = std[rng.gen_range(0..std.len())];
        let dst = std[rng.gen_range(0..std.len())];
        if src == dst || !pairs.insert((src, dst)) {
            continue;
        }
        let tint = rgb_adaptation(src, dst);
        let pano = Panorama::new(f32_rounded(apply_color_matrix(neutral.image(), &tint)))?;
        let name = format!("{}_to_{}", src.name(), dst.name()).to_ascii_lowercase();
        settings.push(write_setting(cfg, out_dir, &scene_id, &name, &pano, Some(tint))?);
    }
    Ok(SceneEntry {
        scene_id,
        awb_setting: AWB_SETTING.to_string(),
        settings,
    })
}

fn write_setting(
    cfg: &SynthConfig,
    out_dir: &Path,
    scene_id: &str,
    name: &str,
    pano: &Panorama,
    tint: Option<ColorMatrix3>,
) -> Result<WbSetting> {
    let rel_dir = PathBuf::from(scene_id).join(name);
    fs::create_dir_all(out_dir.join(&rel_dir))?;
    let pano_rel = rel_dir.join("pano.pfm");
    write_pfm(out_dir.join(&pano_rel), pano.image())?;
    let mut crops = Vec::new();
    let mut exposures = Vec::new();
    for (k, spec) in cfg.crops.iter().enumerate() {
        let (ldr, e) = tonemap_with(&extract_crop_with(pano, spec)?, &cfg.tonemap)?;
        let rel = rel_dir.join(format!("crop_{k}.png"));
        write_ldr(out_dir.join(&rel), &ldr)?;
        crops.push(rel);
        exposures.push(e);
    }
    Ok(WbSetting {
        name: name.to_string(),
        pano: pano_rel,
        crops,
        exposures: Some(exposures),
        tint,
    })
}

fn f32_rounded(img: RasterImage) -> RasterImage {
    img.map_values(|v| v as f32 as f64)
}

struct AreaLight {
    dir: [f64; 3],
    cos_radius: f64,
    rgb: [f64; 3],
}

/// Neutral indoor-like panorama: a vertical ambient gradient with a slight
/// per-scene color cast and colored walls whose hues average out, plus one to
/// three soft-edged disc lights.
fn neutral_panorama(rng: &mut ChaCha8Rng, dims: (usize, usize)) -> Result<Panorama> {
    let sky = rng.gen_range(0.4..1.2);
    let floor = rng.gen_range(0.1..0.4);
    let jitter: [f64; 3] = std::array::from_fn(|_| 1.0 + rng.gen_range(-0.04..0.04));
    // colored surroundings: a smooth per-channel modulation that averages to gray
    let freq = rng.gen_range(2..=5) as f64;
    let amp = rng.gen_range(0.2..0.35);
    let phase0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phases: [f64; 3] = std::array::from_fn(|c| phase0 + c as f64 * std::f64::consts::TAU / 3.0);
    let n_lights = rng.gen_range(1..=3);
    let lights: Vec<AreaLight> = (0..n_lights)
        .map(|_| {
            let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let el: f64 = rng.gen_range(10f64.to_radians()..75f64.to_radians());
            let radius: f64 = rng.gen_range(4f64.to_radians()..15f64.to_radians());
            let power = rng.gen_range(8.0..50.0);
            let tint: [f64; 3] = std::array::from_fn(|_| 1.0 + rng.gen_range(-0.05..0.05));
            AreaLight {
                dir: [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()],
                cos_radius: radius.cos(),
                rgb: tint.map(|t| t * power),
            }
        })
        .collect();
    let (w, h) = dims;
    let img = RasterImage::from_fn(w, h, Encoding::Linear, |row, col| {
        let d = pixel_direction(row, col, w, h).expect("in range");
        let t = 0.5 * (d[2] + 1.0);
        let base = floor + (sky - floor) * t;
        let sin_t = (std::f64::consts::PI * (row as f64 + 0.5) / h as f64).sin();
        let phi = d[1].atan2(d[0]);
        let mut rgb: [f64; 3] =
            std::array::from_fn(|c| jitter[c] * base * (1.0 + amp * sin_t * (freq * phi + phases[c]).sin()));
        for l in &lights {
            let c = d[0] * l.dir[0] + d[1] * l.dir[1] + d[2] * l.dir[2];
            if c > l.cos_radius {
                // smooth falloff across the outer fifth of the disc
                let edge = ((c - l.cos_radius) / (0.2 * (1.0 - l.cos_radius))).min(1.0);
                for k in 0..3 {
                    rgb[k] += l.rgb[k] * edge;
                }
            }
        }
        rgb
    });
    Panorama::new(f32_rounded(img))
}
