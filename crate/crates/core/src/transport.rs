//! Lambertian light transport for the evaluation scene: nine diffuse spheres
//! on a 3×3 grid resting on a ground plane, seen by an orthographic camera
//! looking straight down.
//!
//! Each transport entry is `(albedo/π)·max(0, n·ω)·V(x, ω)·dω` for the render
//! pixel's first hit `x` and the environment pixel direction `ω`. No
//! interreflections; one ray per render pixel.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pano::{pixel_direction, solid_angle_map, Panorama};
use crate::raster::{Encoding, RasterImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub sphere_radius: f64,
    /// Center-to-center distance between neighbouring spheres.
    pub grid_spacing: f64,
    /// The ground plane spans `[-plane_half_extent, plane_half_extent]²`.
    pub plane_half_extent: f64,
    pub plane_albedo: f64,
    pub sphere_albedo: f64,
    pub camera_height: f64,
    /// The orthographic footprint spans `[-footprint_half_extent, footprint_half_extent]²`.
    pub footprint_half_extent: f64,
    pub render_size: usize,
    pub env_width: usize,
    pub env_height: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            sphere_radius: 0.5,
            grid_spacing: 1.5,
            plane_half_extent: 5.0,
            plane_albedo: 0.8,
            sphere_albedo: 0.8,
            camera_height: 10.0,
            footprint_half_extent: 2.5,
            render_size: 64,
            env_width: 128,
            env_height: 64,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("scene config: {msg}")));
        let finite = [
            self.sphere_radius,
            self.grid_spacing,
            self.plane_half_extent,
            self.plane_albedo,
            self.sphere_albedo,
            self.camera_height,
            self.footprint_half_extent,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.sphere_radius <= 0.0 {
            return bad("sphere_radius must be positive");
        }
        if self.grid_spacing < 2.0 * self.sphere_radius {
            return bad("spheres overlap");
        }
        for a in [self.plane_albedo, self.sphere_albedo] {
            if !(a > 0.0 && a <= 1.0) {
                return bad("albedos must lie in (0, 1]");
            }
        }
        if self.footprint_half_extent < self.grid_spacing + self.sphere_radius {
            return bad("camera footprint does not cover all nine spheres");
        }
        if self.camera_height <= 2.0 * self.sphere_radius {
            return bad("camera must sit above the spheres");
        }
        if self.render_size == 0 || self.env_width < 2 || self.env_height == 0 {
            return bad("render and environment sizes must be positive");
        }
        Ok(())
    }

    /// Sphere centers, row-major over the grid; each rests on the plane.
    pub fn sphere_centers(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(9);
        for j in [-1.0, 0.0, 1.0] {
            for i in [-1.0, 0.0, 1.0] {
                out.push([i * self.grid_spacing, j * self.grid_spacing, self.sphere_radius]);
            }
        }
        out
    }

    /// Stable 64-bit key used to name and validate transport caches.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("scene config serializes");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }

    pub fn env_pixels(&self) -> usize {
        self.env_width * self.env_height
    }

    pub fn render_pixels(&self) -> usize {
        self.render_size * self.render_size
    }
}

/// The first surface seen through one render pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub albedo: f64,
    /// Index of the sphere that was hit, `None` for the plane.
    pub sphere: Option<usize>,
}

/// Ray-tracing view of a [`SceneConfig`].
#[derive(Clone, Debug)]
pub struct Scene {
    cfg: SceneConfig,
    spheres: Vec<[f64; 3]>,
    /// Environment columns that can carry light: every direction at or below
    /// the horizon is blocked by the ground plane.
    active: Vec<usize>,
    dirs: Vec<([f64; 3], f64)>,
}

impl Scene {
    pub fn new(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = (cfg.env_width, cfg.env_height);
        let sa = solid_angle_map(w, h);
        let mut active = Vec::new();
        let mut dirs = Vec::new();
        for row in 0..h {
            for col in 0..w {
                let d = pixel_direction(row, col, w, h)?;
                if d[2] > 0.0 {
                    active.push(row * w + col);
                    dirs.push((d, sa.row_weight(row)));
                }
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            spheres: cfg.sphere_centers(),
            active,
            dirs,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active
    }

    /// Orthographic primary ray through the center of render pixel (`row`, `col`).
    pub fn primary_hit(&self, row: usize, col: usize) -> Option<SurfaceHit> {
        let n = self.cfg.render_size as f64;
        let e = self.cfg.footprint_half_extent;
        let x = -e + 2.0 * e * (col as f64 + 0.5) / n;
        let y = e - 2.0 * e * (row as f64 + 0.5) / n;
        let r = self.cfg.sphere_radius;

        let mut best: Option<(f64, usize)> = None;
        for (i, c) in self.spheres.iter().enumerate() {
            let dx = x - c[0];
            let dy = y - c[1];
            let q = r * r - dx * dx - dy * dy;
            if q >= 0.0 {
                let z = c[2] + q.sqrt();
                if best.is_none_or(|(bz, _)| z > bz) {
                    best = Some((z, i));
                }
            }
        }
        if let Some((z, i)) = best {
            let c = self.spheres[i];
            let p = [x, y, z];
            return Some(SurfaceHit {
                point: p,
                normal: [(p[0] - c[0]) / r, (p[1] - c[1]) / r, (p[2] - c[2]) / r],
                albedo: self.cfg.sphere_albedo,
                sphere: Some(i),
            });
        }
        let p = self.cfg.plane_half_extent;
        if x.abs() <= p && y.abs() <= p {
            return Some(SurfaceHit {
                point: [x, y, 0.0],
                normal: [0.0, 0.0, 1.0],
                albedo: self.cfg.plane_albedo,
                sphere: None,
            });
        }
        None
    }

    /// True when a ray from `hit` toward `dir` escapes to the environment.
    pub fn visible(&self, hit: &SurfaceHit, dir: [f64; 3]) -> bool {
        if dir[2] <= 0.0 {
            return false;
        }
        let r2 = self.cfg.sphere_radius * self.cfg.sphere_radius;
        let o = hit.point;
        for (i, c) in self.spheres.iter().enumerate() {
            if hit.sphere == Some(i) {
                // convex: rays leaving the upper hemisphere of the normal never re-enter
                continue;
            }
            let oc = [o[0] - c[0], o[1] - c[1], o[2] - c[2]];
            let b = oc[0] * dir[0] + oc[1] * dir[1] + oc[2] * dir[2];
            let cc = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - r2;
            let disc = b * b - cc;
            if disc < 0.0 {
                continue;
            }
            let far = -b + disc.sqrt();
            if far > 1e-9 {
                return false;
            }
        }
        true
    }

    /// Transport weights of one surface point over the active columns.
    pub fn shade_into(&self, hit: &SurfaceHit, out: &mut [f64]) {
        let k = hit.albedo / PI;
        let n = hit.normal;
        for (slot, &(d, domega)) in out.iter_mut().zip(&self.dirs) {
            let cos = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
            *slot = if cos > 0.0 && self.visible(hit, d) {
                k * cos * domega
            } else {
                0.0
            };
        }
    }
}

/// Dense render-pixel × environment-pixel transport, shared by all color
/// channels. Columns below the horizon are structurally zero and are not
/// stored.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportMatrix {
    render_size: usize,
    env_width: usize,
    env_height: usize,
    active: Vec<usize>,
    /// `render_pixels × active.len()`, row-major.
    values: Vec<f64>,
}

pub fn build_transport(cfg: &SceneConfig) -> Result<TransportMatrix> {
    let scene = Scene::new(cfg)?;
    let k = scene.active.len();
    let size = cfg.render_size;
    let mut values = vec![0.0; size * size * k];
    if k > 0 {
        values.par_chunks_mut(k).enumerate().for_each(|(pix, row)| {
            if let Some(hit) = scene.primary_hit(pix / size, pix % size) {
                scene.shade_into(&hit, row);
            }
        });
    }
    Ok(TransportMatrix {
        render_size: size,
        env_width: cfg.env_width,
        env_height: cfg.env_height,
        active: scene.active,
        values,
    })
}

impl TransportMatrix {
    pub fn rows(&self) -> usize {
        self.render_size * self.render_size
    }

    /// Logical column count (every environment pixel).
    pub fn cols(&self) -> usize {
        self.env_width * self.env_height
    }

    pub fn render_size(&self) -> usize {
        self.render_size
    }

    pub fn env_dims(&self) -> (usize, usize) {
        (self.env_width, self.env_height)
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match self.active.binary_search(&col) {
            Ok(j) => self.values[row * self.active.len() + j],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        let k = self.active.len();
        self.values[row * k..(row + 1) * k].iter().sum()
    }

    /// Rounds every entry to single precision, the cache file's storage type.
    pub fn quantized(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = *v as f32 as f64);
        self
    }

    fn check_env(&self, env: &Panorama) -> Result<()> {
        if env.dims() != self.env_dims() {
            return Err(Error::DimensionMismatch {
                left: env.dims(),
                right: self.env_dims(),
            });
        }
        Ok(())
    }

    /// Renders several environments with one pass over the matrix. Each output
    /// equals what [`render`] produces for that environment alone.
    pub fn render_batch(&self, envs: &[&Panorama]) -> Result<Vec<RasterImage>> {
        for e in envs {
            self.check_env(e)?;
        }
        let m = self.rows();
        let k = self.active.len();
        let n = 3 * envs.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        // k × n: one column per (environment, channel)
        let mut rhs = vec![0.0; k * n];
        for (e_idx, env) in envs.iter().enumerate() {
            let data = env.image().data();
            for (j, &col) in self.active.iter().enumerate() {
                for ch in 0..3 {
                    rhs[j * n + 3 * e_idx + ch] = data[col * 3 + ch];
                }
            }
        }
        let mut out = vec![0.0; m * n];
        if k > 0 {
            // one fixed-size GEMM per block of rows; row results do not depend on
            // the blocking so the split only affects scheduling
            const BLOCK: usize = 256;
            out.par_chunks_mut(BLOCK * n)
                .zip(self.values.par_chunks(BLOCK * k))
                .for_each(|(out_blk, t_blk)| {
                    let rows = t_blk.len() / k;
                    unsafe {
                        // SAFETY: slices are sized rows×k, k×n and rows×n with
                        // the row-major strides passed here.
                        matrixmultiply::dgemm(
                            rows,
                            k,
                            n,
                            1.0,
                            t_blk.as_ptr(),
                            k as isize,
                            1,
                            rhs.as_ptr(),
                            n as isize,
                            1,
                            0.0,
                            out_blk.as_mut_ptr(),
                            n as isize,
                            1,
                        );
                    }
                });
        }
        let size = self.render_size;
        Ok((0..envs.len())
            .map(|e_idx| {
                let mut img = RasterImage::zeros(size, size, Encoding::Linear);
                let dst = img.data_mut();
                for p in 0..m {
                    for ch in 0..3 {
                        dst[p * 3 + ch] = out[p * n + 3 * e_idx + ch].max(0.0);
                    }
                }
                img
            })
            .collect())
    }
}

/// Per-channel product `T·L`.
pub fn render(t: &TransportMatrix, env: &Panorama) -> Result<RasterImage> {
    Ok(t.render_batch(&[env])?.pop().expect("one environment in, one render out"))
}

/// Mean absolute difference between `T·L` and `T·L*` over pixels and channels.
pub fn render_loss(t: &TransportMatrix, l: &Panorama, l_star: &Panorama) -> Result<f64> {
    let r = t.render_batch(&[l, l_star])?;
    Ok(l1_mean(&r[0], &r[1]))
}

pub(crate) fn l1_mean(a: &RasterImage, b: &RasterImage) -> f64 {
    let n = a.data().len().max(1) as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n
}

const CACHE_MAGIC: &[u8; 8] = b"CLTRANS\0";
const CACHE_VERSION: u32 = 1;
const CACHE_HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8 + 4 + 4;

/// Cache file path for a config inside `dir`.
pub fn cache_path(dir: &Path, cfg: &SceneConfig) -> PathBuf {
    dir.join(format!("transport_{:016x}.bin", cfg.hash()))
}

/// Writes the cache file: a header (magic, version, config hash, rows, cols,
/// env width, env height; little-endian) followed by the dense row-major
/// matrix as little-endian `f32`.
pub fn write_transport_cache(path: &Path, t: &TransportMatrix, cfg: &SceneConfig) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    f.write_all(CACHE_MAGIC)?;
    f.write_all(&CACHE_VERSION.to_le_bytes())?;
    f.write_all(&cfg.hash().to_le_bytes())?;
    f.write_all(&(t.rows() as u64).to_le_bytes())?;
    f.write_all(&(t.cols() as u64).to_le_bytes())?;
    f.write_all(&(t.env_width as u32).to_le_bytes())?;
    f.write_all(&(t.env_height as u32).to_le_bytes())?;
    let k = t.active.len();
    let mut row = vec![0f32; t.cols()];
    let mut bytes = Vec::with_capacity(t.cols() * 4);
    for r in 0..t.rows() {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (j, &col) in t.active.iter().enumerate() {
            row[col] = t.values[r * k + j] as f32;
        }
        bytes.clear();
        row.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        f.write_all(&bytes)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_transport_cache(path: &Path, cfg: &SceneConfig) -> Result<TransportMatrix> {
    let fail = |reason: String| Error::Cache {
        path: path.to_path_buf(),
        reason,
    };
    let scene = Scene::new(cfg)?;
    let mut f = fs::File::open(path)?;
    let mut header = [0u8; CACHE_HEADER_LEN];
    f.read_exact(&mut header).map_err(|e| fail(format!("header: {e}")))?;
    if &header[..8] != CACHE_MAGIC {
        return Err(fail("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    if u32_at(8) != CACHE_VERSION {
        return Err(fail(format!("unsupported version {}", u32_at(8))));
    }
    if u64_at(12) != cfg.hash() {
        return Err(fail("config hash mismatch".into()));
    }
    let rows = u64_at(20) as usize;
    let cols = u64_at(28) as usize;
    let (ew, eh) = (u32_at(36) as usize, u32_at(40) as usize);
    if rows != cfg.render_pixels() || cols != cfg.env_pixels() || (ew, eh) != (cfg.env_width, cfg.env_height) {
        return Err(fail("dimensions disagree with the scene config".into()));
    }
    let mut payload = Vec::with_capacity(rows * cols * 4);
    f.read_to_end(&mut payload)?;
    if payload.len() != rows * cols * 4 {
        return Err(fail(format!("payload is {} bytes, expected {}", payload.len(), rows * cols * 4)));
    }
    let k = scene.active.len();
    let mut values = vec![0.0; rows * k];
    let mut is_active = vec![false; cols];
    scene.active.iter().for_each(|&c| is_active[c] = true);
    for r in 0..rows {
        let row = &payload[r * cols * 4..(r + 1) * cols * 4];
        let mut j = 0;
        for (c, chunk) in row.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
            if is_active[c] {
                values[r * k + j] = v;
                j += 1;
            } else if v != 0.0 {
                return Err(fail(format!("non-zero entry below the horizon at ({r}, {c})")));
            }
        }
    }
    Ok(TransportMatrix {
        render_size: cfg.render_size,
        env_width: cfg.env_width,
        env_height: cfg.env_height,
        active: scene.active,
        values,
    })
}

/// Whether [`load_or_build_transport`] found a usable cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
}

/// Loads the cached matrix for `cfg` from `dir`, or builds and caches it.
/// Both paths return single-precision-rounded entries, so results do not
/// depend on whether the cache existed.
pub fn load_or_build_transport(dir: &Path, cfg: &SceneConfig) -> Result<(TransportMatrix, CacheStatus)> {
    let path = cache_path(dir, cfg);
    if path.exists() {
        match read_transport_cache(&path, cfg) {
            Ok(t) => {
                log::info!("transport cache hit: {}", path.display());
                return Ok((t, CacheStatus::Hit));
            }
            Err(e) => log::warn!("ignoring unusable transport cache: {e}"),
        }
    }
    log::info!("building transport matrix ({}x{} render, {}x{} env)", cfg.render_size, cfg.render_size, cfg.env_width, cfg.env_height);
    let t = build_transport(cfg)?.quantized();
    fs::create_dir_all(dir)?;
    write_transport_cache(&path, &t, cfg)?;
    log::info!("wrote transport cache: {}", path.display());
    Ok((t, CacheStatus::Built))
}
