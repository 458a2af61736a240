//! Batch generation of rooms with ground-truth maps and a manifest.

use crate::gt::{render_gt, GTFrame};
use crate::io::{write_pfm, write_png, Image, IoError};
use crate::rng::RandomStream;
use crate::scene::{sample_room, RoomParams, Scene, SceneError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Pfm,
    Png,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Pfm => "pfm",
            Format::Png => "png",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub scenes: usize,
    pub cams: usize,
    pub res: usize,
    pub format: Format,
    pub room: RoomParams,
}

impl DatasetConfig {
    pub fn new(seed: u64, scenes: usize, cams: usize, res: usize, format: Format) -> Self {
        DatasetConfig { seed, scenes, cams, res, format, room: RoomParams::default() }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("scene {index}: {source}")]
    Scene { index: usize, source: SceneError },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Fs(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub scene: usize,
    pub scene_seed: u64,
    /// Absent for the scene description itself.
    pub camera: Option<usize>,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub scenes: usize,
    pub cams: usize,
    pub res: usize,
    pub format: Format,
    pub files: Vec<FileEntry>,
}

/// Seed of scene `index`, independent of every other scene.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    RandomStream::at(seed, vec!["scene".into(), index.to_string()]).next_u64()
}

/// Samples scene `index` of a dataset.
pub fn dataset_scene(cfg: &DatasetConfig, index: usize) -> Result<Scene, DatasetError> {
    let params = RoomParams { cameras: cfg.cams, resolution: cfg.res, ..cfg.room.clone() };
    sample_room(scene_seed(cfg.seed, index), &params).map_err(|source| DatasetError::Scene { index, source })
}

/// Depth as `1 / (1 + d)` (0 for misses) so it fits an 8-bit image.
pub fn depth_to_display(depth: &Image) -> Image {
    let mut out = depth.clone();
    for v in &mut out.data {
        *v = if v.is_finite() { 1.0 / (1.0 + *v) } else { 0.0 };
    }
    out
}

/// Normals as `0.5·n + 0.5`.
pub fn normal_to_display(normal: &Image) -> Image {
    let mut out = normal.clone();
    for v in &mut out.data {
        *v = 0.5 * *v + 0.5;
    }
    out
}

fn write_image(path: &Path, img: &Image, format: Format) -> Result<(), IoError> {
    match format {
        Format::Pfm => write_pfm(path, img),
        Format::Png => write_png(path, img, false),
    }
}

/// Writes the frame's maps and returns their manifest entries.
pub fn write_frame(dir: &Path, stem: &str, frame: &GTFrame, format: Format) -> Result<Vec<(String, &'static str)>, IoError> {
    let ext = format.extension();
    let (depth, normal) = match format {
        Format::Pfm => (frame.depth.clone(), frame.normal.clone()),
        Format::Png => (depth_to_display(&frame.depth), normal_to_display(&frame.normal)),
    };
    let mut out = Vec::new();
    for (kind, img) in [("depth", &depth), ("normal", &normal)] {
        let name = format!("{stem}_{kind}.{ext}");
        write_image(&dir.join(&name), img, format)?;
        out.push((name, kind));
    }
    if let Some(d) = &frame.disparity {
        let name = format!("{stem}_disparity.{ext}");
        write_image(&dir.join(&name), d, format)?;
        out.push((name, "disparity"));
    }
    Ok(out)
}

fn generate_scene(cfg: &DatasetConfig, index: usize, out: &Path) -> Result<Vec<FileEntry>, DatasetError> {
    let seed = scene_seed(cfg.seed, index);
    let scene = dataset_scene(cfg, index)?;
    let mut files = Vec::new();
    let json = format!("scene{seed}.json");
    std::fs::write(out.join(&json), scene.to_json())?;
    files.push(FileEntry { path: json, scene: index, scene_seed: seed, camera: None, kind: "scene".into() });
    for (k, cam) in scene.cameras.iter().enumerate() {
        let frame = render_gt(&scene, cam).map_err(|source| DatasetError::Scene { index, source })?;
        for (path, kind) in write_frame(out, &format!("scene{seed}_cam{k}"), &frame, cfg.format)? {
            files.push(FileEntry { path, scene: index, scene_seed: seed, camera: Some(k), kind: kind.into() });
        }
    }
    Ok(files)
}

/// Generates every scene into `out` (created if missing) and writes
/// `manifest.json`. Output bytes depend only on the configuration.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<Manifest, DatasetError> {
    std::fs::create_dir_all(out)?;
    let per_scene: Vec<Result<Vec<FileEntry>, DatasetError>> =
        (0..cfg.scenes).into_par_iter().map(|i| generate_scene(cfg, i, out)).collect();
    let mut files = Vec::new();
    for r in per_scene {
        files.extend(r?);
    }
    let manifest = Manifest {
        tool: "procgen".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        scenes: cfg.scenes,
        cams: cfg.cams,
        res: cfg.res,
        format: cfg.format,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(manifest_path(out), text)?;
    Ok(manifest)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join("manifest.json")
}
