//! Ground-truth depth, normal and disparity maps by ray casting.

use crate::io::Image;
use crate::math::Vec3;
use crate::scene::{CameraSpec, Scene, SceneError};
use rayon::prelude::*;

/// Per-camera ground truth. Depth is z-depth (`inf` where nothing is hit);
/// normals are unit camera-space vectors (x right, y down, z forward)
/// facing the camera, zero where nothing is hit.
#[derive(Debug, Clone)]
pub struct GTFrame {
    pub depth: Image,
    pub normal: Image,
    pub disparity: Option<Image>,
}

/// Casts one ray per pixel centre.
pub fn render_gt(scene: &Scene, cam: &CameraSpec) -> Result<GTFrame, SceneError> {
    cam.validate()?;
    let (w, h) = (cam.width, cam.height);
    let (r, d, f) = cam.basis();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut depth = Vec::with_capacity(w);
            let mut normal = Vec::with_capacity(3 * w);
            for x in 0..w {
                let (o, dir) = cam.ray(x, y);
                match scene.raycast(o, dir, f64::INFINITY) {
                    Some((t, n)) => {
                        let n = if n.dot(dir) > 0.0 { -n } else { n };
                        depth.push(t);
                        normal.extend_from_slice(&[n.dot(r), n.dot(d), n.dot(f)]);
                    }
                    None => {
                        depth.push(f64::INFINITY);
                        normal.extend_from_slice(&[0.0; 3]);
                    }
                }
            }
            (depth, normal)
        })
        .collect();
    let mut depth = Image::new(w, h, 1);
    let mut normal = Image::new(w, h, 3);
    depth.data = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
    normal.data = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    let disparity = cam.baseline.map(|b| disparity_from_depth(&depth, cam.focal_px(), b));
    Ok(GTFrame { depth, normal, disparity })
}

/// `focal_px · baseline / depth`; infinite depth maps to zero disparity.
pub fn disparity_from_depth(depth: &Image, focal_px: f64, baseline: f64) -> Image {
    let mut out = depth.clone();
    for v in &mut out.data {
        *v = if v.is_finite() && *v > 0.0 { focal_px * baseline / *v } else { 0.0 };
    }
    out
}

/// World-space point seen at pixel (x, y) with the given depth.
pub fn unproject(cam: &CameraSpec, x: usize, y: usize, depth: f64) -> Vec3 {
    let (o, dir) = cam.ray(x, y);
    o + dir * depth
}

/// Pixel coordinates (continuous, pixel centres at +0.5) and z-depth of a
/// world point, or `None` behind the camera.
pub fn project(cam: &CameraSpec, p: Vec3) -> Option<(f64, f64, f64)> {
    let (r, d, f) = cam.basis();
    let v = p - cam.position;
    let z = v.dot(f);
    if z <= 0.0 {
        return None;
    }
    let fp = cam.focal_px();
    Some((v.dot(r) / z * fp + 0.5 * cam.width as f64, v.dot(d) / z * fp + 0.5 * cam.height as f64, z))
}
