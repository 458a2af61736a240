//! Scene assembly: room shells, placement, collision, planning and cameras.

use crate::materials;
use crate::math::{Aabb, Vec3};
use crate::mesh::{make_box, make_cylinder, Mesh, MeshError};
use crate::rng::{RandomStream, RngError};
use crate::sampler::run_sampler;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// Uniform scale, then rotation about +z, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: Vec3,
    pub rot_z: f64,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform { translation: Vec3::ZERO, rot_z: 0.0, scale: 1.0 }
    }
}

impl Transform {
    pub fn new(translation: Vec3, rot_z: f64, scale: f64) -> Self {
        Transform { translation, rot_z, scale }
    }

    pub fn apply_dir(&self, d: Vec3) -> Vec3 {
        let (s, c) = (libm::sin(self.rot_z), libm::cos(self.rot_z));
        Vec3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.apply_dir(p * self.scale) + self.translation
    }

    /// Inverse rotation of a direction.
    pub fn unapply_dir(&self, d: Vec3) -> Vec3 {
        let (s, c) = (libm::sin(self.rot_z), libm::cos(self.rot_z));
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    pub fn unapply(&self, p: Vec3) -> Vec3 {
        self.unapply_dir(p - self.translation) / self.scale
    }

    /// Bounding box of a transformed box.
    pub fn apply_aabb(&self, b: &Aabb) -> Aabb {
        Aabb::from_points(b.corners().iter().map(|&c| self.apply(c)))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("windows {0} and {1} overlap")]
    OverlappingWindows(usize, usize),
    #[error("window {0} is outside its wall")]
    WindowOutOfBounds(usize),
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("no feasible placement: {0}")]
    NoFeasiblePlacement(String),
    #[error("no path found in {0} iterations")]
    NoPathFound(usize),
    #[error("{0} is not in free space")]
    Blocked(&'static str),
    #[error("camera placement exhausted its attempts")]
    PlacementExhausted,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("object index {0} out of range")]
    NoSuchObject(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Rng(#[from] RngError),
    #[error("material: {0}")]
    Material(String),
    #[error("scene json: {0}")]
    Json(String),
}

// ---------------------------------------------------------------------------
// Room shells

/// Axis-aligned window on wall `wall` (0..4), in wall coordinates: `u` runs
/// along the wall, `v` up from the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRect {
    pub wall: usize,
    pub u0: f64,
    pub v0: f64,
    pub u1: f64,
    pub v1: f64,
}

impl WindowRect {
    pub fn area(&self) -> f64 {
        (self.u1 - self.u0) * (self.v1 - self.v0)
    }
}

/// Room occupying `[0, width] × [0, depth] × [0, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub quad_size: f64,
    pub windows: Vec<WindowRect>,
}

/// Panel indices of a room: floor, ceiling, then walls 0..4.
pub const FLOOR: usize = 0;
pub const CEILING: usize = 1;

/// Wall frame: origin, run direction, length and inward normal. Wall 0 is
/// y = 0, then counter-clockwise seen from above.
pub fn wall_frame(room: &RoomSpec, wall: usize) -> (Vec3, Vec3, f64, Vec3) {
    let (w, d) = (room.width, room.depth);
    match wall % 4 {
        0 => (Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), w, Vec3::new(0.0, 1.0, 0.0)),
        1 => (Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), d, Vec3::new(-1.0, 0.0, 0.0)),
        2 => (Vec3::new(w, d, 0.0), Vec3::new(-1.0, 0.0, 0.0), w, Vec3::new(0.0, -1.0, 0.0)),
        _ => (Vec3::new(0.0, d, 0.0), Vec3::new(0.0, -1.0, 0.0), d, Vec3::new(1.0, 0.0, 0.0)),
    }
}

fn breakpoints(len: f64, q: f64, cuts: &[f64]) -> Vec<f64> {
    let n = (len / q).ceil().max(1.0) as usize;
    let mut xs: Vec<f64> = (0..=n).map(|k| if k == n { len } else { len * k as f64 / n as f64 }).collect();
    for &c in cuts {
        xs.retain(|&x| (x - c).abs() > 1e-9 || x == 0.0 || x == len);
        if c > 0.0 && c < len {
            xs.push(c);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Quad grid over a rectangle with whole quads removed inside `holes`
/// (`[u0, v0, u1, v1]`), wound counter-clockwise about `normal`.
fn panel(origin: Vec3, ua: Vec3, va: Vec3, lu: f64, lv: f64, q: f64, holes: &[[f64; 4]], normal: Vec3) -> Mesh {
    let ucuts: Vec<f64> = holes.iter().flat_map(|h| [h[0], h[2]]).collect();
    let vcuts: Vec<f64> = holes.iter().flat_map(|h| [h[1], h[3]]).collect();
    let (us, vs) = (breakpoints(lu, q, &ucuts), breakpoints(lv, q, &vcuts));
    let flip = ua.cross(va).dot(normal) < 0.0;
    let mut m = Mesh::default();
    let mut index: HashMap<(usize, usize), u32> = HashMap::new();
    for j in 0..vs.len() - 1 {
        for i in 0..us.len() - 1 {
            let (cu, cv) = (0.5 * (us[i] + us[i + 1]), 0.5 * (vs[j] + vs[j + 1]));
            if holes.iter().any(|h| cu > h[0] && cu < h[2] && cv > h[1] && cv < h[3]) {
                continue;
            }
            let mut corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            if flip {
                corners.reverse();
            }
            let mut face = Vec::with_capacity(4);
            for (a, b) in corners {
                let id = *index.entry((a, b)).or_insert_with(|| {
                    m.vertices.push(origin + ua * us[a] + va * vs[b]);
                    (m.vertices.len() - 1) as u32
                });
                face.push(id);
                m.uv.push([us[a], vs[b]]);
            }
            m.faces.push(face);
        }
    }
    m.normals = vec![normal; m.vertices.len()];
    m
}

fn validate_room(room: &RoomSpec) -> Result<(), SceneError> {
    let dims = [room.width, room.depth, room.height, room.quad_size];
    if dims.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(SceneError::InvalidRoom("dimensions and quad size must be positive".into()));
    }
    for (k, w) in room.windows.iter().enumerate() {
        let len = wall_frame(room, w.wall).2;
        let ok = w.wall < 4 && w.u0 >= 0.0 && w.v0 >= 0.0 && w.u0 < w.u1 && w.v0 < w.v1 && w.u1 <= len && w.v1 <= room.height;
        if !ok {
            return Err(SceneError::WindowOutOfBounds(k));
        }
    }
    for (a, wa) in room.windows.iter().enumerate() {
        for (b, wb) in room.windows.iter().enumerate().skip(a + 1) {
            let overlap = wa.wall == wb.wall && wa.u0 < wb.u1 && wb.u0 < wa.u1 && wa.v0 < wb.v1 && wb.v0 < wa.v1;
            if overlap {
                return Err(SceneError::OverlappingWindows(a, b));
            }
        }
    }
    Ok(())
}

/// The six room panels (floor, ceiling, walls 0..4) as inward-facing quad
/// grids with window cutouts.
pub fn make_room_panels(room: &RoomSpec) -> Result<Vec<Mesh>, SceneError> {
    validate_room(room)?;
    let (w, d, h, q) = (room.width, room.depth, room.height, room.quad_size);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let mut out = vec![
        panel(Vec3::ZERO, x, y, w, d, q, &[], Vec3::Z),
        panel(Vec3::new(0.0, 0.0, h), x, y, w, d, q, &[], -Vec3::Z),
    ];
    for wall in 0..4 {
        let (origin, run, len, normal) = wall_frame(room, wall);
        let holes: Vec<[f64; 4]> =
            room.windows.iter().filter(|r| r.wall == wall).map(|r| [r.u0, r.v0, r.u1, r.v1]).collect();
        out.push(panel(origin, run, Vec3::Z, len, h, q, &holes, normal));
    }
    Ok(out)
}

/// Whole room shell as one quad-only mesh.
pub fn make_room(room: &RoomSpec) -> Result<Mesh, SceneError> {
    let mut m = Mesh::default();
    for p in make_room_panels(room)? {
        m.append(&p);
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Triangle-triangle intersection

fn tri_normal(t: &[Vec3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(t[2] - t[0])
}

/// Interval of `t` (a triangle straddling the plane with signed distances
/// `d`) along the line direction `dir`.
fn line_interval(t: &[Vec3; 3], d: [f64; 3], dir: Vec3) -> (f64, f64) {
    let p = [dir.dot(t[0]), dir.dot(t[1]), dir.dot(t[2])];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut push = |x: f64| {
        lo = lo.min(x);
        hi = hi.max(x);
    };
    for i in 0..3 {
        if d[i] == 0.0 {
            push(p[i]);
        }
        let j = (i + 1) % 3;
        if (d[i] > 0.0 && d[j] < 0.0) || (d[i] < 0.0 && d[j] > 0.0) {
            push(p[i] + (p[j] - p[i]) * d[i] / (d[i] - d[j]));
        }
    }
    (lo, hi)
}

/// Positive-area overlap of two coplanar triangles (separating axes on the
/// edge normals within the plane).
fn coplanar_overlap(a: &[Vec3; 3], b: &[Vec3; 3], n: Vec3) -> bool {
    for t in [a, b] {
        for k in 0..3 {
            let axis = (t[(k + 1) % 3] - t[k]).cross(n);
            let pa = a.map(|p| axis.dot(p));
            let pb = b.map(|p| axis.dot(p));
            let (amin, amax) = (pa.iter().copied().fold(f64::INFINITY, f64::min), pa.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            let (bmin, bmax) = (pb.iter().copied().fold(f64::INFINITY, f64::min), pb.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            if amax <= bmin || bmax <= amin {
                return false;
            }
        }
    }
    true
}

/// Whether two triangles interpenetrate. Transversal crossings with a
/// segment of positive length count; so does coplanar overlap of positive
/// area between same-facing triangles (both solids on the same side).
/// Touching at points or edges, and coplanar opposite-facing contact, do not.
pub fn tri_tri_intersect(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    let nb = tri_normal(b);
    let da = a.map(|p| nb.dot(p - b[0]));
    if da.iter().all(|&x| x == 0.0) {
        let na = tri_normal(a);
        return na.dot(nb) > 0.0 && coplanar_overlap(a, b, nb);
    }
    if !(da.iter().any(|&x| x > 0.0) && da.iter().any(|&x| x < 0.0)) {
        return false;
    }
    let na = tri_normal(a);
    let db = b.map(|p| na.dot(p - a[0]));
    if !(db.iter().any(|&x| x > 0.0) && db.iter().any(|&x| x < 0.0)) {
        return false;
    }
    let dir = na.cross(nb);
    let (a0, a1) = line_interval(a, da, dir);
    let (b0, b1) = line_interval(b, db, dir);
    a0.max(b0) < a1.min(b1)
}

// ---------------------------------------------------------------------------
// BVH

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: first triangle; inner: left child (right child follows the
    /// left subtree at `right`).
    start: u32,
    count: u32,
    right: u32,
}

/// Bounding volume hierarchy over a mesh's triangles in object space.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    tris: Vec<[Vec3; 3]>,
}

const LEAF_SIZE: usize = 4;

/// Ray hit: parameter along the ray and the unnormalized geometric normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub normal: Vec3,
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Bvh {
        let tris: Vec<[Vec3; 3]> = mesh
            .triangles()
            .iter()
            .map(|t| t.map(|i| mesh.vertices[i as usize]))
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            Self::split(&tris, &centroids, &mut order, 0, &mut nodes);
        }
        let tris = order.iter().map(|&i| tris[i]).collect();
        Bvh { nodes, tris }
    }

    fn split(tris: &[[Vec3; 3]], cent: &[Vec3], order: &mut [usize], start: usize, nodes: &mut Vec<BvhNode>) -> usize {
        let bounds = order.iter().fold(Aabb::EMPTY, |b, &i| b.grow(tris[i][0]).grow(tris[i][1]).grow(tris[i][2]));
        let me = nodes.len();
        nodes.push(BvhNode { bounds, start: start as u32, count: order.len() as u32, right: 0 });
        if order.len() <= LEAF_SIZE {
            return me;
        }
        let cb = order.iter().fold(Aabb::EMPTY, |b, &i| b.grow(cent[i]));
        let e = cb.extent();
        let axis = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| cent[a][axis].total_cmp(&cent[b][axis]).then(a.cmp(&b)));
        let (l, r) = order.split_at_mut(mid);
        Self::split(tris, cent, l, start, nodes);
        let right = Self::split(tris, cent, r, start + mid, nodes);
        nodes[me].count = 0;
        nodes[me].right = right as u32;
        me
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::EMPTY, |n| n.bounds)
    }

    /// Nearest hit with `t_min < t < t_max` (double-sided Möller-Trumbore).
    pub fn raycast(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if n.bounds.ray_entry(origin, inv, limit).is_none() {
                continue;
            }
            if n.count > 0 {
                for t in &self.tris[n.start as usize..(n.start + n.count) as usize] {
                    if let Some(h) = ray_triangle(origin, dir, t) {
                        if h > t_min && h < limit {
                            limit = h;
                            best = Some(Hit { t: h, normal: tri_normal(t) });
                        }
                    }
                }
            } else {
                stack.push(n.right as usize);
                stack.push(ni + 1);
            }
        }
        best
    }
}

fn ray_triangle(o: Vec3, d: Vec3, t: &[Vec3; 3]) -> Option<f64> {
    let (e1, e2) = (t[1] - t[0], t[2] - t[0]);
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - t[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(q) * inv)
}

fn inflate_abs(b: Aabb) -> Aabb {
    let m = b.min.to_array().iter().chain(b.max.to_array().iter()).fold(1.0f64, |a, x| a.max(x.abs()));
    b.inflate(1e-9 * m)
}

/// Whether any triangle of `a` (under `ta`) intersects any triangle of `b`
/// (under `tb`), testing world-space triangles.
pub fn bvh_pair_intersects(a: &Bvh, ta: &Transform, b: &Bvh, tb: &Transform) -> bool {
    if a.nodes.is_empty() || b.nodes.is_empty() {
        return false;
    }
    let wa: Vec<Aabb> = a.nodes.iter().map(|n| inflate_abs(ta.apply_aabb(&n.bounds))).collect();
    let wb: Vec<Aabb> = b.nodes.iter().map(|n| inflate_abs(tb.apply_aabb(&n.bounds))).collect();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, j)) = stack.pop() {
        if !wa[i].overlaps(&wb[j]) {
            continue;
        }
        let (na, nb) = (&a.nodes[i], &b.nodes[j]);
        match (na.count > 0, nb.count > 0) {
            (true, true) => {
                let ts = |bvh: &Bvh, n: &BvhNode, t: &Transform| -> Vec<[Vec3; 3]> {
                    bvh.tris[n.start as usize..(n.start + n.count) as usize].iter().map(|tri| tri.map(|p| t.apply(p))).collect()
                };
                let (xa, xb) = (ts(a, na, ta), ts(b, nb, tb));
                if xa.iter().any(|p| xb.iter().any(|q| tri_tri_intersect(p, q))) {
                    return true;
                }
            }
            (false, true) => {
                stack.push((i + 1, j));
                stack.push((na.right as usize, j));
            }
            (true, false) => {
                stack.push((i, j + 1));
                stack.push((i, nb.right as usize));
            }
            (false, false) => {
                if wa[i].volume() >= wb[j].volume() {
                    stack.push((i + 1, j));
                    stack.push((na.right as usize, j));
                } else {
                    stack.push((i, j + 1));
                    stack.push((i, nb.right as usize));
                }
            }
        }
    }
    false
}

/// Object-space BVHs keyed by mesh content hash.
#[derive(Debug, Clone, Default)]
pub struct ColliderCache {
    map: HashMap<u64, Arc<Bvh>>,
    builds: usize,
}

impl ColliderCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&mut self, mesh: &Mesh) -> Arc<Bvh> {
        let key = mesh.content_hash();
        if let Some(b) = self.map.get(&key) {
            return b.clone();
        }
        self.builds += 1;
        let b = Arc::new(Bvh::build(mesh));
        self.map.insert(key, b.clone());
        b
    }

    pub fn get(&self, hash: u64) -> Option<&Arc<Bvh>> {
        self.map.get(&hash)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Number of BVH constructions so far.
    pub fn builds(&self) -> usize {
        self.builds
    }
}

// ---------------------------------------------------------------------------
// Scenes

/// Material reference: a sampler from the material library and its seed.
/// `displacement` scales the material's displacement output (0 = none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRef {
    pub sampler: String,
    pub seed: u64,
    pub displacement: f64,
}

/// Recipe for a mesh; scenes serialize recipes, not geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeshSource {
    /// Box centred on the z axis, resting on z = 0.
    Box { size: [f64; 3], subdiv: usize },
    Cylinder { radius: f64, height: f64, segments: usize },
    /// One room panel (see `make_room_panels`), optionally displaced.
    RoomPanel { room: RoomSpec, panel: usize, material: Option<MaterialRef> },
}

/// Material graph for a reference.
pub fn material_graph(m: &MaterialRef) -> Result<crate::Graph, SceneError> {
    let lib = materials::library();
    let r = run_sampler(&lib, &m.sampler, RandomStream::new(m.seed)).map_err(|e| SceneError::Material(e.to_string()))?;
    Ok((*r.graph).clone())
}

impl MeshSource {
    pub fn build(&self) -> Result<Mesh, SceneError> {
        match self {
            MeshSource::Box { size, subdiv } => {
                let h = Vec3::new(size[0] / 2.0, size[1] / 2.0, 0.0);
                Ok(make_box(-h, Vec3::new(h.x, h.y, size[2]), *subdiv))
            }
            MeshSource::Cylinder { radius, height, segments } => Ok(make_cylinder(*radius, *height, *segments)),
            MeshSource::RoomPanel { room, panel, material } => {
                let panels = make_room_panels(room)?;
                let mut m = panels.into_iter().nth(*panel).ok_or(SceneError::InvalidRoom(format!("no panel {panel}")))?;
                if let Some(mat) = material.as_ref().filter(|m| m.displacement != 0.0) {
                    let g = material_graph(mat)?;
                    if g.inputs().contains_key("curvature") {
                        m = m.compute_curvature()?;
                    }
                    m = m.displace(&g, "displacement", mat.displacement)?;
                    m.attributes.clear();
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Index into the scene's mesh table; duplicates share an entry.
    pub mesh: usize,
    pub transform: Transform,
    pub tags: Vec<String>,
    pub material: Option<MaterialRef>,
    /// Whether the object takes part in collision checks.
    pub collider: bool,
}

/// Pinhole camera. Camera space: +x right, +y down, +z forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub position: Vec3,
    pub look_at: Vec3,
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
    /// Set on both cameras of a stereo pair.
    pub baseline: Option<f64>,
}

pub const DEFAULT_FOV: f64 = std::f64::consts::FRAC_PI_3;

impl CameraSpec {
    pub fn new(position: Vec3, look_at: Vec3, fov_y: f64, width: usize, height: usize) -> CameraSpec {
        CameraSpec { position, look_at, fov_y, width, height, baseline: None }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.position == self.look_at {
            return Err(SceneError::InvalidCamera("position equals look-at".into()));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(SceneError::InvalidCamera("fov must lie in (0, pi)".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidCamera("empty resolution".into()));
        }
        Ok(())
    }

    /// World-space (right, down, forward) unit vectors.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = (self.look_at - self.position).normalize();
        let up = if f.cross(Vec3::Z).length() < 1e-12 { Vec3::new(0.0, 1.0, 0.0) } else { Vec3::Z };
        let r = f.cross(up).normalize();
        let d = f.cross(r);
        (r, d, f)
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / libm::tan(0.5 * self.fov_y)
    }

    /// Ray through the centre of pixel (x, y); the direction has unit
    /// forward component, so the ray parameter is z-depth.
    pub fn ray(&self, x: usize, y: usize) -> (Vec3, Vec3) {
        let (r, d, f) = self.basis();
        let fp = self.focal_px();
        let px = (x as f64 + 0.5 - 0.5 * self.width as f64) / fp;
        let py = (y as f64 + 0.5 - 0.5 * self.height as f64) / fp;
        (self.position, f + r * px + d * py)
    }
}

/// Scene: distinct meshes, object instances, cameras and colliders.
#[derive(Debug, Clone)]
pub struct Scene {
    pub seed: u64,
    pub room: Option<RoomSpec>,
    pub sources: Vec<MeshSource>,
    pub meshes: Vec<Arc<Mesh>>,
    hashes: Vec<u64>,
    pub objects: Vec<SceneObject>,
    pub cameras: Vec<CameraSpec>,
    cache: ColliderCache,
}

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    seed: u64,
    room: Option<RoomSpec>,
    meshes: Vec<MeshSource>,
    objects: Vec<SceneObject>,
    cameras: Vec<CameraSpec>,
}

impl Scene {
    pub fn new(seed: u64) -> Scene {
        Scene {
            seed,
            room: None,
            sources: Vec::new(),
            meshes: Vec::new(),
            hashes: Vec::new(),
            objects: Vec::new(),
            cameras: Vec::new(),
            cache: ColliderCache::new(),
        }
    }

    /// Registers a mesh; identical recipes share one entry.
    pub fn add_mesh(&mut self, source: MeshSource) -> Result<usize, SceneError> {
        if let Some(i) = self.sources.iter().position(|s| *s == source) {
            return Ok(i);
        }
        let mesh = source.build()?;
        self.push_mesh(source, mesh);
        Ok(self.sources.len() - 1)
    }

    fn push_mesh(&mut self, source: MeshSource, mesh: Mesh) {
        let bvh_hash = mesh.content_hash();
        self.cache.get_or_build(&mesh);
        self.sources.push(source);
        self.meshes.push(Arc::new(mesh));
        self.hashes.push(bvh_hash);
    }

    pub fn add_object(&mut self, mesh: usize, transform: Transform, tags: &[&str]) -> usize {
        self.objects.push(SceneObject {
            mesh,
            transform,
            tags: tags.iter().map(|s| s.to_string()).collect(),
            material: None,
            collider: true,
        });
        self.objects.len() - 1
    }

    pub fn cache(&self) -> &ColliderCache {
        &self.cache
    }

    fn bvh(&self, obj: usize) -> &Arc<Bvh> {
        let h = self.hashes[self.objects[obj].mesh];
        self.cache.get(h).expect("every registered mesh has a BVH")
    }

    pub fn world_aabb(&self, obj: usize) -> Aabb {
        let o = &self.objects[obj];
        o.transform.apply_aabb(&self.meshes[o.mesh].bounds())
    }

    pub fn world_mesh(&self, obj: usize) -> Mesh {
        let o = &self.objects[obj];
        self.meshes[o.mesh].transformed(&o.transform)
    }

    /// Narrowphase test between two objects.
    pub fn pair_collides(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.objects[i], &self.objects[j]);
        if !inflate_abs(self.world_aabb(i)).overlaps(&inflate_abs(self.world_aabb(j))) {
            return false;
        }
        bvh_pair_intersects(self.bvh(i), &a.transform, self.bvh(j), &b.transform)
    }

    /// Colliding pairs `(min, max)` that involve `obj`.
    pub fn check_collision(&self, obj: usize) -> Vec<(usize, usize)> {
        if !self.objects[obj].collider {
            return Vec::new();
        }
        (0..self.objects.len())
            .filter(|&j| j != obj && self.objects[j].collider && self.pair_collides(obj, j))
            .map(|j| (obj.min(j), obj.max(j)))
            .collect()
    }

    pub fn all_collisions(&self) -> BTreeSet<(usize, usize)> {
        (0..self.objects.len()).flat_map(|i| self.check_collision(i)).collect()
    }

    /// New transform for `obj` satisfying `rel` at distance `gap`.
    pub fn align(&self, obj: usize, rel: &Relation, gap: f64) -> Result<Transform, SceneError> {
        if obj >= self.objects.len() {
            return Err(SceneError::NoSuchObject(obj));
        }
        let o = &self.objects[obj];
        let local = self.meshes[o.mesh].bounds();
        let mut t = o.transform;
        let extreme = |t: &Transform, dir: Vec3| -> f64 {
            t.apply_aabb(&local).corners().iter().map(|&c| dir.dot(c)).fold(f64::INFINITY, f64::min)
        };
        match *rel {
            Relation::BackTo { wall } => {
                let room = self.room.as_ref().ok_or(SceneError::NoFeasiblePlacement("no room".into()))?;
                let (origin, _, _, n) = wall_frame(room, wall);
                t.rot_z = libm::atan2(-n.x, n.y);
                let shift = gap - (extreme(&t, n) - n.dot(origin));
                t.translation = t.translation + n * shift;
            }
            Relation::SideOf { target, side } => {
                let tg = self.objects.get(target).ok_or(SceneError::NoSuchObject(target))?;
                let local_dir = match side {
                    Side::Left => Vec3::new(-1.0, 0.0, 0.0),
                    Side::Right => Vec3::new(1.0, 0.0, 0.0),
                };
                let s = snap_axis(tg.transform.apply_dir(local_dir));
                let target_face = -self.world_aabb(target).corners().iter().map(|&c| -s.dot(c)).fold(f64::INFINITY, f64::min);
                let shift = target_face + gap - extreme(&t, s);
                t.translation = t.translation + s * shift;
            }
            Relation::OnTopOf { target } => {
                if target >= self.objects.len() {
                    return Err(SceneError::NoSuchObject(target));
                }
                let top = self.world_aabb(target).max.z;
                t.translation.z += top + gap - extreme(&t, Vec3::Z);
            }
        }
        let target = match *rel {
            Relation::SideOf { target, .. } | Relation::OnTopOf { target } => Some(target),
            Relation::BackTo { .. } => None,
        };
        if let Some(target) = target {
            let mut probe = self.clone();
            probe.objects[obj].transform = t;
            if probe.pair_collides(obj, target) {
                return Err(SceneError::NoFeasiblePlacement(format!("object {obj} interpenetrates {target}")));
            }
        }
        Ok(t)
    }

    /// Free space for cameras and planning: the room interior (or `bounds`)
    /// shrunk by `margin`, with collider AABBs grown by `margin` as obstacles.
    pub fn box_world(&self, bounds: Option<Aabb>, margin: f64) -> BoxWorld {
        let b = bounds
            .or(self.room.as_ref().map(|r| Aabb::new(Vec3::ZERO, Vec3::new(r.width, r.depth, r.height))))
            .unwrap_or(Aabb::new(Vec3::splat(-10.0), Vec3::splat(10.0)));
        let shrunk = Aabb::new(b.min + Vec3::splat(margin), b.max - Vec3::splat(margin));
        let obstacles = (0..self.objects.len())
            .filter(|&i| self.objects[i].collider)
            .map(|i| self.world_aabb(i).inflate(margin))
            .collect();
        BoxWorld { bounds: shrunk, obstacles }
    }

    /// Nearest surface hit along a world ray: (t, unit world normal).
    pub fn raycast(&self, origin: Vec3, dir: Vec3, t_max: f64) -> Option<(f64, Vec3)> {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, Vec3)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            let limit = best.map_or(t_max, |b| b.0);
            if inflate_abs(self.world_aabb(i)).ray_entry(origin, inv, limit).is_none() {
                continue;
            }
            let tr = &o.transform;
            let (lo, ld) = (tr.unapply(origin), tr.unapply_dir(dir) / tr.scale);
            if let Some(h) = self.bvh(i).raycast(lo, ld, 1e-9, limit) {
                best = Some((h.t, tr.apply_dir(h.normal).normalize()));
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        let doc = SceneDoc {
            seed: self.seed,
            room: self.room.clone(),
            meshes: self.sources.clone(),
            objects: self.objects.clone(),
            cameras: self.cameras.clone(),
        };
        serde_json::to_string_pretty(&doc).unwrap_or_default()
    }

    /// Rebuilds a scene (meshes included) from its JSON recipe.
    pub fn from_json(s: &str) -> Result<Scene, SceneError> {
        let doc: SceneDoc = serde_json::from_str(s).map_err(|e| SceneError::Json(e.to_string()))?;
        let mut sc = Scene::new(doc.seed);
        sc.room = doc.room;
        for src in doc.meshes {
            let m = src.build()?;
            sc.push_mesh(src, m);
        }
        if let Some(o) = doc.objects.iter().find(|o| o.mesh >= sc.meshes.len()) {
            return Err(SceneError::Json(format!("object references mesh {}", o.mesh)));
        }
        sc.objects = doc.objects;
        sc.cameras = doc.cameras;
        Ok(sc)
    }
}

fn snap_axis(v: Vec3) -> Vec3 {
    let a = [v.x.abs(), v.y.abs(), v.z.abs()];
    let k = if a[0] >= a[1] && a[0] >= a[2] { 0 } else if a[1] >= a[2] { 1 } else { 2 };
    let mut out = [0.0; 3];
    out[k] = v[k].signum();
    Vec3::from_array(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Placement relations. An object's back is its local -y face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    BackTo { wall: usize },
    SideOf { target: usize, side: Side },
    OnTopOf { target: usize },
}

// ---------------------------------------------------------------------------
// Free space and RRT*

/// Free space: inside `bounds` and outside every obstacle box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxWorld {
    pub bounds: Aabb,
    pub obstacles: Vec<Aabb>,
}

impl BoxWorld {
    pub fn point_free(&self, p: Vec3) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Exact segment test against the obstacle boxes.
    pub fn segment_free(&self, a: Vec3, b: Vec3) -> bool {
        if !(self.bounds.contains(a) && self.bounds.contains(b)) {
            return false;
        }
        let d = b - a;
        if d.length() == 0.0 {
            return self.point_free(a);
        }
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        !self.obstacles.iter().any(|o| o.ray_entry(a, inv, 1.0).is_some())
    }

    /// Point checks every `resolution` along the segment, endpoints included.
    pub fn segment_free_dense(&self, a: Vec3, b: Vec3, resolution: f64) -> bool {
        let n = ((b - a).length() / resolution).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.point_free(a.lerp(b, k as f64 / n as f64)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtParams {
    pub step: f64,
    /// Near-radius constant; `None` means `2·volume^(1/3)` of the bounds.
    pub gamma: Option<f64>,
    pub goal_bias: f64,
    pub max_iters: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams { step: 0.5, gamma: None, goal_bias: 0.1, max_iters: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtResult {
    pub path: Vec<Vec3>,
    pub cost: f64,
    /// Best goal-reaching cost after each iteration (inf before the first).
    pub cost_trace: Vec<f64>,
    pub tree_size: usize,
}

struct Tree {
    pos: Vec<Vec3>,
    parent: Vec<usize>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn reparent(&mut self, node: usize, parent: usize) {
        let old = self.parent[node];
        self.children[old].retain(|&c| c != node);
        self.parent[node] = parent;
        self.children[parent].push(node);
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let p = self.parent[n];
            self.cost[n] = self.cost[p] + self.pos[n].distance(self.pos[p]);
            stack.extend(self.children[n].iter().copied());
        }
    }
}

/// RRT* from `start` to `goal` in `world`.
pub fn rrt_star(
    start: Vec3,
    goal: Vec3,
    world: &BoxWorld,
    params: &RrtParams,
    stream: &mut RandomStream,
) -> Result<RrtResult, SceneError> {
    if !world.point_free(start) {
        return Err(SceneError::Blocked("start"));
    }
    if !world.point_free(goal) {
        return Err(SceneError::Blocked("goal"));
    }
    if start == goal {
        return Ok(RrtResult { path: vec![start], cost: 0.0, cost_trace: vec![0.0], tree_size: 1 });
    }
    let b = world.bounds;
    let gamma = params.gamma.unwrap_or_else(|| 2.0 * libm::cbrt(b.volume()));
    let mut tree = Tree { pos: vec![start], parent: vec![0], cost: vec![0.0], children: vec![Vec::new()] };
    let mut goal_parents: Vec<usize> = Vec::new();
    let mut trace = Vec::with_capacity(params.max_iters);
    let best = |tree: &Tree, gp: &[usize]| -> (f64, Option<usize>) {
        gp.iter().fold((f64::INFINITY, None), |acc, &i| {
            let c = tree.cost[i] + tree.pos[i].distance(goal);
            if c < acc.0 { (c, Some(i)) } else { acc }
        })
    };
    for _ in 0..params.max_iters {
        let sample = if stream.next_f64() < params.goal_bias {
            goal
        } else {
            Vec3::new(stream.uniform(b.min.x, b.max.x)?, stream.uniform(b.min.y, b.max.y)?, stream.uniform(b.min.z, b.max.z)?)
        };
        let nearest = (0..tree.pos.len())
            .min_by(|&i, &j| tree.pos[i].distance(sample).total_cmp(&tree.pos[j].distance(sample)))
            .unwrap_or(0);
        let from = tree.pos[nearest];
        let dist = from.distance(sample);
        let new = if dist <= params.step { sample } else { from + (sample - from) * (params.step / dist) };
        if new != from && world.point_free(new) && world.segment_free(from, new) {
            let n = (tree.pos.len() + 1) as f64;
            let radius = (gamma * libm::cbrt(libm::log(n) / n)).min(2.0 * params.step);
            let near: Vec<usize> = (0..tree.pos.len()).filter(|&i| tree.pos[i].distance(new) <= radius).collect();
            let mut parent = nearest;
            let mut cost = tree.cost[nearest] + from.distance(new);
            for &i in &near {
                let c = tree.cost[i] + tree.pos[i].distance(new);
                if c < cost && world.segment_free(tree.pos[i], new) {
                    parent = i;
                    cost = c;
                }
            }
            let id = tree.pos.len();
            tree.pos.push(new);
            tree.parent.push(parent);
            tree.cost.push(cost);
            tree.children.push(Vec::new());
            tree.children[parent].push(id);
            for &i in &near {
                if i == parent {
                    continue;
                }
                let c = cost + new.distance(tree.pos[i]);
                if c < tree.cost[i] && world.segment_free(new, tree.pos[i]) {
                    tree.reparent(i, id);
                }
            }
            if new.distance(goal) <= params.step && world.segment_free(new, goal) {
                goal_parents.push(id);
            }
        }
        trace.push(best(&tree, &goal_parents).0);
    }
    let (cost, last) = best(&tree, &goal_parents);
    let Some(mut node) = last else {
        return Err(SceneError::NoPathFound(params.max_iters));
    };
    let mut path = vec![goal];
    if tree.pos[node] != goal {
        path.push(tree.pos[node]);
    }
    while node != 0 {
        node = tree.parent[node];
        path.push(tree.pos[node]);
    }
    path.reverse();
    Ok(RrtResult { path, cost, cost_trace: trace, tree_size: tree.pos.len() })
}

// ---------------------------------------------------------------------------
// Camera rigs

/// `n` cameras on a horizontal circle, azimuths `2πk/n` from +x.
pub fn circular_rig(center: Vec3, radius: f64, n: usize, look_at: Vec3, fov_y: f64, res: usize) -> Vec<CameraSpec> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let p = center + Vec3::new(radius * libm::cos(a), radius * libm::sin(a), 0.0);
            CameraSpec::new(p, look_at, fov_y, res, res)
        })
        .collect()
}

/// `n` cameras (pairs when `baseline` is set) uniform in `bbox`, each free
/// in `world`, looking at a random yaw with pitch in ±0.3 rad.
pub fn random_cameras(
    stream: &mut RandomStream,
    bbox: &Aabb,
    n: usize,
    baseline: Option<f64>,
    world: &BoxWorld,
    fov_y: f64,
    res: usize,
) -> Result<Vec<CameraSpec>, SceneError> {
    let mut out = Vec::new();
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..100 {
            let p = Vec3::new(
                stream.uniform(bbox.min.x, bbox.max.x)?,
                stream.uniform(bbox.min.y, bbox.max.y)?,
                stream.uniform(bbox.min.z, bbox.max.z)?,
            );
            let yaw = stream.uniform(0.0, std::f64::consts::TAU)?;
            let pitch = stream.uniform(-0.3, 0.3)?;
            let dir = Vec3::new(libm::cos(yaw) * libm::cos(pitch), libm::sin(yaw) * libm::cos(pitch), libm::sin(pitch));
            let mut cam = CameraSpec::new(p, p + dir, fov_y, res, res);
            if !world.point_free(p) {
                continue;
            }
            match baseline {
                None => out.push(cam),
                Some(bl) => {
                    let right = cam.basis().0 * bl;
                    if !world.point_free(p + right) {
                        continue;
                    }
                    cam.baseline = Some(bl);
                    let mut r = cam.clone();
                    r.position = p + right;
                    r.look_at = cam.look_at + right;
                    out.push(cam);
                    out.push(r);
                }
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(SceneError::PlacementExhausted);
        }
    }
    Ok(out)
}

fn point_at(path: &[Vec3], s: f64) -> Vec3 {
    let mut acc = 0.0;
    for w in path.windows(2) {
        let l = w[0].distance(w[1]);
        if l > 0.0 && s <= acc + l {
            return w[0].lerp(w[1], (s - acc) / l);
        }
        acc += l;
    }
    // Past the end: extend along the last non-degenerate segment.
    let last = *path.last().expect("non-empty path");
    match path.windows(2).rev().find(|w| w[0] != w[1]) {
        Some(w) => last + (w[1] - w[0]).normalize() * (s - acc),
        None => last + Vec3::new(s - acc, 0.0, 0.0),
    }
}

/// Cameras every `spacing` of arc length, each looking at the point
/// `look_ahead` further along the path.
pub fn path_to_cameras(path: &[Vec3], spacing: f64, look_ahead: f64, fov_y: f64, res: usize) -> Result<Vec<CameraSpec>, SceneError> {
    if path.is_empty() || !(spacing > 0.0) || !(look_ahead > 0.0) {
        return Err(SceneError::InvalidCamera("empty path or non-positive spacing".into()));
    }
    let total: f64 = path.windows(2).map(|w| w[0].distance(w[1])).sum();
    let count = (total / spacing).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let s = k as f64 * spacing;
            CameraSpec::new(point_at(path, s), point_at(path, s + look_ahead), fov_y, res, res)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Room sampler

#[derive(Debug, Clone, PartialEq)]
pub struct RoomParams {
    pub quad_size: f64,
    pub cameras: usize,
    pub resolution: usize,
    pub fov_y: f64,
    /// Material sampler for floor and walls.
    pub material_sampler: String,
    pub placement_attempts: usize,
}

impl Default for RoomParams {
    fn default() -> Self {
        RoomParams {
            quad_size: 0.05,
            cameras: 12,
            resolution: 128,
            fov_y: DEFAULT_FOV,
            material_sampler: "composed".into(),
            placement_attempts: 20,
        }
    }
}

/// Furniture proxy recipes: (tag, mesh, against a wall).
fn furniture(s: &mut RandomStream) -> Result<Vec<(&'static str, MeshSource)>, SceneError> {
    let bx = |x: f64, y: f64, z: f64| MeshSource::Box { size: [x, y, z], subdiv: 2 };
    Ok(vec![
        ("sofa", bx(s.uniform(1.6, 2.2)?, s.uniform(0.8, 1.0)?, s.uniform(0.7, 0.9)?)),
        ("table", bx(s.uniform(0.6, 1.0)?, s.uniform(0.5, 0.7)?, s.uniform(0.4, 0.55)?)),
        ("shelf", bx(s.uniform(0.6, 1.2)?, s.uniform(0.3, 0.4)?, s.uniform(1.4, 2.0)?)),
        ("vase", MeshSource::Cylinder { radius: s.uniform(0.05, 0.1)?, height: s.uniform(0.15, 0.35)?, segments: 16 }),
        ("lamp", MeshSource::Cylinder { radius: s.uniform(0.12, 0.2)?, height: s.uniform(1.2, 1.7)?, segments: 16 }),
        ("chair", bx(0.5, 0.5, s.uniform(0.8, 1.0)?)),
    ])
}

fn sample_windows(s: &mut RandomStream, room: &RoomSpec) -> Result<Vec<WindowRect>, SceneError> {
    let count = s.randint(3)? as usize;
    let mut walls: Vec<usize> = (0..4).collect();
    let mut out = Vec::new();
    for _ in 0..count {
        let wall = walls.remove(s.randint(walls.len() as i64)? as usize);
        let len = wall_frame(room, wall).2;
        let (w, h) = (s.uniform(0.8, 1.6)?, s.uniform(0.8, 1.2)?);
        let u0 = s.uniform(0.3, len - w - 0.3)?;
        let v0 = s.uniform(0.8, room.height - h - 0.2)?;
        out.push(WindowRect { wall, u0, v0, u1: u0 + w, v1: v0 + h });
    }
    Ok(out)
}

impl Scene {
    /// Places object `obj` by trying `propose` until it fits without
    /// collisions or box overlap; removes it when every attempt fails.
    fn place(
        &mut self,
        obj: usize,
        attempts: usize,
        mut propose: impl FnMut(&Scene, &mut RandomStream) -> Result<Option<Transform>, SceneError>,
        s: &mut RandomStream,
    ) -> Result<bool, SceneError> {
        for _ in 0..attempts {
            let Some(t) = propose(self, s)? else { continue };
            self.objects[obj].transform = t;
            let wb = self.world_aabb(obj);
            let inside = self.box_world(None, -1e-9).bounds;
            let fits = wb.min.x >= inside.min.x
                && wb.min.y >= inside.min.y
                && wb.max.x <= inside.max.x
                && wb.max.y <= inside.max.y
                && wb.max.z <= inside.max.z;
            let overlap = (0..self.objects.len()).any(|j| {
                j != obj && self.objects[j].collider && {
                    let o = self.world_aabb(j);
                    let lo = wb.min.max(o.min);
                    let hi = wb.max.min(o.max);
                    lo.x < hi.x - 1e-9 && lo.y < hi.y - 1e-9 && lo.z < hi.z - 1e-9
                }
            });
            if fits && !overlap && self.check_collision(obj).is_empty() {
                return Ok(true);
            }
        }
        self.objects.remove(obj);
        Ok(false)
    }
}

/// Samples a furnished room with cameras. Deterministic in `seed`.
pub fn sample_room(seed: u64, params: &RoomParams) -> Result<Scene, SceneError> {
    let root = RandomStream::new(seed);
    let mut s = root.split("room");
    let mut room = RoomSpec {
        width: s.uniform(3.5, 6.0)?,
        depth: s.uniform(3.0, 5.0)?,
        height: s.uniform(2.4, 3.0)?,
        quad_size: params.quad_size,
        windows: Vec::new(),
    };
    room.windows = sample_windows(&mut root.split("windows"), &room)?;
    let mut sc = Scene::new(seed);
    sc.room = Some(room.clone());
    let mut ms = root.split("materials");
    let floor_mat = MaterialRef { sampler: params.material_sampler.clone(), seed: ms.next_u64(), displacement: 1.0 };
    let wall_mat = MaterialRef { sampler: params.material_sampler.clone(), seed: ms.next_u64(), displacement: 1.0 };
    for p in 0..6 {
        let material = match p {
            FLOOR => Some(floor_mat.clone()),
            CEILING => None,
            _ => Some(wall_mat.clone()),
        };
        let m = sc.add_mesh(MeshSource::RoomPanel { room: room.clone(), panel: p, material: material.clone() })?;
        let i = sc.add_object(m, Transform::default(), &["room"]);
        sc.objects[i].collider = false;
        sc.objects[i].material = material;
    }
    let mut fs = root.split("furniture");
    let items = furniture(&mut fs)?;
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (tag, src) in items {
        let count = if tag == "chair" { 2 + fs.randint(3)? as usize } else { 1 };
        let mesh = sc.add_mesh(src)?;
        for _ in 0..count {
            let obj = sc.add_object(mesh, Transform::default(), &[tag]);
            sc.objects[obj].material = Some(MaterialRef { sampler: params.material_sampler.clone(), seed: fs.next_u64(), displacement: 0.0 });
            let room_c = room.clone();
            let table = ids.get("table").copied();
            let sofa = ids.get("sofa").copied();
            let ok = sc.place(
                obj,
                params.placement_attempts,
                |sc, s| {
                    let (w, d) = (room_c.width, room_c.depth);
                    let free_pos = |s: &mut RandomStream| -> Result<Vec3, SceneError> {
                        Ok(Vec3::new(s.uniform(0.5, w - 0.5)?, s.uniform(0.5, d - 0.5)?, 0.0))
                    };
                    Ok(match tag {
                        "sofa" | "shelf" | "lamp" => {
                            let wall = s.randint(4)? as usize;
                            let (origin, run, len, _) = wall_frame(&room_c, wall);
                            let mut probe = sc.clone();
                            probe.objects[obj].transform.translation = origin + run * s.uniform(0.6, len - 0.6)?;
                            probe.align(obj, &Relation::BackTo { wall }, 0.0).ok()
                        }
                        "table" => match sofa {
                            Some(sofa) => {
                                let side = if s.randint(2)? == 0 { Side::Left } else { Side::Right };
                                let mut probe = sc.clone();
                                probe.objects[obj].transform = sc.objects[sofa].transform;
                                probe.align(obj, &Relation::SideOf { target: sofa, side }, s.uniform(0.05, 0.3)?).ok()
                            }
                            None => Some(Transform::new(free_pos(s)?, 0.0, 1.0)),
                        },
                        "vase" => match table {
                            Some(table) => {
                                let mut probe = sc.clone();
                                let tb = sc.world_aabb(table);
                                let c = tb.center();
                                probe.objects[obj].transform.translation = Vec3::new(c.x, c.y, 0.0);
                                probe.align(obj, &Relation::OnTopOf { target: table }, 0.0).ok()
                            }
                            None => None,
                        },
                        _ => {
                            let rot = std::f64::consts::FRAC_PI_2 * s.randint(4)? as f64;
                            Some(Transform::new(free_pos(s)?, rot, 1.0))
                        }
                    })
                },
                &mut fs,
            )?;
            if ok {
                ids.entry(tag).or_insert(sc.objects.len() - 1);
            }
        }
    }
    let world = sc.box_world(None, 0.3);
    let cam_box = Aabb::new(
        Vec3::new(world.bounds.min.x, world.bounds.min.y, 0.8),
        Vec3::new(world.bounds.max.x, world.bounds.max.y, (room.height - 0.4).max(1.0)),
    );
    sc.cameras = random_cameras(&mut root.split("cameras"), &cam_box, params.cameras, None, &world, params.fov_y, params.resolution)?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_round_trip() {
        let t = Transform::new(Vec3::new(1.0, -2.0, 0.5), 0.7, 1.5);
        let p = Vec3::new(0.3, 0.2, -0.1);
        assert!(t.unapply(t.apply(p)).distance(p) < 1e-12);
    }

    #[test]
    fn touching_triangles_do_not_intersect() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let b = [Vec3::new(0.2, 0.2, 0.0), Vec3::new(0.3, 0.2, 1.0), Vec3::new(0.2, 0.3, 1.0)];
        assert!(!tri_tri_intersect(&a, &b));
        let c = [Vec3::new(0.2, 0.2, -0.5), Vec3::new(0.3, 0.2, 1.0), Vec3::new(0.2, 0.3, 1.0)];
        assert!(tri_tri_intersect(&a, &c));
    }

    #[test]
    fn coplanar_rules() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let same = [Vec3::new(0.1, 0.1, 0.0), Vec3::new(1.1, 0.1, 0.0), Vec3::new(0.1, 1.1, 0.0)];
        let flipped = [same[0], same[2], same[1]];
        assert!(tri_tri_intersect(&a, &same));
        assert!(!tri_tri_intersect(&a, &flipped));
    }
}
