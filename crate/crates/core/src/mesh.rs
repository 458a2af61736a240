//! Indexed polygon meshes: generators, normals, curvature and displacement.

use crate::eval::{self, EvalError, FieldBuffer, SampleBatch};
use crate::ir::{Graph, ValueKind};
use crate::math::{hash_words, Aabb, Vec3};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// Polygons as vertex indices, counter-clockwise seen from outside.
    pub faces: Vec<Vec<u32>>,
    /// One uv per face corner, in face order.
    pub uv: Vec<[f64; 2]>,
    /// Unit per-vertex normals.
    pub normals: Vec<Vec3>,
    /// Named per-vertex scalars.
    pub attributes: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("face {0} has zero area")]
    DegenerateFace(usize),
    #[error("face {face} references vertex {index} out of range")]
    IndexOutOfRange { face: usize, index: u32 },
    #[error("edge ({0}, {1}) is shared by more than two faces")]
    NonManifoldEdge(u32, u32),
    #[error("displacement field `{0}` must be a Float output")]
    NotScalar(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_quad_only(&self) -> bool {
        self.faces.iter().all(|f| f.len() == 4)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    pub fn check_indices(&self) -> Result<(), MeshError> {
        let n = self.vertices.len() as u32;
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange { face: fi, index });
            }
        }
        Ok(())
    }

    /// Newell vector of a face: normal times twice the area.
    pub fn face_area_vector(&self, f: usize) -> Vec3 {
        let face = &self.faces[f];
        let mut n = Vec3::ZERO;
        for k in 0..face.len() {
            let a = self.vertices[face[k] as usize];
            let b = self.vertices[face[(k + 1) % face.len()] as usize];
            n += Vec3::new((a.y - b.y) * (a.z + b.z), (a.z - b.z) * (a.x + b.x), (a.x - b.x) * (a.y + b.y));
        }
        n
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_area_vector(f).length()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_area_vector(f).normalize()
    }

    /// Fan triangulation of every face.
    pub fn triangles(&self) -> Vec<[u32; 3]> {
        let mut out = Vec::with_capacity(self.faces.len() * 2);
        for f in &self.faces {
            for k in 1..f.len().saturating_sub(1) {
                out.push([f[0], f[k], f[k + 1]]);
            }
        }
        out
    }

    /// Per-vertex uv: mean of the corner uvs that touch each vertex.
    pub fn vertex_uv(&self) -> Vec<[f64; 2]> {
        let mut acc = vec![([0.0, 0.0], 0usize); self.vertices.len()];
        if self.uv.is_empty() {
            return vec![[0.0, 0.0]; self.vertices.len()];
        }
        let mut c = 0;
        for f in &self.faces {
            for &v in f {
                let e = &mut acc[v as usize];
                e.0[0] += self.uv[c][0];
                e.0[1] += self.uv[c][1];
                e.1 += 1;
                c += 1;
            }
        }
        acc.into_iter()
            .map(|(s, n)| if n == 0 { [0.0, 0.0] } else { [s[0] / n as f64, s[1] / n as f64] })
            .collect()
    }

    /// Structural hash of geometry and topology.
    pub fn content_hash(&self) -> u64 {
        let mut words = Vec::with_capacity(self.vertices.len() * 3 + self.faces.len() * 5);
        words.push(self.vertices.len() as u64);
        for v in &self.vertices {
            words.extend_from_slice(&[v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]);
        }
        for f in &self.faces {
            words.push(u64::MAX);
            words.extend(f.iter().map(|&i| u64::from(i)));
        }
        hash_words(0x4D45_5348, &words)
    }

    /// Area-weighted vertex normals.
    pub fn compute_normals(mut self) -> Result<Mesh, MeshError> {
        self.check_indices()?;
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for fi in 0..self.faces.len() {
            let n = self.face_area_vector(fi);
            if n.length() == 0.0 {
                return Err(MeshError::DegenerateFace(fi));
            }
            for &v in &self.faces[fi] {
                acc[v as usize] += n;
            }
        }
        self.normals = acc.into_iter().map(Vec3::normalize).collect();
        Ok(self)
    }

    /// Adds a `curvature` attribute: per vertex, the mean over incident edges
    /// of the angle between the two adjacent face normals (0 on boundary
    /// edges).
    pub fn compute_curvature(mut self) -> Result<Mesh, MeshError> {
        self.check_indices()?;
        let mut edge_faces: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        let mut normals = Vec::with_capacity(self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            let n = self.face_area_vector(fi);
            if n.length() == 0.0 {
                return Err(MeshError::DegenerateFace(fi));
            }
            normals.push(n.normalize());
            for k in 0..f.len() {
                let (a, b) = (f[k], f[(k + 1) % f.len()]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut sum = vec![0.0; self.vertices.len()];
        let mut count = vec![0usize; self.vertices.len()];
        let mut edges: Vec<_> = edge_faces.into_iter().collect();
        edges.sort_unstable_by_key(|e| e.0);
        for ((a, b), fs) in edges {
            let angle = match fs.as_slice() {
                [_] => 0.0,
                [f, g] => {
                    let (n1, n2) = (normals[*f], normals[*g]);
                    libm::atan2(n1.cross(n2).length(), n1.dot(n2))
                }
                _ => return Err(MeshError::NonManifoldEdge(a, b)),
            };
            for v in [a, b] {
                sum[v as usize] += angle;
                count[v as usize] += 1;
            }
        }
        let curv = sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect();
        self.attributes.insert("curvature".into(), curv);
        Ok(self)
    }

    /// Batch at the vertices, with `uv` and every attribute as aux fields.
    pub fn vertex_batch(&self) -> SampleBatch {
        let uv = self.vertex_uv().into_iter().flatten().collect();
        let mut b = SampleBatch::new(self.vertices.iter().map(|v| v.to_array()).collect())
            .with_aux("uv", FieldBuffer { kind: ValueKind::Vec2, data: uv });
        for (k, a) in &self.attributes {
            b = b.with_aux(k, FieldBuffer { kind: ValueKind::Float, data: a.clone() });
        }
        b
    }

    /// Moves each vertex along its normal by `amplitude * field(vertex)` and
    /// recomputes normals.
    pub fn displace(&self, graph: &Graph, output: &str, amplitude: f64) -> Result<Mesh, MeshError> {
        match graph.output_kind(output) {
            Ok(ValueKind::Float) | Ok(ValueKind::Int) => {}
            _ => return Err(MeshError::NotScalar(output.to_string())),
        }
        let mut m = self.clone();
        if m.normals.len() != m.vertices.len() {
            m = m.compute_normals()?;
        }
        let field = eval::evaluate(graph, output, &m.vertex_batch())?;
        if amplitude != 0.0 {
            for (i, v) in m.vertices.iter_mut().enumerate() {
                *v = *v + m.normals[i] * (amplitude * field.data[i]);
            }
        }
        m.compute_normals()
    }

    /// Applies `p -> p * scale` rotated by `rz` about z, then translated.
    pub fn transformed(&self, t: &crate::scene::Transform) -> Mesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v = t.apply(*v);
        }
        for n in &mut m.normals {
            *n = t.apply_dir(*n);
        }
        m
    }

    /// Appends another mesh's geometry.
    pub fn append(&mut self, o: &Mesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&o.vertices);
        self.faces.extend(o.faces.iter().map(|f| f.iter().map(|&i| i + base).collect()));
        self.uv.extend_from_slice(&o.uv);
        self.normals.extend_from_slice(&o.normals);
    }
}

/// `nx × ny` quads over `[0, size]²` at z = 0, uv = position / size.
pub fn make_grid(nx: usize, ny: usize, size: f64) -> Mesh {
    make_rect_grid(nx, ny, size, size)
}

pub fn make_rect_grid(nx: usize, ny: usize, sx: f64, sy: f64) -> Mesh {
    let (nx, ny) = (nx.max(1), ny.max(1));
    let mut m = Mesh::default();
    for j in 0..=ny {
        for i in 0..=nx {
            m.vertices.push(Vec3::new(sx * i as f64 / nx as f64, sy * j as f64 / ny as f64, 0.0));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    for j in 0..ny {
        for i in 0..nx {
            let f = vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            for &v in &f {
                let p = m.vertices[v as usize];
                m.uv.push([p.x / sx, p.y / sy]);
            }
            m.faces.push(f);
        }
    }
    m.normals = vec![Vec3::Z; m.vertices.len()];
    m
}

/// Axis-aligned box `[min, max]` with `n` quads per edge on every side,
/// vertices welded along the creases.
pub fn make_box(min: Vec3, max: Vec3, n: usize) -> Mesh {
    let n = n.max(1);
    let mut m = Mesh::default();
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let coord = |lo: f64, hi: f64, k: usize| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 };
    // (normal axis, side, u axis, v axis) with u × v pointing outward.
    let sides: [(usize, bool, usize, usize); 6] =
        [(0, true, 1, 2), (0, false, 2, 1), (1, true, 2, 0), (1, false, 0, 2), (2, true, 0, 1), (2, false, 1, 0)];
    for (axis, hi_side, ua, va) in sides {
        let mut grid = vec![0u32; (n + 1) * (n + 1)];
        for j in 0..=n {
            for i in 0..=n {
                let mut p = [0.0; 3];
                p[axis] = if hi_side { max[axis] } else { min[axis] };
                p[ua] = coord(min[ua], max[ua], i);
                p[va] = coord(min[va], max[va], j);
                let key = [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()];
                let id = *index.entry(key).or_insert_with(|| {
                    m.vertices.push(Vec3::from_array(p));
                    (m.vertices.len() - 1) as u32
                });
                grid[j * (n + 1) + i] = id;
            }
        }
        for j in 0..n {
            for i in 0..n {
                let g = |i: usize, j: usize| grid[j * (n + 1) + i];
                m.faces.push(vec![g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)]);
                for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                    m.uv.push([a as f64 / n as f64, b as f64 / n as f64]);
                }
            }
        }
    }
    m.compute_normals().expect("box faces have area")
}

/// Closed cylinder about +z from z = 0 to `height`: `segments` side quads
/// and one polygon per cap.
pub fn make_cylinder(radius: f64, height: f64, segments: usize) -> Mesh {
    let n = segments.max(3);
    let mut m = Mesh::default();
    for z in [0.0, height] {
        for k in 0..n {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            m.vertices.push(Vec3::new(radius * libm::cos(a), radius * libm::sin(a), z));
        }
    }
    let top = n as u32;
    for k in 0..n as u32 {
        let k1 = (k + 1) % n as u32;
        m.faces.push(vec![k, k1, top + k1, top + k]);
        let (u0, u1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
        m.uv.extend_from_slice(&[[u0, 0.0], [u1, 0.0], [u1, 1.0], [u0, 1.0]]);
    }
    let cap_uv = |i: u32, m: &Mesh| {
        let p = m.vertices[i as usize];
        [0.5 + 0.5 * p.x / radius, 0.5 + 0.5 * p.y / radius]
    };
    let bottom: Vec<u32> = (0..n as u32).rev().collect();
    let upper: Vec<u32> = (0..n as u32).map(|k| top + k).collect();
    for f in [bottom, upper] {
        for &i in &f {
            let uv = cap_uv(i, &m);
            m.uv.push(uv);
        }
        m.faces.push(f);
    }
    m.compute_normals().expect("cylinder faces have area")
}

/// Unit cube centred at the origin.
pub fn make_cube(n: usize) -> Mesh {
    make_box(Vec3::splat(-0.5), Vec3::splat(0.5), n)
}

/// Geodesic sphere: icosahedron subdivided `levels` times (20·4^levels triangles).
pub fn make_icosphere(levels: usize, radius: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut m = Mesh {
        vertices: verts.iter().map(|&v| v * radius).collect(),
        faces: faces.iter().map(|f| f.to_vec()).collect(),
        ..Default::default()
    };
    for f in &m.faces {
        for &v in f {
            let p = verts[v as usize];
            let u = 0.5 + libm::atan2(p.y, p.x) / (2.0 * std::f64::consts::PI);
            let w = 0.5 + libm::asin(p.z.clamp(-1.0, 1.0)) / std::f64::consts::PI;
            m.uv.push([u, w]);
        }
    }
    m.compute_normals().expect("icosphere faces have area")
}
