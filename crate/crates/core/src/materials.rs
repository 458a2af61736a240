//! Material library: six base materials, three shapes, four masks, the
//! `apply_shape` and `layer` combinators, and the sampler library built on
//! them.
//!
//! Materials take a `vector` (Vec3) input and expose `surface` (Color),
//! `roughness` (Float in [0, 1]), `displacement` (Float) and `volume`
//! (reserved, constant zero). Shapes take `vector` and expose `mask`,
//! `cell_id` and `cell_uv`. Masks take `vector` (edge wear also reads a
//! `curvature` field) and expose `mask` in [0, 1].

use crate::ir::{BinOp, Graph, GraphBuilder, GraphError, Operand, OutRef, Value, ValueKind};
use crate::noise::hsv_to_rgb;
use crate::sampler::{Args, Expr, ParamDist, SValue, SamplerCall, SamplerFn, SamplerLibrary, Step};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("unknown param `{param}` for `{material}`")]
    UnknownParam { material: String, param: String },
    #[error("param `{param}` = {value} outside [{lo}, {hi}]")]
    OutOfRangeParam { param: String, value: f64, lo: f64, hi: f64 },
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

type R<T> = Result<T, MaterialError>;

/// Documented range and default of one material parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub default: f64,
}

const fn pr(name: &'static str, lo: f64, hi: f64, default: f64) -> ParamRange {
    ParamRange { name, lo, hi, default }
}

pub type Params = BTreeMap<String, f64>;

struct Base {
    name: &'static str,
    params: &'static [ParamRange],
    build: fn(&mut Mb, OutRef, &dyn Fn(&str) -> f64) -> R<[OutRef; 3]>,
}

/// Displacement amplitude bounds: |displacement| ≤ `disp` for every base.
const BASES: [Base; 6] = [
    Base {
        name: "wood",
        params: &[
            pr("ring_freq", 2.0, 40.0, 12.0),
            pr("warp", 0.0, 0.3, 0.08),
            pr("warp_scale", 0.5, 8.0, 3.0),
            pr("light_h", 0.04, 0.12, 0.08),
            pr("light_s", 0.3, 0.7, 0.5),
            pr("light_v", 0.5, 0.9, 0.75),
            pr("dark_h", 0.02, 0.1, 0.06),
            pr("dark_s", 0.5, 0.9, 0.7),
            pr("dark_v", 0.2, 0.5, 0.35),
            pr("roughness", 0.3, 0.9, 0.6),
            pr("disp", 0.0, 0.02, 0.005),
        ],
        build: build_wood,
    },
    Base {
        name: "marble",
        params: &[
            pr("vein_freq", 1.0, 8.0, 3.0),
            pr("turbulence", 0.0, 4.0, 1.5),
            pr("vein_scale", 0.5, 6.0, 2.0),
            pr("sharpness", 1.0, 8.0, 4.0),
            pr("base_h", 0.0, 1.0, 0.1),
            pr("base_s", 0.0, 0.2, 0.05),
            pr("base_v", 0.7, 0.95, 0.9),
            pr("vein_h", 0.0, 1.0, 0.6),
            pr("vein_s", 0.0, 0.4, 0.1),
            pr("vein_v", 0.1, 0.5, 0.3),
            pr("roughness", 0.05, 0.4, 0.15),
            pr("disp", 0.0, 0.01, 0.002),
        ],
        build: build_marble,
    },
    Base {
        name: "paint",
        params: &[
            pr("h", 0.0, 1.0, 0.55),
            pr("s", 0.2, 0.9, 0.5),
            pr("v", 0.3, 0.95, 0.7),
            pr("noise_amp", 0.0, 0.2, 0.03),
            pr("noise_scale", 1.0, 32.0, 8.0),
            pr("roughness", 0.2, 0.8, 0.45),
            pr("rough_var", 0.0, 0.2, 0.05),
            pr("disp", 0.0, 0.005, 0.001),
        ],
        build: build_paint,
    },
    Base {
        name: "metal",
        params: &[
            pr("h", 0.0, 1.0, 0.1),
            pr("s", 0.0, 0.3, 0.05),
            pr("v", 0.5, 0.95, 0.8),
            pr("streak_scale", 2.0, 64.0, 24.0),
            pr("streak_strength", 0.0, 0.5, 0.2),
            pr("roughness", 0.02, 0.35, 0.12),
            pr("rough_var", 0.0, 0.15, 0.05),
            pr("disp", 0.0, 0.003, 0.0005),
        ],
        build: build_metal,
    },
    Base {
        name: "fabric",
        params: &[
            pr("threads", 8.0, 128.0, 48.0),
            pr("thread_sharp", 0.05, 1.0, 0.3),
            pr("warp_h", 0.0, 1.0, 0.0),
            pr("warp_s", 0.2, 0.9, 0.6),
            pr("warp_v", 0.2, 0.9, 0.5),
            pr("weft_h", 0.0, 1.0, 0.6),
            pr("weft_s", 0.2, 0.9, 0.5),
            pr("weft_v", 0.2, 0.9, 0.6),
            pr("roughness", 0.6, 1.0, 0.85),
            pr("fuzz", 0.0, 0.3, 0.1),
            pr("disp", 0.0, 0.01, 0.003),
        ],
        build: build_fabric,
    },
    Base {
        name: "concrete",
        params: &[
            pr("agg_scale", 4.0, 40.0, 16.0),
            pr("agg_size", 0.05, 0.5, 0.25),
            pr("mottle_scale", 1.0, 16.0, 4.0),
            pr("mottle", 0.0, 0.3, 0.15),
            pr("base_h", 0.0, 1.0, 0.08),
            pr("base_s", 0.0, 0.15, 0.05),
            pr("base_v", 0.35, 0.75, 0.55),
            pr("agg_h", 0.0, 1.0, 0.1),
            pr("agg_s", 0.0, 0.3, 0.1),
            pr("agg_v", 0.2, 0.9, 0.7),
            pr("roughness", 0.75, 1.0, 0.9),
            pr("disp", 0.0, 0.02, 0.004),
        ],
        build: build_concrete,
    },
];

pub const BASE_NAMES: [&str; 6] = ["wood", "marble", "paint", "metal", "fabric", "concrete"];
pub const SHAPE_NAMES: [&str; 3] = ["bricks", "tiles", "planks"];
pub const MASK_NAMES: [&str; 4] = ["scratches", "cracks", "smudges", "edge_wear"];

/// Meta key carried by crack masks.
pub const CRACK_DEPTH: &str = "crack_depth";

fn base(name: &str) -> R<&'static Base> {
    BASES.iter().find(|b| b.name == name).ok_or_else(|| MaterialError::Unknown { what: "material", name: name.into() })
}

/// Documented parameters of a base material.
pub fn material_params(name: &str) -> R<&'static [ParamRange]> {
    Ok(base(name)?.params)
}

/// Thin builder wrapper for material construction.
struct Mb {
    b: GraphBuilder,
}

impl Mb {
    fn new() -> Self {
        Mb { b: GraphBuilder::new() }
    }

    fn node(&mut self, op: &str, params: Vec<(&str, Value)>, inputs: Vec<(&str, Operand)>) -> R<OutRef> {
        Ok(self.b.add_node(op, params, inputs)?.out())
    }

    fn socket(&mut self, op: &str, params: Vec<(&str, Value)>, inputs: Vec<(&str, Operand)>) -> R<crate::ir::NodeId> {
        Ok(self.b.add_node(op, params, inputs)?)
    }

    fn bin(&mut self, op: BinOp, a: impl Into<Operand>, b: impl Into<Operand>) -> R<OutRef> {
        Ok(self.b.binary(op, a, b)?.out())
    }

    fn add(&mut self, a: impl Into<Operand>, b: impl Into<Operand>) -> R<OutRef> {
        self.bin(BinOp::Add, a, b)
    }

    fn sub(&mut self, a: impl Into<Operand>, b: impl Into<Operand>) -> R<OutRef> {
        self.bin(BinOp::Sub, a, b)
    }

    fn mul(&mut self, a: impl Into<Operand>, b: impl Into<Operand>) -> R<OutRef> {
        self.bin(BinOp::Mul, a, b)
    }

    fn un(&mut self, op: &str, x: impl Into<Operand>) -> R<OutRef> {
        self.node(op, vec![], vec![("x", x.into())])
    }

    fn mix(&mut self, a: impl Into<Operand>, b: impl Into<Operand>, t: impl Into<Operand>) -> R<OutRef> {
        self.node("mix", vec![], vec![("a", a.into()), ("b", b.into()), ("t", t.into())])
    }

    fn clamp01(&mut self, x: impl Into<Operand>) -> R<OutRef> {
        self.node("clamp", vec![("lo", 0.0.into()), ("hi", 1.0.into())], vec![("x", x.into())])
    }

    fn fbm(&mut self, p: &OutRef, frequency: f64, octaves: i64) -> R<OutRef> {
        self.node(
            "fbm",
            vec![("frequency", frequency.into()), ("octaves", octaves.into())],
            vec![("p", p.into())],
        )
    }

    fn xyz(&mut self, p: &OutRef) -> R<(OutRef, OutRef, OutRef)> {
        let s = self.socket("separate_xyz", vec![], vec![("v", p.into())])?;
        Ok((s.socket("x"), s.socket("y"), s.socket("z")))
    }

    fn sine(&mut self, x: OutRef, freq: f64) -> R<OutRef> {
        let t = self.mul(x, TAU * freq)?;
        self.un("sin", t)
    }

    fn finish_material(mut self, [surface, roughness, displacement]: [OutRef; 3]) -> R<Graph> {
        let volume = self.node("volume_empty", vec![], vec![])?;
        self.b.set_output("surface", surface)?;
        self.b.set_output("roughness", roughness)?;
        self.b.set_output("displacement", displacement)?;
        self.b.set_output("volume", volume)?;
        Ok(self.b.finish())
    }
}

fn hsv(get: &dyn Fn(&str) -> f64, prefix: &str) -> Value {
    let k = |c: &str| if prefix.is_empty() { c.to_string() } else { format!("{prefix}_{c}") };
    Value::Color(hsv_to_rgb(get(&k("h")), get(&k("s")), get(&k("v"))))
}

fn build_wood(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let (x, _, _) = m.xyz(&p)?;
    let w = m.fbm(&p, get("warp_scale"), 4)?;
    let w = m.mul(w, get("warp"))?;
    let t = m.add(x, w)?;
    let s = m.sine(t, get("ring_freq"))?;
    let ring = m.mul(s.clone(), 0.5)?;
    let ring = m.add(ring, 0.5)?;
    let surface = m.mix(hsv(get, "dark"), hsv(get, "light"), ring.clone())?;
    let r = m.mul(ring, -0.1)?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let disp = m.mul(s, get("disp"))?;
    Ok([surface, rough, disp])
}

fn build_marble(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let (x, y, _) = m.xyz(&p)?;
    let hy = m.mul(y, 0.5)?;
    let d = m.add(x, hy)?;
    let d = m.mul(d, TAU * get("vein_freq"))?;
    let turb = m.fbm(&p, get("vein_scale"), 5)?;
    let turb = m.mul(turb, get("turbulence"))?;
    let arg = m.add(d, turb)?;
    let s = m.un("sin", arg)?;
    let a = m.un("abs", s)?;
    let inv = m.sub(1.0, a)?;
    let vein = m.node("pow", vec![], vec![("a", inv.into()), ("b", get("sharpness").into())])?;
    let surface = m.mix(hsv(get, "base"), hsv(get, "vein"), vein.clone())?;
    let r = m.mul(vein.clone(), 0.1)?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let disp = m.mul(vein, -get("disp"))?;
    Ok([surface, rough, disp])
}

fn build_paint(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let n = m.fbm(&p, get("noise_scale"), 4)?;
    let k = m.mul(n.clone(), get("noise_amp"))?;
    let k = m.add(k, 1.0)?;
    let surface = m.mul(hsv(get, ""), k)?;
    let r = m.mul(n.clone(), get("rough_var"))?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let disp = m.mul(n, get("disp") / 1.875)?;
    Ok([surface, rough, disp])
}

fn build_metal(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let (x, y, z) = m.xyz(&p)?;
    let sx = m.mul(x, 2.0)?;
    let sy = m.mul(y, get("streak_scale"))?;
    let q = m.node("combine_xyz", vec![], vec![("x", sx.into()), ("y", sy.into()), ("z", z.into())])?;
    let streak = m.fbm(&q, 1.0, 5)?;
    let k = m.mul(streak.clone(), get("streak_strength"))?;
    let k = m.add(k, 1.0)?;
    let surface = m.mul(hsv(get, ""), k)?;
    let r = m.mul(streak.clone(), get("rough_var"))?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let disp = m.mul(streak, get("disp") / 1.9375)?;
    Ok([surface, rough, disp])
}

fn build_fabric(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let (x, y, _) = m.xyz(&p)?;
    let n = get("threads");
    let k = get("thread_sharp");
    let a = m.sine(x, n)?;
    let b = m.sine(y, n)?;
    let band = |m: &mut Mb, s: OutRef| m.node("smoothstep", vec![("lo", (-k).into()), ("hi", k.into())], vec![("x", s.into())]);
    let wa = band(m, a)?;
    let wb = band(m, b)?;
    let d = m.sub(wa.clone(), wb.clone())?;
    let pattern = m.un("abs", d)?;
    let base = m.mix(hsv(get, "warp"), hsv(get, "weft"), pattern)?;
    let f = m.fbm(&p, n * 0.25, 3)?;
    let fz = m.mul(f.clone(), get("fuzz") * 0.5)?;
    let shade = m.sub(1.0, fz)?;
    let surface = m.mul(base, shade)?;
    let r = m.mul(f, get("fuzz") * 0.25)?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let h = m.add(wa, wb)?;
    let disp = m.mul(h, get("disp") * 0.5)?;
    Ok([surface, rough, disp])
}

fn build_concrete(m: &mut Mb, p: OutRef, get: &dyn Fn(&str) -> f64) -> R<[OutRef; 3]> {
    let scale = get("agg_scale");
    let size = get("agg_size") / scale;
    let v = m.socket("voronoi", vec![("frequency", scale.into())], vec![("p", (&p).into())])?;
    let edge = m.node(
        "smoothstep",
        vec![("lo", (size * 0.8).into()), ("hi", size.into())],
        vec![("x", v.socket("distance").into())],
    )?;
    let agg = m.sub(1.0, edge)?;
    let mot = m.fbm(&p, get("mottle_scale"), 4)?;
    let base = m.mix(hsv(get, "base"), hsv(get, "agg"), agg.clone())?;
    let k = m.mul(mot.clone(), get("mottle"))?;
    let k = m.add(k, 1.0)?;
    let surface = m.mul(base, k)?;
    let ra = m.mul(agg.clone(), -0.1)?;
    let rm = m.mul(mot.clone(), 0.05)?;
    let r = m.add(ra, rm)?;
    let r = m.add(r, get("roughness"))?;
    let rough = m.clamp01(r)?;
    let ha = m.mul(agg, 0.5)?;
    let hm = m.mul(mot, 0.5 / 1.875)?;
    let h = m.add(ha, hm)?;
    let disp = m.mul(h, get("disp"))?;
    Ok([surface, rough, disp])
}

/// Builds base material `name`; missing params take their defaults.
pub fn make_material(name: &str, params: &Params) -> R<Graph> {
    let b = base(name)?;
    for (k, &v) in params {
        let r = b.params.iter().find(|r| r.name == k).ok_or_else(|| MaterialError::UnknownParam {
            material: name.into(),
            param: k.clone(),
        })?;
        if !(v >= r.lo && v <= r.hi) {
            return Err(MaterialError::OutOfRangeParam { param: k.clone(), value: v, lo: r.lo, hi: r.hi });
        }
    }
    let get = |k: &str| -> f64 {
        params
            .get(k)
            .copied()
            .or_else(|| b.params.iter().find(|r| r.name == k).map(|r| r.default))
            .unwrap_or(0.0)
    };
    let mut m = Mb::new();
    let p = m.b.input("vector", ValueKind::Vec3)?;
    let outs = (b.build)(&mut m, p, &get)?;
    m.finish_material(outs)
}

/// Shape `name` ("bricks", "tiles", "planks") over the xy coordinates of
/// `vector`; params are those of the underlying pattern op.
pub fn make_shape(name: &str, params: &BTreeMap<String, Value>) -> R<Graph> {
    let op = match name {
        "bricks" => "brick_grid",
        "tiles" => "tile_grid",
        "planks" => "plank_grid",
        _ => return Err(MaterialError::Unknown { what: "shape", name: name.into() }),
    };
    let mut m = Mb::new();
    let p = m.b.input("vector", ValueKind::Vec3)?;
    let (x, y, _) = m.xyz(&p)?;
    let uv = m.node("combine_xy", vec![], vec![("x", x.into()), ("y", y.into())])?;
    let params: Vec<(&str, Value)> = params.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let s = m.socket(op, params, vec![("uv", uv.into())])?;
    for out in ["mask", "cell_id", "cell_uv"] {
        m.b.set_output(out, s.socket(out))?;
    }
    Ok(m.b.finish())
}

/// Mask `name`. Crack masks accept an extra `depth` param recorded as
/// [`CRACK_DEPTH`] meta; `constant` takes `value`.
pub fn make_mask(name: &str, params: &BTreeMap<String, Value>) -> R<Graph> {
    let mut m = Mb::new();
    let p = m.b.input("vector", ValueKind::Vec3)?;
    let mut params = params.clone();
    let mask = match name {
        "constant" => {
            let v = params.remove("value").and_then(|v| v.as_f64()).unwrap_or(0.0);
            if !(0.0..=1.0).contains(&v) {
                return Err(MaterialError::OutOfRangeParam { param: "value".into(), value: v, lo: 0.0, hi: 1.0 });
            }
            m.node("const", vec![("value", Value::Float(v))], vec![])?
        }
        "cracks" => {
            let depth = params.remove("depth").and_then(|v| v.as_f64()).unwrap_or(0.005);
            m.b.set_meta(CRACK_DEPTH, Value::Float(depth));
            mask_node(&mut m, "cracks", &params, vec![("p", p.into())])?
        }
        "scratches" | "smudges" => mask_node(&mut m, name, &params, vec![("p", p.into())])?,
        "edge_wear" => {
            let c = m.b.input("curvature", ValueKind::Float)?;
            mask_node(&mut m, name, &params, vec![("p", p.into()), ("curvature", c.into())])?
        }
        _ => return Err(MaterialError::Unknown { what: "mask", name: name.into() }),
    };
    let mask = m.clamp01(mask)?;
    m.b.set_output("mask", mask)?;
    Ok(m.b.finish())
}

fn mask_node(m: &mut Mb, op: &str, params: &BTreeMap<String, Value>, inputs: Vec<(&str, Operand)>) -> R<OutRef> {
    let params: Vec<(&str, Value)> = params.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    m.node(op, params, inputs)
}

/// Aux fields a material may read besides `vector`.
pub const AUX_INPUTS: [&str; 1] = ["curvature"];

fn check_inputs(g: &Graph, what: &str) -> R<()> {
    for (name, kind) in g.inputs() {
        let ok = (name == "vector" && kind == ValueKind::Vec3)
            || (AUX_INPUTS.contains(&name.as_str()) && kind == ValueKind::Float);
        if !ok {
            return Err(MaterialError::InterfaceMismatch(format!("{what} input `{name}`: {kind}")));
        }
    }
    Ok(())
}

fn check_outputs(g: &Graph, what: &str, want: &[(&str, ValueKind)]) -> R<()> {
    if g.outputs.len() != want.len() {
        return Err(MaterialError::InterfaceMismatch(format!(
            "{what} has outputs {:?}",
            g.outputs.keys().collect::<Vec<_>>()
        )));
    }
    for (name, kind) in want {
        let got = g
            .output_kind(name)
            .map_err(|e| MaterialError::InterfaceMismatch(format!("{what}: {e}")))?;
        if got != *kind {
            return Err(MaterialError::InterfaceMismatch(format!("{what} output `{name}` is {got}, want {kind}")));
        }
    }
    Ok(())
}

pub const MATERIAL_OUTPUTS: [(&str, ValueKind); 4] = [
    ("surface", ValueKind::Color),
    ("roughness", ValueKind::Float),
    ("displacement", ValueKind::Float),
    ("volume", ValueKind::Float),
];

pub fn check_material(g: &Graph) -> R<()> {
    check_inputs(g, "material")?;
    check_outputs(g, "material", &MATERIAL_OUTPUTS)?;
    let vol = g.output("volume")?;
    if g.nodes[vol.node.index()].op != "volume_empty" {
        return Err(MaterialError::InterfaceMismatch("volume must be the reserved empty slot".into()));
    }
    Ok(())
}

pub fn check_shape(g: &Graph) -> R<()> {
    check_inputs(g, "shape")?;
    check_outputs(
        g,
        "shape",
        &[("mask", ValueKind::Float), ("cell_id", ValueKind::Float), ("cell_uv", ValueKind::Vec2)],
    )
}

pub fn check_mask(g: &Graph) -> R<()> {
    check_inputs(g, "mask")?;
    check_outputs(g, "mask", &[("mask", ValueKind::Float)])
}

fn splice_outputs(b: &mut GraphBuilder, g: &Graph, vector: &OutRef) -> R<BTreeMap<String, OutRef>> {
    let bind = BTreeMap::from([("vector".to_string(), Operand::Out(vector.clone()))]);
    Ok(b.splice(g, &bind)?)
}

/// Per-cell variation settings of [`apply_shape`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellVariation {
    /// Hue and value jitter amplitude and the switch for quarter-turn uv
    /// rotation and per-cell texture offsets. 0 adds no nodes.
    pub amount: f64,
    /// Depth subtracted from the grout displacement.
    pub recess: f64,
}

impl Default for CellVariation {
    fn default() -> Self {
        CellVariation { amount: 0.1, recess: 0.004 }
    }
}

/// Cells of `shape` filled with one of `cells` (picked by cell id), grout
/// filled with `grout`.
pub fn apply_shape(shape: &Graph, cells: &[&Graph], grout: &Graph, var: CellVariation) -> R<Graph> {
    check_shape(shape)?;
    check_material(grout)?;
    if cells.is_empty() {
        return Err(MaterialError::InterfaceMismatch("no cell materials".into()));
    }
    for c in cells {
        check_material(c)?;
    }
    let mut m = Mb::new();
    let p = m.b.input("vector", ValueKind::Vec3)?;
    let s = splice_outputs(&mut m.b, shape, &p)?;
    let (mask, id, cell_uv) = (s["mask"].clone(), s["cell_id"].clone(), s["cell_uv"].clone());
    let hash = |m: &mut Mb, salt: f64| -> R<OutRef> {
        let q = m.node("combine_xyz", vec![], vec![("x", (&id).into()), ("y", salt.into()), ("z", 0.0.into())])?;
        m.node("white_noise", vec![], vec![("p", q.into())])
    };
    let (uv, z) = if var.amount > 0.0 {
        let turns = hash(&mut m, 1.0)?;
        let turns = m.mul(turns, 4.0)?;
        let uv = m.node("rotate_quarter", vec![], vec![("uv", cell_uv.into()), ("turns", turns.into())])?;
        let z = m.mul(id.clone(), 17.0)?;
        (uv, Operand::Out(z))
    } else {
        (cell_uv, Operand::Const(Value::Float(0.0)))
    };
    let sep = m.socket("separate_xy", vec![], vec![("v", uv.into())])?;
    let q = m.node("combine_xyz", vec![], vec![("x", sep.socket("x").into()), ("y", sep.socket("y").into()), ("z", z)])?;
    let mut chosen = splice_outputs(&mut m.b, cells[0], &q)?;
    if cells.len() > 1 {
        let pick = hash(&mut m, 2.0)?;
        let pick = m.mul(pick, cells.len() as f64)?;
        for (i, c) in cells.iter().enumerate().skip(1) {
            let o = splice_outputs(&mut m.b, c, &q)?;
            let sel = m.node("greater_than", vec![], vec![("a", (&pick).into()), ("b", (i as f64 - 0.5).into())])?;
            for ch in ["surface", "roughness", "displacement"] {
                let v = m.mix(chosen[ch].clone(), o[ch].clone(), sel.clone())?;
                chosen.insert(ch.to_string(), v);
            }
        }
    }
    let mut surface = chosen["surface"].clone();
    if var.amount > 0.0 {
        let dh = hash(&mut m, 3.0)?;
        let dh = m.sub(dh, 0.5)?;
        let dh = m.mul(dh, var.amount)?;
        let dv = hash(&mut m, 4.0)?;
        let dv = m.sub(dv, 0.5)?;
        let dv = m.mul(dv, var.amount)?;
        surface = m.node(
            "hsv_jitter",
            vec![],
            vec![("c", surface.into()), ("dh", dh.into()), ("ds", 0.0.into()), ("dv", dv.into())],
        )?;
    }
    let g = splice_outputs(&mut m.b, grout, &p)?;
    let out_surface = m.mix(g["surface"].clone(), surface, mask.clone())?;
    let out_rough = m.mix(g["roughness"].clone(), chosen["roughness"].clone(), mask.clone())?;
    let recessed = m.sub(g["displacement"].clone(), var.recess)?;
    let out_disp = m.mix(recessed, chosen["displacement"].clone(), mask)?;
    m.finish_material([out_surface, out_rough, out_disp])
}

/// Every channel `mix(base, top, mask)`; crack masks also carve
/// `crack_depth · mask` out of the displacement.
pub fn layer(base_m: &Graph, top: &Graph, mask: &Graph) -> R<Graph> {
    check_material(base_m)?;
    check_material(top)?;
    check_mask(mask)?;
    let mut m = Mb::new();
    let p = m.b.input("vector", ValueKind::Vec3)?;
    let a = splice_outputs(&mut m.b, base_m, &p)?;
    let b = splice_outputs(&mut m.b, top, &p)?;
    let k = splice_outputs(&mut m.b, mask, &p)?["mask"].clone();
    let surface = m.mix(a["surface"].clone(), b["surface"].clone(), k.clone())?;
    let rough = m.mix(a["roughness"].clone(), b["roughness"].clone(), k.clone())?;
    let mut disp = m.mix(a["displacement"].clone(), b["displacement"].clone(), k.clone())?;
    if let Some(depth) = mask.meta.get(CRACK_DEPTH).and_then(Value::as_f64) {
        let carve = m.mul(k, depth)?;
        disp = m.sub(disp, carve)?;
    }
    m.finish_material([surface, rough, disp])
}

// Generators for the sampler library.

fn arg_f64(a: &Args, k: &str) -> Result<f64, String> {
    a.get(k).and_then(SValue::as_f64).ok_or_else(|| format!("missing number `{k}`"))
}

fn arg_graph<'a>(a: &'a Args, k: &str) -> Result<&'a Arc<Graph>, String> {
    a.get(k).and_then(SValue::as_graph).ok_or_else(|| format!("missing graph `{k}`"))
}

fn arg_str<'a>(a: &'a Args, k: &str) -> Result<&'a str, String> {
    a.get(k).and_then(SValue::as_str).ok_or_else(|| format!("missing string `{k}`"))
}

fn rest_values(a: &Args, skip: &str) -> BTreeMap<String, Value> {
    a.iter()
        .filter(|(k, _)| k.as_str() != skip)
        .filter_map(|(k, v)| match v {
            SValue::Float(x) => Some((k.clone(), Value::Float(*x))),
            SValue::Int(i) => Some((k.clone(), Value::Int(*i))),
            _ => None,
        })
        .collect()
}

fn graph_value(r: R<Graph>) -> Result<SValue, String> {
    r.map(|g| SValue::Graph(Arc::new(g))).map_err(|e| e.to_string())
}

fn gen_material(a: &Args) -> Result<SValue, String> {
    let name = arg_str(a, "material")?;
    let params = rest_values(a, "material").into_iter().filter_map(|(k, v)| Some((k, v.as_f64()?))).collect();
    graph_value(make_material(name, &params))
}

fn gen_shape(a: &Args) -> Result<SValue, String> {
    graph_value(make_shape(arg_str(a, "shape")?, &rest_values(a, "shape")))
}

fn gen_mask(a: &Args) -> Result<SValue, String> {
    graph_value(make_mask(arg_str(a, "mask")?, &rest_values(a, "mask")))
}

fn gen_apply_shape(a: &Args) -> Result<SValue, String> {
    let var = CellVariation { amount: arg_f64(a, "variation")?, recess: arg_f64(a, "recess")? };
    graph_value(apply_shape(arg_graph(a, "shape")?, &[arg_graph(a, "cell")?], arg_graph(a, "grout")?, var))
}

fn gen_layer(a: &Args) -> Result<SValue, String> {
    graph_value(layer(arg_graph(a, "base")?, arg_graph(a, "top")?, arg_graph(a, "mask")?))
}

fn uniform_draws(params: &[(&str, f64, f64)]) -> Vec<Step> {
    params.iter().map(|&(n, lo, hi)| Step::draw(n, ParamDist::uniform(lo, hi))).collect()
}

fn int_options(name: &str, xs: &[i64]) -> Step {
    Step::draw(
        name,
        ParamDist::Discrete { options: xs.iter().map(|&i| SValue::Int(i)).collect(), weights: vec![1.0; xs.len()] },
    )
}

fn call_with(generator: &str, fixed: (&str, &str), names: &[&str]) -> Step {
    let mut args = vec![(fixed.0, Expr::str(fixed.1))];
    args.extend(names.iter().map(|n| (*n, Expr::var(n))));
    Step::call("out", generator, args)
}

fn uniform_choice(name: &str, samplers: &[String]) -> Step {
    Step::choice(name, vec![1.0; samplers.len()], samplers.iter().map(|s| SamplerCall::new(s)).collect())
}

/// Default sampler ranges cover the middle half of each documented range;
/// `wide` samplers cover all of it.
fn base_sampler(b: &Base, wide: bool) -> SamplerFn {
    let mut steps = Vec::new();
    for r in b.params {
        let (lo, hi) = if wide { (r.lo, r.hi) } else { (r.lo + 0.25 * (r.hi - r.lo), r.lo + 0.75 * (r.hi - r.lo)) };
        steps.push(Step::draw(r.name, ParamDist::uniform(lo, hi)));
    }
    let names: Vec<&str> = b.params.iter().map(|r| r.name).collect();
    steps.push(call_with("make_material", ("material", b.name), &names));
    let id = if wide { format!("{}_wide", b.name) } else { b.name.to_string() };
    SamplerFn::new(&id, steps, Expr::var("out"))
}

fn shape_sampler(name: &str) -> SamplerFn {
    let mut steps = match name {
        "bricks" => {
            let mut s = vec![int_options("rows", &[4, 6, 8, 10, 12]), int_options("cols", &[2, 3, 4, 6])];
            s.extend(uniform_draws(&[("mortar_width", 0.005, 0.03), ("row_offset", 0.25, 0.5)]));
            s
        }
        "tiles" => {
            let mut s = vec![int_options("nx", &[2, 3, 4, 6, 8]), int_options("ny", &[2, 3, 4, 6, 8])];
            s.extend(uniform_draws(&[("grout", 0.005, 0.04)]));
            s
        }
        _ => uniform_draws(&[("plank_width", 0.08, 0.25), ("length_mean", 0.3, 0.9), ("gap", 0.002, 0.01)]),
    };
    let names: Vec<String> = steps.iter().map(|s| s.name().to_string()).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    steps.push(call_with("make_shape", ("shape", name), &refs));
    SamplerFn::new(&format!("shape_{name}"), steps, Expr::var("out"))
}

fn mask_sampler(name: &str) -> SamplerFn {
    let mut steps = uniform_draws(match name {
        "scratches" => &[("density", 0.5, 4.0), ("length", 0.05, 0.3), ("width", 0.001, 0.006)],
        "cracks" => &[("scale", 2.0, 8.0), ("width", 0.01, 0.05), ("depth", 0.002, 0.01)],
        "smudges" => &[("scale", 1.0, 4.0), ("coverage", 0.1, 0.6)],
        _ => &[("intensity", 0.5, 3.0), ("noise_scale", 4.0, 16.0)],
    });
    let names: Vec<String> = steps.iter().map(|s| s.name().to_string()).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    steps.push(call_with("make_mask", ("mask", name), &refs));
    SamplerFn::new(&format!("mask_{name}"), steps, Expr::var("out"))
}

/// Top layers used by `layered`.
pub const TOP_NAMES: [&str; 3] = ["paint", "metal", "fabric"];
/// Grout fillers used by `shaped`.
pub const GROUT_NAMES: [&str; 2] = ["concrete", "paint"];

/// The shipped sampler library.
///
/// * `<base>` / `<base>_wide`: one base material with drawn params.
/// * `base`, `base_wide`: uniform choice among the six bases.
/// * `shape_<s>`, `mask_<m>`: shape and mask graphs.
/// * `shaped`: a shape whose cells use `base` and whose grout uses `grout`.
/// * `layered`: `base` or `shaped`, under a `top` coat through a mask.
/// * `composed`: `base`, `shaped` or `layered` with weights 1 : 1 : 1.
pub fn library() -> SamplerLibrary {
    let mut lib = SamplerLibrary::new();
    lib.add_generator("make_material", gen_material);
    lib.add_generator("make_shape", gen_shape);
    lib.add_generator("make_mask", gen_mask);
    lib.add_generator("apply_shape", gen_apply_shape);
    lib.add_generator("layer", gen_layer);
    for b in &BASES {
        lib.add_sampler(base_sampler(b, false));
        lib.add_sampler(base_sampler(b, true));
    }
    let names = |xs: &[&str], suffix: &str| -> Vec<String> { xs.iter().map(|x| format!("{x}{suffix}")).collect() };
    lib.add_sampler(SamplerFn::new("base", vec![uniform_choice("material", &names(&BASE_NAMES, ""))], Expr::var("material")));
    lib.add_sampler(SamplerFn::new(
        "base_wide",
        vec![uniform_choice("material", &names(&BASE_NAMES, "_wide"))],
        Expr::var("material"),
    ));
    for s in SHAPE_NAMES {
        lib.add_sampler(shape_sampler(s));
    }
    for k in MASK_NAMES {
        lib.add_sampler(mask_sampler(k));
    }
    lib.add_sampler(SamplerFn::new("grout", vec![uniform_choice("material", &names(&GROUT_NAMES, ""))], Expr::var("material")));
    lib.add_sampler(SamplerFn::new("top", vec![uniform_choice("material", &names(&TOP_NAMES, ""))], Expr::var("material")));
    let shape_ids: Vec<String> = SHAPE_NAMES.iter().map(|s| format!("shape_{s}")).collect();
    let mask_ids: Vec<String> = MASK_NAMES.iter().map(|s| format!("mask_{s}")).collect();
    lib.add_sampler(SamplerFn::new(
        "shaped",
        vec![
            uniform_choice("shape", &shape_ids),
            Step::invoke("cell", SamplerCall::new("base")),
            Step::invoke("grout", SamplerCall::new("grout")),
            Step::draw("variation", ParamDist::uniform(0.0, 0.15)),
            Step::draw("recess", ParamDist::uniform(0.002, 0.01)),
            Step::call(
                "out",
                "apply_shape",
                vec![
                    ("shape", Expr::var("shape")),
                    ("cell", Expr::var("cell")),
                    ("grout", Expr::var("grout")),
                    ("variation", Expr::var("variation")),
                    ("recess", Expr::var("recess")),
                ],
            ),
        ],
        Expr::var("out"),
    ));
    lib.add_sampler(SamplerFn::new(
        "layered",
        vec![
            uniform_choice("under", &["base".to_string(), "shaped".to_string()]),
            Step::invoke("top", SamplerCall::new("top")),
            uniform_choice("mask", &mask_ids),
            Step::call(
                "out",
                "layer",
                vec![("base", Expr::var("under")), ("top", Expr::var("top")), ("mask", Expr::var("mask"))],
            ),
        ],
        Expr::var("out"),
    ));
    lib.add_sampler(SamplerFn::new(
        "composed",
        vec![Step::choice(
            "kind",
            vec![1.0, 1.0, 1.0],
            vec![SamplerCall::new("base"), SamplerCall::new("shaped"), SamplerCall::new("layered")],
        )],
        Expr::var("kind"),
    ));
    lib
}
