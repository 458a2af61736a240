//! Static signatures for every primitive op.
//!
//! Socket names never depend on params: an op that would need a different
//! socket set is a different op (one noise function per noise type, one grid
//! function per shape family).

use crate::ir::ValueKind;
use serde::Serialize;

/// Accepted kinds for an input socket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SocketKind {
    /// Exactly this kind; Int promotes into Float, and scalars broadcast into
    /// vector kinds.
    Fixed(ValueKind),
    /// Any numeric kind; the op's result kind is unified across generic sockets.
    Generic,
    /// Any kind at all (cast input).
    Any,
}

/// How an output socket's kind is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutKind {
    Fixed(ValueKind),
    /// Unify generic inputs through the promotion lattice.
    Unify,
    /// As `Unify`, with Int promoted to Float.
    UnifyFloat,
    /// Named by a `Str` param holding a kind name.
    FromParam(&'static str),
    /// Kind of the `value` param.
    FromConst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ParamDefault {
    Required,
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(&'static str),
}

/// Param type tag; `Any` accepts every tagged value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamKind {
    Float,
    Int,
    Bool,
    Str,
    Any,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SocketSig {
    pub name: &'static str,
    pub kind: SocketKind,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSig {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: ParamDefault,
    /// Inclusive legal range for numeric params.
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OutputSig {
    pub name: &'static str,
    pub kind: OutKind,
}

/// Coarse grouping used by the transpiler and the `ops list` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OpClass {
    Source,
    Arithmetic,
    Math,
    Vector,
    Noise,
    Color,
    Pattern,
    Mask,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpSignature {
    pub name: &'static str,
    pub class: OpClass,
    pub inputs: &'static [SocketSig],
    pub params: &'static [ParamSig],
    pub outputs: &'static [OutputSig],
    pub doc: &'static str,
}

impl OpSignature {
    pub fn input(&self, name: &str) -> Option<&SocketSig> {
        self.inputs.iter().find(|s| s.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSig> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputSig> {
        self.outputs.iter().find(|o| o.name == name)
    }
}

const POS: Option<(f64, f64)> = Some((1e-12, 1e12));
const UNIT: Option<(f64, f64)> = Some((0.0, 1.0));
const ANY_F: Option<(f64, f64)> = Some((-1e12, 1e12));

const fn sock(name: &'static str, kind: SocketKind) -> SocketSig {
    SocketSig { name, kind }
}
const fn fixed(name: &'static str, k: ValueKind) -> SocketSig {
    sock(name, SocketKind::Fixed(k))
}
const fn generic(name: &'static str) -> SocketSig {
    sock(name, SocketKind::Generic)
}
const fn pf(name: &'static str, d: f64, range: Option<(f64, f64)>) -> ParamSig {
    ParamSig { name, kind: ParamKind::Float, default: ParamDefault::Float(d), range }
}
const fn pi(name: &'static str, d: i64, lo: i64, hi: i64) -> ParamSig {
    ParamSig {
        name,
        kind: ParamKind::Int,
        default: ParamDefault::Int(d),
        range: Some((lo as f64, hi as f64)),
    }
}
const fn out(name: &'static str, kind: OutKind) -> OutputSig {
    OutputSig { name, kind }
}
const fn out_f(name: &'static str) -> OutputSig {
    out(name, OutKind::Fixed(ValueKind::Float))
}

use OpClass::*;
use ValueKind::{Color as C, Float as F, Vec2 as V2, Vec3 as V3};

const AB: &[SocketSig] = &[generic("a"), generic("b")];
const AB_F: &[SocketSig] = &[fixed("a", F), fixed("b", F)];
const X: &[SocketSig] = &[generic("x")];
const P: &[SocketSig] = &[fixed("p", V3)];
const UV: &[SocketSig] = &[fixed("uv", V2)];
const OUT_UNIFY: &[OutputSig] = &[out("out", OutKind::Unify)];
const OUT_UNIFY_F: &[OutputSig] = &[out("out", OutKind::UnifyFloat)];
const OUT_F: &[OutputSig] = &[out_f("out")];
const SHAPE_OUT: &[OutputSig] = &[
    out_f("mask"),
    out_f("cell_id"),
    out("cell_uv", OutKind::Fixed(V2)),
];

macro_rules! binary {
    ($name:literal, $doc:literal) => {
        OpSignature {
            name: $name,
            class: Arithmetic,
            inputs: AB,
            params: &[],
            outputs: OUT_UNIFY,
            doc: $doc,
        }
    };
}

macro_rules! unary {
    ($name:literal, $doc:literal) => {
        OpSignature {
            name: $name,
            class: Math,
            inputs: X,
            params: &[],
            outputs: OUT_UNIFY_F,
            doc: $doc,
        }
    };
}

/// The full catalog, sorted by class then name.
pub static CATALOG: &[OpSignature] = &[
    // sources
    OpSignature {
        name: "const",
        class: Source,
        inputs: &[],
        params: &[ParamSig { name: "value", kind: ParamKind::Any, default: ParamDefault::Required, range: None }],
        outputs: &[out("out", OutKind::FromConst)],
        doc: "constant field",
    },
    OpSignature {
        name: "input",
        class: Source,
        inputs: &[],
        params: &[
            ParamSig { name: "name", kind: ParamKind::Str, default: ParamDefault::Required, range: None },
            ParamSig { name: "kind", kind: ParamKind::Str, default: ParamDefault::Str("Vec3"), range: None },
        ],
        outputs: &[out("out", OutKind::FromParam("kind"))],
        doc: "named per-point input; `vector`/`position` default to the batch points, anything else reads an aux field",
    },
    OpSignature {
        name: "volume_empty",
        class: Source,
        inputs: &[],
        params: &[],
        outputs: OUT_F,
        doc: "reserved volume slot; zero density",
    },
    // arithmetic
    binary!("add", "a + b"),
    binary!("sub", "a - b"),
    binary!("mul", "a * b"),
    binary!("div", "a / b (IEEE: x/0 is ±inf)"),
    binary!("floordiv", "floor(a / b)"),
    binary!("pow", "a ^ b"),
    binary!("minimum", "min(a, b)"),
    binary!("maximum", "max(a, b)"),
    OpSignature {
        name: "greater_than",
        class: Arithmetic,
        inputs: AB_F,
        params: &[],
        outputs: OUT_F,
        doc: "1 if a > b else 0",
    },
    OpSignature {
        name: "less_than",
        class: Arithmetic,
        inputs: AB_F,
        params: &[],
        outputs: OUT_F,
        doc: "1 if a < b else 0",
    },
    OpSignature {
        name: "mix",
        class: Arithmetic,
        inputs: &[generic("a"), generic("b"), fixed("t", F)],
        params: &[],
        outputs: OUT_UNIFY,
        doc: "a + (b - a) * t, exact at t = 0 and t = 1",
    },
    OpSignature {
        name: "cast",
        class: Arithmetic,
        inputs: &[sock("x", SocketKind::Any)],
        params: &[ParamSig { name: "to", kind: ParamKind::Str, default: ParamDefault::Required, range: None }],
        outputs: &[out("out", OutKind::FromParam("to"))],
        doc: "explicit kind conversion from the closed cast table",
    },
    // math
    unary!("abs", "|x|"),
    unary!("negate", "-x"),
    unary!("floor", "floor(x)"),
    unary!("fract", "x - floor(x)"),
    unary!("sin", "sin(x)"),
    unary!("cos", "cos(x)"),
    unary!("sqrt", "sqrt(x)"),
    unary!("exp", "e^x"),
    unary!("log", "ln(x)"),
    OpSignature {
        name: "clamp",
        class: Math,
        inputs: X,
        params: &[pf("lo", 0.0, ANY_F), pf("hi", 1.0, ANY_F)],
        outputs: OUT_UNIFY_F,
        doc: "min(max(x, lo), hi)",
    },
    OpSignature {
        name: "smoothstep",
        class: Math,
        inputs: &[fixed("x", F)],
        params: &[pf("lo", 0.0, ANY_F), pf("hi", 1.0, ANY_F)],
        outputs: OUT_F,
        doc: "3t^2 - 2t^3 of t = clamp((x - lo) / (hi - lo), 0, 1)",
    },
    OpSignature {
        name: "map_range",
        class: Math,
        inputs: &[fixed("x", F)],
        params: &[
            pf("from_lo", 0.0, ANY_F),
            pf("from_hi", 1.0, ANY_F),
            pf("to_lo", 0.0, ANY_F),
            pf("to_hi", 1.0, ANY_F),
            ParamSig { name: "clamp", kind: ParamKind::Bool, default: ParamDefault::Bool(false), range: None },
        ],
        outputs: OUT_F,
        doc: "linear remap; from_lo == from_hi is a domain error",
    },
    // vector
    OpSignature {
        name: "combine_xyz",
        class: Vector,
        inputs: &[fixed("x", F), fixed("y", F), fixed("z", F)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(V3))],
        doc: "(x, y, z)",
    },
    OpSignature {
        name: "separate_xyz",
        class: Vector,
        inputs: &[fixed("v", V3)],
        params: &[],
        outputs: &[out_f("x"), out_f("y"), out_f("z")],
        doc: "components of a Vec3",
    },
    OpSignature {
        name: "combine_xy",
        class: Vector,
        inputs: &[fixed("x", F), fixed("y", F)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(V2))],
        doc: "(x, y)",
    },
    OpSignature {
        name: "separate_xy",
        class: Vector,
        inputs: &[fixed("v", V2)],
        params: &[],
        outputs: &[out_f("x"), out_f("y")],
        doc: "components of a Vec2",
    },
    OpSignature {
        name: "dot",
        class: Vector,
        inputs: &[fixed("a", V3), fixed("b", V3)],
        params: &[],
        outputs: OUT_F,
        doc: "a · b",
    },
    OpSignature {
        name: "length",
        class: Vector,
        inputs: &[fixed("v", V3)],
        params: &[],
        outputs: OUT_F,
        doc: "|v|",
    },
    OpSignature {
        name: "normalize",
        class: Vector,
        inputs: &[fixed("v", V3)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(V3))],
        doc: "v / |v|, zero for zero vectors",
    },
    OpSignature {
        name: "rotate_quarter",
        class: Vector,
        inputs: &[fixed("uv", V2), fixed("turns", F)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(V2))],
        doc: "rotates uv about (0.5, 0.5) by floor(turns) mod 4 quarter turns",
    },
    // noise
    OpSignature {
        name: "perlin_noise",
        class: Noise,
        inputs: P,
        params: &[pf("frequency", 1.0, POS)],
        outputs: OUT_F,
        doc: "gradient noise in [-1, 1], zero on the lattice",
    },
    OpSignature {
        name: "fbm",
        class: Noise,
        inputs: P,
        params: &[
            pf("frequency", 1.0, POS),
            pi("octaves", 4, 1, 16),
            pf("lacunarity", 2.0, POS),
            pf("gain", 0.5, Some((0.0, 1.0))),
        ],
        outputs: OUT_F,
        doc: "sum of gain^i * perlin(p, frequency * lacunarity^i)",
    },
    OpSignature {
        name: "voronoi",
        class: Noise,
        inputs: P,
        params: &[pf("frequency", 1.0, POS)],
        outputs: &[out_f("distance"), out_f("cell_id"), out("cell_center", OutKind::Fixed(V3))],
        doc: "nearest hashed feature point over the 3x3x3 neighborhood",
    },
    OpSignature {
        name: "white_noise",
        class: Noise,
        inputs: P,
        params: &[],
        outputs: OUT_F,
        doc: "hash of the input bits to [0, 1)",
    },
    // color
    OpSignature {
        name: "hsv_to_rgb",
        class: Color,
        inputs: &[fixed("h", F), fixed("s", F), fixed("v", F)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(C))],
        doc: "hexcone HSV to RGB; hue wraps mod 1",
    },
    OpSignature {
        name: "rgb_to_hsv",
        class: Color,
        inputs: &[fixed("c", C)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(V3))],
        doc: "RGB to hexcone HSV",
    },
    OpSignature {
        name: "hsv_jitter",
        class: Color,
        inputs: &[fixed("c", C), fixed("dh", F), fixed("ds", F), fixed("dv", F)],
        params: &[],
        outputs: &[out("out", OutKind::Fixed(C))],
        doc: "hue rotated by dh, saturation and value offset and clamped to [0, 1]",
    },
    OpSignature {
        name: "luminance",
        class: Color,
        inputs: &[fixed("c", C)],
        params: &[],
        outputs: OUT_F,
        doc: "Rec. 709 luma of a linear color",
    },
    // patterns
    OpSignature {
        name: "brick_grid",
        class: Pattern,
        inputs: UV,
        params: &[
            pi("rows", 8, 1, 4096),
            pi("cols", 4, 1, 4096),
            pf("mortar_width", 0.01, Some((0.0, 1.0))),
            pf("row_offset", 0.5, UNIT),
        ],
        outputs: SHAPE_OUT,
        doc: "running-bond bricks; odd rows shifted by row_offset cell widths",
    },
    OpSignature {
        name: "tile_grid",
        class: Pattern,
        inputs: UV,
        params: &[pi("nx", 4, 1, 4096), pi("ny", 4, 1, 4096), pf("grout", 0.01, Some((0.0, 1.0)))],
        outputs: SHAPE_OUT,
        doc: "rectangular tiles separated by grout bands",
    },
    OpSignature {
        name: "plank_grid",
        class: Pattern,
        inputs: UV,
        params: &[
            pf("plank_width", 0.125, Some((1e-3, 1.0))),
            pf("length_mean", 0.5, Some((1e-3, 1.0))),
            pf("gap", 0.004, Some((0.0, 1.0))),
        ],
        outputs: SHAPE_OUT,
        doc: "plank rows with per-row hashed run lengths, periodic in u",
    },
    // masks
    OpSignature {
        name: "scratches",
        class: Mask,
        inputs: P,
        params: &[
            pf("density", 1.0, Some((0.0, 8.0))),
            pf("length", 0.2, POS),
            pf("width", 0.002, Some((0.0, 1e12))),
            pf("seed_offset", 0.0, ANY_F),
        ],
        outputs: OUT_F,
        doc: "union of hashed capsules; density is segments per length-sized cell",
    },
    OpSignature {
        name: "cracks",
        class: Mask,
        inputs: P,
        params: &[pf("scale", 4.0, POS), pf("width", 0.02, Some((0.0, 1e12)))],
        outputs: OUT_F,
        doc: "voronoi edge mask: F2 - F1 < width",
    },
    OpSignature {
        name: "smudges",
        class: Mask,
        inputs: P,
        params: &[pf("scale", 2.0, POS), pf("coverage", 0.3, UNIT)],
        outputs: OUT_F,
        doc: "thresholded fbm calibrated to the requested expected coverage",
    },
    OpSignature {
        name: "edge_wear",
        class: Mask,
        inputs: &[fixed("p", V3), fixed("curvature", F)],
        params: &[pf("intensity", 1.0, Some((0.0, 1e12))), pf("noise_scale", 8.0, POS)],
        outputs: OUT_F,
        doc: "clamp(curvature * intensity, 0, 1) modulated by fbm",
    },
];

/// Looks up an op by name.
pub fn lookup(name: &str) -> Option<&'static OpSignature> {
    CATALOG.iter().find(|s| s.name == name)
}

/// Machine-readable manifest of the whole catalog.
pub fn manifest_json() -> serde_json::Value {
    serde_json::to_value(CATALOG).expect("catalog is serializable")
}
