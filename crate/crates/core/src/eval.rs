//! Batch interpreter for graphs.
//!
//! A graph is compiled once into a flat program over the ancestors of the
//! requested outputs, then run chunk by chunk (4096 points per chunk, chunks
//! in parallel). Every kernel is pointwise, so the result does not depend on
//! chunking. Constants and broadcast inputs are stored once and read with
//! stride 0.

use crate::catalog;
use crate::io::Image;
use crate::ir::{apply_cast, cast_rule, CastRule, Graph, Input, NodeId, Value, ValueKind};
use crate::noise;
use rayon::prelude::*;
use std::cell::Cell;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

pub const CHUNK_SIZE: usize = 4096;

/// Points to evaluate at, plus named per-point auxiliary fields.
#[derive(Debug, Clone, Default)]
pub struct SampleBatch {
    pub points: Vec<[f64; 3]>,
    pub aux: BTreeMap<String, FieldBuffer>,
}

impl SampleBatch {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        SampleBatch { points, aux: BTreeMap::new() }
    }

    pub fn with_aux(mut self, name: &str, buf: FieldBuffer) -> Self {
        self.aux.insert(name.to_string(), buf);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points `[lo, hi)` with matching aux slices.
    pub fn slice(&self, lo: usize, hi: usize) -> SampleBatch {
        SampleBatch {
            points: self.points[lo..hi].to_vec(),
            aux: self
                .aux
                .iter()
                .map(|(k, b)| {
                    let a = b.kind.arity();
                    (k.clone(), FieldBuffer { kind: b.kind, data: b.data[lo * a..hi * a].to_vec() })
                })
                .collect(),
        }
    }
}

/// Flat per-point values; `data.len() == points * kind.arity()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBuffer {
    pub kind: ValueKind,
    pub data: Vec<f64>,
}

impl FieldBuffer {
    pub fn len(&self) -> usize {
        self.data.len() / self.kind.arity()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        let a = self.kind.arity();
        &self.data[i * a..(i + 1) * a]
    }

    pub fn nan_count(&self) -> usize {
        self.data.iter().filter(|x| x.is_nan()).count()
    }

    pub fn bit_eq(&self, o: &FieldBuffer) -> bool {
        self.kind == o.kind
            && self.data.len() == o.data.len()
            && self.data.iter().zip(&o.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid graph at {node}: {reason}")]
    InvalidGraph { node: NodeId, reason: String },
    #[error("graph has no output `{0}`")]
    UnknownOutput(String),
    #[error("missing aux field `{0}`")]
    MissingAuxField(String),
    #[error("aux field `{name}` has kind {got}, expected {expected}")]
    AuxKind { name: String, expected: ValueKind, got: ValueKind },
    #[error("aux field `{0}` length differs from the point count")]
    AuxLength(String),
    #[error("domain error at {node}: {reason}")]
    EvalDomainError { node: NodeId, reason: String },
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("channel `{0}` is not a Color or Float output")]
    BadChannel(String),
    #[error("resolution {0} outside [1, 16384]")]
    BadResolution(usize),
}

thread_local! {
    static EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Node evaluations (node × chunk) performed by `evaluate*` calls made from
/// this thread.
pub fn evaluations_on_this_thread() -> u64 {
    EVALS.with(Cell::get)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Node × chunk executions.
    pub node_evals: u64,
    pub chunks: usize,
    /// Nodes in the compiled program.
    pub program_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub chunk_size: usize,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { chunk_size: CHUNK_SIZE, parallel: true }
    }
}

// ------------------------------------------------------------ compilation

#[derive(Debug, Clone, Copy)]
enum Bin {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy)]
enum Un {
    Abs,
    Neg,
    Floor,
    Fract,
    Sin,
    Cos,
    Sqrt,
    Exp,
    Log,
}

#[derive(Debug, Clone)]
enum Kernel {
    Const(Vec<f64>),
    Points,
    Aux(String),
    Zero,
    Binary(Bin),
    Greater,
    Less,
    Mix,
    Cast(CastRule),
    Unary(Un),
    Clamp(f64, f64),
    Smoothstep(f64, f64),
    MapRange { fl: f64, fh: f64, tl: f64, th: f64, clamp: bool },
    CombineXyz,
    SeparateXyz,
    CombineXy,
    SeparateXy,
    Dot,
    Length,
    Normalize,
    RotateQuarter,
    Perlin(f64),
    Fbm { f: f64, oct: i64, lac: f64, gain: f64 },
    Voronoi(f64),
    WhiteNoise,
    HsvToRgb,
    RgbToHsv,
    HsvJitter,
    Luminance,
    Brick { rows: i64, cols: i64, w: f64, off: f64 },
    Tile { nx: i64, ny: i64, g: f64 },
    Plank { pw: f64, lm: f64, gap: f64 },
    Scratches { d: f64, len: f64, w: f64, seed: f64 },
    Cracks { s: f64, w: f64 },
    Smudges { s: f64, c: f64 },
    EdgeWear { i: f64, ns: f64 },
}

#[derive(Debug, Clone)]
enum Arg {
    Slot(usize),
    Const(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Instr {
    kernel: Kernel,
    /// Arguments in signature socket order.
    args: Vec<Arg>,
    /// First output slot; outputs are consecutive in signature order.
    out_slot: usize,
    out_arities: Vec<usize>,
    /// Whether every output is constant over points (stride 0).
    uniform: bool,
}

#[derive(Debug, Clone)]
struct Program {
    instrs: Vec<Instr>,
    slots: usize,
    /// Last instruction reading each slot (for freeing buffers early).
    last_use: Vec<usize>,
    results: Vec<(usize, ValueKind)>,
}

fn pf(node: &crate::ir::Node, name: &str) -> f64 {
    node.param_f64(name)
}

fn kernel_for(node: &crate::ir::Node, in_kinds: &[ValueKind], out_kind: ValueKind) -> Result<Kernel, EvalError> {
    let domain = |reason: &str| EvalError::EvalDomainError { node: node.id, reason: reason.to_string() };
    Ok(match node.op.as_str() {
        "const" => Kernel::Const(node.param("value").map(Value::lanes).unwrap_or_default()),
        "input" => {
            let name = node.param("name").and_then(Value::as_str).unwrap_or_default();
            if matches!(name, "vector" | "position") && out_kind == ValueKind::Vec3 {
                Kernel::Points
            } else {
                Kernel::Aux(name.to_string())
            }
        }
        "volume_empty" => Kernel::Zero,
        "add" => Kernel::Binary(Bin::Add),
        "sub" => Kernel::Binary(Bin::Sub),
        "mul" => Kernel::Binary(Bin::Mul),
        "div" => Kernel::Binary(Bin::Div),
        "floordiv" => Kernel::Binary(Bin::FloorDiv),
        "pow" => Kernel::Binary(Bin::Pow),
        "minimum" => Kernel::Binary(Bin::Min),
        "maximum" => Kernel::Binary(Bin::Max),
        "greater_than" => Kernel::Greater,
        "less_than" => Kernel::Less,
        "mix" => Kernel::Mix,
        "cast" => Kernel::Cast(cast_rule(in_kinds[0], out_kind).ok_or_else(|| domain("unsupported cast"))?),
        "abs" => Kernel::Unary(Un::Abs),
        "negate" => Kernel::Unary(Un::Neg),
        "floor" => Kernel::Unary(Un::Floor),
        "fract" => Kernel::Unary(Un::Fract),
        "sin" => Kernel::Unary(Un::Sin),
        "cos" => Kernel::Unary(Un::Cos),
        "sqrt" => Kernel::Unary(Un::Sqrt),
        "exp" => Kernel::Unary(Un::Exp),
        "log" => Kernel::Unary(Un::Log),
        "clamp" => Kernel::Clamp(pf(node, "lo"), pf(node, "hi")),
        "smoothstep" => Kernel::Smoothstep(pf(node, "lo"), pf(node, "hi")),
        "map_range" => {
            let (fl, fh) = (pf(node, "from_lo"), pf(node, "from_hi"));
            if fl == fh {
                return Err(domain("DegenerateRange: from_lo == from_hi"));
            }
            Kernel::MapRange {
                fl,
                fh,
                tl: pf(node, "to_lo"),
                th: pf(node, "to_hi"),
                clamp: node.param("clamp").and_then(Value::as_bool).unwrap_or(false),
            }
        }
        "combine_xyz" => Kernel::CombineXyz,
        "separate_xyz" => Kernel::SeparateXyz,
        "combine_xy" => Kernel::CombineXy,
        "separate_xy" => Kernel::SeparateXy,
        "dot" => Kernel::Dot,
        "length" => Kernel::Length,
        "normalize" => Kernel::Normalize,
        "rotate_quarter" => Kernel::RotateQuarter,
        "perlin_noise" => Kernel::Perlin(pf(node, "frequency")),
        "fbm" => Kernel::Fbm {
            f: pf(node, "frequency"),
            oct: node.param_i64("octaves"),
            lac: pf(node, "lacunarity"),
            gain: pf(node, "gain"),
        },
        "voronoi" => Kernel::Voronoi(pf(node, "frequency")),
        "white_noise" => Kernel::WhiteNoise,
        "hsv_to_rgb" => Kernel::HsvToRgb,
        "rgb_to_hsv" => Kernel::RgbToHsv,
        "hsv_jitter" => Kernel::HsvJitter,
        "luminance" => Kernel::Luminance,
        "brick_grid" => {
            let k = Kernel::Brick {
                rows: node.param_i64("rows"),
                cols: node.param_i64("cols"),
                w: pf(node, "mortar_width"),
                off: pf(node, "row_offset"),
            };
            if let Kernel::Brick { rows, cols, w, off } = k {
                noise::brick_grid([0.5, 0.5], rows, cols, w, off).map_err(|e| domain(&format!("InvalidMortar: {e}")))?;
            }
            k
        }
        "tile_grid" => {
            let (nx, ny, g) = (node.param_i64("nx"), node.param_i64("ny"), pf(node, "grout"));
            noise::tile_grid([0.5, 0.5], nx, ny, g).map_err(|e| domain(&format!("InvalidMortar: {e}")))?;
            Kernel::Tile { nx, ny, g }
        }
        "plank_grid" => {
            let (pw, lm, gap) = (pf(node, "plank_width"), pf(node, "length_mean"), pf(node, "gap"));
            noise::plank_grid([0.5, 0.5], pw, lm, gap).map_err(|e| domain(&format!("InvalidMortar: {e}")))?;
            Kernel::Plank { pw, lm, gap }
        }
        "scratches" => Kernel::Scratches {
            d: pf(node, "density"),
            len: pf(node, "length"),
            w: pf(node, "width"),
            seed: pf(node, "seed_offset"),
        },
        "cracks" => Kernel::Cracks { s: pf(node, "scale"), w: pf(node, "width") },
        "smudges" => Kernel::Smudges { s: pf(node, "scale"), c: pf(node, "coverage") },
        "edge_wear" => Kernel::EdgeWear { i: pf(node, "intensity"), ns: pf(node, "noise_scale") },
        other => {
            return Err(EvalError::InvalidGraph { node: node.id, reason: format!("no kernel for `{other}`") })
        }
    })
}

fn compile(g: &Graph, outputs: &[&str]) -> Result<Program, EvalError> {
    let kinds = g
        .infer_kinds()
        .map_err(|(node, e)| EvalError::InvalidGraph { node, reason: e.to_string() })?;
    let mut roots = Vec::with_capacity(outputs.len());
    for name in outputs {
        roots.push(g.outputs.get(*name).ok_or_else(|| EvalError::UnknownOutput(name.to_string()))?);
    }
    let live = g.ancestors_of(roots.iter().copied());

    let mut slot_of: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    let mut uniform_slot: Vec<bool> = Vec::new();
    let mut instrs = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        if !live[i] {
            continue;
        }
        let sig = catalog::lookup(&node.op).ok_or_else(|| EvalError::InvalidGraph {
            node: node.id,
            reason: format!("unknown op `{}`", node.op),
        })?;
        let mut args = Vec::with_capacity(sig.inputs.len());
        let mut in_kinds = Vec::with_capacity(sig.inputs.len());
        let mut all_uniform = true;
        for s in sig.inputs {
            match &node.inputs[s.name] {
                Input::Const(v) => {
                    in_kinds.push(v.kind().unwrap_or(ValueKind::Float));
                    args.push(Arg::Const(v.lanes()));
                }
                Input::Edge(r) => {
                    in_kinds.push(kinds[r.node.index()][&r.output]);
                    let slot = slot_of[&(r.node.index(), r.output.as_str())];
                    all_uniform &= uniform_slot[slot];
                    args.push(Arg::Slot(slot));
                }
            }
        }
        let out_kind = sig.outputs.first().map(|o| kinds[i][o.name]).unwrap_or(ValueKind::Float);
        let kernel = kernel_for(node, &in_kinds, out_kind)?;
        let source_uniform = matches!(kernel, Kernel::Const(_) | Kernel::Zero);
        let is_source = sig.inputs.is_empty();
        // Pure functions of uniform inputs stay uniform.
        let uniform = if is_source { source_uniform } else { all_uniform };
        let out_slot = uniform_slot.len();
        let mut out_arities = Vec::new();
        for o in sig.outputs {
            slot_of.insert((i, o.name), uniform_slot.len());
            uniform_slot.push(uniform);
            out_arities.push(kinds[i][o.name].arity());
        }
        instrs.push(Instr { kernel, args, out_slot, out_arities, uniform });
    }
    let mut last_use = vec![usize::MAX; uniform_slot.len()];
    for (k, ins) in instrs.iter().enumerate() {
        for a in &ins.args {
            if let Arg::Slot(s) = a {
                last_use[*s] = k;
            }
        }
    }
    let mut results = Vec::new();
    for r in roots {
        let slot = slot_of[&(r.node.index(), r.output.as_str())];
        last_use[slot] = usize::MAX;
        results.push((slot, kinds[r.node.index()][&r.output]));
    }
    Ok(Program { instrs, slots: uniform_slot.len(), last_use, results })
}

// ------------------------------------------------------------ execution

#[derive(Debug, Clone)]
struct Buf {
    arity: usize,
    /// 0 for uniform buffers.
    stride: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Src<'a> {
    data: &'a [f64],
    arity: usize,
    stride: usize,
}

impl<'a> Src<'a> {
    #[inline(always)]
    fn lane(&self, i: usize, l: usize) -> f64 {
        let l = if self.arity == 1 { 0 } else { l };
        self.data[i * self.stride + l]
    }

    #[inline(always)]
    fn s(&self, i: usize) -> f64 {
        self.data[i * self.stride]
    }

    #[inline(always)]
    fn v2(&self, i: usize) -> [f64; 2] {
        [self.lane(i, 0), self.lane(i, 1)]
    }

    #[inline(always)]
    fn v3(&self, i: usize) -> [f64; 3] {
        [self.lane(i, 0), self.lane(i, 1), self.lane(i, 2)]
    }
}

#[inline(always)]
fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

#[inline(always)]
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[inline(always)]
fn bin(op: Bin, a: f64, b: f64) -> f64 {
    match op {
        Bin::Add => a + b,
        Bin::Sub => a - b,
        Bin::Mul => a * b,
        Bin::Div => a / b,
        Bin::FloorDiv => (a / b).floor(),
        Bin::Pow => libm::pow(a, b),
        Bin::Min => nan_min(a, b),
        Bin::Max => nan_max(a, b),
    }
}

#[inline(always)]
fn un(op: Un, x: f64) -> f64 {
    match op {
        Un::Abs => x.abs(),
        Un::Neg => -x,
        Un::Floor => x.floor(),
        Un::Fract => x - x.floor(),
        Un::Sin => libm::sin(x),
        Un::Cos => libm::cos(x),
        Un::Sqrt => x.sqrt(),
        Un::Exp => libm::exp(x),
        Un::Log => libm::log(x),
    }
}

/// Exact at the endpoints so that all-0 and all-1 masks reproduce a and b.
#[inline(always)]
pub fn mix_scalar(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + (b - a) * t
    }
}

fn run_instr(ins: &Instr, args: &[Src], n: usize, outs: &mut [Vec<f64>]) {
    macro_rules! each {
        ($o:expr, $ar:expr, |$i:ident, $l:ident| $body:expr) => {{
            let ar = $ar;
            for $i in 0..n {
                for $l in 0..ar {
                    $o[$i * ar + $l] = $body;
                }
            }
        }};
    }
    macro_rules! each3 {
        (|$i:ident| $body:expr) => {{
            for $i in 0..n {
                let v: [f64; 3] = $body;
                outs[0][$i * 3..$i * 3 + 3].copy_from_slice(&v);
            }
        }};
    }
    macro_rules! each1 {
        (|$i:ident| $body:expr) => {{
            for $i in 0..n {
                outs[0][$i] = $body;
            }
        }};
    }
    let ar = ins.out_arities[0];
    match &ins.kernel {
        Kernel::Const(_) | Kernel::Points | Kernel::Aux(_) | Kernel::Zero => {
            unreachable!("sources are materialised directly")
        }
        Kernel::Binary(op) => {
            let (a, b) = (args[0], args[1]);
            each!(outs[0], ar, |i, l| bin(*op, a.lane(i, l), b.lane(i, l)))
        }
        Kernel::Greater => each1!(|i| if args[0].s(i) > args[1].s(i) { 1.0 } else { 0.0 }),
        Kernel::Less => each1!(|i| if args[0].s(i) < args[1].s(i) { 1.0 } else { 0.0 }),
        Kernel::Mix => {
            let (a, b, t) = (args[0], args[1], args[2]);
            each!(outs[0], ar, |i, l| mix_scalar(a.lane(i, l), b.lane(i, l), t.s(i)))
        }
        Kernel::Cast(rule) => {
            let x = args[0];
            let mut tmp = [0.0; 3];
            for i in 0..n {
                for (l, t) in tmp.iter_mut().enumerate().take(x.arity) {
                    *t = x.lane(i, l);
                }
                apply_cast(*rule, &tmp[..x.arity], ar, &mut outs[0][i * ar..(i + 1) * ar]);
            }
        }
        Kernel::Unary(op) => {
            let x = args[0];
            each!(outs[0], ar, |i, l| un(*op, x.lane(i, l)))
        }
        Kernel::Clamp(lo, hi) => {
            let x = args[0];
            each!(outs[0], ar, |i, l| {
                let v = x.lane(i, l);
                if v.is_nan() {
                    v
                } else {
                    v.max(*lo).min(*hi)
                }
            })
        }
        Kernel::Smoothstep(lo, hi) => each1!(|i| noise::smoothstep(*lo, *hi, args[0].s(i))),
        Kernel::MapRange { fl, fh, tl, th, clamp } => each1!(|i| {
            let t = (args[0].s(i) - fl) / (fh - fl);
            let v = tl + t * (th - tl);
            if *clamp {
                v.clamp(tl.min(*th), tl.max(*th))
            } else {
                v
            }
        }),
        Kernel::CombineXyz => each3!(|i| [args[0].s(i), args[1].s(i), args[2].s(i)]),
        Kernel::SeparateXyz => {
            for i in 0..n {
                let v = args[0].v3(i);
                outs[0][i] = v[0];
                outs[1][i] = v[1];
                outs[2][i] = v[2];
            }
        }
        Kernel::CombineXy => {
            for i in 0..n {
                outs[0][i * 2] = args[0].s(i);
                outs[0][i * 2 + 1] = args[1].s(i);
            }
        }
        Kernel::SeparateXy => {
            for i in 0..n {
                let v = args[0].v2(i);
                outs[0][i] = v[0];
                outs[1][i] = v[1];
            }
        }
        Kernel::Dot => each1!(|i| {
            let (a, b) = (args[0].v3(i), args[1].v3(i));
            a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
        }),
        Kernel::Length => each1!(|i| {
            let a = args[0].v3(i);
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
        }),
        Kernel::Normalize => each3!(|i| {
            let a = args[0].v3(i);
            let l = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if l > 0.0 {
                [a[0] / l, a[1] / l, a[2] / l]
            } else {
                [0.0; 3]
            }
        }),
        Kernel::RotateQuarter => {
            for i in 0..n {
                let r = noise::rotate_quarter(args[0].v2(i), args[1].s(i));
                outs[0][i * 2..i * 2 + 2].copy_from_slice(&r);
            }
        }
        Kernel::Perlin(f) => each1!(|i| noise::perlin_noise(args[0].v3(i), *f)),
        Kernel::Fbm { f, oct, lac, gain } => each1!(|i| noise::fbm(args[0].v3(i), *f, *oct, *lac, *gain)),
        Kernel::Voronoi(f) => {
            for i in 0..n {
                let v = noise::voronoi(args[0].v3(i), *f);
                outs[0][i] = v.f1;
                outs[1][i] = v.cell_id;
                outs[2][i * 3..i * 3 + 3].copy_from_slice(&v.cell_center);
            }
        }
        Kernel::WhiteNoise => each1!(|i| noise::white_noise(args[0].v3(i))),
        Kernel::HsvToRgb => each3!(|i| noise::hsv_to_rgb(args[0].s(i), args[1].s(i), args[2].s(i))),
        Kernel::RgbToHsv => each3!(|i| noise::rgb_to_hsv(args[0].v3(i))),
        Kernel::HsvJitter => {
            each3!(|i| noise::hsv_jitter(args[0].v3(i), args[1].s(i), args[2].s(i), args[3].s(i)))
        }
        Kernel::Luminance => each1!(|i| noise::luminance(args[0].v3(i))),
        Kernel::Brick { .. } | Kernel::Tile { .. } | Kernel::Plank { .. } => {
            for i in 0..n {
                let uv = args[0].v2(i);
                let s = match &ins.kernel {
                    Kernel::Brick { rows, cols, w, off } => noise::brick_grid(uv, *rows, *cols, *w, *off),
                    Kernel::Tile { nx, ny, g } => noise::tile_grid(uv, *nx, *ny, *g),
                    Kernel::Plank { pw, lm, gap } => noise::plank_grid(uv, *pw, *lm, *gap),
                    _ => unreachable!(),
                }
                .expect("validated at compile time");
                outs[0][i] = s.mask;
                outs[1][i] = s.cell_id;
                outs[2][i * 2..i * 2 + 2].copy_from_slice(&s.cell_uv);
            }
        }
        Kernel::Scratches { d, len, w, seed } => each1!(|i| noise::scratches(args[0].v3(i), *d, *len, *w, *seed)),
        Kernel::Cracks { s, w } => each1!(|i| noise::cracks(args[0].v3(i), *s, *w)),
        Kernel::Smudges { s, c } => each1!(|i| noise::smudges(args[0].v3(i), *s, *c)),
        Kernel::EdgeWear { i: k, ns } => each1!(|i| noise::edge_wear(args[0].v3(i), args[1].s(i), *k, *ns)),
    }
}

fn run_chunk(prog: &Program, batch: &SampleBatch, lo: usize, hi: usize) -> Result<Vec<Buf>, EvalError> {
    let n = hi - lo;
    let mut slots: Vec<Option<Buf>> = vec![None; prog.slots];
    for (k, ins) in prog.instrs.iter().enumerate() {
        match &ins.kernel {
            Kernel::Const(lanes) => {
                slots[ins.out_slot] = Some(Buf { arity: ins.out_arities[0], stride: 0, data: lanes.clone() });
            }
            Kernel::Zero => {
                slots[ins.out_slot] = Some(Buf { arity: ins.out_arities[0], stride: 0, data: vec![0.0; ins.out_arities[0]] });
            }
            Kernel::Points => {
                let data = batch.points[lo..hi].iter().flat_map(|p| p.iter().copied()).collect();
                slots[ins.out_slot] = Some(Buf { arity: 3, stride: 3, data });
            }
            Kernel::Aux(name) => {
                let aux = batch.aux.get(name).ok_or_else(|| EvalError::MissingAuxField(name.clone()))?;
                let a = aux.kind.arity();
                slots[ins.out_slot] = Some(Buf { arity: a, stride: a, data: aux.data[lo * a..hi * a].to_vec() });
            }
            _ => {
                let args: Vec<Src> = ins
                    .args
                    .iter()
                    .map(|a| match a {
                        Arg::Const(l) => Src { data: l, arity: l.len(), stride: 0 },
                        Arg::Slot(s) => {
                            let b = slots[*s].as_ref().expect("slot computed before use");
                            Src { data: &b.data, arity: b.arity, stride: b.stride }
                        }
                    })
                    .collect();
                let rows = if ins.uniform { 1 } else { n };
                let mut outs: Vec<Vec<f64>> = ins.out_arities.iter().map(|a| vec![0.0; rows * a]).collect();
                run_instr(ins, &args, rows, &mut outs);
                drop(args);
                for (j, (data, &a)) in outs.into_iter().zip(&ins.out_arities).enumerate() {
                    let stride = if ins.uniform { 0 } else { a };
                    slots[ins.out_slot + j] = Some(Buf { arity: a, stride, data });
                }
            }
        }
        for a in &ins.args {
            if let Arg::Slot(s) = a {
                if prog.last_use[*s] == k {
                    slots[*s] = None;
                }
            }
        }
    }
    Ok(prog
        .results
        .iter()
        .map(|(s, _)| slots[*s].clone().expect("result slot kept alive"))
        .collect())
}

fn check_batch(batch: &SampleBatch) -> Result<(), EvalError> {
    if batch.points.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    for (name, b) in &batch.aux {
        if b.data.len() != batch.points.len() * b.kind.arity() {
            return Err(EvalError::AuxLength(name.clone()));
        }
    }
    Ok(())
}

fn check_aux_kinds(g: &Graph, prog: &Program, batch: &SampleBatch) -> Result<(), EvalError> {
    let _ = prog;
    for node in &g.nodes {
        if node.op != "input" {
            continue;
        }
        let name = node.param("name").and_then(Value::as_str).unwrap_or_default();
        let kind = node.param("kind").and_then(Value::as_str).and_then(ValueKind::parse);
        if let (Some(b), Some(k)) = (batch.aux.get(name), kind) {
            if matches!(name, "vector" | "position") && k == ValueKind::Vec3 {
                continue;
            }
            let ok = b.kind == k || (k == ValueKind::Float && b.kind == ValueKind::Int);
            if !ok {
                return Err(EvalError::AuxKind { name: name.to_string(), expected: k, got: b.kind });
            }
        }
    }
    Ok(())
}

/// Evaluates several outputs in one pass, sharing common subgraphs.
pub fn evaluate_with(
    g: &Graph,
    outputs: &[&str],
    batch: &SampleBatch,
    opts: EvalOptions,
) -> Result<(Vec<FieldBuffer>, EvalStats), EvalError> {
    check_batch(batch)?;
    let prog = compile(g, outputs)?;
    check_aux_kinds(g, &prog, batch)?;
    let m = batch.len();
    let cs = opts.chunk_size.max(1);
    let bounds: Vec<(usize, usize)> = (0..m).step_by(cs).map(|lo| (lo, (lo + cs).min(m))).collect();
    let counter = AtomicU64::new(0);
    let per_chunk = prog.instrs.len() as u64;
    let run = |&(lo, hi): &(usize, usize)| {
        let r = run_chunk(&prog, batch, lo, hi);
        counter.fetch_add(per_chunk, Ordering::Relaxed);
        r
    };
    let chunks: Vec<Vec<Buf>> = if opts.parallel && bounds.len() > 1 {
        bounds.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        bounds.iter().map(run).collect::<Result<_, _>>()?
    };
    let node_evals = counter.load(Ordering::Relaxed);
    EVALS.with(|c| c.set(c.get() + node_evals));

    let mut result = Vec::with_capacity(prog.results.len());
    for (j, &(_, kind)) in prog.results.iter().enumerate() {
        let a = kind.arity();
        let mut data = Vec::with_capacity(m * a);
        for (c, &(lo, hi)) in chunks.iter().zip(&bounds) {
            let b = &c[j];
            if b.stride == 0 {
                for _ in lo..hi {
                    data.extend_from_slice(&b.data[..a]);
                }
            } else {
                data.extend_from_slice(&b.data);
            }
        }
        result.push(FieldBuffer { kind, data });
    }
    Ok((result, EvalStats { node_evals, chunks: bounds.len(), program_len: prog.instrs.len() }))
}

pub fn evaluate_many(g: &Graph, outputs: &[&str], batch: &SampleBatch) -> Result<Vec<FieldBuffer>, EvalError> {
    evaluate_with(g, outputs, batch, EvalOptions::default()).map(|r| r.0)
}

pub fn evaluate(g: &Graph, output: &str, batch: &SampleBatch) -> Result<FieldBuffer, EvalError> {
    let mut v = evaluate_many(g, &[output], batch)?;
    Ok(v.remove(0))
}

/// Pixel-centre samples of the unit uv square at z = 0, row-major with
/// row `j` at v = (j + 0.5) / R. Supplies aux `uv` and a flat `curvature`.
pub fn plane_batch(resolution: usize) -> SampleBatch {
    let r = resolution as f64;
    let mut points = Vec::with_capacity(resolution * resolution);
    let mut uv = Vec::with_capacity(resolution * resolution * 2);
    for j in 0..resolution {
        for i in 0..resolution {
            let (u, v) = ((i as f64 + 0.5) / r, (j as f64 + 0.5) / r);
            points.push([u, v, 0.0]);
            uv.extend_from_slice(&[u, v]);
        }
    }
    let n = points.len();
    SampleBatch::new(points)
        .with_aux("uv", FieldBuffer { kind: ValueKind::Vec2, data: uv })
        .with_aux("curvature", FieldBuffer { kind: ValueKind::Float, data: vec![0.0; n] })
}

/// Bakes one Color or Float output to a linear RGB image.
pub fn bake_texture(g: &Graph, channel: &str, resolution: usize) -> Result<Image, EvalError> {
    if !(1..=16384).contains(&resolution) {
        return Err(EvalError::BadResolution(resolution));
    }
    let r = g.outputs.get(channel).ok_or_else(|| EvalError::UnknownOutput(channel.to_string()))?;
    let kind = g
        .output_kind(channel)
        .map_err(|e| EvalError::InvalidGraph { node: r.node, reason: e.to_string() })?;
    if !matches!(kind, ValueKind::Color | ValueKind::Float) {
        return Err(EvalError::BadChannel(channel.to_string()));
    }
    let buf = evaluate(g, channel, &plane_batch(resolution))?;
    let data = if kind == ValueKind::Float {
        buf.data.iter().flat_map(|&x| [x, x, x]).collect()
    } else {
        buf.data
    };
    Ok(Image { width: resolution, height: resolution, channels: 3, data })
}
