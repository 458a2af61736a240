//! Value kinds, tagged constants, the promotion lattice and the cast table.
//!
//! Binary arithmetic (`add sub mul div floordiv pow minimum maximum`) resolves
//! its result kind as follows:
//!
//! | a \ b  | Int   | Float | Vec2 | Vec3 | Color | Bool |
//! |--------|-------|-------|------|------|-------|------|
//! | Int    | Int*  | Float | Vec2 | Vec3 | Color | err  |
//! | Float  | Float | Float | Vec2 | Vec3 | Color | err  |
//! | Vec2   | Vec2  | Vec2  | Vec2 | err  | err   | err  |
//! | Vec3   | Vec3  | Vec3  | err  | Vec3 | err   | err  |
//! | Color  | Color | Color | err  | err  | Color | err  |
//! | Bool   | err   | err   | err  | err  | err   | err  |
//!
//! `*` `div` and `pow` promote Int×Int to Float; every other op keeps Int.
//! `err` is [`GraphError::AmbiguousKind`]: the caller must insert a cast.
//!
//! Casts form a closed table, see [`cast_rule`].

use super::GraphError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    Int,
    Float,
    Vec2,
    Vec3,
    Color,
    Bool,
}

impl ValueKind {
    pub const ALL: [ValueKind; 6] = [
        ValueKind::Int,
        ValueKind::Float,
        ValueKind::Vec2,
        ValueKind::Vec3,
        ValueKind::Color,
        ValueKind::Bool,
    ];

    /// Number of f64 lanes per point.
    pub fn arity(self) -> usize {
        match self {
            ValueKind::Int | ValueKind::Float | ValueKind::Bool => 1,
            ValueKind::Vec2 => 2,
            ValueKind::Vec3 | ValueKind::Color => 3,
        }
    }

    pub fn is_scalar_numeric(self) -> bool {
        matches!(self, ValueKind::Int | ValueKind::Float)
    }

    pub fn is_vector(self) -> bool {
        matches!(self, ValueKind::Vec2 | ValueKind::Vec3 | ValueKind::Color)
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Int => "Int",
            ValueKind::Float => "Float",
            ValueKind::Vec2 => "Vec2",
            ValueKind::Vec3 => "Vec3",
            ValueKind::Color => "Color",
            ValueKind::Bool => "Bool",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        ValueKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A kind-tagged constant. `Str` appears only in node params.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Vec2([f64; 2]),
    Vec3([f64; 3]),
    Color([f64; 3]),
    Bool(bool),
    Str(String),
}

impl Value {
    /// Kind of a field-carrying value; `None` for strings.
    pub fn kind(&self) -> Option<ValueKind> {
        Some(match self {
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::Vec2(_) => ValueKind::Vec2,
            Value::Vec3(_) => ValueKind::Vec3,
            Value::Color(_) => ValueKind::Color,
            Value::Bool(_) => ValueKind::Bool,
            Value::Str(_) => return None,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self.kind() {
            Some(k) => k.name(),
            None => "Str",
        }
    }

    /// Lanes as doubles (Int and Bool widen exactly).
    pub fn lanes(&self) -> Vec<f64> {
        match self {
            Value::Int(i) => vec![*i as f64],
            Value::Float(x) => vec![*x],
            Value::Vec2(v) => v.to_vec(),
            Value::Vec3(v) | Value::Color(v) => v.to_vec(),
            Value::Bool(b) => vec![f64::from(u8::from(*b))],
            Value::Str(_) => Vec::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            Value::Bool(b) => Some(f64::from(u8::from(*b))),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lanes().iter().all(|x| x.is_finite())
    }

    /// Bit-exact comparison (distinguishes -0.0 and NaN payloads).
    pub fn bit_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            _ => {
                self.tag() == other.tag()
                    && self
                        .lanes()
                        .iter()
                        .zip(other.lanes())
                        .all(|(a, b)| a.to_bits() == b.to_bits())
            }
        }
    }

    /// Feeds a stable byte encoding into `out` (used for structural hashing).
    pub fn hash_words(&self, out: &mut Vec<u64>) {
        out.push(crate::math::hash_str(self.tag()));
        match self {
            Value::Int(i) => out.push(*i as u64),
            Value::Bool(b) => out.push(u64::from(*b)),
            Value::Str(s) => out.push(crate::math::hash_str(s)),
            _ => out.extend(self.lanes().iter().map(|x| x.to_bits())),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_string())
    }
}

/// Binary arithmetic ops that participate in the promotion lattice.
pub const BINARY_ARITH: [&str; 8] = [
    "add", "sub", "mul", "div", "floordiv", "pow", "minimum", "maximum",
];

/// Result kind of `op` applied to `kinds`, following the module-level table.
pub fn infer_kind(op: &str, kinds: &[ValueKind]) -> Result<ValueKind, GraphError> {
    let ambiguous = || GraphError::AmbiguousKind {
        op: op.to_string(),
        kinds: kinds.to_vec(),
    };
    if kinds.is_empty() || kinds.contains(&ValueKind::Bool) {
        return Err(ambiguous());
    }
    let mut vector: Option<ValueKind> = None;
    for &k in kinds.iter().filter(|k| k.is_vector()) {
        match vector {
            None => vector = Some(k),
            Some(v) if v == k => {}
            Some(_) => return Err(ambiguous()),
        }
    }
    if let Some(v) = vector {
        return Ok(v);
    }
    let all_int = kinds.iter().all(|&k| k == ValueKind::Int);
    if all_int && !matches!(op, "div" | "pow") {
        Ok(ValueKind::Int)
    } else {
        Ok(ValueKind::Float)
    }
}

/// How a cast transforms lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CastRule {
    Identity,
    /// Float → Int, rounding toward zero.
    Truncate,
    /// Scalar replicated into every lane.
    Splat,
    /// Lane mean.
    Mean,
}

/// The closed cast table. Anything not listed is `None`.
pub fn cast_rule(from: ValueKind, to: ValueKind) -> Option<CastRule> {
    use ValueKind::*;
    if from == to {
        return Some(CastRule::Identity);
    }
    match (from, to) {
        (Int, Float) | (Bool, Int) | (Bool, Float) => Some(CastRule::Identity),
        (Float, Int) => Some(CastRule::Truncate),
        (Vec3, Color) | (Color, Vec3) => Some(CastRule::Identity),
        (Float, Vec2) | (Float, Vec3) | (Float, Color) => Some(CastRule::Splat),
        (Vec3, Float) | (Color, Float) => Some(CastRule::Mean),
        _ => None,
    }
}

/// Applies a cast to one point's lanes.
pub fn apply_cast(rule: CastRule, input: &[f64], out_arity: usize, out: &mut [f64]) {
    match rule {
        CastRule::Identity => out.copy_from_slice(&input[..out_arity]),
        CastRule::Truncate => out[0] = input[0].trunc(),
        CastRule::Splat => out.iter_mut().for_each(|o| *o = input[0]),
        CastRule::Mean => out[0] = input.iter().sum::<f64>() / input.len() as f64,
    }
}
