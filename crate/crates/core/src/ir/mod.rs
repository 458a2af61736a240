//! Typed compute-graph IR.
//!
//! A [`Graph`] is an immutable DAG of catalog ops. Graphs are built one node
//! at a time through [`GraphBuilder::add_node`]; every input socket is an
//! explicit argument bound to either another node's output or an inline
//! constant. Node ids are dense and assigned in creation order, and an edge
//! may only point at an existing (earlier) node, so id order is always a
//! topological order.

mod json;
mod kind;
mod validate;

pub use kind::{apply_cast, cast_rule, infer_kind, CastRule, Value, ValueKind, BINARY_ARITH};
pub use validate::{validate, Issue, ValidationReport};

use crate::catalog::{self, OpSignature, OutKind, ParamDefault, ParamKind, SocketKind};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The conventional single output socket.
    pub fn out(self) -> OutRef {
        self.socket("out")
    }

    pub fn socket(self, name: &str) -> OutRef {
        OutRef { node: self, output: name.to_string() }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Reference to a named output socket of a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutRef {
    pub node: NodeId,
    pub output: String,
}

impl From<NodeId> for OutRef {
    fn from(n: NodeId) -> Self {
        n.out()
    }
}

/// What an input socket is bound to.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Edge(OutRef),
    Const(Value),
}

/// Builder-side operand: an output reference or a constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Out(OutRef),
    Const(Value),
}

impl From<OutRef> for Operand {
    fn from(o: OutRef) -> Self {
        Operand::Out(o)
    }
}

impl From<&OutRef> for Operand {
    fn from(o: &OutRef) -> Self {
        Operand::Out(o.clone())
    }
}

impl From<NodeId> for Operand {
    fn from(n: NodeId) -> Self {
        Operand::Out(n.out())
    }
}

impl From<Value> for Operand {
    fn from(v: Value) -> Self {
        Operand::Const(v)
    }
}

impl From<f64> for Operand {
    fn from(x: f64) -> Self {
        Operand::Const(Value::Float(x))
    }
}

impl From<i64> for Operand {
    fn from(x: i64) -> Self {
        Operand::Const(Value::Int(x))
    }
}

impl From<Operand> for Input {
    fn from(o: Operand) -> Self {
        match o {
            Operand::Out(r) => Input::Edge(r),
            Operand::Const(v) => Input::Const(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub op: String,
    pub params: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, Input>,
}

impl Node {
    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.get(name)
    }

    pub fn param_f64(&self, name: &str) -> f64 {
        self.params.get(name).and_then(Value::as_f64).unwrap_or(f64::NAN)
    }

    pub fn param_i64(&self, name: &str) -> i64 {
        self.params.get(name).and_then(Value::as_i64).unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &OutRef)> {
        self.inputs.iter().filter_map(|(s, i)| match i {
            Input::Edge(r) => Some((s.as_str(), r)),
            Input::Const(_) => None,
        })
    }
}

/// Finalized, immutable compute graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub outputs: BTreeMap<String, OutRef>,
    /// Free-form annotations (for example a mask's crack depth).
    pub meta: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown op `{0}`")]
    UnknownOp(String),
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("op `{op}` has no input socket `{socket}`")]
    UnknownSocket { op: String, socket: String },
    #[error("kind mismatch on `{socket}`: expected {expected}, got {got}")]
    KindMismatch { socket: String, expected: String, got: String },
    #[error("edge to {0} would create a cycle")]
    CycleDetected(NodeId),
    #[error("{node} has no output `{output}`")]
    UnknownOutput { node: NodeId, output: String },
    #[error("ambiguous kind for `{op}` over {kinds:?}; insert an explicit cast")]
    AmbiguousKind { op: String, kinds: Vec<ValueKind> },
    #[error("cannot cast {from} to {to}")]
    UnsupportedCast { from: String, to: String },
    #[error("op `{op}` has no param `{param}`")]
    UnknownParam { op: String, param: String },
    #[error("param `{param}` of `{op}`: {reason}")]
    BadParam { op: String, param: String, reason: String },
    #[error("graph has no output `{0}`")]
    NoSuchGraphOutput(String),
}

/// Kinds of each output socket of each node, in node order.
pub type NodeKinds = Vec<BTreeMap<String, ValueKind>>;

impl Graph {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn output(&self, name: &str) -> Result<&OutRef, GraphError> {
        self.outputs
            .get(name)
            .ok_or_else(|| GraphError::NoSuchGraphOutput(name.to_string()))
    }

    /// Re-runs kind inference over the whole graph.
    pub fn infer_kinds(&self) -> Result<NodeKinds, (NodeId, GraphError)> {
        let mut kinds: NodeKinds = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            let sig = catalog::lookup(&node.op).ok_or_else(|| (id, GraphError::UnknownOp(node.op.clone())))?;
            let mut bound = BTreeMap::new();
            for (socket, input) in &node.inputs {
                let k = match input {
                    Input::Const(v) => v.kind().ok_or_else(|| {
                        (
                            id,
                            GraphError::KindMismatch {
                                socket: socket.clone(),
                                expected: "field value".into(),
                                got: "Str".into(),
                            },
                        )
                    })?,
                    Input::Edge(r) => {
                        if r.node.index() >= i {
                            return Err((id, GraphError::CycleDetected(r.node)));
                        }
                        *kinds[r.node.index()].get(&r.output).ok_or_else(|| {
                            (id, GraphError::UnknownOutput { node: r.node, output: r.output.clone() })
                        })?
                    }
                };
                bound.insert(socket.clone(), k);
            }
            kinds.push(node_output_kinds(sig, &node.params, &bound).map_err(|e| (id, e))?);
        }
        Ok(kinds)
    }

    /// Kind of a graph output.
    pub fn output_kind(&self, name: &str) -> Result<ValueKind, GraphError> {
        let r = self.output(name)?;
        let kinds = self.infer_kinds().map_err(|(_, e)| e)?;
        kinds
            .get(r.node.index())
            .and_then(|m| m.get(&r.output))
            .copied()
            .ok_or_else(|| GraphError::UnknownOutput { node: r.node, output: r.output.clone() })
    }

    /// Names and kinds of the graph's `input` nodes.
    pub fn inputs(&self) -> BTreeMap<String, ValueKind> {
        self.nodes
            .iter()
            .filter(|n| n.op == "input")
            .filter_map(|n| {
                let name = n.param("name")?.as_str()?.to_string();
                let kind = ValueKind::parse(n.param("kind")?.as_str()?)?;
                Some((name, kind))
            })
            .collect()
    }

    /// Number of edges consuming each node (any output socket), plus graph outputs.
    pub fn use_counts(&self) -> Vec<usize> {
        let mut uses = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            for (_, r) in node.edges() {
                if let Some(u) = uses.get_mut(r.node.index()) {
                    *u += 1;
                }
            }
        }
        for r in self.outputs.values() {
            if let Some(u) = uses.get_mut(r.node.index()) {
                *u += 1;
            }
        }
        uses
    }

    /// Nodes reachable backwards from the given outputs, as a mask over ids.
    pub fn ancestors_of<'a, I: IntoIterator<Item = &'a OutRef>>(&self, roots: I) -> Vec<bool> {
        let mut live = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = roots
            .into_iter()
            .map(|r| r.node.index())
            .filter(|&i| i < self.nodes.len())
            .collect();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut live[i], true) {
                continue;
            }
            for (_, r) in self.nodes[i].edges() {
                if r.node.index() < self.nodes.len() {
                    stack.push(r.node.index());
                }
            }
        }
        live
    }
}

/// Resolves a node's output kinds from its signature, params and bound input kinds.
pub fn node_output_kinds(
    sig: &OpSignature,
    params: &BTreeMap<String, Value>,
    bound: &BTreeMap<String, ValueKind>,
) -> Result<BTreeMap<String, ValueKind>, GraphError> {
    let mut generic_kinds = Vec::new();
    for s in sig.inputs {
        let got = *bound.get(s.name).ok_or_else(|| GraphError::MissingInput(s.name.to_string()))?;
        match s.kind {
            SocketKind::Fixed(want) => {
                if !socket_accepts(want, got) {
                    return Err(GraphError::KindMismatch {
                        socket: s.name.to_string(),
                        expected: want.to_string(),
                        got: got.to_string(),
                    });
                }
            }
            SocketKind::Generic => {
                if got == ValueKind::Bool {
                    return Err(GraphError::KindMismatch {
                        socket: s.name.to_string(),
                        expected: "numeric".into(),
                        got: got.to_string(),
                    });
                }
                generic_kinds.push(got);
            }
            SocketKind::Any => {}
        }
    }
    if let Some(extra) = bound.keys().find(|k| sig.input(k).is_none()) {
        return Err(GraphError::UnknownSocket { op: sig.name.to_string(), socket: extra.clone() });
    }
    let mut out = BTreeMap::new();
    for o in sig.outputs {
        let k = match o.kind {
            OutKind::Fixed(k) => k,
            OutKind::Unify => infer_kind(sig.name, &generic_kinds)?,
            OutKind::UnifyFloat => match infer_kind(sig.name, &generic_kinds)? {
                ValueKind::Int => ValueKind::Float,
                k => k,
            },
            OutKind::FromConst => params
                .get("value")
                .and_then(Value::kind)
                .ok_or_else(|| GraphError::BadParam {
                    op: sig.name.into(),
                    param: "value".into(),
                    reason: "constant must be a field value".into(),
                })?,
            OutKind::FromParam(p) => {
                let target = params
                    .get(p)
                    .and_then(Value::as_str)
                    .and_then(ValueKind::parse)
                    .ok_or_else(|| GraphError::BadParam {
                        op: sig.name.into(),
                        param: p.into(),
                        reason: "expected a kind name".into(),
                    })?;
                if sig.name == "cast" {
                    let from = bound.get("x").copied().ok_or_else(|| GraphError::MissingInput("x".into()))?;
                    if cast_rule(from, target).is_none() {
                        return Err(GraphError::UnsupportedCast { from: from.to_string(), to: target.to_string() });
                    }
                }
                target
            }
        };
        out.insert(o.name.to_string(), k);
    }
    Ok(out)
}

/// Whether a socket declared as `want` accepts a bound value of kind `got`.
pub fn socket_accepts(want: ValueKind, got: ValueKind) -> bool {
    if want == got {
        return true;
    }
    match want {
        ValueKind::Float => got == ValueKind::Int,
        ValueKind::Vec2 | ValueKind::Vec3 | ValueKind::Color => got.is_scalar_numeric(),
        ValueKind::Int | ValueKind::Bool => false,
    }
}

/// Checks and completes a param map against a signature (fills defaults).
fn resolve_params(
    sig: &OpSignature,
    given: BTreeMap<String, Value>,
) -> Result<BTreeMap<String, Value>, GraphError> {
    let bad = |param: &str, reason: String| GraphError::BadParam {
        op: sig.name.to_string(),
        param: param.to_string(),
        reason,
    };
    if let Some(k) = given.keys().find(|k| sig.param(k).is_none()) {
        return Err(GraphError::UnknownParam { op: sig.name.to_string(), param: k.clone() });
    }
    let mut out = BTreeMap::new();
    for p in sig.params {
        let v = match given.get(p.name) {
            Some(v) => v.clone(),
            None => match p.default {
                ParamDefault::Required => return Err(bad(p.name, "required".into())),
                ParamDefault::Float(x) => Value::Float(x),
                ParamDefault::Int(i) => Value::Int(i),
                ParamDefault::Bool(b) => Value::Bool(b),
                ParamDefault::Str(s) => Value::Str(s.to_string()),
            },
        };
        let v = match (p.kind, v) {
            (ParamKind::Float, Value::Int(i)) => Value::Float(i as f64),
            (ParamKind::Float, v @ Value::Float(_))
            | (ParamKind::Int, v @ Value::Int(_))
            | (ParamKind::Bool, v @ Value::Bool(_))
            | (ParamKind::Str, v @ Value::Str(_))
            | (ParamKind::Any, v) => v,
            (_, v) => return Err(bad(p.name, format!("expected {:?}, got {}", p.kind, v.tag()))),
        };
        if !v.is_finite() {
            return Err(bad(p.name, "must be finite".into()));
        }
        if let (Some((lo, hi)), Some(x)) = (p.range, v.as_f64()) {
            if !(x >= lo && x <= hi) {
                return Err(bad(p.name, format!("{x} outside [{lo}, {hi}]")));
            }
        }
        out.insert(p.name.to_string(), v);
    }
    Ok(out)
}

/// Binary operator symbols resolved through the promotion lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
}

impl BinOp {
    pub fn op_name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::FloorDiv => "floordiv",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv]
            .into_iter()
            .find(|b| b.symbol() == s)
    }

    pub fn from_op_name(s: &str) -> Option<BinOp> {
        [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv]
            .into_iter()
            .find(|b| b.op_name() == s)
    }

    fn fold_f64(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::FloorDiv => (a / b).floor(),
        }
    }
}

/// Single-owner graph builder.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    kinds: NodeKinds,
    outputs: BTreeMap<String, OutRef>,
    meta: BTreeMap<String, Value>,
    inputs_by_name: BTreeMap<String, NodeId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends one node. Params missing from `params` take catalog defaults.
    pub fn add_node<P, I, S, T>(&mut self, op: &str, params: P, inputs: I) -> Result<NodeId, GraphError>
    where
        P: IntoIterator<Item = (S, Value)>,
        I: IntoIterator<Item = (T, Operand)>,
        S: Into<String>,
        T: Into<String>,
    {
        let sig = catalog::lookup(op).ok_or_else(|| GraphError::UnknownOp(op.to_string()))?;
        let params = resolve_params(sig, params.into_iter().map(|(k, v)| (k.into(), v)).collect())?;
        let inputs: BTreeMap<String, Input> =
            inputs.into_iter().map(|(k, v)| (k.into(), Input::from(v))).collect();
        let mut bound = BTreeMap::new();
        for (socket, input) in &inputs {
            if sig.input(socket).is_none() {
                return Err(GraphError::UnknownSocket { op: op.to_string(), socket: socket.clone() });
            }
            let k = match input {
                Input::Const(v) => v.kind().ok_or_else(|| GraphError::KindMismatch {
                    socket: socket.clone(),
                    expected: "field value".into(),
                    got: "Str".into(),
                })?,
                Input::Edge(r) => self.kind_of(r)?,
            };
            bound.insert(socket.clone(), k);
        }
        let out_kinds = node_output_kinds(sig, &params, &bound)?;
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { id, op: op.to_string(), params, inputs });
        self.kinds.push(out_kinds);
        Ok(id)
    }

    /// Kind of an existing node output; edges to missing nodes are cycles.
    pub fn kind_of(&self, r: &OutRef) -> Result<ValueKind, GraphError> {
        let outs = self.kinds.get(r.node.index()).ok_or(GraphError::CycleDetected(r.node))?;
        outs.get(&r.output)
            .copied()
            .ok_or_else(|| GraphError::UnknownOutput { node: r.node, output: r.output.clone() })
    }

    pub fn operand_kind(&self, o: &Operand) -> Result<ValueKind, GraphError> {
        match o {
            Operand::Out(r) => self.kind_of(r),
            Operand::Const(v) => v.kind().ok_or_else(|| GraphError::KindMismatch {
                socket: "operand".into(),
                expected: "field value".into(),
                got: "Str".into(),
            }),
        }
    }

    /// A named graph input; repeated calls with the same name share one node.
    pub fn input(&mut self, name: &str, kind: ValueKind) -> Result<OutRef, GraphError> {
        if let Some(&id) = self.inputs_by_name.get(name) {
            let existing = self.kind_of(&id.out())?;
            if existing != kind {
                return Err(GraphError::KindMismatch {
                    socket: name.to_string(),
                    expected: existing.to_string(),
                    got: kind.to_string(),
                });
            }
            return Ok(id.out());
        }
        let id = self.add_node(
            "input",
            [("name", Value::from(name)), ("kind", Value::from(kind.name()))],
            std::iter::empty::<(&str, Operand)>(),
        )?;
        self.inputs_by_name.insert(name.to_string(), id);
        Ok(id.out())
    }

    pub fn constant(&mut self, v: Value) -> Result<NodeId, GraphError> {
        self.add_node("const", [("value", v)], std::iter::empty::<(&str, Operand)>())
    }

    /// Inserts an explicit cast node.
    pub fn cast(&mut self, value: impl Into<Operand>, target: ValueKind) -> Result<NodeId, GraphError> {
        self.add_node("cast", [("to", Value::from(target.name()))], [("x", value.into())])
    }

    /// Operator-overload entry point: `a <sym> b` with kind inference.
    ///
    /// Two Int/Float/Bool literals fold into a single `const` node; anything
    /// else builds exactly the node the explicit `add_node` call would.
    pub fn binary(&mut self, op: BinOp, a: impl Into<Operand>, b: impl Into<Operand>) -> Result<NodeId, GraphError> {
        let (a, b) = (a.into(), b.into());
        let ka = self.operand_kind(&a)?;
        let kb = self.operand_kind(&b)?;
        let result = infer_kind(op.op_name(), &[ka, kb])?;
        if let (Operand::Const(x), Operand::Const(y)) = (&a, &b) {
            if let (Some(folded), true) = (fold_literals(op, x, y, result), ka.arity() == 1 && kb.arity() == 1) {
                return self.constant(folded);
            }
        }
        self.add_node(op.op_name(), std::iter::empty::<(&str, Value)>(), [("a", a), ("b", b)])
    }

    pub fn set_output(&mut self, name: &str, r: OutRef) -> Result<(), GraphError> {
        self.kind_of(&r)?;
        self.outputs.insert(name.to_string(), r);
        Ok(())
    }

    pub fn set_meta(&mut self, key: &str, v: Value) {
        self.meta.insert(key.to_string(), v);
    }

    /// Copies `graph` into this builder. `input` nodes whose name appears in
    /// `bindings` are replaced by the bound operand; other inputs are merged
    /// with this builder's inputs of the same name. Returns the graph's
    /// outputs remapped into this builder.
    pub fn splice(
        &mut self,
        graph: &Graph,
        bindings: &BTreeMap<String, Operand>,
    ) -> Result<BTreeMap<String, OutRef>, GraphError> {
        enum Mapped {
            Node(NodeId),
            Operand(Operand),
        }
        let mut map: Vec<Mapped> = Vec::with_capacity(graph.nodes.len());
        for node in &graph.nodes {
            if node.op == "input" {
                let name = node.param("name").and_then(Value::as_str).unwrap_or_default().to_string();
                if let Some(op) = bindings.get(&name) {
                    map.push(Mapped::Operand(op.clone()));
                    continue;
                }
                let kind = node
                    .param("kind")
                    .and_then(Value::as_str)
                    .and_then(ValueKind::parse)
                    .unwrap_or(ValueKind::Vec3);
                let r = self.input(&name, kind)?;
                map.push(Mapped::Node(r.node));
                continue;
            }
            let remap = |r: &OutRef| -> Result<Operand, GraphError> {
                match map.get(r.node.index()) {
                    Some(Mapped::Node(id)) => Ok(Operand::Out(id.socket(&r.output))),
                    Some(Mapped::Operand(op)) => Ok(op.clone()),
                    None => Err(GraphError::CycleDetected(r.node)),
                }
            };
            let mut inputs = Vec::with_capacity(node.inputs.len());
            for (socket, input) in &node.inputs {
                let op = match input {
                    Input::Const(v) => Operand::Const(v.clone()),
                    Input::Edge(r) => remap(r)?,
                };
                inputs.push((socket.clone(), op));
            }
            let id = self.add_node(&node.op, node.params.clone(), inputs)?;
            map.push(Mapped::Node(id));
        }
        let mut outs = BTreeMap::new();
        for (name, r) in &graph.outputs {
            let mapped = match map.get(r.node.index()) {
                Some(Mapped::Node(id)) => id.socket(&r.output),
                Some(Mapped::Operand(Operand::Out(o))) => o.clone(),
                Some(Mapped::Operand(Operand::Const(v))) => self.constant(v.clone())?.out(),
                None => return Err(GraphError::NoSuchGraphOutput(name.clone())),
            };
            outs.insert(name.clone(), mapped);
        }
        Ok(outs)
    }

    pub fn finish(self) -> Graph {
        Graph { nodes: self.nodes, outputs: self.outputs, meta: self.meta }
    }
}

fn fold_literals(op: BinOp, a: &Value, b: &Value, result: ValueKind) -> Option<Value> {
    let (x, y) = (a.as_f64()?, b.as_f64()?);
    match result {
        ValueKind::Int => {
            let (x, y) = (a.as_i64()?, b.as_i64()?);
            let v = match op {
                BinOp::Add => x.checked_add(y)?,
                BinOp::Sub => x.checked_sub(y)?,
                BinOp::Mul => x.checked_mul(y)?,
                BinOp::FloorDiv if y != 0 => {
                    let q = x.checked_div(y)?;
                    if x % y != 0 && ((x < 0) != (y < 0)) {
                        q - 1
                    } else {
                        q
                    }
                }
                _ => return None,
            };
            Some(Value::Int(v))
        }
        ValueKind::Float => {
            let v = op.fold_f64(x, y);
            v.is_finite().then_some(Value::Float(v))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(b: &mut GraphBuilder) -> OutRef {
        b.input("vector", ValueKind::Vec3).unwrap()
    }

    #[test]
    fn add_node_binds_and_returns_dense_ids() {
        let mut b = GraphBuilder::new();
        let p = coords(&mut b);
        let n = b
            .add_node("perlin_noise", [("frequency", Value::Float(2.0))], [("p", Operand::from(p))])
            .unwrap();
        assert_eq!(n, NodeId(1));
        assert_eq!(b.kind_of(&n.out()).unwrap(), ValueKind::Float);
    }

    #[test]
    fn missing_socket_is_reported() {
        let mut b = GraphBuilder::new();
        let n1 = b.constant(Value::Float(1.0)).unwrap();
        let n2 = b.constant(Value::Float(2.0)).unwrap();
        let err = b
            .add_node("mix", std::iter::empty::<(&str, Value)>(), [("a", n1.into()), ("b", Operand::from(n2))])
            .unwrap_err();
        assert_eq!(err, GraphError::MissingInput("t".into()));
    }

    #[test]
    fn self_edge_ok_forward_edge_is_cycle() {
        let mut b = GraphBuilder::new();
        let v = b.constant(Value::Vec3([1.0, 2.0, 3.0])).unwrap();
        let sum = b.binary(BinOp::Add, v, v).unwrap();
        assert_eq!(b.kind_of(&sum.out()).unwrap(), ValueKind::Vec3);
        let later = NodeId(b.len() as u32 + 3);
        let err = b.binary(BinOp::Add, v, later).unwrap_err();
        assert_eq!(err, GraphError::CycleDetected(later));
        // The node being created cannot reference itself either.
        let own = NodeId(b.len() as u32);
        assert_eq!(b.binary(BinOp::Add, own, v).unwrap_err(), GraphError::CycleDetected(own));
    }

    #[test]
    fn kind_mismatch_on_fixed_socket() {
        let mut b = GraphBuilder::new();
        let c = b.constant(Value::Color([1.0, 0.0, 0.0])).unwrap();
        let err = b.add_node("perlin_noise", std::iter::empty::<(&str, Value)>(), [("p", Operand::from(c))]);
        assert!(matches!(err, Err(GraphError::KindMismatch { .. })));
    }

    #[test]
    fn casts() {
        let mut b = GraphBuilder::new();
        let f = b.constant(Value::Float(0.5)).unwrap();
        let v = b.cast(f, ValueKind::Vec3).unwrap();
        assert_eq!(b.kind_of(&v.out()).unwrap(), ValueKind::Vec3);
        let t = b.constant(Value::Bool(true)).unwrap();
        assert!(matches!(b.cast(t, ValueKind::Color), Err(GraphError::UnsupportedCast { .. })));
    }

    #[test]
    fn overload_matches_explicit_node() {
        let mut b = GraphBuilder::new();
        let f = b.constant(Value::Float(0.5)).unwrap();
        let v = b.constant(Value::Vec3([1.0, 2.0, 3.0])).unwrap();
        let via_op = b.binary(BinOp::Add, f, v).unwrap();
        let explicit = b
            .add_node("add", std::iter::empty::<(&str, Value)>(), [("a", Operand::from(f)), ("b", v.into())])
            .unwrap();
        let g = b.finish();
        let (x, y) = (&g.nodes[via_op.index()], &g.nodes[explicit.index()]);
        assert_eq!((&x.op, &x.params, &x.inputs), (&y.op, &y.params, &y.inputs));
    }

    #[test]
    fn literal_floor_division_folds() {
        let mut b = GraphBuilder::new();
        let n = b.binary(BinOp::FloorDiv, 7i64, 2i64).unwrap();
        let n2 = b.binary(BinOp::FloorDiv, -7i64, 2i64).unwrap();
        let g = b.finish();
        assert_eq!(g.nodes[n.index()].op, "const");
        assert_eq!(g.nodes[n.index()].param("value"), Some(&Value::Int(3)));
        assert_eq!(g.nodes[n2.index()].param("value"), Some(&Value::Int(-4)));
    }

    #[test]
    fn division_by_zero_builds_a_node() {
        let mut b = GraphBuilder::new();
        let v = b.constant(Value::Vec3([1.0, 2.0, 3.0])).unwrap();
        let d = b.binary(BinOp::Div, v, 0.0).unwrap();
        assert_eq!(b.finish().nodes[d.index()].op, "div");
    }

    #[test]
    fn params_are_checked_and_defaulted() {
        let mut b = GraphBuilder::new();
        let p = coords(&mut b);
        let err = b.add_node("perlin_noise", [("frequency", Value::Float(-1.0))], [("p", Operand::from(&p))]);
        assert!(matches!(err, Err(GraphError::BadParam { .. })));
        let n = b
            .add_node("fbm", std::iter::empty::<(&str, Value)>(), [("p", Operand::from(&p))])
            .unwrap();
        let g = b.finish();
        assert_eq!(g.nodes[n.index()].param("octaves"), Some(&Value::Int(4)));
    }

    #[test]
    fn splice_rebinds_inputs() {
        let mut inner = GraphBuilder::new();
        let p = coords(&mut inner);
        let n = inner.binary(BinOp::Mul, p, 2.0).unwrap();
        inner.set_output("out", n.out()).unwrap();
        let inner = inner.finish();

        let mut outer = GraphBuilder::new();
        let q = coords(&mut outer);
        let shifted = outer.binary(BinOp::Add, q, 1.0).unwrap();
        let bindings = BTreeMap::from([("vector".to_string(), Operand::from(shifted))]);
        let outs = outer.splice(&inner, &bindings).unwrap();
        let g = outer.finish();
        let mul = &g.nodes[outs["out"].node.index()];
        assert_eq!(mul.op, "mul");
        assert_eq!(mul.inputs["a"], Input::Edge(shifted.out()));
    }
}
