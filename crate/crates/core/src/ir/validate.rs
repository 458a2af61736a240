//! Semantic checks over a parsed graph.

use super::{node_output_kinds, Graph, Input, NodeId, ValueKind};
use crate::catalog;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code")]
pub enum Issue {
    UnknownOp { node: u32, op: String },
    DanglingEdge { node: u32, socket: String, target: u32 },
    UnknownOutput { node: u32, socket: String, target: u32, output: String },
    KindError { node: u32, message: String },
    BadParam { node: u32, message: String },
    BadGraphOutput { name: String, message: String },
    DeadNode { node: u32 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks ops, edges, kinds, params and outputs. Dead nodes are warnings.
pub fn validate(g: &Graph) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let mut kinds: Vec<Option<BTreeMap<String, ValueKind>>> = Vec::with_capacity(g.nodes.len());
    for (i, node) in g.nodes.iter().enumerate() {
        let id = i as u32;
        let Some(sig) = catalog::lookup(&node.op) else {
            rep.errors.push(Issue::UnknownOp { node: id, op: node.op.clone() });
            kinds.push(None);
            continue;
        };
        let mut bound = BTreeMap::new();
        let mut ok = true;
        for (socket, input) in &node.inputs {
            match input {
                Input::Const(v) => match v.kind() {
                    Some(k) => {
                        bound.insert(socket.clone(), k);
                    }
                    None => {
                        ok = false;
                        rep.errors.push(Issue::KindError {
                            node: id,
                            message: format!("socket `{socket}` bound to a string"),
                        });
                    }
                },
                Input::Edge(r) => {
                    let t = r.node.index();
                    if t >= i {
                        ok = false;
                        rep.errors.push(Issue::DanglingEdge { node: id, socket: socket.clone(), target: r.node.0 });
                        continue;
                    }
                    match &kinds[t] {
                        None => ok = false,
                        Some(outs) => match outs.get(&r.output) {
                            Some(k) => {
                                bound.insert(socket.clone(), *k);
                            }
                            None => {
                                ok = false;
                                rep.errors.push(Issue::UnknownOutput {
                                    node: id,
                                    socket: socket.clone(),
                                    target: r.node.0,
                                    output: r.output.clone(),
                                });
                            }
                        },
                    }
                }
            }
        }
        for (name, v) in &node.params {
            match sig.param(name) {
                None => rep.errors.push(Issue::BadParam { node: id, message: format!("unknown param `{name}`") }),
                Some(p) => {
                    if let (Some((lo, hi)), Some(x)) = (p.range, v.as_f64()) {
                        if !(x >= lo && x <= hi) {
                            rep.errors.push(Issue::BadParam {
                                node: id,
                                message: format!("`{name}` = {x} outside [{lo}, {hi}]"),
                            });
                        }
                    }
                }
            }
        }
        if !ok {
            kinds.push(None);
            continue;
        }
        match node_output_kinds(sig, &node.params, &bound) {
            Ok(k) => kinds.push(Some(k)),
            Err(e) => {
                rep.errors.push(Issue::KindError { node: id, message: e.to_string() });
                kinds.push(None);
            }
        }
    }
    for (name, r) in &g.outputs {
        let known = kinds
            .get(r.node.index())
            .map(|k| k.as_ref().is_none_or(|m| m.contains_key(&r.output)));
        match known {
            None => rep.errors.push(Issue::BadGraphOutput {
                name: name.clone(),
                message: format!("points at missing node {}", r.node),
            }),
            Some(false) => rep.errors.push(Issue::BadGraphOutput {
                name: name.clone(),
                message: format!("{} has no output `{}`", r.node, r.output),
            }),
            Some(true) => {}
        }
    }
    let live = g.ancestors_of(g.outputs.values());
    for (i, l) in live.iter().enumerate() {
        if !l && g.nodes[i].op != "input" {
            rep.warnings.push(Issue::DeadNode { node: NodeId(i as u32).0 });
        }
    }
    rep
}
