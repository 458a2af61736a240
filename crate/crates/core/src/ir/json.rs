//! Versioned JSON form of a graph.
//!
//! ```json
//! {"version": 1,
//!  "nodes": [{"id": 0, "op": "input",
//!             "params": {"name": {"kind": "Str", "v": "vector"}, "kind": {"kind": "Str", "v": "Vec3"}},
//!             "inputs": {}}],
//!  "outputs": {"out": {"node": 0, "output": "out"}}}
//! ```
//!
//! Parsing is structural only; call [`super::validate`] for semantic checks.

use super::{Graph, Input, Node, NodeId, OutRef, Value};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggedValue {
    kind: String,
    v: serde_json::Value,
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = match self {
            Value::Int(i) => serde_json::json!(i),
            Value::Float(x) => serde_json::json!(x),
            Value::Vec2(a) => serde_json::json!(a),
            Value::Vec3(a) | Value::Color(a) => serde_json::json!(a),
            Value::Bool(b) => serde_json::json!(b),
            Value::Str(t) => serde_json::json!(t),
        };
        TaggedValue { kind: self.tag().to_string(), v }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let t = TaggedValue::deserialize(d)?;
        let lanes = |n: usize| -> Result<Vec<f64>, D::Error> {
            let arr = t
                .v
                .as_array()
                .filter(|a| a.len() == n)
                .ok_or_else(|| D::Error::custom(format!("{} needs {n} numbers", t.kind)))?;
            arr.iter()
                .map(|x| x.as_f64().ok_or_else(|| D::Error::custom("expected a number")))
                .collect()
        };
        Ok(match t.kind.as_str() {
            "Int" => Value::Int(t.v.as_i64().ok_or_else(|| D::Error::custom("Int needs an integer"))?),
            "Float" => Value::Float(t.v.as_f64().ok_or_else(|| D::Error::custom("Float needs a number"))?),
            "Bool" => Value::Bool(t.v.as_bool().ok_or_else(|| D::Error::custom("Bool needs true/false"))?),
            "Str" => Value::Str(t.v.as_str().ok_or_else(|| D::Error::custom("Str needs a string"))?.to_string()),
            "Vec2" => {
                let l = lanes(2)?;
                Value::Vec2([l[0], l[1]])
            }
            "Vec3" => {
                let l = lanes(3)?;
                Value::Vec3([l[0], l[1], l[2]])
            }
            "Color" => {
                let l = lanes(3)?;
                Value::Color([l[0], l[1], l[2]])
            }
            other => return Err(D::Error::custom(format!("unknown value kind `{other}`"))),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefJson {
    node: u32,
    output: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InputJson {
    Edge(RefJson),
    Const { #[serde(rename = "const")] value: Value },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    id: u32,
    op: String,
    #[serde(default)]
    params: BTreeMap<String, Value>,
    #[serde(default)]
    inputs: BTreeMap<String, InputJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    version: u32,
    nodes: Vec<NodeJson>,
    outputs: BTreeMap<String, RefJson>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported graph format version {0}")]
    Version(u32),
    #[error("node at position {pos} has id {id}; ids must be dense and in order")]
    NodeOrder { pos: usize, id: u32 },
}

fn ref_json(r: &OutRef) -> RefJson {
    RefJson { node: r.node.0, output: r.output.clone() }
}

fn out_ref(r: RefJson) -> OutRef {
    OutRef { node: NodeId(r.node), output: r.output }
}

impl Graph {
    pub fn to_json_value(&self) -> serde_json::Value {
        let g = GraphJson {
            version: FORMAT_VERSION,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id.0,
                    op: n.op.clone(),
                    params: n.params.clone(),
                    inputs: n
                        .inputs
                        .iter()
                        .map(|(k, i)| {
                            let j = match i {
                                Input::Edge(r) => InputJson::Edge(ref_json(r)),
                                Input::Const(v) => InputJson::Const { value: v.clone() },
                            };
                            (k.clone(), j)
                        })
                        .collect(),
                })
                .collect(),
            outputs: self.outputs.iter().map(|(k, r)| (k.clone(), ref_json(r))).collect(),
            meta: self.meta.clone(),
        };
        serde_json::to_value(g).expect("graph serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Graph, ParseError> {
        Self::from_json_value(serde_json::from_str(s)?)
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<Graph, ParseError> {
        let g: GraphJson = serde_json::from_value(v)?;
        if g.version != FORMAT_VERSION {
            return Err(ParseError::Version(g.version));
        }
        let mut nodes = Vec::with_capacity(g.nodes.len());
        for (pos, n) in g.nodes.into_iter().enumerate() {
            if n.id as usize != pos {
                return Err(ParseError::NodeOrder { pos, id: n.id });
            }
            nodes.push(Node {
                id: NodeId(n.id),
                op: n.op,
                params: n.params,
                inputs: n
                    .inputs
                    .into_iter()
                    .map(|(k, i)| {
                        let i = match i {
                            InputJson::Edge(r) => Input::Edge(out_ref(r)),
                            InputJson::Const { value } => Input::Const(value),
                        };
                        (k, i)
                    })
                    .collect(),
            });
        }
        Ok(Graph {
            nodes,
            outputs: g.outputs.into_iter().map(|(k, r)| (k, out_ref(r))).collect(),
            meta: g.meta,
        })
    }
}
