//! Instance and distribution tracing of sampler functions.
//!
//! Instance traces record the draws, choices and generator calls of one
//! seeded run and can be replayed with edits. Distribution graphs cover every
//! branch of every choice without calling generators; shared sub-samplers
//! are traced once.

use crate::ir::Graph;
use crate::math::{hash_str, hash_words};
use crate::rng::RandomStream;
use crate::sampler::{
    Decider, Event, Expr, Interp, Live, ParamDist, SValue, SamplerCall, SamplerError, SamplerLibrary, Step,
    MAX_DEPTH,
};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("more than {0} control paths")]
    PathExplosion(u64),
    #[error("sampler `{0}` recurses into itself")]
    Recursion(String),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

/// Record of one seeded sampler run.
#[derive(Debug, Clone)]
pub struct InstanceTrace {
    pub sampler: String,
    pub seed: u64,
    /// Split path of the root stream.
    pub path: Vec<String>,
    pub events: Vec<Event>,
    pub graph: Arc<Graph>,
}

/// Runs `id` on `RandomStream::new(seed)` in a tracing context.
pub fn trace_instance(lib: &SamplerLibrary, id: &str, seed: u64) -> Result<InstanceTrace, TraceError> {
    trace_instance_at(lib, id, RandomStream::new(seed))
}

/// As [`trace_instance`] on an arbitrary (fresh) stream.
pub fn trace_instance_at(lib: &SamplerLibrary, id: &str, stream: RandomStream) -> Result<InstanceTrace, TraceError> {
    let (seed, path) = (stream.seed(), stream.path().to_vec());
    let mut it = Interp::new(lib, Live { allow_host: false });
    let v = it.run(id, BTreeMap::new(), stream, "", 0)?;
    let graph = match v {
        SValue::Graph(g) => g,
        _ => return Err(SamplerError::ResultNotGraph(id.to_string()).into()),
    };
    Ok(InstanceTrace { sampler: id.to_string(), seed, path, events: it.events, graph })
}

/// Replays recorded outcomes; names absent from the record fall back to the
/// stream. The stream always advances by the documented draw counts so
/// fallback values match a live run.
struct Replayer {
    values: HashMap<String, SValue>,
    choices: HashMap<String, usize>,
    fallbacks: usize,
}

impl Decider for Replayer {
    fn draw(&mut self, stream: &mut RandomStream, name: &str, dist: &ParamDist) -> Result<SValue, SamplerError> {
        let live = dist.sample(stream).map_err(|source| SamplerError::Rng { name: name.to_string(), source })?;
        Ok(match self.values.get(name) {
            Some(v) => v.clone(),
            None => {
                self.fallbacks += 1;
                live
            }
        })
    }

    fn choose(&mut self, stream: &mut RandomStream, name: &str, weights: &[f64]) -> Result<usize, SamplerError> {
        let live = stream.choice(weights).map_err(|source| SamplerError::Rng { name: name.to_string(), source })?;
        Ok(match self.choices.get(name) {
            Some(&i) => i,
            None => {
                self.fallbacks += 1;
                live
            }
        })
    }

    fn allow_host(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub graph: Arc<Graph>,
    pub events: Vec<Event>,
    /// Draws and choices not found in the trace or overrides.
    pub fallbacks: usize,
}

/// Rebuilds the asset from `trace` with `overrides` substituted.
pub fn replay(
    lib: &SamplerLibrary,
    trace: &InstanceTrace,
    overrides: &BTreeMap<String, SValue>,
) -> Result<Replay, TraceError> {
    let mut values = HashMap::new();
    let mut choices = HashMap::new();
    let mut specs: HashMap<&str, &Event> = HashMap::new();
    for e in &trace.events {
        match e {
            Event::Draw { name, value, .. } => {
                values.insert(name.clone(), value.clone());
            }
            Event::Choice { name, index, .. } => {
                choices.insert(name.clone(), *index);
            }
            Event::Call { .. } => continue,
        }
        specs.insert(e.name(), e);
    }
    for (name, v) in overrides {
        let out_of_range = || SamplerError::OutOfRange { name: name.clone(), value: v.to_string() };
        match specs.get(name.as_str()) {
            None => return Err(SamplerError::UnknownParam(name.clone()).into()),
            Some(Event::Draw { dist, .. }) => {
                let v = dist.coerce(v.clone());
                if !dist.contains(&v) {
                    return Err(out_of_range().into());
                }
                values.insert(name.clone(), v);
            }
            Some(Event::Choice { weights, .. }) => {
                let i = v.as_i64().filter(|i| (0..weights.len() as i64).contains(i)).ok_or_else(out_of_range)?;
                choices.insert(name.clone(), i as usize);
            }
            Some(Event::Call { .. }) => unreachable!(),
        }
    }
    let stream = RandomStream::at(trace.seed, trace.path.clone());
    let mut it = Interp::new(lib, Replayer { values, choices, fallbacks: 0 });
    let v = it.run(&trace.sampler, BTreeMap::new(), stream, "", 0)?;
    let graph = v.as_graph().cloned().ok_or_else(|| SamplerError::ResultNotGraph(trace.sampler.clone()))?;
    Ok(Replay { graph, events: it.events, fallbacks: it.decider.fallbacks })
}

impl ParamDist {
    pub fn from_json(v: &serde_json::Value) -> Option<ParamDist> {
        let f = |k: &str| v.get(k).and_then(|x| x.as_f64());
        Some(match v.get("type")?.as_str()? {
            "uniform" => ParamDist::Uniform { lo: f("lo")?, hi: f("hi")? },
            "normal" => ParamDist::Normal { mu: f("mu")?, sigma: f("sigma")?, clip: v.get("clip")?.as_bool()? },
            "randint" => ParamDist::RandInt { n: v.get("n")?.as_i64()? },
            "discrete" => ParamDist::Discrete {
                options: v.get("options")?.as_array()?.iter().map(SValue::from_json).collect::<Option<_>>()?,
                weights: v.get("weights")?.as_array()?.iter().map(|w| w.as_f64()).collect::<Option<_>>()?,
            },
            _ => return None,
        })
    }
}

impl Event {
    pub fn from_json(v: &serde_json::Value) -> Option<Event> {
        let name = v.get("name")?.as_str()?.to_string();
        Some(match v.get("event")?.as_str()? {
            "draw" => Event::Draw {
                name,
                dist: ParamDist::from_json(v.get("spec")?)?,
                value: SValue::from_json(v.get("value")?)?,
            },
            "choice" => Event::Choice {
                name,
                weights: v.get("weights")?.as_array()?.iter().map(|w| w.as_f64()).collect::<Option<_>>()?,
                index: v.get("index")?.as_u64()? as usize,
            },
            "call" => Event::Call {
                name,
                generator: v.get("generator")?.as_str()?.to_string(),
                args: v.get("args")?.as_object()?.iter().map(|(k, x)| (k.clone(), x.clone())).collect(),
                nodes: v.get("nodes")?.as_u64()? as usize,
            },
            _ => return None,
        })
    }
}

impl InstanceTrace {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "sampler": self.sampler,
            "seed": self.seed,
            "path": self.path,
            "events": self.events.iter().map(Event::to_json).collect::<Vec<_>>(),
            "graph": self.graph.to_json_value(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<InstanceTrace, TraceError> {
        let bad = |what: &str| TraceError::Malformed(what.to_string());
        let sampler = v.get("sampler").and_then(|s| s.as_str()).ok_or_else(|| bad("sampler"))?.to_string();
        let seed = v.get("seed").and_then(|s| s.as_u64()).ok_or_else(|| bad("seed"))?;
        let path = v
            .get("path")
            .and_then(|p| p.as_array())
            .and_then(|p| p.iter().map(|l| l.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
            .ok_or_else(|| bad("path"))?;
        let events = v
            .get("events")
            .and_then(|e| e.as_array())
            .and_then(|e| e.iter().map(Event::from_json).collect::<Option<Vec<_>>>())
            .ok_or_else(|| bad("events"))?;
        let graph = Graph::from_json_value(v.get("graph").ok_or_else(|| bad("graph"))?.clone())
            .map_err(|e| TraceError::Malformed(e.to_string()))?;
        Ok(InstanceTrace { sampler, seed, path, events, graph: Arc::new(graph) })
    }
}

pub type SeqId = usize;

/// Control node of a distribution graph. Names are local to the sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum DNode {
    Param { name: String, dist: ParamDist },
    Choice { name: String, probs: Vec<f64>, branches: Vec<SeqId> },
    Invoke { name: String, body: SeqId },
    Call { name: String, generator: String },
}

/// Straight-line body of one traced sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    pub sampler: String,
    pub nodes: Vec<DNode>,
}

/// All control paths of a sampler. Sub-samplers with equal bindings share
/// one [`Seq`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionGraph {
    pub sampler: String,
    pub root: SeqId,
    pub seqs: Vec<Seq>,
}

pub const DEFAULT_PATH_BOUND: u64 = 1_000_000;

struct DistTracer<'a> {
    lib: &'a SamplerLibrary,
    memo: HashMap<(String, u64), SeqId>,
    seqs: Vec<Seq>,
    stack: Vec<String>,
}

fn binding_hash(call: &SamplerCall) -> u64 {
    let words: Vec<u64> = call
        .args
        .iter()
        .flat_map(|(k, e)| {
            let v = match e {
                Expr::Var(n) => hash_str(&format!("var:{n}")),
                Expr::Lit(x) => hash_str(&format!("lit:{x}")),
            };
            [hash_str(k), v]
        })
        .collect();
    hash_words(0, &words)
}

impl DistTracer<'_> {
    fn trace(&mut self, call: &SamplerCall) -> Result<SeqId, TraceError> {
        let key = (call.sampler.clone(), binding_hash(call));
        if let Some(&id) = self.memo.get(&key) {
            return Ok(id);
        }
        if self.stack.contains(&call.sampler) {
            return Err(TraceError::Recursion(call.sampler.clone()));
        }
        if self.stack.len() > MAX_DEPTH {
            return Err(SamplerError::RecursionLimit(MAX_DEPTH).into());
        }
        let f = self.lib.sampler(&call.sampler)?;
        self.stack.push(call.sampler.clone());
        let mut nodes = Vec::with_capacity(f.steps.len());
        for step in &f.steps {
            nodes.push(match step {
                Step::Draw { name, dist } => DNode::Param { name: name.clone(), dist: dist.clone() },
                Step::Choice { name, weights, branches } => {
                    crate::rng::check_weights(weights)
                        .map_err(|source| SamplerError::Rng { name: name.clone(), source })?;
                    let total: f64 = weights.iter().sum();
                    let probs = weights.iter().map(|w| w / total).collect();
                    let branches = branches.iter().map(|b| self.trace(b)).collect::<Result<_, _>>()?;
                    DNode::Choice { name: name.clone(), probs, branches }
                }
                Step::Invoke { name, call } => DNode::Invoke { name: name.clone(), body: self.trace(call)? },
                Step::Call { name, generator, .. } => {
                    self.lib.generator(generator)?;
                    DNode::Call { name: name.clone(), generator: generator.clone() }
                }
                Step::Host { name, .. } => {
                    return Err(SamplerError::UntraceableControlFlow(format!("{}:{name}", call.sampler)).into())
                }
            });
        }
        self.stack.pop();
        let id = self.seqs.len();
        self.seqs.push(Seq { sampler: call.sampler.clone(), nodes });
        self.memo.insert(key, id);
        Ok(id)
    }
}

pub fn trace_distribution(lib: &SamplerLibrary, id: &str) -> Result<DistributionGraph, TraceError> {
    trace_distribution_bounded(lib, id, DEFAULT_PATH_BOUND)
}

pub fn trace_distribution_bounded(lib: &SamplerLibrary, id: &str, bound: u64) -> Result<DistributionGraph, TraceError> {
    let mut t = DistTracer { lib, memo: HashMap::new(), seqs: Vec::new(), stack: Vec::new() };
    let root = t.trace(&SamplerCall::new(id))?;
    let g = DistributionGraph { sampler: id.to_string(), root, seqs: t.seqs };
    if g.path_count() > bound as u128 {
        return Err(TraceError::PathExplosion(bound));
    }
    Ok(g)
}

/// One control path: taken choices, in execution order, with probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub decisions: Vec<(String, usize)>,
    pub prob: f64,
    /// Draws on this path, in order.
    pub draws: Vec<(String, ParamDist)>,
}

/// Flat parameter manifest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKindTag,
    pub value: Option<SValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKindTag {
    Draw(ParamDist),
    Choice(Vec<f64>),
}

impl ParamEntry {
    pub fn to_json(&self) -> serde_json::Value {
        let mut o = match &self.kind {
            ParamKindTag::Draw(d) => json!({"name": self.name, "kind": "draw", "spec": d.to_json()}),
            ParamKindTag::Choice(p) => json!({"name": self.name, "kind": "choice", "probs": p}),
        };
        if let Some(v) = &self.value {
            o["value"] = v.to_json();
        }
        o
    }
}

impl DistributionGraph {
    /// Number of control paths (saturating).
    pub fn path_count(&self) -> u128 {
        let mut memo = vec![None; self.seqs.len()];
        self.paths_of(self.root, &mut memo)
    }

    fn paths_of(&self, s: SeqId, memo: &mut Vec<Option<u128>>) -> u128 {
        if let Some(n) = memo[s] {
            return n;
        }
        let mut n: u128 = 1;
        for node in &self.seqs[s].nodes {
            let k = match node {
                DNode::Choice { branches, .. } => {
                    branches.iter().fold(0u128, |a, &b| a.saturating_add(self.paths_of(b, memo)))
                }
                DNode::Invoke { body, .. } => self.paths_of(*body, memo),
                _ => 1,
            };
            n = n.saturating_mul(k);
        }
        memo[s] = Some(n);
        n
    }

    /// Explicit path list; `None` when there are more than `cap` paths.
    pub fn enumerate_paths(&self, cap: usize) -> Option<Vec<ControlPath>> {
        if self.path_count() > cap as u128 {
            return None;
        }
        Some(self.expand(self.root, ""))
    }

    fn expand(&self, s: SeqId, prefix: &str) -> Vec<ControlPath> {
        let mut acc = vec![ControlPath { decisions: Vec::new(), prob: 1.0, draws: Vec::new() }];
        for node in &self.seqs[s].nodes {
            let parts: Vec<ControlPath> = match node {
                DNode::Param { name, dist } => vec![ControlPath {
                    decisions: Vec::new(),
                    prob: 1.0,
                    draws: vec![(format!("{prefix}{name}"), dist.clone())],
                }],
                DNode::Choice { name, probs, branches } => {
                    let q = format!("{prefix}{name}");
                    let mut out = Vec::new();
                    for (i, (&p, &b)) in probs.iter().zip(branches).enumerate() {
                        for mut sub in self.expand(b, &format!("{q}[{i}]/")) {
                            sub.decisions.insert(0, (q.clone(), i));
                            sub.prob *= p;
                            out.push(sub);
                        }
                    }
                    out
                }
                DNode::Invoke { name, body } => self.expand(*body, &format!("{prefix}{name}/")),
                DNode::Call { .. } => continue,
            };
            let mut next = Vec::with_capacity(acc.len() * parts.len());
            for a in &acc {
                for b in &parts {
                    let mut c = a.clone();
                    c.decisions.extend(b.decisions.iter().cloned());
                    c.draws.extend(b.draws.iter().cloned());
                    c.prob *= b.prob;
                    next.push(c);
                }
            }
            acc = next;
        }
        acc
    }

    /// Every parameter on any path, by tree expansion, in execution order.
    pub fn list_params(&self) -> Vec<ParamEntry> {
        let mut out = Vec::new();
        self.list_into(self.root, "", &mut out);
        out
    }

    fn list_into(&self, s: SeqId, prefix: &str, out: &mut Vec<ParamEntry>) {
        for node in &self.seqs[s].nodes {
            match node {
                DNode::Param { name, dist } => out.push(ParamEntry {
                    name: format!("{prefix}{name}"),
                    kind: ParamKindTag::Draw(dist.clone()),
                    value: None,
                }),
                DNode::Choice { name, probs, branches } => {
                    let q = format!("{prefix}{name}");
                    out.push(ParamEntry { name: q.clone(), kind: ParamKindTag::Choice(probs.clone()), value: None });
                    for (i, &b) in branches.iter().enumerate() {
                        self.list_into(b, &format!("{q}[{i}]/"), out);
                    }
                }
                DNode::Invoke { name, body } => self.list_into(*body, &format!("{prefix}{name}/"), out),
                DNode::Call { .. } => {}
            }
        }
    }

    /// Graph JSON dialect: every node is a control node marked `"ctrl": true`;
    /// `next` edges chain a body, `branchK` edges enter choice branches.
    pub fn to_json(&self) -> serde_json::Value {
        let mut first = vec![None; self.seqs.len()];
        let mut nodes = Vec::new();
        let mut next_id = 0usize;
        let mut base = Vec::with_capacity(self.seqs.len());
        for (i, s) in self.seqs.iter().enumerate() {
            base.push(next_id);
            first[i] = Some(next_id);
            next_id += s.nodes.len().max(1);
        }
        for (si, s) in self.seqs.iter().enumerate() {
            if s.nodes.is_empty() {
                nodes.push(json!({"id": base[si], "op": "noop", "ctrl": true, "params": {"sampler": s.sampler}, "inputs": {}}));
                continue;
            }
            for (k, n) in s.nodes.iter().enumerate() {
                let id = base[si] + k;
                let mut inputs = serde_json::Map::new();
                if k + 1 < s.nodes.len() {
                    inputs.insert("next".into(), json!({"node": id + 1}));
                }
                let (op, params) = match n {
                    DNode::Param { name, dist } => ("param", json!({"name": name, "spec": dist.to_json()})),
                    DNode::Choice { name, probs, branches } => {
                        for (b, &seq) in branches.iter().enumerate() {
                            inputs.insert(format!("branch{b}"), json!({"node": first[seq]}));
                        }
                        ("choice", json!({"name": name, "probs": probs}))
                    }
                    DNode::Invoke { name, body } => {
                        inputs.insert("body".into(), json!({"node": first[*body]}));
                        ("invoke", json!({"name": name}))
                    }
                    DNode::Call { name, generator } => ("call", json!({"name": name, "generator": generator})),
                };
                nodes.push(json!({
                    "id": id, "op": op, "ctrl": true,
                    "params": params, "inputs": inputs, "sampler": s.sampler,
                }));
            }
        }
        json!({
            "version": 1,
            "kind": "distribution",
            "sampler": self.sampler,
            "nodes": nodes,
            "outputs": {"entry": {"node": first[self.root]}},
            "paths": self.path_count().min(u64::MAX as u128) as u64,
        })
    }
}

impl InstanceTrace {
    pub fn list_params(&self) -> Vec<ParamEntry> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Draw { name, dist, value } => Some(ParamEntry {
                    name: name.clone(),
                    kind: ParamKindTag::Draw(dist.clone()),
                    value: Some(value.clone()),
                }),
                Event::Choice { name, weights, index } => {
                    let total: f64 = weights.iter().sum();
                    Some(ParamEntry {
                        name: name.clone(),
                        kind: ParamKindTag::Choice(weights.iter().map(|w| w / total).collect()),
                        value: Some(SValue::Int(*index as i64)),
                    })
                }
                Event::Call { .. } => None,
            })
            .collect()
    }

    /// Taken choices, in execution order.
    pub fn decisions(&self) -> Vec<(String, usize)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Choice { name, index, .. } => Some((name.clone(), *index)),
                _ => None,
            })
            .collect()
    }
}

/// Static purity pass over a whole library: every sampler must be traceable.
pub fn check_library(lib: &SamplerLibrary) -> Result<(), TraceError> {
    lib.check_references()?;
    let ids: BTreeSet<&str> = lib.sampler_ids().collect();
    for id in ids {
        let mut t = DistTracer { lib, memo: HashMap::new(), seqs: Vec::new(), stack: Vec::new() };
        t.trace(&SamplerCall::new(id))?;
    }
    Ok(())
}
