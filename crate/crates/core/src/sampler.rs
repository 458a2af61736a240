//! Sampler functions: data-described programs that draw parameters from an
//! explicit [`RandomStream`] and call deterministic generators.
//!
//! A sampler body is a list of [`Step`]s. Control flow branches only through
//! [`Step::Choice`] with constant weights, so the tracer can enumerate every
//! path without running anything. Generators are plain `fn` pointers over
//! their arguments; they receive no stream and therefore cannot draw:
//!
//! ```compile_fail
//! use procgen::rng::RandomStream;
//! use procgen::sampler::{Args, GeneratorFn, SValue};
//! let mut s = RandomStream::new(0);
//! // A closure that captures a stream is not a `GeneratorFn`.
//! let impure: GeneratorFn = move |_: &Args| Ok(SValue::Float(s.next_f64()));
//! ```

use crate::ir::Graph;
use crate::rng::{check_weights, RandomStream, RngError};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Values flowing through sampler bodies.
#[derive(Debug, Clone, PartialEq)]
pub enum SValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Color([f64; 3]),
    Str(String),
    Graph(Arc<Graph>),
}

impl SValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            SValue::Float(x) => Some(*x),
            SValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            SValue::Int(i) => Some(*i),
            SValue::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(*x as i64),
            _ => None,
        }
    }

    pub fn as_graph(&self) -> Option<&Arc<Graph>> {
        match self {
            SValue::Graph(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            SValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            SValue::Float(x) => json!(x),
            SValue::Int(i) => json!({ "int": i }),
            SValue::Bool(b) => json!(b),
            SValue::Color(c) => json!({ "color": c }),
            SValue::Str(s) => json!(s),
            SValue::Graph(g) => json!({ "graph_nodes": g.len() }),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Option<SValue> {
        match v {
            serde_json::Value::Number(n) => n.as_f64().map(SValue::Float),
            serde_json::Value::Bool(b) => Some(SValue::Bool(*b)),
            serde_json::Value::String(s) => Some(SValue::Str(s.clone())),
            serde_json::Value::Object(o) => {
                if let Some(i) = o.get("int").and_then(|i| i.as_i64()) {
                    return Some(SValue::Int(i));
                }
                let c = o.get("color")?.as_array()?;
                if c.len() != 3 {
                    return None;
                }
                Some(SValue::Color([c[0].as_f64()?, c[1].as_f64()?, c[2].as_f64()?]))
            }
            _ => None,
        }
    }
}

impl fmt::Display for SValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Distribution of one drawn parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamDist {
    Uniform { lo: f64, hi: f64 },
    /// Clipped to `μ ± 4σ` when `clip`; unclipped normals are unbounded.
    Normal { mu: f64, sigma: f64, clip: bool },
    RandInt { n: i64 },
    Discrete { options: Vec<SValue>, weights: Vec<f64> },
}

impl ParamDist {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        ParamDist::Uniform { lo, hi }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, ParamDist::Uniform { .. } | ParamDist::Normal { .. })
    }

    /// Raw stream draws consumed by one sample.
    pub fn raw_draws(&self) -> u64 {
        match self {
            ParamDist::Normal { .. } => 2,
            _ => 1,
        }
    }

    pub fn sample(&self, s: &mut RandomStream) -> Result<SValue, RngError> {
        Ok(match self {
            ParamDist::Uniform { lo, hi } => SValue::Float(s.uniform(*lo, *hi)?),
            ParamDist::Normal { mu, sigma, clip } => SValue::Float(s.normal(*mu, *sigma, *clip)?),
            ParamDist::RandInt { n } => SValue::Int(s.randint(*n)?),
            ParamDist::Discrete { options, weights } => {
                if options.len() != weights.len() {
                    return Err(RngError::EmptyWeights);
                }
                options[s.choice(weights)?].clone()
            }
        })
    }

    /// Closed support check used to validate overrides.
    pub fn contains(&self, v: &SValue) -> bool {
        match self {
            ParamDist::Uniform { lo, hi } => v.as_f64().is_some_and(|x| x >= *lo && x <= *hi),
            ParamDist::Normal { mu, sigma, clip } => v.as_f64().is_some_and(|x| {
                x.is_finite() && (!clip || (x >= mu - 4.0 * sigma && x <= mu + 4.0 * sigma))
            }),
            ParamDist::RandInt { n } => v.as_i64().is_some_and(|i| (0..*n).contains(&i)),
            ParamDist::Discrete { options, .. } => options.contains(v),
        }
    }

    /// Brings override values to the kind this distribution produces.
    pub fn coerce(&self, v: SValue) -> SValue {
        match (self, &v) {
            (ParamDist::RandInt { .. }, _) => v.as_i64().map(SValue::Int).unwrap_or(v),
            (ParamDist::Uniform { .. } | ParamDist::Normal { .. }, SValue::Int(i)) => SValue::Float(*i as f64),
            (ParamDist::Discrete { options, .. }, _) => {
                if options.contains(&v) {
                    return v;
                }
                options
                    .iter()
                    .find(|o| match (o, &v) {
                        (SValue::Int(a), _) => v.as_i64() == Some(*a),
                        (SValue::Float(a), _) => v.as_f64() == Some(*a),
                        _ => false,
                    })
                    .cloned()
                    .unwrap_or(v)
            }
            _ => v,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParamDist::Uniform { lo, hi } => json!({"type": "uniform", "lo": lo, "hi": hi}),
            ParamDist::Normal { mu, sigma, clip } => json!({"type": "normal", "mu": mu, "sigma": sigma, "clip": clip}),
            ParamDist::RandInt { n } => json!({"type": "randint", "n": n}),
            ParamDist::Discrete { options, weights } => json!({
                "type": "discrete",
                "options": options.iter().map(SValue::to_json).collect::<Vec<_>>(),
                "weights": weights,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(SValue),
    Var(String),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn float(x: f64) -> Expr {
        Expr::Lit(SValue::Float(x))
    }

    pub fn str(s: &str) -> Expr {
        Expr::Lit(SValue::Str(s.to_string()))
    }
}

pub type Args = BTreeMap<String, SValue>;

/// Deterministic generator: arguments in, value out, no stream access.
pub type GeneratorFn = fn(&Args) -> Result<SValue, String>;

/// Escape hatch with direct stream access. Runs, but cannot be traced.
pub type HostFn = fn(&mut RandomStream, &Args) -> Result<SValue, String>;

#[derive(Debug, Clone)]
pub struct SamplerCall {
    pub sampler: String,
    pub args: Vec<(String, Expr)>,
}

impl SamplerCall {
    pub fn new(sampler: &str) -> Self {
        SamplerCall { sampler: sampler.to_string(), args: Vec::new() }
    }

    pub fn arg(mut self, name: &str, e: Expr) -> Self {
        self.args.push((name.to_string(), e));
        self
    }
}

#[derive(Debug, Clone)]
pub enum Step {
    /// Draws one parameter from the current stream.
    Draw { name: String, dist: ParamDist },
    /// Picks a branch with constant weights (one raw draw), then runs that
    /// branch's sampler on the child stream `name[i]`.
    Choice { name: String, weights: Vec<f64>, branches: Vec<SamplerCall> },
    /// Runs a sub-sampler on the child stream `name`.
    Invoke { name: String, call: SamplerCall },
    /// Calls a deterministic generator.
    Call { name: String, generator: String, args: Vec<(String, Expr)> },
    /// Host code with stream access; rejected by the tracer.
    Host { name: String, f: HostFn, args: Vec<(String, Expr)> },
}

impl Step {
    pub fn name(&self) -> &str {
        match self {
            Step::Draw { name, .. }
            | Step::Choice { name, .. }
            | Step::Invoke { name, .. }
            | Step::Call { name, .. }
            | Step::Host { name, .. } => name,
        }
    }

    pub fn draw(name: &str, dist: ParamDist) -> Step {
        Step::Draw { name: name.to_string(), dist }
    }

    pub fn choice(name: &str, weights: Vec<f64>, branches: Vec<SamplerCall>) -> Step {
        Step::Choice { name: name.to_string(), weights, branches }
    }

    pub fn invoke(name: &str, call: SamplerCall) -> Step {
        Step::Invoke { name: name.to_string(), call }
    }

    pub fn call(name: &str, generator: &str, args: Vec<(&str, Expr)>) -> Step {
        Step::Call {
            name: name.to_string(),
            generator: generator.to_string(),
            args: args.into_iter().map(|(k, e)| (k.to_string(), e)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerFn {
    pub id: String,
    pub inputs: Vec<String>,
    pub steps: Vec<Step>,
    pub result: Expr,
}

impl SamplerFn {
    pub fn new(id: &str, steps: Vec<Step>, result: Expr) -> Self {
        SamplerFn { id: id.to_string(), inputs: Vec::new(), steps, result }
    }

    pub fn with_inputs(mut self, inputs: &[&str]) -> Self {
        self.inputs = inputs.iter().map(|s| s.to_string()).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("unknown sampler `{0}`")]
    UnknownSampler(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unbound variable `{var}` in sampler `{sampler}`")]
    UnboundVar { sampler: String, var: String },
    #[error("sampler `{sampler}` expects input `{input}`")]
    MissingArg { sampler: String, input: String },
    #[error("draw `{name}`: {source}")]
    Rng { name: String, source: RngError },
    #[error("generator `{name}` failed: {msg}")]
    Generator { name: String, msg: String },
    #[error("sampler `{0}` did not return a graph")]
    ResultNotGraph(String),
    #[error("untraceable control flow at `{0}`")]
    UntraceableControlFlow(String),
    #[error("sampler nesting deeper than {0}")]
    RecursionLimit(usize),
    #[error("unknown param `{0}`")]
    UnknownParam(String),
    #[error("value {value} out of range for `{name}`")]
    OutOfRange { name: String, value: String },
}

/// Named samplers and generators.
#[derive(Debug, Clone, Default)]
pub struct SamplerLibrary {
    samplers: BTreeMap<String, SamplerFn>,
    generators: BTreeMap<String, GeneratorFn>,
}

impl SamplerLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sampler(&mut self, f: SamplerFn) {
        self.samplers.insert(f.id.clone(), f);
    }

    pub fn add_generator(&mut self, name: &str, f: GeneratorFn) {
        self.generators.insert(name.to_string(), f);
    }

    pub fn sampler(&self, id: &str) -> Result<&SamplerFn, SamplerError> {
        self.samplers.get(id).ok_or_else(|| SamplerError::UnknownSampler(id.to_string()))
    }

    pub fn generator(&self, name: &str) -> Result<GeneratorFn, SamplerError> {
        self.generators.get(name).copied().ok_or_else(|| SamplerError::UnknownGenerator(name.to_string()))
    }

    pub fn sampler_ids(&self) -> impl Iterator<Item = &str> {
        self.samplers.keys().map(String::as_str)
    }

    pub fn generator_names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    /// Every referenced sampler and generator exists.
    pub fn check_references(&self) -> Result<(), SamplerError> {
        for f in self.samplers.values() {
            for step in &f.steps {
                match step {
                    Step::Choice { branches, .. } => {
                        for b in branches {
                            self.sampler(&b.sampler)?;
                        }
                    }
                    Step::Invoke { call, .. } => {
                        self.sampler(&call.sampler)?;
                    }
                    Step::Call { generator, .. } => {
                        self.generator(generator)?;
                    }
                    Step::Draw { .. } | Step::Host { .. } => {}
                }
            }
        }
        Ok(())
    }
}

/// One recorded event of an executed sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Draw { name: String, dist: ParamDist, value: SValue },
    Choice { name: String, weights: Vec<f64>, index: usize },
    Call { name: String, generator: String, args: BTreeMap<String, serde_json::Value>, nodes: usize },
}

impl Event {
    pub fn name(&self) -> &str {
        match self {
            Event::Draw { name, .. } | Event::Choice { name, .. } | Event::Call { name, .. } => name,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Event::Draw { name, dist, value } => {
                json!({"event": "draw", "name": name, "spec": dist.to_json(), "value": value.to_json()})
            }
            Event::Choice { name, weights, index } => {
                json!({"event": "choice", "name": name, "weights": weights, "index": index})
            }
            Event::Call { name, generator, args, nodes } => {
                json!({"event": "call", "name": name, "generator": generator, "args": args, "nodes": nodes})
            }
        }
    }
}

/// Supplies draw and choice outcomes to the interpreter.
pub(crate) trait Decider {
    fn draw(&mut self, stream: &mut RandomStream, name: &str, dist: &ParamDist) -> Result<SValue, SamplerError>;
    fn choose(&mut self, stream: &mut RandomStream, name: &str, weights: &[f64]) -> Result<usize, SamplerError>;
    fn allow_host(&self) -> bool;
}

/// Straight from the stream.
pub(crate) struct Live {
    pub allow_host: bool,
}

impl Decider for Live {
    fn draw(&mut self, stream: &mut RandomStream, name: &str, dist: &ParamDist) -> Result<SValue, SamplerError> {
        dist.sample(stream).map_err(|source| SamplerError::Rng { name: name.to_string(), source })
    }

    fn choose(&mut self, stream: &mut RandomStream, name: &str, weights: &[f64]) -> Result<usize, SamplerError> {
        stream.choice(weights).map_err(|source| SamplerError::Rng { name: name.to_string(), source })
    }

    fn allow_host(&self) -> bool {
        self.allow_host
    }
}

pub(crate) const MAX_DEPTH: usize = 64;

pub(crate) struct Interp<'a, D: Decider> {
    pub lib: &'a SamplerLibrary,
    pub decider: D,
    pub events: Vec<Event>,
}

fn eval_expr(sampler: &str, env: &Args, e: &Expr) -> Result<SValue, SamplerError> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(n) => env.get(n).cloned().ok_or_else(|| SamplerError::UnboundVar {
            sampler: sampler.to_string(),
            var: n.clone(),
        }),
    }
}

fn eval_args(sampler: &str, env: &Args, args: &[(String, Expr)]) -> Result<Args, SamplerError> {
    args.iter().map(|(k, e)| Ok((k.clone(), eval_expr(sampler, env, e)?))).collect()
}

fn summarize(args: &Args) -> BTreeMap<String, serde_json::Value> {
    args.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()
}

impl<'a, D: Decider> Interp<'a, D> {
    pub fn new(lib: &'a SamplerLibrary, decider: D) -> Self {
        Interp { lib, decider, events: Vec::new() }
    }

    /// Runs sampler `id` on `stream`; parameter names are prefixed by `prefix`.
    pub fn run(
        &mut self,
        id: &str,
        args: Args,
        mut stream: RandomStream,
        prefix: &str,
        depth: usize,
    ) -> Result<SValue, SamplerError> {
        if depth > MAX_DEPTH {
            return Err(SamplerError::RecursionLimit(MAX_DEPTH));
        }
        let f = self.lib.sampler(id)?;
        let mut env = Args::new();
        for input in &f.inputs {
            let v = args.get(input).ok_or_else(|| SamplerError::MissingArg {
                sampler: id.to_string(),
                input: input.clone(),
            })?;
            env.insert(input.clone(), v.clone());
        }
        for step in &f.steps {
            let qualified = format!("{prefix}{}", step.name());
            let value = match step {
                Step::Draw { dist, .. } => {
                    let v = self.decider.draw(&mut stream, &qualified, dist)?;
                    self.events.push(Event::Draw { name: qualified, dist: dist.clone(), value: v.clone() });
                    v
                }
                Step::Choice { name, weights, branches } => {
                    check_weights(weights).map_err(|source| SamplerError::Rng { name: qualified.clone(), source })?;
                    let i = self.decider.choose(&mut stream, &qualified, weights)?;
                    self.events.push(Event::Choice { name: qualified.clone(), weights: weights.clone(), index: i });
                    let call = &branches[i];
                    let label = format!("{name}[{i}]");
                    let sub_args = eval_args(id, &env, &call.args)?;
                    let child_prefix = format!("{prefix}{label}/");
                    self.run(&call.sampler, sub_args, stream.split(&label), &child_prefix, depth + 1)?
                }
                Step::Invoke { name, call } => {
                    let sub_args = eval_args(id, &env, &call.args)?;
                    let child_prefix = format!("{prefix}{name}/");
                    self.run(&call.sampler, sub_args, stream.split(name), &child_prefix, depth + 1)?
                }
                Step::Call { generator, args, .. } => {
                    let g = self.lib.generator(generator)?;
                    let a = eval_args(id, &env, args)?;
                    let v = g(&a).map_err(|msg| SamplerError::Generator { name: generator.clone(), msg })?;
                    let nodes = v.as_graph().map_or(0, |g| g.len());
                    self.events.push(Event::Call {
                        name: qualified,
                        generator: generator.clone(),
                        args: summarize(&a),
                        nodes,
                    });
                    v
                }
                Step::Host { f, args, .. } => {
                    if !self.decider.allow_host() {
                        return Err(SamplerError::UntraceableControlFlow(format!("{id}:{qualified}")));
                    }
                    let a = eval_args(id, &env, args)?;
                    f(&mut stream, &a).map_err(|msg| SamplerError::Generator { name: qualified.clone(), msg })?
                }
            };
            env.insert(step.name().to_string(), value);
        }
        eval_expr(id, &env, &f.result)
    }
}

/// Output of [`run_sampler`]: the asset and its parameter record.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub graph: Arc<Graph>,
    pub record: Vec<Event>,
}

/// Executes `id` on `stream` and returns the asset graph plus the ordered
/// draws, choices and calls.
pub fn run_sampler(lib: &SamplerLibrary, id: &str, stream: RandomStream) -> Result<SampleResult, SamplerError> {
    let mut it = Interp::new(lib, Live { allow_host: true });
    let v = it.run(id, Args::new(), stream, "", 0)?;
    match v {
        SValue::Graph(graph) => Ok(SampleResult { graph, record: it.events }),
        _ => Err(SamplerError::ResultNotGraph(id.to_string())),
    }
}

/// As [`run_sampler`] for samplers returning any value.
pub fn run_sampler_value(
    lib: &SamplerLibrary,
    id: &str,
    args: Args,
    stream: RandomStream,
) -> Result<(SValue, Vec<Event>), SamplerError> {
    let mut it = Interp::new(lib, Live { allow_host: true });
    let v = it.run(id, args, stream, "", 0)?;
    Ok((v, it.events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{GraphBuilder, Value};

    fn const_graph(a: &Args) -> Result<SValue, String> {
        let x = a.get("x").and_then(SValue::as_f64).ok_or("x")?;
        let mut b = GraphBuilder::new();
        let c = b.constant(Value::Float(x)).map_err(|e| e.to_string())?;
        b.set_output("out", c.out()).map_err(|e| e.to_string())?;
        Ok(SValue::Graph(Arc::new(b.finish())))
    }

    fn host_coin(s: &mut RandomStream, _: &Args) -> Result<SValue, String> {
        Ok(SValue::Float(if s.next_f64() < 0.5 { 1.0 } else { 2.0 }))
    }

    fn lib() -> SamplerLibrary {
        let mut l = SamplerLibrary::new();
        l.add_generator("const_graph", const_graph);
        l.add_sampler(SamplerFn::new(
            "fixed",
            vec![Step::call("g", "const_graph", vec![("x", Expr::float(1.0))])],
            Expr::var("g"),
        ));
        l.add_sampler(SamplerFn::new(
            "leaf",
            vec![
                Step::draw("x", ParamDist::uniform(0.0, 1.0)),
                Step::call("g", "const_graph", vec![("x", Expr::var("x"))]),
            ],
            Expr::var("g"),
        ));
        l.add_sampler(SamplerFn::new(
            "leaf2",
            vec![Step::call("g", "const_graph", vec![("x", Expr::float(5.0))])],
            Expr::var("g"),
        ));
        l.add_sampler(SamplerFn::new(
            "pick",
            vec![Step::choice("c", vec![1.0, 1.0], vec![SamplerCall::new("leaf"), SamplerCall::new("leaf2")])],
            Expr::var("c"),
        ));
        l.add_sampler(SamplerFn::new(
            "host",
            vec![
                Step::Host { name: "h".into(), f: host_coin, args: vec![] },
                Step::call("g", "const_graph", vec![("x", Expr::var("h"))]),
            ],
            Expr::var("g"),
        ));
        l
    }

    #[test]
    fn deterministic_sampler_ignores_seed() {
        let l = lib();
        let a = run_sampler(&l, "fixed", RandomStream::new(1)).unwrap();
        let b = run_sampler(&l, "fixed", RandomStream::new(2)).unwrap();
        assert_eq!(a.graph.to_json(), b.graph.to_json());
    }

    #[test]
    fn same_seed_same_graph() {
        let l = lib();
        let a = run_sampler(&l, "pick", RandomStream::new(11)).unwrap();
        let b = run_sampler(&l, "pick", RandomStream::new(11)).unwrap();
        assert_eq!(a.graph.to_json(), b.graph.to_json());
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn both_branches_observed() {
        let l = lib();
        let mut seen = [false; 2];
        for seed in 0..10_000 {
            let r = run_sampler(&l, "pick", RandomStream::new(seed)).unwrap();
            if let Event::Choice { index, .. } = &r.record[0] {
                seen[*index] = true;
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn names_are_path_qualified() {
        let l = lib();
        let r = (0..50)
            .map(|s| run_sampler(&l, "pick", RandomStream::new(s)).unwrap())
            .find(|r| matches!(r.record[0], Event::Choice { index: 0, .. }))
            .unwrap();
        assert_eq!(r.record[1].name(), "c[0]/x");
    }

    #[test]
    fn host_steps_run_directly() {
        let l = lib();
        assert!(run_sampler(&l, "host", RandomStream::new(3)).is_ok());
        assert!(l.check_references().is_ok());
    }
}
