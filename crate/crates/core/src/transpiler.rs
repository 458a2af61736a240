//! Graph to source text, a small interpreter for that text, canonical forms
//! and parameter interpolation.
//!
//! Emitted scripts look like
//!
//! ```text
//! def build():
//!     input_0 = input(name="uv", kind="Vec2")
//!     perlin_noise_0 = perlin_noise(p=input_0, frequency=4.0)
//!     output("height", perlin_noise_0 * 0.5 + 0.5)
//! ```
//!
//! Calls take keyword arguments only; a keyword names either an input
//! socket or a parameter of the op. `x.name` selects a named output socket.

use crate::catalog::{self, ParamDefault};
use crate::eval::mix_scalar;
use crate::ir::{BinOp, Graph, GraphBuilder, GraphError, Input, Node, NodeId, Operand, OutRef, Value};
use crate::math::hash_str;
use crate::noise::{hsv_to_rgb, rgb_to_hsv};
use std::cmp::Reverse;
use std::cell::RefCell;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranspileError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graphs differ in structure: {0}")]
    StructureMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitOptions {
    /// Inline arithmetic, mix and cast nodes used at most this many times.
    /// A node with several uses is bound with `(name := ...)` at its first.
    pub inline_max_uses: usize,
    pub use_operators: bool,
    /// Render Color constants as `hsv(h, s, v)` when that reproduces them exactly.
    pub hsv_colors: bool,
    pub indent: usize,
    pub fn_name: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { inline_max_uses: 1, use_operators: true, hsv_colors: false, indent: 4, fn_name: "build".into() }
    }
}

fn value_key(v: &Value) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

fn params_key(n: &Node) -> String {
    n.params.iter().map(|(k, v)| format!("{k}={};", value_key(v))).collect()
}

/// Structural hash of every node: op, params and, recursively, inputs.
fn merkle(g: &Graph) -> Vec<u64> {
    let mut h = Vec::with_capacity(g.nodes.len());
    for n in &g.nodes {
        let mut s = format!("{}|{}|", n.op, params_key(n));
        for (socket, input) in &n.inputs {
            match input {
                Input::Edge(r) => s.push_str(&format!("{socket}<{:016x}.{};", h[r.node.index()], r.output)),
                Input::Const(v) => s.push_str(&format!("{socket}={};", value_key(v))),
            }
        }
        h.push(hash_str(&s));
    }
    h
}

/// Downstream counterpart of `merkle`: hashes every consumer edge and graph
/// output reachable from each node.
fn co_merkle(g: &Graph, m: &[u64]) -> Vec<u64> {
    let n = g.nodes.len();
    let mut uses: Vec<Vec<String>> = vec![Vec::new(); n];
    for (name, o) in &g.outputs {
        uses[o.node.index()].push(format!("out {name}.{}", o.output));
    }
    let mut h = vec![0u64; n];
    for i in (0..n).rev() {
        let mut u = std::mem::take(&mut uses[i]);
        u.sort();
        h[i] = hash_str(&u.concat());
        for (socket, r) in g.nodes[i].edges() {
            uses[r.node.index()].push(format!("{:016x}/{:016x}.{socket}<{};", m[i], h[i], r.output));
        }
    }
    h
}

/// Topological order with ready nodes ordered by op name, parameter hash,
/// then upstream and downstream structural hashes. Independent of node ids
/// except among fully interchangeable nodes.
pub fn canonical_order(g: &Graph) -> Vec<usize> {
    let m = merkle(g);
    let d = co_merkle(g, &m);
    let n = g.nodes.len();
    let mut pending: Vec<usize> = g.nodes.iter().map(|node| node.edges().count()).collect();
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for node in &g.nodes {
        for (_, r) in node.edges() {
            consumers[r.node.index()].push(node.id.index());
        }
    }
    let key = |i: usize| (g.nodes[i].op.clone(), hash_str(&params_key(&g.nodes[i])), m[i], d[i], i);
    let mut heap: BinaryHeap<Reverse<(String, u64, u64, u64, usize)>> =
        (0..n).filter(|&i| pending[i] == 0).map(|i| Reverse(key(i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, _, _, _, i))) = heap.pop() {
        order.push(i);
        for &c in &consumers[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                heap.push(Reverse(key(c)));
            }
        }
    }
    order
}

/// Id-free text form; equal for isomorphic graphs. Each node is described
/// by its op, params, inputs (by upstream hash) and downstream hash; the
/// descriptions are sorted, so interchangeable duplicates compare equal
/// whichever one a consumer is wired to.
pub fn canonical_form(g: &Graph) -> String {
    let m = merkle(g);
    let d = co_merkle(g, &m);
    let mut lines: Vec<String> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut s = format!("{} [{}]", n.op, params_key(n));
            for (socket, input) in &n.inputs {
                match input {
                    Input::Edge(o) => s.push_str(&format!(" {socket}:{:016x}.{}", m[o.node.index()], o.output)),
                    Input::Const(v) => s.push_str(&format!(" {socket}={}", value_key(v))),
                }
            }
            s.push_str(&format!(" -> {:016x}\n", d[i]));
            s
        })
        .collect();
    lines.sort();
    let mut s = lines.concat();
    for (name, o) in &g.outputs {
        s.push_str(&format!("out {name} {:016x}.{}\n", m[o.node.index()], o.output));
    }
    for (k, v) in &g.meta {
        s.push_str(&format!("meta {k} {}\n", value_key(v)));
    }
    s
}

pub fn graph_isomorphic(a: &Graph, b: &Graph) -> bool {
    a.nodes.len() == b.nodes.len() && canonical_form(a) == canonical_form(b)
}

const INLINE_OPS: [&str; 7] = ["add", "sub", "mul", "div", "floordiv", "mix", "cast"];

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn literal(v: &Value, opts: &EmitOptions) -> String {
    let list = |xs: &[f64]| xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ");
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(x) => fmt_f64(*x),
        Value::Bool(b) => if *b { "True" } else { "False" }.into(),
        Value::Str(s) => serde_json::to_string(s).unwrap_or_default(),
        Value::Vec2(p) => format!("vec2({})", list(p)),
        Value::Vec3(p) => format!("vec3({})", list(p)),
        Value::Color(c) => {
            if opts.hsv_colors {
                let hsv = rgb_to_hsv(*c);
                let back = hsv_to_rgb(hsv[0], hsv[1], hsv[2]);
                if back.iter().zip(c).all(|(a, b)| a.to_bits() == b.to_bits()) {
                    return format!("hsv({})", list(&hsv));
                }
            }
            format!("color({})", list(c))
        }
    }
}

fn default_value(d: &ParamDefault) -> Option<Value> {
    Some(match d {
        ParamDefault::Required => return None,
        ParamDefault::Float(x) => Value::Float(*x),
        ParamDefault::Int(i) => Value::Int(*i),
        ParamDefault::Bool(b) => Value::Bool(*b),
        ParamDefault::Str(s) => Value::Str(s.to_string()),
    })
}

struct Emitter<'a> {
    g: &'a Graph,
    opts: &'a EmitOptions,
    inlined: Vec<bool>,
    names: Vec<Option<String>>,
    /// Inlined nodes with several uses already bound by `:=`.
    bound: RefCell<Vec<bool>>,
}

const PREC_ATOM: u8 = 3;

impl Emitter<'_> {
    fn operand(&self, input: &Input) -> (String, u8) {
        match input {
            Input::Const(v) => {
                let s = literal(v, self.opts);
                let p = if s.starts_with('-') { 0 } else { PREC_ATOM };
                (s, p)
            }
            Input::Edge(r) => {
                let i = r.node.index();
                let shared = self.inlined[i] && self.names[i].is_some();
                if self.inlined[i] && !shared {
                    self.expr(i)
                } else if shared && !self.bound.borrow()[i] {
                    self.bound.borrow_mut()[i] = true;
                    let name = self.names[i].clone().unwrap_or_default();
                    let text = format!("({name} := {})", self.expr(i).0);
                    if r.output == "out" {
                        (text, PREC_ATOM)
                    } else {
                        (format!("{text}.{}", r.output), PREC_ATOM)
                    }
                } else {
                    let name = self.names[i].clone().unwrap_or_default();
                    if r.output == "out" {
                        (name, PREC_ATOM)
                    } else {
                        (format!("{name}.{}", r.output), PREC_ATOM)
                    }
                }
            }
        }
    }

    fn expr(&self, i: usize) -> (String, u8) {
        let n = &self.g.nodes[i];
        if let (true, Some(op)) = (self.opts.use_operators, BinOp::from_op_name(&n.op)) {
            let (a, b) = (&n.inputs["a"], &n.inputs["b"]);
            if !(matches!(a, Input::Const(_)) && matches!(b, Input::Const(_))) {
                let prec = match op {
                    BinOp::Add | BinOp::Sub => 1,
                    _ => 2,
                };
                let (sa, pa) = self.operand(a);
                let (sb, pb) = self.operand(b);
                let sa = if pa < prec { format!("({sa})") } else { sa };
                let sb = if pb <= prec { format!("({sb})") } else { sb };
                return (format!("{sa} {} {sb}", op.symbol()), prec);
            }
        }
        (self.call(n), PREC_ATOM)
    }

    fn call(&self, n: &Node) -> String {
        let sig = catalog::lookup(&n.op);
        let mut args = Vec::new();
        let socket_order: Vec<&str> = match sig {
            Some(s) => s.inputs.iter().map(|x| x.name).collect(),
            None => n.inputs.keys().map(String::as_str).collect(),
        };
        for socket in socket_order {
            if let Some(input) = n.inputs.get(socket) {
                args.push(format!("{socket}={}", self.operand(input).0));
            }
        }
        for (k, v) in &n.params {
            let is_default = sig
                .and_then(|s| s.param(k))
                .and_then(|p| default_value(&p.default))
                .is_some_and(|d| d.bit_eq(v));
            if !is_default {
                args.push(format!("{k}={}", literal(v, self.opts)));
            }
        }
        format!("{}({})", n.op, args.join(", "))
    }
}

/// Source text of a single function that rebuilds `g`.
pub fn emit(g: &Graph, opts: &EmitOptions) -> String {
    let uses = g.use_counts();
    let inlined: Vec<bool> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| uses[i] >= 1 && uses[i] <= opts.inline_max_uses && INLINE_OPS.contains(&n.op.as_str()))
        .collect();
    let order = canonical_order(g);
    let mut names = vec![None; g.nodes.len()];
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in &order {
        if !inlined[i] || uses[i] > 1 {
            let op = g.nodes[i].op.as_str();
            let k = counters.entry(op).or_insert(0);
            names[i] = Some(format!("{op}_{k}"));
            *k += 1;
        }
    }
    let bound = RefCell::new(vec![false; g.nodes.len()]);
    let em = Emitter { g, opts, inlined, names, bound };
    let pad = " ".repeat(opts.indent);
    let mut s = format!("def {}():\n", opts.fn_name);
    for &i in &order {
        if em.inlined[i] {
            continue;
        }
        let name = em.names[i].as_deref().unwrap_or_default();
        s.push_str(&format!("{pad}{name} = {}\n", em.expr(i).0));
    }
    for (name, r) in &g.outputs {
        let text = em.operand(&Input::Edge(r.clone())).0;
        s.push_str(&format!("{pad}output({}, {text})\n", serde_json::to_string(name).unwrap_or_default()));
    }
    for (k, v) in &g.meta {
        s.push_str(&format!("{pad}meta({}, {})\n", serde_json::to_string(k).unwrap_or_default(), literal(v, opts)));
    }
    if g.nodes.is_empty() && g.outputs.is_empty() && g.meta.is_empty() {
        s.push_str(&format!("{pad}pass\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Sym(&'static str),
    Newline,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, TranspileError> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let line_no = ln + 1;
        let err = |msg: String| TranspileError::Parse { line: line_no, msg };
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c == '#' {
                break;
            } else if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let st = i;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(line[st..i].to_string()), line_no));
            } else if c.is_ascii_digit() || (c == '.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
                let st = i;
                while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    i += 1;
                    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                        i += 1;
                    }
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                out.push((Tok::Num(line[st..i].to_string()), line_no));
            } else if c == '"' {
                let st = i;
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
                if i >= b.len() {
                    return Err(err("unterminated string".into()));
                }
                i += 1;
                let s: String = serde_json::from_str(&line[st..i]).map_err(|e| err(e.to_string()))?;
                out.push((Tok::Str(s), line_no));
            } else {
                let sym = match c {
                    '/' if b.get(i + 1) == Some(&b'/') => "//",
                    ':' if b.get(i + 1) == Some(&b'=') => ":=",
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    '=' => "=",
                    ':' => ":",
                    '.' => ".",
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    _ => return Err(err(format!("unexpected character `{c}`"))),
                };
                i += sym.len();
                out.push((Tok::Sym(sym), line_no));
            }
        }
        if out.last().is_some_and(|(t, _)| *t != Tok::Newline) {
            out.push((Tok::Newline, line_no));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ev {
    Ref(OutRef),
    Lit(Value),
}

impl Ev {
    fn operand(self) -> Operand {
        match self {
            Ev::Ref(r) => Operand::Out(r),
            Ev::Lit(v) => Operand::Const(v),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    b: GraphBuilder,
    vars: HashMap<String, NodeId>,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TranspileError> {
        Err(TranspileError::Parse { line: self.line(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), TranspileError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn ident(&mut self) -> Result<String, TranspileError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                self.err("expected identifier")
            }
        }
    }

    fn program(&mut self) -> Result<(), TranspileError> {
        while self.peek() == Some(&Tok::Newline) {
            self.pos += 1;
        }
        if self.ident()? != "def" {
            return self.err("expected `def`");
        }
        self.ident()?;
        self.expect("(")?;
        self.expect(")")?;
        self.expect(":")?;
        while self.pos < self.toks.len() {
            if self.peek() == Some(&Tok::Newline) {
                self.pos += 1;
                continue;
            }
            self.statement()?;
            if self.pos < self.toks.len() && self.next() != Some(Tok::Newline) {
                return self.err("expected end of line");
            }
        }
        Ok(())
    }

    fn statement(&mut self) -> Result<(), TranspileError> {
        let name = self.ident()?;
        match name.as_str() {
            "pass" => Ok(()),
            "output" | "meta" => {
                self.expect("(")?;
                let key = match self.next() {
                    Some(Tok::Str(s)) => s,
                    _ => return self.err("expected string"),
                };
                self.expect(",")?;
                let v = self.expr()?;
                self.expect(")")?;
                match (name.as_str(), v) {
                    ("output", Ev::Ref(r)) => self.b.set_output(&key, r)?,
                    ("output", Ev::Lit(v)) => {
                        let id = self.b.constant(v)?;
                        self.b.set_output(&key, id.out())?
                    }
                    (_, Ev::Lit(v)) => self.b.set_meta(&key, v),
                    (_, Ev::Ref(_)) => return self.err("meta needs a literal"),
                }
                Ok(())
            }
            _ => {
                self.expect("=")?;
                match self.expr()? {
                    Ev::Ref(r) => {
                        self.vars.insert(name, r.node);
                        Ok(())
                    }
                    Ev::Lit(v) => {
                        let id = self.b.constant(v)?;
                        self.vars.insert(name, id);
                        Ok(())
                    }
                }
            }
        }
    }

    fn binop(&mut self, op: BinOp, a: Ev, b: Ev) -> Result<Ev, TranspileError> {
        Ok(Ev::Ref(self.b.binary(op, a.operand(), b.operand())?.out()))
    }

    fn expr(&mut self) -> Result<Ev, TranspileError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = self.binop(op, lhs, rhs)?;
        }
    }

    fn term(&mut self) -> Result<Ev, TranspileError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("//") {
                BinOp::FloorDiv
            } else if self.eat("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = self.binop(op, lhs, rhs)?;
        }
    }

    fn unary(&mut self) -> Result<Ev, TranspileError> {
        if self.eat("-") {
            return match self.unary()? {
                Ev::Lit(Value::Float(x)) => Ok(Ev::Lit(Value::Float(-x))),
                Ev::Lit(Value::Int(i)) => Ok(Ev::Lit(Value::Int(-i))),
                _ => self.err("unary minus applies to numeric literals only"),
            };
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Ev, TranspileError> {
        let mut v = self.primary()?;
        while self.eat(".") {
            let field = self.ident()?;
            v = match v {
                Ev::Ref(r) => Ev::Ref(r.node.socket(&field)),
                Ev::Lit(_) => return self.err("field access on a literal"),
            };
        }
        Ok(v)
    }

    fn numbers(&mut self) -> Result<Vec<f64>, TranspileError> {
        self.expect("(")?;
        let mut xs = Vec::new();
        loop {
            match self.expr()? {
                Ev::Lit(v) => match v.as_f64() {
                    Some(x) => xs.push(x),
                    None => return self.err("expected number"),
                },
                Ev::Ref(_) => return self.err("expected number"),
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(xs)
    }

    fn primary(&mut self) -> Result<Ev, TranspileError> {
        match self.next() {
            Some(Tok::Num(s)) => {
                if s.contains(['.', 'e', 'E']) {
                    s.parse().map(|x| Ev::Lit(Value::Float(x))).or_else(|_| self.err("bad number"))
                } else {
                    s.parse().map(|i| Ev::Lit(Value::Int(i))).or_else(|_| self.err("bad integer"))
                }
            }
            Some(Tok::Str(s)) => Ok(Ev::Lit(Value::Str(s))),
            Some(Tok::Sym("(")) => {
                if let (Some(Tok::Ident(name)), Some((Tok::Sym(":="), _))) = (self.peek().cloned(), self.toks.get(self.pos + 1)) {
                    self.pos += 2;
                    let v = self.expr()?;
                    self.expect(")")?;
                    return match v {
                        Ev::Ref(r) => {
                            self.vars.insert(name, r.node);
                            Ok(Ev::Ref(r))
                        }
                        Ev::Lit(_) => self.err("`:=` needs a node"),
                    };
                }
                let v = self.expr()?;
                self.expect(")")?;
                Ok(v)
            }
            Some(Tok::Ident(id)) => {
                match id.as_str() {
                    "True" => return Ok(Ev::Lit(Value::Bool(true))),
                    "False" => return Ok(Ev::Lit(Value::Bool(false))),
                    "inf" => return Ok(Ev::Lit(Value::Float(f64::INFINITY))),
                    "nan" => return Ok(Ev::Lit(Value::Float(f64::NAN))),
                    _ => {}
                }
                if self.peek() != Some(&Tok::Sym("(")) {
                    return match self.vars.get(&id) {
                        Some(n) => Ok(Ev::Ref(n.out())),
                        None => self.err(format!("unknown variable `{id}`")),
                    };
                }
                let arity = match id.as_str() {
                    "vec2" => 2,
                    "vec3" | "color" | "hsv" => 3,
                    _ => return self.node_call(&id),
                };
                let xs = self.numbers()?;
                if xs.len() != arity {
                    return self.err(format!("{id} takes {arity} numbers"));
                }
                Ok(Ev::Lit(match id.as_str() {
                    "vec2" => Value::Vec2([xs[0], xs[1]]),
                    "vec3" => Value::Vec3([xs[0], xs[1], xs[2]]),
                    "color" => Value::Color([xs[0], xs[1], xs[2]]),
                    _ => Value::Color(hsv_to_rgb(xs[0], xs[1], xs[2])),
                }))
            }
            _ => {
                self.pos -= 1;
                self.err("expected expression")
            }
        }
    }

    fn node_call(&mut self, op: &str) -> Result<Ev, TranspileError> {
        let Some(sig) = catalog::lookup(op) else {
            return self.err(format!("unknown op `{op}`"));
        };
        self.expect("(")?;
        let mut params = Vec::new();
        let mut inputs = Vec::new();
        if !self.eat(")") {
            loop {
                let k = self.ident()?;
                self.expect("=")?;
                let v = self.expr()?;
                if sig.input(&k).is_some() {
                    inputs.push((k, v.operand()));
                } else if sig.param(&k).is_some() {
                    match v {
                        Ev::Lit(v) => params.push((k, v)),
                        Ev::Ref(_) => return self.err(format!("param `{k}` needs a literal")),
                    }
                } else {
                    return self.err(format!("`{op}` has no input or param `{k}`"));
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
        }
        Ok(Ev::Ref(self.b.add_node(op, params, inputs)?.out()))
    }
}

/// Executes an emitted script against the builder API.
pub fn exec_script(src: &str) -> Result<Graph, TranspileError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, b: GraphBuilder::new(), vars: HashMap::new() };
    p.program()?;
    Ok(p.b.finish())
}

fn lerp_value(a: &Value, b: &Value, t: f64) -> Option<Value> {
    let l = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(&x, &y)| mix_scalar(x, y, t)).collect() };
    Some(match (a, b) {
        (Value::Float(x), Value::Float(y)) => Value::Float(mix_scalar(*x, *y, t)),
        (Value::Vec2(x), Value::Vec2(y)) => {
            let v = l(x, y);
            Value::Vec2([v[0], v[1]])
        }
        (Value::Vec3(x), Value::Vec3(y)) => {
            let v = l(x, y);
            Value::Vec3([v[0], v[1], v[2]])
        }
        (Value::Color(x), Value::Color(y)) => {
            let v = l(x, y);
            Value::Color([v[0], v[1], v[2]])
        }
        _ if a.bit_eq(b) => a.clone(),
        _ => return None,
    })
}

/// Lerps Float, Vec and Color params and constant inputs of two graphs that
/// share their structure node for node.
pub fn interpolate_params(a: &Graph, b: &Graph, t: f64) -> Result<Graph, TranspileError> {
    let mismatch = |what: String| TranspileError::StructureMismatch(what);
    if a.nodes.len() != b.nodes.len() || a.outputs != b.outputs {
        return Err(mismatch("node count or outputs".into()));
    }
    let mut out = a.clone();
    for (i, (na, nb)) in a.nodes.iter().zip(&b.nodes).enumerate() {
        if na.op != nb.op || na.params.len() != nb.params.len() || na.inputs.len() != nb.inputs.len() {
            return Err(mismatch(format!("node {i}")));
        }
        for (k, va) in &na.params {
            let vb = nb.params.get(k).ok_or_else(|| mismatch(format!("node {i} param {k}")))?;
            let v = lerp_value(va, vb, t).ok_or_else(|| mismatch(format!("node {i} param {k}")))?;
            out.nodes[i].params.insert(k.clone(), v);
        }
        for (k, ia) in &na.inputs {
            let ib = nb.inputs.get(k).ok_or_else(|| mismatch(format!("node {i} input {k}")))?;
            let v = match (ia, ib) {
                (Input::Edge(x), Input::Edge(y)) if x == y => continue,
                (Input::Const(x), Input::Const(y)) => lerp_value(x, y, t),
                _ => None,
            }
            .ok_or_else(|| mismatch(format!("node {i} input {k}")))?;
            out.nodes[i].inputs.insert(k.clone(), Input::Const(v));
        }
    }
    for (k, va) in &a.meta {
        if let Some(v) = b.meta.get(k).and_then(|vb| lerp_value(va, vb, t)) {
            out.meta.insert(k.clone(), v);
        }
    }
    Ok(out)
}
