use procgen::ir::{infer_kind, BinOp, GraphError, BINARY_ARITH};
use procgen::materials::library;
use procgen::rng::RandomStream;
use procgen::sampler::run_sampler;
use procgen::{Graph, GraphBuilder, Value, ValueKind};
use proptest::prelude::*;
use ValueKind::*;

/// Published promotion table: `None` means an explicit cast is required.
fn table(op: &str, a: ValueKind, b: ValueKind) -> Option<ValueKind> {
    let rows: [(ValueKind, [Option<ValueKind>; 6]); 6] = [
        //        Int          Float        Vec2        Vec3        Color        Bool
        (Int, [Some(Int), Some(Float), Some(Vec2), Some(Vec3), Some(Color), None]),
        (Float, [Some(Float), Some(Float), Some(Vec2), Some(Vec3), Some(Color), None]),
        (Vec2, [Some(Vec2), Some(Vec2), Some(Vec2), None, None, None]),
        (Vec3, [Some(Vec3), Some(Vec3), None, Some(Vec3), None, None]),
        (Color, [Some(Color), Some(Color), None, None, Some(Color), None]),
        (Bool, [None; 6]),
    ];
    let col = ValueKind::ALL.iter().position(|&k| k == b).unwrap();
    let r = rows.iter().find(|(k, _)| *k == a).unwrap().1[col];
    match (r, op) {
        (Some(Int), "div" | "pow") => Some(Float),
        _ => r,
    }
}

#[test]
fn infer_kind_matches_the_table_for_every_pair() {
    for op in BINARY_ARITH {
        for a in ValueKind::ALL {
            for b in ValueKind::ALL {
                let got = infer_kind(op, &[a, b]);
                match table(op, a, b) {
                    Some(k) => assert_eq!(got.clone().unwrap(), k, "{op} {a:?} {b:?}"),
                    None => assert!(matches!(got, Err(GraphError::AmbiguousKind { .. })), "{op} {a:?} {b:?}"),
                }
                assert_eq!(got.is_ok(), infer_kind(op, &[b, a]).is_ok());
            }
        }
    }
}

fn kind() -> impl Strategy<Value = ValueKind> {
    prop::sample::select(ValueKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn builder_overloads_follow_inference(a in kind(), b in kind(), op in 0usize..5) {
        let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv];
        let mut g = GraphBuilder::new();
        let x = g.input("x", a).unwrap();
        let y = g.input("y", b).unwrap();
        let r = g.binary(ops[op], x, y);
        match table(ops[op].op_name(), a, b) {
            Some(k) => prop_assert_eq!(g.kind_of(&r.unwrap().out()).unwrap(), k),
            None => prop_assert!(r.is_err()),
        }
    }
}

#[test]
fn cast_examples() {
    let mut b = GraphBuilder::new();
    let f = b.constant(Value::Float(0.5)).unwrap();
    let v = b.cast(f.out(), Vec3).unwrap();
    assert_eq!(b.kind_of(&v.out()).unwrap(), Vec3);
    let t = b.constant(Value::Bool(true)).unwrap();
    assert!(matches!(b.cast(t.out(), Color), Err(GraphError::UnsupportedCast { .. })));
    let c = b.constant(Value::Vec3([0.2, 0.4, 0.6])).unwrap();
    let m = b.cast(c.out(), Float).unwrap();
    b.set_output("mean", m.out()).unwrap();
    let g = b.finish();
    let img = procgen::eval::bake_texture(&g, "mean", 1).unwrap();
    assert!((img.data[0] - 0.4).abs() < 1e-15);
}

#[test]
fn json_round_trips_library_samples_exactly() {
    let lib = library();
    for id in lib.sampler_ids() {
        for seed in 0..5 {
            let g = run_sampler(&lib, id, RandomStream::new(seed)).unwrap().graph;
            let text = g.to_json();
            let back = Graph::from_json(&text).unwrap();
            assert_eq!(back, *g, "{id} {seed}");
            assert_eq!(back.to_json(), text);
        }
    }
}

#[test]
fn json_rejects_unknown_fields_and_versions() {
    let mut b = GraphBuilder::new();
    let c = b.constant(Value::Float(1.5)).unwrap();
    b.set_output("out", c.out()).unwrap();
    let text = b.finish().to_json();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(Graph::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = serde_json::json!(2);
    assert!(Graph::from_json(&v.to_string()).is_err());
    assert!(Graph::from_json("{\"version\": 1").is_err());
}
