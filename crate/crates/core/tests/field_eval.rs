use procgen::eval::*;
use procgen::ir::{validate, BinOp};
use procgen::materials::{make_material, Params, BASE_NAMES};
use procgen::rng::RandomStream;
use procgen::sampler::run_sampler;
use procgen::{Graph, GraphBuilder, Value, ValueKind};
use std::time::Instant;

const CHANNELS: [&str; 3] = ["surface", "roughness", "displacement"];

fn materials() -> Vec<Graph> {
    let mut out: Vec<Graph> = BASE_NAMES.iter().map(|n| make_material(n, &Params::new()).unwrap()).collect();
    let lib = procgen::materials::library();
    out.extend((0..4).map(|s| (*run_sampler(&lib, "composed", RandomStream::new(s)).unwrap().graph).clone()));
    out
}

fn random_batch(n: usize, seed: u64) -> SampleBatch {
    let mut s = RandomStream::new(seed);
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [s.next_f64(), s.next_f64(), 0.0]).collect();
    let uv = FieldBuffer { kind: ValueKind::Vec2, data: pts.iter().flat_map(|p| [p[0], p[1]]).collect() };
    let curv = FieldBuffer { kind: ValueKind::Float, data: (0..n).map(|i| (i % 5) as f64 * 0.3).collect() };
    SampleBatch::new(pts).with_aux("uv", uv).with_aux("curvature", curv)
}

#[test]
fn chunking_and_threads_do_not_change_results() {
    let batch = random_batch(10_001, 1);
    for g in materials() {
        let whole = evaluate_with(&g, &CHANNELS, &batch, EvalOptions { chunk_size: 1 << 20, parallel: false }).unwrap().0;
        for (chunk_size, parallel) in [(4096, true), (333, true), (7, false)] {
            let got = evaluate_with(&g, &CHANNELS, &batch, EvalOptions { chunk_size, parallel }).unwrap().0;
            assert!(whole.iter().zip(&got).all(|(a, b)| a.bit_eq(b)));
        }
        let k = 3517;
        let (a, b) = (batch.slice(0, k), batch.slice(k, batch.len()));
        for (c, full) in CHANNELS.iter().zip(&whole) {
            let mut joined = evaluate(&g, c, &a).unwrap();
            joined.data.extend(evaluate(&g, c, &b).unwrap().data);
            assert!(joined.bit_eq(full));
        }
    }
}

#[test]
fn each_live_node_runs_once_per_chunk() {
    let batch = random_batch(2000, 2);
    for g in materials() {
        let live = g.ancestors_of(CHANNELS.iter().map(|c| g.output(c).unwrap())).iter().filter(|&&x| x).count();
        let (_, stats) = evaluate_with(&g, &CHANNELS, &batch, EvalOptions { chunk_size: 4096, parallel: true }).unwrap();
        assert_eq!(stats.node_evals, live as u64);
        assert_eq!(stats.program_len, live);
        let before = evaluations_on_this_thread();
        let (_, stats) = evaluate_with(&g, &CHANNELS, &batch, EvalOptions { chunk_size: 500, parallel: true }).unwrap();
        assert_eq!(stats.node_evals, 4 * live as u64);
        assert_eq!(evaluations_on_this_thread() - before, 4 * live as u64);
    }
}

#[test]
fn building_large_graphs_evaluates_nothing() {
    let before = evaluations_on_this_thread();
    let mut b = GraphBuilder::new();
    let mut x = b.input("position", ValueKind::Vec3).unwrap();
    for i in 0..10_000 {
        let op = [BinOp::Add, BinOp::Mul, BinOp::Sub][i % 3];
        x = b.binary(op, x, 0.5 + (i % 7) as f64).unwrap().out();
    }
    b.set_output("out", x).unwrap();
    let g = b.finish();
    assert_eq!(g.nodes.len(), 10_001);
    assert_eq!(evaluations_on_this_thread(), before);
    assert!(validate(&g).is_ok());
}

#[test]
fn shipped_materials_validate_cleanly() {
    for g in materials() {
        let rep = validate(&g);
        assert!(rep.is_ok(), "{:?}", rep.errors);
    }
}

#[test]
fn bakes_are_consistent_across_resolutions() {
    for name in BASE_NAMES {
        let g = make_material(name, &Params::new()).unwrap();
        // fabric weave aliases below 256²
        let r = 256;
        let lo = bake_texture(&g, "surface", r).unwrap();
        let hi = bake_texture(&g, "surface", 2 * r).unwrap();
        assert!(lo.bit_eq(&bake_texture(&g, "surface", r).unwrap()));
        let mut diff = 0.0;
        for y in 0..r {
            for x in 0..r {
                for c in 0..3 {
                    let avg = [(0, 0), (1, 0), (0, 1), (1, 1)].iter().map(|(dx, dy)| hi.pixel(2 * x + dx, 2 * y + dy)[c]).sum::<f64>() / 4.0;
                    diff += (avg - lo.pixel(x, y)[c]).abs();
                }
            }
        }
        let mad = diff / (r * r * 3) as f64;
        assert!(mad < 0.05, "{name}: {mad}");
    }
}

#[test]
fn constant_material_bakes_flat() {
    let mut b = GraphBuilder::new();
    let c = b.constant(Value::Color([0.2, 0.4, 0.6])).unwrap();
    b.set_output("surface", c.out()).unwrap();
    let img = bake_texture(&b.finish(), "surface", 4).unwrap();
    assert_eq!(img.width * img.height, 16);
    assert!((0..16).all(|i| img.data[3 * i..3 * i + 3] == [0.2, 0.4, 0.6]));
}

#[test]
fn concurrent_evaluation_of_one_graph() {
    let g = make_material("marble", &Params::new()).unwrap();
    let batch = random_batch(5000, 3);
    let want = evaluate(&g, "surface", &batch).unwrap();
    std::thread::scope(|s| {
        let hs: Vec<_> = (0..4).map(|_| s.spawn(|| evaluate(&g, "surface", &batch).unwrap())).collect();
        for h in hs {
            assert!(h.join().unwrap().bit_eq(&want));
        }
    });
}

#[test]
fn arithmetic_throughput() {
    let mut b = GraphBuilder::new();
    let p = b.input("position", ValueKind::Vec3).unwrap();
    let mut x = p.clone();
    for i in 0..40 {
        let op = [BinOp::Add, BinOp::Mul, BinOp::Sub, BinOp::Div][i % 4];
        x = b.binary(op, x, p.clone()).unwrap().out();
    }
    b.set_output("out", x).unwrap();
    let g = b.finish();
    let batch = random_batch(1 << 18, 4);
    let opts = EvalOptions { chunk_size: CHUNK_SIZE, parallel: false };
    evaluate_with(&g, &["out"], &batch, opts).unwrap();
    let start = Instant::now();
    let (_, stats) = evaluate_with(&g, &["out"], &batch, opts).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rate = (stats.program_len * batch.len()) as f64 / secs;
    assert!(rate >= 5e6, "{rate:.3e} point-node evaluations per second");
}
