//! One PASS/FAIL line per acceptance criterion.

use procgen::analytics::{analyze, analyze_by_enumeration, cyclomatic, entropy, normal_variation, DEFAULT_WINDOW};
use procgen::eval::bake_texture;
use procgen::gt::render_gt;
use procgen::io::Image;
use procgen::materials::{apply_shape, layer, library, make_mask, make_material, make_shape, CellVariation, Params};
use procgen::math::Vec3;
use procgen::noise::{fbm, fbm_bound, perlin_noise, smudges, white_noise};
use procgen::sampler::*;
use procgen::scene::*;
use procgen::tracer::{replay, trace_distribution, trace_instance, InstanceTrace};
use procgen::transpiler::{emit, exec_script, graph_isomorphic, EmitOptions};
use procgen::{Graph, GraphBuilder, RandomStream, Value};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const CHANNELS: [&str; 3] = ["surface", "roughness", "displacement"];

fn bakes_equal(a: &Graph, b: &Graph, res: usize) -> bool {
    CHANNELS.iter().all(|c| bake_texture(a, c, res).unwrap().bit_eq(&bake_texture(b, c, res).unwrap()))
}

fn tracer_replay() -> Outcome {
    let lib = library();
    let start = Instant::now();
    let ids: Vec<&str> = lib.sampler_ids().collect();
    for &id in &ids {
        for seed in 0..100u64 {
            let want = run_sampler(&lib, id, RandomStream::new(seed)).map_err(|e| e.to_string())?.graph.to_json();
            let trace = trace_instance(&lib, id, seed).map_err(|e| e.to_string())?;
            let parsed = InstanceTrace::from_json(&trace.to_json()).map_err(|e| e.to_string())?;
            let r = replay(&lib, &parsed, &BTreeMap::new()).map_err(|e| e.to_string())?;
            ensure!(r.graph.to_json() == want, "{id} seed {seed}: replay differs");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "{secs:.1} s");
    Ok(format!("{} samplers x 100 seeds in {secs:.2} s", ids.len()))
}

fn distribution_speed() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_procgen"))
        .args(["--threads", "1", "trace", "--mode", "distribution"])
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    ensure!(secs < 1.0, "{secs:.3} s");
    Ok(format!("whole library in {:.1} ms including process start", secs * 1e3))
}

fn unit_graph(_: &Args) -> Result<SValue, String> {
    let mut b = GraphBuilder::new();
    let c = b.constant(Value::Float(0.0)).map_err(|e| e.to_string())?;
    b.set_output("out", c.out()).map_err(|e| e.to_string())?;
    Ok(SValue::Graph(Arc::new(b.finish())))
}

fn hand_library() -> SamplerLibrary {
    let mut l = SamplerLibrary::new();
    l.add_generator("unit_graph", unit_graph);
    l.add_sampler(SamplerFn::new("leaf", vec![Step::call("g", "unit_graph", vec![])], Expr::var("g")));
    for k in 2..=6 {
        let calls = (0..k).map(|_| SamplerCall::new("leaf")).collect();
        l.add_sampler(SamplerFn::new(&format!("choose{k}"), vec![Step::choice("c", vec![1.0; k], calls)], Expr::var("c")));
    }
    l.add_sampler(SamplerFn::new(
        "bit_and_uniform",
        vec![
            Step::invoke("bit", SamplerCall::new("choose2")),
            Step::draw("u", ParamDist::uniform(0.0, 1.0)),
            Step::call("g", "unit_graph", vec![]),
        ],
        Expr::var("g"),
    ));
    l
}

fn analytics_oracles() -> Outcome {
    let lib = library();
    let mut checked = 0;
    for id in lib.sampler_ids() {
        let g = trace_distribution(&lib, id).map_err(|e| e.to_string())?;
        let Some(brute) = analyze_by_enumeration(&g, 1000) else { continue };
        let (brute, dp) = (brute.map_err(|e| e.to_string())?, analyze(&g).map_err(|e| e.to_string())?);
        ensure!((brute.entropy_bits - dp.entropy_bits).abs() < 1e-9, "{id}: entropy {} vs {}", dp.entropy_bits, brute.entropy_bits);
        ensure!((brute.cont_params_mean - dp.cont_params_mean).abs() < 1e-9, "{id}: continuous mean");
        ensure!((brute.disc_params_mean - dp.disc_params_mean).abs() < 1e-9, "{id}: discrete mean");
        ensure!(brute.cyclomatic == dp.cyclomatic, "{id}: cyclomatic");
        checked += 1;
    }
    let hand = hand_library();
    for k in 2..=6u64 {
        let g = trace_distribution(&hand, &format!("choose{k}")).map_err(|e| e.to_string())?;
        ensure!(cyclomatic(&g) == k, "{k}-way choice has cyclomatic {}", cyclomatic(&g));
    }
    let h = entropy(&trace_distribution(&hand, "bit_and_uniform").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(h == 4.0, "fair bit + uniform gives {h} bits");
    let base = trace_distribution(&lib, "base").map_err(|e| e.to_string())?;
    let comp = trace_distribution(&lib, "composed").map_err(|e| e.to_string())?;
    let (hb, hc) = (entropy(&base).map_err(|e| e.to_string())?, entropy(&comp).map_err(|e| e.to_string())?);
    ensure!(hc > hb, "composed {hc} <= base {hb}");
    ensure!(cyclomatic(&comp) > cyclomatic(&base), "cyclomatic not increased");
    Ok(format!("{checked} samplers match enumeration; composed {hc:.1} bits > base {hb:.1} bits"))
}

fn composition_identities() -> Outcome {
    let m = |n: &str| make_material(n, &Params::new()).map_err(|e| e.to_string());
    let constant = |v: f64| make_mask("constant", &BTreeMap::from([("value".to_string(), Value::Float(v))])).map_err(|e| e.to_string());
    let (wood, paint, marble, grout) = (m("wood")?, m("paint")?, m("marble")?, m("concrete")?);
    ensure!(bakes_equal(&layer(&wood, &paint, &constant(0.0)?).map_err(|e| e.to_string())?, &wood, 128), "layer(m, t, 0) != m");
    ensure!(bakes_equal(&layer(&wood, &paint, &constant(1.0)?).map_err(|e| e.to_string())?, &paint, 128), "mask 1 != top");
    let shape = make_shape("bricks", &BTreeMap::from([("mortar_width".into(), Value::Float(0.03))])).map_err(|e| e.to_string())?;
    let recess = 0.004;
    let g = apply_shape(&shape, &[&marble], &grout, CellVariation { amount: 0.1, recess }).map_err(|e| e.to_string())?;
    let mask = bake_texture(&shape, "mask", 128).map_err(|e| e.to_string())?;
    let got: Vec<Image> = CHANNELS.iter().map(|c| bake_texture(&g, c, 128).unwrap()).collect();
    let want: Vec<Image> = CHANNELS.iter().map(|c| bake_texture(&grout, c, 128).unwrap()).collect();
    let mut pixels = 0;
    for y in 0..128 {
        for x in 0..128 {
            if mask.pixel(x, y)[0] != 0.0 {
                continue;
            }
            pixels += 1;
            ensure!(got[0].pixel(x, y) == want[0].pixel(x, y), "grout surface at ({x}, {y})");
            ensure!(got[1].pixel(x, y) == want[1].pixel(x, y), "grout roughness at ({x}, {y})");
            ensure!(got[2].pixel(x, y)[0] == want[2].pixel(x, y)[0] - recess, "grout displacement at ({x}, {y})");
        }
    }
    ensure!(pixels > 500, "only {pixels} grout pixels");
    Ok(format!("layer identities exact; {pixels} grout pixels equal"))
}

fn random_scene(seed: u64) -> Scene {
    let mut s = RandomStream::new(seed);
    let mut sc = Scene::new(seed);
    let meshes = [
        sc.add_mesh(MeshSource::Box { size: [1.0, 0.6, 0.8], subdiv: 2 }).unwrap(),
        sc.add_mesh(MeshSource::Box { size: [0.3, 0.3, 1.2], subdiv: 1 }).unwrap(),
        sc.add_mesh(MeshSource::Cylinder { radius: 0.3, height: 0.9, segments: 12 }).unwrap(),
    ];
    let n = 4 + s.randint(6).unwrap() as usize;
    for _ in 0..n {
        let m = meshes[s.randint(3).unwrap() as usize];
        let t = Transform::new(
            Vec3::new(s.uniform(0.0, 3.0).unwrap(), s.uniform(0.0, 3.0).unwrap(), s.uniform(0.0, 0.5).unwrap()),
            s.uniform(0.0, 6.3).unwrap(),
            s.uniform(0.6, 1.4).unwrap(),
        );
        sc.add_object(m, t, &[]);
    }
    sc
}

fn brute_force(sc: &Scene) -> BTreeSet<(usize, usize)> {
    let tris: Vec<Vec<[Vec3; 3]>> = (0..sc.objects.len())
        .map(|i| {
            let m = sc.world_mesh(i);
            m.triangles().iter().map(|t| t.map(|k| m.vertices[k as usize])).collect()
        })
        .collect();
    let mut out = BTreeSet::new();
    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            if tris[i].iter().any(|a| tris[j].iter().any(|b| tri_tri_intersect(a, b))) {
                out.insert((i, j));
            }
        }
    }
    out
}

fn collision_oracle() -> Outcome {
    let start = Instant::now();
    let mut colliding = 0;
    for seed in 0..200 {
        let sc = random_scene(seed);
        let got = sc.all_collisions();
        ensure!(got == brute_force(&sc), "scene {seed} differs");
        ensure!(sc.cache().len() == sc.meshes.len() && sc.cache().builds() == sc.meshes.len(), "scene {seed}: cache holds {} BVHs for {} meshes", sc.cache().len(), sc.meshes.len());
        colliding += !got.is_empty() as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "{secs:.1} s");
    Ok(format!("200 scenes ({colliding} with contacts) in {secs:.2} s"))
}

fn rrt_properties() -> Outcome {
    let start = Instant::now();
    let mut sc = Scene::new(0);
    sc.room = Some(RoomSpec { width: 5.0, depth: 4.0, height: 2.5, quad_size: 0.5, windows: vec![] });
    let world = sc.box_world(None, 0.3);
    let (a, b) = (Vec3::new(0.5, 0.5, 1.0), Vec3::new(4.5, 0.5, 1.0));
    let params = RrtParams { max_iters: 5000, ..RrtParams::default() };
    let runs: Vec<Result<bool, String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let r = rrt_star(a, b, &world, &params, &mut RandomStream::new(seed)).map_err(|e| e.to_string())?;
            ensure!(r.cost_trace.windows(2).all(|w| w[1] <= w[0] || w[0].is_infinite()), "seed {seed}: cost trace increases");
            for w in r.path.windows(2) {
                ensure!(world.segment_free_dense(w[0], w[1], 0.01), "seed {seed}: segment fails dense validation");
            }
            Ok(r.cost <= 1.1 * a.distance(b))
        })
        .collect();
    let mut good = 0;
    for r in runs {
        good += r? as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(good >= 95, "{good}/100 within 1.1x");
    ensure!(secs < 120.0, "{secs:.1} s");
    Ok(format!("{good}/100 within 1.1x of straight line in {secs:.2} s"))
}

fn transpiler_round_trip() -> Outcome {
    let lib = library();
    for s in 0..50u64 {
        let g = run_sampler(&lib, "composed", RandomStream::new(1000 + s)).map_err(|e| e.to_string())?.graph;
        let back = exec_script(&emit(&g, &EmitOptions::default())).map_err(|e| format!("graph {s}: {e}"))?;
        ensure!(graph_isomorphic(&g, &back), "graph {s} not isomorphic");
        ensure!(bakes_equal(&g, &back, 64), "graph {s} bakes differ");
    }
    Ok("50 composed graphs rebuild with identical 64² bakes".into())
}

fn points(seed: u64, n: usize, span: f64) -> Vec<[f64; 3]> {
    let mut s = RandomStream::new(seed);
    (0..n).map(|_| [0; 3].map(|_| s.uniform(-span, span).unwrap())).collect()
}

fn noise_properties() -> Outcome {
    for p in points(1, 10_000, 1000.0) {
        let q = p.map(f64::round);
        ensure!(perlin_noise(q, 1.0) == 0.0, "perlin nonzero at lattice {q:?}");
    }
    let pts = points(2, 1_000_000, 20.0);
    let worst = pts
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let (oct, gain) = (1 + (i % 6) as i64, 0.3 + 0.1 * (i % 5) as f64);
            fbm(p, 0.9, oct, 2.0, gain).abs() / fbm_bound(oct, gain)
        })
        .reduce(|| 0.0, f64::max);
    ensure!(worst <= 1.0, "fbm exceeds bound by factor {worst}");
    let pts = points(3, 1_000_000, 30.0);
    let mut worst_cov: f64 = 0.0;
    for c in [0.1, 0.3, 0.5, 0.8] {
        let mean = pts.par_iter().map(|&p| smudges(p, 2.0, c)).sum::<f64>() / pts.len() as f64;
        worst_cov = worst_cov.max((mean - c).abs());
    }
    ensure!(worst_cov <= 0.05, "smudge coverage off by {worst_cov}");
    let mut xs: Vec<f64> = points(4, 100_000, 100.0).iter().map(|&p| white_noise(p)).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs.iter().enumerate().map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs())).fold(0.0, f64::max);
    ensure!(ks < 0.01, "KS {ks}");
    Ok(format!("fbm/bound max {worst:.3}, smudge error {worst_cov:.4}, KS {ks:.4}"))
}

fn chord_oracle(img: &Image, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut out = vec![0.0; img.width * img.height];
    for y in 0..h {
        for x in 0..w {
            let c = img.pixel(x as usize, y as usize);
            let mut s = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = img.pixel(nx as usize, ny as usize);
                    let chord = (0..3).map(|i| (c[i] - n[i]).powi(2)).sum::<f64>().sqrt();
                    s += 2.0 * (chord / 2.0).min(1.0).asin();
                }
            }
            out[(y * w + x) as usize] = s;
        }
    }
    out
}

fn normal_variation_metric() -> Outcome {
    let mut flat = Image::new(40, 30, 3);
    flat.data.chunks_mut(3).for_each(|p| p.copy_from_slice(&[0.0, 0.6, -0.8]));
    let nv = normal_variation(&flat, DEFAULT_WINDOW).map_err(|e| e.to_string())?;
    ensure!(nv.mean == 0.0 && nv.v.data.iter().all(|&v| v == 0.0), "flat map is not zero");
    let mut s = RandomStream::new(5);
    let mut img = Image::new(32, 32, 3);
    for p in img.data.chunks_mut(3) {
        let v = [0; 3].map(|_| s.normal(0.0, 1.0, false).unwrap());
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        p.copy_from_slice(&v.map(|c| c / n));
    }
    let nv = normal_variation(&img, DEFAULT_WINDOW).map_err(|e| e.to_string())?;
    let err = nv.v.data.iter().zip(chord_oracle(&img, DEFAULT_WINDOW)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(err < 1e-9, "oracle error {err}");
    let room = RoomSpec { width: 3.0, depth: 3.0, height: 2.5, quad_size: 0.02, windows: vec![] };
    let cam = CameraSpec::new(Vec3::new(1.5, 1.5, 1.5), Vec3::new(1.5, 1.6, 0.0), 0.9, 64, 64);
    let mean_v = |material: Option<MaterialRef>| -> Result<f64, String> {
        let mut sc = Scene::new(0);
        let m = sc.add_mesh(MeshSource::RoomPanel { room: room.clone(), panel: FLOOR, material }).map_err(|e| e.to_string())?;
        sc.add_object(m, Transform::default(), &[]);
        let gt = render_gt(&sc, &cam).map_err(|e| e.to_string())?;
        Ok(normal_variation(&gt.normal, DEFAULT_WINDOW).map_err(|e| e.to_string())?.mean)
    };
    let plain = mean_v(None)?;
    let displaced = mean_v(Some(MaterialRef { sampler: "shaped".into(), seed: 3, displacement: 1.0 }))?;
    ensure!(displaced > plain, "displaced {displaced} <= flat {plain}");
    Ok(format!("oracle error {err:.1e}; floor V {plain:.4} -> {displaced:.4}"))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn dataset_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |dir: &Path, threads: &str, scenes: &str, cams: &str| -> Result<f64, String> {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_procgen"))
            .args(["--threads", threads, "dataset", "--seed", "1", "--scenes", scenes, "--cams", cams, "--res", "128", "--out"])
            .arg(dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Ok(start.elapsed().as_secs_f64())
    };
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&a, "4", "2", "3")?;
    run(&b, "2", "2", "3")?;
    ensure!(tree(&a) == tree(&b), "output trees differ");
    let secs = run(&c, "1", "1", "3")?;
    ensure!(secs < 60.0, "one scene took {secs:.1} s");
    Ok(format!("identical trees ({} files); one 128² scene single-threaded in {secs:.2} s", tree(&a).len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("tracer replay equals direct run", tracer_replay),
        ("distribution tracing under 1 s", distribution_speed),
        ("entropy and complexity oracles", analytics_oracles),
        ("composition identities", composition_identities),
        ("collision oracle", collision_oracle),
        ("RRT* properties", rrt_properties),
        ("transpiler round trip", transpiler_round_trip),
        ("noise properties", noise_properties),
        ("normal-variation metric", normal_variation_metric),
        ("dataset determinism and speed", dataset_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
