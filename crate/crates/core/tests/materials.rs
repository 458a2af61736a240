use procgen::analytics::{analyze, cyclomatic, entropy};
use procgen::eval::bake_texture;
use procgen::io::Image;
use procgen::materials::*;
use procgen::rng::RandomStream;
use procgen::sampler::run_sampler;
use procgen::tracer::{check_library, trace_distribution};
use procgen::{Graph, Value};
use std::collections::{BTreeMap, BTreeSet};

const CHANNELS: [&str; 3] = ["surface", "roughness", "displacement"];

fn bakes(g: &Graph, res: usize) -> Vec<Image> {
    CHANNELS.iter().map(|c| bake_texture(g, c, res).unwrap()).collect()
}

fn bakes_equal(a: &Graph, b: &Graph, res: usize) -> bool {
    bakes(a, res).iter().zip(bakes(b, res)).all(|(x, y)| x.bit_eq(&y))
}

fn constant_mask(v: f64) -> Graph {
    make_mask("constant", &BTreeMap::from([("value".to_string(), Value::Float(v))])).unwrap()
}

fn default(name: &str) -> Graph {
    make_material(name, &Params::new()).unwrap()
}

#[test]
fn library_is_traceable() {
    check_library(&library()).unwrap();
}

#[test]
fn base_bakes_are_finite_with_unit_roughness() {
    for name in BASE_NAMES {
        let g = default(name);
        let [s, r, d] = [0, 1, 2].map(|i| bake_texture(&g, CHANNELS[i], 256).unwrap());
        assert!(s.data.iter().chain(&d.data).all(|x| x.is_finite()), "{name}");
        assert!(r.data.iter().all(|x| (0.0..=1.0).contains(x)), "{name}");
    }
}

fn zero_crossings(img: &Image, row: usize) -> usize {
    let xs: Vec<f64> = (0..img.width).map(|x| img.pixel(x, row)[0]).collect();
    xs.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count()
}

#[test]
fn doubling_ring_frequency_doubles_rings() {
    for f in [3.0, 5.0, 9.0, 15.0] {
        let img = |freq: f64| {
            let p = Params::from([("ring_freq".to_string(), freq), ("warp".to_string(), 0.0)]);
            bake_texture(&make_material("wood", &p).unwrap(), "displacement", 512).unwrap()
        };
        let (a, b) = (zero_crossings(&img(f), 100), zero_crossings(&img(2.0 * f), 100));
        assert!(b.abs_diff(2 * a) <= 1, "f={f}: {a} vs {b}");
    }
}

#[test]
fn layer_identities() {
    let (wood, paint) = (default("wood"), default("paint"));
    assert!(bakes_equal(&layer(&wood, &paint, &constant_mask(0.0)).unwrap(), &wood, 128));
    assert!(bakes_equal(&layer(&wood, &paint, &constant_mask(1.0)).unwrap(), &paint, 128));
}

#[test]
fn layer_mean_is_linear_in_coverage() {
    let (wood, paint) = (default("wood"), default("paint"));
    let mask = make_mask(
        "smudges",
        &BTreeMap::from([("coverage".into(), Value::Float(0.3)), ("scale".into(), Value::Float(24.0))]),
    )
    .unwrap();
    let l = layer(&wood, &paint, &mask).unwrap();
    let mean = |g: &Graph| bake_texture(g, "surface", 256).unwrap().mean();
    let want = 0.7 * mean(&wood) + 0.3 * mean(&paint);
    assert!((mean(&l) - want).abs() < 0.02, "{} vs {want}", mean(&l));
}

#[test]
fn crack_layer_carves_displacement() {
    let (wood, paint) = (default("wood"), default("paint"));
    let cracks = make_mask("cracks", &BTreeMap::from([("depth".into(), Value::Float(0.01))])).unwrap();
    let plain = layer(&wood, &paint, &constant_mask(0.0)).unwrap();
    let cracked = layer(&wood, &paint, &cracks).unwrap();
    let a = bake_texture(&plain, "displacement", 64).unwrap().mean();
    let b = bake_texture(&cracked, "displacement", 64).unwrap().mean();
    assert!(b < a);
}

#[test]
fn single_full_cell_is_the_base() {
    let shape = make_shape(
        "tiles",
        &BTreeMap::from([("nx".into(), Value::Int(1)), ("ny".into(), Value::Int(1)), ("grout".into(), Value::Float(0.0))]),
    )
    .unwrap();
    for name in BASE_NAMES {
        let base = default(name);
        let g = apply_shape(&shape, &[&base], &default("concrete"), CellVariation { amount: 0.0, recess: 0.004 }).unwrap();
        assert!(bakes_equal(&g, &base, 128), "{name}");
    }
}

#[test]
fn grout_region_is_the_grout() {
    let shape = make_shape("bricks", &BTreeMap::from([("mortar_width".into(), Value::Float(0.03))])).unwrap();
    let (marble, grout) = (default("marble"), default("concrete"));
    let recess = 0.004;
    let g = apply_shape(&shape, &[&marble], &grout, CellVariation { amount: 0.1, recess }).unwrap();
    let mask = bake_texture(&shape, "mask", 128).unwrap();
    let (out, want) = (bakes(&g, 128), bakes(&grout, 128));
    let mut grout_pixels = 0;
    for y in 0..128 {
        for x in 0..128 {
            if mask.pixel(x, y)[0] != 0.0 {
                continue;
            }
            grout_pixels += 1;
            assert_eq!(out[0].pixel(x, y), want[0].pixel(x, y));
            assert_eq!(out[1].pixel(x, y), want[1].pixel(x, y));
            assert_eq!(out[2].pixel(x, y)[0], want[2].pixel(x, y)[0] - recess);
        }
    }
    assert!(grout_pixels > 500);
}

#[test]
fn cell_variation_separates_cells() {
    let shape = make_shape(
        "tiles",
        &BTreeMap::from([("nx".into(), Value::Int(2)), ("ny".into(), Value::Int(1)), ("grout".into(), Value::Float(0.0))]),
    )
    .unwrap();
    let paint = make_material("paint", &Params::from([("noise_amp".to_string(), 0.0)])).unwrap();
    let g = apply_shape(&shape, &[&paint], &default("concrete"), CellVariation { amount: 0.5, recess: 0.0 }).unwrap();
    let img = bake_texture(&g, "surface", 64).unwrap();
    let half_mean = |x0: usize| -> Vec<f64> {
        (0..3)
            .map(|c| {
                let mut s = 0.0;
                for y in 0..64 {
                    for x in x0..x0 + 32 {
                        s += img.pixel(x, y)[c];
                    }
                }
                s / (64.0 * 32.0)
            })
            .collect()
    };
    assert_ne!(half_mean(0), half_mean(32));
}

#[test]
fn composed_space_covers_all_pairs() {
    let lib = library();
    let dg = trace_distribution(&lib, "composed").unwrap();
    assert!(dg.path_count() >= 48);
    let paths = dg.enumerate_paths(10_000).unwrap();
    let mut shape_pairs = BTreeSet::new();
    let mut mask_pairs = BTreeSet::new();
    for p in &paths {
        let d: BTreeMap<&str, usize> = p.decisions.iter().map(|(n, i)| (n.as_str(), *i)).collect();
        match d["kind"] {
            1 => {
                shape_pairs.insert((d["kind[1]/cell/material"], d["kind[1]/shape"]));
            }
            2 if d["kind[2]/under"] == 0 => {
                mask_pairs.insert((d["kind[2]/under[0]/material"], d["kind[2]/mask"]));
            }
            _ => {}
        }
    }
    assert_eq!(shape_pairs.len() + mask_pairs.len(), 18 + 24);
}

#[test]
fn composition_raises_diversity() {
    let lib = library();
    let base = trace_distribution(&lib, "base").unwrap();
    let comp = trace_distribution(&lib, "composed").unwrap();
    assert!(entropy(&comp).unwrap() > entropy(&base).unwrap());
    assert!(cyclomatic(&comp) > cyclomatic(&base));
    let r = analyze(&comp).unwrap();
    assert!(r.entropy_bits > 0.0 && r.cont_params_mean > 0.0);
}

#[test]
fn composed_samples_conform_and_bake() {
    let lib = library();
    for seed in 0..100 {
        let g = run_sampler(&lib, "composed", RandomStream::new(seed)).unwrap().graph;
        check_material(&g).unwrap();
        for c in CHANNELS {
            let img = bake_texture(&g, c, 128).unwrap();
            assert!(img.data.iter().all(|x| x.is_finite()), "seed {seed} {c}");
        }
    }
}
