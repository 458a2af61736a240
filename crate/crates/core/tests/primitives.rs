use procgen::noise::*;
use procgen::rng::RandomStream;
use rayon::prelude::*;

const N: usize = 1_000_000;

fn points(seed: u64, n: usize, span: f64) -> Vec<[f64; 3]> {
    let mut s = RandomStream::new(seed);
    (0..n).map(|_| [0; 3].map(|_| s.uniform(-span, span).unwrap())).collect()
}

#[test]
fn perlin_is_bounded_and_vanishes_on_the_lattice() {
    let pts = points(1, N, 50.0);
    let worst = pts.par_iter().map(|&p| perlin_noise(p, 1.3).abs()).reduce(|| 0.0, f64::max);
    assert!(worst <= 1.0 && worst > 0.5, "{worst}");
    for p in points(2, 1000, 1000.0) {
        let q = p.map(f64::round);
        assert_eq!(perlin_noise(q, 1.0), 0.0);
        assert_eq!(perlin_noise(q, 1.0).to_bits(), perlin_noise(q, 1.0).to_bits());
    }
}

#[test]
fn fbm_respects_its_geometric_bound() {
    let pts = points(3, N, 20.0);
    let ok = pts.par_iter().enumerate().all(|(i, &p)| {
        let octaves = 1 + (i % 6) as i64;
        let gain = 0.3 + 0.1 * (i % 5) as f64;
        fbm(p, 0.9, octaves, 2.0, gain).abs() <= fbm_bound(octaves, gain)
    });
    assert!(ok);
    assert_eq!(fbm_bound(3, 0.5), 1.75);
    for p in points(4, 200, 100.0) {
        let q = p.map(f64::round);
        assert_eq!(fbm(q, 1.0, 5, 2.0, 0.5), 0.0);
        assert_eq!(fbm(q, 1.0, 3, 3.0, 0.7), 0.0);
    }
}

#[test]
fn white_noise_is_uniform() {
    let pts = points(5, N, 100.0);
    let mean = pts.par_iter().map(|&p| white_noise(p)).sum::<f64>() / N as f64;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
    let mut xs: Vec<f64> = pts[..100_000].iter().map(|&p| white_noise(p)).collect();
    assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS {ks}");
    assert_eq!(white_noise([0.0, 1.0, 2.0]), white_noise([-0.0, 1.0, 2.0]));
}

#[test]
fn smudge_coverage_is_calibrated() {
    let pts = points(6, N, 30.0);
    for coverage in [0.1, 0.3, 0.5, 0.8] {
        let mean = pts.par_iter().map(|&p| smudges(p, 2.0, coverage)).sum::<f64>() / N as f64;
        assert!((mean - coverage).abs() <= 0.05, "coverage {coverage}: {mean}");
    }
}

#[test]
fn zero_width_cracks_have_measure_zero() {
    let pts = points(7, N, 10.0);
    let mean = pts.par_iter().map(|&p| cracks(p, 3.0, 0.0)).sum::<f64>() / N as f64;
    assert!(mean < 1e-3, "{mean}");
}

#[test]
fn masks_lie_in_the_unit_interval() {
    let pts = points(8, 200_000, 10.0);
    let ok = pts.par_iter().enumerate().all(|(i, &p)| {
        let c = (i % 7) as f64 * 0.5;
        [
            scratches(p, 4.0, 0.3, 0.01, c),
            cracks(p, 3.0, 0.02),
            smudges(p, 2.0, 0.4),
            edge_wear(p, c, 0.8, 6.0),
        ]
        .iter()
        .all(|m| (0.0..=1.0).contains(m))
    });
    assert!(ok);
}

#[test]
fn voronoi_geometry() {
    let freq = 2.5;
    let mut s = RandomStream::new(9);
    for p in points(10, 100_000, 20.0) {
        let v = voronoi(p, freq);
        assert!(v.f1 <= 3f64.sqrt() / freq && v.f1 <= v.f2);
        assert!((0.0..1.0).contains(&v.cell_id));
    }
    // the nearest-cell region around a feature point keeps its id
    for p in points(11, 2000, 20.0) {
        let v = voronoi(p, freq);
        let c = v.cell_center;
        let at = voronoi(c, freq);
        assert!(at.f1 < 1e-12);
        let d = [0; 3].map(|_| s.uniform(-1e-4, 1e-4).unwrap());
        let near = voronoi([c[0] + d[0], c[1] + d[1], c[2] + d[2]], freq);
        assert_eq!(near.cell_id, at.cell_id);
    }
}

#[test]
fn hsv_round_trip_on_random_colors() {
    let mut s = RandomStream::new(12);
    for _ in 0..10_000 {
        let hsv = [s.next_f64(), s.uniform(1e-3, 1.0).unwrap(), s.uniform(1e-3, 1.0).unwrap()];
        let back = rgb_to_hsv(hsv_to_rgb(hsv[0], hsv[1], hsv[2]));
        let dh = (back[0] - hsv[0]).abs();
        assert!(dh.min(1.0 - dh) < 1e-12 && (back[1] - hsv[1]).abs() < 1e-12 && (back[2] - hsv[2]).abs() < 1e-12);
    }
    let g = hsv_to_rgb(1.0 / 3.0, 1.0, 1.0);
    assert!(g[0].abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12 && g[2].abs() < 1e-12);
}

#[test]
fn planks_are_periodic_with_distinct_neighbours() {
    let mut s = RandomStream::new(13);
    for _ in 0..2000 {
        let v = s.next_f64();
        let a = plank_grid([0.0, v], 0.1, 0.3, 0.005).unwrap();
        let b = plank_grid([1.0, v], 0.1, 0.3, 0.005).unwrap();
        assert_eq!((a.mask, a.cell_id), (b.mask, b.cell_id));
    }
    let (mut distinct, mut pairs) = (0, 0);
    for row in 0..1000 {
        let v = (row as f64 + 0.5) * 0.01;
        let a = tile_grid([0.3, v], 20, 100, 0.0).unwrap();
        let b = tile_grid([0.3 + 0.05, v], 20, 100, 0.0).unwrap();
        let c = tile_grid([0.3, v + 0.01], 20, 100, 0.0).unwrap();
        for o in [b, c] {
            pairs += 1;
            distinct += (o.cell_id != a.cell_id) as usize;
        }
    }
    for k in 0..8000 {
        let v = (k % 97) as f64 / 97.0 + 0.004;
        let u = s.next_f64();
        let a = plank_grid([u, v], 0.1, 0.3, 0.0).unwrap();
        let b = plank_grid([u, v + 0.1], 0.1, 0.3, 0.0).unwrap();
        pairs += 1;
        distinct += (a.cell_id != b.cell_id) as usize;
    }
    assert!(distinct as f64 > 0.99 * pairs as f64, "{distinct}/{pairs}");
}
