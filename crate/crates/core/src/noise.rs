//! Scalar kernels behind the noise, color, pattern and mask ops.
//!
//! Everything here is a pure function of its arguments. Transcendentals go
//! through `libm` so results are bit-stable across platforms.

use crate::math::{canonical_bits, hash3i, hash_words, mix64, unit_f64};

const PERLIN_SALT: u64 = 0x5045_524C;
const VORONOI_SALT: u64 = 0x564F_524F;
const VORONOI_ID_SALT: u64 = 0x5649_4444;
const WHITE_SALT: u64 = 0x5748_4954;
const SCRATCH_SALT: u64 = 0x5343_5241;

/// Supremum of the raw 12-gradient quintic Perlin sum, rounded up.
///
/// Attained near the centre of a lattice cell with all eight gradients
/// aligned; found by numerical maximisation over the 12^8 gradient
/// assignments.
pub const PERLIN_BOUND: f64 = 1.036_353_811_22;

const GRAD12: [[f64; 3]; 12] = [
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [0.0, 1.0, -1.0],
    [0.0, -1.0, -1.0],
];

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[inline]
fn lattice(x: f64) -> (i64, f64) {
    let f = x.floor();
    (f as i64, x - f)
}

#[inline]
fn grad_dot(ix: i64, iy: i64, iz: i64, x: f64, y: f64, z: f64) -> f64 {
    let g = GRAD12[(hash3i(ix, iy, iz, PERLIN_SALT) % 12) as usize];
    g[0] * x + g[1] * y + g[2] * z
}

/// Unit-frequency gradient noise in [-1, 1].
pub fn perlin3(p: [f64; 3]) -> f64 {
    let (ix, fx) = lattice(p[0]);
    let (iy, fy) = lattice(p[1]);
    let (iz, fz) = lattice(p[2]);
    let (u, v, w) = (fade(fx), fade(fy), fade(fz));
    let n000 = grad_dot(ix, iy, iz, fx, fy, fz);
    let n100 = grad_dot(ix + 1, iy, iz, fx - 1.0, fy, fz);
    let n010 = grad_dot(ix, iy + 1, iz, fx, fy - 1.0, fz);
    let n110 = grad_dot(ix + 1, iy + 1, iz, fx - 1.0, fy - 1.0, fz);
    let n001 = grad_dot(ix, iy, iz + 1, fx, fy, fz - 1.0);
    let n101 = grad_dot(ix + 1, iy, iz + 1, fx - 1.0, fy, fz - 1.0);
    let n011 = grad_dot(ix, iy + 1, iz + 1, fx, fy - 1.0, fz - 1.0);
    let n111 = grad_dot(ix + 1, iy + 1, iz + 1, fx - 1.0, fy - 1.0, fz - 1.0);
    let x00 = lerp(n000, n100, u);
    let x10 = lerp(n010, n110, u);
    let x01 = lerp(n001, n101, u);
    let x11 = lerp(n011, n111, u);
    let raw = lerp(lerp(x00, x10, v), lerp(x01, x11, v), w);
    (raw / PERLIN_BOUND).clamp(-1.0, 1.0)
}

#[inline]
fn scale3(p: [f64; 3], s: f64) -> [f64; 3] {
    [p[0] * s, p[1] * s, p[2] * s]
}

pub fn perlin_noise(p: [f64; 3], frequency: f64) -> f64 {
    perlin3(scale3(p, frequency))
}

pub fn fbm(p: [f64; 3], frequency: f64, octaves: i64, lacunarity: f64, gain: f64) -> f64 {
    let mut sum = 0.0;
    let mut amp = 1.0;
    let mut f = frequency;
    for _ in 0..octaves.max(1) {
        sum += amp * perlin_noise(p, f);
        amp *= gain;
        f *= lacunarity;
    }
    sum
}

/// Σ gainⁱ for i < octaves: the bound on |fbm|.
pub fn fbm_bound(octaves: i64, gain: f64) -> f64 {
    let mut s = 0.0;
    let mut a = 1.0;
    for _ in 0..octaves.max(1) {
        s += a;
        a *= gain;
    }
    s
}

#[inline]
fn feature_point(cx: i64, cy: i64, cz: i64) -> [f64; 3] {
    let h = hash3i(cx, cy, cz, VORONOI_SALT);
    let h2 = mix64(h ^ 0xA5A5_A5A5_A5A5_A5A5);
    let h3 = mix64(h2 ^ 0x5A5A_5A5A_5A5A_5A5A);
    [cx as f64 + unit_f64(h), cy as f64 + unit_f64(h2), cz as f64 + unit_f64(h3)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiSample {
    /// Nearest feature distance in input space.
    pub f1: f64,
    /// Second-nearest feature distance in input space.
    pub f2: f64,
    pub cell_id: f64,
    pub cell_center: [f64; 3],
}

/// Cellular noise with one hashed feature per unit cell of `p * frequency`,
/// searched over the 3×3×3 neighborhood.
pub fn voronoi(p: [f64; 3], frequency: f64) -> VoronoiSample {
    let q = scale3(p, frequency);
    let (cx, _) = lattice(q[0]);
    let (cy, _) = lattice(q[1]);
    let (cz, _) = lattice(q[2]);
    let mut best = (f64::INFINITY, [0i64; 3], [0.0; 3]);
    let mut second = f64::INFINITY;
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let c = [cx + dx, cy + dy, cz + dz];
                let f = feature_point(c[0], c[1], c[2]);
                let d2 = (q[0] - f[0]).powi(2) + (q[1] - f[1]).powi(2) + (q[2] - f[2]).powi(2);
                if d2 < best.0 {
                    second = best.0;
                    best = (d2, c, f);
                } else if d2 < second {
                    second = d2;
                }
            }
        }
    }
    let id = unit_f64(hash3i(best.1[0], best.1[1], best.1[2], VORONOI_ID_SALT));
    VoronoiSample {
        f1: best.0.sqrt() / frequency,
        f2: second.sqrt() / frequency,
        cell_id: id,
        cell_center: scale3(best.2, 1.0 / frequency),
    }
}

/// Hash of the exact input bits to [0, 1). `-0.0` and `0.0` agree.
pub fn white_noise(p: [f64; 3]) -> f64 {
    unit_f64(hash_words(
        WHITE_SALT,
        &[canonical_bits(p[0]), canonical_bits(p[1]), canonical_bits(p[2])],
    ))
}

pub fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    if hi == lo {
        return if x < lo { 0.0 } else { 1.0 };
    }
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

// ---------------------------------------------------------------- color

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i64 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(c: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = c;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let v = max;
    let s = if max > 0.0 { d / max } else { 0.0 };
    if d == 0.0 {
        return [0.0, s, v];
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    [(h / 6.0).rem_euclid(1.0), s, v]
}

pub fn hsv_jitter(c: [f64; 3], dh: f64, ds: f64, dv: f64) -> [f64; 3] {
    let [h, s, v] = rgb_to_hsv(c);
    hsv_to_rgb((h + dh).rem_euclid(1.0), (s + ds).clamp(0.0, 1.0), (v + dv).clamp(0.0, 1.0))
}

pub fn luminance(c: [f64; 3]) -> f64 {
    0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]
}

pub fn rotate_quarter(uv: [f64; 2], turns: f64) -> [f64; 2] {
    let [u, v] = uv;
    match (turns.floor() as i64).rem_euclid(4) {
        0 => [u, v],
        1 => [1.0 - v, u],
        2 => [1.0 - u, 1.0 - v],
        _ => [v, 1.0 - u],
    }
}

// ---------------------------------------------------------------- patterns

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSample {
    pub mask: f64,
    pub cell_id: f64,
    pub cell_uv: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("mortar band does not fit inside a cell")]
pub struct InvalidMortar;

const BRICK_FAMILY: f64 = 0.0;
const TILE_FAMILY: f64 = 1.0;
const PLANK_FAMILY: f64 = 2.0;

fn cell_id(col: i64, row: i64, family: f64) -> f64 {
    white_noise([col as f64, row as f64, family])
}

fn band_mask(fx: f64, fy: f64, cell_w: f64, cell_h: f64, band: f64) -> f64 {
    let half = 0.5 * band;
    let dx = fx.min(1.0 - fx) * cell_w;
    let dy = fy.min(1.0 - fy) * cell_h;
    if dx >= half && dy >= half {
        1.0
    } else {
        0.0
    }
}

fn running_bond(
    uv: [f64; 2],
    rows: i64,
    cols: i64,
    band: f64,
    row_offset: f64,
    family: f64,
) -> Result<CellSample, InvalidMortar> {
    let (rows_f, cols_f) = (rows as f64, cols as f64);
    if !(band >= 0.0 && band < (1.0 / rows_f).min(1.0 / cols_f)) {
        return Err(InvalidMortar);
    }
    let (row, fy) = lattice(uv[1] * rows_f);
    let shift = if row.rem_euclid(2) == 1 { row_offset } else { 0.0 };
    let (col, fx) = lattice(uv[0] * cols_f + shift);
    Ok(CellSample {
        mask: band_mask(fx, fy, 1.0 / cols_f, 1.0 / rows_f, band),
        cell_id: cell_id(col.rem_euclid(cols), row.rem_euclid(rows), family),
        cell_uv: [fx, fy],
    })
}

/// Running-bond bricks. Brick area fraction is `(1 - cols·w)(1 - rows·w)`.
pub fn brick_grid(
    uv: [f64; 2],
    rows: i64,
    cols: i64,
    mortar_width: f64,
    row_offset: f64,
) -> Result<CellSample, InvalidMortar> {
    running_bond(uv, rows, cols, mortar_width, row_offset, BRICK_FAMILY)
}

pub fn tile_grid(uv: [f64; 2], nx: i64, ny: i64, grout: f64) -> Result<CellSample, InvalidMortar> {
    running_bond(uv, ny, nx, grout, 0.0, TILE_FAMILY)
}

/// Planks per row for a plank grid; each row holds a whole number of equal
/// planks so the pattern repeats with period 1 in u.
pub fn planks_in_row(row: i64, length_mean: f64) -> i64 {
    let len = length_mean * (0.5 + white_noise([row as f64, 0.0, PLANK_FAMILY + 0.5]));
    ((1.0 / len).round() as i64).max(1)
}

pub fn plank_grid(uv: [f64; 2], plank_width: f64, length_mean: f64, gap: f64) -> Result<CellSample, InvalidMortar> {
    if !(gap >= 0.0 && gap < plank_width && gap < 0.25 * length_mean) {
        return Err(InvalidMortar);
    }
    let (row, fy) = lattice(uv[1] / plank_width);
    let n = planks_in_row(row, length_mean);
    let offset = white_noise([row as f64, 1.0, PLANK_FAMILY + 0.5]);
    let (col, fx) = lattice(uv[0].rem_euclid(1.0) * n as f64 + offset);
    Ok(CellSample {
        mask: band_mask(fx, fy, 1.0 / n as f64, plank_width, gap),
        cell_id: cell_id(col.rem_euclid(n), row, PLANK_FAMILY),
        cell_uv: [fx, fy],
    })
}

// ---------------------------------------------------------------- masks

fn segment_distance2(q: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let aq = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        ((aq[0] * ab[0] + aq[1] * ab[1] + aq[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [aq[0] - ab[0] * t, aq[1] - ab[1] * t, aq[2] - ab[2] * t];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Union of hashed capsules. Space is cut into cubes of side `length`; each
/// cube holds `floor(density)` segments plus one more with probability
/// `fract(density)`, each of length `length` centred at a hashed point.
pub fn scratches(p: [f64; 3], density: f64, length: f64, width: f64, seed_offset: f64) -> f64 {
    if density <= 0.0 || width <= 0.0 {
        return 0.0;
    }
    let salt = SCRATCH_SALT ^ canonical_bits(seed_offset);
    let q = scale3(p, 1.0 / length);
    let w2 = (width / length).powi(2);
    let (cx, _) = lattice(q[0]);
    let (cy, _) = lattice(q[1]);
    let (cz, _) = lattice(q[2]);
    let whole = density.floor() as i64;
    let extra_p = density - density.floor();
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (x, y, z) = (cx + dx, cy + dy, cz + dz);
                let mut h = hash3i(x, y, z, salt);
                let count = whole + i64::from(unit_f64(h) < extra_p);
                for _ in 0..count {
                    let mut next = || {
                        h = mix64(h ^ crate::math::GOLDEN_GAMMA);
                        unit_f64(h)
                    };
                    let c = [x as f64 + next(), y as f64 + next(), z as f64 + next()];
                    let dz_ = 2.0 * next() - 1.0;
                    let phi = 2.0 * std::f64::consts::PI * next();
                    let r = (1.0 - dz_ * dz_).max(0.0).sqrt();
                    let half = [0.5 * r * libm::cos(phi), 0.5 * r * libm::sin(phi), 0.5 * dz_];
                    let a = [c[0] - half[0], c[1] - half[1], c[2] - half[2]];
                    let b = [c[0] + half[0], c[1] + half[1], c[2] + half[2]];
                    if segment_distance2(q, a, b) < w2 {
                        return 1.0;
                    }
                }
            }
        }
    }
    0.0
}

/// 1 where the gap between the two nearest voronoi features is below `width`.
pub fn cracks(p: [f64; 3], scale: f64, width: f64) -> f64 {
    let v = voronoi(p, scale);
    if v.f2 - v.f1 < width {
        1.0
    } else {
        0.0
    }
}

/// Half-width of the smoothstep band around the smudge threshold.
pub const SMUDGE_SOFTNESS: f64 = 0.05;

/// Expected value of `smoothstep(t - w, t + w, fbm(p))` (4 octaves,
/// lacunarity 2, gain 0.5, w = [`SMUDGE_SOFTNESS`]) at thresholds
/// `t = SMUDGE_T0 + i * SMUDGE_DT`, estimated offline by Monte Carlo.
pub const SMUDGE_T0: f64 = -1.0;
pub const SMUDGE_DT: f64 = 0.05;
pub static SMUDGE_COVERAGE: [f64; 41] = include!("smudge_table.in");

/// Threshold whose expected smudge coverage is `coverage`.
pub fn smudge_threshold(coverage: f64) -> f64 {
    let table = &SMUDGE_COVERAGE;
    // Coverage falls as the threshold rises.
    if coverage >= table[0] {
        return SMUDGE_T0;
    }
    let last = table.len() - 1;
    if coverage <= table[last] {
        return SMUDGE_T0 + last as f64 * SMUDGE_DT;
    }
    let i = table.partition_point(|&c| c > coverage).clamp(1, last);
    let (c0, c1) = (table[i - 1], table[i]);
    let frac = if c0 > c1 { (c0 - coverage) / (c0 - c1) } else { 0.0 };
    SMUDGE_T0 + (i as f64 - 1.0 + frac) * SMUDGE_DT
}

pub fn smudges(p: [f64; 3], scale: f64, coverage: f64) -> f64 {
    if coverage <= 0.0 {
        return 0.0;
    }
    if coverage >= 1.0 {
        return 1.0;
    }
    let t = smudge_threshold(coverage);
    smoothstep(t - SMUDGE_SOFTNESS, t + SMUDGE_SOFTNESS, fbm(p, scale, 4, 2.0, 0.5))
}

pub fn edge_wear(p: [f64; 3], curvature: f64, intensity: f64, noise_scale: f64) -> f64 {
    let base = (curvature * intensity).clamp(0.0, 1.0);
    if base == 0.0 {
        return 0.0;
    }
    let n = fbm(p, noise_scale, 4, 2.0, 0.5) / fbm_bound(4, 0.5);
    base * (0.75 + 0.25 * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_points(n: usize, scale: f64, seed: u64) -> impl Iterator<Item = [f64; 3]> {
        (0..n as u64).map(move |i| {
            let h = mix64(seed ^ mix64(i));
            let a = unit_f64(h);
            let b = unit_f64(mix64(h ^ 1));
            let c = unit_f64(mix64(h ^ 2));
            [(a - 0.5) * scale, (b - 0.5) * scale, (c - 0.5) * scale]
        })
    }

    #[test]
    fn perlin_vanishes_on_lattice() {
        for x in -3..3 {
            for y in -3..3 {
                for z in -3..3 {
                    assert_eq!(perlin3([x as f64, y as f64, z as f64]), 0.0);
                }
            }
        }
    }

    #[test]
    fn perlin_bound_is_tight_above_raw_sup() {
        // Brute-force maximum of the raw sum along the cell diagonal with all
        // gradients chosen adversarially; the normaliser must not undercut it.
        let mut best: f64 = 0.0;
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let f = [t, t, t];
            let (u, v, w) = (fade(t), fade(t), fade(t));
            let mut total = 0.0;
            for c in 0..8 {
                let o = [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64];
                let d = [f[0] - o[0], f[1] - o[1], f[2] - o[2]];
                let wgt = (if o[0] == 1.0 { u } else { 1.0 - u })
                    * (if o[1] == 1.0 { v } else { 1.0 - v })
                    * (if o[2] == 1.0 { w } else { 1.0 - w });
                let g = GRAD12.iter().map(|g| g[0] * d[0] + g[1] * d[1] + g[2] * d[2]).fold(f64::MIN, f64::max);
                total += wgt * g;
            }
            best = best.max(total);
        }
        assert!(best <= PERLIN_BOUND);
        assert!(best > 0.9);
    }

    #[test]
    fn fbm_single_octave_is_perlin() {
        for p in pseudo_points(200, 20.0, 3) {
            assert_eq!(fbm(p, 1.7, 1, 2.0, 0.5).to_bits(), perlin_noise(p, 1.7).to_bits());
        }
    }

    #[test]
    fn fbm_zero_at_lattice_with_integer_lacunarity() {
        assert_eq!(fbm([3.0, -2.0, 5.0], 1.0, 6, 2.0, 0.5), 0.0);
        assert_eq!(fbm([1.0, 1.0, 1.0], 1.0, 4, 3.0, 0.7), 0.0);
    }

    #[test]
    fn voronoi_at_feature_point_is_zero() {
        let f = feature_point(2, -1, 4);
        let v = voronoi(f, 1.0);
        assert_eq!(v.f1, 0.0);
        assert_eq!(v.cell_center, f);
    }

    #[test]
    fn voronoi_distance_bound() {
        let freq = 2.5;
        for p in pseudo_points(20_000, 10.0, 7) {
            let v = voronoi(p, freq);
            assert!(v.f1 <= 3f64.sqrt() / freq);
            assert!(v.f1 <= v.f2);
        }
    }

    #[test]
    fn hsv_reference_colors() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        let g = hsv_to_rgb(1.0 / 3.0, 1.0, 1.0);
        assert!((g[0]).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12 && g[2].abs() < 1e-12);
        assert_eq!(hsv_to_rgb(1.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn hsv_round_trip() {
        for p in pseudo_points(10_000, 1.0, 11) {
            let hsv = [p[0] + 0.5, p[1] + 0.5 + 1e-3, p[2] + 0.5 + 1e-3];
            let back = rgb_to_hsv(hsv_to_rgb(hsv[0], hsv[1].min(1.0), hsv[2].min(1.0)));
            let dh = (back[0] - hsv[0]).abs();
            assert!(dh.min(1.0 - dh) < 1e-12, "{hsv:?} -> {back:?}");
            assert!((back[1] - hsv[1].min(1.0)).abs() < 1e-12);
            assert!((back[2] - hsv[2].min(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_quarter_cycles() {
        let uv = [0.2, 0.7];
        let mut r = uv;
        for _ in 0..4 {
            r = rotate_quarter(r, 1.0);
        }
        assert!((r[0] - uv[0]).abs() < 1e-15 && (r[1] - uv[1]).abs() < 1e-15);
        assert_eq!(rotate_quarter([0.5, 0.5], 3.0), [0.5, 0.5]);
    }

    #[test]
    fn brick_center_and_mortar() {
        // 4 rows x 2 cols; brick (0, 0) centred at (0.25, 0.125).
        let s = brick_grid([0.25, 0.125], 4, 2, 0.02, 0.5).unwrap();
        assert_eq!(s.mask, 1.0);
        assert_eq!(s.cell_uv, [0.5, 0.5]);
        let m = brick_grid([0.3, 0.25], 4, 2, 0.02, 0.5).unwrap();
        assert_eq!(m.mask, 0.0);
        assert_eq!(brick_grid([0.1, 0.1], 4, 2, 0.3, 0.5), Err(InvalidMortar));
    }

    #[test]
    fn brick_area_matches_analytic_fraction() {
        let (rows, cols, w) = (8, 4, 0.01);
        let n = 2048;
        let mut sum = 0.0;
        for j in 0..n {
            for i in 0..n {
                // Stratified jitter; a regular lattice aliases against the band edges.
                let h = mix64((j * n + i) as u64);
                let uv = [
                    (i as f64 + unit_f64(h)) / n as f64,
                    (j as f64 + unit_f64(mix64(h))) / n as f64,
                ];
                sum += brick_grid(uv, rows, cols, w, 0.5).unwrap().mask;
            }
        }
        let got = sum / (n * n) as f64;
        let want = (1.0 - cols as f64 * w) * (1.0 - rows as f64 * w);
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }

    #[test]
    fn tile_without_grout_is_solid() {
        for p in pseudo_points(1000, 1.0, 5) {
            assert_eq!(tile_grid([p[0] + 0.5, p[1] + 0.5], 5, 3, 0.0).unwrap().mask, 1.0);
        }
    }

    #[test]
    fn plank_grid_is_periodic_in_u() {
        for k in 0..2000u64 {
            let u = (mix64(k) >> 44) as f64 / (1u64 << 20) as f64;
            let v = (mix64(k ^ 99) >> 44) as f64 / (1u64 << 20) as f64 * 3.0;
            let a = plank_grid([u, v], 0.1, 0.4, 0.004).unwrap();
            let b = plank_grid([u + 1.0, v], 0.1, 0.4, 0.004).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn masks_degenerate_cases() {
        for p in pseudo_points(2000, 8.0, 9) {
            assert_eq!(scratches(p, 0.0, 0.2, 0.01, 0.0), 0.0);
            assert_eq!(edge_wear(p, 0.0, 1.0, 8.0), 0.0);
            assert_eq!(edge_wear(p, 2.0, 0.0, 8.0), 0.0);
            assert_eq!(smudges(p, 2.0, 0.0), 0.0);
            assert_eq!(smudges(p, 2.0, 1.0), 1.0);
            assert_eq!(cracks(p, 3.0, 0.0), 0.0);
        }
    }

    #[test]
    fn smudge_table_is_monotone() {
        assert!(SMUDGE_COVERAGE.windows(2).all(|w| w[0] >= w[1]));
        assert!(SMUDGE_COVERAGE[0] > 0.99 && SMUDGE_COVERAGE[40] < 0.01);
    }

    /// Regenerates `smudge_table.in`:
    /// `cargo test -p procgen-core --release smudge_table_generate -- --ignored --nocapture`
    #[test]
    #[ignore]
    fn smudge_table_generate() {
        let n = 4_000_000;
        let samples: Vec<f64> = pseudo_points(n, 2000.0, 0x5EED).map(|p| fbm(p, 1.0, 4, 2.0, 0.5)).collect();
        let row: Vec<String> = (0..41)
            .map(|i| {
                let t = SMUDGE_T0 + i as f64 * SMUDGE_DT;
                let mean = samples
                    .iter()
                    .map(|&f| smoothstep(t - SMUDGE_SOFTNESS, t + SMUDGE_SOFTNESS, f))
                    .sum::<f64>()
                    / n as f64;
                format!("{mean:.6}")
            })
            .collect();
        println!("[{}]", row.join(", "));
    }
}
