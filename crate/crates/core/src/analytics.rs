//! Diversity metrics over distribution graphs and the normal-variation image
//! metric.
//!
//! Expectations weight control paths by branch probability. Each continuous
//! draw counts as a uniform 8-bin symbol (3 bits), independent of the other
//! draws given the path.

use crate::io::Image;
use crate::sampler::ParamDist;
use crate::tracer::{ControlPath, DNode, DistributionGraph, SeqId};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const BITS_PER_CONTINUOUS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("parameter `{0}` has an unbounded range")]
    UnboundedParam(String),
    #[error("window {0} is not odd")]
    EvenWindow(usize),
    #[error("normal map must have 3 channels")]
    NotNormalMap,
    #[error("normal at ({x}, {y}) is neither unit nor zero")]
    NonUnitNormal { x: usize, y: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub cont_params_mean: f64,
    pub disc_params_mean: f64,
    pub cyclomatic: u64,
    pub entropy_bits: f64,
    pub paths: u64,
}

fn shannon(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

fn normalized(weights: &[f64]) -> Vec<f64> {
    let t: f64 = weights.iter().sum();
    weights.iter().map(|w| w / t).collect()
}

/// Entropy contributed by one draw, or `None` when unbounded.
fn draw_bits(dist: &ParamDist) -> Option<f64> {
    match dist {
        ParamDist::Uniform { .. } | ParamDist::Normal { clip: true, .. } => Some(BITS_PER_CONTINUOUS),
        ParamDist::Normal { clip: false, .. } => None,
        ParamDist::RandInt { n } => Some((*n as f64).log2()),
        ParamDist::Discrete { weights, .. } => Some(shannon(&normalized(weights))),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SeqStats {
    cont: f64,
    disc: f64,
    entropy: f64,
    /// Σ(k − 1) over inlined choices.
    decisions: u64,
}

struct Dp<'a> {
    g: &'a DistributionGraph,
    memo: Vec<Option<SeqStats>>,
}

impl Dp<'_> {
    fn stats(&mut self, s: SeqId) -> Result<SeqStats, AnalyticsError> {
        if let Some(st) = self.memo[s] {
            return Ok(st);
        }
        let mut st = SeqStats::default();
        for node in &self.g.seqs[s].nodes {
            match node {
                DNode::Param { name, dist } => {
                    let bits = draw_bits(dist).ok_or_else(|| AnalyticsError::UnboundedParam(name.clone()))?;
                    if dist.is_continuous() {
                        st.cont += 1.0;
                    } else {
                        st.disc += 1.0;
                    }
                    st.entropy += bits;
                }
                DNode::Choice { probs, branches, .. } => {
                    st.disc += 1.0;
                    st.entropy += shannon(probs);
                    st.decisions += branches.len() as u64 - 1;
                    for (&p, &b) in probs.iter().zip(branches) {
                        let sub = self.stats(b)?;
                        st.cont += p * sub.cont;
                        st.disc += p * sub.disc;
                        st.entropy += p * sub.entropy;
                        st.decisions += sub.decisions;
                    }
                }
                DNode::Invoke { body, .. } => {
                    let sub = self.stats(*body)?;
                    st.cont += sub.cont;
                    st.disc += sub.disc;
                    st.entropy += sub.entropy;
                    st.decisions += sub.decisions;
                }
                DNode::Call { .. } => {}
            }
        }
        self.memo[s] = Some(st);
        Ok(st)
    }
}

fn root_stats(g: &DistributionGraph) -> Result<SeqStats, AnalyticsError> {
    Dp { g, memo: vec![None; g.seqs.len()] }.stats(g.root)
}

/// Expected (continuous draws, discrete draws + choices) per instance.
pub fn count_params(g: &DistributionGraph) -> (f64, f64) {
    let mut memo = vec![None; g.seqs.len()];
    let st = count_only(g, g.root, &mut memo);
    (st.0, st.1)
}

fn count_only(g: &DistributionGraph, s: SeqId, memo: &mut Vec<Option<(f64, f64)>>) -> (f64, f64) {
    if let Some(v) = memo[s] {
        return v;
    }
    let (mut c, mut d) = (0.0, 0.0);
    for node in &g.seqs[s].nodes {
        match node {
            DNode::Param { dist, .. } => {
                if dist.is_continuous() {
                    c += 1.0
                } else {
                    d += 1.0
                }
            }
            DNode::Choice { probs, branches, .. } => {
                d += 1.0;
                for (&p, &b) in probs.iter().zip(branches) {
                    let (sc, sd) = count_only(g, b, memo);
                    c += p * sc;
                    d += p * sd;
                }
            }
            DNode::Invoke { body, .. } => {
                let (sc, sd) = count_only(g, *body, memo);
                c += sc;
                d += sd;
            }
            DNode::Call { .. } => {}
        }
    }
    memo[s] = Some((c, d));
    (c, d)
}

/// `1 + Σ(k − 1)` over choices with sub-samplers inlined.
pub fn cyclomatic(g: &DistributionGraph) -> u64 {
    fn dec(g: &DistributionGraph, s: SeqId, memo: &mut Vec<Option<u64>>) -> u64 {
        if let Some(v) = memo[s] {
            return v;
        }
        let mut d = 0u64;
        for node in &g.seqs[s].nodes {
            match node {
                DNode::Choice { branches, .. } => {
                    d += branches.len() as u64 - 1;
                    for &b in branches {
                        d += dec(g, b, memo);
                    }
                }
                DNode::Invoke { body, .. } => d += dec(g, *body, memo),
                _ => {}
            }
        }
        memo[s] = Some(d);
        d
    }
    1 + dec(g, g.root, &mut vec![None; g.seqs.len()])
}

/// `(E, N)` of the inlined control-flow graph with synthetic entry and exit.
/// Choices fan out to their branches and re-merge.
pub fn cfg_size(g: &DistributionGraph) -> (u128, u128) {
    fn sub(g: &DistributionGraph, s: SeqId, memo: &mut Vec<Option<(u128, u128)>>) -> (u128, u128) {
        if let Some(v) = memo[s] {
            return v;
        }
        let nodes = &g.seqs[s].nodes;
        let v = if nodes.is_empty() {
            (0, 1)
        } else {
            let (mut e, mut n) = (nodes.len() as u128 - 1, 0u128);
            for node in nodes {
                let (ne, nn) = match node {
                    DNode::Choice { branches, .. } => branches.iter().fold((0u128, 2u128), |(e, n), &b| {
                        let (be, bn) = sub(g, b, memo);
                        (e + be + 2, n + bn)
                    }),
                    DNode::Invoke { body, .. } => sub(g, *body, memo),
                    _ => (0, 1),
                };
                e += ne;
                n += nn;
            }
            (e, n)
        };
        memo[s] = Some(v);
        v
    }
    let (e, n) = sub(g, g.root, &mut vec![None; g.seqs.len()]);
    (e + 2, n + 2)
}

/// Path entropy plus per-draw entropy, in bits.
pub fn entropy(g: &DistributionGraph) -> Result<f64, AnalyticsError> {
    Ok(root_stats(g)?.entropy)
}

pub fn analyze(g: &DistributionGraph) -> Result<DiversityReport, AnalyticsError> {
    let st = root_stats(g)?;
    Ok(DiversityReport {
        cont_params_mean: st.cont,
        disc_params_mean: st.disc,
        cyclomatic: 1 + st.decisions,
        entropy_bits: st.entropy,
        paths: g.path_count().min(u64::MAX as u128) as u64,
    })
}

/// Same report by explicit path enumeration; `None` above `cap` paths.
pub fn analyze_by_enumeration(g: &DistributionGraph, cap: usize) -> Option<Result<DiversityReport, AnalyticsError>> {
    let paths = g.enumerate_paths(cap)?;
    Some(report_from_paths(g, &paths))
}

fn report_from_paths(g: &DistributionGraph, paths: &[ControlPath]) -> Result<DiversityReport, AnalyticsError> {
    let (mut cont, mut disc, mut h) = (0.0, 0.0, 0.0);
    for p in paths {
        let mut bits = 0.0;
        let mut c = 0.0;
        let mut d = p.decisions.len() as f64;
        for (name, dist) in &p.draws {
            bits += draw_bits(dist).ok_or_else(|| AnalyticsError::UnboundedParam(name.clone()))?;
            if dist.is_continuous() {
                c += 1.0
            } else {
                d += 1.0
            }
        }
        cont += p.prob * c;
        disc += p.prob * d;
        h += p.prob * bits;
        if p.prob > 0.0 {
            h -= p.prob * p.prob.log2();
        }
    }
    let (e, n) = cfg_size(g);
    Ok(DiversityReport {
        cont_params_mean: cont,
        disc_params_mean: disc,
        cyclomatic: (e + 2 - n) as u64,
        entropy_bits: h,
        paths: paths.len() as u64,
    })
}

/// Per-pixel normal variation, its mean over valid pixels, and a histogram.
#[derive(Debug, Clone)]
pub struct NormalVariation {
    /// One channel; invalid pixels hold 0.
    pub v: Image,
    pub mean: f64,
    pub valid: usize,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

pub const DEFAULT_WINDOW: usize = 15;
pub const HISTOGRAM_BINS: usize = 32;

/// Angle between two unit vectors via `atan2(|a×b|, a·b)`, which stays
/// accurate for nearly parallel normals.
pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let s = libm::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    libm::atan2(s, a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
}

/// `Vᵢ = Σ angle(nᵢ, nⱼ)` over the `window × window` neighbourhood, clipped
/// at the borders. Zero normals are invalid and excluded everywhere.
pub fn normal_variation(normals: &Image, window: usize) -> Result<NormalVariation, AnalyticsError> {
    if window % 2 == 0 {
        return Err(AnalyticsError::EvenWindow(window));
    }
    if normals.channels != 3 {
        return Err(AnalyticsError::NotNormalMap);
    }
    let (w, h) = (normals.width, normals.height);
    let mut valid = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let n = normals.pixel(x, y);
            if n.iter().all(|&c| c == 0.0) {
                continue;
            }
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if !((len - 1.0).abs() <= 1e-3) {
                return Err(AnalyticsError::NonUnitNormal { x, y });
            }
            valid[y * w + x] = true;
        }
    }
    let r = (window / 2) as isize;
    let at = |x: usize, y: usize| -> [f64; 3] {
        let p = normals.pixel(x, y);
        [p[0], p[1], p[2]]
    };
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if !valid[y * w + x] {
                        return 0.0;
                    }
                    let ni = at(x, y);
                    let mut v = 0.0;
                    for yy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                        for xx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                            let (xx, yy) = (xx as usize, yy as usize);
                            if valid[yy * w + xx] {
                                v += angle_between(ni, at(xx, yy));
                            }
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let count = valid.iter().filter(|&&b| b).count();
    let sum: f64 = data.iter().zip(&valid).filter(|(_, &ok)| ok).map(|(v, _)| v).sum();
    let mean = if count == 0 { 0.0 } else { sum / count as f64 };
    let hi = data.iter().cloned().fold(0.0, f64::max);
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for (v, _) in data.iter().zip(&valid).filter(|(_, &ok)| ok) {
        let b = if hi > 0.0 { ((v / hi) * HISTOGRAM_BINS as f64) as usize } else { 0 };
        counts[b.min(HISTOGRAM_BINS - 1)] += 1;
    }
    Ok(NormalVariation {
        v: Image { width: w, height: h, channels: 1, data },
        mean,
        valid: count,
        histogram: Histogram { lo: 0.0, hi, counts },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::Seq;

    fn choice_graph(ks: &[usize]) -> DistributionGraph {
        let mut seqs = vec![Seq { sampler: "leaf".into(), nodes: vec![] }];
        let nodes = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| DNode::Choice { name: format!("c{i}"), probs: vec![1.0 / k as f64; k], branches: vec![0; k] })
            .collect();
        seqs.push(Seq { sampler: "root".into(), nodes });
        DistributionGraph { sampler: "root".into(), root: 1, seqs }
    }

    #[test]
    fn cyclomatic_hand_cases() {
        assert_eq!(cyclomatic(&choice_graph(&[5])), 5);
        assert_eq!(cyclomatic(&choice_graph(&[2, 3])), 4);
        assert_eq!(cyclomatic(&choice_graph(&[])), 1);
        for ks in [&[5][..], &[2, 3], &[], &[2, 2, 4]] {
            let g = choice_graph(ks);
            let (e, n) = cfg_size(&g);
            assert_eq!((e + 2 - n) as u64, cyclomatic(&g));
        }
    }

    #[test]
    fn angle_is_exact_for_parallel() {
        assert_eq!(angle_between([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]), 0.0);
        assert!((angle_between([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn even_window_rejected() {
        let img = Image::new(4, 4, 3);
        assert_eq!(normal_variation(&img, 4).unwrap_err(), AnalyticsError::EvenWindow(4));
    }
}
