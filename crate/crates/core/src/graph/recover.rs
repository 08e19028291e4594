//! Search for the code check whose shift graph matches the neighbourhood of
//! one interleaved check.
//!
//! The unlabeled neighbourhoods of a candidate only depend on the overlaps
//! `ov(d) = |E ∩ (E + d·n)|`, so the first two filters work on small dense
//! matrices built from those numbers. Only survivors get a labeled graph.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::candidates::{candidate_masks_limited, mask_to_check, unreduced_count, DEFAULT_WORK_LIMIT};
use super::matcher::{equivalent, solve, Problem};
use super::{build_graph, neighborhood_1, neighborhood_2, shift_set_graph, GraphMatch, LabeledMultigraph};
use crate::channel::stream_rng;
use crate::conv::ParityCheck;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RecoverParams {
    pub seed: u64,
    /// Redraws of the starting check; `None` means `min(|L1|, 20)`.
    pub retries: Option<usize>,
    pub work_limit: u64,
}

impl Default for RecoverParams {
    fn default() -> Self {
        RecoverParams { seed: 0, retries: None, work_limit: DEFAULT_WORK_LIMIT }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub unreduced: u64,
    pub tested: u64,
    pub stage1: u64,
    pub stage2: u64,
    pub stage3: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Survivor {
    /// Candidate check, anchored at position 1.
    pub equation: ParityCheck,
    /// Shift index -> index in `L1`, candidate position -> interleaved position.
    pub g2_match: GraphMatch,
}

#[derive(Clone, Debug, Serialize)]
pub struct Recovery {
    /// Index in `L1` of the starting check that produced the survivors.
    pub e0_index: usize,
    pub e0: ParityCheck,
    pub survivors: Vec<Survivor>,
    pub counts: StageCounts,
    pub attempts: usize,
}

fn overlaps(mask: u64, n: usize, reach: usize) -> Vec<u8> {
    (0..=reach)
        .map(|d| {
            let sh = d * n;
            if sh >= 64 {
                0
            } else {
                (mask & mask >> sh).count_ones() as u8
            }
        })
        .collect()
}

/// Dense multiplicity matrix of the unlabeled shift graph around shift 0.
struct ShiftShape {
    vertices: usize,
    matrix: Vec<u8>,
}

fn shift_shape(ov: &[u8], radius: usize) -> ShiftShape {
    let reach = ov.len() - 1;
    let near: Vec<i64> = (1..=reach).filter(|&d| ov[d] > 0).map(|d| d as i64).collect();
    let mut ball = vec![0i64];
    let mut frontier = vec![0i64];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &v in &frontier {
            for &d in &near {
                for w in [v - d, v + d] {
                    if !ball.contains(&w) {
                        ball.push(w);
                        next.push(w);
                    }
                }
            }
        }
        frontier = next;
    }
    ball.sort_unstable();
    let k = ball.len();
    let mut matrix = vec![0u8; k * k];
    for (a, &x) in ball.iter().enumerate() {
        for (b, &y) in ball.iter().enumerate() {
            let d = (x - y).unsigned_abs() as usize;
            if a != b && d <= reach {
                matrix[a * k + b] = ov[d];
            }
        }
    }
    ShiftShape { vertices: k, matrix }
}

/// Labeled neighbourhood of shift 0 in the shift graph of `e` (radius 1 or 2).
pub fn shift_graph(e: &ParityCheck, n: usize, radius: usize) -> LabeledMultigraph {
    let reach = (e.span() as usize).div_ceil(n);
    let l = 2 * radius * reach + 1;
    let g = shift_set_graph(e, n, l);
    let c = g.index_of(0).expect("shift 0 present");
    match radius {
        0 => g.induced(&[c]),
        1 => neighborhood_1(&g, c),
        _ => neighborhood_2(&g, c),
    }
}

struct Target {
    g1: Vec<u8>,
    n1: usize,
    g2: Vec<u8>,
    n2: usize,
    labeled: LabeledMultigraph,
}

fn target(graph: &LabeledMultigraph, e0: usize) -> Target {
    let g1 = neighborhood_1(graph, e0);
    let labeled = neighborhood_2(graph, e0);
    Target { n1: g1.len(), g1: g1.multiplicities(), n2: labeled.len(), g2: labeled.multiplicities(), labeled }
}

fn test_candidates(masks: &[u64], n: usize, tg: &Target) -> (Vec<Survivor>, StageCounts) {
    let reach = masks.iter().map(|&m| 64 - m.leading_zeros() as usize).max().unwrap_or(1).div_ceil(n);
    let results: Vec<(u8, Option<Survivor>)> = masks
        .par_iter()
        .map(|&mask| {
            let ov = overlaps(mask, n, reach);
            let near = ov[1..].iter().filter(|&&x| x > 0).count();
            if 1 + 2 * near != tg.n1 {
                return (0, None);
            }
            let s1 = shift_shape(&ov, 1);
            if solve(&Problem { n: s1.vertices, a: &s1.matrix, b: &tg.g1, labels: None }).is_none() {
                return (0, None);
            }
            let s2 = shift_shape(&ov, 2);
            if s2.vertices != tg.n2
                || solve(&Problem { n: s2.vertices, a: &s2.matrix, b: &tg.g2, labels: None }).is_none()
            {
                return (1, None);
            }
            let e = mask_to_check(mask);
            match equivalent(&shift_graph(&e, n, 2), &tg.labeled) {
                Some(g2_match) => (3, Some(Survivor { equation: e, g2_match })),
                None => (2, None),
            }
        })
        .collect();
    let mut counts = StageCounts { tested: masks.len() as u64, ..Default::default() };
    let mut survivors = Vec::new();
    for (stage, s) in results {
        counts.stage1 += (stage >= 1) as u64;
        counts.stage2 += (stage >= 2) as u64;
        counts.stage3 += (stage >= 3) as u64;
        survivors.extend(s);
    }
    (survivors, counts)
}

/// Candidate code checks explaining the neighbourhood of a random check of `l1`.
///
/// The starting check is redrawn while no candidate survives; checks near the
/// ends of the codeword, or next to a missing check, have truncated
/// neighbourhoods and are rejected by the vertex count alone.
pub fn recover_equation(
    l1: &[ParityCheck],
    n: usize,
    t: usize,
    s_max: usize,
    params: &RecoverParams,
) -> Result<Recovery> {
    if l1.len() < 3 {
        return Err(Error::RecoveryFailed(format!("need at least 3 equations in the group, got {}", l1.len())));
    }
    let masks = candidate_masks_limited(n, t, s_max, params.work_limit)?;
    recover_with_candidates(l1, n, &masks, unreduced_count(t, s_max), params)
}

/// Same search over an explicit candidate list.
pub fn recover_with_candidates(
    l1: &[ParityCheck],
    n: usize,
    masks: &[u64],
    unreduced: u64,
    params: &RecoverParams,
) -> Result<Recovery> {
    let graph = build_graph(l1);
    let retries = params.retries.unwrap_or(l1.len().min(20)).max(1);
    let mut rng = stream_rng(params.seed, 0x7265_636f);
    let mut last = StageCounts::default();
    for attempt in 1..=retries {
        let e0 = rng.gen_range(0..l1.len());
        let tg = target(&graph, e0);
        let (survivors, mut counts) = test_candidates(masks, n, &tg);
        counts.unreduced = unreduced;
        if !survivors.is_empty() {
            return Ok(Recovery { e0_index: e0, e0: l1[e0].clone(), survivors, counts, attempts: attempt });
        }
        last = counts;
    }
    Err(Error::RecoveryFailed(format!(
        "no candidate survived after {retries} starting equations (last attempt: tested {}, stage 1 {}, stage 2 {}, stage 3 {})",
        last.tested, last.stage1, last.stage2, last.stage3
    )))
}
