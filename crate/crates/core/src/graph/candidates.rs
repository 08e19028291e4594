//! Candidate checks for the search over code equations, reduced by the
//! symmetries that leave the labeled shift graph unchanged.
//!
//! A candidate is a weight-`t` subset of `1..=s_max` held as a `u64` mask
//! (bit `i` is position `i + 1`). Translation, mirroring and permuting the
//! positions inside every block the same way all give equivalent graphs;
//! applying the block permutation at every block alignment also lets the
//! `n` residue streams slide against each other. An orbit is therefore
//! determined by the multiset of its stream patterns, up to a common mirror.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::conv::ParityCheck;
use crate::error::{Error, Result};

/// Largest universe walked before giving up.
pub const DEFAULT_WORK_LIMIT: u64 = 200_000_000;

pub fn mask_to_check(mask: u64) -> ParityCheck {
    let positions = (0..64).filter(|b| mask >> b & 1 == 1).map(|b| b as i64 + 1).collect();
    ParityCheck::new(positions).expect("non-empty mask")
}

/// Mask of a check translated to start at position 1.
pub fn check_to_mask(e: &ParityCheck) -> Option<u64> {
    if e.span() > 64 {
        return None;
    }
    Some(e.positions().iter().fold(0u64, |m, &p| m | 1 << (p - e.min_pos())))
}

fn span(mask: u64) -> u32 {
    64 - mask.leading_zeros()
}

fn anchor(mask: u64) -> u64 {
    mask >> mask.trailing_zeros()
}

fn mirror(mask: u64) -> u64 {
    mask.reverse_bits() >> mask.leading_zeros()
}

/// Vector order: `b1 b2 …` compared lexicographically.
fn vector_key(mask: u64) -> u64 {
    mask.reverse_bits()
}

fn streams(mask: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|r| {
            let mut p = 0u64;
            let mut j = 0;
            let mut b = r;
            while b < 64 {
                if mask >> b & 1 == 1 {
                    p |= 1 << j;
                }
                j += 1;
                b += n;
            }
            if p == 0 {
                0
            } else {
                anchor(p)
            }
        })
        .collect()
}

/// Orbit invariant: sorted stream patterns, minimised over the mirror.
fn orbit_key(mask: u64, n: usize) -> Vec<u64> {
    let mut a = streams(mask, n);
    let mut b: Vec<u64> = a.iter().map(|&p| if p == 0 { 0 } else { mirror(p) }).collect();
    a.sort_unstable();
    b.sort_unstable();
    a.min(b)
}

/// All anchored masks of span at most `s_max` in the orbit of `mask`.
pub fn orbit(mask: u64, n: usize, s_max: usize) -> Vec<u64> {
    let s = streams(mask, n);
    let mirrored: Vec<u64> = s.iter().map(|&p| if p == 0 { 0 } else { mirror(p) }).collect();
    let mut out = Vec::new();
    for pats in [s, mirrored] {
        let nonempty: Vec<u64> = pats.into_iter().filter(|&p| p != 0).collect();
        place(&nonempty, n, s_max, &mut vec![false; n], 0, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn place(pats: &[u64], n: usize, s_max: usize, used: &mut [bool], acc: u64, out: &mut Vec<u64>) {
    let Some((&p, rest)) = pats.split_first() else {
        let m = anchor(acc);
        if span(m) as usize <= s_max {
            out.push(m);
        }
        return;
    };
    for r in 0..n {
        if used[r] {
            continue;
        }
        used[r] = true;
        for off in 0..=s_max / n + 1 {
            let Some(bits) = spread(p, n, r + off * n) else { break };
            place(rest, n, s_max, used, acc | bits, out);
        }
        used[r] = false;
    }
}

/// Stream pattern laid out at residue positions starting from bit `start`.
fn spread(p: u64, n: usize, start: usize) -> Option<u64> {
    let mut m = 0u64;
    for j in 0..64 {
        if p >> j & 1 == 1 {
            let b = start + j * n;
            if b >= 64 {
                return None;
            }
            m |= 1 << b;
        }
    }
    Some(m)
}

/// Vector-lex smallest anchored orbit member with span at most `s_max`.
pub fn canonical_mask(mask: u64, n: usize, s_max: usize) -> u64 {
    orbit(mask, n, s_max).into_iter().min_by_key(|&m| vector_key(m)).unwrap_or(anchor(mask))
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as u64
}

/// Size of the unreduced search space, all weight-`t` subsets of `1..=s_max`.
pub fn unreduced_count(t: usize, s_max: usize) -> u64 {
    binomial(s_max as u64, t as u64)
}

/// Next larger integer with the same popcount.
fn gosper(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

fn check_args(n: usize, t: usize, s_max: usize) -> Result<()> {
    if n == 0 || t < 2 || s_max < t || s_max > 63 {
        return Err(Error::Domain(format!("need n >= 1, 2 <= t <= s_max <= 63; got n={n} t={t} s_max={s_max}")));
    }
    Ok(())
}

/// Canonical masks of every orbit, sorted in vector order.
pub fn candidate_masks(n: usize, t: usize, s_max: usize) -> Result<Vec<u64>> {
    candidate_masks_limited(n, t, s_max, DEFAULT_WORK_LIMIT)
}

pub fn candidate_masks_limited(n: usize, t: usize, s_max: usize, work_limit: u64) -> Result<Vec<u64>> {
    check_args(n, t, s_max)?;
    let work = binomial(s_max as u64 - 1, t as u64 - 1);
    if work > work_limit {
        return Err(Error::WorkLimit(format!(
            "{work} anchored candidates for t={t} s_max={s_max} exceed the limit {work_limit}"
        )));
    }
    // anchored masks of exact span s: bits 0 and s-1 set, t-2 bits between
    let best: HashMap<Vec<u64>, u64> = (t..=s_max)
        .into_par_iter()
        .map(|s| {
            let mut local: HashMap<Vec<u64>, u64> = HashMap::new();
            let ends = 1u64 | 1 << (s - 1);
            let inner = t - 2;
            let mut visit = |m: u64| {
                let e = local.entry(orbit_key(m, n)).or_insert(m);
                if vector_key(m) < vector_key(*e) {
                    *e = m;
                }
            };
            if inner == 0 {
                visit(ends);
            } else if s - 2 >= inner {
                let limit = 1u64 << (s - 2);
                let mut x = (1u64 << inner) - 1;
                while x < limit {
                    visit(ends | x << 1);
                    x = gosper(x);
                }
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, m) in b {
                let e = a.entry(k).or_insert(m);
                if vector_key(m) < vector_key(*e) {
                    *e = m;
                }
            }
            a
        });
    let mut masks: Vec<u64> = best.into_values().collect();
    masks.sort_unstable_by_key(|&m| vector_key(m));
    Ok(masks)
}

/// One representative check per orbit, in vector order.
pub fn enumerate_candidates(n: usize, t: usize, s_max: usize) -> Result<Vec<ParityCheck>> {
    Ok(candidate_masks(n, t, s_max)?.into_iter().map(mask_to_check).collect())
}
