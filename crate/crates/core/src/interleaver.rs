//! Reading the interleaver off an ordered group.
//!
//! Once slot `k` of the ordering is known to hold the image of the code check
//! shifted by `k·n`, every code position `x` has a signature: the set of
//! filled slots whose code check contains `x`. Every interleaved position `y`
//! has one too: the slots whose interleaved check contains `y`. The
//! interleaver maps `x` to a `y` with the same signature. Signatures shared
//! by several positions leave a choice; when the distinguishing check is
//! missing, the choice is settled by rebuilding that check and testing it on
//! the data, otherwise every assignment is returned as a candidate.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::bits::Columns;
use crate::channel::Interleaver;
use crate::conv::ParityCheck;
use crate::error::{Error, Result};
use crate::graph::{check_to_mask, mask_to_check, orbit};
use crate::ordering::{Ordering, Slot};

/// Largest number of assignments tried when rebuilding one check.
pub const MATERIALIZE_LIMIT: u64 = 8_000_000;
/// Above this many assignments, observed checks that fit are tried first.
pub const OBSERVED_FIRST: u64 = 2_000_000;
/// Largest number of tied checks explored while growing the ends.
pub const EXTEND_BRANCH_LIMIT: usize = 4096;
/// Largest number of interleavers emitted per orientation.
pub const CANDIDATE_CAP: usize = 64;

/// Interleaved checks along the shift sequence of a code check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlotChecks {
    /// Code check for slot 0, anchored at position 1.
    pub e_c: ParityCheck,
    pub n: usize,
    /// `None` for a missing check.
    pub slots: Vec<Option<ParityCheck>>,
}

impl SlotChecks {
    pub fn new(e_c: &ParityCheck, n: usize, slots: Vec<Option<ParityCheck>>) -> Self {
        SlotChecks { e_c: e_c.translate(1 - e_c.min_pos()), n, slots }
    }

    pub fn from_ordering(ord: &Ordering, l1: &[ParityCheck], e_c: &ParityCheck, n: usize) -> Self {
        let slots = ord
            .slots
            .iter()
            .map(|s| match s {
                Slot::Placed(c) => Some(l1[*c].clone()),
                _ => None,
            })
            .collect();
        SlotChecks::new(e_c, n, slots)
    }

    /// Code positions covered by the frame, `(l−1)·n + span`.
    pub fn frame_len(&self) -> i64 {
        (self.slots.len() as i64 - 1) * self.n as i64 + self.e_c.span()
    }

    pub fn code_check(&self, k: usize) -> ParityCheck {
        self.e_c.shift(k as i64, self.n)
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&k| self.slots[k].is_none()).collect()
    }

    /// Mirror image: reversed code check, slots read backwards.
    pub fn reversed(&self) -> SlotChecks {
        let mut slots = self.slots.clone();
        slots.reverse();
        SlotChecks { e_c: self.e_c.reversed(), n: self.n, slots }
    }

    /// Same slots for another code check with an equivalent shift graph.
    pub fn with_check(&self, e: &ParityCheck) -> SlotChecks {
        SlotChecks::new(e, self.n, self.slots.clone())
    }
}

/// Positions grouped by signature.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LabelBijection {
    /// Code position -> interleaved position, for unique signatures.
    pub bound: BTreeMap<i64, i64>,
    /// Number of filled slots containing each bound code position.
    pub multiplicity: BTreeMap<i64, usize>,
    /// Code positions and interleaved positions sharing one signature.
    pub groups: Vec<(Vec<i64>, Vec<i64>)>,
    /// Frame positions in no filled slot.
    pub free_positions: Vec<i64>,
    /// Interleaved positions in no filled slot.
    pub free_values: Vec<i64>,
}

impl LabelBijection {
    /// Bindings of positions shared by at least two checks, the edge labels of the graphs.
    pub fn edge_labels(&self) -> BTreeMap<i64, i64> {
        self.bound.iter().filter(|(x, _)| self.multiplicity[x] >= 2).map(|(&x, &y)| (x, y)).collect()
    }
}

/// Signature matching over the filled slots.
pub fn recover_label_bijection(sc: &SlotChecks, n_total: usize) -> Result<LabelBijection> {
    let mut xs: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut ys: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (k, slot) in sc.slots.iter().enumerate() {
        let Some(e) = slot else { continue };
        if e.weight() != sc.e_c.weight() {
            return Err(Error::BijectionFailed(format!("slot {k} holds {e}, of weight {} instead of {}", e.weight(), sc.e_c.weight())));
        }
        for &x in sc.code_check(k).positions() {
            xs.entry(x).or_default().push(k);
        }
        for &y in e.positions() {
            if y < 1 || y > n_total as i64 {
                return Err(Error::BijectionFailed(format!("position {y} of slot {k} outside 1..={n_total}")));
            }
            ys.entry(y).or_default().push(k);
        }
    }
    let mut by_sig: BTreeMap<Vec<usize>, (Vec<i64>, Vec<i64>)> = BTreeMap::new();
    for (x, sig) in &xs {
        by_sig.entry(sig.clone()).or_default().0.push(*x);
    }
    for (y, sig) in &ys {
        by_sig.entry(sig.clone()).or_default().1.push(*y);
    }
    let mut out = LabelBijection::default();
    for (sig, (x, y)) in by_sig {
        if x.len() != y.len() {
            return Err(Error::BijectionFailed(format!(
                "slots {sig:?} share {} code positions but {} interleaved positions",
                x.len(),
                y.len()
            )));
        }
        if x.len() == 1 {
            out.bound.insert(x[0], y[0]);
            out.multiplicity.insert(x[0], sig.len());
        } else {
            out.groups.push((x, y));
        }
    }
    out.free_positions = (1..=sc.frame_len()).filter(|x| !xs.contains_key(x)).collect();
    out.free_values = (1..=n_total as i64).filter(|y| !ys.contains_key(y)).collect();
    Ok(out)
}

/// An interleaver with possibly undetermined positions, and the check it pairs with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialInterleaver {
    /// `map[i-1] = π(i)` when determined.
    pub map: Vec<Option<u32>>,
    /// 1-based positions without a value.
    pub unknown_slots: Vec<usize>,
    /// Code check whose in-range shifts the interleaver maps onto the group.
    pub e_hat: ParityCheck,
    pub n: usize,
    /// Whether the code check was mirrored.
    pub mirror: bool,
    /// Frame shorter than the codeword allows: some shifts of `e_hat` are unexplained.
    pub short: bool,
}

impl PartialInterleaver {
    /// Fill undetermined positions with the unused values in increasing order.
    pub fn complete(&self) -> Result<Interleaver> {
        let used: BTreeSet<u32> = self.map.iter().flatten().copied().collect();
        let mut spare = (1..=self.map.len() as u32).filter(|v| !used.contains(v));
        let map = self.map.iter().map(|v| v.or_else(|| spare.next()).unwrap_or(0)).collect();
        Interleaver::new(map)
    }
}

/// Smallest frame offset in `0..n` leaving exactly `l` in-range shifts.
fn frame_offset(sc: &SlotChecks, n_total: usize) -> (i64, bool) {
    let (f, n, big) = (sc.frame_len(), sc.n as i64, n_total as i64);
    match (0..n).find(|&off| f + off <= big && f + off + n > big) {
        Some(off) => (off, false),
        None => (0, true),
    }
}

/// Complete assignments of the shared signatures, at most `cap`; groups past
/// the cap keep their sorted assignment.
pub fn extend_to_offgraph_positions(
    bij: &LabelBijection,
    sc: &SlotChecks,
    n_total: usize,
    cap: usize,
    mirror: bool,
) -> Result<Vec<PartialInterleaver>> {
    if sc.frame_len() > n_total as i64 {
        return Err(Error::BijectionFailed(format!(
            "{} shifts of a check of span {} need {} positions, more than N={n_total}",
            sc.slots.len(),
            sc.e_c.span(),
            sc.frame_len()
        )));
    }
    let (off, short) = frame_offset(sc, n_total);
    let mut base: Vec<Option<u32>> = vec![None; n_total];
    for (&x, &y) in &bij.bound {
        base[(x + off - 1) as usize] = Some(y as u32);
    }
    let mut assignments: Vec<Vec<Option<u32>>> = vec![base];
    for (xs, ys) in &bij.groups {
        let perms = permutations(ys.len());
        if assignments.len() * perms.len() > cap {
            for a in &mut assignments {
                for (x, y) in xs.iter().zip(ys) {
                    a[(x + off - 1) as usize] = Some(*y as u32);
                }
            }
            continue;
        }
        let mut next = Vec::with_capacity(assignments.len() * perms.len());
        for a in &assignments {
            for p in &perms {
                let mut b = a.clone();
                for (x, &j) in xs.iter().zip(p) {
                    b[(x + off - 1) as usize] = Some(ys[j] as u32);
                }
                next.push(b);
            }
        }
        assignments = next;
    }
    let e_hat = sc.e_c.translate(off);
    Ok(assignments
        .into_iter()
        .map(|map| {
            let unknown_slots = (0..n_total).filter(|&i| map[i].is_none()).map(|i| i + 1).collect();
            PartialInterleaver { map, unknown_slots, e_hat: e_hat.clone(), n: sc.n, mirror, short }
        })
        .collect())
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    permute(&mut cur, 0, &mut out);
    out
}

fn permute(v: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == v.len() {
        out.push(v.clone());
        return;
    }
    // lexicographic order: rotate the chosen element to the front
    for j in i..v.len() {
        v[i..=j].rotate_right(1);
        permute(v, i + 1, out);
        v[i..=j].rotate_left(1);
    }
}

/// One reconstructed interleaver with the code check it pairs with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InterleaverCandidate {
    pub e_hat: ParityCheck,
    pub interleaver: Interleaver,
    pub mirror: bool,
    pub short: bool,
    /// Positions in no check of the group, filled arbitrarily.
    pub unconstrained: usize,
}

/// All interleavers explaining the slots, then those of the mirrored slots.
pub fn interleaver_candidates(sc: &SlotChecks, n_total: usize, cap: usize) -> Result<Vec<InterleaverCandidate>> {
    let mut out = Vec::new();
    for (mirror, s) in [(false, sc.clone()), (true, sc.reversed())] {
        let bij = recover_label_bijection(&s, n_total)?;
        for p in extend_to_offgraph_positions(&bij, &s, n_total, cap, mirror)? {
            out.push(InterleaverCandidate {
                interleaver: p.complete()?,
                unconstrained: p.unknown_slots.len(),
                e_hat: p.e_hat,
                mirror,
                short: p.short,
            });
        }
    }
    Ok(out)
}

/// Orbit member of the code check whose frame fits the codeword exactly;
/// smallest span first, then vector order. Falls back to the given check.
pub fn fit_frame(sc: &SlotChecks, n_total: usize) -> SlotChecks {
    let Some(mask) = check_to_mask(&sc.e_c) else { return sc.clone() };
    let n = sc.n as i64;
    let room = n_total as i64 - (sc.slots.len() as i64 - 1) * n;
    let bound = room.clamp(sc.e_c.span(), 63) as usize;
    let mut members = orbit(mask, sc.n, bound);
    members.sort_by_key(|&m| (64 - m.leading_zeros(), m.reverse_bits()));
    for m in members {
        let s = sc.with_check(&mask_to_check(m));
        if !frame_offset(&s, n_total).1 && s.frame_len() <= n_total as i64 {
            return s;
        }
    }
    sc.clone()
}

/// Orbit member of the code check with the smallest span, which leaves the
/// most room for shifts.
pub fn tightest(sc: &SlotChecks) -> SlotChecks {
    let Some(mask) = check_to_mask(&sc.e_c) else { return sc.clone() };
    let bound = (sc.e_c.span() as usize).min(63);
    match orbit(mask, sc.n, bound).into_iter().min_by_key(|&m| (64 - m.leading_zeros(), m.reverse_bits())) {
        Some(m) => sc.with_check(&mask_to_check(m)),
        None => sc.clone(),
    }
}

/// How a rebuilt check was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Materialized {
    pub slot: usize,
    pub check: ParityCheck,
    pub satisfied: usize,
    pub tried: u64,
    pub from_unclassified: bool,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128).min(u64::MAX as u128) as u64
}

/// Calls `f` on `base` extended by every choice of `k` values from each `(pool, k)`.
fn for_each_choice(parts: &[(&[i64], usize)], cur: &mut Vec<i64>, f: &mut dyn FnMut(&[i64])) {
    fn pick(
        pool: &[i64],
        k: usize,
        from: usize,
        rest: &[(&[i64], usize)],
        cur: &mut Vec<i64>,
        f: &mut dyn FnMut(&[i64]),
    ) {
        if k == 0 {
            for_each_choice(rest, cur, f);
            return;
        }
        for i in from..pool.len() {
            if pool.len() - i < k {
                break;
            }
            cur.push(pool[i]);
            pick(pool, k - 1, i + 1, rest, cur, f);
            cur.pop();
        }
    }
    match parts.split_first() {
        None => f(cur),
        Some((&(pool, k), rest)) => pick(pool, k, 0, rest, cur, f),
    }
}

/// Rebuild the check of an empty slot: known images of its code positions,
/// plus values drawn from the positions' signature groups or from the
/// unused values. Every choice reaching `threshold` is returned, best count
/// first; under noise, checks the code cannot tell apart (equal bits near the
/// codeword start) differ only by a few flipped words. Past
/// [`OBSERVED_FIRST`] assignments, `observed` checks that fit are tried
/// before enumerating, and past [`MATERIALIZE_LIMIT`] only they are.
pub fn materialize_slot(
    sc: &SlotChecks,
    k: usize,
    n_total: usize,
    cols: &Columns,
    threshold: usize,
    observed: &[ParityCheck],
) -> Result<Vec<Materialized>> {
    let bij = recover_label_bijection(sc, n_total)?;
    let mut known = Vec::new();
    // per group index (usize::MAX for free values): positions to draw
    let mut need: BTreeMap<usize, usize> = BTreeMap::new();
    let owner: BTreeMap<i64, usize> =
        bij.groups.iter().enumerate().flat_map(|(g, (xs, _))| xs.iter().map(move |&x| (x, g))).collect();
    for &x in sc.code_check(k).positions() {
        if let Some(&y) = bij.bound.get(&x) {
            known.push(y);
        } else if let Some(&g) = owner.get(&x) {
            *need.entry(g).or_default() += 1;
        } else {
            *need.entry(usize::MAX).or_default() += 1;
        }
    }
    let pool_of = |g: usize| -> &[i64] { if g == usize::MAX { &bij.free_values } else { &bij.groups[g].1 } };
    let tried: u64 = need.iter().map(|(&g, &c)| binomial(pool_of(g).len(), c)).product();
    let mut idx = Vec::with_capacity(known.len() + 8);
    let mut count = |ys: &[i64]| {
        idx.clear();
        idx.extend(ys.iter().map(|&y| y as usize - 1));
        cols.zero_parity_count(&idx)
    };

    let mut scored: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut from_unclassified = false;
    if tried > OBSERVED_FIRST {
        for u in observed.iter().filter(|u| u.weight() == sc.e_c.weight() && known.iter().all(|&y| u.contains(y))) {
            let rest: Vec<i64> = u.positions().iter().copied().filter(|y| !known.contains(y)).collect();
            if need.iter().all(|(&g, &c)| rest.iter().filter(|y| pool_of(g).contains(y)).count() == c) {
                let c = count(u.positions());
                if c >= threshold {
                    scored.push((c, u.positions().to_vec()));
                }
            }
        }
        from_unclassified = !scored.is_empty();
        if scored.is_empty() && tried > MATERIALIZE_LIMIT {
            return Err(Error::IndeterminateUnresolved(format!(
                "slot {k}: {tried} possible checks exceed the limit {MATERIALIZE_LIMIT}"
            )));
        }
    }
    if scored.is_empty() {
        let parts: Vec<(&[i64], usize)> = need.iter().map(|(&g, &c)| (pool_of(g), c)).collect();
        let mut cur = known.clone();
        for_each_choice(&parts, &mut cur, &mut |ys| {
            let c = count(ys);
            if c >= threshold {
                scored.push((c, ys.to_vec()));
            }
        });
    }
    let mut out: Vec<Materialized> = scored
        .into_iter()
        .map(|(satisfied, ys)| Materialized {
            slot: k,
            check: ParityCheck::new(ys.clone()).expect("distinct values"),
            satisfied,
            tried,
            from_unclassified,
        })
        .collect();
    out.sort_by(|a, b| b.satisfied.cmp(&a.satisfied).then_with(|| a.check.cmp(&b.check)));
    Ok(out)
}

/// One way of filling the slots, with the checks it rebuilt.
#[derive(Clone, Debug)]
pub struct Branch {
    pub sc: SlotChecks,
    pub rebuilt: Vec<Materialized>,
}

/// Rebuild every missing check inside the ordering from the data. Ties fan
/// out into separate branches, at most `cap` of them.
pub fn resolve_indeterminates(
    sc: &SlotChecks,
    n_total: usize,
    cols: &Columns,
    threshold: usize,
    unclassified: &[ParityCheck],
    cap: usize,
) -> Result<Vec<Branch>> {
    let mut branches = vec![Branch { sc: sc.clone(), rebuilt: Vec::new() }];
    for k in sc.missing() {
        let mut next = Vec::new();
        for br in &branches {
            let opts = materialize_slot(&br.sc, k, n_total, cols, threshold, unclassified)?;
            for m in opts {
                if next.len() == cap.max(1) {
                    break;
                }
                let mut nb = br.clone();
                nb.sc.slots[k] = Some(m.check.clone());
                nb.rebuilt.push(m);
                next.push(nb);
            }
        }
        if next.is_empty() {
            return Err(Error::IndeterminateUnresolved(format!(
                "slot {k}: no rebuilt check reaches {threshold} satisfied words"
            )));
        }
        branches = next;
    }
    Ok(branches)
}

/// Grow a branch past both ends while a rebuilt check is confirmed by the
/// data, up to the codeword length. Ties fan out; only the branches reaching
/// the longest frame are kept, at most `cap` of them.
pub fn extend_short_reconstruction(
    branch: &Branch,
    n_total: usize,
    cols: &Columns,
    threshold: usize,
    unclassified: &[ParityCheck],
    cap: usize,
) -> Result<Vec<Branch>> {
    let n = branch.sc.n as i64;
    let branch = &Branch { sc: tightest(&branch.sc), rebuilt: branch.rebuilt.clone() };
    let mut done = Vec::new();
    let mut budget = EXTEND_BRANCH_LIMIT;
    for forward in [true, false] {
        let mut open = if forward { vec![branch.clone()] } else { std::mem::take(&mut done) };
        done = Vec::new();
        while let Some(br) = open.pop() {
            if br.sc.frame_len() + n > n_total as i64 {
                done.push(br);
                continue;
            }
            let mut trial = br.sc.clone();
            let k = if forward {
                trial.slots.push(None);
                trial.slots.len() - 1
            } else {
                trial.slots.insert(0, None);
                0
            };
            let opts = match materialize_slot(&trial, k, n_total, cols, threshold, unclassified) {
                Ok(o) => o,
                Err(Error::IndeterminateUnresolved(_)) => Vec::new(),
                Err(e) => return Err(e),
            };
            if opts.is_empty() {
                done.push(br);
                continue;
            }
            budget = budget.saturating_sub(opts.len());
            let keep = if budget == 0 { 1 } else { opts.len() };
            for m in opts.into_iter().take(keep) {
                let mut nb = Branch { sc: trial.clone(), rebuilt: br.rebuilt.clone() };
                nb.sc.slots[k] = Some(m.check.clone());
                nb.rebuilt.push(m);
                open.push(nb);
            }
        }
    }
    // a wrong choice among tied checks dead-ends before the codeword boundary
    let longest = done.iter().map(|b| b.sc.frame_len()).max().unwrap_or(0);
    done.retain(|b| b.sc.frame_len() == longest);
    done.sort_by_cached_key(|b| {
        let support: usize = b.rebuilt.iter().map(|m| m.satisfied).sum();
        (std::cmp::Reverse(support), b.rebuilt.iter().map(|m| m.check.clone()).collect::<Vec<_>>())
    });
    done.truncate(cap.max(1));
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_interleaver;
    use crate::conv::EquationClass;

    fn pc(v: &[i64]) -> ParityCheck {
        ParityCheck::new(v.to_vec()).unwrap()
    }

    fn slots_for(e: &ParityCheck, n: usize, pi: &Interleaver) -> Vec<Option<ParityCheck>> {
        EquationClass::from_check(e, n)
            .in_range_shifts(pi.len())
            .iter()
            .map(|x| Some(pi.apply_check(x).unwrap()))
            .collect()
    }

    #[test]
    fn identity_slots_give_identity_labels() {
        let e = pc(&[1, 2, 3, 5, 6]);
        let pi = Interleaver::identity(40);
        let sc = SlotChecks::new(&e, 2, slots_for(&e, 2, &pi));
        let bij = recover_label_bijection(&sc, 40).unwrap();
        for (x, y) in bij.edge_labels() {
            assert_eq!(x, y);
        }
        assert!(bij.edge_labels().len() > 30);
    }

    #[test]
    fn permutation_helpers() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        let mut seen = Vec::new();
        for_each_choice(&[(&[1, 2, 3, 4], 2), (&[7, 8], 1)], &mut vec![0], &mut |v| seen.push(v.to_vec()));
        assert_eq!(seen.len(), 12);
        assert_eq!(seen[0], vec![0, 1, 2, 7]);
        let mut none = 0;
        for_each_choice(&[(&[1, 2], 0)], &mut Vec::new(), &mut |_| none += 1);
        assert_eq!(none, 1);
    }

    #[test]
    fn candidates_explain_the_group() {
        let e = pc(&[1, 2, 4, 5, 7, 8, 9, 12]);
        let n_total = 200;
        let pi = random_interleaver(n_total, 11).unwrap();
        let slots = slots_for(&e, 2, &pi);
        let truth: BTreeSet<ParityCheck> = slots.iter().flatten().cloned().collect();
        let sc = SlotChecks::new(&e, 2, slots);
        let cands = interleaver_candidates(&sc, n_total, CANDIDATE_CAP).unwrap();
        assert!(!cands.is_empty());
        for c in &cands {
            let got: BTreeSet<ParityCheck> = EquationClass::from_check(&c.e_hat, 2)
                .in_range_shifts(n_total)
                .iter()
                .map(|x| c.interleaver.apply_check(x).unwrap())
                .collect();
            assert_eq!(got, truth, "mirror={}", c.mirror);
        }
    }

    #[test]
    fn contradiction_is_reported() {
        let e = pc(&[1, 2, 3, 5, 6]);
        let slots = vec![Some(pc(&[1, 2, 3, 4, 5])), Some(pc(&[6, 7, 8, 9, 10]))];
        let err = recover_label_bijection(&SlotChecks::new(&e, 2, slots), 20).unwrap_err();
        assert!(matches!(err, Error::BijectionFailed(_)));
    }
}
