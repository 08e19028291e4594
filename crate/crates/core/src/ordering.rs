//! Placing the checks of one group along the shift sequence of the recovered
//! code check.
//!
//! Slot `i` stands for the code check shifted by `i·n`. A check of the group
//! fits slot `i` when it shares exactly `|E ∩ (E + d·n)|` positions with the
//! check already in slot `i ± d`, for every placed slot. Extension proceeds
//! one slot at a time, forward then backward; a slot no check fits is marked
//! missing when a later slot can still be filled.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::conv::ParityCheck;
use crate::error::{Error, Result};
use crate::graph::GraphMatch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// Index into the group.
    Placed(usize),
    Missing,
    /// Inside the seeded range but not yet decided.
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ordering {
    /// Shift index of `slots[0]`.
    pub start: i64,
    pub slots: Vec<Slot>,
}

impl Ordering {
    /// One past the last shift index.
    pub fn end(&self) -> i64 {
        self.start + self.slots.len() as i64
    }

    pub fn get(&self, i: i64) -> Option<Slot> {
        if i < self.start || i >= self.end() {
            None
        } else {
            Some(self.slots[(i - self.start) as usize])
        }
    }

    pub fn placed(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        self.slots.iter().enumerate().filter_map(|(k, s)| match s {
            Slot::Placed(c) => Some((self.start + k as i64, *c)),
            _ => None,
        })
    }

    pub fn placed_count(&self) -> usize {
        self.placed().count()
    }

    pub fn missing_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Missing).count()
    }

    /// The same sequence read backwards, for the mirrored code check.
    pub fn reversed(&self) -> Ordering {
        let mut slots = self.slots.clone();
        slots.reverse();
        Ordering { start: 1 - self.end(), slots }
    }

    /// Drop undecided slots at both ends.
    fn trim(&mut self) {
        while self.slots.last() == Some(&Slot::Open) {
            self.slots.pop();
        }
        while self.slots.first() == Some(&Slot::Open) {
            self.slots.remove(0);
            self.start += 1;
        }
    }

    fn set(&mut self, i: i64, s: Slot) {
        if self.slots.is_empty() {
            self.start = i;
        }
        while i < self.start {
            self.slots.insert(0, Slot::Open);
            self.start -= 1;
        }
        while i >= self.end() {
            self.slots.push(Slot::Open);
        }
        let k = (i - self.start) as usize;
        self.slots[k] = s;
    }

    /// One line per slot: `index positions` or `index MISSING`.
    pub fn dump(&self, l1: &[ParityCheck]) -> String {
        let mut s = String::new();
        for (k, slot) in self.slots.iter().enumerate() {
            let i = self.start + k as i64;
            let _ = match slot {
                Slot::Placed(c) => writeln!(s, "{i} {}", l1[*c]),
                Slot::Missing => writeln!(s, "{i} MISSING"),
                Slot::Open => writeln!(s, "{i} OPEN"),
            };
        }
        s
    }
}

/// Slots seeded by the neighbourhood match: shift index `i` holds `φ(V_i)`.
pub fn seed_from_match(m: &GraphMatch) -> Ordering {
    let mut ord = Ordering { start: 0, slots: Vec::new() };
    let mut pairs = m.vertex_map.clone();
    pairs.sort_unstable();
    for (i, c) in pairs {
        ord.set(i, Slot::Placed(c as usize));
    }
    ord
}

/// Group checks with a position index and the overlap profile of the code check.
pub struct Orderer<'a> {
    l1: &'a [ParityCheck],
    /// `ov[d] = |E ∩ (E + d·n)|`
    ov: Vec<usize>,
    e_c: ParityCheck,
    n: i64,
    index: HashMap<i64, Vec<usize>>,
    /// Checks `0..primary` are the group; later ones are spares, placed only
    /// where they fit and never required.
    primary: usize,
    /// Longest run of missing slots allowed.
    pub cap: usize,
    /// Lookahead depth when several checks fit one slot.
    pub depth: usize,
}

impl<'a> Orderer<'a> {
    pub fn new(l1: &'a [ParityCheck], e_c: &ParityCheck, n: usize) -> Self {
        let reach = (e_c.span() as usize).div_ceil(n);
        let ov = (0..=reach).map(|d| e_c.overlap(&e_c.shift(d as i64, n))).collect();
        let mut index: HashMap<i64, Vec<usize>> = HashMap::new();
        for (c, e) in l1.iter().enumerate() {
            for &p in e.positions() {
                index.entry(p).or_default().push(c);
            }
        }
        Orderer { l1, ov, e_c: e_c.clone(), n: n as i64, index, primary: l1.len(), cap: reach.saturating_sub(1).max(1), depth: 8 }
    }

    /// Treat checks from index `primary` on as spares.
    pub fn with_spares(mut self, primary: usize) -> Self {
        self.primary = primary.min(self.l1.len());
        self
    }

    fn ov(&self, d: i64) -> usize {
        self.ov.get(d.unsigned_abs() as usize).copied().unwrap_or(0)
    }

    fn reach(&self) -> i64 {
        self.ov.len() as i64 - 1
    }

    /// Whether check `c` in slot `j` has the overlap pattern of the code check
    /// with every placed check.
    fn fits(&self, ord: &Ordering, at: &HashMap<usize, i64>, j: i64, c: usize) -> bool {
        if at.contains_key(&c) {
            return false;
        }
        let mut shared: HashMap<i64, usize> = HashMap::new();
        for p in self.l1[c].positions() {
            for other in &self.index[p] {
                if let Some(&k) = at.get(other) {
                    *shared.entry(k).or_default() += 1;
                }
            }
        }
        if shared.iter().any(|(&k, &cnt)| k == j || self.ov(j - k) != cnt) {
            return false;
        }
        let counts_fit = (1..=self.reach()).all(|d| {
            let want = self.ov(d);
            [j - d, j + d].iter().all(|&k| match ord.get(k) {
                Some(Slot::Placed(_)) => shared.get(&k).copied().unwrap_or(0) == want,
                _ => true,
            })
        });
        counts_fit && self.signatures_fit(ord, at, j, c)
    }

    /// Each position of the check must lie in the same placed neighbours as
    /// some position of the code check lies in its shifts, as multisets.
    fn signatures_fit(&self, ord: &Ordering, at: &HashMap<usize, i64>, j: i64, c: usize) -> bool {
        let r = self.reach();
        let near: Vec<i64> = (-r..=r).filter(|&d| d != 0 && matches!(ord.get(j + d), Some(Slot::Placed(_)))).collect();
        if near.is_empty() {
            return true;
        }
        let mut want: Vec<Vec<i64>> = self
            .e_c
            .positions()
            .iter()
            .map(|&x| near.iter().copied().filter(|&d| self.e_c.contains(x - d * self.n)).collect())
            .collect();
        let mut got: Vec<Vec<i64>> = self.l1[c]
            .positions()
            .iter()
            .map(|p| {
                let mut sig: Vec<i64> = self.index[p]
                    .iter()
                    .filter_map(|o| at.get(o).map(|&k| k - j))
                    .filter(|d| near.contains(d))
                    .collect();
                sig.sort_unstable();
                sig
            })
            .collect();
        want.sort();
        got.sort();
        want == got
    }

    fn candidates(&self, ord: &Ordering, at: &HashMap<usize, i64>, j: i64) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for d in 1..=self.reach() {
            if self.ov(d) == 0 {
                continue;
            }
            for k in [j - d, j + d] {
                if let Some(Slot::Placed(c)) = ord.get(k) {
                    for p in self.l1[c].positions() {
                        out.extend(self.index[p].iter().copied().filter(|x| !at.contains_key(x)));
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&c| self.fits(ord, at, j, c));
        out
    }

    fn positions_map(ord: &Ordering) -> HashMap<usize, i64> {
        ord.placed().map(|(i, c)| (c, i)).collect()
    }

    /// Checks placeable in a row from slot `j` in direction `step`, at most `depth`.
    fn lookahead(&self, ord: &mut Ordering, at: &mut HashMap<usize, i64>, j: i64, step: i64, depth: usize) -> usize {
        if depth == 0 || !matches!(ord.get(j), None | Some(Slot::Open)) {
            return 0;
        }
        let mut best = 0;
        for c in self.candidates(ord, at, j) {
            ord.set(j, Slot::Placed(c));
            at.insert(c, j);
            best = best.max(1 + self.lookahead(ord, at, j + step, step, depth - 1));
            at.remove(&c);
            ord.set(j, Slot::Open);
            ord.trim();
            if best == depth {
                break;
            }
        }
        best
    }

    /// Best check for slot `j` with the length of the run it starts: the one
    /// allowing the longest continuation, ties to the smallest group index.
    fn choose_scored(
        &self,
        ord: &mut Ordering,
        at: &mut HashMap<usize, i64>,
        j: i64,
        step: i64,
        accept: impl Fn(usize, usize) -> bool,
    ) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for c in self.candidates(ord, at, j) {
            ord.set(j, Slot::Placed(c));
            at.insert(c, j);
            let run = 1 + self.lookahead(ord, at, j + step, step, self.depth - 1);
            at.remove(&c);
            ord.set(j, Slot::Open);
            ord.trim();
            if accept(run, c) && best.map_or(true, |(s, _)| run > s) {
                best = Some((run, c));
            }
        }
        best
    }

    fn choose(&self, ord: &mut Ordering, at: &mut HashMap<usize, i64>, j: i64, step: i64) -> Option<usize> {
        let cands = self.candidates(ord, at, j);
        if cands.len() <= 1 {
            return cands.first().copied();
        }
        self.choose_scored(ord, at, j, step, |_, _| true).map(|(_, c)| c)
    }

    /// Fill the next slot past the current end in `dir`, inserting missing
    /// slots when a check fits further on. Returns whether anything was added.
    pub fn extend_step(&self, ord: &mut Ordering, dir: Direction) -> bool {
        let step = if dir == Direction::Forward { 1 } else { -1 };
        let edge = if dir == Direction::Forward { ord.end() - 1 } else { ord.start };
        let mut at = Self::positions_map(ord);
        let trimmed = ord.clone();
        for gap in 0..=self.cap {
            let j = edge + step * (gap as i64 + 1);
            for g in 1..=gap as i64 {
                ord.set(edge + step * g, Slot::Missing);
            }
            // past a gap only the far side constrains a spare: demand a full run
            let chosen = if gap == 0 {
                self.choose(ord, &mut at, j, step)
            } else {
                self.choose_scored(ord, &mut at, j, step, |run, c| c < self.primary || run >= self.depth)
                    .map(|(_, c)| c)
            };
            if let Some(c) = chosen {
                ord.set(j, Slot::Placed(c));
                return true;
            }
            *ord = trimmed.clone();
        }
        false
    }

    /// Decide the open slots inside the seeded range.
    fn fill_holes(&self, ord: &mut Ordering) {
        let mut at = Self::positions_map(ord);
        for k in 0..ord.slots.len() {
            if ord.slots[k] != Slot::Open {
                continue;
            }
            let j = ord.start + k as i64;
            match self.choose(ord, &mut at, j, 1) {
                Some(c) => {
                    ord.set(j, Slot::Placed(c));
                    at.insert(c, j);
                }
                None => ord.set(j, Slot::Missing),
            }
        }
    }

    /// Extend forward until blocked, then backward.
    /// Empties end slots that another check fits as well as the placed one;
    /// the interleaver stage regrows them from the data with every tied option.
    fn peel_ambiguous_ends(&self, ord: &mut Ordering) {
        let keep = self.reach() as usize + 1;
        loop {
            let mut peeled = false;
            for j in [ord.start, ord.end() - 1] {
                if ord.placed_count() <= keep {
                    return;
                }
                let Some(Slot::Placed(c)) = ord.get(j) else { continue };
                let mut at = Self::positions_map(ord);
                at.remove(&c);
                ord.set(j, Slot::Open);
                if self.candidates(ord, &at, j).len() > 1 {
                    ord.trim();
                    peeled = true;
                    break;
                }
                ord.set(j, Slot::Placed(c));
            }
            if !peeled {
                return;
            }
        }
    }

    pub fn complete(&self, ord: Ordering) -> Result<Ordering> {
        let (ord, stall) = self.complete_partial(ord);
        match stall {
            Some(e) => Err(e),
            None => Ok(ord),
        }
    }

    /// Completion that keeps what it placed; the error says why the leftover
    /// group members could not have gone into missing slots.
    pub fn complete_partial(&self, mut ord: Ordering) -> (Ordering, Option<Error>) {
        self.fill_holes(&mut ord);
        while self.extend_step(&mut ord, Direction::Forward) {}
        while self.extend_step(&mut ord, Direction::Backward) {}
        let leftover = self.unplaced(&ord);
        let chain = self.largest_component(&leftover);
        let stall = (chain > self.cap).then(|| {
            Error::OrderingFailed(format!(
                "{} of {} equations unplaced; {chain} of them overlap in a chain, more than {} missing equations in a row would be needed",
                leftover.len(),
                self.primary,
                self.cap
            ))
        });
        (ord, stall)
    }

    fn unplaced(&self, ord: &Ordering) -> Vec<usize> {
        let at = Self::positions_map(ord);
        (0..self.primary).filter(|c| !at.contains_key(c)).collect()
    }

    fn largest_component(&self, set: &[usize]) -> usize {
        let member: HashMap<usize, usize> = set.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut seen = vec![false; set.len()];
        let mut best = 0;
        for s in 0..set.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                for p in self.l1[set[i]].positions() {
                    for o in &self.index[p] {
                        if let Some(&oi) = member.get(o) {
                            if !seen[oi] {
                                seen[oi] = true;
                                stack.push(oi);
                            }
                        }
                    }
                }
            }
            best = best.max(size);
        }
        best
    }
}

/// Seeded ordering completed over the whole group.
pub fn complete_ordering(seeded: Ordering, l1: &[ParityCheck], e_c: &ParityCheck, n: usize) -> Result<Ordering> {
    Orderer::new(l1, e_c, n).complete(seeded)
}

/// Ordering over a group with borrowed spares.
#[derive(Clone, Debug)]
pub struct PooledOrdering {
    pub ordering: Ordering,
    /// Group members followed by the spares; slot indices refer to this.
    pub pool: Vec<ParityCheck>,
    /// Group members left out of the ordering.
    pub unplaced: Vec<ParityCheck>,
    /// Set when the leftover members could not fit the missing slots.
    pub stall: Option<String>,
}

/// Seeded ordering with spare checks appended to the group when the group
/// alone leaves gaps: a spare fills a slot only when it has the overlap
/// pattern there. Spares at either end are dropped, since near the codeword
/// ends several checks can fit one slot; growing the ends is left to the
/// interleaver stage. A stalled ordering is kept, with the stall recorded.
pub fn complete_ordering_with_spares(
    seeded: Ordering,
    l1: &[ParityCheck],
    spare: &[ParityCheck],
    e_c: &ParityCheck,
    n: usize,
) -> PooledOrdering {
    let mut pool = l1.to_vec();
    pool.extend(spare.iter().filter(|e| e.weight() == e_c.weight()).cloned());
    let full = Orderer::new(&pool, e_c, n).with_spares(l1.len());
    let alone = Orderer::new(l1, e_c, n).complete(seeded.clone());
    let (ord, stall) = match alone {
        Ok(ord) if ord.missing_count() == 0 && ord.placed_count() == l1.len() => (ord, None),
        _ => full.complete_partial(seeded),
    };
    let mut ord = trim_borrowed(ord, l1.len());
    full.peel_ambiguous_ends(&mut ord);
    let ordering = trim_borrowed(ord, l1.len());
    let unplaced = full.unplaced(&ordering).into_iter().map(|c| pool[c].clone()).collect();
    PooledOrdering { ordering, pool, unplaced, stall: stall.map(|e| e.to_string()) }
}

/// Drops spare, missing and open slots from both ends.
fn trim_borrowed(mut ord: Ordering, primary: usize) -> Ordering {
    let borrowed = |s: Option<&Slot>| match s {
        Some(Slot::Placed(c)) => *c >= primary,
        Some(_) => true,
        None => false,
    };
    while borrowed(ord.slots.last()) {
        ord.slots.pop();
    }
    while borrowed(ord.slots.first()) {
        ord.slots.remove(0);
        ord.start += 1;
    }
    ord
}
