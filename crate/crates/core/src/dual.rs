//! Recovery of weight-`t` parity checks of the interleaved code from observed words.
//!
//! Two search engines share one acceptance rule (a satisfaction count over all
//! words at or above [`threshold`]):
//!
//! * [`Engine::Collision`]: meet-in-the-middle over a pilot of at most 64
//!   words. Every column becomes a 64-bit signature; ⌈t/2⌉- and ⌊t/2⌋-subsets
//!   of columns are hashed by the XOR of their signatures and colliding
//!   disjoint pairs are verified on the whole dataset. Noise is absorbed by
//!   splitting the signature into `tol + 1` bands, one of which must collide
//!   exactly when the pilot XOR has weight at most `tol`.
//! * [`Engine::InformationSet`]: each pass reduces the words to row echelon
//!   form under a random column order and keeps the sums of one or two
//!   reduced non-pivot columns that have the right weight. The reduced columns
//!   of a convolutional code are sparse, so window collisions for larger sums
//!   degenerate; many cheap passes are used instead. This only finds exact
//!   checks, so it is meant for noiseless data where the collision engine
//!   would need too many subsets.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{BitRow, Columns};
use crate::channel::{stream_rng, Dataset};
use crate::conv::ParityCheck;
use crate::error::{Error, Result};

const PASS_STREAM: u64 = 3 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Information-set passes when the data looks noiseless or the collision
    /// search would exceed the work limit, the collision search otherwise.
    Auto,
    Collision,
    InformationSet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub t: usize,
    pub p_est: f64,
    /// Columns searched per pass; `None` searches all of them.
    pub window: Option<usize>,
    pub accept_margin: f64,
    pub max_passes: usize,
    /// Consecutive passes without a new check after which the search stops.
    pub stable_passes: usize,
    pub engine: Engine,
    pub seed: u64,
    /// Upper bound on subsets enumerated per collision pass.
    pub work_limit: u64,
}

impl RecoveryParams {
    pub fn new(t: usize) -> Self {
        RecoveryParams {
            t,
            p_est: 0.0,
            window: None,
            accept_margin: 0.5,
            max_passes: 1000,
            stable_passes: 12,
            engine: Engine::Auto,
            seed: 0,
            work_limit: 400_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Domain(format!("t must be at least 2, got {}", self.t)));
        }
        if !(0.0..0.5).contains(&self.p_est) {
            return Err(Error::Domain(format!("p_est {} outside [0, 0.5)", self.p_est)));
        }
        if !(self.accept_margin > 0.0 && self.accept_margin < 1.0) {
            return Err(Error::Domain(format!("accept_margin {} outside (0, 1)", self.accept_margin)));
        }
        Ok(())
    }
}

/// Progress after each pass.
#[derive(Clone, Debug, Default)]
pub struct Progress {
    pub engine: &'static str,
    pub pass: usize,
    pub tested: u64,
    pub accepted: usize,
}

/// Minimum satisfaction count: `⌈M·(1/2 + margin·(1−2p)^t / 2)⌉`.
/// A true check is satisfied on average by `M·(1+(1−2p)^t)/2` words and a
/// random set by `M/2`; margin 1/2 puts the bar at the midpoint.
pub fn threshold(t: usize, p: f64, m: usize, margin: f64) -> usize {
    let bias = (1.0 - 2.0 * p).powi(t as i32);
    let x = m as f64 * (0.5 + margin * bias / 2.0);
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Midpoint threshold.
pub fn accept_threshold(t: usize, p_est: f64, m: usize) -> usize {
    threshold(t, p_est, m, 0.5)
}

/// Crossover probability implied by a satisfaction rate of a weight-`t` check.
pub fn estimate_p(rate: f64, t: usize) -> f64 {
    let bias = (2.0 * rate - 1.0).clamp(0.0, 1.0);
    ((1.0 - bias.powf(1.0 / t as f64)) / 2.0).clamp(0.0, 0.499)
}

pub fn satisfaction_count(e: &ParityCheck, data: &Dataset) -> usize {
    crate::channel::satisfaction_count(e, data)
}

/// Find weight-`t` checks satisfied by at least the acceptance threshold of words.
/// Output is sorted and free of duplicates.
pub fn find_parity_checks(data: &Dataset, params: &RecoveryParams) -> Result<Vec<ParityCheck>> {
    find_parity_checks_with_progress(data, params, &|_| {})
}

pub fn find_parity_checks_with_progress(
    data: &Dataset,
    params: &RecoveryParams,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<Vec<ParityCheck>> {
    params.validate()?;
    let cols = data.columns();
    let thr = threshold(params.t, params.p_est, data.m(), params.accept_margin);
    let mut found: HashSet<Vec<u32>> = HashSet::new();

    let collision_ok = collision_work(data.n, params.t) <= params.work_limit;
    match params.engine {
        Engine::InformationSet => information_set(data, &cols, params, thr, &mut found, progress),
        Engine::Collision => {
            if !collision_ok {
                return Err(Error::WorkLimit(format!(
                    "collision search over {} columns at t={} exceeds the work limit",
                    data.n, params.t
                )));
            }
            collision(data, &cols, params, thr, &mut found, progress)
        }
        Engine::Auto => {
            if !collision_ok || (params.p_est == 0.0 && looks_noiseless(data, &cols, params)) {
                information_set(data, &cols, params, thr, &mut found, progress);
            } else {
                collision(data, &cols, params, thr, &mut found, progress);
            }
        }
    }

    let mut out: Vec<ParityCheck> = found
        .into_iter()
        .map(|v| ParityCheck::new(v.into_iter().map(|c| c as i64 + 1).collect()).expect("distinct columns"))
        .collect();
    out.sort();
    for e in &out {
        assert_eq!(e.weight(), params.t);
    }
    Ok(out)
}

/// Subsets enumerated by one collision pass.
pub fn collision_work(n: usize, t: usize) -> u64 {
    let h1 = t.div_ceil(2);
    let h2 = t / 2;
    if h1 > 4 {
        return u64::MAX;
    }
    let w1 = binom(n as u64, h1 as u64);
    if h1 == h2 {
        w1
    } else {
        w1.saturating_add(binom(n as u64, h2 as u64))
    }
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r.min(u64::MAX as u128) as u64
}

/// Smallest `k` with `P(Bin(w, q) > k) < 0.05`, capped at 3, where `q` is the
/// probability that a true weight-`t` check fails on a noisy word.
pub fn pilot_tolerance(w: usize, t: usize, p: f64) -> usize {
    let q = (1.0 - (1.0 - 2.0 * p).powi(t as i32)) / 2.0;
    if q <= 0.0 {
        return 0;
    }
    let mut cdf = 0.0;
    let mut pmf = (1.0 - q).powi(w as i32);
    for k in 0..=3usize {
        cdf += pmf;
        if 1.0 - cdf < 0.05 {
            return k;
        }
        pmf *= (w - k) as f64 / (k + 1) as f64 * q / (1.0 - q);
    }
    3
}

fn accept(cols: &Columns, set: &[u32], thr: usize) -> bool {
    let idx: Vec<usize> = set.iter().map(|&c| c as usize).collect();
    cols.zero_parity_count(&idx) >= thr
}

fn window_columns<R: Rng>(n: usize, window: Option<usize>, rng: &mut R) -> Vec<u32> {
    let mut all: Vec<u32> = (0..n as u32).collect();
    match window {
        Some(w) if w < n => {
            all.shuffle(rng);
            all.truncate(w);
            all.sort_unstable();
            all
        }
        _ => all,
    }
}

/// Decides when further passes are unlikely to add checks.
///
/// Each pass finds every check independently with roughly the same
/// probability `P`, estimated from how many already-known checks a pass finds
/// again. After `k` passes the expected number of checks never seen is
/// `F·(1−P)^k / (1−(1−P)^k)` for `F` found so far; the search stops once that
/// drops below one half, or after `stable` consecutive passes adding nothing.
struct Stopper {
    passes: usize,
    quiet: usize,
    stable: usize,
    refound: u64,
    exposure: u64,
}

impl Stopper {
    fn new(stable: usize) -> Self {
        Stopper { passes: 0, quiet: 0, stable, refound: 0, exposure: 0 }
    }

    fn done(&mut self, known_before: usize, added: usize, refound: usize, total: usize) -> bool {
        self.passes += 1;
        self.quiet = if added == 0 { self.quiet + 1 } else { 0 };
        if known_before > 0 {
            self.refound += refound as u64;
            self.exposure += known_before as u64;
        }
        if self.quiet >= self.stable {
            return true;
        }
        if self.passes < 2 || self.refound == 0 || total == 0 {
            return false;
        }
        let p = (self.refound as f64 / self.exposure as f64).min(1.0);
        let miss = (1.0 - p).powi(self.passes as i32);
        miss >= 1.0 || total as f64 * miss / (1.0 - miss) < 0.5
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_pass(
    engine: &'static str,
    pass: usize,
    tested: u64,
    new: Vec<Vec<u32>>,
    cols: &Columns,
    thr: usize,
    found: &mut HashSet<Vec<u32>>,
    stop: &mut Stopper,
    progress: &(dyn Fn(&Progress) + Sync),
) -> bool {
    let mut new = new;
    new.sort_unstable();
    new.dedup();
    let known_before = found.len();
    let (old, fresh): (Vec<Vec<u32>>, Vec<Vec<u32>>) = new.into_iter().partition(|s| found.contains(s));
    let ok: Vec<Vec<u32>> = fresh.into_par_iter().filter(|s| accept(cols, s, thr)).collect();
    let added = ok.len();
    found.extend(ok);
    progress(&Progress { engine, pass, tested, accepted: found.len() });
    stop.done(known_before, added, old.len(), found.len())
}

// ---------------------------------------------------------------------------
// collision engine

struct Entry {
    key: u64,
    sig: u64,
    idx: u64,
}

fn unpack(idx: u64, h: usize) -> impl Iterator<Item = u32> {
    (0..h).map(move |i| ((idx >> (16 * i)) & 0xffff) as u32)
}

/// All `h`-subsets of `cols` whose band key falls in `part` of `parts`.
fn subsets(sig: &[u64], cols: &[u32], h: usize, key: &(dyn Fn(u64) -> u64 + Sync), parts: u64, part: u64) -> Vec<Entry> {
    fn rec(
        sig: &[u64],
        cols: &[u32],
        h: usize,
        start: usize,
        acc: u64,
        idx: u64,
        depth: usize,
        key: &(dyn Fn(u64) -> u64 + Sync),
        parts: u64,
        part: u64,
        out: &mut Vec<Entry>,
    ) {
        if depth == h {
            let k = key(acc);
            if k % parts == part {
                out.push(Entry { key: k, sig: acc, idx });
            }
            return;
        }
        for i in start..=cols.len() - (h - depth) {
            let c = cols[i];
            rec(sig, cols, h, i + 1, acc ^ sig[c as usize], idx | ((c as u64) << (16 * depth)), depth + 1, key, parts, part, out);
        }
    }
    if h == 0 || cols.len() < h {
        return Vec::new();
    }
    (0..=cols.len() - h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let c = cols[i];
            let mut out = Vec::new();
            rec(sig, cols, h, i + 1, sig[c as usize], c as u64, 1, key, parts, part, &mut out);
            out
        })
        .collect()
}

fn collision(
    data: &Dataset,
    cols: &Columns,
    params: &RecoveryParams,
    thr: usize,
    found: &mut HashSet<Vec<u32>>,
    progress: &(dyn Fn(&Progress) + Sync),
) {
    let t = params.t;
    let (h1, h2) = (t.div_ceil(2), t / 2);
    let w = data.m().min(64);
    let tol = pilot_tolerance(w, t, params.p_est);
    let bands = tol as u32 + 1;
    let band_bits = (w as u32) / bands;
    let budget_entries: u64 = 24_000_000;
    let mut stop = Stopper::new(params.stable_passes);
    for pass in 0..params.max_passes {
        let mut rng = stream_rng(params.seed, PASS_STREAM | (1 << 32) | pass as u64);
        let mut pilot: Vec<usize> = (0..data.m()).collect();
        pilot.shuffle(&mut rng);
        pilot.truncate(w);
        let cset = window_columns(data.n, params.window, &mut rng);
        let sig: Vec<u64> = (0..data.n)
            .map(|j| {
                pilot.iter().enumerate().fold(0u64, |s, (b, &r)| s | ((data.words()[r].get(j) as u64) << b))
            })
            .collect();
        let total = collision_work(cset.len(), t);
        let parts = total.div_ceil(budget_entries).max(1);
        let mut tested = 0u64;
        let mut cands: Vec<Vec<u32>> = Vec::new();
        for band in 0..bands {
            let shift = band * band_bits;
            let mask = if band_bits >= 64 { u64::MAX } else { (1u64 << band_bits) - 1 };
            let key = move |s: u64| (s >> shift) & mask;
            for part in 0..parts {
                let mut a = subsets(&sig, &cset, h1, &key, parts, part);
                a.par_sort_unstable_by_key(|e| e.key);
                let b = if h1 == h2 {
                    None
                } else {
                    let mut b = subsets(&sig, &cset, h2, &key, parts, part);
                    b.par_sort_unstable_by_key(|e| e.key);
                    Some(b)
                };
                tested += a.len() as u64 + b.as_ref().map_or(0, |b| b.len() as u64);
                cands.extend(collide(&a, b.as_deref(), h1, h2, tol));
            }
        }
        if finish_pass("collision", pass, tested, cands, cols, thr, found, &mut stop, progress) {
            break;
        }
    }
}

fn groups(v: &[Entry]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i + 1;
        while j < v.len() && v[j].key == v[i].key {
            j += 1;
        }
        out.push((i, j));
        i = j;
    }
    out
}

fn merge(x: &Entry, hx: usize, y: &Entry, hy: usize, tol: usize) -> Option<Vec<u32>> {
    if ((x.sig ^ y.sig).count_ones() as usize) > tol {
        return None;
    }
    let mut s: Vec<u32> = unpack(x.idx, hx).chain(unpack(y.idx, hy)).collect();
    s.sort_unstable();
    let len = s.len();
    s.dedup();
    (s.len() == len).then_some(s)
}

fn collide(a: &[Entry], b: Option<&[Entry]>, h1: usize, h2: usize, tol: usize) -> Vec<Vec<u32>> {
    match b {
        None => groups(a)
            .into_par_iter()
            .flat_map_iter(|(lo, hi)| {
                let mut out = Vec::new();
                for i in lo..hi {
                    for j in i + 1..hi {
                        if let Some(s) = merge(&a[i], h1, &a[j], h2, tol) {
                            out.push(s);
                        }
                    }
                }
                out
            })
            .collect(),
        Some(b) => groups(a)
            .into_par_iter()
            .flat_map_iter(|(lo, hi)| {
                let k = a[lo].key;
                let start = b.partition_point(|e| e.key < k);
                let mut out = Vec::new();
                for y in b[start..].iter().take_while(|e| e.key == k) {
                    for x in &a[lo..hi] {
                        if let Some(s) = merge(x, h1, y, h2, tol) {
                            out.push(s);
                        }
                    }
                }
                out
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// information-set engine

struct Echelon {
    /// permuted column -> original column
    perm: Vec<u32>,
    pivots: Vec<usize>,
    /// for each non-pivot permuted column, its entries in the pivot rows
    q: Vec<BitRow>,
    nonpivots: Vec<usize>,
}

fn echelon<R: Rng>(data: &Dataset, cset: &[u32], rng: &mut R) -> Echelon {
    let mut perm = cset.to_vec();
    perm.shuffle(rng);
    let width = perm.len();
    let mut pos = vec![usize::MAX; data.n];
    for (c, &orig) in perm.iter().enumerate() {
        pos[orig as usize] = c;
    }
    let mut rows: Vec<BitRow> = data
        .words()
        .par_iter()
        .map(|w| {
            let mut r = BitRow::zeros(width);
            for j in w.ones() {
                if pos[j] != usize::MAX {
                    r.set(pos[j], true);
                }
            }
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..width {
        if rank == rows.len() {
            break;
        }
        let Some(r) = (rank..rows.len()).find(|&r| rows[r].get(c)) else { continue };
        rows.swap(rank, r);
        let pivot = rows[rank].clone();
        let sw = c / 64;
        rows.par_iter_mut().enumerate().for_each(|(i, row)| {
            if i != rank && row.get(c) {
                row.xor_assign_from(&pivot, sw);
            }
        });
        pivots.push(c);
        rank += 1;
    }
    rows.truncate(rank);
    let mut is_pivot = vec![false; width];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let nonpivots: Vec<usize> = (0..width).filter(|&c| !is_pivot[c]).collect();
    let mut slot = vec![usize::MAX; width];
    for (k, &c) in nonpivots.iter().enumerate() {
        slot[c] = k;
    }
    let mut q = vec![BitRow::zeros(rank); nonpivots.len()];
    for (i, row) in rows.iter().enumerate() {
        for c in row.ones() {
            if slot[c] != usize::MAX {
                q[slot[c]].set(i, true);
            }
        }
    }
    Echelon { perm, pivots, q, nonpivots }
}

/// Whether exact checks hold on every word.
///
/// Noiseless words of a code have rank below min(M, N). When there are too
/// few words for that to show, exact checks of the first half of the words
/// are tested on the second half: under noise some of them fail.
fn looks_noiseless(data: &Dataset, cols: &Columns, params: &RecoveryParams) -> bool {
    if gf2_rank(data) + 8 <= data.m().min(data.n) {
        return true;
    }
    let half = data.truncated(data.m() / 2);
    if half.m() < 2 {
        return false;
    }
    let mut probe = HashSet::new();
    let mut p = params.clone();
    p.max_passes = 1;
    information_set(&half, &half.columns(), &p, half.m(), &mut probe, &|_| {});
    !probe.is_empty() && probe.iter().all(|s| accept(cols, s, data.m()))
}

/// Rank of the observed words over GF(2).
pub fn gf2_rank(data: &Dataset) -> usize {
    let all: Vec<u32> = (0..data.n as u32).collect();
    echelon(data, &all, &mut stream_rng(0, 0)).pivots.len()
}

impl Echelon {
    /// Original columns of the check with non-pivot support `s`.
    fn support(&self, s: &[usize]) -> Vec<u32> {
        let mut acc = self.q[s[0]].clone();
        for &k in &s[1..] {
            acc.xor_assign(&self.q[k]);
        }
        let mut out: Vec<u32> = s.iter().map(|&k| self.perm[self.nonpivots[k]]).collect();
        out.extend(acc.ones().map(|i| self.perm[self.pivots[i]]));
        out.sort_unstable();
        out
    }

}

const MAX_NONPIVOTS: usize = 20000;

fn xor_weight(a: &BitRow, b: &BitRow, limit: usize) -> usize {
    let mut wt = 0;
    for (x, y) in a.words().iter().zip(b.words()) {
        wt += (x ^ y).count_ones() as usize;
        if wt > limit {
            break;
        }
    }
    wt
}

/// Pairs of reduced columns whose sum has weight `t − 2`, by direct sweep.
fn dense_pairs(ech: &Echelon, np: &[usize], t: usize) -> Vec<Vec<u32>> {
    if t < 2 || ech.pivots.is_empty() {
        return Vec::new();
    }
    np.par_iter()
        .enumerate()
        .flat_map_iter(|(i, &a)| {
            np[i + 1..].iter().filter_map(move |&b| {
                (xor_weight(&ech.q[a], &ech.q[b], t - 2) == t - 2).then(|| ech.support(&[a, b]))
            })
        })
        .collect()
}

/// Pairs of reduced columns whose sum has weight `t − 2`.
///
/// `|q_a ⊕ q_b| = |q_a| + |q_b| − 2|q_a ∩ q_b|`, so apart from pairs of very
/// light columns a hit needs a common pivot row; overlaps are counted through
/// a row-to-column index instead of testing every pair.
fn sparse_pairs(ech: &Echelon, np: &[usize], t: usize) -> Vec<Vec<u32>> {
    if t < 2 || ech.pivots.is_empty() {
        return Vec::new();
    }
    let target = t - 2;
    let rows: Vec<Vec<u32>> = np.iter().map(|&a| ech.q[a].ones().map(|r| r as u32).collect()).collect();
    let mut inv: Vec<Vec<u32>> = vec![Vec::new(); ech.pivots.len()];
    for (i, r) in rows.iter().enumerate() {
        for &row in r {
            inv[row as usize].push(i as u32);
        }
    }
    let mut out: Vec<Vec<u32>> = (0..np.len())
        .into_par_iter()
        .fold(
            || (Vec::new(), vec![0u16; np.len()], Vec::new()),
            |(mut out, mut cnt, mut touched): (Vec<Vec<u32>>, Vec<u16>, Vec<u32>), i| {
                for &row in &rows[i] {
                    for &j in &inv[row as usize] {
                        if j as usize > i {
                            if cnt[j as usize] == 0 {
                                touched.push(j);
                            }
                            cnt[j as usize] += 1;
                        }
                    }
                }
                for &j in &touched {
                    let c = cnt[j as usize] as usize;
                    cnt[j as usize] = 0;
                    if rows[i].len() + rows[j as usize].len() == target + 2 * c {
                        out.push(ech.support(&[np[i], np[j as usize]]));
                    }
                }
                touched.clear();
                (out, cnt, touched)
            },
        )
        .map(|(o, _, _)| o)
        .reduce(Vec::new, |mut a, b| {
            a.extend(b);
            a
        });
    // disjoint pairs can only hit when both columns are light
    let light: Vec<usize> = (0..np.len()).filter(|&i| rows[i].len() <= target).collect();
    for (x, &i) in light.iter().enumerate() {
        for &j in &light[x + 1..] {
            if rows[i].len() + rows[j].len() == target && ech.q[np[i]].words().iter().zip(ech.q[np[j]].words()).all(|(a, b)| a & b == 0) {
                out.push(ech.support(&[np[i], np[j]]));
            }
        }
    }
    out
}

fn information_set(
    data: &Dataset,
    cols: &Columns,
    params: &RecoveryParams,
    thr: usize,
    found: &mut HashSet<Vec<u32>>,
    progress: &(dyn Fn(&Progress) + Sync),
) {
    let t = params.t;
    let mut stop = Stopper::new(params.stable_passes);
    for pass in 0..params.max_passes {
        let mut rng = stream_rng(params.seed, PASS_STREAM | pass as u64);
        let cset = window_columns(data.n, params.window, &mut rng);
        let ech = echelon(data, &cset, &mut rng);
        let mut np: Vec<usize> = (0..ech.nonpivots.len()).collect();
        if np.len() > MAX_NONPIVOTS {
            np.shuffle(&mut rng);
            np.truncate(MAX_NONPIVOTS);
            np.sort_unstable();
        }
        let mut cands: Vec<Vec<u32>> = np
            .iter()
            .filter(|&&a| ech.q[a].count_ones() + 1 == t)
            .map(|&a| ech.support(&[a]))
            .collect();
        let weight: usize = np.iter().map(|&a| ech.q[a].count_ones()).sum();
        if weight * 8 < np.len() * ech.pivots.len() {
            cands.extend(sparse_pairs(&ech, &np, t));
        } else {
            cands.extend(dense_pairs(&ech, &np, t));
        }
        let tested = np.len() as u64;
        if finish_pass("information-set", pass, tested, cands, cols, thr, found, &mut stop, progress) {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, random_interleaver};
    use crate::conv::{enumerate_classes, ConvCode};

    #[test]
    fn thresholds() {
        assert_eq!(accept_threshold(6, 0.0, 100), 75);
        assert_eq!(accept_threshold(9, 0.0, 100), 75);
        assert_eq!(accept_threshold(6, 0.4999999, 101), 51);
        // 1000·(0.5 + 0.98^6/4) = 721.46
        assert_eq!(accept_threshold(6, 0.01, 1000), 722);
        assert!(threshold(6, 0.01, 1000, 0.7) >= threshold(6, 0.01, 1000, 0.5));
    }

    #[test]
    fn p_estimate_inverts_bias() {
        let p: f64 = 0.02;
        let rate = (1.0 + (1.0 - 2.0 * p).powi(8)) / 2.0;
        assert!((estimate_p(rate, 8) - p).abs() < 1e-12);
        assert_eq!(estimate_p(1.0, 6), 0.0);
    }

    #[test]
    fn tolerance_grows_with_noise() {
        assert_eq!(pilot_tolerance(64, 6, 0.0), 0);
        let a = pilot_tolerance(64, 6, 0.001);
        let b = pilot_tolerance(64, 6, 0.02);
        assert!(a <= b && b <= 3);
    }

    #[test]
    fn binom_values() {
        assert_eq!(binom(20, 10), 184_756);
        assert_eq!(binom(30, 10), 30_045_015);
        assert_eq!(binom(3, 5), 0);
    }

    fn oracle(code: &ConvCode, pi: &crate::Interleaver, t: usize, n_total: usize) -> Vec<ParityCheck> {
        let mut v: Vec<ParityCheck> = enumerate_classes(code, t, n_total.min(60), 80)
            .unwrap()
            .iter()
            .flat_map(|c| c.in_range_shifts(n_total))
            .map(|e| pi.apply_check(&e).unwrap())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn both_engines_find_small_noiseless_set() {
        let code = ConvCode::named("C2").unwrap();
        let n = 120;
        let pi = random_interleaver(n, 4).unwrap();
        let data = generate_dataset(&code, &pi, 0.0, 100, n / 2, 9).unwrap();
        let want = oracle(&code, &pi, 6, n);
        for engine in [Engine::Collision, Engine::InformationSet] {
            let mut params = RecoveryParams::new(6);
            params.engine = engine;
            let got = find_parity_checks(&data, &params).unwrap();
            // the truncated code also has boundary checks outside the shift classes
            for e in &want {
                assert!(got.contains(e), "{engine:?} missed {e}");
            }
            for e in &got {
                assert_eq!(satisfaction_count(e, &data), data.m());
            }
        }
    }

    #[test]
    fn random_data_yields_nothing() {
        let mut rng = stream_rng(77, 0);
        let words = (0..200)
            .map(|_| BitRow::from_bits(&(0..150).map(|_| rng.gen::<bool>() as u8).collect::<Vec<_>>()))
            .collect();
        let data = Dataset::new(150, 0.0, 0, words).unwrap();
        assert!(find_parity_checks(&data, &RecoveryParams::new(6)).unwrap().is_empty());
    }

    #[test]
    fn invalid_params() {
        let data = Dataset::new(4, 0.0, 0, vec![BitRow::zeros(4)]).unwrap();
        let mut p = RecoveryParams::new(1);
        assert!(find_parity_checks(&data, &p).is_err());
        p.t = 2;
        p.accept_margin = 1.0;
        assert!(find_parity_checks(&data, &p).is_err());
    }
}
