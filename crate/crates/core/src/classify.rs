//! Grouping parity checks by type through neighbourhood profiles, and
//! deduction of the block length `n`.
//!
//! The profile of `E` in `L` counts, for each `i`, the other checks sharing
//! exactly `i` positions with `E`. Interleaving renames positions but keeps
//! overlap sizes, so checks of one type share a profile even after
//! interleaving, except near the ends of the codeword where some neighbours
//! are cut off and the profile shrinks. Frequent profiles become references;
//! a check joins a group when exactly one reference dominates its profile.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::ParityCheck;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<u32>);

impl Profile {
    pub fn intersection_number(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    /// Componentwise `self ≤ other`.
    pub fn leq(&self, other: &Profile) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

pub fn intersection_number(p: &Profile) -> u64 {
    p.intersection_number()
}

pub fn profile_leq(a: &Profile, b: &Profile) -> bool {
    a.leq(b)
}

/// Profile of `e` against `l`; one copy of `e` in `l` is treated as `e` itself.
pub fn neighbourhood_profile(e: &ParityCheck, l: &[ParityCheck]) -> Profile {
    let t = l.iter().map(|x| x.weight()).max().unwrap_or(0).max(e.weight());
    let mut counts = vec![0u32; t];
    let mut self_seen = false;
    for x in l {
        if !self_seen && x == e {
            self_seen = true;
            continue;
        }
        let k = e.overlap(x);
        if k > 0 {
            counts[k - 1] += 1;
        }
    }
    Profile(counts)
}

/// Profiles of every check of `l` against `l`, through a position index.
pub fn all_profiles(l: &[ParityCheck]) -> Vec<Profile> {
    let t = l.iter().map(|x| x.weight()).max().unwrap_or(0);
    let mut index: HashMap<i64, Vec<u32>> = HashMap::new();
    for (j, e) in l.iter().enumerate() {
        for &p in e.positions() {
            index.entry(p).or_default().push(j as u32);
        }
    }
    l.par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut shared: HashMap<u32, usize> = HashMap::new();
            for p in e.positions() {
                for &j in &index[p] {
                    if j as usize != i {
                        *shared.entry(j).or_default() += 1;
                    }
                }
            }
            let mut counts = vec![0u32; t];
            for k in shared.into_values() {
                counts[k - 1] += 1;
            }
            Profile(counts)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeGroup {
    pub equations: Vec<ParityCheck>,
    pub reference_profile: Profile,
    pub intersection_number: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub l1: TypeGroup,
    pub n: usize,
    pub others: Vec<TypeGroup>,
    pub unclassified: Vec<ParityCheck>,
    pub diagnostics: Vec<String>,
}

impl Classification {
    /// All groups, `l1` first.
    pub fn groups(&self) -> impl Iterator<Item = &TypeGroup> {
        std::iter::once(&self.l1).chain(&self.others)
    }
}

/// Minimum frequency for a profile to become a reference.
pub fn reference_frequency(len: usize) -> usize {
    3.max((len as f64 * 0.01).ceil() as usize)
}

/// Split `l` into type groups and deduce `n = ⌊N / |L1|⌋`, where `L1` is the
/// group of smallest intersection number (ties: larger group, then smaller profile).
pub fn classify_equations(l: &[ParityCheck], n_total: usize) -> Result<Classification> {
    if l.len() < 2 {
        return Err(Error::ClassificationFailed(format!(
            "no dominating profile: only {} equation(s) to classify",
            l.len()
        )));
    }
    let mut l = l.to_vec();
    l.sort();
    let profiles = all_profiles(&l);
    let mut freq: BTreeMap<&Profile, usize> = BTreeMap::new();
    for p in &profiles {
        *freq.entry(p).or_default() += 1;
    }
    let min_freq = reference_frequency(l.len());
    let frequent: Vec<(&Profile, usize)> = freq.iter().filter(|(_, &f)| f >= min_freq).map(|(p, &f)| (*p, f)).collect();
    // a frequent profile below a more frequent one is that type with lost neighbours
    let refs: Vec<Profile> = frequent
        .iter()
        .filter(|(p, f)| !frequent.iter().any(|(q, g)| g > f && q != p && p.leq(q)))
        .map(|(p, _)| (*p).clone())
        .collect();

    let mut members: Vec<Vec<ParityCheck>> = vec![Vec::new(); refs.len()];
    let mut unclassified = Vec::new();
    for (e, p) in l.iter().zip(&profiles) {
        let mut dom = refs.iter().enumerate().filter(|(_, r)| p.leq(r));
        match (dom.next(), dom.next()) {
            (Some((i, _)), None) => members[i].push(e.clone()),
            _ => unclassified.push(e.clone()),
        }
    }
    let mut groups: Vec<TypeGroup> = refs
        .into_iter()
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(r, m)| TypeGroup { intersection_number: r.intersection_number(), reference_profile: r, equations: m })
        .collect();
    if groups.is_empty() {
        return Err(Error::ClassificationFailed(format!(
            "no dominating profile: {} equations, {} distinct profiles, none with frequency >= {}",
            l.len(),
            freq.len(),
            min_freq
        )));
    }
    groups.sort_by(|a, b| {
        a.intersection_number
            .cmp(&b.intersection_number)
            .then(b.equations.len().cmp(&a.equations.len()))
            .then(a.reference_profile.cmp(&b.reference_profile))
    });
    let l1 = groups.remove(0);
    let n = n_total / l1.equations.len();
    if n == 0 {
        return Err(Error::ClassificationFailed(format!(
            "smallest group has {} equations, more than N={n_total}",
            l1.equations.len()
        )));
    }
    let mut diagnostics = Vec::new();
    let per_class = n_total as f64 / n as f64;
    for (i, g) in std::iter::once(&l1).chain(&groups).enumerate() {
        if g.equations.len() as f64 > 1.1 * per_class {
            diagnostics.push(format!(
                "group {i} holds {} equations, more than one type can supply at n={n}; types with equal profiles may be merged",
                g.equations.len()
            ));
        }
    }
    Ok(Classification { l1, n, others: groups, unclassified, diagnostics })
}

/// Group dump: `[group i] intersection=<I>` then one equation per line;
/// unclassified equations follow under `[unclassified]`.
pub fn format_groups(c: &Classification) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# n={}", c.n);
    for d in &c.diagnostics {
        let _ = writeln!(s, "# {d}");
    }
    for (i, g) in c.groups().enumerate() {
        let _ = writeln!(s, "[group {i}] intersection={}", g.intersection_number);
        for e in &g.equations {
            let _ = writeln!(s, "{e}");
        }
    }
    if !c.unclassified.is_empty() {
        let _ = writeln!(s, "[unclassified]");
        for e in &c.unclassified {
            let _ = writeln!(s, "{e}");
        }
    }
    s
}
