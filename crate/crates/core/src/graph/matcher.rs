//! Isomorphism and equivalence of small multigraphs.
//!
//! Colour refinement over both graphs at once prunes the candidate images of
//! each vertex; a backtracking search then extends a partial vertex map one
//! vertex at a time, checking multiplicities against already-mapped vertices.
//! For equivalence every position shared by several checks must also land on
//! a position shared by exactly the image checks: the vertex set holding a
//! label is mapped onto the vertex set holding its image.

use std::collections::{BTreeMap, HashMap};

use super::{GraphMatch, LabeledMultigraph};

/// Vertex-set view of labels: for each label, the sorted vertices containing it.
pub(crate) type LabelSets = Vec<Vec<usize>>;

pub(crate) struct Problem<'a> {
    pub n: usize,
    pub a: &'a [u8],
    pub b: &'a [u8],
    pub labels: Option<(&'a LabelSets, &'a LabelSets)>,
}

fn initial_signature(n: usize, m: &[u8], sets: Option<&LabelSets>, v: usize) -> Vec<u32> {
    let mut mults: Vec<u32> = (0..n).map(|w| m[v * n + w] as u32).filter(|&x| x > 0).collect();
    mults.sort_unstable();
    let mut sig = vec![mults.iter().sum(), mults.len() as u32];
    sig.extend(mults);
    if let Some(sets) = sets {
        let mut sizes: Vec<u32> = sets.iter().filter(|s| s.binary_search(&v).is_ok()).map(|s| s.len() as u32).collect();
        sizes.sort_unstable();
        sig.push(u32::MAX);
        sig.extend(sizes);
    }
    sig
}

/// Stable joint colouring; `None` when colour histograms differ.
fn refine(p: &Problem) -> Option<(Vec<u32>, Vec<u32>)> {
    let n = p.n;
    let (la, lb) = match p.labels {
        Some((x, y)) => (Some(x), Some(y)),
        None => (None, None),
    };
    let mut table: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    let sa: Vec<Vec<u32>> = (0..n).map(|v| initial_signature(n, p.a, la, v)).collect();
    let sb: Vec<Vec<u32>> = (0..n).map(|v| initial_signature(n, p.b, lb, v)).collect();
    for s in sa.iter().chain(&sb) {
        let next = table.len() as u32;
        table.entry(s.clone()).or_insert(next);
    }
    let mut ca: Vec<u32> = sa.iter().map(|s| table[s]).collect();
    let mut cb: Vec<u32> = sb.iter().map(|s| table[s]).collect();
    let mut classes = table.len();
    loop {
        if histogram(&ca) != histogram(&cb) {
            return None;
        }
        let sig = |m: &[u8], c: &[u32], v: usize| {
            let mut nb: Vec<(u8, u32)> = (0..n).filter(|&w| m[v * n + w] > 0).map(|w| (m[v * n + w], c[w])).collect();
            nb.sort_unstable();
            (c[v], nb)
        };
        let sa: Vec<_> = (0..n).map(|v| sig(p.a, &ca, v)).collect();
        let sb: Vec<_> = (0..n).map(|v| sig(p.b, &cb, v)).collect();
        let mut table: BTreeMap<&(u32, Vec<(u8, u32)>), u32> = BTreeMap::new();
        for s in sa.iter().chain(&sb) {
            let next = table.len() as u32;
            table.entry(s).or_insert(next);
        }
        let na: Vec<u32> = sa.iter().map(|s| table[s]).collect();
        let nb: Vec<u32> = sb.iter().map(|s| table[s]).collect();
        let stable = table.len() == classes;
        classes = table.len();
        ca = na;
        cb = nb;
        if stable {
            return (histogram(&ca) == histogram(&cb)).then_some((ca, cb));
        }
    }
}

fn histogram(c: &[u32]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &x in c {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

fn entry_multiset(n: usize, m: &[u8]) -> Vec<u32> {
    let mut counts = vec![0u32; 256];
    for u in 0..n {
        for w in u + 1..n {
            counts[m[u * n + w] as usize] += 1;
        }
    }
    counts
}

struct Search<'a> {
    p: &'a Problem<'a>,
    ca: Vec<u32>,
    cb: Vec<u32>,
    order: Vec<usize>,
    phi: Vec<usize>,
    used: Vec<bool>,
    // label bookkeeping
    sets_of: Vec<Vec<usize>>,
    filled: Vec<usize>,
    avail: HashMap<Vec<usize>, usize>,
}

const UNSET: usize = usize::MAX;

impl Search<'_> {
    fn run(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let n = self.p.n;
        let u = self.order[depth];
        for w in 0..n {
            if self.used[w] || self.cb[w] != self.ca[u] {
                continue;
            }
            let consistent = self.order[..depth]
                .iter()
                .all(|&x| self.p.a[u * n + x] == self.p.b[w * n + self.phi[x]]);
            if !consistent {
                continue;
            }
            self.phi[u] = w;
            self.used[w] = true;
            if let Some(undo) = self.assign_labels(u) {
                if self.run(depth + 1) {
                    return true;
                }
                for img in undo {
                    *self.avail.get_mut(&img).unwrap() += 1;
                }
            }
            for &k in &self.sets_of[u] {
                self.filled[k] -= 1;
            }
            self.used[w] = false;
            self.phi[u] = UNSET;
        }
        false
    }

    /// Registers `u` in its label sets; returns images consumed, or `None`
    /// (with `filled` still incremented) when a completed set has no match.
    fn assign_labels(&mut self, u: usize) -> Option<Vec<Vec<usize>>> {
        let mut consumed = Vec::new();
        let Some((sa, _)) = self.p.labels else {
            for &k in &self.sets_of[u] {
                self.filled[k] += 1;
            }
            return Some(consumed);
        };
        let mut ok = true;
        for &k in &self.sets_of[u] {
            self.filled[k] += 1;
            if ok && self.filled[k] == sa[k].len() {
                let mut img: Vec<usize> = sa[k].iter().map(|&x| self.phi[x]).collect();
                img.sort_unstable();
                match self.avail.get_mut(&img) {
                    Some(c) if *c > 0 => {
                        *c -= 1;
                        consumed.push(img);
                    }
                    _ => ok = false,
                }
            }
        }
        if ok {
            Some(consumed)
        } else {
            for img in consumed {
                *self.avail.get_mut(&img).unwrap() += 1;
            }
            None
        }
    }
}

/// Vertex map `a`-index -> `b`-index, if one exists.
pub(crate) fn solve(p: &Problem) -> Option<Vec<usize>> {
    let n = p.n;
    if p.a.len() != n * n || p.b.len() != n * n {
        return None;
    }
    if let Some((sa, sb)) = p.labels {
        if sa.len() != sb.len() {
            return None;
        }
    }
    if entry_multiset(n, p.a) != entry_multiset(n, p.b) {
        return None;
    }
    let (ca, cb) = refine(p)?;

    // rarest colour first, then always the vertex with most mapped neighbours
    let hist = histogram(&ca);
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| {
                let links = order.iter().filter(|&&x| p.a[v * n + x] > 0).count();
                (links, std::cmp::Reverse(hist[&ca[v]]), std::cmp::Reverse(v))
            })
            .unwrap();
        placed[next] = true;
        order.push(next);
    }

    let mut sets_of = vec![Vec::new(); n];
    let mut avail = HashMap::new();
    let mut nsets = 0;
    if let Some((sa, sb)) = p.labels {
        nsets = sa.len();
        for (k, s) in sa.iter().enumerate() {
            for &v in s {
                sets_of[v].push(k);
            }
        }
        for s in sb {
            *avail.entry(s.clone()).or_insert(0) += 1;
        }
    }
    let mut search = Search {
        p,
        ca,
        cb,
        order,
        phi: vec![UNSET; n],
        used: vec![false; n],
        sets_of,
        filled: vec![0; nsets],
        avail,
    };
    search.run(0).then_some(search.phi)
}

fn label_vectors(g: &LabeledMultigraph) -> (Vec<i64>, LabelSets) {
    g.label_sets().into_iter().unzip()
}

/// Pair labels whose vertex sets correspond under `phi`.
pub(crate) fn label_map(
    src: (&[i64], &LabelSets),
    dst: (&[i64], &LabelSets),
    phi: &[usize],
) -> BTreeMap<i64, i64> {
    let mut by_set: BTreeMap<Vec<usize>, Vec<i64>> = BTreeMap::new();
    for (l, s) in dst.0.iter().zip(dst.1) {
        by_set.entry(s.clone()).or_default().push(*l);
    }
    let mut out = BTreeMap::new();
    for (l, s) in src.0.iter().zip(src.1) {
        let mut img: Vec<usize> = s.iter().map(|&v| phi[v]).collect();
        img.sort_unstable();
        let bucket = by_set.get_mut(&img).expect("label set matched during search");
        out.insert(*l, bucket.remove(0));
    }
    out
}

fn to_match(g: &LabeledMultigraph, h: &LabeledMultigraph, phi: &[usize]) -> GraphMatch {
    GraphMatch {
        vertex_map: phi.iter().enumerate().map(|(u, &w)| (g.ids()[u], h.ids()[w])).collect(),
        label_map: BTreeMap::new(),
    }
}

/// Vertex bijection preserving edge multiplicities, if the unlabeled graphs are isomorphic.
pub fn isomorphic(g: &LabeledMultigraph, h: &LabeledMultigraph) -> Option<GraphMatch> {
    if g.len() != h.len() {
        return None;
    }
    let (a, b) = (g.multiplicities(), h.multiplicities());
    let phi = solve(&Problem { n: g.len(), a: &a, b: &b, labels: None })?;
    Some(to_match(g, h, &phi))
}

/// Isomorphism together with a global label bijection, if the graphs are equivalent.
pub fn equivalent(g: &LabeledMultigraph, h: &LabeledMultigraph) -> Option<GraphMatch> {
    if g.len() != h.len() {
        return None;
    }
    let (a, b) = (g.multiplicities(), h.multiplicities());
    let (lg, sg) = label_vectors(g);
    let (lh, sh) = label_vectors(h);
    let phi = solve(&Problem { n: g.len(), a: &a, b: &b, labels: Some((&sg, &sh)) })?;
    let mut m = to_match(g, h, &phi);
    m.label_map = label_map((&lg, &sg), (&lh, &sh), &phi);
    Some(m)
}

fn index_map(g: &LabeledMultigraph, h: &LabeledMultigraph, m: &GraphMatch) -> Option<Vec<usize>> {
    if g.len() != h.len() || m.vertex_map.len() != g.len() {
        return None;
    }
    let mut phi = vec![UNSET; g.len()];
    let mut hit = vec![false; h.len()];
    for &(s, t) in &m.vertex_map {
        let (u, w) = (g.index_of(s)?, h.index_of(t)?);
        if phi[u] != UNSET || hit[w] {
            return None;
        }
        phi[u] = w;
        hit[w] = true;
    }
    Some(phi)
}

/// Checks the witness against the definition: same multiplicity on every pair.
pub fn validate_isomorphism(g: &LabeledMultigraph, h: &LabeledMultigraph, m: &GraphMatch) -> bool {
    let Some(phi) = index_map(g, h, m) else { return false };
    (0..g.len()).all(|u| (0..g.len()).all(|w| g.labels(u, w).len() == h.labels(phi[u], phi[w]).len()))
}

/// Checks the witness against the definition: the label map is a bijection
/// between edge labels and sends each pair's labels onto the image pair's labels.
pub fn validate_equivalence(g: &LabeledMultigraph, h: &LabeledMultigraph, m: &GraphMatch) -> bool {
    if !validate_isomorphism(g, h, m) {
        return false;
    }
    let phi = index_map(g, h, m).unwrap();
    let src: Vec<i64> = g.label_sets().into_keys().collect();
    let dst: Vec<i64> = h.label_sets().into_keys().collect();
    let mut images: Vec<i64> = m.label_map.values().copied().collect();
    images.sort_unstable();
    let keys: Vec<i64> = m.label_map.keys().copied().collect();
    if keys != src || images != dst {
        return false;
    }
    (0..g.len()).all(|u| {
        (u + 1..g.len()).all(|w| {
            let mut img: Vec<i64> = g.labels(u, w).iter().map(|l| m.label_map[l]).collect();
            img.sort_unstable();
            img == h.labels(phi[u], phi[w])
        })
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_graph, neighborhood_1, shift_set_graph};
    use super::*;
    use crate::conv::ParityCheck;

    fn pc(v: &[i64]) -> ParityCheck {
        ParityCheck::new(v.to_vec()).unwrap()
    }

    #[test]
    fn shifted_pair_is_isomorphic() {
        let g = shift_set_graph(&pc(&[1, 2, 4, 6, 7]), 2, 7);
        let h = shift_set_graph(&pc(&[1, 3, 4, 6, 7]), 2, 7);
        let g1 = neighborhood_1(&g, g.index_of(0).unwrap());
        let h1 = neighborhood_1(&h, h.index_of(0).unwrap());
        let m = isomorphic(&g1, &h1).unwrap();
        assert!(validate_isomorphism(&g1, &h1, &m));
    }

    #[test]
    fn self_match_is_identity() {
        let g = build_graph(&[pc(&[1, 4, 6]), pc(&[2, 4, 5]), pc(&[4, 6, 7]), pc(&[2, 5, 7])]);
        let m = equivalent(&g, &g).unwrap();
        assert!(validate_equivalence(&g, &g, &m));
        // this graph has no nontrivial automorphism
        assert!(m.vertex_map.iter().all(|(a, b)| a == b));
        assert!(m.label_map.iter().all(|(a, b)| a == b));
    }

    #[test]
    fn vertex_count_mismatch() {
        let g = build_graph(&[pc(&[1, 2]), pc(&[2, 3])]);
        let h = build_graph(&[pc(&[1, 2])]);
        assert!(isomorphic(&g, &h).is_none());
    }

    #[test]
    fn label_multiplicities_distinguish() {
        // triangle through one common position vs triangle with three distinct positions
        let g = build_graph(&[pc(&[1, 2]), pc(&[1, 3]), pc(&[1, 4])]);
        let h = build_graph(&[pc(&[1, 2]), pc(&[2, 3]), pc(&[3, 1])]);
        assert!(isomorphic(&g, &h).is_some());
        assert!(equivalent(&g, &h).is_none());
    }

    #[test]
    fn relabeled_graph_is_equivalent() {
        let l = vec![pc(&[1, 4, 6]), pc(&[2, 4, 5]), pc(&[4, 6, 7]), pc(&[2, 5, 7])];
        let perm = |x: i64| [0, 30, 10, 20, 40, 50, 60, 70][x as usize];
        let mut renamed: Vec<ParityCheck> = l.iter().map(|e| e.map(perm).unwrap()).collect();
        renamed.reverse();
        let (g, h) = (build_graph(&l), build_graph(&renamed));
        let m = equivalent(&g, &h).unwrap();
        assert!(validate_equivalence(&g, &h, &m));
        for (a, b) in &m.label_map {
            assert_eq!(perm(*a), *b);
        }
    }
}
