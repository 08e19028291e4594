//! Labeled multigraphs of parity checks.
//!
//! Vertices are checks; two checks sharing `k` positions are joined by `k`
//! parallel edges labeled with those positions. An interleaver only renames
//! positions, so the graph of the interleaved checks is the graph of the
//! original checks with relabeled edges. Comparing small neighbourhoods of
//! the two lets the original check be recovered.

mod candidates;
mod matcher;
mod recover;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conv::ParityCheck;

pub use candidates::{
    candidate_masks, candidate_masks_limited, canonical_mask, check_to_mask, enumerate_candidates, mask_to_check, orbit,
    unreduced_count, DEFAULT_WORK_LIMIT,
};
pub use matcher::{equivalent, isomorphic, validate_equivalence, validate_isomorphism};
pub use recover::{recover_equation, recover_with_candidates, shift_graph, RecoverParams, Recovery, StageCounts, Survivor};

/// Vertices carry an id (an index into an equation list, or a shift index)
/// and the check itself; edge labels are recomputed from the checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledMultigraph {
    ids: Vec<i64>,
    checks: Vec<ParityCheck>,
    adj: Vec<Vec<(usize, Vec<i64>)>>,
}

/// Vertex bijection, plus a label bijection for equivalences.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphMatch {
    /// (source vertex id, target vertex id)
    pub vertex_map: Vec<(i64, i64)>,
    /// source label -> target label; empty for plain isomorphisms
    pub label_map: BTreeMap<i64, i64>,
}

impl LabeledMultigraph {
    pub fn new(ids: Vec<i64>, checks: Vec<ParityCheck>) -> Self {
        assert_eq!(ids.len(), checks.len());
        let mut index: HashMap<i64, Vec<usize>> = HashMap::new();
        for (v, e) in checks.iter().enumerate() {
            for &p in e.positions() {
                index.entry(p).or_default().push(v);
            }
        }
        let mut shared: Vec<BTreeMap<usize, Vec<i64>>> = vec![BTreeMap::new(); checks.len()];
        let mut positions: Vec<&i64> = index.keys().collect();
        positions.sort_unstable();
        for p in positions {
            let vs = &index[p];
            for (a, &u) in vs.iter().enumerate() {
                for &w in &vs[a + 1..] {
                    shared[u].entry(w).or_default().push(*p);
                    shared[w].entry(u).or_default().push(*p);
                }
            }
        }
        let adj = shared.into_iter().map(|m| m.into_iter().collect()).collect();
        LabeledMultigraph { ids, checks, adj }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn checks(&self) -> &[ParityCheck] {
        &self.checks
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    /// Neighbours of vertex index `v` with the labels of the joining edges.
    pub fn neighbours(&self, v: usize) -> &[(usize, Vec<i64>)] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().flatten().map(|(_, l)| l.len()).sum::<usize>() / 2
    }

    /// Labels on the edges between vertex indices `u` and `w`.
    pub fn labels(&self, u: usize, w: usize) -> &[i64] {
        match self.adj[u].binary_search_by_key(&w, |(x, _)| *x) {
            Ok(i) => &self.adj[u][i].1,
            Err(_) => &[],
        }
    }

    /// Edge multiplicities as a dense row-major matrix.
    pub fn multiplicities(&self) -> Vec<u8> {
        let n = self.len();
        let mut m = vec![0u8; n * n];
        for (u, row) in self.adj.iter().enumerate() {
            for (w, l) in row {
                m[u * n + w] = l.len() as u8;
            }
        }
        m
    }

    /// For each position on at least one edge, the sorted vertex indices whose check contains it.
    pub fn label_sets(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut sets: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (v, e) in self.checks.iter().enumerate() {
            for &p in e.positions() {
                sets.entry(p).or_default().push(v);
            }
        }
        sets.retain(|_, vs| vs.len() >= 2);
        sets
    }

    /// Subgraph induced by the given vertex indices, in that order.
    pub fn induced(&self, vertices: &[usize]) -> LabeledMultigraph {
        LabeledMultigraph::new(
            vertices.iter().map(|&v| self.ids[v]).collect(),
            vertices.iter().map(|&v| self.checks[v].clone()).collect(),
        )
    }

    /// Vertex indices within `radius` edges of `v`, sorted.
    pub fn ball(&self, v: usize, radius: usize) -> Vec<usize> {
        let mut seen = BTreeSet::from([v]);
        let mut frontier = vec![v];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &u in &frontier {
                for (w, _) in &self.adj[u] {
                    if seen.insert(*w) {
                        next.push(*w);
                    }
                }
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// DOT rendering with one labeled edge per shared position.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("graph {name} {{\n");
        for (v, e) in self.checks.iter().enumerate() {
            let _ = writeln!(s, "  v{} [label=\"{}: {}\"];", self.ids[v], self.ids[v], e);
        }
        for (u, row) in self.adj.iter().enumerate() {
            for (w, labels) in row {
                if u < *w {
                    for l in labels {
                        let _ = writeln!(s, "  v{} -- v{} [label=\"{}\"];", self.ids[u], self.ids[*w], l);
                    }
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Graph of a list of checks; vertex ids are list indices.
pub fn build_graph(l: &[ParityCheck]) -> LabeledMultigraph {
    LabeledMultigraph::new((0..l.len() as i64).collect(), l.to_vec())
}

/// `l` consecutive shifts of `e`, indices `-⌊l/2⌋ .. l-⌊l/2⌋`.
pub fn build_shift_set(e: &ParityCheck, n: usize, l: usize) -> Vec<(i64, ParityCheck)> {
    let lo = -((l / 2) as i64);
    (lo..lo + l as i64).map(|i| (i, e.shift(i, n))).collect()
}

/// Graph of the shifts of `e` with the shift index as vertex id.
pub fn shift_set_graph(e: &ParityCheck, n: usize, l: usize) -> LabeledMultigraph {
    let (ids, checks) = build_shift_set(e, n, l).into_iter().unzip();
    LabeledMultigraph::new(ids, checks)
}

/// Subgraph induced by `v` and its neighbours.
pub fn neighborhood_1(g: &LabeledMultigraph, v: usize) -> LabeledMultigraph {
    g.induced(&g.ball(v, 1))
}

/// Subgraph induced by the vertices within distance two of `v`.
pub fn neighborhood_2(g: &LabeledMultigraph, v: usize) -> LabeledMultigraph {
    g.induced(&g.ball(v, 2))
}
