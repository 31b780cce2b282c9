//! The tripartite 3D matching instance derived from a puzzle, and an exact
//! backtracking decision procedure for non-trivial 3D matchings.
//!
//! A puzzle is a strong USP iff its instance has no non-trivial 3D matching,
//! so this module is both the oracle the other verifiers are checked
//! against and the feasibility engine behind the internal IP route.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::puzzle::{Puzzle, Row};
use crate::{Error, Result};

/// True iff some column has exactly two of `a_i = 1`, `b_i = 2`, `c_i = 3`.
/// Blocked triples are precisely the non-edges of the matching instance.
pub fn triple_blocked(a: &Row, b: &Row, c: &Row) -> Result<bool> {
    if a.width() != b.width() || a.width() != c.width() {
        return Err(Error::WidthMismatch(a.width(), b.width().max(c.width())));
    }
    Ok(triple_blocked_cells(a.cells(), b.cells(), c.cells()))
}

#[inline]
fn triple_blocked_cells(a: &[u8], b: &[u8], c: &[u8]) -> bool {
    for i in 0..a.len() {
        let hits = (a[i] == 1) as u8 + (b[i] == 2) as u8 + (c[i] == 3) as u8;
        if hits == 2 {
            return true;
        }
    }
    false
}

/// The tripartite 3-hypergraph on three copies of `[s]`; `edge(u,v,w)` holds
/// iff the corresponding row triple is not blocked. Stored as a flat `s^3`
/// bit array (a few kilobytes in the target regime).
#[derive(Debug, Clone)]
pub struct MatchingInstance {
    size: usize,
    edges: Vec<u64>,
}

impl MatchingInstance {
    pub fn from_puzzle(p: &Puzzle) -> MatchingInstance {
        let s = p.size();
        let rows = p.rows();
        let mut inst = MatchingInstance::empty(s);
        for u in 0..s {
            for v in 0..s {
                for w in 0..s {
                    if !triple_blocked_cells(rows[u].cells(), rows[v].cells(), rows[w].cells()) {
                        inst.set_edge(u, v, w);
                    }
                }
            }
        }
        inst
    }

    /// Instance with an explicit edge set (tests, benchmark fixtures).
    pub fn from_edges(size: usize, edges: &[(usize, usize, usize)]) -> MatchingInstance {
        let mut inst = MatchingInstance::empty(size);
        for &(u, v, w) in edges {
            inst.set_edge(u, v, w);
        }
        inst
    }

    fn empty(size: usize) -> MatchingInstance {
        let bits = size * size * size;
        MatchingInstance { size, edges: vec![0u64; bits.div_ceil(64)] }
    }

    fn set_edge(&mut self, u: usize, v: usize, w: usize) {
        let i = (u * self.size + v) * self.size + w;
        self.edges[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn edge(&self, u: usize, v: usize, w: usize) -> bool {
        let i = (u * self.size + v) * self.size + w;
        self.edges[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// All edges in lexicographic `(u,v,w)` order.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.size {
            for v in 0..self.size {
                for w in 0..self.size {
                    if self.edge(u, v, w) {
                        out.push((u, v, w));
                    }
                }
            }
        }
        out
    }

    /// Non-edges in lexicographic `(u,v,w)` order.
    pub fn non_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.size {
            for v in 0..self.size {
                for w in 0..self.size {
                    if !self.edge(u, v, w) {
                        out.push((u, v, w));
                    }
                }
            }
        }
        out
    }
}

/// A full 3D matching: one edge per first-coordinate vertex, pairwise
/// vertex-disjoint in every coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `triples[u] = (v, w)` for the edge covering first-slice vertex `u`.
    pub triples: Vec<(usize, usize)>,
}

impl Matching {
    pub fn is_trivial(&self) -> bool {
        self.triples.iter().enumerate().all(|(u, &(v, w))| u == v && u == w)
    }

    /// Independent validation against an instance: right size, edges
    /// present, coordinate-disjoint, not the all-diagonal set.
    pub fn validate(&self, inst: &MatchingInstance) -> bool {
        let s = inst.size();
        if self.triples.len() != s {
            return false;
        }
        let mut seen_v = vec![false; s];
        let mut seen_w = vec![false; s];
        for (u, &(v, w)) in self.triples.iter().enumerate() {
            if v >= s || w >= s || !inst.edge(u, v, w) || seen_v[v] || seen_w[w] {
                return false;
            }
            seen_v[v] = true;
            seen_w[w] = true;
        }
        !self.is_trivial()
    }
}

/// Find a non-trivial 3D matching by depth-first assignment of a partner
/// pair `(v, w)` to each first-slice vertex, fail-first ordered, or report
/// that none exists. Any returned matching has been re-validated against
/// the edge set.
pub fn find_nontrivial_matching(inst: &MatchingInstance) -> Option<Matching> {
    find_nontrivial_matching_cancelable(inst, None).expect("infallible without cancel token")
}

/// As [`find_nontrivial_matching`], checking `cancel` at every node
/// expansion.
pub fn find_nontrivial_matching_cancelable(
    inst: &MatchingInstance,
    cancel: Option<&AtomicBool>,
) -> Result<Option<Matching>> {
    let s = inst.size();
    if s == 0 {
        // The empty matching is the trivial one; nothing non-trivial exists.
        return Ok(None);
    }
    if s > 64 {
        return Err(Error::SizeLimit { what: "3D matching backtracker", limit: 64, got: s });
    }

    // Fail-first: assign vertices with the fewest incident edges first.
    let mut order: Vec<usize> = (0..s).collect();
    let counts: Vec<usize> = (0..s)
        .map(|u| {
            let mut n = 0;
            for v in 0..s {
                for w in 0..s {
                    n += inst.edge(u, v, w) as usize;
                }
            }
            n
        })
        .collect();
    order.sort_by_key(|&u| counts[u]);

    let mut search = Search {
        inst,
        order,
        assigned: vec![None; s],
        used_v: 0u64,
        used_w: 0u64,
        cancel,
    };
    if search.descend(0, true)? {
        let triples: Vec<(usize, usize)> =
            search.assigned.iter().map(|a| a.expect("complete assignment")).collect();
        let m = Matching { triples };
        debug_assert!(m.validate(inst));
        if !m.validate(inst) {
            return Ok(None);
        }
        return Ok(Some(m));
    }
    Ok(None)
}

struct Search<'a> {
    inst: &'a MatchingInstance,
    order: Vec<usize>,
    assigned: Vec<Option<(usize, usize)>>,
    used_v: u64,
    used_w: u64,
    cancel: Option<&'a AtomicBool>,
}

impl Search<'_> {
    /// `all_diagonal` tracks whether every assignment so far is `(u,u)`;
    /// the complete all-diagonal assignment is rejected.
    fn descend(&mut self, depth: usize, all_diagonal: bool) -> Result<bool> {
        if let Some(c) = self.cancel {
            if c.load(Ordering::Relaxed) {
                return Err(Error::Canceled);
            }
        }
        let s = self.inst.size();
        if depth == s {
            return Ok(!all_diagonal);
        }
        let u = self.order[depth];
        for v in 0..s {
            if self.used_v >> v & 1 == 1 {
                continue;
            }
            for w in 0..s {
                if self.used_w >> w & 1 == 1 || !self.inst.edge(u, v, w) {
                    continue;
                }
                self.assigned[u] = Some((v, w));
                self.used_v |= 1 << v;
                self.used_w |= 1 << w;
                let ok = !self.dead_end(depth + 1)
                    && self.descend(depth + 1, all_diagonal && v == u && w == u)?;
                if ok {
                    return Ok(true);
                }
                self.assigned[u] = None;
                self.used_v &= !(1 << v);
                self.used_w &= !(1 << w);
            }
        }
        Ok(false)
    }

    /// True when some unassigned first-slice vertex has no compatible pair
    /// left.
    fn dead_end(&self, from: usize) -> bool {
        let s = self.inst.size();
        'next: for &u in &self.order[from..] {
            for v in 0..s {
                if self.used_v >> v & 1 == 1 {
                    continue;
                }
                for w in 0..s {
                    if self.used_w >> w & 1 == 0 && self.inst.edge(u, v, w) {
                        continue 'next;
                    }
                }
            }
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    fn row(text: &str) -> Row {
        text.parse().unwrap()
    }

    #[test]
    fn triple_blocked_examples() {
        // all three symbol tests hold: count 3, not exactly two
        assert!(!triple_blocked(&row("1"), &row("2"), &row("3")).unwrap());
        // tests hold for a and b only
        assert!(triple_blocked(&row("1"), &row("2"), &row("1")).unwrap());
        // only the first test holds
        assert!(!triple_blocked(&row("1"), &row("1"), &row("1")).unwrap());
        assert!(triple_blocked(&row("12"), &row("1"), &row("13")).is_err());
    }

    /// Independent scalar re-implementation of the blocking predicate used
    /// as an oracle for the instance builder.
    fn blocked_oracle(a: &[u8], b: &[u8], c: &[u8]) -> bool {
        (0..a.len()).any(|i| {
            let mut n = 0;
            if a[i] == 1 {
                n += 1;
            }
            if b[i] == 2 {
                n += 1;
            }
            if c[i] == 3 {
                n += 1;
            }
            n == 2
        })
    }

    #[test]
    fn instance_matches_oracle() {
        for text in ["32", "12\n32", "12\n23", "112\n231\n323"] {
            let p = puzzle(text);
            let inst = MatchingInstance::from_puzzle(&p);
            let s = p.size();
            let mut count = 0;
            for u in 0..s {
                for v in 0..s {
                    for w in 0..s {
                        let expect = !blocked_oracle(
                            p.rows()[u].cells(),
                            p.rows()[v].cells(),
                            p.rows()[w].cells(),
                        );
                        assert_eq!(inst.edge(u, v, w), expect);
                        count += expect as usize;
                    }
                }
            }
            assert_eq!(inst.edge_count(), count);
        }
    }

    #[test]
    fn diagonal_triples_are_always_edges() {
        let p = puzzle("112\n231\n323\n133");
        let inst = MatchingInstance::from_puzzle(&p);
        for u in 0..p.size() {
            assert!(inst.edge(u, u, u));
        }
    }

    #[test]
    fn singleton_instance_has_only_diagonal() {
        let inst = MatchingInstance::from_puzzle(&puzzle("32"));
        assert_eq!(inst.edges(), vec![(0, 0, 0)]);
        assert!(find_nontrivial_matching(&inst).is_none());
    }

    #[test]
    fn nonsusp_pair_has_nontrivial_matching() {
        let inst = MatchingInstance::from_puzzle(&puzzle("12\n32"));
        let m = find_nontrivial_matching(&inst).expect("pair {12,32} is not an SUSP");
        assert!(m.validate(&inst));
    }

    /// The worked hypergraph example: edges e(r1,r1,r2), (r1,r3,r3),
    /// (r2,r2,r1), (r2,r3,r1), (r3,r2,r3); its unique non-trivial matching
    /// is {(r1,r1,r2), (r2,r3,r1), (r3,r2,r3)}.
    #[test]
    fn example_hypergraph_matching() {
        let inst = MatchingInstance::from_edges(
            3,
            &[(0, 0, 1), (0, 2, 2), (1, 1, 0), (1, 2, 0), (2, 1, 2)],
        );
        let m = find_nontrivial_matching(&inst).expect("matching exists");
        assert!(m.validate(&inst));
        assert_eq!(m.triples, vec![(0, 1), (2, 0), (1, 2)]);
    }

    #[test]
    fn diagonal_only_instance_has_no_nontrivial_matching() {
        for s in 1..=5 {
            let edges: Vec<_> = (0..s).map(|u| (u, u, u)).collect();
            let inst = MatchingInstance::from_edges(s, &edges);
            assert!(find_nontrivial_matching(&inst).is_none());
        }
    }

    #[test]
    fn complete_instance_s2_has_swap() {
        let mut edges = Vec::new();
        for u in 0..2 {
            for v in 0..2 {
                for w in 0..2 {
                    edges.push((u, v, w));
                }
            }
        }
        let inst = MatchingInstance::from_edges(2, &edges);
        let m = find_nontrivial_matching(&inst).expect("complete instance");
        assert!(m.validate(&inst));
    }

    #[test]
    fn empty_instance() {
        let inst = MatchingInstance::from_puzzle(&Puzzle::empty(4));
        assert!(find_nontrivial_matching(&inst).is_none());
    }
}
