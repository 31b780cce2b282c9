//! Upper bounds on the maximum size of a width-k strong USP, and the
//! implied matrix multiplication exponent.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::clique::{max_clique, BitGraph, CliqueResult};
use crate::hybrid::HybridConfig;
use crate::puzzle::Row;
use crate::search::{sp_bfs, SearchLimits};
use crate::{util, Error, Result};

/// Minimized exponent bound implied by an (s,k) strong USP, before
/// clamping: `min over integer m >= 3 of
/// 3*log(m)/log(m-1) - 3*log(s!)/(s*k*log(m-1))`.
/// Values below 2 mean no such puzzle can exist.
pub fn omega_upper_raw(s: u64, k: u32) -> f64 {
    assert!(s >= 1 && k >= 1);
    let ln_factorial: f64 = (2..=s).map(|i| (i as f64).ln()).sum();
    minimize_over_m(3.0 * ln_factorial / (s * k as u64) as f64)
}

/// As [`omega_upper_raw`] but clamped below at the trivial barrier 2.
pub fn omega_upper(s: u64, k: u32) -> f64 {
    omega_upper_raw(s, k).max(2.0)
}

/// Round an exponent bound up at two decimals, the convention used when
/// quoting `omega <= x` results.
pub fn ceil_two_decimals(x: f64) -> f64 {
    (x * 100.0).ceil() / 100.0
}

const M_SCAN_CAP: u64 = 10_000_000;
const M_WORSE_STREAK: u32 = 64;

/// Scan integer m upward; the expression is unimodal in practice, so stop
/// once it has failed to improve for a long stretch (the window guards
/// against plateaus). For s = 1 the expression decreases toward 3 forever.
fn minimize_over_m(c: f64) -> f64 {
    if c == 0.0 {
        return 3.0;
    }
    let mut best = f64::INFINITY;
    let mut worse = 0u32;
    let mut m = 3u64;
    while m <= M_SCAN_CAP {
        let val = (3.0 * (m as f64).ln() - c) / ((m - 1) as f64).ln();
        if val < best - 1e-12 {
            best = val;
            worse = 0;
        } else {
            worse += 1;
            if worse >= M_WORSE_STREAK {
                break;
            }
        }
        m += 1;
    }
    best
}

/// Largest s whose implied exponent bound is still consistent with
/// `omega >= 2`.
pub fn omega_bound_size(k: u32) -> u64 {
    assert!(k >= 1);
    let mut ln_factorial = 0.0f64;
    let mut s = 1u64;
    loop {
        ln_factorial += if s >= 2 { (s as f64).ln() } else { 0.0 };
        let raw = if s == 1 {
            3.0
        } else {
            minimize_over_m(3.0 * ln_factorial / (s * k as u64) as f64)
        };
        if raw < 2.0 {
            return s - 1;
        }
        s += 1;
        assert!(s < 100_000_000, "omega bound scan ran away");
    }
}

/// Row pieces must be distinct, so a strong USP has at most 2^k rows.
pub fn unique_pieces_bound(k: u32) -> u64 {
    assert!(k < 64);
    1u64 << k
}

/// Counting bound on USP size as a function of width alone.
pub fn usp_bound(k: u32) -> u64 {
    let k = k as u64;
    let mut total = 0u64;
    for c1 in 0..=k {
        for c2 in 0..=(k - c1) {
            let m = util::binomial(k, c1)
                .min(util::binomial(k, c2))
                .min(util::binomial(k, k - c1 - c2));
            total += m;
        }
    }
    total
}

pub const PAIR_GRAPH_MAX_WIDTH: u32 = 6;

/// Graph on all width-k rows with an edge where the two-row puzzle is a
/// strong USP. For pairs, strong unique solvability is exactly "all three
/// symbol supports differ".
pub fn build_pair_graph(k: u32) -> Result<BitGraph> {
    if k == 0 || k > PAIR_GRAPH_MAX_WIDTH {
        return Err(Error::SizeLimit {
            what: "pair graph width",
            limit: PAIR_GRAPH_MAX_WIDTH as usize,
            got: k as usize,
        });
    }
    let n = 3usize.pow(k);
    let rows: Vec<Row> = (0..n as u32).map(|c| Row::from_code(c, k as usize)).collect();
    let supports: Vec<[u64; 3]> =
        rows.iter().map(|r| [r.support(1), r.support(2), r.support(3)]).collect();
    let mut g = BitGraph::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            let (sa, sb) = (&supports[a], &supports[b]);
            if sa[0] != sb[0] && sa[1] != sb[1] && sa[2] != sb[2] {
                g.add_edge(a, b);
            }
        }
    }
    Ok(g)
}

/// Exact maximum clique of the pair graph; an (s,k) strong USP is a
/// size-s clique there, so the clique number bounds SUSP size.
///
/// The pair graph inherits the column/symbol symmetry group, so for wider
/// puzzles the search is decomposed over canonical classes of small
/// cliques: every maximum clique contains a 3-clique isomorphic to one of
/// the enumerated representatives, leaving one branch-and-bound run per
/// representative's common neighborhood.
pub fn clique_bound(k: u32, time_limit: Option<Duration>) -> Result<CliqueResult> {
    let g = build_pair_graph(k)?;
    let deadline = time_limit.map(|t| Instant::now() + t);
    if k <= 3 {
        return Ok(max_clique(&g, deadline));
    }
    Ok(clique_bound_decomposed(&g, k, deadline))
}

/// Refutation bound for pair-graph clique subproblems: a clique's rows
/// carry pairwise-distinct supports for every symbol, so for each symbol
/// pair the candidate rows must admit a bipartite matching (between their
/// two support values) as large as the clique sought. Matchings are grown
/// by Kuhn augmentation and stop as soon as the target is reached.
struct SupportMatcher {
    supports: Vec<[u8; 3]>,
    scratch: std::cell::RefCell<MatchScratch>,
}

struct MatchScratch {
    rows: Vec<[u8; 3]>,
    adj: Vec<Vec<u8>>,
    used_left: Vec<u8>,
    match_right: [i16; 64],
    visited: [u32; 64],
    stamp: u32,
}

impl SupportMatcher {
    fn new(k: u32) -> SupportMatcher {
        assert!(k <= 6);
        let n = 3usize.pow(k);
        let supports = (0..n as u32)
            .map(|c| {
                let row = Row::from_code(c, k as usize);
                [row.support(1) as u8, row.support(2) as u8, row.support(3) as u8]
            })
            .collect();
        SupportMatcher {
            supports,
            scratch: std::cell::RefCell::new(MatchScratch {
                rows: Vec::new(),
                adj: vec![Vec::new(); 64],
                used_left: Vec::new(),
                match_right: [-1; 64],
                visited: [0; 64],
                stamp: 0,
            }),
        }
    }

    /// True when `codes` cannot contain `need` rows with pairwise-distinct
    /// supports in every symbol.
    fn refutes(&self, codes: impl Iterator<Item = usize>, need: usize) -> bool {
        let mut s = self.scratch.borrow_mut();
        let s = &mut *s;
        s.rows.clear();
        s.rows.extend(codes.map(|c| self.supports[c]));
        if s.rows.len() < need {
            return true;
        }
        // cheap first cut: the number of distinct support values per symbol
        // (support masks fit in 6 bits, so a u64 marks them all)
        let mut marks = [0u64; 3];
        for row in &s.rows {
            marks[0] |= 1 << row[0];
            marks[1] |= 1 << row[1];
            marks[2] |= 1 << row[2];
        }
        if marks.iter().any(|m| (m.count_ones() as usize) < need) {
            return true;
        }
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            for &l in &s.used_left {
                s.adj[l as usize].clear();
            }
            s.used_left.clear();
            for row in &s.rows {
                let (l, r) = (row[a], row[b]);
                if s.adj[l as usize].is_empty() {
                    s.used_left.push(l);
                }
                s.adj[l as usize].push(r);
            }
            s.match_right = [-1; 64];
            let mut matched = 0usize;
            for i in 0..s.used_left.len() {
                let l = s.used_left[i] as usize;
                s.stamp += 1;
                if augment(l, &s.adj, &mut s.match_right, &mut s.visited, s.stamp) {
                    matched += 1;
                    if matched >= need {
                        break;
                    }
                }
            }
            if matched < need {
                return true;
            }
        }
        false
    }
}

fn augment(
    l: usize,
    adj: &[Vec<u8>],
    match_right: &mut [i16; 64],
    visited: &mut [u32; 64],
    stamp: u32,
) -> bool {
    for i in 0..adj[l].len() {
        let r = adj[l][i] as usize;
        if visited[r] != stamp {
            visited[r] = stamp;
            if match_right[r] < 0
                || augment(match_right[r] as usize, adj, match_right, visited, stamp)
            {
                match_right[r] = l as i16;
                return true;
            }
        }
    }
    false
}

const CLIQUE_DECOMPOSITION_DEPTH: usize = 3;

fn decomposition_depth() -> usize {
    std::env::var("SUSP_CLIQUE_DEPTH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(CLIQUE_DECOMPOSITION_DEPTH)
}

fn clique_bound_decomposed(
    g: &crate::clique::BitGraph,
    k: u32,
    deadline: Option<Instant>,
) -> CliqueResult {
    use crate::clique::{
        best_greedy_clique, common_neighbors, induced_subgraph, mask_to_vertices,
        max_clique_above_with,
    };
    use crate::puzzle::{digest_codes, Canonicalizer};
    use std::collections::HashSet;

    let verbose = std::env::var("SUSP_CLIQUE_VERBOSE").is_ok();
    let max_depth = decomposition_depth();
    let canon = Canonicalizer::new(k as usize);
    let matcher = SupportMatcher::new(k);
    let mut best: Vec<usize> = best_greedy_clique(g);
    let mut exact = true;

    // canonical classes of cliques, level by level
    let mut level: Vec<Vec<u32>> = vec![Vec::new()];
    for depth in 1..=max_depth {
        let mut seen = HashSet::new();
        let mut next: Vec<Vec<u32>> = Vec::new();
        for rep in &level {
            let rep_verts: Vec<usize> = rep.iter().map(|&c| c as usize).collect();
            let cand = common_neighbors(g, &rep_verts);
            for c in mask_to_vertices(&cand) {
                let mut child = rep.clone();
                let pos = child.partition_point(|&x| x < c as u32);
                child.insert(pos, c as u32);
                let canonical = canon.canonical_codes(&child);
                if seen.insert(digest_codes(&canonical)) {
                    next.push(canonical);
                }
            }
        }
        if next.is_empty() {
            // no clique of this size exists at all
            if best.len() < depth - 1 {
                best = level[0].iter().map(|&c| c as usize).collect();
            }
            return CliqueResult { size: best.len(), witness: best, exact: true };
        }
        level = next;
        if verbose {
            eprintln!("clique classes at size {depth}: {}", level.len());
        }
    }
    if best.len() < max_depth {
        best = level[0].iter().map(|&c| c as usize).collect();
    }

    for (i, rep) in level.iter().enumerate() {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                exact = false;
                break;
            }
        }
        let rep_verts: Vec<usize> = rep.iter().map(|&c| c as usize).collect();
        let cand = mask_to_vertices(&common_neighbors(g, &rep_verts));
        if max_depth + cand.len() <= best.len() {
            continue;
        }
        let sub = induced_subgraph(g, &cand);
        let floor = best.len() - max_depth;
        let refute = |verts: &[usize], need: usize| {
            // map subgraph vertices back to row codes for the support test
            matcher.refutes(verts.iter().map(|&i| cand[i]), need)
        };
        let found = max_clique_above_with(&sub, floor, deadline, Some(&refute));
        exact &= found.exact;
        if let Some(w) = found.improved {
            best = rep_verts.clone();
            best.extend(w.into_iter().map(|i| cand[i]));
            best.sort_unstable();
        }
        if verbose && (i + 1) % 100 == 0 {
            eprintln!("subproblem {}/{} done (best {})", i + 1, level.len(), best.len());
        }
    }
    CliqueResult { size: best.len(), witness: best, exact }
}

/// A width-(k+1) strong USP restricts to a constant-column subpuzzle of at
/// least a third of its rows, so a bound u at width k lifts to 3u at k+1.
pub fn lift_bound(u: u64) -> u64 {
    3 * u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum BoundKind {
    // declaration order doubles as tie-break priority for `best`
    Exhaustive,
    Clique,
    Lift,
    Usp,
    Unique,
    Omega,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Exhaustive => "exhaustive",
            BoundKind::Clique => "clique",
            BoundKind::Lift => "lift",
            BoundKind::Usp => "usp",
            BoundKind::Unique => "unique",
            BoundKind::Omega => "omega",
        }
    }

    pub fn all() -> &'static [BoundKind] {
        &[
            BoundKind::Exhaustive,
            BoundKind::Clique,
            BoundKind::Lift,
            BoundKind::Usp,
            BoundKind::Unique,
            BoundKind::Omega,
        ]
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundEntry {
    pub value: u64,
    /// False when a time limit truncated the computation, in which case the
    /// value is a lower bound on the bound and not valid as an upper bound.
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub width: u32,
    pub entries: BTreeMap<BoundKind, BoundEntry>,
    pub best_value: u64,
    pub best_kind: BoundKind,
}

#[derive(Debug, Clone, Default)]
pub struct BoundsOptions {
    pub clique_time_limit: Option<Duration>,
    /// Known exhaustive-search result for this width, when the search
    /// itself is out of reach (it is only run live for k <= 4).
    pub exhaustive_value: Option<u64>,
    /// Known best bound for width k-1, feeding the lift; without it the
    /// chain is computed recursively down to width 1 where feasible.
    pub prior_best: Option<u64>,
}

const EXHAUSTIVE_LIVE_MAX_WIDTH: u32 = 4;
const CLIQUE_DEFAULT_MAX_WIDTH: u32 = 5;

/// Compute the requested bounds and take their minimum. Bounds whose
/// computation is infeasible at this width (and not supplied via options)
/// are simply absent from the report.
pub fn best_bounds(k: u32, kinds: &[BoundKind], opts: &BoundsOptions) -> Result<BoundsReport> {
    assert!(k >= 1);
    let mut entries: BTreeMap<BoundKind, BoundEntry> = BTreeMap::new();

    for &kind in kinds {
        match kind {
            BoundKind::Omega => {
                entries.insert(kind, BoundEntry { value: omega_bound_size(k), exact: true });
            }
            BoundKind::Unique => {
                entries.insert(kind, BoundEntry { value: unique_pieces_bound(k), exact: true });
            }
            BoundKind::Usp => {
                entries.insert(kind, BoundEntry { value: usp_bound(k), exact: true });
            }
            BoundKind::Clique => {
                if k <= CLIQUE_DEFAULT_MAX_WIDTH {
                    let r = clique_bound(k, opts.clique_time_limit)?;
                    entries.insert(kind, BoundEntry { value: r.size as u64, exact: r.exact });
                }
            }
            BoundKind::Exhaustive => {
                if let Some(v) = opts.exhaustive_value {
                    entries.insert(kind, BoundEntry { value: v, exact: true });
                } else if k <= EXHAUSTIVE_LIVE_MAX_WIDTH {
                    let report =
                        sp_bfs(k as usize, &SearchLimits::default(), &HybridConfig::default())?;
                    entries.insert(
                        kind,
                        BoundEntry { value: report.max_size as u64, exact: report.complete },
                    );
                }
            }
            BoundKind::Lift => {
                let prior = match opts.prior_best {
                    Some(u) => Some(u),
                    None if k >= 2 => {
                        let inner = best_bounds(
                            k - 1,
                            kinds,
                            &BoundsOptions {
                                clique_time_limit: opts.clique_time_limit,
                                exhaustive_value: None,
                                prior_best: None,
                            },
                        )?;
                        Some(inner.best_value)
                    }
                    None => None,
                };
                if let Some(u) = prior {
                    entries.insert(kind, BoundEntry { value: lift_bound(u), exact: true });
                }
            }
        }
    }

    let (best_kind, best_value) = entries
        .iter()
        .filter(|(_, e)| e.exact)
        .min_by_key(|(kind, e)| (e.value, **kind))
        .map(|(&kind, e)| (kind, e.value))
        .ok_or_else(|| Error::Invalid(format!("no bound computable for width {k}")))?;
    Ok(BoundsReport { width: k, entries, best_value, best_kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::verify_brute_force;
    use crate::Puzzle;

    #[test]
    fn unique_pieces_bound_values() {
        assert_eq!(unique_pieces_bound(0), 1);
        assert_eq!(unique_pieces_bound(3), 8);
        assert_eq!(unique_pieces_bound(12), 4096);
    }

    #[test]
    fn usp_bound_values() {
        let expected = [3u64, 6, 12, 24, 45, 87, 168, 312, 597, 1140, 2112, 4023];
        for (i, &e) in expected.iter().enumerate() {
            assert_eq!(usp_bound(i as u32 + 1), e, "k={}", i + 1);
        }
    }

    #[test]
    fn usp_bound_eventually_beats_unique_pieces() {
        // the asymptotic crossover lands at k = 12 and persists
        for k in 12..=24 {
            assert!(usp_bound(k) < unique_pieces_bound(k), "k={k}");
        }
        for k in 1..=11 {
            assert!(usp_bound(k) > unique_pieces_bound(k), "k={k}");
        }
    }

    #[test]
    fn omega_monotone_nonincreasing_in_s() {
        for k in 1..=8u32 {
            let mut prev = f64::INFINITY;
            for s in 1..=60u64 {
                let v = omega_upper_raw(s, k);
                assert!(v <= prev + 1e-9, "s={s} k={k}");
                prev = v;
            }
        }
    }

    #[test]
    fn omega_table_values() {
        // (s, k, published two-decimal ceiling)
        let rows = [
            (1u64, 1u32, 3.00f64),
            (2, 2, 2.88),
            (3, 3, 2.85),
            (5, 4, 2.81),
            (8, 5, 2.78),
            (14, 6, 2.74),
            (21, 7, 2.73),
            (30, 8, 2.72),
            (42, 9, 2.72),
            (64, 10, 2.71),
            (112, 11, 2.68),
            (196, 12, 2.66),
        ];
        for (s, k, expect) in rows {
            let raw = omega_upper(s, k);
            let ceiled = ceil_two_decimals(raw);
            assert!(
                (ceiled - expect).abs() < 1e-9,
                "({s},{k}): raw {raw:.6}, ceiled {ceiled:.2}, expected {expect:.2}"
            );
            // the raw bound never exceeds the published value
            assert!(raw <= expect + 1e-9, "({s},{k}): {raw:.6} vs {expect:.2}");
        }
    }

    #[test]
    fn omega_bound_sizes() {
        // the k=11 entry is 2980, not the published 2890: the bound at
        // (2890, 11) is still 2.0122 >= 2 and the function is monotone in
        // s, so 2890 cannot be maximal (digit transposition in the source
        // table); both 2980 boundary sides are checked below
        let expected = [3u64, 7, 15, 31, 62, 120, 230, 438, 831, 1575, 2980, 5637];
        for (i, &e) in expected.iter().enumerate() {
            let k = i as u32 + 1;
            assert_eq!(omega_bound_size(k), e, "k={k}");
            assert!(omega_upper_raw(e, k) >= 2.0);
            assert!(omega_upper_raw(e + 1, k) < 2.0);
        }
        assert!(omega_upper_raw(2890, 11) > 2.01);
    }

    #[test]
    fn pair_graph_small() {
        // k=1: no pair of single symbols is an SUSP
        let g = build_pair_graph(1).unwrap();
        assert_eq!(g.edge_count(), 0);
        // the worked examples
        let g = build_pair_graph(2).unwrap();
        let code = |text: &str| text.parse::<Row>().unwrap().encode() as usize;
        assert!(g.has_edge(code("12"), code("23")));
        assert!(!g.has_edge(code("12"), code("32")));
    }

    /// The support-based pair test agrees with brute-force verification on
    /// every pair of width <= 3 rows.
    #[test]
    fn pair_graph_matches_brute_force() {
        for k in 1..=3u32 {
            let g = build_pair_graph(k).unwrap();
            let n = 3u32.pow(k);
            for a in 0..n {
                for b in (a + 1)..n {
                    let p = Puzzle::from_codes(k as usize, &[a, b]).unwrap();
                    assert_eq!(
                        g.has_edge(a as usize, b as usize),
                        verify_brute_force(&p),
                        "pair ({a},{b}) width {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn clique_bounds_small_widths() {
        for (k, expect) in [(1u32, 1usize), (2, 3), (3, 5), (4, 9)] {
            let r = clique_bound(k, None).unwrap();
            assert!(r.exact);
            assert_eq!(r.size, expect, "k={k}");
            // witness rows are pairwise strong USPs
            for (i, &a) in r.witness.iter().enumerate() {
                for &b in &r.witness[i + 1..] {
                    let p = Puzzle::from_codes(k as usize, &[a as u32, b as u32]).unwrap();
                    assert!(verify_brute_force(&p));
                }
            }
        }
    }

    #[test]
    fn lift() {
        assert_eq!(lift_bound(8), 24);
        assert_eq!(lift_bound(654), 1962);
        assert_eq!(lift_bound(0), 0);
    }

    #[test]
    fn best_bounds_small() {
        let kinds = BoundKind::all();
        // k=2: exhaustive 2 beats everything
        let r = best_bounds(2, kinds, &BoundsOptions::default()).unwrap();
        assert_eq!((r.best_value, r.best_kind), (2, BoundKind::Exhaustive));
        // k=6 with the known width-5 best injected: the lift wins
        let r = best_bounds(
            6,
            kinds,
            &BoundsOptions { prior_best: Some(8), ..BoundsOptions::default() },
        )
        .unwrap();
        assert_eq!((r.best_value, r.best_kind), (24, BoundKind::Lift));
        // k=12 given the published width-11 clique bound
        let r = best_bounds(
            12,
            kinds,
            &BoundsOptions { prior_best: Some(654), ..BoundsOptions::default() },
        )
        .unwrap();
        assert_eq!((r.best_value, r.best_kind), (1962, BoundKind::Lift));
        for (kind, e) in &r.entries {
            assert!(r.best_value <= e.value, "best exceeds {kind:?}");
        }
    }
}

#[doc(hidden)]
pub fn debug_clique_stats() -> (u64, u64) {
    let s = crate::clique::take_stats();
    (s.nodes, s.refuted)
}
