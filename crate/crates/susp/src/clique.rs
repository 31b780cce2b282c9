//! Exact maximum clique via branch and bound with greedy-coloring upper
//! bounds, on bitset adjacency. Optionally deadline-limited, in which case
//! the incumbent is returned flagged as non-exact.

use std::time::Instant;

/// Search statistics for tuning; cumulative per thread.
#[derive(Default, Clone, Copy, Debug)]
pub struct SearchStats {
    pub nodes: u64,
    pub refuted: u64,
}

thread_local! {
    static STATS: std::cell::Cell<SearchStats> = std::cell::Cell::default();
}

pub fn take_stats() -> SearchStats {
    STATS.with(|s| s.replace(SearchStats::default()))
}

fn bump_stats(refuted: bool) {
    STATS.with(|s| {
        let mut v = s.get();
        v.nodes += 1;
        v.refuted += refuted as u64;
        s.set(v);
    });
}

/// Undirected graph with one bitset row per vertex.
#[derive(Debug, Clone)]
pub struct BitGraph {
    n: usize,
    words: usize,
    adj: Vec<u64>,
}

impl BitGraph {
    pub fn new(n: usize) -> BitGraph {
        let words = n.div_ceil(64).max(1);
        BitGraph { n, words, adj: vec![0u64; n * words] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b && a < self.n && b < self.n);
        self.adj[a * self.words + b / 64] |= 1 << (b % 64);
        self.adj[b * self.words + a / 64] |= 1 << (a % 64);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.words..(v + 1) * self.words]
    }
}

#[derive(Debug, Clone)]
pub struct CliqueResult {
    pub size: usize,
    pub witness: Vec<usize>,
    /// False when the search hit its deadline; `size` is then only a lower
    /// bound on the clique number.
    pub exact: bool,
}

pub fn max_clique(g: &BitGraph, deadline: Option<Instant>) -> CliqueResult {
    if g.n == 0 {
        return CliqueResult { size: 0, witness: Vec::new(), exact: true };
    }
    let seed = best_greedy_clique(g);
    match run_search(g, seed.len(), deadline, None) {
        (Some(better), exact) => {
            CliqueResult { size: better.len(), witness: better, exact }
        }
        (None, exact) => CliqueResult { size: seed.len(), witness: seed, exact },
    }
}

/// Search only for cliques strictly larger than `floor`; `improved` is the
/// best such clique if one exists. With `exact` and no improvement, `floor`
/// is certified as an upper bound.
pub struct FloorSearch {
    pub improved: Option<Vec<usize>>,
    pub exact: bool,
}

pub fn max_clique_above(g: &BitGraph, floor: usize, deadline: Option<Instant>) -> FloorSearch {
    max_clique_above_with(g, floor, deadline, None)
}

/// `refute(p, need)` may return true when the candidate set `p` (a mask in
/// relabeled-vertex space mapped back through the callback's own tables)
/// provably contains no clique of size `need`; used to graft
/// domain-specific bounds onto the generic search.
pub type RefuteBound<'a> = &'a dyn Fn(&[usize], usize) -> bool;

pub fn max_clique_above_with(
    g: &BitGraph,
    floor: usize,
    deadline: Option<Instant>,
    refute: Option<RefuteBound<'_>>,
) -> FloorSearch {
    if g.n == 0 {
        return FloorSearch { improved: None, exact: true };
    }
    let (improved, exact) = run_search(g, floor, deadline, refute);
    FloorSearch { improved, exact }
}

/// Relabel by descending degree and run the branch and bound with an
/// initial incumbent size of `floor`. Returns any clique found beyond the
/// floor (in original vertex labels, sorted) and whether the search ran to
/// completion.
fn run_search(
    g: &BitGraph,
    floor: usize,
    deadline: Option<Instant>,
    refute: Option<RefuteBound<'_>>,
) -> (Option<Vec<usize>>, bool) {
    // degeneracy order: repeatedly strip a minimum-degree vertex; the
    // stripped sequence reversed puts dense cores first
    let order = degeneracy_order(g);
    let mut relabeled = BitGraph::new(g.n);
    let mut back = vec![0usize; g.n];
    for (new, &old) in order.iter().enumerate() {
        back[new] = old;
    }
    for a in 0..g.n {
        for b in (a + 1)..g.n {
            if g.has_edge(back[a], back[b]) {
                relabeled.add_edge(a, b);
            }
        }
    }

    let mut search = CliqueSearch {
        g: &relabeled,
        back: &back,
        refute,
        scratch: Vec::with_capacity(g.n),
        mask_pool: Vec::new(),
        idx_pool: Vec::new(),
        best_size: floor,
        best_witness: None,
        current: Vec::new(),
        aborted: false,
        deadline,
        tick: 0,
    };
    let mut p = vec![u64::MAX; relabeled.words];
    trim_mask(&mut p, g.n);
    search.expand(&p);

    let improved = search.best_witness.map(|w| {
        let mut witness: Vec<usize> = w.iter().map(|&v| back[v]).collect();
        witness.sort_unstable();
        witness
    });
    (improved, !search.aborted)
}

fn degeneracy_order(g: &BitGraph) -> Vec<usize> {
    let mut remaining = vec![u64::MAX; g.words];
    trim_mask(&mut remaining, g.n);
    let mut degree: Vec<usize> = (0..g.n).map(|v| g.degree(v)).collect();
    let mut stripped = Vec::with_capacity(g.n);
    for _ in 0..g.n {
        let v = BitIter::new(&remaining)
            .min_by_key(|&v| degree[v])
            .expect("vertices remain");
        stripped.push(v);
        clear_bit(&mut remaining, v);
        for u in BitIter::new(g.row(v)) {
            degree[u] = degree[u].saturating_sub(1);
        }
    }
    stripped.reverse();
    stripped
}

/// Multi-start greedy incumbent: from every seed vertex, repeatedly take
/// the candidate with the most candidate neighbors. A strong initial bound
/// is what makes the color pruning bite.
pub fn best_greedy_clique(g: &BitGraph) -> Vec<usize> {
    let mut best = Vec::new();
    for seed in 0..g.n {
        let mut clique = vec![seed];
        let mut cand = g.row(seed).to_vec();
        loop {
            let mut pick: Option<(usize, usize)> = None;
            for v in BitIter::new(&cand) {
                let deg = and_count(g.row(v), &cand);
                if pick.is_none_or(|(_, d)| deg > d) {
                    pick = Some((v, deg));
                }
            }
            match pick {
                None => break,
                Some((v, _)) => {
                    clique.push(v);
                    and_into(&mut cand, g.row(v));
                }
            }
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }
    best
}

/// Vertices adjacent to every vertex in `verts`, as a mask.
pub fn common_neighbors(g: &BitGraph, verts: &[usize]) -> Vec<u64> {
    let mut mask = vec![u64::MAX; g.words];
    trim_mask(&mut mask, g.n);
    for &v in verts {
        and_into(&mut mask, g.row(v));
    }
    mask
}

pub fn mask_to_vertices(mask: &[u64]) -> Vec<usize> {
    BitIter::new(mask).collect()
}

/// Subgraph induced by `verts`; vertex i of the result is `verts[i]`.
pub fn induced_subgraph(g: &BitGraph, verts: &[usize]) -> BitGraph {
    let mut sub = BitGraph::new(verts.len());
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            if g.has_edge(verts[i], verts[j]) {
                sub.add_edge(i, j);
            }
        }
    }
    sub
}

struct CliqueSearch<'a> {
    g: &'a BitGraph,
    /// Relabeled vertex -> original vertex.
    back: &'a [usize],
    refute: Option<RefuteBound<'a>>,
    scratch: Vec<usize>,
    /// Recycled mask and index buffers; the search allocates once per
    /// recursion depth rather than once per node.
    mask_pool: Vec<Vec<u64>>,
    idx_pool: Vec<Vec<usize>>,
    best_size: usize,
    best_witness: Option<Vec<usize>>,
    current: Vec<usize>,
    aborted: bool,
    deadline: Option<Instant>,
    tick: u32,
}

impl CliqueSearch<'_> {
    fn take_mask(&mut self, init: &[u64]) -> Vec<u64> {
        match self.mask_pool.pop() {
            Some(mut m) => {
                m.clear();
                m.extend_from_slice(init);
                m
            }
            None => init.to_vec(),
        }
    }

    fn put_mask(&mut self, m: Vec<u64>) {
        self.mask_pool.push(m);
    }

    fn take_idx(&mut self) -> Vec<usize> {
        self.idx_pool.pop().map_or_else(Vec::new, |mut v| {
            v.clear();
            v
        })
    }

    fn put_idx(&mut self, v: Vec<usize>) {
        self.idx_pool.push(v);
    }
}

impl CliqueSearch<'_> {
    fn expand(&mut self, p: &[u64]) {
        if self.aborted {
            return;
        }
        self.tick = self.tick.wrapping_add(1);
        if self.tick % 256 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.aborted = true;
                    return;
                }
            }
        }

        if let Some(refute) = self.refute {
            let need = (self.best_size + 1).saturating_sub(self.current.len());
            if need > 1 {
                let mut scratch = std::mem::take(&mut self.scratch);
                scratch.clear();
                scratch.extend(BitIter::new(p).map(|v| self.back[v]));
                let dead = scratch.len() < need || refute(&scratch, need);
                self.scratch = scratch;
                bump_stats(dead);
                if dead {
                    return;
                }
            }
        }

        let (order, colors) = self.color_sort(p);
        let mut p = self.take_mask(p);
        for i in (0..order.len()).rev() {
            if self.current.len() + colors[i] <= self.best_size {
                break; // colors are non-decreasing along `order`
            }
            let v = order[i];
            self.current.push(v);
            let g = self.g;
            let mut next = self.take_mask(g.row(v));
            and_into(&mut next, &p);
            if next.iter().all(|&w| w == 0) {
                if self.current.len() > self.best_size {
                    self.best_size = self.current.len();
                    self.best_witness = Some(self.current.clone());
                }
            } else {
                self.expand(&next);
            }
            self.put_mask(next);
            self.current.pop();
            clear_bit(&mut p, v);
        }
        self.put_mask(p);
        self.put_idx(order);
        self.put_idx(colors);
    }

    fn take_zero_mask(&mut self) -> Vec<u64> {
        let words = self.g.words;
        match self.mask_pool.pop() {
            Some(mut m) => {
                m.clear();
                m.resize(words, 0);
                m
            }
            None => vec![0u64; words],
        }
    }

    /// Greedy sequential coloring with recoloring: each vertex takes the
    /// lowest color class with no neighbor in it; a vertex about to exceed
    /// the prune threshold is first swapped below it when a single
    /// conflicting neighbor can move to another low class. Returns vertices
    /// ordered by color class with their 1-based color numbers.
    fn color_sort(&mut self, p: &[u64]) -> (Vec<usize>, Vec<usize>) {
        // color classes with index below this can never beat the incumbent
        let threshold = self.best_size.saturating_sub(self.current.len());
        let mut classes: Vec<Vec<u64>> = Vec::new();
        for v in BitIter::new(p) {
            let nv = self.g.row(v);
            let mut c = 0;
            while c < classes.len() && intersects(&classes[c], nv) {
                c += 1;
            }
            if c >= threshold && threshold >= 1 && self.try_renumber(&mut classes, v, threshold) {
                continue;
            }
            if c == classes.len() {
                let fresh = self.take_zero_mask();
                classes.push(fresh);
            }
            set_bit(&mut classes[c], v);
        }
        let mut order = self.take_idx();
        let mut colors = self.take_idx();
        for (ci, class) in classes.into_iter().enumerate() {
            for v in BitIter::new(&class) {
                order.push(v);
                colors.push(ci + 1);
            }
            self.put_mask(class);
        }
        (order, colors)
    }

    /// Try to place `v` into a class below `threshold` by relocating its
    /// single conflicting neighbor to some other sub-threshold class.
    fn try_renumber(&self, classes: &mut [Vec<u64>], v: usize, threshold: usize) -> bool {
        let limit = threshold.min(classes.len());
        for c1 in 0..limit.saturating_sub(1) {
            let mut conflict = classes[c1].clone();
            and_into(&mut conflict, self.g.row(v));
            let mut iter = BitIter::new(&conflict);
            let Some(w) = iter.next() else { continue };
            if iter.next().is_some() {
                continue; // more than one conflicting neighbor
            }
            let nw = self.g.row(w);
            for c2 in (c1 + 1)..limit {
                if !intersects(&classes[c2], nw) {
                    clear_bit(&mut classes[c1], w);
                    set_bit(&mut classes[c2], w);
                    set_bit(&mut classes[c1], v);
                    return true;
                }
            }
        }
        false
    }
}

fn trim_mask(mask: &mut [u64], n: usize) {
    let extra = mask.len() * 64 - n;
    if extra > 0 {
        let last = mask.len() - 1;
        mask[last] &= u64::MAX >> extra;
    }
}

fn and_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d &= s;
    }
}

fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

fn set_bit(mask: &mut [u64], v: usize) {
    mask[v / 64] |= 1 << (v % 64);
}

fn and_count(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
}

fn clear_bit(mask: &mut [u64], v: usize) {
    mask[v / 64] &= !(1 << (v % 64));
}

struct BitIter<'a> {
    mask: &'a [u64],
    word: usize,
    bits: u64,
}

impl<'a> BitIter<'a> {
    fn new(mask: &'a [u64]) -> BitIter<'a> {
        BitIter { mask, word: 0, bits: mask.first().copied().unwrap_or(0) }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.bits != 0 {
                let b = self.bits.trailing_zeros() as usize;
                self.bits &= self.bits - 1;
                return Some(self.word * 64 + b);
            }
            self.word += 1;
            if self.word >= self.mask.len() {
                return None;
            }
            self.bits = self.mask[self.word];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn clique_size(g: &BitGraph) -> usize {
        let r = max_clique(g, None);
        assert!(r.exact);
        // witness really is a clique of the reported size
        assert_eq!(r.witness.len(), r.size);
        for i in 0..r.witness.len() {
            for j in (i + 1)..r.witness.len() {
                assert!(g.has_edge(r.witness[i], r.witness[j]));
            }
        }
        r.size
    }

    #[test]
    fn tiny_graphs() {
        let g = BitGraph::new(1);
        assert_eq!(clique_size(&g), 1);

        let mut g = BitGraph::new(3);
        g.add_edge(0, 1);
        assert_eq!(clique_size(&g), 2);

        // triangle plus pendant
        let mut g = BitGraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        g.add_edge(2, 3);
        assert_eq!(clique_size(&g), 3);
    }

    #[test]
    fn complete_and_empty() {
        let mut g = BitGraph::new(9);
        for a in 0..9 {
            for b in (a + 1)..9 {
                g.add_edge(a, b);
            }
        }
        assert_eq!(clique_size(&g), 9);
        let g = BitGraph::new(9);
        assert_eq!(clique_size(&g), 1);
    }

    /// Brute-force oracle over all vertex subsets on random graphs.
    #[test]
    fn random_graphs_match_brute_force() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..60 {
            let n = rng.random_range(1..=14usize);
            let mut g = BitGraph::new(n);
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.random_bool(0.5) {
                        g.add_edge(a, b);
                    }
                }
            }
            let mut brute = 0usize;
            for mask in 0u32..(1 << n) {
                let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                let ok = verts
                    .iter()
                    .enumerate()
                    .all(|(i, &a)| verts[i + 1..].iter().all(|&b| g.has_edge(a, b)));
                if ok {
                    brute = brute.max(verts.len());
                }
            }
            assert_eq!(clique_size(&g), brute);
        }
    }

    #[test]
    fn deadline_returns_lower_bound() {
        // large dense-ish random graph with an impossible deadline
        let mut rng = StdRng::seed_from_u64(1);
        let n = 120;
        let mut g = BitGraph::new(n);
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(0.85) {
                    g.add_edge(a, b);
                }
            }
        }
        let r = max_clique(&g, Some(Instant::now()));
        assert!(!r.exact);
        assert!(r.size >= 1);
    }
}
