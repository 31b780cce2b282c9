//! One-sided fast tests: each returns NOT_SUSP with a certificate in hand
//! or MAYBE, never IS_SUSP.

use std::collections::HashSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::matching::{Matching, MatchingInstance};
use crate::puzzle::Puzzle;
use crate::verify::verify_brute_force;
use crate::{util, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    IsSusp,
    NotSusp,
    Maybe,
}

/// NOT_SUSP when two distinct rows share their column support for some
/// symbol; those two pieces could be swapped without any column collision.
/// Expected `O(s*k)` via hashed supports.
pub fn heuristic_unique_pieces(p: &Puzzle) -> Verdict {
    for symbol in 1..=3u8 {
        let mut seen = HashSet::with_capacity(p.size());
        for row in p.rows() {
            if !seen.insert(row.support(symbol)) {
                return Verdict::NotSusp;
            }
        }
    }
    Verdict::Maybe
}

/// NOT_SUSP when some size-`sub_size` subset of rows fails brute-force
/// verification; strong USPs are downward closed, so any failing subset
/// certifies the whole puzzle. `sub_size` beyond 3 is rejected (the cost
/// grows as `s^sub_size`); puzzles smaller than `sub_size` have no subsets
/// to check and yield MAYBE.
pub fn heuristic_downward_closed(p: &Puzzle, sub_size: usize) -> Result<Verdict> {
    if !(2..=3).contains(&sub_size) {
        return Err(Error::BadSubsetSize(sub_size));
    }
    let mut verdict = Verdict::Maybe;
    util::for_each_combination(p.size(), sub_size, |indices| {
        if verdict == Verdict::Maybe && !verify_brute_force(&p.subpuzzle(indices)) {
            verdict = Verdict::NotSusp;
        }
    });
    Ok(verdict)
}

/// Randomized greedy construction of a non-trivial 3D matching: repeatedly
/// pick an unmatched first-slice vertex with the fewest remaining
/// compatible pairs (ties at random), commit a random compatible pair, and
/// restart from scratch on a dead end. Any matching found is validated
/// (including non-triviality) before the puzzle is rejected, so NOT_SUSP is
/// certified. Deterministic for a fixed seed.
pub fn heuristic_greedy(p: &Puzzle, attempts: usize, seed: u64) -> Verdict {
    let s = p.size();
    if s <= 1 || s > 64 {
        return Verdict::Maybe;
    }
    let inst = MatchingInstance::from_puzzle(p);
    let mut rng = StdRng::seed_from_u64(seed);

    // partner masks: w's per (u, v) and v's per (u, w)
    let mut row_mask = vec![vec![0u64; s]; s];
    let mut col_mask = vec![vec![0u64; s]; s];
    for u in 0..s {
        for v in 0..s {
            for w in 0..s {
                if inst.edge(u, v, w) {
                    row_mask[u][v] |= 1 << w;
                    col_mask[u][w] |= 1 << v;
                }
            }
        }
    }
    let full: u64 = if s == 64 { u64::MAX } else { (1u64 << s) - 1 };

    'attempt: for _ in 0..attempts {
        let mut free_u = full;
        let mut free_v = full;
        let mut free_w = full;
        let mut cts = vec![0usize; s];
        for u in 0..s {
            cts[u] = (0..s).map(|v| row_mask[u][v].count_ones() as usize).sum();
        }
        let mut assigned: Vec<Option<(usize, usize)>> = vec![None; s];

        for _ in 0..s {
            // fewest remaining pairs among unmatched first-slice vertices
            let mut best = usize::MAX;
            let mut m = free_u;
            while m != 0 {
                let u = m.trailing_zeros() as usize;
                m &= m - 1;
                best = best.min(cts[u]);
            }
            let mut ties: Vec<usize> = Vec::new();
            let mut m = free_u;
            while m != 0 {
                let u = m.trailing_zeros() as usize;
                m &= m - 1;
                if cts[u] == best {
                    ties.push(u);
                }
            }
            let u = ties[rng.random_range(0..ties.len())];
            if cts[u] == 0 {
                continue 'attempt; // dead end, restart from scratch
            }

            // pick the j-th remaining pair of u uniformly at random
            let mut j = rng.random_range(0..cts[u]);
            let (mut pv, mut pw) = (usize::MAX, usize::MAX);
            let mut vm = free_v;
            while vm != 0 {
                let v = vm.trailing_zeros() as usize;
                vm &= vm - 1;
                let wm = row_mask[u][v] & free_w;
                let c = wm.count_ones() as usize;
                if j < c {
                    pv = v;
                    pw = nth_set_bit(wm, j);
                    break;
                }
                j -= c;
            }
            debug_assert!(pv != usize::MAX);

            // update remaining-pair counts for other unmatched vertices
            let mut um = free_u & !(1 << u);
            while um != 0 {
                let u2 = um.trailing_zeros() as usize;
                um &= um - 1;
                let overlap = (row_mask[u2][pv] & free_w).count_ones() as usize
                    + (col_mask[u2][pw] & free_v).count_ones() as usize
                    - inst.edge(u2, pv, pw) as usize;
                cts[u2] -= overlap;
            }

            assigned[u] = Some((pv, pw));
            free_u &= !(1 << u);
            free_v &= !(1 << pv);
            free_w &= !(1 << pw);
        }

        let matching = Matching {
            triples: assigned.iter().map(|a| a.expect("complete")).collect(),
        };
        // the all-diagonal matching does not certify anything
        if matching.validate(&inst) {
            return Verdict::NotSusp;
        }
    }
    Verdict::Maybe
}

/// The paper's default number of greedy attempts.
pub fn default_greedy_attempts(s: usize) -> usize {
    (s * s).max(1)
}

fn nth_set_bit(mask: u64, n: usize) -> usize {
    let mut m = mask;
    for _ in 0..n {
        m &= m - 1;
    }
    m.trailing_zeros() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    #[test]
    fn unique_pieces_examples() {
        // both rows have empty support for symbol 3
        assert_eq!(heuristic_unique_pieces(&puzzle("1\n2")), Verdict::NotSusp);
        assert_eq!(heuristic_unique_pieces(&puzzle("12\n23")), Verdict::Maybe);
        assert_eq!(heuristic_unique_pieces(&Puzzle::empty(2)), Verdict::Maybe);
        assert_eq!(heuristic_unique_pieces(&puzzle("123")), Verdict::Maybe);
    }

    #[test]
    fn downward_closed_examples() {
        // contains the non-SUSP pair {12,32}
        assert_eq!(
            heuristic_downward_closed(&puzzle("12\n32\n33"), 2).unwrap(),
            Verdict::NotSusp
        );
        assert_eq!(heuristic_downward_closed(&puzzle("12\n23"), 2).unwrap(), Verdict::Maybe);
        assert!(matches!(
            heuristic_downward_closed(&puzzle("12\n23"), 4),
            Err(Error::BadSubsetSize(4))
        ));
        assert!(matches!(
            heuristic_downward_closed(&puzzle("12\n23"), 1),
            Err(Error::BadSubsetSize(1))
        ));
        // fewer rows than the subset size: nothing to check
        assert_eq!(heuristic_downward_closed(&puzzle("12"), 2).unwrap(), Verdict::Maybe);
    }

    #[test]
    fn unique_pieces_equals_downward_closed_2() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let k = rng.random_range(1..=5usize);
            let smax = 3usize.pow(k as u32).min(8);
            let s = rng.random_range(1..=smax);
            let mut codes = std::collections::BTreeSet::new();
            while codes.len() < s {
                codes.insert(rng.random_range(0..3u32.pow(k as u32)));
            }
            let p = Puzzle::from_codes(k, &codes.into_iter().collect::<Vec<_>>()).unwrap();
            assert_eq!(
                heuristic_unique_pieces(&p),
                heuristic_downward_closed(&p, 2).unwrap(),
                "{p:?}"
            );
        }
    }

    #[test]
    fn greedy_examples() {
        // strong USPs can never be rejected
        for seed in 0..20 {
            assert_eq!(heuristic_greedy(&puzzle("12\n23"), 4, seed), Verdict::Maybe);
            assert_eq!(heuristic_greedy(&puzzle("32"), 1, seed), Verdict::Maybe);
        }
        // the non-SUSP pair is rejected for most seeds
        let hits = (0..100)
            .filter(|&seed| heuristic_greedy(&puzzle("12\n32"), 4, seed) == Verdict::NotSusp)
            .count();
        assert!(hits >= 60, "greedy found the matching for only {hits}/100 seeds");
    }

    #[test]
    fn greedy_deterministic_per_seed() {
        let p = puzzle("12\n32\n33");
        for seed in 0..10 {
            let a = heuristic_greedy(&p, 9, seed);
            let b = heuristic_greedy(&p, 9, seed);
            assert_eq!(a, b);
        }
    }

    /// Soundness: NOT_SUSP from any heuristic implies the exact verifier
    /// also says no.
    #[test]
    fn heuristics_sound_on_small_puzzles() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..300 {
            let k = rng.random_range(1..=4usize);
            let smax = 3usize.pow(k as u32).min(6);
            let s = rng.random_range(1..=smax);
            let mut codes = std::collections::BTreeSet::new();
            while codes.len() < s {
                codes.insert(rng.random_range(0..3u32.pow(k as u32)));
            }
            let p = Puzzle::from_codes(k, &codes.into_iter().collect::<Vec<_>>()).unwrap();
            let exact = verify_brute_force(&p);
            if heuristic_unique_pieces(&p) == Verdict::NotSusp {
                assert!(!exact);
            }
            if s >= 2 && heuristic_downward_closed(&p, 2).unwrap() == Verdict::NotSusp {
                assert!(!exact);
            }
            if heuristic_greedy(&p, s * s, 5) == Verdict::NotSusp {
                assert!(!exact);
            }
        }
    }
}
