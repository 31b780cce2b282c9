//! The four exact verification algorithms. All decide the same predicate:
//! is the puzzle a strong USP, equivalently does its matching instance
//! admit no non-trivial 3D matching.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::AtomicBool;

use crate::cnf::{build_cnf, emit_dimacs};
use crate::ip::{build_ip, emit_lp};
use crate::matching::{find_nontrivial_matching_cancelable, MatchingInstance};
use crate::puzzle::Puzzle;
use crate::sat::{CdclSolver, SatOutcome};
use crate::solver::{run_external, write_temp_instance, SolveStatus, SolverBackend};
use crate::{Error, Result};

/// Definition-level verification: iterate all pairs of row permutations
/// (the first fixed to the identity) and demand a witnessing column for
/// each non-identity pair. Blocking values are cached in the matching
/// instance up front. Exponential; returns false at the first
/// counterexample pair.
pub fn verify_brute_force(p: &Puzzle) -> bool {
    let s = p.size();
    if s <= 1 {
        return true;
    }
    let inst = MatchingInstance::from_puzzle(p);
    let mut p2: Vec<usize> = (0..s).collect();
    let mut p2_is_id = true;
    loop {
        let mut p3: Vec<usize> = (0..s).collect();
        let mut p3_is_id = true;
        loop {
            if !(p2_is_id && p3_is_id) {
                // need some u with the triple blocked, i.e. a non-edge
                let witnessed = (0..s).any(|u| !inst.edge(u, p2[u], p3[u]));
                if !witnessed {
                    return false;
                }
            }
            if !next_permutation(&mut p3) {
                break;
            }
            p3_is_id = false;
        }
        if !next_permutation(&mut p2) {
            break;
        }
        p2_is_id = false;
    }
    true
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Largest size `verify_dp` accepts; the memo table is bounded by `4^s`
/// states.
pub const DP_MAX_SIZE: usize = 20;

/// Meet-in-the-middle verification. Phase one enumerates every pair of
/// partner sets `(Q, R)` matchable to the first half of the rows; phase two
/// looks for a second-half assignment whose complement pair was recorded.
/// Partner enumeration ranges over all unused partners with memoization on
/// `(Q, R, nontrivial-so-far)`, which keeps the `O(4^s)` state bound.
pub fn verify_dp(p: &Puzzle) -> Result<bool> {
    let s = p.size();
    if s <= 1 {
        return Ok(true);
    }
    if s > DP_MAX_SIZE {
        return Err(Error::SizeLimit { what: "verify_dp", limit: DP_MAX_SIZE, got: s });
    }
    let inst = MatchingInstance::from_puzzle(p);
    Ok(!dp_has_nontrivial_matching(&inst))
}

/// Bitmasks over third-slice partners per `(u, v)`.
fn edge_masks(inst: &MatchingInstance) -> Vec<Vec<u32>> {
    let s = inst.size();
    (0..s)
        .map(|u| {
            (0..s)
                .map(|v| {
                    let mut m = 0u32;
                    for w in 0..s {
                        if inst.edge(u, v, w) {
                            m |= 1 << w;
                        }
                    }
                    m
                })
                .collect()
        })
        .collect()
}

const DP_DENSE_MAX_SIZE: usize = 10;

trait DpStore {
    /// Returns true if `(q, r, flag)` was already visited in `phase`, and
    /// marks it visited.
    fn check_and_set(&mut self, phase: usize, idx: u64, flag: bool) -> bool;
    fn record_half(&mut self, idx: u64, flag: bool);
    fn lookup_half(&self, idx: u64) -> Option<bool>;
}

struct DenseStore {
    visited: [Vec<u64>; 4],
    reached: Vec<u64>,
    nontriv: Vec<u64>,
}

impl DenseStore {
    fn new(s: usize) -> DenseStore {
        let words = (1usize << (2 * s)).div_ceil(64);
        DenseStore {
            visited: std::array::from_fn(|_| vec![0u64; words]),
            reached: vec![0u64; words],
            nontriv: vec![0u64; words],
        }
    }
}

#[inline]
fn bit_get(v: &[u64], idx: u64) -> bool {
    v[(idx / 64) as usize] >> (idx % 64) & 1 == 1
}

#[inline]
fn bit_set(v: &mut [u64], idx: u64) {
    v[(idx / 64) as usize] |= 1 << (idx % 64);
}

impl DpStore for DenseStore {
    fn check_and_set(&mut self, phase: usize, idx: u64, flag: bool) -> bool {
        let arr = &mut self.visited[phase * 2 + flag as usize];
        if bit_get(arr, idx) {
            return true;
        }
        bit_set(arr, idx);
        false
    }

    fn record_half(&mut self, idx: u64, flag: bool) {
        bit_set(&mut self.reached, idx);
        if flag {
            bit_set(&mut self.nontriv, idx);
        }
    }

    fn lookup_half(&self, idx: u64) -> Option<bool> {
        if bit_get(&self.reached, idx) {
            Some(bit_get(&self.nontriv, idx))
        } else {
            None
        }
    }
}

struct SparseStore {
    visited: HashSet<(u8, u64)>,
    half: HashMap<u64, bool>,
}

impl DpStore for SparseStore {
    fn check_and_set(&mut self, phase: usize, idx: u64, flag: bool) -> bool {
        !self.visited.insert(((phase * 2 + flag as usize) as u8, idx))
    }

    fn record_half(&mut self, idx: u64, flag: bool) {
        self.half.entry(idx).and_modify(|f| *f |= flag).or_insert(flag);
    }

    fn lookup_half(&self, idx: u64) -> Option<bool> {
        self.half.get(&idx).copied()
    }
}

fn dp_has_nontrivial_matching(inst: &MatchingInstance) -> bool {
    let s = inst.size();
    if s <= DP_DENSE_MAX_SIZE {
        dp_run(inst, &mut DenseStore::new(s))
    } else {
        dp_run(inst, &mut SparseStore { visited: HashSet::new(), half: HashMap::new() })
    }
}

fn dp_run<S: DpStore>(inst: &MatchingInstance, store: &mut S) -> bool {
    let s = inst.size();
    let em = edge_masks(inst);
    let full: u32 = if s == 32 { u32::MAX } else { (1u32 << s) - 1 };
    let half = s / 2;
    let ctx = DpCtx { s, half, full, em };
    phase_one(&ctx, store, 0, 0, 0, false);
    phase_two(&ctx, store, half, 0, 0, false)
}

struct DpCtx {
    s: usize,
    half: usize,
    full: u32,
    em: Vec<Vec<u32>>,
}

#[inline]
fn pack(s: usize, q: u32, r: u32) -> u64 {
    ((q as u64) << s) | r as u64
}

fn phase_one<S: DpStore>(ctx: &DpCtx, store: &mut S, u: usize, q: u32, r: u32, flag: bool) {
    let idx = pack(ctx.s, q, r);
    if store.check_and_set(0, idx, flag) {
        return;
    }
    if u == ctx.half {
        store.record_half(idx, flag);
        return;
    }
    let mut free_v = ctx.full & !q;
    while free_v != 0 {
        let v = free_v.trailing_zeros() as usize;
        free_v &= free_v - 1;
        let mut wmask = ctx.em[u][v] & !r;
        while wmask != 0 {
            let w = wmask.trailing_zeros() as usize;
            wmask &= wmask - 1;
            phase_one(
                ctx,
                store,
                u + 1,
                q | 1 << v,
                r | 1 << w,
                flag || v != u || w != u,
            );
        }
    }
}

fn phase_two<S: DpStore>(ctx: &DpCtx, store: &mut S, u: usize, q: u32, r: u32, flag: bool) -> bool {
    let idx = pack(ctx.s, q, r);
    if store.check_and_set(1, idx, flag) {
        return false;
    }
    if u == ctx.s {
        let comp = pack(ctx.s, ctx.full & !q, ctx.full & !r);
        return match store.lookup_half(comp) {
            Some(first_half_nontriv) => first_half_nontriv || flag,
            None => false,
        };
    }
    let mut free_v = ctx.full & !q;
    while free_v != 0 {
        let v = free_v.trailing_zeros() as usize;
        free_v &= free_v - 1;
        let mut wmask = ctx.em[u][v] & !r;
        while wmask != 0 {
            let w = wmask.trailing_zeros() as usize;
            wmask &= wmask - 1;
            if phase_two(
                ctx,
                store,
                u + 1,
                q | 1 << v,
                r | 1 << w,
                flag || v != u || w != u,
            ) {
                return true;
            }
        }
    }
    false
}

/// SAT route: the CNF encoding is satisfiable iff the puzzle is not a
/// strong USP. The internal backend decodes any satisfying assignment into
/// a matching and re-validates it before rejecting the puzzle.
pub fn verify_sat(p: &Puzzle, backend: &SolverBackend) -> Result<bool> {
    verify_sat_cancelable(p, backend, None)
}

pub fn verify_sat_cancelable(
    p: &Puzzle,
    backend: &SolverBackend,
    cancel: Option<&AtomicBool>,
) -> Result<bool> {
    if p.size() == 0 {
        return Ok(true);
    }
    let f = build_cnf(p);
    match backend {
        SolverBackend::Internal => {
            let mut solver = CdclSolver::from_dimacs_clauses(f.num_vars, &f.clauses);
            match solver.solve(cancel)? {
                SatOutcome::Sat(model) => {
                    let matching = f
                        .decode_matching(&model)
                        .ok_or_else(|| Error::Invalid("SAT model decodes to no matching".into()))?;
                    let inst = MatchingInstance::from_puzzle(p);
                    if !matching.validate(&inst) {
                        return Err(Error::Invalid(
                            "SAT model decoded to an invalid matching".into(),
                        ));
                    }
                    Ok(false)
                }
                SatOutcome::Unsat => Ok(true),
            }
        }
        SolverBackend::External(cfg) => {
            let path = write_temp_instance(&emit_dimacs(&f), "dimacs")?;
            let res = run_external(cfg, &path, cancel);
            let _ = std::fs::remove_file(&path);
            match res? {
                SolveStatus::Positive => Ok(false),
                SolveStatus::Negative => Ok(true),
            }
        }
    }
}

/// IP route: the model is feasible iff the puzzle is not a strong USP. The
/// internal backend decides feasibility with the exact matcher, to which
/// the model is definitionally equivalent.
pub fn verify_ip(p: &Puzzle, backend: &SolverBackend) -> Result<bool> {
    verify_ip_cancelable(p, backend, None)
}

pub fn verify_ip_cancelable(
    p: &Puzzle,
    backend: &SolverBackend,
    cancel: Option<&AtomicBool>,
) -> Result<bool> {
    if p.size() == 0 {
        return Ok(true);
    }
    let model = build_ip(p);
    match backend {
        SolverBackend::Internal => {
            let inst = model.instance();
            Ok(find_nontrivial_matching_cancelable(&inst, cancel)?.is_none())
        }
        SolverBackend::External(cfg) => {
            let path = write_temp_instance(&emit_lp(&model), "lp")?;
            let res = run_external(cfg, &path, cancel);
            let _ = std::fs::remove_file(&path);
            match res? {
                SolveStatus::Positive => Ok(false),
                SolveStatus::Negative => Ok(true),
            }
        }
    }
}
