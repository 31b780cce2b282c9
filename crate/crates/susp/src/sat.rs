//! A compact conflict-driven SAT solver: two-watched-literal propagation,
//! first-UIP clause learning with backjumping, activity-driven decisions,
//! phase saving, and geometric restarts. Sized for the formulas this crate
//! produces (hundreds of variables); hard instances belong to an external
//! solver.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    /// Satisfying assignment, indexed by zero-based variable.
    Sat(Vec<bool>),
    Unsat,
}

type Lit = u32;

#[inline]
fn lit_from_dimacs(l: i32) -> Lit {
    debug_assert!(l != 0);
    ((l.unsigned_abs() - 1) << 1) | (l < 0) as u32
}

#[inline]
fn var(l: Lit) -> usize {
    (l >> 1) as usize
}

#[inline]
fn neg(l: Lit) -> Lit {
    l ^ 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Undef,
    True,
    False,
}

struct Clause {
    lits: Vec<Lit>,
}

pub struct CdclSolver {
    num_vars: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<u32>>,
    assign: Vec<Value>,
    phase: Vec<bool>,
    var_level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    act_inc: f64,
    seen: Vec<bool>,
    unsat: bool,
    conflicts: u64,
}

const ACT_DECAY: f64 = 1.0 / 0.95;
const CANCEL_CHECK_INTERVAL: u64 = 1024;

impl CdclSolver {
    pub fn new(num_vars: usize) -> CdclSolver {
        CdclSolver {
            num_vars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); num_vars * 2],
            assign: vec![Value::Undef; num_vars],
            phase: vec![false; num_vars],
            var_level: vec![0; num_vars],
            reason: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; num_vars],
            act_inc: 1.0,
            seen: vec![false; num_vars],
            unsat: false,
            conflicts: 0,
        }
    }

    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[Vec<i32>]) -> CdclSolver {
        let mut solver = CdclSolver::new(num_vars);
        for clause in clauses {
            solver.add_clause(clause);
        }
        solver
    }

    /// Add a clause of DIMACS literals. Duplicates are removed and
    /// tautologies dropped.
    pub fn add_clause(&mut self, dimacs: &[i32]) {
        if self.unsat {
            return;
        }
        let mut lits: Vec<Lit> = dimacs.iter().map(|&l| lit_from_dimacs(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == neg(w[1])) {
            return; // tautology
        }
        for &l in &lits {
            assert!(var(l) < self.num_vars, "literal out of range");
        }
        match lits.len() {
            0 => self.unsat = true,
            1 => {
                match self.lit_value(lits[0]) {
                    Value::True => {}
                    Value::False => self.unsat = true,
                    Value::Undef => self.enqueue(lits[0], None),
                }
            }
            _ => {
                let ci = self.clauses.len() as u32;
                self.watches[lits[0] as usize].push(ci);
                self.watches[lits[1] as usize].push(ci);
                self.clauses.push(Clause { lits });
            }
        }
    }

    #[inline]
    fn lit_value(&self, l: Lit) -> Value {
        match self.assign[var(l)] {
            Value::Undef => Value::Undef,
            v => {
                let positive = l & 1 == 0;
                if (v == Value::True) == positive {
                    Value::True
                } else {
                    Value::False
                }
            }
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = var(l);
        debug_assert_eq!(self.assign[v], Value::Undef);
        self.assign[v] = if l & 1 == 0 { Value::True } else { Value::False };
        self.var_level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns the index of a conflicting clause if any.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let l = self.trail[self.qhead];
            self.qhead += 1;
            let fl = neg(l);
            let ws = std::mem::take(&mut self.watches[fl as usize]);
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let (first, replacement) = {
                    let c = &mut self.clauses[ci as usize];
                    if c.lits[0] == fl {
                        c.lits.swap(0, 1);
                    }
                    debug_assert_eq!(c.lits[1], fl);
                    (c.lits[0], (2..c.lits.len()).find(|&j| {
                        // any non-false literal can take over the watch
                        true_or_undef(&self.assign, c.lits[j])
                    }))
                };
                if self.lit_value(first) == Value::True {
                    self.watches[fl as usize].push(ci);
                    continue;
                }
                if let Some(j) = replacement {
                    let c = &mut self.clauses[ci as usize];
                    c.lits.swap(1, j);
                    let new_watch = c.lits[1];
                    self.watches[new_watch as usize].push(ci);
                    continue;
                }
                if self.lit_value(first) == Value::Undef {
                    self.watches[fl as usize].push(ci);
                    self.enqueue(first, Some(ci));
                    continue;
                }
                // conflict: put the remaining watchers back
                self.watches[fl as usize].push(ci);
                self.watches[fl as usize].extend_from_slice(&ws[i..]);
                return Some(ci);
            }
        }
        None
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![0];
        let mut counter = 0usize;
        let mut confl = conflict;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let mut cleanup: Vec<usize> = Vec::new();
        let level = self.decision_level();

        loop {
            let start = usize::from(p.is_some());
            for j in start..self.clauses[confl as usize].lits.len() {
                let q = self.clauses[confl as usize].lits[j];
                let v = var(q);
                if !self.seen[v] && self.var_level[v] > 0 {
                    self.seen[v] = true;
                    cleanup.push(v);
                    self.bump(v);
                    if self.var_level[v] >= level {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            let v = var(pl);
            self.seen[v] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = neg(pl);
                break;
            }
            confl = self.reason[v].expect("implied literal has a reason");
            p = Some(pl);
        }

        for v in cleanup {
            self.seen[v] = false;
        }

        let blevel = if learnt.len() == 1 {
            0
        } else {
            // move the highest-level non-asserting literal to the second
            // watch position
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.var_level[var(learnt[i])] > self.var_level[var(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.var_level[var(learnt[1])]
        };
        (learnt, blevel)
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let target = self.trail_lim[level as usize];
        while self.trail.len() > target {
            let l = self.trail.pop().unwrap();
            let v = var(l);
            self.phase[v] = self.assign[v] == Value::True;
            self.assign[v] = Value::Undef;
            self.reason[v] = None;
        }
        self.trail_lim.truncate(level as usize);
        self.qhead = self.trail.len();
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.act_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    fn decide(&mut self) -> bool {
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars {
            if self.assign[v] == Value::Undef
                && best.is_none_or(|b| self.activity[v] > self.activity[b])
            {
                best = Some(v);
            }
        }
        match best {
            Some(v) => {
                self.trail_lim.push(self.trail.len());
                let l = (v as u32) << 1 | !self.phase[v] as u32;
                self.enqueue(l, None);
                true
            }
            None => false,
        }
    }

    pub fn solve(&mut self, cancel: Option<&AtomicBool>) -> Result<SatOutcome> {
        if self.unsat {
            return Ok(SatOutcome::Unsat);
        }
        let mut restart_budget = 100u64;
        let mut conflicts_until_restart = restart_budget;
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                if self.conflicts % CANCEL_CHECK_INTERVAL == 0 {
                    if let Some(c) = cancel {
                        if c.load(Ordering::Relaxed) {
                            return Err(Error::Canceled);
                        }
                    }
                }
                if self.decision_level() == 0 {
                    return Ok(SatOutcome::Unsat);
                }
                let (learnt, blevel) = self.analyze(conflict);
                self.backtrack(blevel);
                self.act_inc *= ACT_DECAY;
                let assert_lit = learnt[0];
                if learnt.len() == 1 {
                    self.enqueue(assert_lit, None);
                } else {
                    let ci = self.clauses.len() as u32;
                    self.watches[learnt[0] as usize].push(ci);
                    self.watches[learnt[1] as usize].push(ci);
                    self.clauses.push(Clause { lits: learnt });
                    self.enqueue(assert_lit, Some(ci));
                }
                conflicts_until_restart = conflicts_until_restart.saturating_sub(1);
            } else {
                if conflicts_until_restart == 0 {
                    restart_budget = restart_budget + restart_budget / 2;
                    conflicts_until_restart = restart_budget;
                    self.backtrack(0);
                    continue;
                }
                if let Some(c) = cancel {
                    if c.load(Ordering::Relaxed) {
                        return Err(Error::Canceled);
                    }
                }
                if !self.decide() {
                    let model =
                        self.assign.iter().map(|&v| v == Value::True).collect();
                    return Ok(SatOutcome::Sat(model));
                }
            }
        }
    }
}

#[inline]
fn true_or_undef(assign: &[Value], l: Lit) -> bool {
    match assign[var(l)] {
        Value::Undef => true,
        v => (v == Value::True) == (l & 1 == 0),
    }
}

/// Convenience: solve a DIMACS-style clause set.
pub fn solve_clauses(
    num_vars: usize,
    clauses: &[Vec<i32>],
    cancel: Option<&AtomicBool>,
) -> Result<SatOutcome> {
    CdclSolver::from_dimacs_clauses(num_vars, clauses).solve(cancel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_sat(num_vars: usize, clauses: &[Vec<i32>]) -> bool {
        match solve_clauses(num_vars, clauses, None).unwrap() {
            SatOutcome::Sat(model) => {
                // model must actually satisfy every clause
                for c in clauses {
                    assert!(
                        c.iter().any(|&l| model[(l.unsigned_abs() - 1) as usize] == (l > 0)),
                        "model does not satisfy {c:?}"
                    );
                }
                true
            }
            SatOutcome::Unsat => false,
        }
    }

    #[test]
    fn trivial_cases() {
        assert!(is_sat(1, &[vec![1]]));
        assert!(is_sat(1, &[vec![-1]]));
        assert!(!is_sat(1, &[vec![1], vec![-1]]));
        assert!(is_sat(2, &[vec![1, 2], vec![-1, 2], vec![1, -2]]));
        assert!(!is_sat(2, &[vec![1, 2], vec![-1, 2], vec![1, -2], vec![-1, -2]]));
    }

    #[test]
    fn empty_clause_is_unsat() {
        assert!(!is_sat(1, &[vec![]]));
    }

    #[test]
    fn pigeonhole_3_into_2_unsat() {
        // p(i,j): pigeon i in hole j; vars 1..=6
        let v = |i: usize, j: usize| (i * 2 + j + 1) as i32;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        for i in 0..3 {
            clauses.push(vec![v(i, 0), v(i, 1)]);
        }
        for j in 0..2 {
            for i1 in 0..3 {
                for i2 in (i1 + 1)..3 {
                    clauses.push(vec![-v(i1, j), -v(i2, j)]);
                }
            }
        }
        assert!(!is_sat(6, &clauses));
    }

    #[test]
    fn pigeonhole_5_into_4_unsat() {
        let v = |i: usize, j: usize| (i * 4 + j + 1) as i32;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        for i in 0..5 {
            clauses.push((0..4).map(|j| v(i, j)).collect());
        }
        for j in 0..4 {
            for i1 in 0..5 {
                for i2 in (i1 + 1)..5 {
                    clauses.push(vec![-v(i1, j), -v(i2, j)]);
                }
            }
        }
        assert!(!is_sat(20, &clauses));
    }

    /// Randomized 3-SAT cross-check against exhaustive truth-table search.
    #[test]
    fn random_3sat_matches_enumeration() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0x5EED);
        for _ in 0..300 {
            let n = rng.random_range(3..=10usize);
            let m = rng.random_range(1..=(4 * n));
            let clauses: Vec<Vec<i32>> = (0..m)
                .map(|_| {
                    (0..3)
                        .map(|_| {
                            let v = rng.random_range(1..=n) as i32;
                            if rng.random_bool(0.5) {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let brute = (0..1u32 << n).any(|bits| {
                clauses.iter().all(|c| {
                    c.iter().any(|&l| {
                        let val = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                        val == (l > 0)
                    })
                })
            });
            assert_eq!(is_sat(n, &clauses), brute);
        }
    }
}
