//! CNF encoding of "the matching instance has a non-trivial 3D matching",
//! with a bit-exact DIMACS emitter and a small DIMACS parser for running
//! benchmark instances back through the internal solver.
//!
//! Variables pair each first-slice vertex `u` with its second- and
//! third-slice partners: `M1[u][v] -> u*s+v+1`, `M2[u][w] -> s*s+u*s+w+1`.
//! The formula is satisfiable iff the puzzle is not a strong USP.

use crate::matching::{Matching, MatchingInstance};
use crate::puzzle::Puzzle;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CnfFormula {
    size: usize,
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn size(&self) -> usize {
        self.size
    }

    /// DIMACS literal for `M1[u][v]`.
    pub fn m1(&self, u: usize, v: usize) -> i32 {
        (u * self.size + v + 1) as i32
    }

    /// DIMACS literal for `M2[u][w]`.
    pub fn m2(&self, u: usize, w: usize) -> i32 {
        (self.size * self.size + u * self.size + w + 1) as i32
    }

    /// Decode a satisfying assignment (indexed by variable, `model[var-1]`)
    /// into the matching it encodes.
    pub fn decode_matching(&self, model: &[bool]) -> Option<Matching> {
        let s = self.size;
        let mut triples = Vec::with_capacity(s);
        for u in 0..s {
            let v = (0..s).find(|&v| model[(self.m1(u, v) - 1) as usize])?;
            let w = (0..s).find(|&w| model[(self.m2(u, w) - 1) as usize])?;
            triples.push((v, w));
        }
        Some(Matching { triples })
    }
}

/// Build the four clause groups in fixed order: non-edge exclusions, cover
/// ("at least one") clauses, conflict ("at most one") clauses, and the
/// single non-triviality clause.
pub fn build_cnf(p: &Puzzle) -> CnfFormula {
    let inst = MatchingInstance::from_puzzle(p);
    build_cnf_from_instance(&inst)
}

pub fn build_cnf_from_instance(inst: &MatchingInstance) -> CnfFormula {
    let s = inst.size();
    assert!(s >= 1, "CNF encoding needs at least one row");
    let mut f = CnfFormula { size: s, num_vars: 2 * s * s, clauses: Vec::new() };

    // Non-edges, lexicographic (u, v, w).
    for u in 0..s {
        for v in 0..s {
            for w in 0..s {
                if !inst.edge(u, v, w) {
                    f.clauses.push(vec![-f.m1(u, v), -f.m2(u, w)]);
                }
            }
        }
    }

    // Every vertex covered: per-u row clauses, then v covers, then w covers.
    for u in 0..s {
        f.clauses.push((0..s).map(|v| f.m1(u, v)).collect());
        f.clauses.push((0..s).map(|w| f.m2(u, w)).collect());
    }
    for v in 0..s {
        f.clauses.push((0..s).map(|u| f.m1(u, v)).collect());
    }
    for w in 0..s {
        f.clauses.push((0..s).map(|u| f.m2(u, w)).collect());
    }

    // At most one: each conflicting unordered pair sharing a coordinate,
    // emitted once. Same-u pairs first, then same-partner pairs.
    for i in 0..2 {
        let lit = |f: &CnfFormula, u: usize, v: usize| {
            if i == 0 {
                f.m1(u, v)
            } else {
                f.m2(u, v)
            }
        };
        for u in 0..s {
            for v in 0..s {
                for v2 in (v + 1)..s {
                    let c = vec![-lit(&f, u, v), -lit(&f, u, v2)];
                    f.clauses.push(c);
                }
            }
        }
        for v in 0..s {
            for u in 0..s {
                for u2 in (u + 1)..s {
                    let c = vec![-lit(&f, u, v), -lit(&f, u2, v)];
                    f.clauses.push(c);
                }
            }
        }
    }

    // Exclude the all-diagonal matching.
    let mut nontrivial = Vec::with_capacity(2 * s);
    for u in 0..s {
        nontrivial.push(-f.m1(u, u));
        nontrivial.push(-f.m2(u, u));
    }
    f.clauses.push(nontrivial);

    f
}

/// Expected clause count: one per non-edge, `4s` covers, `2s^2(s-1)`
/// conflicts, one non-triviality clause.
pub fn expected_clause_count(s: usize, non_edges: usize) -> usize {
    non_edges + 4 * s + 2 * s * s * (s - 1) + 1
}

/// Serialize in DIMACS CNF format, byte-identical across runs: header
/// `p cnf <vars> <clauses>`, one clause per line in build order, `0`
/// terminated.
pub fn emit_dimacs(f: &CnfFormula) -> String {
    let mut out = String::new();
    out.push_str(&format!("p cnf {} {}\n", f.num_vars, f.clauses.len()));
    for clause in &f.clauses {
        for lit in clause {
            out.push_str(&lit.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// Parse DIMACS CNF: `(num_vars, clauses)`. Comment lines allowed; literals
/// may span lines until the closing `0`.
pub fn parse_dimacs(text: &str) -> Result<(usize, Vec<Vec<i32>>)> {
    let mut num_vars: Option<usize> = None;
    let mut num_clauses = 0usize;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::Invalid(format!("bad DIMACS header: {line:?}")));
            }
            num_vars = Some(
                parts[2]
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad var count: {line:?}")))?,
            );
            num_clauses = parts[3]
                .parse()
                .map_err(|_| Error::Invalid(format!("bad clause count: {line:?}")))?;
            continue;
        }
        for tok in line.split_whitespace() {
            let lit: i32 =
                tok.parse().map_err(|_| Error::Invalid(format!("bad literal {tok:?}")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let num_vars = num_vars.ok_or_else(|| Error::Invalid("missing DIMACS header".into()))?;
    if clauses.len() != num_clauses {
        return Err(Error::Invalid(format!(
            "clause count mismatch: header {num_clauses}, found {}",
            clauses.len()
        )));
    }
    Ok((num_vars, clauses))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    #[test]
    fn single_row_formula() {
        let f = build_cnf(&puzzle("32"));
        assert_eq!(f.num_vars, 2);
        // only edge is the diagonal: no non-edge clauses, 4 covers, 0
        // conflicts, 1 non-trivial = 5 clauses
        assert_eq!(f.clauses.len(), 5);
        assert_eq!(f.clauses[4], vec![-1, -2]);
    }

    #[test]
    fn clause_count_formula_holds() {
        for text in ["32", "12\n32", "12\n23", "112\n231\n323", "11\n22\n33\n12"] {
            let p = puzzle(text);
            let inst = MatchingInstance::from_puzzle(&p);
            let f = build_cnf(&p);
            let s = p.size();
            assert_eq!(f.num_vars, 2 * s * s);
            assert_eq!(f.clauses.len(), expected_clause_count(s, inst.non_edges().len()));
            // final clause: 2s literals, all negative
            let last = f.clauses.last().unwrap();
            assert_eq!(last.len(), 2 * s);
            assert!(last.iter().all(|&l| l < 0));
        }
    }

    #[test]
    fn fourteen_rows_gives_392_vars() {
        // any 14 distinct width-6 rows
        let p = Puzzle::from_codes(6, &(0..14).collect::<Vec<_>>()).unwrap();
        assert_eq!(build_cnf(&p).num_vars, 392);
    }

    #[test]
    fn dimacs_deterministic_and_shaped() {
        let p = puzzle("32");
        let a = emit_dimacs(&build_cnf(&p));
        let b = emit_dimacs(&build_cnf(&p));
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], "p cnf 2 5");
        assert_eq!(lines.len(), 6, "header plus exactly 5 clause lines");
    }

    #[test]
    fn dimacs_round_trip() {
        let p = puzzle("12\n32");
        let f = build_cnf(&p);
        let (vars, clauses) = parse_dimacs(&emit_dimacs(&f)).unwrap();
        assert_eq!(vars, f.num_vars);
        assert_eq!(clauses, f.clauses);
    }
}
