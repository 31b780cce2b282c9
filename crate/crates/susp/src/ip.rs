//! Integer-programming encoding of non-trivial 3D matching, with an
//! LP-format writer. One binary variable per hypergraph edge, three
//! exactly-one constraint families (one per vertex slice), and a single
//! cardinality constraint excluding the all-diagonal matching. The model is
//! feasible iff the puzzle is not a strong USP.

use crate::matching::MatchingInstance;
use crate::puzzle::Puzzle;

#[derive(Debug, Clone)]
pub struct IpModel {
    size: usize,
    /// Edge triples in ascending lexicographic order; one binary variable
    /// each. Non-edges get no variable at all.
    pub variables: Vec<(usize, usize, usize)>,
}

impl IpModel {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Exactly-one per vertex in each of the three slices, plus the
    /// diagonal cardinality cut.
    pub fn constraint_count(&self) -> usize {
        3 * self.size + 1
    }

    /// Rebuild the matching instance the model encodes.
    pub fn instance(&self) -> MatchingInstance {
        MatchingInstance::from_edges(self.size, &self.variables)
    }
}

pub fn build_ip(p: &Puzzle) -> IpModel {
    let inst = MatchingInstance::from_puzzle(p);
    build_ip_from_instance(&inst)
}

pub fn build_ip_from_instance(inst: &MatchingInstance) -> IpModel {
    assert!(inst.size() >= 1, "IP encoding needs at least one row");
    IpModel { size: inst.size(), variables: inst.edges() }
}

fn var_name(u: usize, v: usize, w: usize) -> String {
    format!("M_{}_{}_{}", u + 1, v + 1, w + 1)
}

/// Serialize in LP format, byte-identical across runs. Constraint order:
/// first-slice equalities, second, third, then the diagonal inequality.
pub fn emit_lp(m: &IpModel) -> String {
    let s = m.size;
    let mut out = String::new();
    out.push_str("Minimize\n obj: 0\nSubject To\n");

    let term_sum = |vars: &[(usize, usize, usize)]| {
        vars.iter()
            .map(|&(u, v, w)| var_name(u, v, w))
            .collect::<Vec<_>>()
            .join(" + ")
    };

    for u in 0..s {
        let vars: Vec<_> = m.variables.iter().copied().filter(|&(a, _, _)| a == u).collect();
        out.push_str(&format!(" u{}: {} = 1\n", u + 1, term_sum(&vars)));
    }
    for v in 0..s {
        let vars: Vec<_> = m.variables.iter().copied().filter(|&(_, b, _)| b == v).collect();
        out.push_str(&format!(" v{}: {} = 1\n", v + 1, term_sum(&vars)));
    }
    for w in 0..s {
        let vars: Vec<_> = m.variables.iter().copied().filter(|&(_, _, c)| c == w).collect();
        out.push_str(&format!(" w{}: {} = 1\n", w + 1, term_sum(&vars)));
    }

    let diag: Vec<_> = m.variables.iter().copied().filter(|&(u, v, w)| u == v && v == w).collect();
    out.push_str(&format!(" nontrivial: {} <= {}\n", term_sum(&diag), s - 1));

    out.push_str("Binary\n");
    for &(u, v, w) in &m.variables {
        out.push(' ');
        out.push_str(&var_name(u, v, w));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::find_nontrivial_matching;

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    #[test]
    fn single_row_model() {
        let m = build_ip(&puzzle("32"));
        assert_eq!(m.variables, vec![(0, 0, 0)]);
        assert_eq!(m.constraint_count(), 4);
        // M_1_1_1 = 1 three times and M_1_1_1 <= 0: infeasible
        assert!(find_nontrivial_matching(&m.instance()).is_none());
    }

    #[test]
    fn nonsusp_pair_is_feasible() {
        let m = build_ip(&puzzle("23\n32"));
        assert!(find_nontrivial_matching(&m.instance()).is_some());
    }

    #[test]
    fn constraint_count_is_3s_plus_1() {
        for text in ["32", "12\n23", "112\n231\n323"] {
            let p = puzzle(text);
            assert_eq!(build_ip(&p).constraint_count(), 3 * p.size() + 1);
        }
    }

    #[test]
    fn lp_emission_deterministic() {
        let m = build_ip(&puzzle("12\n23"));
        assert_eq!(emit_lp(&m), emit_lp(&m));
    }

    #[test]
    fn lp_single_row_has_four_constraint_lines() {
        let text = emit_lp(&build_ip(&puzzle("32")));
        let constraints: Vec<&str> = text
            .lines()
            .skip_while(|l| *l != "Subject To")
            .skip(1)
            .take_while(|l| *l != "Binary")
            .collect();
        assert_eq!(constraints.len(), 4);
        assert_eq!(constraints[0], " u1: M_1_1_1 = 1");
        assert_eq!(constraints[3], " nontrivial: M_1_1_1 <= 0");
    }
}
