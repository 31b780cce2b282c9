//! Strong uniquely solvable puzzles: verification, exhaustive search, and
//! size bounds.
//!
//! A width-`k` puzzle is a set of distinct rows over the alphabet `{1,2,3}`.
//! Strong unique solvability is decided by reduction to non-trivial 3D
//! matching on a tripartite hypergraph built from the puzzle; this crate
//! implements four exact verifiers (brute force, meet-in-the-middle DP, SAT,
//! IP), three one-sided heuristics, a staged hybrid verifier, a
//! symmetry-pruned breadth-first search over isomorphism classes, and the
//! classical upper bounds on puzzle size together with the implied matrix
//! multiplication exponent.

pub mod bench;
pub mod bounds;
pub mod clique;
pub mod cnf;
pub mod heuristics;
pub mod hybrid;
pub mod ip;
pub mod matching;
pub mod puzzle;
pub mod sat;
pub mod search;
pub mod solver;
pub mod verify;

mod error;
mod util;

pub use error::Error;
pub use heuristics::Verdict;
pub use hybrid::{HybridConfig, Stage};
pub use puzzle::{CanonicalForm, Puzzle, Row};

pub type Result<T> = std::result::Result<T, Error>;
