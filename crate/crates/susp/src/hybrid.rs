//! The production verifier: staged heuristics, exact algorithms picked by
//! size, and a two-backend race for everything the cheap stages cannot
//! settle.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use crate::heuristics::{
    default_greedy_attempts, heuristic_downward_closed, heuristic_greedy,
    heuristic_unique_pieces, Verdict,
};
use crate::puzzle::Puzzle;
use crate::solver::SolverBackend;
use crate::verify::{
    verify_brute_force, verify_dp, verify_ip_cancelable, verify_sat_cancelable,
};
use crate::{Error, Result};

/// How stage six resolves instances the heuristics left undecided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaceMode {
    /// SAT and IP concurrently; first definitive result wins, loser is
    /// canceled.
    Race,
    /// SAT first, IP only if SAT fails.
    Serial,
    SatOnly,
    IpOnly,
}

#[derive(Debug, Clone)]
pub struct HybridConfig {
    /// Run plain brute force at or below this size.
    pub bf_max_size: usize,
    /// Run the meet-in-the-middle DP at or below this size.
    pub dp_max_size: usize,
    pub use_unique_pieces: bool,
    pub use_downward_closed: bool,
    pub downward_subset: usize,
    pub use_greedy: bool,
    /// Greedy attempt budget; default `s^2`.
    pub greedy_attempts: Option<usize>,
    pub greedy_seed: u64,
    pub race: RaceMode,
    pub sat_backend: SolverBackend,
    pub ip_backend: SolverBackend,
}

impl Default for HybridConfig {
    fn default() -> Self {
        // size thresholds were tuned experimentally in the k <= 8 regime
        HybridConfig {
            bf_max_size: 2,
            dp_max_size: 7,
            use_unique_pieces: true,
            use_downward_closed: true,
            downward_subset: 3,
            use_greedy: true,
            greedy_attempts: None,
            greedy_seed: 0,
            race: RaceMode::Race,
            sat_backend: SolverBackend::Internal,
            ip_backend: SolverBackend::Internal,
        }
    }
}

/// Which stage produced the verdict. Reported for telemetry; never affects
/// the verdict itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    BruteForce,
    UniquePieces,
    Dp,
    DownwardClosed,
    Greedy,
    Sat,
    Ip,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::BruteForce => "brute-force",
            Stage::UniquePieces => "unique-pieces",
            Stage::Dp => "dp",
            Stage::DownwardClosed => "downward-closed",
            Stage::Greedy => "greedy",
            Stage::Sat => "sat",
            Stage::Ip => "ip",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub is_susp: bool,
    pub stage: Stage,
}

/// Exact SUSP verdict via the staged pipeline.
pub fn verify(p: &Puzzle, cfg: &HybridConfig) -> Result<bool> {
    verify_with_stage(p, cfg).map(|o| o.is_susp)
}

pub fn verify_with_stage(p: &Puzzle, cfg: &HybridConfig) -> Result<Outcome> {
    let s = p.size();

    if s <= cfg.bf_max_size {
        return Ok(Outcome { is_susp: verify_brute_force(p), stage: Stage::BruteForce });
    }
    if cfg.use_unique_pieces && heuristic_unique_pieces(p) == Verdict::NotSusp {
        return Ok(Outcome { is_susp: false, stage: Stage::UniquePieces });
    }
    if s <= cfg.dp_max_size {
        return Ok(Outcome { is_susp: verify_dp(p)?, stage: Stage::Dp });
    }
    if cfg.use_downward_closed
        && heuristic_downward_closed(p, cfg.downward_subset)? == Verdict::NotSusp
    {
        return Ok(Outcome { is_susp: false, stage: Stage::DownwardClosed });
    }
    if cfg.use_greedy {
        let attempts = cfg.greedy_attempts.unwrap_or_else(|| default_greedy_attempts(s));
        if heuristic_greedy(p, attempts, cfg.greedy_seed) == Verdict::NotSusp {
            return Ok(Outcome { is_susp: false, stage: Stage::Greedy });
        }
    }
    race(p, cfg)
}

fn race(p: &Puzzle, cfg: &HybridConfig) -> Result<Outcome> {
    match cfg.race {
        RaceMode::SatOnly => verify_sat_cancelable(p, &cfg.sat_backend, None)
            .map(|is_susp| Outcome { is_susp, stage: Stage::Sat }),
        RaceMode::IpOnly => verify_ip_cancelable(p, &cfg.ip_backend, None)
            .map(|is_susp| Outcome { is_susp, stage: Stage::Ip }),
        RaceMode::Serial => match verify_sat_cancelable(p, &cfg.sat_backend, None) {
            Ok(is_susp) => Ok(Outcome { is_susp, stage: Stage::Sat }),
            Err(sat_err) => verify_ip_cancelable(p, &cfg.ip_backend, None)
                .map(|is_susp| Outcome { is_susp, stage: Stage::Ip })
                .map_err(|ip_err| both_failed(&sat_err, &ip_err)),
        },
        RaceMode::Race => {
            let cancel = AtomicBool::new(false);
            let (tx, rx) = mpsc::channel();
            std::thread::scope(|scope| {
                let tx_sat = tx.clone();
                let cancel_ref = &cancel;
                scope.spawn(move || {
                    let r = verify_sat_cancelable(p, &cfg.sat_backend, Some(cancel_ref));
                    let _ = tx_sat.send((Stage::Sat, r));
                });
                scope.spawn(move || {
                    let r = verify_ip_cancelable(p, &cfg.ip_backend, Some(cancel_ref));
                    let _ = tx.send((Stage::Ip, r));
                });

                let (stage, first) = rx.recv().expect("racer vanished");
                match first {
                    Ok(is_susp) => {
                        // first definitive result wins; tell the loser to stop
                        cancel.store(true, Ordering::Relaxed);
                        Ok(Outcome { is_susp, stage })
                    }
                    Err(first_err) => match rx.recv() {
                        Ok((stage2, Ok(is_susp))) => Ok(Outcome { is_susp, stage: stage2 }),
                        Ok((_, Err(second_err))) => Err(both_failed(&first_err, &second_err)),
                        Err(_) => Err(first_err),
                    },
                }
            })
        }
    }
}

fn both_failed(a: &Error, b: &Error) -> Error {
    Error::SolverCrash(format!("both verification routes failed: {a}; {b}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    #[test]
    fn quartet_with_stages() {
        let cfg = HybridConfig::default();
        let o = verify_with_stage(&puzzle("32"), &cfg).unwrap();
        assert!(o.is_susp);
        assert_eq!(o.stage, Stage::BruteForce);
        assert!(verify(&puzzle("12\n23"), &cfg).unwrap());
        assert!(!verify(&puzzle("12\n32"), &cfg).unwrap());
        assert!(!verify(&puzzle("23\n32"), &cfg).unwrap());
    }

    #[test]
    fn matches_brute_force_exhaustively_small() {
        let cfg = HybridConfig::default();
        for s in 1..=4usize {
            crate::util::for_each_combination(9, s, |idx| {
                let codes: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
                let p = Puzzle::from_codes(2, &codes).unwrap();
                assert_eq!(verify(&p, &cfg).unwrap(), verify_brute_force(&p), "{p:?}");
            });
        }
    }

    #[test]
    fn race_winner_does_not_change_verdict() {
        let mut rng = StdRng::seed_from_u64(99);
        // force the race stage by disabling the earlier exact stages
        let base = HybridConfig {
            bf_max_size: 0,
            dp_max_size: 0,
            use_unique_pieces: false,
            use_downward_closed: false,
            use_greedy: false,
            ..HybridConfig::default()
        };
        for _ in 0..50 {
            let k = rng.random_range(2..=4usize);
            let smax = 3usize.pow(k as u32).min(6);
            let s = rng.random_range(1..=smax);
            let mut codes = std::collections::BTreeSet::new();
            while codes.len() < s {
                codes.insert(rng.random_range(0..3u32.pow(k as u32)));
            }
            let p = Puzzle::from_codes(k, &codes.into_iter().collect::<Vec<_>>()).unwrap();
            let sat_only = verify(&p, &HybridConfig { race: RaceMode::SatOnly, ..base.clone() });
            let ip_only = verify(&p, &HybridConfig { race: RaceMode::IpOnly, ..base.clone() });
            let raced = verify(&p, &HybridConfig { race: RaceMode::Race, ..base.clone() });
            let serial = verify(&p, &HybridConfig { race: RaceMode::Serial, ..base.clone() });
            let expect = verify_brute_force(&p);
            assert_eq!(sat_only.unwrap(), expect);
            assert_eq!(ip_only.unwrap(), expect);
            assert_eq!(raced.unwrap(), expect);
            assert_eq!(serial.unwrap(), expect);
        }
    }

    #[test]
    fn stage_telemetry_heuristic_rejections() {
        // a size-8 puzzle with duplicate 3-supports dies at unique pieces
        let p = puzzle("11\n12\n21\n22\n13\n23\n31\n32");
        let o = verify_with_stage(&p, &HybridConfig::default()).unwrap();
        assert!(!o.is_susp);
        assert_eq!(o.stage, Stage::UniquePieces);
    }
}
