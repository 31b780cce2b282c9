//! Benchmark instance generation, a solver timing harness with relative
//! scoring, and the random-puzzle performance sweep.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cnf::{build_cnf, emit_dimacs, parse_dimacs};
use crate::heuristics::{
    default_greedy_attempts, heuristic_downward_closed, heuristic_greedy,
    heuristic_unique_pieces, Verdict,
};
use crate::hybrid::{self, HybridConfig, Stage};
use crate::puzzle::Puzzle;
use crate::sat::{solve_clauses, SatOutcome};
use crate::solver::{run_external, SolverBackend};
use crate::{Error, Result};

/// The benchmark sizes used when the witness library covers them all.
pub const DEFAULT_SIZES: [(usize, usize); 8] =
    [(2, 2), (3, 3), (5, 4), (8, 5), (14, 6), (21, 7), (30, 8), (42, 9)];

pub const DEFAULT_PER_CLASS: usize = 10;

/// Uniform random puzzle: s distinct rows drawn from the 3^k codes.
pub fn random_puzzle(rng: &mut StdRng, s: usize, k: usize) -> Puzzle {
    let n = 3u32.pow(k as u32);
    assert!(s as u32 <= n, "cannot draw {s} distinct rows at width {k}");
    let mut codes = std::collections::BTreeSet::new();
    while codes.len() < s {
        codes.insert(rng.random_range(0..n));
    }
    Puzzle::from_codes(k, &codes.into_iter().collect::<Vec<_>>()).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchEntry {
    /// Path of the `.dimacs` instance, relative to the manifest.
    pub path: String,
    pub s: usize,
    pub k: usize,
    /// Expected solver outcome: SAT instances come from non-SUSPs.
    pub expect_sat: bool,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<BenchEntry>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            let label = if e.expect_sat { "SAT" } else { "UNSAT" };
            out.push_str(&format!("{} {} {} {}\n", e.path, e.s, e.k, label));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Invalid(format!("manifest line {}: {line:?}", i + 1)));
            }
            let expect_sat = match parts[3] {
                "SAT" => true,
                "UNSAT" => false,
                other => {
                    return Err(Error::Invalid(format!("manifest label {other:?}")));
                }
            };
            entries.push(BenchEntry {
                path: parts[0].to_string(),
                s: parts[1].parse().map_err(|_| Error::Invalid(format!("bad s: {line}")))?,
                k: parts[2].parse().map_err(|_| Error::Invalid(format!("bad k: {line}")))?,
                expect_sat,
            });
        }
        Ok(Manifest { base_dir, entries })
    }

    pub fn instance_path(&self, entry: &BenchEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }
}

/// Read every `*.puz` under `dir` (recursively) and group by (s, k).
pub fn load_witnesses(dir: &Path) -> Result<BTreeMap<(usize, usize), Vec<Puzzle>>> {
    let mut out: BTreeMap<(usize, usize), Vec<Puzzle>> = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "puz") {
                let p = Puzzle::parse(&std::fs::read_to_string(&path)?)?;
                out.entry((p.size(), p.width())).or_default().push(p);
            }
        }
    }
    for list in out.values_mut() {
        list.sort_by_key(|p| p.serialize());
        list.dedup();
    }
    Ok(out)
}

/// Generate the benchmark: for every requested (s,k), `per_class` strong
/// USPs from the witness library (UNSAT instances) and `per_class`
/// verified random non-SUSPs (SAT instances), as `.puz`/`.dimacs` pairs
/// plus a manifest with expected labels. Every emitted label is checked at
/// generation time.
pub fn generate(
    sizes: &[(usize, usize)],
    witness_dir: &Path,
    out_dir: &Path,
    per_class: usize,
    seed: u64,
    cfg: &HybridConfig,
) -> Result<Manifest> {
    let library = load_witnesses(witness_dir)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut entries = Vec::new();
    std::fs::create_dir_all(out_dir)?;

    for &(s, k) in sizes {
        let empty = Vec::new();
        let candidates = library.get(&(s, k)).unwrap_or(&empty);
        let mut susps = Vec::new();
        for p in candidates {
            if hybrid::verify(p, cfg)? {
                susps.push(p.clone());
                if susps.len() == per_class {
                    break;
                }
            }
        }
        if susps.len() < per_class {
            return Err(Error::InsufficientWitnesses {
                s,
                k,
                need: per_class,
                found: susps.len(),
            });
        }

        let sub = out_dir.join(format!("{s}x{k}"));
        std::fs::create_dir_all(&sub)?;
        for (i, p) in susps.iter().enumerate() {
            entries.push(write_instance(out_dir, &sub, &format!("susp_{i:02}"), p, false)?);
        }
        for i in 0..per_class {
            // rejection-sample a verified non-SUSP
            let p = loop {
                let candidate = random_puzzle(&mut rng, s, k);
                if !hybrid::verify(&candidate, cfg)? {
                    break candidate;
                }
            };
            entries.push(write_instance(out_dir, &sub, &format!("rand_{i:02}"), &p, true)?);
        }
    }

    let manifest = Manifest { base_dir: out_dir.to_path_buf(), entries };
    manifest.save(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

fn write_instance(
    out_dir: &Path,
    sub: &Path,
    stem: &str,
    p: &Puzzle,
    expect_sat: bool,
) -> Result<BenchEntry> {
    std::fs::write(sub.join(format!("{stem}.puz")), p.serialize())?;
    let dimacs = sub.join(format!("{stem}.dimacs"));
    std::fs::write(&dimacs, emit_dimacs(&build_cnf(p)))?;
    let rel = dimacs
        .strip_prefix(out_dir)
        .expect("instance under out_dir")
        .to_string_lossy()
        .into_owned();
    Ok(BenchEntry { path: rel, s: p.size(), k: p.width(), expect_sat })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunStatus {
    Done { sat: bool },
    Timeout,
    Crash(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub path: String,
    pub s: usize,
    pub k: usize,
    pub expect_sat: bool,
    pub seconds: f64,
    pub status: RunStatus,
    pub mismatch: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingTable {
    pub solver: String,
    pub timeout_s: f64,
    pub rows: Vec<TimingRow>,
}

/// Run one solver over the whole manifest, recording wall-clock time per
/// instance (the configured timeout for timeouts) and checking each
/// reported answer against the expected label. Crashes are recorded and
/// the run continues.
pub fn run(
    manifest: &Manifest,
    solver_name: &str,
    backend: &SolverBackend,
    timeout: Duration,
) -> Result<TimingTable> {
    let mut rows = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let path = manifest.instance_path(entry);
        let start = Instant::now();
        let outcome = solve_dimacs_instance(&path, backend, timeout);
        let elapsed = start.elapsed().as_secs_f64();
        let (status, seconds) = match outcome {
            Ok(sat) => (RunStatus::Done { sat }, elapsed),
            Err(Error::SolverTimeout(_)) => (RunStatus::Timeout, timeout.as_secs_f64()),
            Err(e) => (RunStatus::Crash(e.to_string()), timeout.as_secs_f64()),
        };
        let mismatch = matches!(status, RunStatus::Done { sat } if sat != entry.expect_sat);
        rows.push(TimingRow {
            path: entry.path.clone(),
            s: entry.s,
            k: entry.k,
            expect_sat: entry.expect_sat,
            seconds,
            status,
            mismatch,
        });
    }
    Ok(TimingTable {
        solver: solver_name.to_string(),
        timeout_s: timeout.as_secs_f64(),
        rows,
    })
}

/// Decide one `.dimacs` file with the given backend; internal runs
/// timeout-less (callers bound it with the race machinery if they care).
fn solve_dimacs_instance(
    path: &Path,
    backend: &SolverBackend,
    _timeout: Duration,
) -> Result<bool> {
    match backend {
        SolverBackend::Internal => {
            let (vars, clauses) = parse_dimacs(&std::fs::read_to_string(path)?)?;
            match solve_clauses(vars, &clauses, None)? {
                SatOutcome::Sat(_) => Ok(true),
                SatOutcome::Unsat => Ok(false),
            }
        }
        SolverBackend::External(cfg) => match run_external(cfg, path, None)? {
            crate::solver::SolveStatus::Positive => Ok(true),
            crate::solver::SolveStatus::Negative => Ok(false),
        },
    }
}

const TIMING_CSV_HEADER: &str = "path,s,k,expect,seconds,status,mismatch";

pub fn timing_to_csv(t: &TimingTable) -> String {
    let mut out = format!("# solver={} timeout_s={}\n{TIMING_CSV_HEADER}\n", t.solver, t.timeout_s);
    for r in &t.rows {
        let status = match &r.status {
            RunStatus::Done { sat: true } => "SAT".to_string(),
            RunStatus::Done { sat: false } => "UNSAT".to_string(),
            RunStatus::Timeout => "TIMEOUT".to_string(),
            RunStatus::Crash(_) => "CRASH".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{:.6},{},{}\n",
            r.path,
            r.s,
            r.k,
            if r.expect_sat { "SAT" } else { "UNSAT" },
            r.seconds,
            status,
            r.mismatch
        ));
    }
    out
}

pub fn timing_from_csv(text: &str) -> Result<TimingTable> {
    let mut solver = String::from("unknown");
    let mut timeout_s = 0.0f64;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            for part in rest.split_whitespace() {
                if let Some(v) = part.strip_prefix("solver=") {
                    solver = v.to_string();
                } else if let Some(v) = part.strip_prefix("timeout_s=") {
                    timeout_s = v.parse().unwrap_or(0.0);
                }
            }
            continue;
        }
        if line.trim().is_empty() || line == TIMING_CSV_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Invalid(format!("bad timing row: {line:?}")));
        }
        let status = match f[5] {
            "SAT" => RunStatus::Done { sat: true },
            "UNSAT" => RunStatus::Done { sat: false },
            "TIMEOUT" => RunStatus::Timeout,
            "CRASH" => RunStatus::Crash(String::new()),
            other => return Err(Error::Invalid(format!("bad status {other:?}"))),
        };
        rows.push(TimingRow {
            path: f[0].to_string(),
            s: f[1].parse().map_err(|_| Error::Invalid(format!("bad s in {line:?}")))?,
            k: f[2].parse().map_err(|_| Error::Invalid(format!("bad k in {line:?}")))?,
            expect_sat: f[3] == "SAT",
            seconds: f[4].parse().map_err(|_| Error::Invalid(format!("bad time in {line:?}")))?,
            status,
            mismatch: f[6] == "true",
        });
    }
    Ok(TimingTable { solver, timeout_s, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverScore {
    pub solver: String,
    pub sat_score: f64,
    pub unsat_score: f64,
    pub total: f64,
    pub timeouts: usize,
    pub mismatches: usize,
}

/// Relative scoring: per instance, each solver's time divided by the
/// maximum time any solver spent on it; scores sum those ratios (lower is
/// better, at most the instance count).
pub fn score(tables: &[TimingTable]) -> Vec<SolverScore> {
    let mut max_per_instance: BTreeMap<&str, f64> = BTreeMap::new();
    for t in tables {
        for r in &t.rows {
            let e = max_per_instance.entry(r.path.as_str()).or_insert(0.0);
            *e = e.max(r.seconds);
        }
    }
    tables
        .iter()
        .map(|t| {
            let mut sat_score = 0.0;
            let mut unsat_score = 0.0;
            let mut timeouts = 0;
            let mut mismatches = 0;
            for r in &t.rows {
                let max = max_per_instance[r.path.as_str()];
                let rel = if max > 0.0 { r.seconds / max } else { 1.0 };
                if r.expect_sat {
                    sat_score += rel;
                } else {
                    unsat_score += rel;
                }
                if matches!(r.status, RunStatus::Timeout) {
                    timeouts += 1;
                }
                mismatches += r.mismatch as usize;
            }
            SolverScore {
                solver: t.solver.clone(),
                sat_score,
                unsat_score,
                total: sat_score + unsat_score,
                timeouts,
                mismatches,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s: usize,
    pub k: usize,
    pub n: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub q1_s: f64,
    pub q3_s: f64,
    pub not_susp: u64,
    /// Independent per-heuristic rejection counts.
    pub unique_reject: u64,
    pub dc2_reject: u64,
    pub dc3_reject: u64,
    pub greedy_reject: u64,
    /// Which hybrid stage decided, by stage name.
    pub stage_counts: BTreeMap<&'static str, u64>,
}

/// Time the hybrid verifier on n random puzzles per grid point and record
/// stage telemetry plus per-heuristic success counts.
pub fn sweep(
    s_values: &[usize],
    k_values: &[usize],
    n: usize,
    seed: u64,
    cfg: &HybridConfig,
    measure_heuristics: bool,
) -> Result<Vec<SweepRow>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &k in k_values {
        for &s in s_values {
            if s as u64 > 3u64.pow(k as u32) {
                continue;
            }
            let mut times = Vec::with_capacity(n);
            let mut stage_counts: BTreeMap<&'static str, u64> = BTreeMap::new();
            let mut not_susp = 0u64;
            let (mut unique_reject, mut dc2, mut dc3, mut greedy_reject) = (0u64, 0u64, 0u64, 0u64);
            for _ in 0..n {
                let p = random_puzzle(&mut rng, s, k);
                let start = Instant::now();
                let outcome = hybrid::verify_with_stage(&p, cfg)?;
                times.push(start.elapsed().as_secs_f64());
                *stage_counts.entry(outcome.stage.name()).or_insert(0) += 1;
                not_susp += !outcome.is_susp as u64;
                if measure_heuristics {
                    unique_reject +=
                        (heuristic_unique_pieces(&p) == Verdict::NotSusp) as u64;
                    if s >= 2 {
                        dc2 += (heuristic_downward_closed(&p, 2)? == Verdict::NotSusp) as u64;
                    }
                    if s >= 3 {
                        dc3 += (heuristic_downward_closed(&p, 3)? == Verdict::NotSusp) as u64;
                    }
                    greedy_reject += (heuristic_greedy(&p, default_greedy_attempts(s), seed)
                        == Verdict::NotSusp) as u64;
                }
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let quantile = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize];
            rows.push(SweepRow {
                s,
                k,
                n,
                mean_s: mean,
                median_s: quantile(0.5),
                q1_s: quantile(0.25),
                q3_s: quantile(0.75),
                not_susp,
                unique_reject,
                dc2_reject: dc2,
                dc3_reject: dc3,
                greedy_reject,
                stage_counts,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let stages: Vec<&'static str> = [
        Stage::BruteForce,
        Stage::UniquePieces,
        Stage::Dp,
        Stage::DownwardClosed,
        Stage::Greedy,
        Stage::Sat,
        Stage::Ip,
    ]
    .iter()
    .map(|s| s.name())
    .collect();
    let mut out = String::from("s,k,n,mean_s,median_s,q1_s,q3_s,not_susp,unique_reject,dc2_reject,dc3_reject,greedy_reject");
    for st in &stages {
        out.push_str(&format!(",stage_{st}"));
    }
    out.push('\n');
    for r in rows {
        let mut line = format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{}",
            r.s,
            r.k,
            r.n,
            r.mean_s,
            r.median_s,
            r.q1_s,
            r.q3_s,
            r.not_susp,
            r.unique_reject,
            r.dc2_reject,
            r.dc3_reject,
            r.greedy_reject
        );
        for st in &stages {
            line.push_str(&format!(",{}", r.stage_counts.get(st).copied().unwrap_or(0)));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Write a small witness library (searched class representatives) as
/// `.puz` files under `dir/<s>x<k>/`.
pub fn dump_witnesses(
    dir: &Path,
    width: usize,
    witnesses: &BTreeMap<usize, Vec<String>>,
) -> Result<usize> {
    let mut written = 0;
    for (&s, lines) in witnesses {
        let sub = dir.join(format!("{s}x{width}"));
        std::fs::create_dir_all(&sub)?;
        for (i, line) in lines.iter().enumerate() {
            let p = crate::search::parse_row_list(line)?;
            let mut f = std::fs::File::create(sub.join(format!("w{i:03}.puz")))?;
            f.write_all(p.serialize().as_bytes())?;
            written += 1;
        }
    }
    Ok(written)
}
