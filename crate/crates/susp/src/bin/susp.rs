//! Command-line interface for strong-USP verification, search, bounds, and
//! benchmarking.
//!
//! Exit codes: `verify` exits 0 for IS_SUSP, 1 for NOT_SUSP, 2 on error;
//! every other subcommand exits 0 on success and 2 on error (including
//! usage errors). Informational output goes to stdout, errors to stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use susp::bench;
use susp::bounds::{self, BoundKind, BoundsOptions};
use susp::cnf::{build_cnf, emit_dimacs};
use susp::hybrid::{self, HybridConfig, RaceMode};
use susp::ip::{build_ip, emit_lp};
use susp::puzzle::Puzzle;
use susp::search::{self, SearchLimits};
use susp::solver::SolverBackend;
use susp::verify::{verify_brute_force, verify_dp, verify_ip, verify_sat};

/// Environment variables consulted for default external solver templates.
const ENV_SAT_SOLVER: &str = "SUSP_SAT_SOLVER";
const ENV_IP_SOLVER: &str = "SUSP_IP_SOLVER";

#[derive(Parser)]
#[command(name = "susp", version, about = "Strong uniquely solvable puzzles: verify, search, bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a puzzle file is a strong USP.
    Verify {
        /// Puzzle file (.puz text format); `-` reads stdin.
        file: String,
        /// Algorithm: bf | dp | sat | ip | hybrid.
        #[arg(long, default_value = "hybrid")]
        algo: String,
        /// SAT backend: `internal` or `cmd:<template>` ({input} = instance path).
        #[arg(long)]
        backend: Option<String>,
        /// IP backend override (defaults to the SAT backend choice).
        #[arg(long)]
        ip_backend: Option<String>,
        /// Seed for the greedy heuristic.
        #[arg(long)]
        seed: Option<u64>,
        /// External solver timeout in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        /// Run the SAT/IP stage serially instead of racing.
        #[arg(long)]
        serial: bool,
        /// Optional key=value config file (flags take precedence).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exhaustive symmetry-pruned search for maximum-size strong USPs.
    Search {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        max_size: Option<usize>,
        /// Checkpoint directory (written per level; use --resume to continue).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume from the checkpoint directory instead of starting fresh.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Abort with a partial report beyond this many frontier classes.
        #[arg(long)]
        max_frontier: Option<usize>,
        /// Canonical representatives to keep per size.
        #[arg(long, default_value_t = 16)]
        witnesses_per_size: usize,
        /// Also dump the witnesses as .puz files under this directory.
        #[arg(long)]
        witnesses_out: Option<PathBuf>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Count strong-USP isomorphism classes (and totals) per size.
    Count {
        #[arg(long)]
        width: usize,
        /// Also count total encoded SUSPs (k <= 4).
        #[arg(long)]
        totals: bool,
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Upper bounds on strong-USP size for one width.
    Bounds {
        #[arg(long)]
        width: u32,
        /// Comma-separated subset of: omega,unique,usp,clique,lift,exhaustive.
        #[arg(long, value_delimiter = ',')]
        bounds: Option<Vec<String>>,
        /// Known best bound at width-1, feeding the lift bound.
        #[arg(long)]
        prior_best: Option<u64>,
        /// Known exhaustive-search maximum for this width.
        #[arg(long)]
        exhaustive_value: Option<u64>,
        /// Time limit for the clique bound, in seconds.
        #[arg(long)]
        clique_time_limit: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// The matrix multiplication exponent bound implied by an (s,k) SUSP.
    Omega {
        #[arg(long)]
        size: u64,
        #[arg(long)]
        width: u32,
    },
    /// Write the SAT reduction of a puzzle as DIMACS CNF.
    EmitCnf {
        file: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the IP reduction of a puzzle in LP format.
    EmitIp {
        file: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the canonical representative of a puzzle's isomorphism class.
    Canon { file: String },
    /// Benchmark generation, timing runs, scoring, and the verify sweep.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Generate labeled SAT/UNSAT instances from a witness library.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Directory of .puz strong-USP witnesses (searched recursively).
        #[arg(long)]
        witnesses: PathBuf,
        /// Comma-separated sizes like `2x2,3x3,5x4`; default is the full
        /// benchmark list.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<String>>,
        /// Use only the sizes the witness library can actually supply.
        #[arg(long)]
        available_only: bool,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one solver over a generated manifest and record timings.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// `internal` or `cmd:<template>`.
        #[arg(long, default_value = "internal")]
        solver: String,
        #[arg(long, default_value_t = 5000.0)]
        timeout_s: f64,
        /// Solver name recorded in the timing table.
        #[arg(long)]
        name: Option<String>,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative scores across timing tables (lower is better).
    Score {
        /// Timing CSV files produced by `bench run`.
        #[arg(required = true)]
        tables: Vec<PathBuf>,
    },
    /// Time the hybrid verifier on random puzzles over an (s,k) grid.
    Sweep {
        /// Size range `lo-hi`.
        #[arg(long, default_value = "1-20")]
        s_range: String,
        /// Comma-separated widths.
        #[arg(long, value_delimiter = ',', default_values_t = [6usize, 9])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the independent per-heuristic telemetry (faster).
        #[arg(long)]
        no_heuristics: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn read_puzzle(file: &str) -> anyhow::Result<Puzzle> {
    let text = if file == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?
    };
    Ok(Puzzle::parse(&text)?)
}

/// Tiny key=value config file: `sat_backend`, `ip_backend`, `seed`,
/// `timeout`, `bf_max_size`, `dp_max_size`. Flags take precedence.
#[derive(Default)]
struct FileConfig {
    sat_backend: Option<String>,
    ip_backend: Option<String>,
    seed: Option<u64>,
    timeout: Option<f64>,
    bf_max_size: Option<usize>,
    dp_max_size: Option<usize>,
}

fn load_config(path: &Path) -> anyhow::Result<FileConfig> {
    let mut cfg = FileConfig::default();
    for (i, line) in std::fs::read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "sat_backend" => cfg.sat_backend = Some(value.to_string()),
            "ip_backend" => cfg.ip_backend = Some(value.to_string()),
            "seed" => cfg.seed = Some(value.parse()?),
            "timeout" => cfg.timeout = Some(value.parse()?),
            "bf_max_size" => cfg.bf_max_size = Some(value.parse()?),
            "dp_max_size" => cfg.dp_max_size = Some(value.parse()?),
            other => bail!("{}:{}: unknown key {other:?}", path.display(), i + 1),
        }
    }
    Ok(cfg)
}

fn backend_from(
    spec: Option<&str>,
    env_key: &str,
    timeout: Duration,
    lp: bool,
) -> anyhow::Result<SolverBackend> {
    let spec = match spec {
        Some(s) => s.to_string(),
        None => match std::env::var(env_key) {
            Ok(v) if !v.is_empty() => format!("cmd:{v}"),
            _ => "internal".to_string(),
        },
    };
    Ok(SolverBackend::parse_spec(&spec, timeout, lp)?)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Verify { file, algo, backend, ip_backend, seed, timeout, serial, config } => {
            let fc = match &config {
                Some(p) => load_config(p)?,
                None => FileConfig::default(),
            };
            let timeout = Duration::from_secs_f64(timeout.or(fc.timeout).unwrap_or(300.0));
            let sat_backend = backend_from(
                backend.as_deref().or(fc.sat_backend.as_deref()),
                ENV_SAT_SOLVER,
                timeout,
                false,
            )?;
            let ip_backend = backend_from(
                ip_backend.as_deref().or(fc.ip_backend.as_deref()),
                ENV_IP_SOLVER,
                timeout,
                true,
            )?;
            let mut cfg = HybridConfig {
                greedy_seed: seed.or(fc.seed).unwrap_or(0),
                sat_backend,
                ip_backend,
                race: if serial { RaceMode::Serial } else { RaceMode::Race },
                ..HybridConfig::default()
            };
            if let Some(v) = fc.bf_max_size {
                cfg.bf_max_size = v;
            }
            if let Some(v) = fc.dp_max_size {
                cfg.dp_max_size = v;
            }

            let p = read_puzzle(&file)?;
            let start = Instant::now();
            let (is_susp, stage) = match algo.as_str() {
                "bf" => (verify_brute_force(&p), "brute-force".to_string()),
                "dp" => (verify_dp(&p)?, "dp".to_string()),
                "sat" => (verify_sat(&p, &cfg.sat_backend)?, "sat".to_string()),
                "ip" => (verify_ip(&p, &cfg.ip_backend)?, "ip".to_string()),
                "hybrid" => {
                    let o = hybrid::verify_with_stage(&p, &cfg)?;
                    (o.is_susp, o.stage.name().to_string())
                }
                other => bail!("unknown algorithm {other:?} (bf|dp|sat|ip|hybrid)"),
            };
            let elapsed = start.elapsed();
            println!("{}", if is_susp { "IS_SUSP" } else { "NOT_SUSP" });
            println!("stage: {stage}");
            println!("time: {elapsed:.3?}");
            Ok(ExitCode::from(if is_susp { 0 } else { 1 }))
        }

        Command::Search {
            width,
            max_size,
            checkpoint,
            resume,
            workers,
            max_frontier,
            witnesses_per_size,
            witnesses_out,
            json,
        } => {
            let limits = SearchLimits {
                max_size,
                checkpoint_dir: checkpoint.clone(),
                workers,
                max_frontier,
                witnesses_per_size,
            };
            let cfg = HybridConfig::default();
            let report = if resume {
                let dir =
                    checkpoint.as_deref().context("--resume requires --checkpoint DIR")?;
                search::resume(dir, width, &limits, &cfg)?
            } else {
                search::sp_bfs(width, &limits, &cfg)?
            };
            if let Some(dir) = witnesses_out {
                let n = bench::dump_witnesses(&dir, width, &report.witnesses)?;
                eprintln!("wrote {n} witness puzzles under {}", dir.display());
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("max size {}", report.max_size);
                let counts: Vec<String> =
                    report.class_counts.iter().map(|(s, c)| format!("{s}: {c}")).collect();
                println!("classes: {}", counts.join(", "));
                println!("complete: {}", report.complete);
                if let Some(reason) = &report.stop_reason {
                    println!("stopped: {reason}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Count { width, totals, max_size } => {
            let cfg = HybridConfig::default();
            let report = search::sp_bfs(
                width,
                &SearchLimits { max_size, ..SearchLimits::default() },
                &cfg,
            )?;
            let total_counts: Option<BTreeMap<usize, u64>> =
                if totals { Some(search::count_total_susps(width, max_size)?) } else { None };
            println!("width {width}");
            for (s, c) in &report.class_counts {
                match &total_counts {
                    Some(t) => {
                        println!("size {s}: classes {c} total {}", t.get(s).copied().unwrap_or(0))
                    }
                    None => println!("size {s}: classes {c}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Bounds {
            width,
            bounds: kinds,
            prior_best,
            exhaustive_value,
            clique_time_limit,
            json,
        } => {
            let kinds: Vec<BoundKind> = match kinds {
                None => BoundKind::all().to_vec(),
                Some(names) => names
                    .iter()
                    .map(|n| match n.as_str() {
                        "omega" => Ok(BoundKind::Omega),
                        "unique" => Ok(BoundKind::Unique),
                        "usp" => Ok(BoundKind::Usp),
                        "clique" => Ok(BoundKind::Clique),
                        "lift" => Ok(BoundKind::Lift),
                        "exhaustive" => Ok(BoundKind::Exhaustive),
                        other => bail!("unknown bound {other:?}"),
                    })
                    .collect::<anyhow::Result<_>>()?,
            };
            let opts = BoundsOptions {
                clique_time_limit: clique_time_limit.map(Duration::from_secs_f64),
                exhaustive_value,
                prior_best,
            };
            let report = bounds::best_bounds(width, &kinds, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("width {width}");
                for (kind, e) in &report.entries {
                    let marker = if e.exact { "" } else { " (not exact: hit time limit)" };
                    println!("{}: {}{}", kind.name(), e.value, marker);
                }
                println!("best: {} ({})", report.best_value, report.best_kind.name());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Omega { size, width } => {
            let raw = bounds::omega_upper(size, width);
            let ceiled = bounds::ceil_two_decimals(raw);
            println!("omega <= {ceiled:.4}");
            println!("minimized bound: {raw:.4}");
            Ok(ExitCode::SUCCESS)
        }

        Command::EmitCnf { file, output } => {
            let p = read_puzzle(&file)?;
            if p.size() == 0 {
                bail!("cannot encode the empty puzzle");
            }
            write_output(output.as_deref(), &emit_dimacs(&build_cnf(&p)))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::EmitIp { file, output } => {
            let p = read_puzzle(&file)?;
            if p.size() == 0 {
                bail!("cannot encode the empty puzzle");
            }
            write_output(output.as_deref(), &emit_lp(&build_ip(&p)))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Canon { file } => {
            let p = read_puzzle(&file)?;
            print!("{}", p.canonical_form().representative().serialize());
            Ok(ExitCode::SUCCESS)
        }

        Command::Bench { cmd } => run_bench(cmd),
    }
}

fn parse_sizes(specs: &[String]) -> anyhow::Result<Vec<(usize, usize)>> {
    specs
        .iter()
        .map(|spec| {
            let (s, k) = spec
                .split_once('x')
                .with_context(|| format!("size {spec:?} is not of the form SxK"))?;
            Ok((s.trim().parse()?, k.trim().parse()?))
        })
        .collect()
}

fn run_bench(cmd: BenchCmd) -> anyhow::Result<ExitCode> {
    match cmd {
        BenchCmd::Generate { out, witnesses, sizes, available_only, per_class, seed } => {
            let mut sizes = match sizes {
                Some(specs) => parse_sizes(&specs)?,
                None => bench::DEFAULT_SIZES.to_vec(),
            };
            if available_only {
                let library = bench::load_witnesses(&witnesses)?;
                sizes.retain(|key| library.get(key).is_some_and(|v| v.len() >= per_class));
                if sizes.is_empty() {
                    bail!("witness library covers none of the requested sizes");
                }
                eprintln!(
                    "witness library covers: {}",
                    sizes.iter().map(|(s, k)| format!("{s}x{k}")).collect::<Vec<_>>().join(", ")
                );
            }
            let cfg = HybridConfig::default();
            let manifest = bench::generate(&sizes, &witnesses, &out, per_class, seed, &cfg)?;
            println!(
                "generated {} instances under {} (manifest.txt)",
                manifest.entries.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        BenchCmd::Run { manifest, solver, timeout_s, name, out } => {
            let timeout = Duration::from_secs_f64(timeout_s);
            let backend = SolverBackend::parse_spec(&solver, timeout, false)?;
            let name = name.unwrap_or_else(|| {
                if solver == "internal" { "internal".into() } else { "external".into() }
            });
            let m = bench::Manifest::load(&manifest)?;
            let table = bench::run(&m, &name, &backend, timeout)?;
            let mismatches = table.rows.iter().filter(|r| r.mismatch).count();
            let csv = bench::timing_to_csv(&table);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            eprintln!("{} instances, {mismatches} label mismatches", table.rows.len());
            if mismatches > 0 {
                bail!("solver disagreed with {mismatches} manifest labels");
            }
            Ok(ExitCode::SUCCESS)
        }

        BenchCmd::Score { tables } => {
            let parsed: Vec<_> = tables
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    Ok(bench::timing_from_csv(&text)?)
                })
                .collect::<anyhow::Result<_>>()?;
            println!("solver,sat_score,unsat_score,total,timeouts,mismatches");
            for s in bench::score(&parsed) {
                println!(
                    "{},{:.2},{:.2},{:.2},{},{}",
                    s.solver, s.sat_score, s.unsat_score, s.total, s.timeouts, s.mismatches
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        BenchCmd::Sweep { s_range, k, n, seed, no_heuristics, out } => {
            let (lo, hi) = s_range.split_once('-').context("--s-range expects `lo-hi`")?;
            let s_values: Vec<usize> = (lo.trim().parse()?..=hi.trim().parse()?).collect();
            let cfg = HybridConfig::default();
            let rows = bench::sweep(&s_values, &k, n, seed, &cfg, !no_heuristics)?;
            let csv = bench::sweep_to_csv(&rows);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, contents).with_context(|| format!("writing {}", p.display()))?
        }
        None => print!("{contents}"),
    }
    Ok(())
}
