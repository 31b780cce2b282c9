//! Solver backends: the in-process engines, or an external solver run as a
//! subprocess with a wall-clock timeout and marker-based output parsing.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crate::{Error, Result};

/// How a verification route decides satisfiability / feasibility.
#[derive(Debug, Clone)]
pub enum SolverBackend {
    /// The crate's own engines (CDCL for SAT, the exact matcher for IP).
    Internal,
    External(ExternalSolver),
}

impl SolverBackend {
    /// Parse a CLI backend spec: `internal` or `cmd:<template>`.
    pub fn parse_spec(spec: &str, timeout: Duration, lp: bool) -> Result<SolverBackend> {
        if spec == "internal" {
            return Ok(SolverBackend::Internal);
        }
        if let Some(template) = spec.strip_prefix("cmd:") {
            let ext = if lp {
                ExternalSolver::lp_defaults(template, timeout)
            } else {
                ExternalSolver::sat_defaults(template, timeout)
            };
            return Ok(ExternalSolver::into_backend(ext));
        }
        Err(Error::Invalid(format!(
            "backend spec {spec:?} (expected `internal` or `cmd:<template>`)"
        )))
    }
}

/// Subprocess solver configuration. The command template is run through
/// `sh -c` with `{input}` replaced by the instance path (appended if the
/// placeholder is absent). Output is classified by scanning lines for the
/// negative marker first, then the positive one.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: String,
    pub timeout: Duration,
    /// Marker for SAT / feasible output lines.
    pub positive_marker: String,
    /// Marker for UNSAT / infeasible output lines.
    pub negative_marker: String,
}

impl ExternalSolver {
    /// DIMACS output convention for SAT solvers.
    pub fn sat_defaults(command: &str, timeout: Duration) -> ExternalSolver {
        ExternalSolver {
            command: command.to_string(),
            timeout,
            positive_marker: "s SATISFIABLE".into(),
            negative_marker: "s UNSATISFIABLE".into(),
        }
    }

    /// Defaults matching common MIP solver logs; override per solver.
    pub fn lp_defaults(command: &str, timeout: Duration) -> ExternalSolver {
        ExternalSolver {
            command: command.to_string(),
            timeout,
            positive_marker: "Optimal".into(),
            negative_marker: "nfeasible".into(),
        }
    }

    pub fn into_backend(self) -> SolverBackend {
        SolverBackend::External(self)
    }
}

/// Outcome of one external run. `Positive` = SAT / feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Positive,
    Negative,
}

const POLL_INTERVAL: Duration = Duration::from_millis(10);

/// Run the external solver on `input`. Honors `cancel` (kills the child)
/// and the configured timeout. Nonzero exit codes are fine as long as a
/// marker is present; SAT solvers conventionally exit 10/20.
pub fn run_external(
    cfg: &ExternalSolver,
    input: &Path,
    cancel: Option<&AtomicBool>,
) -> Result<SolveStatus> {
    let cmd = if cfg.command.contains("{input}") {
        cfg.command.replace("{input}", &input.display().to_string())
    } else {
        format!("{} {}", cfg.command, input.display())
    };

    let out_path = std::env::temp_dir().join(format!(
        "susp-solver-{}-{}.out",
        std::process::id(),
        unique_id()
    ));
    let out_file = File::create(&out_path)?;
    let err_file = out_file.try_clone()?;

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::from(out_file))
        .stderr(Stdio::from(err_file))
        .spawn()
        .map_err(|e| Error::SolverCrash(format!("failed to spawn {cmd:?}: {e}")))?;

    let deadline = Instant::now() + cfg.timeout;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if let Some(c) = cancel {
            if c.load(Ordering::Relaxed) {
                let _ = child.kill();
                let _ = child.wait();
                let _ = std::fs::remove_file(&out_path);
                return Err(Error::Canceled);
            }
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            let _ = std::fs::remove_file(&out_path);
            return Err(Error::SolverTimeout(cfg.timeout));
        }
        std::thread::sleep(POLL_INTERVAL);
    };

    let mut output = String::new();
    File::open(&out_path)?.read_to_string(&mut output)?;
    let _ = std::fs::remove_file(&out_path);

    for line in output.lines() {
        if line.contains(&cfg.negative_marker) {
            return Ok(SolveStatus::Negative);
        }
    }
    for line in output.lines() {
        if line.contains(&cfg.positive_marker) {
            return Ok(SolveStatus::Positive);
        }
    }
    let head: String = output.lines().take(5).collect::<Vec<_>>().join(" | ");
    Err(Error::SolverCrash(format!(
        "no status marker in output of {cmd:?} (exit {status}): {head}"
    )))
}

fn unique_id() -> u64 {
    use std::sync::atomic::AtomicU64;
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

/// Write `contents` to a fresh temp file with the given extension; the
/// caller removes it when done.
pub fn write_temp_instance(contents: &str, ext: &str) -> Result<std::path::PathBuf> {
    let path = std::env::temp_dir().join(format!(
        "susp-instance-{}-{}.{ext}",
        std::process::id(),
        unique_id()
    ));
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sat_cfg(cmd: &str) -> ExternalSolver {
        ExternalSolver::sat_defaults(cmd, Duration::from_secs(5))
    }

    #[test]
    fn parses_dimacs_status_lines() {
        let input = write_temp_instance("p cnf 1 1\n1 0\n", "dimacs").unwrap();
        let st = run_external(&sat_cfg("echo 's SATISFIABLE' #"), &input, None).unwrap();
        assert_eq!(st, SolveStatus::Positive);
        let st = run_external(&sat_cfg("echo 's UNSATISFIABLE' #"), &input, None).unwrap();
        assert_eq!(st, SolveStatus::Negative);
        let _ = std::fs::remove_file(input);
    }

    #[test]
    fn unsatisfiable_not_mistaken_for_satisfiable() {
        // "s UNSATISFIABLE" must not match the positive marker
        let input = write_temp_instance("p cnf 1 1\n1 0\n", "dimacs").unwrap();
        let cfg = sat_cfg("printf 'c comment\\ns UNSATISFIABLE\\n' #");
        assert_eq!(run_external(&cfg, &input, None).unwrap(), SolveStatus::Negative);
        let _ = std::fs::remove_file(input);
    }

    #[test]
    fn timeout_kills_child() {
        let input = write_temp_instance("x", "dimacs").unwrap();
        let cfg = ExternalSolver {
            command: "sleep 30 #".into(),
            timeout: Duration::from_millis(100),
            positive_marker: "s SATISFIABLE".into(),
            negative_marker: "s UNSATISFIABLE".into(),
        };
        let start = Instant::now();
        let err = run_external(&cfg, &input, None).unwrap_err();
        assert!(matches!(err, Error::SolverTimeout(_)));
        assert!(start.elapsed() < Duration::from_secs(5));
        let _ = std::fs::remove_file(input);
    }

    #[test]
    fn garbage_output_is_a_crash() {
        let input = write_temp_instance("x", "dimacs").unwrap();
        let err = run_external(&sat_cfg("echo nonsense #"), &input, None).unwrap_err();
        assert!(matches!(err, Error::SolverCrash(_)));
        let _ = std::fs::remove_file(input);
    }

    #[test]
    fn input_path_substituted() {
        let input = write_temp_instance("p cnf 1 1\n-1 0\n", "dimacs").unwrap();
        // cat the instance back; marker scan sees its own content
        let cfg = ExternalSolver {
            command: "cat {input}".into(),
            timeout: Duration::from_secs(5),
            positive_marker: "p cnf".into(),
            negative_marker: "never-appears".into(),
        };
        assert_eq!(run_external(&cfg, &input, None).unwrap(), SolveStatus::Positive);
        let _ = std::fs::remove_file(input);
    }
}
