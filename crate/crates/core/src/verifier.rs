//! Sandboxed test execution: runs a task's suite against edited code in a
//! fresh temporary directory and reports per-test outcomes plus the raw log.
//!
//! Isolation boundary: fresh single-use directory, child process group killed
//! on timeout, environment reduced to an allowlist. Network is not blocked.

use std::fs;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EditTask;
use crate::editor::EditedCode;

/// Default per-run wall-clock limit.
pub const DEFAULT_TEST_TIMEOUT: Duration = Duration::from_secs(30);

const POLL_INTERVAL: Duration = Duration::from_millis(20);
const MAX_LOG_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Pass,
    Fail,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub status: CaseStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRunResult {
    pub overall: Overall,
    pub case_outcomes: Vec<CaseOutcome>,
    pub raw_log: String,
    pub duration_secs: f64,
    pub exit_code: i32,
}

/// True iff the run is a success for scoring purposes.
pub fn is_success(result: &TestRunResult) -> bool {
    result.overall == Overall::Pass
}

#[derive(Debug, Error)]
pub enum VerifierError {
    /// The runtime named by the test command is missing or unusable. This is
    /// a harness problem, never a scored task failure.
    #[error("environment: {0}")]
    Environment(String),
    #[error("invalid test command {command:?}: {message}")]
    InvalidCommand { command: String, message: String },
    #[error("sandbox I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the task's suite against the edited code inside a fresh sandbox.
///
/// The code and test suite are written to a single-use temporary directory,
/// the test command is executed there with `limit` as the wall-clock bound,
/// and the whole process group is killed on expiry. The directory is removed
/// when the run finishes; the combined output is captured regardless of
/// outcome.
pub fn run_tests(
    edited: &EditedCode,
    task: &EditTask,
    limit: Duration,
) -> Result<TestRunResult, VerifierError> {
    let sandbox = tempfile::Builder::new()
        .prefix("safedit-sandbox-")
        .tempdir()?;
    let dir = sandbox.path();

    let ext = source_extension(&task.code_language);
    let code_file = format!("solution.{ext}");
    let test_file = format!("test_solution.{ext}");
    fs::write(dir.join(&code_file), &edited.text)?;
    fs::write(dir.join(&test_file), &task.test_suite)?;

    let argv = expand_command(&task.test_command, &code_file, &test_file)?;
    let log_path = dir.join(".safedit-test-output.log");
    let log_file = fs::File::create(&log_path)?;
    let log_clone = log_file.try_clone()?;

    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::from(log_file))
        .stderr(Stdio::from(log_clone))
        .env_clear()
        .env("HOME", dir)
        .env("TMPDIR", dir)
        .env("LANG", "C.UTF-8")
        .env("PYTHONDONTWRITEBYTECODE", "1");
    if let Ok(path) = std::env::var("PATH") {
        command.env("PATH", path);
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }

    let started = Instant::now();
    let mut child = command.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            VerifierError::Environment(format!("runtime `{}` not found on PATH", argv[0]))
        } else {
            VerifierError::Io(e)
        }
    })?;

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if started.elapsed() >= limit {
            timed_out = true;
            kill_process_group(&mut child);
            child.wait()?;
            break None;
        }
        std::thread::sleep(POLL_INTERVAL);
    };
    let duration = started.elapsed();

    let raw_log = read_log_tail(&log_path);
    let case_outcomes = parse_case_outcomes(&raw_log);

    let (overall, exit_code) = if timed_out {
        (Overall::Timeout, -9)
    } else {
        let status = status.expect("status present unless timed out");
        let code = exit_code_of(status);
        let overall = match code {
            0 if case_outcomes.iter().all(|c| c.status == CaseStatus::Pass) => Overall::Pass,
            0 => Overall::Fail,
            1 => Overall::Fail,
            _ => Overall::Crash,
        };
        (overall, code)
    };

    Ok(TestRunResult {
        overall,
        case_outcomes,
        raw_log,
        duration_secs: duration.as_secs_f64(),
        exit_code,
    })
}

fn source_extension(code_language: &str) -> &'static str {
    match code_language {
        "python" => "py",
        "javascript" => "js",
        _ => "txt",
    }
}

/// Splits the shell-free command template into argv, substituting the
/// `{code_file}` / `{test_file}` placeholders per token.
fn expand_command(
    template: &str,
    code_file: &str,
    test_file: &str,
) -> Result<Vec<String>, VerifierError> {
    let argv: Vec<String> = template
        .split_whitespace()
        .map(|token| {
            token
                .replace("{code_file}", code_file)
                .replace("{test_file}", test_file)
        })
        .collect();
    if argv.is_empty() {
        return Err(VerifierError::InvalidCommand {
            command: template.to_string(),
            message: "empty command template".into(),
        });
    }
    Ok(argv)
}

fn kill_process_group(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        let pgid = child.id() as i32;
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    #[cfg(not(unix))]
    {
        let _ = child.kill();
    }
}

fn exit_code_of(status: std::process::ExitStatus) -> i32 {
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        status.code().or(status.signal().map(|s| -s)).unwrap_or(-1)
    }
    #[cfg(not(unix))]
    {
        status.code().unwrap_or(-1)
    }
}

fn read_log_tail(path: &std::path::Path) -> String {
    let bytes = fs::read(path).unwrap_or_default();
    let start = bytes.len().saturating_sub(MAX_LOG_BYTES);
    String::from_utf8_lossy(&bytes[start..]).into_owned()
}

/// Extracts per-test outcomes from the runner's machine-readable lines.
///
/// Understands pytest verbose progress lines (`file::test PASSED`), pytest
/// short-summary lines (`FAILED file::test - message`), and a generic
/// dialect (`PASS name` / `FAIL name`). The first status seen for a test
/// name wins.
fn parse_case_outcomes(log: &str) -> Vec<CaseOutcome> {
    let mut outcomes: Vec<CaseOutcome> = Vec::new();
    let mut push = |name: &str, status: CaseStatus| {
        if !name.is_empty() && !outcomes.iter().any(|o| o.name == name) {
            outcomes.push(CaseOutcome {
                name: name.to_string(),
                status,
            });
        }
    };

    for line in log.lines() {
        let line = line.trim_end();
        // pytest verbose: `test_solution.py::test_add PASSED [ 50%]`
        if let Some((id, rest)) = line.split_once(' ') {
            if let Some((_, test)) = id.split_once("::") {
                let status_word = rest.split_whitespace().next().unwrap_or("");
                match status_word {
                    "PASSED" => push(test, CaseStatus::Pass),
                    "FAILED" => push(test, CaseStatus::Fail),
                    "ERROR" => push(test, CaseStatus::Error),
                    _ => {}
                }
                if !status_word.is_empty() {
                    continue;
                }
            }
        }
        // pytest short summary: `FAILED test_solution.py::test_sub - assert 8 == 2`
        if let Some(rest) = line.strip_prefix("FAILED ") {
            let id = rest.split(" - ").next().unwrap_or(rest).trim();
            let test = id.split_once("::").map(|(_, t)| t).unwrap_or(id);
            push(test, CaseStatus::Fail);
            continue;
        }
        if let Some(rest) = line.strip_prefix("ERROR ") {
            let id = rest.split(" - ").next().unwrap_or(rest).trim();
            let test = id.split_once("::").map(|(_, t)| t).unwrap_or(id);
            push(test, CaseStatus::Error);
            continue;
        }
        // Generic dialect: `PASS name` / `FAIL name: message`
        if let Some(rest) = line.strip_prefix("PASS ") {
            push(
                rest.split(':').next().unwrap_or(rest).trim(),
                CaseStatus::Pass,
            );
        } else if let Some(rest) = line.strip_prefix("FAIL ") {
            push(
                rest.split(':').next().unwrap_or(rest).trim(),
                CaseStatus::Fail,
            );
        }
    }
    outcomes
}
