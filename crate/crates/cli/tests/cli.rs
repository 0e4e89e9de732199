//! End-to-end CLI checks over the committed fixtures, driving the real
//! binary with the replay cassettes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn safedit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safedit"))
}

#[test]
fn run_and_report_round_trip() {
    let out = tempfile::tempdir().unwrap();
    let status = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus"))
        .args(["--variant", "highlight", "--out"])
        .arg(out.path())
        .arg("--replay")
        .arg(fixtures().join("cassettes/fixture_corpus.cassette.json"))
        .args(["--parallel", "2"])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("80.0"), "run output:\n{stdout}");
    assert!(out.path().join("report.json").exists());

    let report = safedit()
        .args(["report", "--run-dir"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(report.status.success());
    let report_out = String::from_utf8_lossy(&report.stdout);
    assert!(report_out.contains("Task success rate per language"));
    assert!(report_out.contains("80.0"));
}

#[test]
fn fal_parse_prints_structured_feedback() {
    let output = safedit()
        .arg("fal-parse")
        .arg(fixtures().join("logs/assertion_mismatch.log"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("[TEST] test_calculator_subtract"));
    assert!(stdout.contains("[TYPE] ASSERTION_MISMATCH"));
    assert!(stdout.contains("[EXPECTED] 2"));
    assert!(stdout.contains("[ACTUAL] 8"));
    assert!(stdout.contains("[CONFIDENCE] 95%"));
}

#[test]
fn classify_annotates_run_directory() {
    use safedit_core::harness::read_trace;
    use safedit_core::provider::{Cassette, ModelSettings};
    use safedit_core::taxonomy::build_taxonomy_prompt;

    let out = tempfile::tempdir().unwrap();
    let run = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus"))
        .args(["--variant", "highlight", "--out"])
        .arg(out.path())
        .arg("--replay")
        .arg(fixtures().join("cassettes/fixture_corpus.cassette.json"))
        .output()
        .unwrap();
    assert!(run.status.success());

    // Classification prompts embed this run's own logs, so the cassette is
    // recorded against the traces the run just wrote.
    let tasks = safedit_core::load_corpus(&fixtures().join("corpus")).unwrap();
    let task = tasks.iter().find(|t| t.id == "never_fixes").unwrap();
    let trace = read_trace(&out.path().join("never_fixes.highlight.trace.json")).unwrap();
    let request = build_taxonomy_prompt(&trace, task, &ModelSettings::default());
    let mut cassette = Cassette::new();
    cassette.record(
        &request,
        r#"{"category": "IG", "confidence": 0.75, "justification": "The parity expression is still wrong."}"#,
    );
    let cassette_path = out.path().join("classify.cassette.json");
    cassette.save(&cassette_path).unwrap();

    let classify = safedit()
        .args(["classify", "--run-dir"])
        .arg(out.path())
        .arg("--corpus")
        .arg(fixtures().join("corpus"))
        .arg("--replay")
        .arg(&cassette_path)
        .output()
        .unwrap();
    assert!(
        classify.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&classify.stderr)
    );
    let stdout = String::from_utf8_lossy(&classify.stdout);
    assert!(stdout.contains("never_fixes highlight: IG"), "{stdout}");
    assert!(stdout.contains("classified 1"), "{stdout}");

    // The trace file now carries the label, and the report reflects it.
    let annotated = read_trace(&out.path().join("never_fixes.highlight.trace.json")).unwrap();
    assert!(annotated.taxonomy.is_some());
    let report = safedit()
        .args(["report", "--run-dir"])
        .arg(out.path())
        .output()
        .unwrap();
    let report_out = String::from_utf8_lossy(&report.stdout);
    assert!(report_out.contains("IG 100.0"), "{report_out}");
}

/// Stub chat-completions server: answers planner prompts with a fixed plan
/// and editor prompts with fixed fragments, one connection per request.
fn stub_backend(requests_expected: usize) -> (std::thread::JoinHandle<()>, String) {
    use std::io::{Read, Write};

    let plan = serde_json::json!({
        "observed_elements": ["double"],
        "edit_intent": "Use multiplication instead of addition.",
        "target_description": "The body of the double function.",
        "required_changes": ["REPLACE `return n + n` with `return n * 2` in `double`"],
        "constraints": ["keep the function signature"],
    })
    .to_string();
    let fragments = r#"[{"anchor": "return n + n", "replacement": "return n * 2"}]"#.to_string();

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        for _ in 0..requests_expected {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 16384];
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| l.strip_prefix("Content-Length: "))
                        .and_then(|v| v.trim().parse::<usize>().ok())
                        .unwrap_or(0);
                    if buf.len() >= header_end + 4 + content_length {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            let request = String::from_utf8_lossy(&buf);
            let content = if request.contains("You are the Planner") {
                &plan
            } else {
                &fragments
            };
            let body = serde_json::json!({
                "choices": [{"message": {"content": content}}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 5},
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (handle, format!("http://{addr}/v1"))
}

#[test]
fn live_run_records_a_cassette_that_replays_identically() {
    // One task, one variant: a plan request and an edit request.
    let (server, base_url) = stub_backend(2);
    let out = tempfile::tempdir().unwrap();
    let live_dir = out.path().join("live");
    let cassette = out.path().join("recorded.cassette.json");

    let live = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus_partial"))
        .args(["--variant", "code_only", "--out"])
        .arg(&live_dir)
        .arg("--record")
        .arg(&cassette)
        .env("SAFEDIT_API_BASE", &base_url)
        .env("SAFEDIT_API_KEY", "test-key")
        .output()
        .unwrap();
    server.join().unwrap();
    assert!(
        live.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&live.stderr)
    );
    assert!(cassette.exists());
    assert!(String::from_utf8_lossy(&live.stdout).contains("100.0"));

    // Replaying the freshly recorded cassette reproduces the same report.
    let replay_dir = out.path().join("replay");
    let replay = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus_partial"))
        .args(["--variant", "code_only", "--out"])
        .arg(&replay_dir)
        .arg("--replay")
        .arg(&cassette)
        .output()
        .unwrap();
    assert!(
        replay.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&replay.stderr)
    );
    let live_report = fs::read(live_dir.join("report.json")).unwrap();
    let replay_report = fs::read(replay_dir.join("report.json")).unwrap();
    assert_eq!(live_report, replay_report);
}

#[test]
fn run_rejects_conflicting_provider_flags() {
    let output = safedit()
        .args(["run", "--corpus", "x", "--out", "y"])
        .args(["--replay", "a.json", "--record", "b.json"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn live_mode_without_key_fails_with_guidance() {
    let out = tempfile::tempdir().unwrap();
    let output = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus"))
        .args(["--out"])
        .arg(out.path())
        .env_remove("SAFEDIT_API_KEY")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("SAFEDIT_API_KEY"), "{stderr}");
}

#[test]
fn config_file_overrides_flags() {
    // The config pins an unusable model id; a replay cassette recorded for
    // the default model id then misses, proving the file won out over the
    // flag.
    let out = tempfile::tempdir().unwrap();
    let config_path = out.path().join("safedit.json");
    fs::write(&config_path, r#"{"model_id": "config-model-wins"}"#).unwrap();
    let output = safedit()
        .args(["run", "--corpus"])
        .arg(fixtures().join("corpus_partial"))
        .args(["--variant", "code_only", "--out"])
        .arg(out.path().join("run"))
        .arg("--replay")
        .arg(fixtures().join("cassettes/partial_corpus.cassette.json"))
        .args(["--model", "gpt-4.1"])
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    // The run errors because every instance replay-misses under the
    // config-forced model id.
    assert!(!output.status.success());
}
