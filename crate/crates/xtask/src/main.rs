//! Workspace tooling: regenerates the committed fixture corpus, the frozen
//! test-log corpus, and the replay cassettes.
//!
//! Cassettes are produced by running the real pipeline against a scripted
//! response table, so every recorded fingerprint matches what the
//! orchestrator rebuilds at replay time — including refinement-turn prompts,
//! whose feedback sections derive from real sandboxed pytest runs.
//!
//! Usage: cargo run -p xtask -- gen-fixtures

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use safedit_core::corpus::{EditTask, Span, VisibilityVariant};
use safedit_core::editor::{EditFragment, FEEDBACK_SECTION_HEADER};
use safedit_core::harness::trace_file_name;
use safedit_core::orchestrator::{run_task, PipelineConfig};
use safedit_core::planner::EditPlan;
use safedit_core::prompts::{EDITOR_SYSTEM, PLANNER_SYSTEM};
use safedit_core::provider::Provider;
use safedit_core::verifier::run_tests;
use safedit_core::EditedCode;

struct FixtureTask {
    task: EditTask,
    plan: EditPlan,
    initial_edit: Vec<EditFragment>,
    /// Response for refinement turns; defaults to the initial edit.
    refinement_edit: Option<Vec<EditFragment>>,
}

fn char_offset(code: &str, byte_offset: usize) -> usize {
    code[..byte_offset].chars().count()
}

/// Highlight span over `snippet`, as character offsets.
fn span_of(code: &str, snippet: &str) -> Span {
    let start = code.find(snippet).expect("snippet present");
    Span {
        start: char_offset(code, start),
        end: char_offset(code, start + snippet.len()),
    }
}

fn cursor_at(code: &str, snippet: &str) -> usize {
    char_offset(code, code.find(snippet).expect("snippet present"))
}

/// Cursor at `snippet`, searching only after `context` so functions with
/// identical lines elsewhere in the file resolve to the right spot.
fn cursor_after(code: &str, context: &str, snippet: &str) -> usize {
    let base = code.find(context).expect("context present");
    let offset = code[base..].find(snippet).expect("snippet after context");
    char_offset(code, base + offset)
}

fn task(
    id: &str,
    instruction: &str,
    code: &str,
    tests: &str,
    highlight: Option<Span>,
    cursor: Option<usize>,
) -> EditTask {
    EditTask {
        id: id.to_string(),
        instruction: instruction.to_string(),
        instruction_language: "en".to_string(),
        code_language: "python".to_string(),
        original_code: code.to_string(),
        test_suite: tests.to_string(),
        test_command: "pytest -v {test_file}".to_string(),
        highlight,
        cursor,
    }
}

fn plan(
    observed: &[&str],
    intent: &str,
    target: &str,
    changes: &[&str],
    constraints: &[&str],
) -> EditPlan {
    EditPlan {
        observed_elements: observed.iter().map(|s| s.to_string()).collect(),
        edit_intent: intent.to_string(),
        target_description: target.to_string(),
        required_changes: changes.iter().map(|s| s.to_string()).collect(),
        constraints: constraints.iter().map(|s| s.to_string()).collect(),
    }
}

fn fragment(anchor: &str, replacement: &str) -> Vec<EditFragment> {
    vec![EditFragment {
        anchor: anchor.to_string(),
        replacement: replacement.to_string(),
    }]
}

fn main_corpus() -> Vec<FixtureTask> {
    let calc_code = "def add(a, b):\n    return a + b\n\n\ndef subtract(a, b):\n    return a + b\n";
    let calc_fn = "def subtract(a, b):\n    return a + b";
    let calc_tests = "from solution import add, subtract\n\n\ndef test_calculator_add():\n    assert add(1, 2) == 3\n\n\ndef test_calculator_subtract():\n    assert subtract(5, 3) == 2\n";

    let greet_code = "def greet(name):\n    return \"Hello, \" + name + \"!\"\n";
    let greet_fn = "def greet(name):\n    return \"Hello, \" + name + \"!\"";
    let greet_tests = "from solution import greet\n\n\ndef test_greet_default():\n    assert greet(\"Ada\") == \"Hello, Ada!\"\n\n\ndef test_greet_custom():\n    assert greet(\"Bob\", punctuation=\"?\") == \"Hello, Bob?\"\n";

    let fib_code = "def fibonacci(n):\n    if n <= 1:\n        return n\n    a, b = 0, 1\n    for _ in range(n - 1):\n        a, b = b, a + b\n    return a\n";
    let fib_fn = "def fibonacci(n):\n    if n <= 1:\n        return n\n    a, b = 0, 1\n    for _ in range(n - 1):\n        a, b = b, a + b\n    return a";
    let fib_tests = "from solution import fibonacci\n\n\ndef test_fibonacci_base():\n    assert fibonacci(0) == 0\n    assert fibonacci(1) == 1\n\n\ndef test_fibonacci_small():\n    assert fibonacci(3) == 2\n\n\ndef test_fibonacci_ten():\n    assert fibonacci(10) == 55\n";

    let mult_code = "def multiply(a, b):\n    return a * a\n";
    let mult_fn = "def multiply(a, b):\n    return a * a";
    let mult_tests = "from solution import multiply\n\n\ndef test_multiply_three_four():\n    assert multiply(3, 4) == 12\n\n\ndef test_multiply_two_five():\n    assert multiply(2, 5) == 10\n";

    let even_code = "def is_even(n):\n    return n % 2 == 1\n";
    let even_fn = "def is_even(n):\n    return n % 2 == 1";
    let even_tests = "from solution import is_even\n\n\ndef test_even_two():\n    assert is_even(2) is True\n\n\ndef test_odd_three():\n    assert is_even(3) is False\n\n\ndef test_even_zero():\n    assert is_even(0) is True\n";

    vec![
        FixtureTask {
            task: task(
                "calc",
                "Fix the subtract function so it returns the difference of its arguments.",
                calc_code,
                calc_tests,
                Some(span_of(calc_code, calc_fn)),
                Some(cursor_after(calc_code, "def subtract", "return a + b")),
            ),
            plan: plan(
                &["subtract"],
                "Make subtract return the difference instead of the sum.",
                "The body of the subtract function.",
                &["REPLACE `return a + b` with `return a - b` in `subtract`"],
                &["preserve the add function unchanged"],
            ),
            initial_edit: fragment(
                "def subtract(a, b):\n    return a + b",
                "def subtract(a, b):\n    return a - b",
            ),
            refinement_edit: None,
        },
        FixtureTask {
            task: task(
                "greet",
                "Add an optional punctuation parameter to greet, defaulting to \"!\", and use it instead of the hard-coded exclamation mark.",
                greet_code,
                greet_tests,
                Some(span_of(greet_code, greet_fn)),
                Some(cursor_at(greet_code, "return \"Hello, \"")),
            ),
            plan: plan(
                &["greet", "name"],
                "Add a punctuation parameter with default \"!\".",
                "The greet function signature and return expression.",
                &[
                    "ADD parameter `punctuation` with default \"!\" to function `greet()`",
                    "REPLACE the hard-coded \"!\" with the `punctuation` parameter",
                ],
                &["keep the default behavior identical for existing callers"],
            ),
            initial_edit: fragment(
                "def greet(name):\n    return \"Hello, \" + name + \"!\"",
                "def greet(name, punctuation=\"!\"):\n    return \"Hello, \" + name + punctuation",
            ),
            refinement_edit: None,
        },
        FixtureTask {
            task: task(
                "fib",
                "fibonacci returns the wrong value for n >= 3; fix the return so the sequence is correct.",
                fib_code,
                fib_tests,
                Some(span_of(fib_code, fib_fn)),
                Some(cursor_at(fib_code, "return a\n")),
            ),
            plan: plan(
                &["fibonacci"],
                "Return the correct running value after the loop.",
                "The final return of the fibonacci function.",
                &["REPLACE `return a` with `return b` at the end of `fibonacci`"],
                &["preserve the base cases for n <= 1"],
            ),
            initial_edit: fragment("    return a\n", "    return b\n"),
            refinement_edit: None,
        },
        FixtureTask {
            task: task(
                "fix_on_2",
                "Fix the multiply function so it returns the product of both arguments.",
                mult_code,
                mult_tests,
                Some(span_of(mult_code, mult_fn)),
                Some(cursor_at(mult_code, "return a * a")),
            ),
            plan: plan(
                &["multiply"],
                "Make multiply use both arguments.",
                "The body of the multiply function.",
                &["REPLACE `return a * a` with `return a * b` in `multiply`"],
                &["do not change the function signature"],
            ),
            // Scripted wrong first edit; correct on the refinement turn.
            initial_edit: fragment("return a * a", "return a + b"),
            refinement_edit: Some(fragment("return a * a", "return a * b")),
        },
        FixtureTask {
            task: task(
                "never_fixes",
                "Fix is_even so it returns True exactly for even numbers.",
                even_code,
                even_tests,
                Some(span_of(even_code, even_fn)),
                Some(cursor_at(even_code, "return n % 2 == 1")),
            ),
            plan: plan(
                &["is_even"],
                "Invert the parity check.",
                "The body of the is_even function.",
                &["REPLACE `return n % 2 == 1` with `return n % 2 == 0` in `is_even`"],
                &["keep the function name and signature"],
            ),
            // Scripted to stay wrong on every attempt.
            initial_edit: fragment("return n % 2 == 1", "return n % 3 == 0"),
            refinement_edit: Some(fragment("return n % 2 == 1", "return n % 3 == 0")),
        },
    ]
}

fn partial_corpus() -> Vec<FixtureTask> {
    let double_code = "def double(n):\n    return n + n\n";
    let double_tests = "from solution import double\n\n\ndef test_double():\n    assert double(3) == 6\n    assert double(0) == 0\n";
    vec![FixtureTask {
        task: task(
            "double",
            "Make double return twice its argument using multiplication.",
            double_code,
            double_tests,
            None,
            None,
        ),
        plan: plan(
            &["double"],
            "Use multiplication instead of addition.",
            "The body of the double function.",
            &["REPLACE `return n + n` with `return n * 2` in `double`"],
            &["keep the function signature"],
        ),
        initial_edit: fragment("return n + n", "return n * 2"),
        refinement_edit: None,
    }]
}

/// Pure response table over requests: the system prompt picks the role, the
/// user content picks the task (instruction / original code are embedded
/// verbatim) and the turn (feedback section present or not).
fn scripted_provider(fixtures: &[FixtureTask]) -> Provider {
    let table: Vec<(String, String, String, String, String)> = fixtures
        .iter()
        .map(|f| {
            let refinement = f.refinement_edit.as_ref().unwrap_or(&f.initial_edit);
            (
                f.task.instruction.clone(),
                f.task.original_code.clone(),
                serde_json::to_string_pretty(&f.plan).expect("plan serializes"),
                serde_json::to_string(&f.initial_edit).expect("fragments serialize"),
                serde_json::to_string(refinement).expect("fragments serialize"),
            )
        })
        .collect();

    Provider::scripted(move |request| {
        let system = &request.messages[0].content;
        let user = &request.messages[1].content;
        if system == PLANNER_SYSTEM {
            for (instruction, _, plan_json, _, _) in &table {
                if user.contains(instruction.as_str()) {
                    return Ok(plan_json.clone());
                }
            }
            return Err("no scripted plan for this request".to_string());
        }
        if system == EDITOR_SYSTEM {
            for (_, code, _, initial, refinement) in &table {
                if user.contains(code.as_str()) {
                    let response = if user.contains(FEEDBACK_SECTION_HEADER) {
                        refinement
                    } else {
                        initial
                    };
                    return Ok(response.clone());
                }
            }
            return Err("no scripted edit for this request".to_string());
        }
        Err("unscripted system prompt".to_string())
    })
    .with_recording()
}

fn write_corpus(dir: &Path, fixtures: &[FixtureTask]) {
    fs::create_dir_all(dir).expect("create corpus dir");
    for fixture in fixtures {
        fixture.task.validate().expect("fixture task valid");
        let path = dir.join(format!("{}.task.json", fixture.task.id));
        let mut json = serde_json::to_string_pretty(&fixture.task).expect("task serializes");
        json.push('\n');
        fs::write(&path, json).expect("write task bundle");
        println!("wrote {}", path.display());
    }
}

/// Records one cassette by replaying the scripted pipeline for every
/// instance. Each run executes real sandboxed pytest, so refinement prompts
/// carry feedback derived from genuine logs.
fn record_cassette(fixtures: &[FixtureTask], out: &Path) {
    let provider = scripted_provider(fixtures);
    for fixture in fixtures {
        for variant in VisibilityVariant::ALL {
            if !fixture.task.is_renderable(variant) {
                continue;
            }
            let config = PipelineConfig::new(variant);
            let trace = run_task(&fixture.task, &config, &provider).expect("pipeline runs");
            println!(
                "  {} -> {:?} in {} attempts",
                trace_file_name(&fixture.task.id, variant),
                trace.verdict,
                trace.attempts_used
            );
        }
    }
    let cassette = provider.recording().expect("recording enabled");
    cassette.save(out).expect("save cassette");
    println!("wrote {} ({} entries)", out.display(), cassette.len());
}

/// One frozen log per failure type, produced by really running pytest on a
/// small snippet in the sandbox.
fn gen_logs(dir: &Path) {
    fs::create_dir_all(dir).expect("create logs dir");
    let import_tests = "import solution\n\n\ndef test_loads():\n    assert solution\n";
    let cases: &[(&str, &str, &str, Duration)] = &[
        (
            "assertion_mismatch.log",
            "def add(a, b):\n    return a + b\n\n\ndef subtract(a, b):\n    return a + b\n",
            "from solution import add, subtract\n\n\ndef test_calculator_add():\n    assert add(1, 2) == 3\n\n\ndef test_calculator_subtract():\n    assert subtract(5, 3) == 2\n",
            Duration::from_secs(30),
        ),
        (
            "syntax_error.log",
            "def broken(:\n    pass\n",
            import_tests,
            Duration::from_secs(30),
        ),
        (
            "import_error.log",
            "from os import nonexistent_name\n",
            import_tests,
            Duration::from_secs(30),
        ),
        (
            "attribute_error.log",
            "class Box:\n    pass\n\n\ndef get_label():\n    return Box().label\n",
            "from solution import get_label\n\n\ndef test_label():\n    assert get_label() == \"x\"\n",
            Duration::from_secs(30),
        ),
        (
            "type_error.log",
            "def combine():\n    return \"1\" + 1\n",
            "from solution import combine\n\n\ndef test_combine():\n    assert combine() == \"11\"\n",
            Duration::from_secs(30),
        ),
        (
            "value_error.log",
            "def parse_num():\n    return int(\"not a number\")\n",
            "from solution import parse_num\n\n\ndef test_parse():\n    assert parse_num() == 0\n",
            Duration::from_secs(30),
        ),
        (
            "name_error.log",
            "def use_missing():\n    return undefined_name\n",
            "from solution import use_missing\n\n\ndef test_missing():\n    assert use_missing() is None\n",
            Duration::from_secs(30),
        ),
        (
            "index_error.log",
            "def first_of_empty():\n    return [][0]\n",
            "from solution import first_of_empty\n\n\ndef test_first():\n    assert first_of_empty() is None\n",
            Duration::from_secs(30),
        ),
        (
            "key_error.log",
            "def lookup():\n    return {}[\"missing\"]\n",
            "from solution import lookup\n\n\ndef test_lookup():\n    assert lookup() == 1\n",
            Duration::from_secs(30),
        ),
        (
            "zero_division_error.log",
            "def divide():\n    return 1 / 0\n",
            "from solution import divide\n\n\ndef test_divide():\n    assert divide() == 0\n",
            Duration::from_secs(30),
        ),
        (
            "indentation_error.log",
            "def f():\nreturn 1\n",
            import_tests,
            Duration::from_secs(30),
        ),
        (
            "timeout.log",
            "def spin():\n    while True:\n        pass\n",
            "from solution import spin\n\n\ndef test_spin():\n    spin()\n",
            Duration::from_secs(2),
        ),
        (
            "collection_error.log",
            "raise RuntimeError(\"boom at import\")\n",
            import_tests,
            Duration::from_secs(30),
        ),
        (
            "unknown_runtime_error.log",
            "class FrobnicationError(Exception):\n    pass\n\n\ndef frobnicate():\n    raise FrobnicationError(\"frob failed\")\n",
            "from solution import frobnicate\n\n\ndef test_frob():\n    frobnicate()\n",
            Duration::from_secs(30),
        ),
    ];

    for (name, code, tests, limit) in cases {
        let t = task("loggen", "n/a", code, tests, None, None);
        let edited = EditedCode {
            text: code.to_string(),
            applied: Vec::new(),
        };
        let result = run_tests(&edited, &t, *limit).expect("pytest runs");
        let path = dir.join(name);
        fs::write(&path, &result.raw_log).expect("write log");
        println!(
            "wrote {} (overall {:?}, exit {})",
            path.display(),
            result.overall,
            result.exit_code
        );
    }
}

fn main() {
    let command = std::env::args().nth(1).unwrap_or_default();
    if command != "gen-fixtures" {
        eprintln!("usage: cargo run -p xtask -- gen-fixtures");
        std::process::exit(2);
    }

    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .expect("workspace root")
        .to_path_buf();
    let fixtures_dir = root.join("fixtures");

    let main = main_corpus();
    let partial = partial_corpus();

    write_corpus(&fixtures_dir.join("corpus"), &main);
    write_corpus(&fixtures_dir.join("corpus_partial"), &partial);
    gen_logs(&fixtures_dir.join("logs"));

    println!("recording main cassette...");
    record_cassette(
        &main,
        &fixtures_dir.join("cassettes/fixture_corpus.cassette.json"),
    );
    println!("recording partial cassette...");
    record_cassette(
        &partial,
        &fixtures_dir.join("cassettes/partial_corpus.cassette.json"),
    );
}
