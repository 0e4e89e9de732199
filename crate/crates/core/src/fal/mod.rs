//! Failure Abstraction Layer: turns raw test logs into structured diagnostic
//! feedback through three deterministic stages — parse, classify, explain —
//! plus a bit-stable renderer for the feedback block.
//!
//! Everything here is pure pattern matching over text. No model is called at
//! any point, so feedback costs nothing beyond the test run itself.

mod classify;
mod explain;
mod parse;

pub use classify::classify;
pub use explain::explain;
pub use parse::parse_log;

use serde::{Deserialize, Serialize};

use crate::verifier::{is_success, TestRunResult};

/// Structured information extracted from one failed or errored test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFailure {
    /// Failed test function, or `<collection>` for suite-load failures, or
    /// `<unparsed>` when the log dialect is unknown.
    pub test_name: String,
    /// Bare exception class name (e.g. `AssertionError`); empty if unknown.
    pub exception_type: String,
    /// Present together with `actual` for assertion mismatches.
    pub expected: Option<String>,
    pub actual: Option<String>,
    pub location: Option<(String, u32)>,
    /// Trimmed tail of the traceback block.
    pub excerpt: String,
}

/// The 14 structured failure types. The first six cover the canonical
/// failure families (syntax, assertion, import, attribute, type, value);
/// this project defines the remaining eight to make classification total
/// over what real test logs produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureType {
    SyntaxError,
    AssertionMismatch,
    ImportError,
    AttributeError,
    TypeError,
    ValueError,
    NameError,
    IndexError,
    KeyError,
    ZeroDivisionError,
    IndentationError,
    Timeout,
    CollectionError,
    UnknownRuntimeError,
}

impl FailureType {
    pub const ALL: [FailureType; 14] = [
        FailureType::SyntaxError,
        FailureType::AssertionMismatch,
        FailureType::ImportError,
        FailureType::AttributeError,
        FailureType::TypeError,
        FailureType::ValueError,
        FailureType::NameError,
        FailureType::IndexError,
        FailureType::KeyError,
        FailureType::ZeroDivisionError,
        FailureType::IndentationError,
        FailureType::Timeout,
        FailureType::CollectionError,
        FailureType::UnknownRuntimeError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureType::SyntaxError => "SYNTAX_ERROR",
            FailureType::AssertionMismatch => "ASSERTION_MISMATCH",
            FailureType::ImportError => "IMPORT_ERROR",
            FailureType::AttributeError => "ATTRIBUTE_ERROR",
            FailureType::TypeError => "TYPE_ERROR",
            FailureType::ValueError => "VALUE_ERROR",
            FailureType::NameError => "NAME_ERROR",
            FailureType::IndexError => "INDEX_ERROR",
            FailureType::KeyError => "KEY_ERROR",
            FailureType::ZeroDivisionError => "ZERO_DIVISION_ERROR",
            FailureType::IndentationError => "INDENTATION_ERROR",
            FailureType::Timeout => "TIMEOUT",
            FailureType::CollectionError => "COLLECTION_ERROR",
            FailureType::UnknownRuntimeError => "UNKNOWN_RUNTIME_ERROR",
        }
    }
}

/// One structured feedback block, rendered as `[TEST]` through
/// `[CONFIDENCE]` lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub test: String,
    #[serde(rename = "type")]
    pub failure_type: FailureType,
    pub diagnosis: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
    /// Percentage in [0, 100].
    pub confidence: u8,
}

/// At most this many feedback blocks are rendered per iteration; the rest
/// collapse into a count line so editor prompts stay bounded.
pub const MAX_RENDERED_REPORTS: usize = 3;

/// Renders feedback blocks in the fixed field order, blank-line separated.
/// `EXPECTED`/`ACTUAL` lines are omitted when absent. Equal report lists
/// always render to identical text.
pub fn render_feedback(reports: &[FeedbackReport]) -> String {
    let mut blocks = Vec::with_capacity(reports.len().min(MAX_RENDERED_REPORTS));
    for report in reports.iter().take(MAX_RENDERED_REPORTS) {
        let mut lines = Vec::with_capacity(7);
        lines.push(format!("[TEST] {}", report.test));
        lines.push(format!("[TYPE] {}", report.failure_type.as_str()));
        lines.push(format!("[DIAGNOSIS] {}", report.diagnosis));
        lines.push(format!("[ACTION] {}", report.action));
        if let Some(expected) = &report.expected {
            lines.push(format!("[EXPECTED] {expected}"));
        }
        if let Some(actual) = &report.actual {
            lines.push(format!("[ACTUAL] {actual}"));
        }
        lines.push(format!("[CONFIDENCE] {}%", report.confidence));
        blocks.push(lines.join("\n"));
    }
    let mut out = blocks.join("\n\n");
    if reports.len() > MAX_RENDERED_REPORTS {
        let more = reports.len() - MAX_RENDERED_REPORTS;
        out.push_str(&format!("\n\n…and {more} more failing tests"));
    }
    out
}

/// Full pipeline over one test run: parse the log, classify each failure,
/// and explain it. A failed run whose log yields no parseable failures still
/// produces one report so the refinement loop always has something to act on.
pub fn analyze(run: &TestRunResult) -> Vec<FeedbackReport> {
    let mut failures = parse_log(&run.raw_log);
    if failures.is_empty() && !is_success(run) {
        let tail: Vec<&str> = run.raw_log.lines().rev().take(12).collect();
        failures.push(ParsedFailure {
            test_name: "<suite>".to_string(),
            exception_type: String::new(),
            expected: None,
            actual: None,
            location: None,
            excerpt: tail.into_iter().rev().collect::<Vec<_>>().join("\n"),
        });
    }
    failures
        .iter()
        .map(|failure| {
            let (failure_type, confidence) = classify(failure, run);
            explain(failure, failure_type, confidence)
        })
        .collect()
}
