//! Stage 2: failure classification. Deterministic, ordered pattern-matching
//! rules map every parsed failure to exactly one of the 14 failure types.
//! The rules are total: the catch-all guarantees an answer for any input.

use super::{FailureType, ParsedFailure};
use crate::verifier::{Overall, TestRunResult};

/// Confidence for assertion mismatches with both values parsed.
const CONFIDENCE_FULL_ASSERTION: u8 = 95;
/// Confidence for exact exception-name matches and timeouts.
const CONFIDENCE_EXACT_MATCH: u8 = 90;
/// Confidence for the catch-all.
const CONFIDENCE_CATCH_ALL: u8 = 50;

/// Maps a parsed failure to a failure type and a confidence percentage.
/// Rules are ordered; the first match wins.
pub fn classify(failure: &ParsedFailure, run: &TestRunResult) -> (FailureType, u8) {
    if run.overall == Overall::Timeout {
        return (FailureType::Timeout, CONFIDENCE_EXACT_MATCH);
    }

    let by_name = match failure.exception_type.as_str() {
        "SyntaxError" => Some(FailureType::SyntaxError),
        "IndentationError" | "TabError" => Some(FailureType::IndentationError),
        "AssertionError" => Some(FailureType::AssertionMismatch),
        "ImportError" | "ModuleNotFoundError" => Some(FailureType::ImportError),
        "AttributeError" => Some(FailureType::AttributeError),
        "TypeError" => Some(FailureType::TypeError),
        "ValueError" => Some(FailureType::ValueError),
        "NameError" | "UnboundLocalError" => Some(FailureType::NameError),
        "IndexError" => Some(FailureType::IndexError),
        "KeyError" => Some(FailureType::KeyError),
        "ZeroDivisionError" => Some(FailureType::ZeroDivisionError),
        _ => None,
    };
    if let Some(failure_type) = by_name {
        let confidence = if failure_type == FailureType::AssertionMismatch
            && failure.expected.is_some()
            && failure.actual.is_some()
        {
            CONFIDENCE_FULL_ASSERTION
        } else {
            CONFIDENCE_EXACT_MATCH
        };
        return (failure_type, confidence);
    }

    if failure.test_name == "<collection>" {
        return (FailureType::CollectionError, CONFIDENCE_EXACT_MATCH);
    }

    (FailureType::UnknownRuntimeError, CONFIDENCE_CATCH_ALL)
}
