//! Stage 3: explanation generation. A fixed per-type template table turns a
//! classified failure into a diagnosis and a suggested repair action;
//! expected/actual values are copied through.

use super::{FailureType, FeedbackReport, ParsedFailure};

fn templates(failure_type: FailureType) -> (&'static str, &'static str) {
    match failure_type {
        FailureType::AssertionMismatch => (
            "Expected value does not match actual value.",
            "Modify the logic to match the expected calculation.",
        ),
        FailureType::SyntaxError => (
            "The edited code contains a syntax error and cannot be parsed.",
            "Fix the syntax error at the reported location.",
        ),
        FailureType::ImportError => (
            "A module or name could not be imported.",
            "Correct the import statement or the imported name.",
        ),
        FailureType::AttributeError => (
            "An attribute was accessed on an object that does not define it.",
            "Use an attribute the object defines, or add the missing attribute.",
        ),
        FailureType::TypeError => (
            "An operation received a value of the wrong type.",
            "Adjust the operation or convert the value to the expected type.",
        ),
        FailureType::ValueError => (
            "An operation received a value of the right type but an unacceptable value.",
            "Validate or correct the value passed to the operation.",
        ),
        FailureType::NameError => (
            "A name is used that is not defined in scope.",
            "Define the name or fix the reference to an existing one.",
        ),
        FailureType::IndexError => (
            "A sequence index is out of range.",
            "Adjust the index or guard against out-of-range access.",
        ),
        FailureType::KeyError => (
            "A lookup used a key that is not present.",
            "Use an existing key or add the missing entry before the lookup.",
        ),
        FailureType::ZeroDivisionError => (
            "A division by zero occurred.",
            "Guard the division against a zero denominator.",
        ),
        FailureType::IndentationError => (
            "The code's indentation is inconsistent.",
            "Fix the indentation to match the surrounding block structure.",
        ),
        FailureType::Timeout => (
            "The test run exceeded the time limit and was terminated.",
            "Remove or bound the non-halting loop so the tests terminate.",
        ),
        FailureType::CollectionError => (
            "The test suite failed to load before any test ran.",
            "Fix the error that prevents the test module from importing.",
        ),
        FailureType::UnknownRuntimeError => (
            "An unrecognized runtime error occurred.",
            "Inspect the log excerpt and correct the underlying fault.",
        ),
    }
}

/// Builds the structured feedback block for one classified failure.
pub fn explain(
    failure: &ParsedFailure,
    failure_type: FailureType,
    confidence: u8,
) -> FeedbackReport {
    let (diagnosis, action) = templates(failure_type);
    FeedbackReport {
        test: failure.test_name.clone(),
        failure_type,
        diagnosis: diagnosis.to_string(),
        action: action.to_string(),
        expected: failure.expected.clone(),
        actual: failure.actual.clone(),
        confidence,
    }
}
