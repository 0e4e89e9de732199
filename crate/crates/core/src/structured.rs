//! Structured model output: fence stripping and the shared two-strike
//! ask/validate/re-ask protocol used by the planner, editor, and taxonomy
//! classifier.

use thiserror::Error;

use crate::prompts::{fill_template, REASK_USER};
use crate::provider::{ChatRequest, Provider, ProviderError};

#[derive(Debug, Error)]
pub enum StructuredError {
    /// The model produced invalid output twice: once on the original ask and
    /// again after one corrective re-ask.
    #[error(
        "invalid output after corrective re-ask: {second_error} (first failure: {first_error})"
    )]
    Rejected {
        first_error: String,
        second_error: String,
        last_raw: String,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Removes a single markdown fence wrapper (```lang ... ```), if present,
/// so that models answering in fenced JSON still parse.
pub fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(after_open) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(body) = after_open.strip_suffix("```") else {
        return trimmed;
    };
    // Drop the language tag on the opening fence line.
    match body.split_once('\n') {
        Some((first, rest)) if !first.trim().is_empty() => rest.trim(),
        _ => body.trim(),
    }
}

/// Issues `request`, validates the response with `parse`, and on failure asks
/// once more with the validation failure quoted. A second failure rejects.
pub fn request_validated<T>(
    provider: &Provider,
    request: &ChatRequest,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, StructuredError> {
    let first = provider.complete(request)?;
    let first_error = match parse(&first.text) {
        Ok(value) => return Ok(value),
        Err(e) => e,
    };

    let reask = request.clone().with_user(fill_template(
        REASK_USER,
        &[("FAILURE", &first_error), ("PREVIOUS", &first.text)],
    ));
    let second = provider.complete(&reask)?;
    match parse(&second.text) {
        Ok(value) => Ok(value),
        Err(second_error) => Err(StructuredError::Rejected {
            first_error,
            second_error,
            last_raw: second.text,
        }),
    }
}
