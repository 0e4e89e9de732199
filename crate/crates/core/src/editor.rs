//! Editor: applies the plan as minimal, literal, anchor-based fragment
//! edits, preserving all unrelated code byte-for-byte.
//!
//! A fragment is an `{anchor, replacement}` pair. Anchors must match the
//! current text exactly once; ambiguity is the dominant silent-corruption
//! risk in fragment editing, so it aborts the apply instead of guessing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fal::{render_feedback, FeedbackReport};
use crate::planner::EditPlan;
use crate::prompts::{fill_template, EDITOR_SYSTEM, EDITOR_USER};
use crate::provider::{ChatRequest, ModelSettings, Provider, ProviderError};
use crate::structured::{request_validated, strip_code_fence, StructuredError};

pub const FEEDBACK_SECTION_HEADER: &str = "Test feedback from the previous attempt:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditFragment {
    /// Exact source excerpt to locate; must occur exactly once at apply time.
    pub anchor: String,
    pub replacement: String,
}

/// Where a replacement landed in the output text (byte offsets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedEdit {
    pub fragment: EditFragment,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditedCode {
    pub text: String,
    pub applied: Vec<AppliedEdit>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("fragment {index}: anchor not found in code")]
    AnchorNotFound { index: usize },
    #[error("fragment {index}: anchor matches {count} times, expected exactly one")]
    AmbiguousAnchor { index: usize, count: usize },
    #[error("fragment {index}: empty anchor")]
    EmptyAnchor { index: usize },
}

#[derive(Debug, Error)]
pub enum EditError {
    /// The model failed to produce valid fragments twice.
    #[error("edit rejected: {reason}")]
    Rejected { reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Builds the editor request: the plan verbatim, the full unmarked code, the
/// fragment output schema, and — on refinement turns — the rendered feedback
/// block. Pure.
pub fn build_editor_prompt(
    plan: &EditPlan,
    code: &str,
    feedback: Option<&[FeedbackReport]>,
    settings: &ModelSettings,
) -> ChatRequest {
    let feedback_section = match feedback {
        Some(reports) if !reports.is_empty() => {
            format!(
                "{FEEDBACK_SECTION_HEADER}\n{}\n\n",
                render_feedback(reports)
            )
        }
        _ => String::new(),
    };
    let plan_json = serde_json::to_string_pretty(plan).expect("plan serializes");
    let user = fill_template(
        EDITOR_USER,
        &[
            ("PLAN", plan_json.as_str()),
            ("CODE", code),
            ("FEEDBACK_SECTION", feedback_section.as_str()),
        ],
    );
    ChatRequest::new(settings, EDITOR_SYSTEM).with_user(user)
}

fn parse_fragments(raw: &str) -> Result<Vec<EditFragment>, String> {
    let fragments: Vec<EditFragment> = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| format!("not a valid fragment array: {e}"))?;
    if fragments.is_empty() {
        return Err("fragment array is empty; produce at least one edit".into());
    }
    if let Some(i) = fragments.iter().position(|f| f.anchor.is_empty()) {
        return Err(format!("fragment {i} has an empty anchor"));
    }
    Ok(fragments)
}

/// Asks the model for edit fragments. Schema-invalid output triggers one
/// corrective re-ask, then [`EditError::Rejected`].
pub fn edit(
    plan: &EditPlan,
    code: &str,
    provider: &Provider,
    feedback: Option<&[FeedbackReport]>,
    settings: &ModelSettings,
) -> Result<Vec<EditFragment>, EditError> {
    let request = build_editor_prompt(plan, code, feedback, settings);
    match request_validated(provider, &request, parse_fragments) {
        Ok(fragments) => Ok(fragments),
        Err(StructuredError::Rejected {
            first_error,
            second_error,
            ..
        }) => Err(EditError::Rejected {
            reason: format!("{second_error} (first attempt: {first_error})"),
        }),
        Err(StructuredError::Provider(e)) => Err(EditError::Provider(e)),
    }
}

/// Applies fragments in order, each against the text produced by its
/// predecessors. Each anchor must match exactly once at its turn. Fails
/// without partial output; on success every byte outside the recorded
/// replacement ranges is identical to the input.
pub fn apply_fragments(code: &str, fragments: &[EditFragment]) -> Result<EditedCode, ApplyError> {
    let mut text = code.to_string();
    let mut applied: Vec<AppliedEdit> = Vec::with_capacity(fragments.len());

    for (index, fragment) in fragments.iter().enumerate() {
        if fragment.anchor.is_empty() {
            return Err(ApplyError::EmptyAnchor { index });
        }
        let count = text.matches(fragment.anchor.as_str()).count();
        if count == 0 {
            return Err(ApplyError::AnchorNotFound { index });
        }
        if count > 1 {
            return Err(ApplyError::AmbiguousAnchor { index, count });
        }
        let pos = text.find(fragment.anchor.as_str()).expect("counted above");
        let anchor_end = pos + fragment.anchor.len();
        let new_end = pos + fragment.replacement.len();
        let shift = fragment.replacement.len() as isize - fragment.anchor.len() as isize;

        // Earlier ranges keep, shift, or get absorbed by the new one.
        let mut merged_start = pos;
        let mut merged_end_in = anchor_end;
        let mut kept: Vec<AppliedEdit> = Vec::with_capacity(applied.len() + 1);
        for prior in applied {
            if prior.end <= pos {
                kept.push(prior);
            } else if prior.start >= anchor_end {
                kept.push(AppliedEdit {
                    fragment: prior.fragment,
                    start: (prior.start as isize + shift) as usize,
                    end: (prior.end as isize + shift) as usize,
                });
            } else {
                merged_start = merged_start.min(prior.start);
                merged_end_in = merged_end_in.max(prior.end);
            }
        }
        let merged_end = if merged_end_in > anchor_end {
            (merged_end_in as isize + shift) as usize
        } else {
            new_end
        };
        kept.push(AppliedEdit {
            fragment: fragment.clone(),
            start: merged_start,
            end: merged_end,
        });
        kept.sort_by_key(|a| a.start);
        applied = kept;

        text.replace_range(pos..anchor_end, &fragment.replacement);
    }

    Ok(EditedCode { text, applied })
}

/// True when the model returned the whole file as one degenerate fragment.
pub fn is_full_file_fragment(code: &str, fragments: &[EditFragment]) -> bool {
    fragments.len() == 1 && fragments[0].anchor == code
}
