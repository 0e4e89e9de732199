//! Error taxonomy: classifies each failed trace into one of four root-cause
//! categories (IH, IG, RE, CM) with a confidence score and justification,
//! via a schema-validated model call.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EditTask;
use crate::editor::apply_fragments;
use crate::orchestrator::{FragmentsOutcome, PlanOutcome, RunOutcome, TaskTrace, Verdict};
use crate::prompts::{fill_template, TAXONOMY_SYSTEM, TAXONOMY_USER};
use crate::provider::{ChatRequest, ModelSettings, Provider, ProviderError};
use crate::structured::{request_validated, strip_code_fence, StructuredError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaxonomyCategory {
    /// Instruction Hallucination: the instruction was misread or ignored.
    IH,
    /// Implementation Gap: right target, logically incorrect code.
    IG,
    /// Regression Error: previously working behavior broke.
    RE,
    /// Context Misalignment: only part of the affected code was updated.
    CM,
}

impl TaxonomyCategory {
    pub const ALL: [TaxonomyCategory; 4] = [
        TaxonomyCategory::IH,
        TaxonomyCategory::IG,
        TaxonomyCategory::RE,
        TaxonomyCategory::CM,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaxonomyCategory::IH => "IH",
            TaxonomyCategory::IG => "IG",
            TaxonomyCategory::RE => "RE",
            TaxonomyCategory::CM => "CM",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyLabel {
    pub category: TaxonomyCategory,
    /// In [0, 1].
    pub confidence: f64,
    pub justification: String,
}

/// How a classification attempt ended; stored in the trace file so
/// unclassified failures are counted, never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaxonomyOutcome {
    Label(TaxonomyLabel),
    Unclassified { unclassified: String },
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    /// The model failed schema validation twice; the trace is counted as
    /// unclassified.
    #[error("unclassified: {reason}")]
    Unclassified { reason: String },
    #[error("trace {task_id} did not fail; only failed traces are classified")]
    NotFailed { task_id: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Validates one raw model response against the label schema. Pure; exercised
/// directly by the response-fixture tests.
pub fn parse_label(raw: &str) -> Result<TaxonomyLabel, String> {
    #[derive(Deserialize)]
    struct WireLabel {
        category: String,
        confidence: f64,
        justification: String,
    }
    let wire: WireLabel = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| format!("not a valid label object: {e}"))?;
    let category = match wire.category.as_str() {
        "IH" => TaxonomyCategory::IH,
        "IG" => TaxonomyCategory::IG,
        "RE" => TaxonomyCategory::RE,
        "CM" => TaxonomyCategory::CM,
        other => {
            return Err(format!(
                "unknown category {other:?}; expected IH, IG, RE, or CM"
            ))
        }
    };
    if !(0.0..=1.0).contains(&wire.confidence) {
        return Err(format!("confidence {} outside [0, 1]", wire.confidence));
    }
    if wire.justification.trim().is_empty() {
        return Err("justification is empty".to_string());
    }
    Ok(TaxonomyLabel {
        category,
        confidence: wire.confidence,
        justification: wire.justification,
    })
}

fn plan_section(trace: &TaskTrace) -> String {
    match &trace.plan {
        PlanOutcome::Ok { plan } => serde_json::to_string_pretty(plan).expect("plan serializes"),
        PlanOutcome::Failed { .. } => "PLAN UNAVAILABLE".to_string(),
    }
}

fn edited_code_section(trace: &TaskTrace, task: &EditTask) -> String {
    let last_applied = trace.iterations.iter().rev().find_map(|iteration| {
        match (&iteration.fragments, &iteration.run) {
            (FragmentsOutcome::Ok { fragments }, RunOutcome::Ran { .. }) => Some(fragments),
            _ => None,
        }
    });
    match last_applied {
        Some(fragments) => match apply_fragments(&task.original_code, fragments) {
            Ok(edited) => edited.text,
            Err(_) => "EDITED CODE UNAVAILABLE".to_string(),
        },
        None => "EDITED CODE UNAVAILABLE".to_string(),
    }
}

const MAX_PROMPT_LOG_CHARS: usize = 6000;

fn failure_log_section(trace: &TaskTrace) -> String {
    let log = trace
        .iterations
        .iter()
        .rev()
        .find_map(|iteration| match &iteration.run {
            RunOutcome::Ran { result } => Some(result.raw_log.clone()),
            RunOutcome::ApplyFailed { error } => {
                Some(format!("edit could not be applied: {error}"))
            }
            RunOutcome::NotRun => None,
        })
        .unwrap_or_else(|| "LOG UNAVAILABLE".to_string());
    let total = log.chars().count();
    if total <= MAX_PROMPT_LOG_CHARS {
        return log;
    }
    let tail: String = log.chars().skip(total - MAX_PROMPT_LOG_CHARS).collect();
    format!("… (log truncated)\n{tail}")
}

/// Builds the classifier request from exactly five inputs: the instruction,
/// the original code, the edit plan, the final edited code, and the failure
/// log, plus the category definitions and output schema. Pure.
pub fn build_taxonomy_prompt(
    trace: &TaskTrace,
    task: &EditTask,
    settings: &ModelSettings,
) -> ChatRequest {
    let user = fill_template(
        TAXONOMY_USER,
        &[
            ("INSTRUCTION_LANGUAGE", task.instruction_language.as_str()),
            ("INSTRUCTION", task.instruction.as_str()),
            ("ORIGINAL_CODE", task.original_code.as_str()),
            ("PLAN", plan_section(trace).as_str()),
            ("EDITED_CODE", edited_code_section(trace, task).as_str()),
            ("FAILURE_LOG", failure_log_section(trace).as_str()),
        ],
    );
    ChatRequest::new(settings, TAXONOMY_SYSTEM).with_user(user)
}

/// Classifies one failed trace. Invalid output triggers one corrective
/// re-ask; a second failure yields [`TaxonomyError::Unclassified`].
pub fn classify_failure(
    trace: &TaskTrace,
    task: &EditTask,
    provider: &Provider,
    settings: &ModelSettings,
) -> Result<TaxonomyLabel, TaxonomyError> {
    if trace.verdict != Verdict::Fail {
        return Err(TaxonomyError::NotFailed {
            task_id: trace.task_id.clone(),
        });
    }
    let request = build_taxonomy_prompt(trace, task, settings);
    match request_validated(provider, &request, parse_label) {
        Ok(label) => Ok(label),
        Err(StructuredError::Rejected {
            first_error,
            second_error,
            ..
        }) => Err(TaxonomyError::Unclassified {
            reason: format!("{second_error} (first attempt: {first_error})"),
        }),
        Err(StructuredError::Provider(e)) => Err(TaxonomyError::Provider(e)),
    }
}
