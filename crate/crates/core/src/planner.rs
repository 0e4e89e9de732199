//! Planner: translates instruction + visible code into a structured,
//! visibility-aware edit plan containing no code.
//!
//! The plan is requested as a single JSON object with five fields; validation
//! enforces the variant's information restriction by requiring every observed
//! element to occur verbatim in the marker-stripped visible region.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EditTask, VisibilityVariant, VisibleCode};
use crate::prompts::{fill_template, PLANNER_SYSTEM, PLANNER_USER};
use crate::provider::{ChatRequest, ModelSettings, Provider, ProviderError};
use crate::structured::{request_validated, strip_code_fence, StructuredError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPlan {
    /// Identifiers copied verbatim from the visible code.
    pub observed_elements: Vec<String>,
    pub edit_intent: String,
    pub target_description: String,
    /// Ordered imperative change directives; never empty in a valid plan.
    pub required_changes: Vec<String>,
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    /// The element does not occur verbatim in the visible region.
    ElementNotVerbatim(String),
    /// A plan field contains a fenced code block.
    CodeFence {
        field: &'static str,
    },
    EmptyRequiredChanges,
}

impl std::fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanViolation::ElementNotVerbatim(element) => {
                write!(
                    f,
                    "observed element {element:?} not found verbatim in the visible code"
                )
            }
            PlanViolation::CodeFence { field } => {
                write!(f, "field {field} contains a fenced code block")
            }
            PlanViolation::EmptyRequiredChanges => write!(f, "required_changes is empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationResult {
    pub violations: Vec<PlanViolation>,
}

impl ValidationResult {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    fn message(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    /// The model failed to produce a valid plan twice (original ask plus one
    /// corrective re-ask). The task is scored as failed, not crashed.
    #[error("plan rejected: {reason}")]
    Rejected { reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Builds the planner request: instruction, variant-marked code, a marker
/// legend matching the variant, and the plan schema. Pure, so identical
/// inputs always produce identical requests.
pub fn build_planner_prompt(
    task: &EditTask,
    visible: &VisibleCode,
    settings: &ModelSettings,
) -> ChatRequest {
    let legend = match visible.variant {
        VisibilityVariant::CodeOnly => String::new(),
        VisibilityVariant::Highlight => {
            "A highlighted region marks the code to edit: a begin-highlight marker \
             precedes it and a matching end marker follows it.\n"
                .to_string()
        }
        VisibilityVariant::HighlightCursor => {
            "A highlighted region marks the code to edit: a begin-highlight marker \
             precedes it and a matching end marker follows it. A cursor marker inside \
             the region pinpoints the exact position of interest.\n"
                .to_string()
        }
    };
    let user = fill_template(
        PLANNER_USER,
        &[
            ("INSTRUCTION_LANGUAGE", task.instruction_language.as_str()),
            ("INSTRUCTION", task.instruction.as_str()),
            ("VARIANT", visible.variant.label()),
            ("CODE_LANGUAGE", task.code_language.as_str()),
            ("VISIBLE_CODE", visible.text.as_str()),
            ("MARKER_LEGEND", legend.as_str()),
        ],
    );
    ChatRequest::new(settings, PLANNER_SYSTEM).with_user(user)
}

/// Checks a plan against the visible code it was planned from: verbatim
/// observed elements, no fenced code blocks, non-empty required changes.
pub fn validate_plan(plan: &EditPlan, visible: &VisibleCode) -> ValidationResult {
    let mut violations = Vec::new();
    let region = visible.editable_region();

    for element in &plan.observed_elements {
        if !region.contains(element.as_str()) {
            violations.push(PlanViolation::ElementNotVerbatim(element.clone()));
        }
    }
    let fence_fields: [(&'static str, &dyn Fn() -> bool); 5] = [
        ("observed_elements", &|| {
            plan.observed_elements.iter().any(|s| s.contains("```"))
        }),
        ("edit_intent", &|| plan.edit_intent.contains("```")),
        ("target_description", &|| {
            plan.target_description.contains("```")
        }),
        ("required_changes", &|| {
            plan.required_changes.iter().any(|s| s.contains("```"))
        }),
        ("constraints", &|| {
            plan.constraints.iter().any(|s| s.contains("```"))
        }),
    ];
    for (field, has_fence) in fence_fields {
        if has_fence() {
            violations.push(PlanViolation::CodeFence { field });
        }
    }
    if plan.required_changes.is_empty() {
        violations.push(PlanViolation::EmptyRequiredChanges);
    }
    ValidationResult { violations }
}

fn parse_plan(raw: &str, visible: &VisibleCode) -> Result<EditPlan, String> {
    let plan: EditPlan = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| format!("not a valid plan object: {e}"))?;
    let validation = validate_plan(&plan, visible);
    if validation.is_pass() {
        Ok(plan)
    } else {
        Err(validation.message())
    }
}

/// Asks for a plan, validating the response. Schema-invalid output triggers
/// one corrective re-ask quoting the validation failure; a second failure
/// rejects with [`PlanError::Rejected`].
pub fn plan(
    task: &EditTask,
    visible: &VisibleCode,
    provider: &Provider,
    settings: &ModelSettings,
) -> Result<EditPlan, PlanError> {
    let request = build_planner_prompt(task, visible, settings);
    match request_validated(provider, &request, |raw| parse_plan(raw, visible)) {
        Ok(plan) => Ok(plan),
        Err(StructuredError::Rejected {
            first_error,
            second_error,
            ..
        }) => Err(PlanError::Rejected {
            reason: format!("{second_error} (first attempt: {first_error})"),
        }),
        Err(StructuredError::Provider(e)) => Err(PlanError::Provider(e)),
    }
}
