//! Orchestrator: runs the Planner → Editor → Verifier pipeline with the
//! FAL-mediated bounded refinement loop, producing a complete per-task trace.
//!
//! One plan per trace; refinement always returns to the Editor, never the
//! Planner. Each attempt edits the original code afresh, guided by the
//! latest feedback. Apply failures consume budget like any other attempt.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{render_visible_code, CorpusError, EditTask, VisibilityVariant};
use crate::editor::{
    apply_fragments, edit, is_full_file_fragment, ApplyError, EditError, EditFragment,
};
use crate::fal::{analyze, render_feedback, FailureType, FeedbackReport};
use crate::planner::{plan, EditPlan, PlanError};
use crate::provider::{ModelSettings, Provider, ProviderError};
use crate::taxonomy::TaxonomyOutcome;
use crate::verifier::{is_success, run_tests, TestRunResult, VerifierError, DEFAULT_TEST_TIMEOUT};

/// Default refinement budget: one initial attempt plus three refinements.
pub const DEFAULT_MAX_REFINEMENTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackHistory {
    /// Only the latest iteration's feedback is sent to the editor.
    #[default]
    LatestOnly,
    /// All feedback accumulated so far is sent.
    Accumulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_refinements: u32,
    pub test_timeout_secs: u64,
    pub variant: VisibilityVariant,
    pub model: ModelSettings,
    pub feedback_history: FeedbackHistory,
}

impl PipelineConfig {
    pub fn new(variant: VisibilityVariant) -> Self {
        PipelineConfig {
            max_refinements: DEFAULT_MAX_REFINEMENTS,
            test_timeout_secs: DEFAULT_TEST_TIMEOUT.as_secs(),
            variant,
            model: ModelSettings::default(),
            feedback_history: FeedbackHistory::default(),
        }
    }

    pub fn test_timeout(&self) -> Duration {
        Duration::from_secs(self.test_timeout_secs)
    }

    /// Verifier runs allowed: the initial attempt plus the refinements.
    pub fn max_attempts(&self) -> u32 {
        1 + self.max_refinements
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanOutcome {
    Ok { plan: EditPlan },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FragmentsOutcome {
    Ok { fragments: Vec<EditFragment> },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Ran { result: TestRunResult },
    ApplyFailed { error: String },
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based attempt number.
    pub index: u32,
    pub fragments: FragmentsOutcome,
    /// Whether the editor returned the whole file as one degenerate fragment.
    pub full_file: bool,
    pub run: RunOutcome,
    /// Rendered FAL text; present iff another attempt follows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The full per-task iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task_id: String,
    pub instruction_language: String,
    pub variant: VisibilityVariant,
    pub plan: PlanOutcome,
    pub iterations: Vec<IterationRecord>,
    pub verdict: Verdict,
    pub attempts_used: u32,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<TaxonomyOutcome>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Provider(ProviderError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

impl PipelineError {
    /// Environment problems abort a whole corpus run; everything else is
    /// recorded per instance.
    pub fn is_environment(&self) -> bool {
        matches!(self, PipelineError::Verifier(VerifierError::Environment(_)))
    }
}

/// Feedback synthesized for anchor problems, so apply failures feed the next
/// attempt like any test failure would.
fn apply_failure_feedback(error: &ApplyError, fragments: &[EditFragment]) -> FeedbackReport {
    let diagnosis = match error {
        ApplyError::AnchorNotFound { index } => format!(
            "Edit fragment {} anchor {:?} was not found in the code.",
            index,
            truncate_anchor(fragments, *index)
        ),
        ApplyError::AmbiguousAnchor { index, count } => format!(
            "Edit fragment {} anchor {:?} matches {} places; it must match exactly one.",
            index,
            truncate_anchor(fragments, *index),
            count
        ),
        ApplyError::EmptyAnchor { index } => {
            format!("Edit fragment {index} has an empty anchor.")
        }
    };
    FeedbackReport {
        test: "<apply>".to_string(),
        failure_type: FailureType::UnknownRuntimeError,
        diagnosis,
        action: "Provide an anchor that matches the current code exactly once.".to_string(),
        expected: None,
        actual: None,
        confidence: 50,
    }
}

fn truncate_anchor(fragments: &[EditFragment], index: usize) -> String {
    let anchor = fragments
        .get(index)
        .map(|f| f.anchor.as_str())
        .unwrap_or("");
    if anchor.chars().count() > 60 {
        let head: String = anchor.chars().take(60).collect();
        format!("{head}…")
    } else {
        anchor.to_string()
    }
}

/// Runs one task under one visibility variant: plan once, then up to
/// `1 + max_refinements` edit→apply→verify attempts, feeding FAL output
/// back into the editor between attempts.
pub fn run_task(
    task: &EditTask,
    config: &PipelineConfig,
    provider: &Provider,
) -> Result<TaskTrace, PipelineError> {
    let started = Instant::now();
    let visible = render_visible_code(task, config.variant)?;

    let edit_plan = match plan(task, &visible, provider, &config.model) {
        Ok(p) => p,
        Err(PlanError::Rejected { reason }) => {
            return Ok(TaskTrace {
                task_id: task.id.clone(),
                instruction_language: task.instruction_language.clone(),
                variant: config.variant,
                plan: PlanOutcome::Failed { reason },
                iterations: Vec::new(),
                verdict: Verdict::Fail,
                attempts_used: 0,
                wall_time_secs: started.elapsed().as_secs_f64(),
                taxonomy: None,
            });
        }
        Err(PlanError::Provider(e)) => return Err(PipelineError::Provider(e)),
    };

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut verdict = Verdict::Fail;
    let mut pending_feedback: Vec<FeedbackReport> = Vec::new();

    for attempt in 1..=config.max_attempts() {
        let feedback_arg = if pending_feedback.is_empty() {
            None
        } else {
            Some(pending_feedback.as_slice())
        };

        let fragments = match edit(
            &edit_plan,
            &task.original_code,
            provider,
            feedback_arg,
            &config.model,
        ) {
            Ok(fragments) => fragments,
            Err(EditError::Rejected { reason }) => {
                iterations.push(IterationRecord {
                    index: attempt,
                    fragments: FragmentsOutcome::Failed { reason },
                    full_file: false,
                    run: RunOutcome::NotRun,
                    feedback: None,
                });
                break;
            }
            Err(EditError::Provider(e)) => return Err(PipelineError::Provider(e)),
        };
        let full_file = is_full_file_fragment(&task.original_code, &fragments);

        match apply_fragments(&task.original_code, &fragments) {
            Ok(edited) => {
                let result = run_tests(&edited, task, config.test_timeout())?;
                if is_success(&result) {
                    iterations.push(IterationRecord {
                        index: attempt,
                        fragments: FragmentsOutcome::Ok { fragments },
                        full_file,
                        run: RunOutcome::Ran { result },
                        feedback: None,
                    });
                    verdict = Verdict::Pass;
                    break;
                }
                let reports = analyze(&result);
                let more_attempts = attempt < config.max_attempts();
                iterations.push(IterationRecord {
                    index: attempt,
                    fragments: FragmentsOutcome::Ok { fragments },
                    full_file,
                    run: RunOutcome::Ran { result },
                    feedback: more_attempts.then(|| render_feedback(&reports)),
                });
                update_feedback(&mut pending_feedback, reports, config.feedback_history);
            }
            Err(apply_error) => {
                let report = apply_failure_feedback(&apply_error, &fragments);
                let more_attempts = attempt < config.max_attempts();
                iterations.push(IterationRecord {
                    index: attempt,
                    fragments: FragmentsOutcome::Ok { fragments },
                    full_file,
                    run: RunOutcome::ApplyFailed {
                        error: apply_error.to_string(),
                    },
                    feedback: more_attempts.then(|| render_feedback(std::slice::from_ref(&report))),
                });
                update_feedback(&mut pending_feedback, vec![report], config.feedback_history);
            }
        }
    }

    let attempts_used = iterations.len() as u32;
    Ok(TaskTrace {
        task_id: task.id.clone(),
        instruction_language: task.instruction_language.clone(),
        variant: config.variant,
        plan: PlanOutcome::Ok { plan: edit_plan },
        iterations,
        verdict,
        attempts_used,
        wall_time_secs: started.elapsed().as_secs_f64(),
        taxonomy: None,
    })
}

fn update_feedback(
    pending: &mut Vec<FeedbackReport>,
    new_reports: Vec<FeedbackReport>,
    history: FeedbackHistory,
) {
    match history {
        FeedbackHistory::LatestOnly => *pending = new_reports,
        FeedbackHistory::Accumulate => pending.extend(new_reports),
    }
}
