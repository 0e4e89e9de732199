//! Multi-agent instructed code editing: a Planner translates the instruction
//! into a structured edit plan, an Editor applies it as minimal anchor-based
//! fragments, and a Verifier runs the real test suite in a sandbox. Failed
//! runs pass through a deterministic Failure Abstraction Layer whose
//! structured feedback drives up to three refinement iterations. Failed
//! traces can be classified into four root-cause categories, and a harness
//! aggregates benchmark-style metrics over whole corpora.

pub mod corpus;
pub mod editor;
pub mod fal;
pub mod harness;
pub mod orchestrator;
pub mod planner;
pub mod prompts;
pub mod provider;
pub mod structured;
pub mod taxonomy;
pub mod verifier;

pub use corpus::{load_corpus, render_visible_code, EditTask, VisibilityVariant, VisibleCode};
pub use editor::{apply_fragments, EditFragment, EditedCode};
pub use fal::{
    analyze, classify, explain, parse_log, render_feedback, FailureType, FeedbackReport,
};
pub use harness::{run_corpus, MetricsReport, RunOptions, RunRecord, VariantSelection};
pub use orchestrator::{run_task, PipelineConfig, TaskTrace, Verdict};
pub use planner::{build_planner_prompt, plan, validate_plan, EditPlan};
pub use provider::{Cassette, ChatRequest, ChatResponse, ModelSettings, Provider};
pub use taxonomy::{classify_failure, TaxonomyCategory, TaxonomyLabel};
pub use verifier::{is_success, run_tests, TestRunResult};
