//! Corpus runner: enumerates task × variant instances, drives pipelines
//! (optionally in parallel), persists traces, and aggregates metrics.
//!
//! A run directory is append-only: one `<task>.<variant>.trace.json` per
//! completed instance, `.skipped.json` markers for non-applicable instances,
//! and `.error.json` markers for instances that hit a harness error. Reruns
//! skip instances whose trace or skip marker already exists, so an
//! interrupted run resumes without repeating provider calls.

pub mod metrics;
pub mod report;

pub use metrics::{
    build_metrics_report, compute_avg_iterations, compute_failure_distribution,
    compute_first_try_rate, compute_tsr, FailureDistribution, LanguageMetrics, MetricsError,
    MetricsReport, RunRecord, VariantMetrics,
};
pub use report::{format_delta, render_human_report, render_machine_report, round1};

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EditTask, VisibilityVariant};
use crate::orchestrator::{run_task, PipelineConfig, TaskTrace};
use crate::provider::Provider;

pub const MACHINE_REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantSelection {
    One(VisibilityVariant),
    All,
}

impl VariantSelection {
    pub fn variants(self) -> Vec<VisibilityVariant> {
        match self {
            VariantSelection::One(v) => vec![v],
            VariantSelection::All => VisibilityVariant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub variants: VariantSelection,
    pub parallel: usize,
    /// Print one line per instance to stderr as the run progresses.
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            variants: VariantSelection::All,
            parallel: 1,
            verbose: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run directory {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace file {path}: {source}")]
    Trace {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("pipeline aborted: {0}")]
    Aborted(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SkipMarker {
    task_id: String,
    variant: VisibilityVariant,
    reason: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorMarker {
    task_id: String,
    variant: VisibilityVariant,
    error: String,
}

pub fn trace_file_name(task_id: &str, variant: VisibilityVariant) -> String {
    format!("{task_id}.{variant}.trace.json")
}

fn skip_file_name(task_id: &str, variant: VisibilityVariant) -> String {
    format!("{task_id}.{variant}.skipped.json")
}

fn error_file_name(task_id: &str, variant: VisibilityVariant) -> String {
    format!("{task_id}.{variant}.error.json")
}

pub fn write_trace(out_dir: &Path, trace: &TaskTrace) -> Result<PathBuf, HarnessError> {
    let path = out_dir.join(trace_file_name(&trace.task_id, trace.variant));
    let json = serde_json::to_string_pretty(trace).map_err(|source| HarnessError::Trace {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_trace(path: &Path) -> Result<TaskTrace, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Trace {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a run directory back into records plus the skipped/errored counts.
pub fn collect_records(run_dir: &Path) -> Result<(Vec<RunRecord>, usize, usize), HarnessError> {
    let mut names: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(io_err(run_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();

    let mut records = Vec::new();
    let mut not_applicable = 0;
    let mut errored = 0;
    for path in names {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name.ends_with(".trace.json") {
            records.push(RunRecord::from_trace(&read_trace(&path)?));
        } else if name.ends_with(".skipped.json") {
            not_applicable += 1;
        } else if name.ends_with(".error.json") {
            errored += 1;
        }
    }
    Ok((records, not_applicable, errored))
}

struct Instance<'a> {
    task: &'a EditTask,
    variant: VisibilityVariant,
}

/// Runs every task × applicable-variant instance, writing one trace per
/// instance, then aggregates and writes the machine report into the run
/// directory. Environment errors abort the run; per-instance pipeline errors
/// are recorded as `.error.json` markers and the run continues.
pub fn run_corpus(
    tasks: &[EditTask],
    base_config: &PipelineConfig,
    provider: &Provider,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<MetricsReport, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut queue: VecDeque<Instance> = VecDeque::new();
    for task in tasks {
        for variant in options.variants.variants() {
            queue.push_back(Instance { task, variant });
        }
    }

    let queue = Mutex::new(queue);
    let abort: Mutex<Option<String>> = Mutex::new(None);
    let workers = options.parallel.max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.lock().expect("abort lock").is_some() {
                    return;
                }
                let Some(instance) = queue.lock().expect("queue lock").pop_front() else {
                    return;
                };
                if let Err(message) =
                    run_instance(&instance, base_config, provider, out_dir, options.verbose)
                {
                    let mut slot = abort.lock().expect("abort lock");
                    if slot.is_none() {
                        *slot = Some(message);
                    }
                    return;
                }
            });
        }
    });

    if let Some(message) = abort.into_inner().expect("abort lock") {
        return Err(HarnessError::Aborted(message));
    }

    let (records, not_applicable, errored) = collect_records(out_dir)?;
    let report = build_metrics_report(&records, not_applicable, errored)?;
    let machine = render_machine_report(&report);
    let report_path = out_dir.join(MACHINE_REPORT_FILE);
    fs::write(&report_path, machine).map_err(io_err(&report_path))?;
    Ok(report)
}

/// Returns Err only for abort-worthy (environment) failures.
fn run_instance(
    instance: &Instance,
    base_config: &PipelineConfig,
    provider: &Provider,
    out_dir: &Path,
    verbose: bool,
) -> Result<(), String> {
    let task = instance.task;
    let variant = instance.variant;
    let trace_path = out_dir.join(trace_file_name(&task.id, variant));
    let skip_path = out_dir.join(skip_file_name(&task.id, variant));
    let error_path = out_dir.join(error_file_name(&task.id, variant));

    if trace_path.exists() || skip_path.exists() {
        if verbose {
            eprintln!("{} {}: already present, skipping", task.id, variant);
        }
        return Ok(());
    }

    if !task.is_renderable(variant) {
        let marker = SkipMarker {
            task_id: task.id.clone(),
            variant,
            reason: "not_applicable".to_string(),
        };
        let json = serde_json::to_string_pretty(&marker).expect("marker serializes");
        if let Err(e) = fs::write(&skip_path, json) {
            return Err(format!("cannot write skip marker: {e}"));
        }
        if verbose {
            eprintln!("{} {}: not applicable", task.id, variant);
        }
        return Ok(());
    }

    let config = PipelineConfig {
        variant,
        ..base_config.clone()
    };
    match run_task(task, &config, provider) {
        Ok(trace) => {
            let _ = fs::remove_file(&error_path);
            if verbose {
                eprintln!(
                    "{} {}: {:?} ({} attempts)",
                    task.id, variant, trace.verdict, trace.attempts_used
                );
            }
            write_trace(out_dir, &trace).map_err(|e| e.to_string())?;
            Ok(())
        }
        Err(e) if e.is_environment() => Err(e.to_string()),
        Err(e) => {
            let marker = ErrorMarker {
                task_id: task.id.clone(),
                variant,
                error: e.to_string(),
            };
            let json = serde_json::to_string_pretty(&marker).expect("marker serializes");
            if verbose {
                eprintln!("{} {}: error: {e}", task.id, variant);
            }
            fs::write(&error_path, json).map_err(|e| format!("cannot write error marker: {e}"))?;
            Ok(())
        }
    }
}
