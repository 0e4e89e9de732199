//! Benchmark metrics over run records: task success rate, first-try rate,
//! iteration efficiency, and the failure-category distribution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VisibilityVariant;
use crate::orchestrator::{TaskTrace, Verdict};
use crate::taxonomy::{TaxonomyCategory, TaxonomyLabel, TaxonomyOutcome};

/// One task × variant instance, reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub instruction_language: String,
    pub variant: VisibilityVariant,
    pub verdict: Verdict,
    pub attempts_used: u32,
    pub first_try: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<TaxonomyLabel>,
}

impl RunRecord {
    pub fn from_trace(trace: &TaskTrace) -> RunRecord {
        let taxonomy = match &trace.taxonomy {
            Some(TaxonomyOutcome::Label(label)) => Some(label.clone()),
            _ => None,
        };
        RunRecord {
            task_id: trace.task_id.clone(),
            instruction_language: trace.instruction_language.clone(),
            variant: trace.variant,
            verdict: trace.verdict,
            attempts_used: trace.attempts_used,
            first_try: trace.verdict == Verdict::Pass && trace.attempts_used == 1,
            taxonomy,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no run records to aggregate")]
    EmptyRecords,
}

/// Task success rate: passed / total × 100. Unrounded; display rounding
/// happens at render time only.
pub fn compute_tsr(records: &[RunRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let passed = records.iter().filter(|r| r.passed()).count();
    Ok(passed as f64 / records.len() as f64 * 100.0)
}

/// Share of records that passed on the very first verifier run.
pub fn compute_first_try_rate(records: &[RunRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let first_try = records.iter().filter(|r| r.first_try).count();
    Ok(first_try as f64 / records.len() as f64 * 100.0)
}

/// Mean verifier runs per record, over all records.
pub fn compute_avg_iterations(records: &[RunRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let total: u64 = records.iter().map(|r| u64::from(r.attempts_used)).sum();
    Ok(total as f64 / records.len() as f64)
}

/// Category percentages over failed-and-classified records; unclassified
/// failures are counted separately, never folded into the distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDistribution {
    pub has_failures: bool,
    pub classified: usize,
    pub unclassified: usize,
    counts: [usize; 4],
}

impl FailureDistribution {
    pub fn percent(&self, category: TaxonomyCategory) -> f64 {
        if self.classified == 0 {
            return 0.0;
        }
        let idx = TaxonomyCategory::ALL
            .iter()
            .position(|c| *c == category)
            .expect("category in ALL");
        self.counts[idx] as f64 / self.classified as f64 * 100.0
    }
}

pub fn compute_failure_distribution(records: &[RunRecord]) -> FailureDistribution {
    let mut counts = [0usize; 4];
    let mut classified = 0;
    let mut unclassified = 0;
    let mut failures = 0;
    for record in records.iter().filter(|r| !r.passed()) {
        failures += 1;
        match &record.taxonomy {
            Some(label) => {
                classified += 1;
                let idx = TaxonomyCategory::ALL
                    .iter()
                    .position(|c| *c == label.category)
                    .expect("category in ALL");
                counts[idx] += 1;
            }
            None => unclassified += 1,
        }
    }
    FailureDistribution {
        has_failures: failures > 0,
        classified,
        unclassified,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub variant: VisibilityVariant,
    pub instances: usize,
    pub tsr: f64,
    pub first_try_rate: f64,
    pub avg_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageMetrics {
    pub language: String,
    pub instances: usize,
    pub tsr: f64,
    pub first_try_rate: f64,
    pub avg_iterations: f64,
    pub variants: Vec<VariantMetrics>,
}

/// Aggregates for a whole run. All rates unrounded internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_instances: usize,
    pub not_applicable: usize,
    pub errored: usize,
    pub tsr_overall: f64,
    pub first_try_rate: f64,
    pub avg_iterations: f64,
    pub languages: Vec<LanguageMetrics>,
    pub failure_distribution: FailureDistribution,
}

pub fn build_metrics_report(
    records: &[RunRecord],
    not_applicable: usize,
    errored: usize,
) -> Result<MetricsReport, MetricsError> {
    let tsr_overall = compute_tsr(records)?;
    let first_try_rate = compute_first_try_rate(records)?;
    let avg_iterations = compute_avg_iterations(records)?;

    let mut language_names: Vec<String> = records
        .iter()
        .map(|r| r.instruction_language.clone())
        .collect();
    language_names.sort();
    language_names.dedup();

    let mut languages = Vec::with_capacity(language_names.len());
    for language in language_names {
        let subset: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.instruction_language == language)
            .cloned()
            .collect();
        let mut variants = Vec::new();
        for variant in VisibilityVariant::ALL {
            let variant_subset: Vec<RunRecord> = subset
                .iter()
                .filter(|r| r.variant == variant)
                .cloned()
                .collect();
            if variant_subset.is_empty() {
                continue;
            }
            variants.push(VariantMetrics {
                variant,
                instances: variant_subset.len(),
                tsr: compute_tsr(&variant_subset)?,
                first_try_rate: compute_first_try_rate(&variant_subset)?,
                avg_iterations: compute_avg_iterations(&variant_subset)?,
            });
        }
        languages.push(LanguageMetrics {
            language,
            instances: subset.len(),
            tsr: compute_tsr(&subset)?,
            first_try_rate: compute_first_try_rate(&subset)?,
            avg_iterations: compute_avg_iterations(&subset)?,
            variants,
        });
    }

    Ok(MetricsReport {
        total_instances: records.len(),
        not_applicable,
        errored,
        tsr_overall,
        first_try_rate,
        avg_iterations,
        languages,
        failure_distribution: compute_failure_distribution(records),
    })
}
