//! Report rendering: human-readable tables plus a machine-readable JSON
//! document carrying the same numbers.
//!
//! Display rounding is one decimal place, half-up, applied only here; the
//! metrics themselves stay unrounded. The variant table shows deltas
//! relative to the CODE ONLY variant, e.g. `67.0 (−2.3)`.

use serde::Serialize;

use crate::corpus::VisibilityVariant;
use crate::taxonomy::TaxonomyCategory;

use super::metrics::MetricsReport;

/// Half-up rounding to one decimal, for display only.
pub fn round1(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

/// Delta annotation relative to a baseline: `(+1.2)`, `(−2.3)`, or `(0.0)`.
pub fn format_delta(value: f64, baseline: f64) -> String {
    let delta = round1(value - baseline);
    if delta > 0.0 {
        format!("(+{delta:.1})")
    } else if delta < 0.0 {
        format!("(−{:.1})", -delta)
    } else {
        "(0.0)".to_string()
    }
}

#[derive(Serialize)]
struct MachineVariant {
    variant: &'static str,
    instances: usize,
    tsr: f64,
    first_try_rate: f64,
    avg_iterations: f64,
}

#[derive(Serialize)]
struct MachineLanguage {
    language: String,
    instances: usize,
    tsr: f64,
    first_try_rate: f64,
    avg_iterations: f64,
    variants: Vec<MachineVariant>,
}

#[derive(Serialize)]
struct MachineDistribution {
    has_failures: bool,
    classified: usize,
    unclassified: usize,
    ih_pct: f64,
    ig_pct: f64,
    re_pct: f64,
    cm_pct: f64,
}

#[derive(Serialize)]
struct MachineReport {
    total_instances: usize,
    not_applicable: usize,
    errored: usize,
    tsr_overall: f64,
    first_try_rate: f64,
    avg_iterations: f64,
    languages: Vec<MachineLanguage>,
    failure_distribution: MachineDistribution,
}

/// The machine document: same numbers as the tables, rounded to one decimal.
/// Field order is fixed, so equal reports serialize byte-identically.
pub fn render_machine_report(report: &MetricsReport) -> String {
    let machine = MachineReport {
        total_instances: report.total_instances,
        not_applicable: report.not_applicable,
        errored: report.errored,
        tsr_overall: round1(report.tsr_overall),
        first_try_rate: round1(report.first_try_rate),
        avg_iterations: round1(report.avg_iterations),
        languages: report
            .languages
            .iter()
            .map(|l| MachineLanguage {
                language: l.language.clone(),
                instances: l.instances,
                tsr: round1(l.tsr),
                first_try_rate: round1(l.first_try_rate),
                avg_iterations: round1(l.avg_iterations),
                variants: l
                    .variants
                    .iter()
                    .map(|v| MachineVariant {
                        variant: v.variant.as_str(),
                        instances: v.instances,
                        tsr: round1(v.tsr),
                        first_try_rate: round1(v.first_try_rate),
                        avg_iterations: round1(v.avg_iterations),
                    })
                    .collect(),
            })
            .collect(),
        failure_distribution: MachineDistribution {
            has_failures: report.failure_distribution.has_failures,
            classified: report.failure_distribution.classified,
            unclassified: report.failure_distribution.unclassified,
            ih_pct: round1(report.failure_distribution.percent(TaxonomyCategory::IH)),
            ig_pct: round1(report.failure_distribution.percent(TaxonomyCategory::IG)),
            re_pct: round1(report.failure_distribution.percent(TaxonomyCategory::RE)),
            cm_pct: round1(report.failure_distribution.percent(TaxonomyCategory::CM)),
        },
    };
    let mut json = serde_json::to_string_pretty(&machine).expect("report serializes");
    json.push('\n');
    json
}

fn pad(text: &str, width: usize) -> String {
    // Pad by display character count, not bytes, so the −/… glyphs align.
    let len = text.chars().count();
    let mut out = String::from(text);
    for _ in len..width {
        out.push(' ');
    }
    out
}

/// The human tables: per-language TSR, per-variant TSR with deltas vs CODE
/// ONLY, iteration efficiency, and the failure-category distribution.
pub fn render_human_report(report: &MetricsReport) -> String {
    let mut out = String::new();

    out.push_str("Task success rate per language\n");
    out.push_str(&format!(
        "  {} {} {}\n",
        pad("language", 10),
        pad("instances", 10),
        "TSR (%)"
    ));
    for lang in &report.languages {
        out.push_str(&format!(
            "  {} {} {:.1}\n",
            pad(&lang.language, 10),
            pad(&lang.instances.to_string(), 10),
            round1(lang.tsr)
        ));
    }
    out.push_str(&format!(
        "  {} {} {:.1}\n",
        pad("average", 10),
        pad(&report.total_instances.to_string(), 10),
        round1(report.tsr_overall)
    ));

    out.push_str("\nTSR (%) per visibility variant and language (delta vs CODE ONLY)\n");
    out.push_str(&format!(
        "  {} {} {} {}\n",
        pad("language", 10),
        pad("CODE ONLY", 12),
        pad("HIGHLIGHT", 14),
        "HIGHLIGHT + CURSOR"
    ));
    for lang in &report.languages {
        let cell = |variant: VisibilityVariant| -> String {
            let Some(metrics) = lang.variants.iter().find(|v| v.variant == variant) else {
                return "-".to_string();
            };
            let base = lang
                .variants
                .iter()
                .find(|v| v.variant == VisibilityVariant::CodeOnly);
            match (variant, base) {
                (VisibilityVariant::CodeOnly, _) | (_, None) => {
                    format!("{:.1}", round1(metrics.tsr))
                }
                (_, Some(base)) => format!(
                    "{:.1} {}",
                    round1(metrics.tsr),
                    format_delta(metrics.tsr, base.tsr)
                ),
            }
        };
        out.push_str(&format!(
            "  {} {} {} {}\n",
            pad(&lang.language, 10),
            pad(&cell(VisibilityVariant::CodeOnly), 12),
            pad(&cell(VisibilityVariant::Highlight), 14),
            cell(VisibilityVariant::HighlightCursor)
        ));
    }

    out.push_str("\nIteration efficiency\n");
    out.push_str(&format!(
        "  {} {} {} {}\n",
        pad("language", 10),
        pad("first-try (%)", 14),
        pad("avg iterations", 15),
        "final TSR (%)"
    ));
    for lang in &report.languages {
        out.push_str(&format!(
            "  {} {} {} {:.1}\n",
            pad(&lang.language, 10),
            pad(&format!("{:.1}", round1(lang.first_try_rate)), 14),
            pad(&format!("{:.1}", round1(lang.avg_iterations)), 15),
            round1(lang.tsr)
        ));
    }
    out.push_str(&format!(
        "  {} {} {} {:.1}\n",
        pad("average", 10),
        pad(&format!("{:.1}", round1(report.first_try_rate)), 14),
        pad(&format!("{:.1}", round1(report.avg_iterations)), 15),
        round1(report.tsr_overall)
    ));

    out.push_str("\nFailure category distribution (% of classified failed instances)\n");
    let dist = &report.failure_distribution;
    if !dist.has_failures {
        out.push_str("  no failed instances\n");
    } else if dist.classified == 0 {
        out.push_str("  no classified failures\n");
    } else {
        out.push_str(&format!(
            "  IH {:.1}   IG {:.1}   RE {:.1}   CM {:.1}\n",
            round1(dist.percent(TaxonomyCategory::IH)),
            round1(dist.percent(TaxonomyCategory::IG)),
            round1(dist.percent(TaxonomyCategory::RE)),
            round1(dist.percent(TaxonomyCategory::CM)),
        ));
    }
    if dist.unclassified > 0 {
        out.push_str(&format!(
            "  note: {} failed instance(s) unclassified\n",
            dist.unclassified
        ));
    }
    if report.not_applicable > 0 {
        out.push_str(&format!(
            "  note: {} instance(s) not applicable (missing highlight/cursor)\n",
            report.not_applicable
        ));
    }
    if report.errored > 0 {
        out.push_str(&format!(
            "  note: {} instance(s) errored before completion\n",
            report.errored
        ));
    }
    out
}
