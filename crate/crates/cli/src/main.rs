//! safedit: corpus runner, metrics reporting, failure classification, and a
//! standalone test-log parser.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use safedit_core::corpus::{load_corpus, VisibilityVariant};
use safedit_core::fal::{analyze, parse_log, render_feedback};
use safedit_core::harness::{
    build_metrics_report, collect_records, read_trace, render_human_report, render_machine_report,
    run_corpus, write_trace, RunOptions, VariantSelection, MACHINE_REPORT_FILE,
};
use safedit_core::orchestrator::{PipelineConfig, Verdict};
use safedit_core::provider::{ModelSettings, Provider};
use safedit_core::taxonomy::{classify_failure, TaxonomyError, TaxonomyOutcome};
use safedit_core::verifier::{Overall, TestRunResult};

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

#[derive(Parser)]
#[command(
    name = "safedit",
    version,
    about = "Multi-agent instructed code editing pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    CodeOnly,
    Highlight,
    HighlightCursor,
    All,
}

impl VariantArg {
    fn selection(self) -> VariantSelection {
        match self {
            VariantArg::CodeOnly => VariantSelection::One(VisibilityVariant::CodeOnly),
            VariantArg::Highlight => VariantSelection::One(VisibilityVariant::Highlight),
            VariantArg::HighlightCursor => {
                VariantSelection::One(VisibilityVariant::HighlightCursor)
            }
            VariantArg::All => VariantSelection::All,
        }
    }
}

#[derive(clap::Args)]
struct ProviderArgs {
    /// Replay provider responses from a recorded cassette (no network).
    #[arg(long, value_name = "CASSETTE", conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the live backend and record responses to this cassette.
    #[arg(long, value_name = "CASSETTE")]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a task corpus and aggregate metrics.
    Run {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        variant: VariantArg,
        /// Run directory for traces and the machine report.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Refinement budget after the initial attempt.
        #[arg(long, value_name = "N")]
        max_refinements: Option<u32>,
        /// Per-run test timeout in seconds.
        #[arg(long, value_name = "S")]
        timeout: Option<u64>,
        /// Concurrent task pipelines.
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
        #[arg(long, value_name = "MODEL")]
        model: Option<String>,
        #[arg(long, value_name = "T")]
        temperature: Option<f64>,
        /// JSON config file; its values override flags.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Print one line per instance as the run progresses.
        #[arg(long)]
        verbose: bool,
    },
    /// Recompute and print the metrics report for a run directory.
    Report {
        #[arg(long, value_name = "DIR")]
        run_dir: PathBuf,
    },
    /// Classify every failed trace in a run directory, annotating the trace
    /// files in place.
    Classify {
        #[arg(long, value_name = "DIR")]
        run_dir: PathBuf,
        /// Corpus the run was produced from (the classifier needs the
        /// original instruction and code).
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long, value_name = "MODEL")]
        model: Option<String>,
        #[arg(long, value_name = "T")]
        temperature: Option<f64>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
    /// Parse a raw test log and print the structured feedback.
    FalParse {
        #[arg(value_name = "LOGFILE")]
        logfile: PathBuf,
    },
}

/// Optional JSON config. Per the interface contract, file values override
/// command-line flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    endpoint: Option<String>,
    api_key: Option<String>,
    model_id: Option<String>,
    temperature: Option<f64>,
    max_output_tokens: Option<u32>,
    max_refinements: Option<u32>,
    timeout_secs: Option<u64>,
    parallel: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed config file {}", path.display()))
}

fn build_provider(args: &ProviderArgs, config: &ConfigFile) -> Result<Provider> {
    if let Some(cassette) = &args.replay {
        return Provider::replay_from(cassette)
            .with_context(|| format!("cannot load cassette {}", cassette.display()));
    }
    let endpoint = config
        .endpoint
        .clone()
        .or_else(|| std::env::var("SAFEDIT_API_BASE").ok())
        .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
    let api_key = config
        .api_key
        .clone()
        .or_else(|| std::env::var("SAFEDIT_API_KEY").ok());
    if api_key.is_none() {
        bail!(
            "live mode needs an API key: set SAFEDIT_API_KEY or `api_key` in the config file \
             (or use --replay for recorded runs)"
        );
    }
    let provider = Provider::live(endpoint, api_key);
    Ok(if args.record.is_some() {
        provider.with_recording()
    } else {
        provider
    })
}

fn model_settings(
    model: Option<String>,
    temperature: Option<f64>,
    config: &ConfigFile,
) -> ModelSettings {
    let defaults = ModelSettings::default();
    ModelSettings {
        model_id: config
            .model_id
            .clone()
            .or(model)
            .unwrap_or(defaults.model_id),
        temperature: config
            .temperature
            .or(temperature)
            .unwrap_or(defaults.temperature),
        max_output_tokens: config
            .max_output_tokens
            .unwrap_or(defaults.max_output_tokens),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    corpus: &Path,
    variant: VariantArg,
    out: &Path,
    provider_args: &ProviderArgs,
    max_refinements: Option<u32>,
    timeout: Option<u64>,
    parallel: Option<usize>,
    model: Option<String>,
    temperature: Option<f64>,
    config_path: Option<&Path>,
    verbose: bool,
) -> Result<()> {
    let config = load_config(config_path)?;
    let provider = build_provider(provider_args, &config)?;
    let tasks = load_corpus(corpus).context("cannot load corpus")?;
    if tasks.is_empty() {
        bail!("corpus {} contains no task bundles", corpus.display());
    }

    let mut pipeline = PipelineConfig::new(VisibilityVariant::Highlight);
    pipeline.model = model_settings(model, temperature, &config);
    if let Some(n) = config.max_refinements.or(max_refinements) {
        pipeline.max_refinements = n;
    }
    if let Some(s) = config.timeout_secs.or(timeout) {
        pipeline.test_timeout_secs = s;
    }
    if pipeline.test_timeout_secs == 0 {
        bail!("test timeout must be positive");
    }

    let options = RunOptions {
        variants: variant.selection(),
        parallel: config.parallel.or(parallel).unwrap_or(1),
        verbose,
    };

    let report = run_corpus(&tasks, &pipeline, &provider, out, &options)?;
    if let Some(path) = &provider_args.record {
        provider
            .save_recording(path)
            .with_context(|| format!("cannot save cassette {}", path.display()))?;
        eprintln!("recorded cassette: {}", path.display());
    }
    print!("{}", render_human_report(&report));
    println!(
        "\nmachine report: {}",
        out.join(MACHINE_REPORT_FILE).display()
    );
    Ok(())
}

fn cmd_report(run_dir: &Path) -> Result<()> {
    let (records, not_applicable, errored) = collect_records(run_dir)?;
    if records.is_empty() {
        bail!("run directory {} has no trace files", run_dir.display());
    }
    let report = build_metrics_report(&records, not_applicable, errored)?;
    let machine_path = run_dir.join(MACHINE_REPORT_FILE);
    fs::write(&machine_path, render_machine_report(&report))
        .with_context(|| format!("cannot write {}", machine_path.display()))?;
    print!("{}", render_human_report(&report));
    println!("\nmachine report: {}", machine_path.display());
    Ok(())
}

fn cmd_classify(
    run_dir: &Path,
    corpus: &Path,
    provider_args: &ProviderArgs,
    model: Option<String>,
    temperature: Option<f64>,
    config_path: Option<&Path>,
) -> Result<()> {
    let config = load_config(config_path)?;
    let provider = build_provider(provider_args, &config)?;
    let settings = model_settings(model, temperature, &config);
    let tasks = load_corpus(corpus).context("cannot load corpus")?;

    let mut paths: Vec<PathBuf> = fs::read_dir(run_dir)
        .with_context(|| format!("cannot read run directory {}", run_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".trace.json"))
        })
        .collect();
    paths.sort();

    let mut labeled = 0usize;
    let mut unclassified = 0usize;
    let mut skipped = 0usize;
    for path in &paths {
        let mut trace = read_trace(path)?;
        if trace.verdict != Verdict::Fail || trace.taxonomy.is_some() {
            skipped += 1;
            continue;
        }
        let Some(task) = tasks.iter().find(|t| t.id == trace.task_id) else {
            bail!(
                "trace {} references task {:?} not present in corpus {}",
                path.display(),
                trace.task_id,
                corpus.display()
            );
        };
        match classify_failure(&trace, task, &provider, &settings) {
            Ok(label) => {
                println!(
                    "{} {}: {} ({:.2})",
                    trace.task_id,
                    trace.variant,
                    label.category.as_str(),
                    label.confidence
                );
                trace.taxonomy = Some(TaxonomyOutcome::Label(label));
                labeled += 1;
            }
            Err(TaxonomyError::Unclassified { reason }) => {
                println!(
                    "{} {}: unclassified ({reason})",
                    trace.task_id, trace.variant
                );
                trace.taxonomy = Some(TaxonomyOutcome::Unclassified {
                    unclassified: reason,
                });
                unclassified += 1;
            }
            Err(e) => return Err(e.into()),
        }
        write_trace(run_dir, &trace)?;
    }
    if let Some(path) = &provider_args.record {
        provider
            .save_recording(path)
            .with_context(|| format!("cannot save cassette {}", path.display()))?;
    }
    println!("classified {labeled}, unclassified {unclassified}, skipped {skipped}");
    Ok(())
}

fn cmd_fal_parse(logfile: &Path) -> Result<()> {
    let raw_log = fs::read_to_string(logfile)
        .with_context(|| format!("cannot read log file {}", logfile.display()))?;
    let failures = parse_log(&raw_log);
    if failures.is_empty() {
        println!("no failures parsed");
        return Ok(());
    }
    println!("parsed {} failure(s):", failures.len());
    for f in &failures {
        let exc = if f.exception_type.is_empty() {
            "<unknown exception>"
        } else {
            &f.exception_type
        };
        match (&f.expected, &f.actual) {
            (Some(expected), Some(actual)) => {
                println!(
                    "  {} [{}] expected {} actual {}",
                    f.test_name, exc, expected, actual
                )
            }
            _ => println!("  {} [{}]", f.test_name, exc),
        }
    }
    // Classification needs the run outcome; a standalone log is treated as a
    // plain failed run (timeouts are only knowable from the runner).
    let run = TestRunResult {
        overall: Overall::Fail,
        case_outcomes: Vec::new(),
        raw_log,
        duration_secs: 0.0,
        exit_code: 1,
    };
    println!("\n{}", render_feedback(&analyze(&run)));
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            corpus,
            variant,
            out,
            provider,
            max_refinements,
            timeout,
            parallel,
            model,
            temperature,
            config,
            verbose,
        } => cmd_run(
            &corpus,
            variant,
            &out,
            &provider,
            max_refinements,
            timeout,
            parallel,
            model,
            temperature,
            config.as_deref(),
            verbose,
        ),
        Command::Report { run_dir } => cmd_report(&run_dir),
        Command::Classify {
            run_dir,
            corpus,
            provider,
            model,
            temperature,
            config,
        } => cmd_classify(
            &run_dir,
            &corpus,
            &provider,
            model,
            temperature,
            config.as_deref(),
        ),
        Command::FalParse { logfile } => cmd_fal_parse(&logfile),
    }
}
