use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use creativ::config::{self, BackendKind, Overrides, SimilarityBackendKind};
use creativ::corpus::{build_prompt, load_corpus};
use creativ::gateway::{ApiMode, HttpBackend, HttpConfig, PromptJob, SamplingParams};
use creativ::metrics::MetricReport;
use creativ::pipeline::{rederive_report, run_evaluation};
use creativ::report::{compare_models, render_report, write_comparison_files, ReportFormat};
use creativ::sim::{validate_corpus, SimConfig, Verdict};
use creativ::Experiment;

#[derive(Parser)]
#[command(
    name = "creativ",
    about = "Creativity evaluation harness for LLM-generated Verilog",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that every golden solution passes its own testbench
    Validate(ValidateArgs),
    /// Sample a live endpoint and save raw responses for deterministic replay
    Record(RecordArgs),
    /// Run the full evaluation pipeline (generate, simulate, score, report)
    Run(RunArgs),
    /// Recompute report files from an existing run directory
    Report(ReportArgs),
    /// Merge report.json files from several runs into a ranked comparison
    Compare(CompareArgs),
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    Experiment::parse(s).ok_or_else(|| format!("unknown experiment `{s}`"))
}

fn parse_backend_kind(s: &str) -> Result<BackendKind, String> {
    match s {
        "replay" => Ok(BackendKind::Replay),
        "http" => Ok(BackendKind::Http),
        _ => Err(format!("unknown backend `{s}` (expected replay or http)")),
    }
}

fn parse_similarity_kind(s: &str) -> Result<SimilarityBackendKind, String> {
    match s {
        "builtin" => Ok(SimilarityBackendKind::Builtin),
        "adapter" => Ok(SimilarityBackendKind::Adapter),
        _ => Err(format!("unknown similarity backend `{s}` (expected builtin or adapter)")),
    }
}

fn parse_api_mode(s: &str) -> Result<ApiMode, String> {
    match s {
        "completion" => Ok(ApiMode::Completion),
        "chat" => Ok(ApiMode::Chat),
        _ => Err(format!("unknown api mode `{s}` (expected completion or chat)")),
    }
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus directory (holds manifest.json)
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    sim_compile: Option<String>,
    #[arg(long)]
    sim_run: Option<String>,
    /// Per-command timeout in seconds
    #[arg(long)]
    sim_timeout: Option<f64>,
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Args)]
struct RecordArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Replay store to create or extend
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_api_mode, default_value = "completion")]
    api_mode: ApiMode,
    /// Experiments to record (comma-separated)
    #[arg(long, value_parser = parse_experiment, value_delimiter = ',')]
    experiments: Option<Vec<Experiment>>,
    /// Samples per prompt
    #[arg(short = 't', long = "samples")]
    samples: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    top_k: Option<u32>,
    #[arg(long)]
    top_p: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (.toml or .json); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Experiments to run (comma-separated)
    #[arg(long, value_parser = parse_experiment, value_delimiter = ',')]
    experiments: Option<Vec<Experiment>>,
    #[arg(long, value_parser = parse_backend_kind)]
    backend: Option<BackendKind>,
    /// Replay store for the replay backend
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_parser = parse_api_mode)]
    api_mode: Option<ApiMode>,
    /// Concurrent generation requests (http backend)
    #[arg(long)]
    parallelism: Option<usize>,
    /// Samples per prompt
    #[arg(short = 't', long = "samples")]
    samples: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    sim_compile: Option<String>,
    #[arg(long)]
    sim_run: Option<String>,
    /// Per-command timeout in seconds
    #[arg(long)]
    sim_timeout: Option<f64>,
    /// Concurrent simulations
    #[arg(long)]
    sim_jobs: Option<usize>,
    /// Keep failing simulation workdirs for inspection
    #[arg(long)]
    keep_failures: Option<bool>,
    #[arg(long, value_parser = parse_similarity_kind)]
    similarity: Option<SimilarityBackendKind>,
    /// External similarity adapter command line
    #[arg(long)]
    adapter_cmd: Option<String>,
    #[arg(long)]
    wl_iterations: Option<u32>,
    #[arg(long)]
    flex_threshold: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Continue an interrupted run in the same output directory
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a previous run (holds config.json and run.jsonl)
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// report.json files, one per model run
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Where to write comparison.md and plotdata.txt
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

struct CliError {
    code: u8,
    msg: String,
}

fn fault(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        msg: msg.into(),
    }
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        msg: msg.into(),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus).map_err(|e| fault(e.to_string()))?;
    let mut cfg = SimConfig::default();
    if let Some(c) = &args.sim_compile {
        cfg.compile_cmd = c.clone();
    }
    if let Some(r) = &args.sim_run {
        cfg.run_cmd = r.clone();
    }
    if let Some(t) = args.sim_timeout {
        cfg.timeout = std::time::Duration::from_secs_f64(t);
    }
    if let Some(w) = &args.workdir {
        cfg.workdir_root = w.clone();
    }
    let report = validate_corpus(&corpus, &cfg).map_err(|e| failure(e.to_string()))?;
    for check in &report.checks {
        let mark = if check.verdict == Verdict::Pass { "ok  " } else { "FAIL" };
        println!("{mark} {} ({:.2}s)", check.case_id, check.wall_time);
    }
    if report.all_pass() {
        println!("{} golden solutions pass", report.checks.len());
        Ok(())
    } else {
        Err(failure(format!(
            "{} of {} golden solutions failed",
            report.failures().len(),
            report.checks.len()
        )))
    }
}

fn cmd_record(args: &RecordArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus).map_err(|e| fault(e.to_string()))?;
    let mut experiments = args
        .experiments
        .clone()
        .unwrap_or_else(|| Experiment::ALL.to_vec());
    experiments.sort();
    experiments.dedup();

    let mut params = SamplingParams::default();
    if let Some(t) = args.samples {
        params.t = t;
    }
    if let Some(v) = args.temperature {
        params.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        params.max_tokens = v;
    }
    if let Some(v) = args.top_k {
        params.top_k = v;
    }
    if let Some(v) = args.top_p {
        params.top_p = v;
    }

    let templates = Default::default();
    let mut jobs = Vec::new();
    for &exp in &experiments {
        for case in corpus.cases_for(exp) {
            let prompt = build_prompt(case, exp, &templates).map_err(|e| fault(e.to_string()))?;
            jobs.push(PromptJob {
                case_id: case.id.clone(),
                experiment: exp,
                prompt,
            });
        }
    }

    let http = HttpConfig {
        endpoint: args.endpoint.clone(),
        model: args.model.clone(),
        mode: args.api_mode,
        ..HttpConfig::default()
    };
    let mut backend = HttpBackend::new(http);
    let summary = creativ::gateway::record_session(&jobs, &params, &mut backend, &args.store)
        .map_err(|e| failure(e.to_string()))?;
    println!(
        "recorded {} response(s), kept {} already in {}",
        summary.sampled,
        summary.skipped,
        args.store.display()
    );
    Ok(())
}

fn overrides_from(args: &RunArgs) -> Overrides {
    Overrides {
        model_id: args.model_id.clone(),
        corpus: args.corpus.clone(),
        out_dir: args.out_dir.clone(),
        experiments: args.experiments.clone(),
        backend: args.backend,
        replay_store: args.replay.clone(),
        endpoint: args.endpoint.clone(),
        model: args.model.clone(),
        api_mode: args.api_mode,
        parallelism: args.parallelism,
        samples: args.samples,
        temperature: args.temperature,
        sim_compile: args.sim_compile.clone(),
        sim_run: args.sim_run.clone(),
        sim_timeout: args.sim_timeout,
        sim_jobs: args.sim_jobs,
        keep_failures: args.keep_failures,
        similarity: args.similarity,
        adapter_cmd: args.adapter_cmd.clone(),
        wl_iterations: args.wl_iterations,
        flex_threshold: args.flex_threshold,
        eps: args.eps,
    }
}

fn print_report(report: &MetricReport) {
    print!("{}", render_report(report, ReportFormat::Markdown));
    for flag in &report.flags {
        println!("note: {}", flag.detail);
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let overrides = overrides_from(args);
    let cfg = config::resolve(args.config.as_deref(), &overrides)
        .map_err(|e| fault(e.to_string()))?;
    let report = run_evaluation(&cfg, args.resume).map_err(|e| CliError {
        code: e.exit_code() as u8,
        msg: e.to_string(),
    })?;
    print_report(&report);
    println!("report: {}", cfg.out_dir.join("report.json").display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let report = rederive_report(&args.out_dir).map_err(|e| CliError {
        code: e.exit_code() as u8,
        msg: e.to_string(),
    })?;
    print_report(&report);
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in &args.reports {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fault(format!("{}: {e}", path.display())))?;
        let report: MetricReport = serde_json::from_str(&text)
            .map_err(|e| fault(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    let cmp = compare_models(&reports).map_err(|e| fault(e.to_string()))?;
    write_comparison_files(&cmp, &args.out_dir).map_err(|e| failure(e.to_string()))?;
    print!("{}", cmp.markdown);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Record(args) => cmd_record(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Report(args) => cmd_report(args),
        Cmd::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
