//! Batch evaluation pipeline: generate, simulate, score, report. Every work
//! unit lands in the append-only run log before the next stage reads it, so
//! a killed run resumes at the first missing unit and the final report is a
//! pure function of the log.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};

use crate::config::{BackendKind, ConfigError, RunConfig, SimilarityBackendKind};
use crate::corpus::{
    assemble_candidate, build_prompt, load_corpus, Corpus, CorpusError, PromptCase,
    PromptTemplates,
};
use crate::gateway::{
    make_record, Backend, GatewayError, HttpBackend, ReplayStore, SamplingParams,
};
use crate::metrics::{
    check_elaboration, component_count, compute_creativity, compute_elaboration,
    compute_flexibility, compute_fluency, compute_fluency_by_m, compute_fluency_pairwise,
    compute_functionality, compute_originality, ContributingCounts, ExperimentTotals, MetricFlag,
    MetricReport, MetricsError, PromptOutcome,
};
use crate::report::{compare_models, write_report_files, ReportError};
use crate::sim::{check_functionality, validate_corpus, SimConfig, SimError, Verdict};
use crate::similarity::{
    score_against_golden, wl_similarity, AdapterClient, Scorer, ScoreOutcome, SimilarityError,
    SimilarityScore,
};
use crate::store::{view, RunEvent, RunStore, ScoreEntry, StoreError, StoreView};
use crate::Experiment;

use creativ_hdl::{extract_dfg, parse_module};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("golden validation failed:\n{0}")]
    GoldenFailure(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("generation: {0}")]
    Gateway(#[from] GatewayError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("similarity: {0}")]
    Similarity(#[from] SimilarityError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    /// Misconfiguration detected at run time (stale output dir, resume
    /// drift); exits 2 like any other config fault.
    #[error("{0}")]
    Fault(String),
}

impl PipelineError {
    /// 2 for configuration faults, 1 for evaluation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Corpus(_) | PipelineError::Fault(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

type Unit<'a> = (&'a PromptCase, Experiment, u32);

fn planned_units<'a>(cfg: &RunConfig, corpus: &'a Corpus) -> Vec<Unit<'a>> {
    let mut units = Vec::new();
    for &exp in &cfg.experiments {
        for case in corpus.cases_for(exp) {
            for idx in 0..cfg.sampling.t {
                units.push((case, exp, idx));
            }
        }
    }
    units
}

// ---------------------------------------------------------------- generate

fn generate_sequential(
    backend: &mut dyn Backend,
    pending: &[(&PromptCase, Experiment, u32, String)],
    params: &SamplingParams,
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    for (case, exp, idx, prompt) in pending {
        let raw = backend.sample(&case.id, *exp, *idx, prompt, params)?;
        let record = make_record(backend.id(), &case.id, *exp, *idx, raw, params);
        store.append(&RunEvent::Generated {
            record: record.clone(),
        })?;
        view.generated.insert((case.id.clone(), *exp, *idx), record);
    }
    for text in backend.drain_notes() {
        store.append(&RunEvent::Note { text })?;
    }
    Ok(())
}

fn generate_pool(
    cfg: &RunConfig,
    pending: &[(&PromptCase, Experiment, u32, String)],
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    enum Msg {
        Sampled(Result<crate::gateway::GenerationRecord, GatewayError>),
        Notes(Vec<String>),
    }
    let workers = cfg.backend.parallelism.min(pending.len()).max(1);
    let next = Mutex::new(0usize);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<Msg>();
    let mut first_err: Option<GatewayError> = None;
    std::thread::scope(|s| -> Result<(), PipelineError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            let params = &cfg.sampling;
            let http = &cfg.backend.http;
            s.spawn(move || {
                let mut backend = HttpBackend::new(http.clone());
                loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = {
                        let mut n = next.lock().unwrap();
                        if *n >= pending.len() {
                            break;
                        }
                        let i = *n;
                        *n += 1;
                        i
                    };
                    let (case, exp, idx, prompt) = &pending[i];
                    let msg = match backend.sample(&case.id, *exp, *idx, prompt, params) {
                        Ok(raw) => Msg::Sampled(Ok(make_record(
                            backend.id(),
                            &case.id,
                            *exp,
                            *idx,
                            raw,
                            params,
                        ))),
                        Err(e) => {
                            stop.store(true, Ordering::Relaxed);
                            Msg::Sampled(Err(e))
                        }
                    };
                    if tx.send(msg).is_err() {
                        break;
                    }
                }
                let _ = tx.send(Msg::Notes(backend.drain_notes()));
            });
        }
        drop(tx);
        for msg in rx {
            match msg {
                Msg::Sampled(Ok(record)) => {
                    store.append(&RunEvent::Generated {
                        record: record.clone(),
                    })?;
                    view.generated
                        .insert((record.case_id.clone(), record.experiment, record.sample_index), record);
                }
                Msg::Sampled(Err(e)) => {
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
                Msg::Notes(notes) => {
                    for text in notes {
                        store.append(&RunEvent::Note { text })?;
                    }
                }
            }
        }
        Ok(())
    })?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn generate_stage(
    cfg: &RunConfig,
    corpus: &Corpus,
    templates: &PromptTemplates,
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    let mut pending: Vec<(&PromptCase, Experiment, u32, String)> = Vec::new();
    for &exp in &cfg.experiments {
        for case in corpus.cases_for(exp) {
            let prompt = build_prompt(case, exp, templates)?;
            for idx in 0..cfg.sampling.t {
                if view.generated.contains_key(&(case.id.clone(), exp, idx)) {
                    continue;
                }
                pending.push((case, exp, idx, prompt.clone()));
            }
        }
    }
    if pending.is_empty() {
        return Ok(());
    }
    match cfg.backend.kind {
        BackendKind::Replay => {
            let path = cfg
                .backend
                .replay_store
                .as_ref()
                .expect("validated: replay backend has a store path");
            let mut backend = ReplayStore::load(path)?;
            generate_sequential(&mut backend, &pending, &cfg.sampling, view, store)
        }
        BackendKind::Http if cfg.backend.parallelism > 1 => {
            generate_pool(cfg, &pending, view, store)
        }
        BackendKind::Http => {
            let mut backend = HttpBackend::new(cfg.backend.http.clone());
            generate_sequential(&mut backend, &pending, &cfg.sampling, view, store)
        }
    }
}

// ---------------------------------------------------------------- simulate

fn simulate_stage(
    cfg: &RunConfig,
    corpus: &Corpus,
    sim_cfg: &SimConfig,
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    struct Job<'a> {
        case: &'a PromptCase,
        experiment: Experiment,
        sample_index: u32,
        candidate: String,
    }
    let mut pending: Vec<Job> = Vec::new();
    for (case, exp, idx) in planned_units(cfg, corpus) {
        let key = (case.id.clone(), exp, idx);
        if view.simulated.contains_key(&key) {
            continue;
        }
        let Some(record) = view.generated.get(&key) else {
            continue;
        };
        pending.push(Job {
            case,
            experiment: exp,
            sample_index: idx,
            candidate: assemble_candidate(case, exp, &record.trimmed_text),
        });
    }
    if pending.is_empty() {
        return Ok(());
    }

    let jobs = sim_cfg.jobs.min(pending.len()).max(1);
    if jobs == 1 {
        for job in &pending {
            let result = check_functionality(
                &job.candidate,
                job.case,
                job.experiment,
                job.sample_index,
                sim_cfg,
            )?;
            store.append(&RunEvent::Simulated {
                result: result.clone(),
            })?;
            view.simulated
                .insert((result.case_id.clone(), result.experiment, result.sample_index), result);
        }
        return Ok(());
    }

    let next = Mutex::new(0usize);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<Result<crate::sim::FunctionalityResult, SimError>>();
    let mut first_err: Option<SimError> = None;
    std::thread::scope(|s| -> Result<(), PipelineError> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, stop, pending) = (&next, &stop, &pending);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = {
                    let mut n = next.lock().unwrap();
                    if *n >= pending.len() {
                        break;
                    }
                    let i = *n;
                    *n += 1;
                    i
                };
                let job = &pending[i];
                let r = check_functionality(
                    &job.candidate,
                    job.case,
                    job.experiment,
                    job.sample_index,
                    sim_cfg,
                );
                if r.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                if tx.send(r).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for msg in rx {
            match msg {
                Ok(result) => {
                    store.append(&RunEvent::Simulated {
                        result: result.clone(),
                    })?;
                    view.simulated
                        .insert((result.case_id.clone(), result.experiment, result.sample_index), result);
                }
                Err(e) => {
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
            }
        }
        Ok(())
    })?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------- score

fn score_loop(
    scorer: &mut Scorer,
    pending: &[(&PromptCase, Experiment, u32, String)],
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    let backend_id = scorer.backend_id();
    for (case, exp, idx, candidate) in pending {
        let event = match score_against_golden(candidate, case, scorer)? {
            ScoreOutcome::Scored(value) => RunEvent::Scored {
                score: SimilarityScore {
                    case_id: case.id.clone(),
                    experiment: *exp,
                    sample_index: *idx,
                    backend_id: backend_id.clone(),
                    value,
                },
            },
            ScoreOutcome::Unscorable { reason } => RunEvent::Unscorable {
                case_id: case.id.clone(),
                experiment: *exp,
                sample_index: *idx,
                reason,
            },
        };
        store.append(&event)?;
        if let RunEvent::Scored { score } = &event {
            view.scored.insert(
                (case.id.clone(), *exp, *idx),
                ScoreEntry::Value(score.clone()),
            );
        } else if let RunEvent::Unscorable { reason, .. } = &event {
            view.scored.insert(
                (case.id.clone(), *exp, *idx),
                ScoreEntry::Unscorable {
                    reason: reason.clone(),
                },
            );
        }
    }
    Ok(())
}

/// Pairwise response-vs-response scores for the fluency variant: one WL
/// similarity per unordered pair of functional, parseable completions.
/// Unparsable or empty-graph responses contribute no edges.
fn score_pairs_stage(
    cfg: &RunConfig,
    corpus: &Corpus,
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    let exp = Experiment::Completion;
    for case in corpus.cases_for(exp) {
        let mut functional: Vec<(u32, Option<creativ_hdl::Dfg>)> = Vec::new();
        for idx in 0..cfg.sampling.t {
            let key = (case.id.clone(), exp, idx);
            let Some(result) = view.simulated.get(&key) else {
                continue;
            };
            if result.verdict != Verdict::Pass {
                continue;
            }
            let Some(record) = view.generated.get(&key) else {
                continue;
            };
            let candidate = assemble_candidate(case, exp, &record.trimmed_text);
            let dfg = parse_module(&candidate).ok().map(|m| extract_dfg(&m));
            functional.push((idx, dfg));
        }
        for i in 0..functional.len() {
            for j in (i + 1)..functional.len() {
                let (a, da) = &functional[i];
                let (b, db) = &functional[j];
                let pair_key = (case.id.clone(), exp, *a, *b);
                if view.pair_scores.contains_key(&pair_key) {
                    continue;
                }
                let (Some(da), Some(db)) = (da, db) else {
                    continue;
                };
                let Ok(value) = wl_similarity(da, db, &cfg.similarity.kernel) else {
                    continue;
                };
                store.append(&RunEvent::PairScored {
                    case_id: case.id.clone(),
                    experiment: exp,
                    a: *a,
                    b: *b,
                    value,
                })?;
                view.pair_scores.insert(pair_key, value);
            }
        }
    }
    Ok(())
}

fn score_stage(
    cfg: &RunConfig,
    corpus: &Corpus,
    view: &mut StoreView,
    store: &mut RunStore,
) -> Result<(), PipelineError> {
    let mut pending: Vec<(&PromptCase, Experiment, u32, String)> = Vec::new();
    for (case, exp, idx) in planned_units(cfg, corpus) {
        if exp == Experiment::Elaboration {
            continue; // scored by instantiation, not similarity
        }
        let key = (case.id.clone(), exp, idx);
        if view.scored.contains_key(&key) {
            continue;
        }
        let Some(result) = view.simulated.get(&key) else {
            continue;
        };
        if result.verdict != Verdict::Pass {
            continue;
        }
        let Some(record) = view.generated.get(&key) else {
            continue;
        };
        pending.push((case, exp, idx, assemble_candidate(case, exp, &record.trimmed_text)));
    }

    match cfg.similarity.backend {
        SimilarityBackendKind::Builtin => {
            let mut scorer = Scorer::Builtin(cfg.similarity.kernel.clone());
            score_loop(&mut scorer, &pending, view, store)?;
        }
        SimilarityBackendKind::Adapter => {
            let cmd = cfg
                .similarity
                .adapter_cmd
                .as_ref()
                .expect("validated: adapter backend has a command");
            let mut client = AdapterClient::spawn(cmd)?;
            {
                let mut scorer = Scorer::Adapter(&mut client);
                score_loop(&mut scorer, &pending, view, store)?;
            }
            client.finish()?;
        }
    }

    if cfg.metrics.fluency_pairwise && cfg.experiments.contains(&Experiment::Completion) {
        score_pairs_stage(cfg, corpus, view, store)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- report

/// Assemble the metric report from the log view alone. Also used by the
/// standalone report command, so it tolerates partial runs: metrics are
/// computed over whatever units the log holds.
pub fn derive_report(
    cfg: &RunConfig,
    corpus: &Corpus,
    view: &StoreView,
) -> Result<MetricReport, PipelineError> {
    let t = cfg.sampling.t;
    let eps = cfg.metrics.eps;
    let mut per_prompt: Vec<PromptOutcome> = Vec::new();
    let mut accounting: Vec<ExperimentTotals> = Vec::new();
    let mut by_experiment: std::collections::BTreeMap<Experiment, Vec<PromptOutcome>> =
        Default::default();

    for &exp in &cfg.experiments {
        let cases = corpus.cases_for(exp);
        let mut totals = ExperimentTotals {
            experiment: exp,
            prompts: cases.len(),
            generated: 0,
            simulated: 0,
            passes: 0,
            scored: 0,
            unscorable: 0,
            timeouts: 0,
        };
        let mut outcomes = Vec::new();
        for case in cases {
            let mut functional_indices: Vec<u32> = Vec::new();
            let mut scores: Vec<f64> = Vec::new();
            let mut unscorable_count = 0u32;
            let mut functional_sources: Vec<String> = Vec::new();
            for idx in 0..t {
                let key = (case.id.clone(), exp, idx);
                if view.generated.contains_key(&key) {
                    totals.generated += 1;
                }
                if let Some(result) = view.simulated.get(&key) {
                    totals.simulated += 1;
                    if result.verdict == Verdict::Timeout {
                        totals.timeouts += 1;
                    }
                    if result.verdict == Verdict::Pass {
                        totals.passes += 1;
                        functional_indices.push(idx);
                        if exp == Experiment::Elaboration {
                            if let Some(record) = view.generated.get(&key) {
                                functional_sources.push(assemble_candidate(
                                    case,
                                    exp,
                                    &record.trimmed_text,
                                ));
                            }
                        }
                    }
                }
                match view.scored.get(&key) {
                    Some(ScoreEntry::Value(s)) => {
                        totals.scored += 1;
                        scores.push(s.value);
                    }
                    Some(ScoreEntry::Unscorable { .. }) => {
                        totals.unscorable += 1;
                        unscorable_count += 1;
                    }
                    None => {}
                }
            }
            let elaborated = (exp == Experiment::Elaboration).then(|| {
                check_elaboration(
                    &functional_sources,
                    case,
                    cfg.metrics.elaboration_requires_all,
                )
            });
            let pairwise_unique = (cfg.metrics.fluency_pairwise
                && exp == Experiment::Completion)
                .then(|| {
                    let index_of: std::collections::HashMap<u32, usize> = functional_indices
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| (x, i))
                        .collect();
                    let mut same = Vec::new();
                    for ((cid, e, a, b), value) in view.pair_scores.iter() {
                        if cid != &case.id || *e != exp {
                            continue;
                        }
                        if *value >= 1.0 - eps {
                            if let (Some(&ia), Some(&ib)) = (index_of.get(a), index_of.get(b)) {
                                same.push((ia, ib));
                            }
                        }
                    }
                    component_count(functional_indices.len(), &same)
                });
            outcomes.push(PromptOutcome {
                case_id: case.id.clone(),
                experiment: exp,
                t,
                functional_indices,
                scores,
                unscorable_count,
                elaborated,
                pairwise_unique,
            });
        }
        outcomes.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        accounting.push(totals);
        per_prompt.extend(outcomes.iter().cloned());
        by_experiment.insert(exp, outcomes);
    }

    let has = |e: Experiment| cfg.experiments.contains(&e);
    let empty: Vec<PromptOutcome> = Vec::new();
    let completion = by_experiment.get(&Experiment::Completion).unwrap_or(&empty);
    let rewrite = by_experiment.get(&Experiment::Rewrite).unwrap_or(&empty);
    let elaboration = by_experiment
        .get(&Experiment::Elaboration)
        .unwrap_or(&empty);

    let mut flags: Vec<MetricFlag> = Vec::new();
    let mut n = ContributingCounts::default();

    let fluency = if has(Experiment::Completion) {
        let mv = if cfg.metrics.fluency_pairwise {
            compute_fluency_pairwise(completion, t)
        } else if cfg.metrics.fluency_normalize_by_functional {
            compute_fluency_by_m(completion, eps)
        } else {
            compute_fluency(completion, t, eps)
        };
        if mv.n == 0 {
            flags.push(MetricFlag::no_functional_responses("fluency"));
        }
        n.fluency = mv.n;
        Some(mv.value)
    } else {
        flags.push(MetricFlag::not_run("fluency"));
        None
    };

    let flexibility = if has(Experiment::Rewrite) {
        let mv = compute_flexibility(rewrite, cfg.metrics.flex_threshold);
        if mv.n == 0 {
            flags.push(MetricFlag::no_functional_responses("flexibility"));
        }
        n.flexibility = mv.n;
        Some(mv.value)
    } else {
        flags.push(MetricFlag::not_run("flexibility"));
        None
    };

    let originality = if has(Experiment::Completion) {
        let mv = compute_originality(completion);
        if mv.n == 0 {
            flags.push(MetricFlag::no_functional_responses("originality"));
        }
        n.originality = mv.n;
        Some(mv.value)
    } else {
        flags.push(MetricFlag::not_run("originality"));
        None
    };

    let elaboration_metric = if has(Experiment::Elaboration) {
        let elaborated: Vec<bool> = elaboration
            .iter()
            .map(|o| o.elaborated.unwrap_or(false))
            .collect();
        match compute_elaboration(&elaborated, elaboration.len()) {
            Ok(mv) => {
                n.elaboration_prompts = mv.n;
                Some(mv.value)
            }
            Err(MetricsError::ZeroPrompts) => {
                flags.push(MetricFlag::no_prompts("elaboration"));
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        flags.push(MetricFlag::not_run("elaboration"));
        None
    };

    // pass@t over the prompts whose responses target the prompt itself:
    // completions for single-module prompts, elaborations for multi-module
    // ones. Rewrites answer a different question and never feed it.
    let mut pass_flags: Vec<bool> = Vec::new();
    if has(Experiment::Completion) {
        pass_flags.extend(completion.iter().map(|o| !o.functional_indices.is_empty()));
    }
    if has(Experiment::Elaboration) {
        pass_flags.extend(elaboration.iter().map(|o| !o.functional_indices.is_empty()));
    }
    let total_prompts = corpus.p_single + corpus.p_multi;
    let functionality = if pass_flags.is_empty() {
        flags.push(MetricFlag::not_run("functionality"));
        None
    } else {
        if pass_flags.len() < total_prompts {
            flags.push(MetricFlag::partial_functionality(
                pass_flags.len(),
                total_prompts,
            ));
        }
        n.functionality_prompts = pass_flags.len();
        Some(compute_functionality(&pass_flags)?)
    };

    let creativity = match (fluency, flexibility, originality, elaboration_metric) {
        (Some(f), Some(x), Some(o), Some(e)) => {
            Some(compute_creativity(f, x, o, e, &cfg.metrics.weights)?)
        }
        _ => {
            flags.push(MetricFlag::not_all_components());
            None
        }
    };

    let total_unscorable: usize = accounting.iter().map(|a| a.unscorable).sum();
    if total_unscorable > 0 {
        flags.push(MetricFlag::unscorable(total_unscorable));
    }
    let total_timeouts: usize = accounting.iter().map(|a| a.timeouts).sum();
    if total_timeouts > 0 {
        flags.push(MetricFlag::timeouts(total_timeouts));
    }

    Ok(MetricReport {
        model_id: cfg.model_id.clone(),
        functionality,
        fluency,
        flexibility,
        originality,
        elaboration: elaboration_metric,
        creativity,
        weights: cfg.metrics.weights,
        n,
        flags,
        accounting,
        per_prompt,
    })
}

// ---------------------------------------------------------------- driver

fn golden_gate(corpus: &Corpus, sim_cfg: &SimConfig) -> Result<(), PipelineError> {
    let validation = validate_corpus(corpus, sim_cfg)?;
    if validation.all_pass() {
        return Ok(());
    }
    let mut msg = String::new();
    for f in validation.failures() {
        let last = f.log.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        msg.push_str(&format!("  {}: {:?} {}\n", f.case_id, f.verdict, last.trim()));
    }
    Err(PipelineError::GoldenFailure(msg))
}

/// Write report.json/csv/md plus the gnuplot-friendly plotdata row.
fn write_outputs(report: &MetricReport, out_dir: &std::path::Path) -> Result<(), PipelineError> {
    write_report_files(report, out_dir)?;
    let cmp = compare_models(std::slice::from_ref(report))?;
    let plot_path = out_dir.join("plotdata.txt");
    std::fs::write(&plot_path, cmp.plotdata).map_err(|e| io_err(&plot_path, e))?;
    Ok(())
}

pub fn run_evaluation(cfg: &RunConfig, resume: bool) -> Result<MetricReport, PipelineError> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.corpus)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;

    let config_path = cfg.out_dir.join("config.json");
    let log_path = cfg.out_dir.join("run.jsonl");
    let persisted = cfg.persisted_json();
    if resume {
        let existing = std::fs::read_to_string(&config_path).map_err(|_| {
            PipelineError::Fault(format!(
                "cannot resume: {} is missing; resume needs the directory of a previous run",
                config_path.display()
            ))
        })?;
        let mut recorded: RunConfig = serde_json::from_str(&existing).map_err(|e| {
            PipelineError::Fault(format!("cannot resume: {}: {e}", config_path.display()))
        })?;
        // The output directory names the run but does not shape it; a run
        // log moved elsewhere is still the same run.
        recorded.out_dir = cfg.out_dir.clone();
        if recorded != *cfg {
            return Err(PipelineError::Fault(format!(
                "cannot resume: the resolved configuration differs from {}; \
                 rerun with the original settings or start a fresh output directory",
                config_path.display()
            )));
        }
    } else {
        let stale = std::fs::metadata(&log_path).map(|m| m.len() > 0).unwrap_or(false);
        if stale {
            return Err(PipelineError::Fault(format!(
                "{} already holds a run log; pass --resume to continue it or pick a fresh --out-dir",
                cfg.out_dir.display()
            )));
        }
        std::fs::write(&config_path, &persisted).map_err(|e| io_err(&config_path, e))?;
    }

    // The golden gate runs on every invocation, resumed or not: a corpus
    // whose goldens no longer pass invalidates every downstream number.
    let sim_cfg = cfg.sim_config();
    golden_gate(&corpus, &sim_cfg)?;

    let events = RunStore::load(&log_path)?;
    let mut v = view(events);
    let mut store = RunStore::open(&log_path)?;
    let templates = cfg.prompts.templates();

    generate_stage(cfg, &corpus, &templates, &mut v, &mut store)?;
    simulate_stage(cfg, &corpus, &sim_cfg, &mut v, &mut store)?;
    score_stage(cfg, &corpus, &mut v, &mut store)?;

    // Re-read from disk: the report must be a pure function of the log.
    let final_view = view(RunStore::load(&log_path)?);
    let report = derive_report(cfg, &corpus, &final_view)?;
    write_outputs(&report, &cfg.out_dir)?;
    Ok(report)
}

/// Recompute the report for an existing output directory without generating
/// or simulating anything.
pub fn rederive_report(out_dir: &std::path::Path) -> Result<MetricReport, PipelineError> {
    let config_path = out_dir.join("config.json");
    let text = std::fs::read_to_string(&config_path).map_err(|_| {
        PipelineError::Fault(format!(
            "{} is missing; point at the output directory of a run",
            config_path.display()
        ))
    })?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
        PipelineError::Fault(format!("{}: {}", config_path.display(), e))
    })?;
    let corpus = load_corpus(&cfg.corpus)?;
    let log_path = out_dir.join("run.jsonl");
    let v = view(RunStore::load(&log_path)?);
    let report = derive_report(&cfg, &corpus, &v)?;
    write_outputs(&report, out_dir)?;
    Ok(report)
}
