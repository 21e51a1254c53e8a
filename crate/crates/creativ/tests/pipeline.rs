mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use creativ::config::{BackendKind, RunConfig};
use creativ::metrics::{MetricReport, PromptOutcome};
use creativ::pipeline::{rederive_report, run_evaluation, PipelineError};
use creativ::Experiment;

fn desk_config(out_dir: PathBuf) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model_id = "desk-model".to_string();
    cfg.corpus = common::fixture_corpus_dir();
    cfg.out_dir = out_dir;
    cfg.backend.kind = BackendKind::Replay;
    cfg.backend.replay_store = Some(common::fixture_replay_path());
    cfg.sampling.t = 3;
    cfg.sim.compile_cmd = common::refsim_compile_cmd();
    cfg.sim.run_cmd = common::refsim_run_cmd();
    cfg.normalize();
    cfg
}

fn assert_desk_metrics(report: &MetricReport) {
    assert_eq!(report.model_id, "desk-model");
    assert_eq!(report.functionality, Some(0.875));
    assert_eq!(report.fluency, Some(0.5333333333333333));
    assert_eq!(report.flexibility, Some(0.2));
    assert_eq!(report.originality, Some(0.16374903490430284));
    assert_eq!(report.elaboration, Some(0.5));
    assert_eq!(report.creativity, Some(0.349270592059409));
    assert_eq!(report.n.fluency, 5);
    assert_eq!(report.n.flexibility, 5);
    assert_eq!(report.n.originality, 5);
    assert_eq!(report.n.elaboration_prompts, 2);
    assert_eq!(report.n.functionality_prompts, 8);
}

fn prompt_row<'a>(
    report: &'a MetricReport,
    experiment: Experiment,
    case_id: &str,
) -> &'a PromptOutcome {
    report
        .per_prompt
        .iter()
        .find(|o| o.experiment == experiment && o.case_id == case_id)
        .unwrap_or_else(|| panic!("missing row {experiment}/{case_id}"))
}

#[test]
fn fixture_run_reproduces_the_frozen_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path().join("out"));
    let report = run_evaluation(&cfg, false).unwrap();
    assert_desk_metrics(&report);

    // Spot-check the outcome table against the hand-simulated fixture plan.
    let add2 = prompt_row(&report, Experiment::Completion, "add2");
    assert_eq!(add2.functional_indices, vec![0, 2]);
    assert_eq!(add2.scores, vec![1.0, -0.10233437660308542]);

    let count2 = prompt_row(&report, Experiment::Completion, "count2");
    assert_eq!(count2.m(), 0);
    assert_eq!(count2.scores, Vec::<f64>::new());

    let mux2 = prompt_row(&report, Experiment::Completion, "mux2");
    assert_eq!(
        mux2.scores,
        vec![1.0, 0.46484402756005716, 0.63067191951382706]
    );

    let dff_rw = prompt_row(&report, Experiment::Rewrite, "dff_sr");
    assert_eq!(dff_rw.functional_indices, vec![0, 1, 2]);
    assert_eq!(dff_rw.scores, vec![1.0, 0.5]);
    assert_eq!(dff_rw.unscorable_count, 1);

    let full_add = prompt_row(&report, Experiment::Elaboration, "full_add");
    assert_eq!(full_add.functional_indices, vec![0, 2]);
    assert_eq!(full_add.elaborated, Some(true));
    let mux4 = prompt_row(&report, Experiment::Elaboration, "mux4");
    assert_eq!(mux4.functional_indices, vec![2]);
    assert_eq!(mux4.elaborated, Some(false));

    // Work-unit accounting reconciles: every sample generated, simulated,
    // and either scored, unscorable, or non-functional.
    let totals: Vec<(Experiment, usize, usize, usize, usize, usize, usize)> = report
        .accounting
        .iter()
        .map(|a| (a.experiment, a.prompts, a.generated, a.simulated, a.passes, a.scored, a.unscorable))
        .collect();
    assert_eq!(
        totals,
        vec![
            (Experiment::Completion, 6, 18, 18, 10, 10, 0),
            (Experiment::Rewrite, 6, 18, 18, 11, 10, 1),
            (Experiment::Elaboration, 2, 6, 6, 3, 0, 0),
        ]
    );
    assert!(report.accounting.iter().all(|a| a.timeouts == 0));

    // One rewrite response was functional but outside the parse subset.
    let codes: Vec<&str> = report.flags.iter().map(|f| f.code.as_str()).collect();
    assert_eq!(codes, vec!["unscorable_responses"]);

    for name in ["config.json", "run.jsonl", "report.json", "report.csv", "report.md", "plotdata.txt"] {
        assert!(cfg.out_dir.join(name).exists(), "{name} missing");
    }
    let md = std::fs::read_to_string(cfg.out_dir.join("report.md")).unwrap();
    assert!(
        md.contains("| desk-model | 0.8750 | 0.5333 | 0.2000 | 0.1637 | 0.5000 | 0.3493"),
        "got:\n{md}"
    );
}

#[test]
fn independent_runs_emit_identical_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = desk_config(dir.path().join("a"));
    let cfg_b = desk_config(dir.path().join("b"));
    run_evaluation(&cfg_a, false).unwrap();
    run_evaluation(&cfg_b, false).unwrap();
    for name in ["report.json", "report.csv", "report.md", "plotdata.txt"] {
        let a = std::fs::read(cfg_a.out_dir.join(name)).unwrap();
        let b = std::fs::read(cfg_b.out_dir.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn parallel_simulation_changes_no_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let reference = desk_config(dir.path().join("seq"));
    run_evaluation(&reference, false).unwrap();
    let mut parallel = desk_config(dir.path().join("par"));
    parallel.sim.jobs = 4;
    run_evaluation(&parallel, false).unwrap();
    assert_eq!(
        std::fs::read(reference.out_dir.join("report.json")).unwrap(),
        std::fs::read(parallel.out_dir.join("report.json")).unwrap()
    );
}

#[test]
fn rerun_without_resume_refuses_a_used_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path().join("out"));
    run_evaluation(&cfg, false).unwrap();
    match run_evaluation(&cfg, false) {
        Err(e @ PipelineError::Fault(_)) => {
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains("--resume"), "got {e}");
        }
        Err(other) => panic!("expected Fault, got {other}"),
        Ok(_) => panic!("a used directory must not be overwritten"),
    }
}

#[test]
fn completed_runs_resume_as_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path().join("out"));
    run_evaluation(&cfg, false).unwrap();
    let log_before = std::fs::read(cfg.out_dir.join("run.jsonl")).unwrap();
    let report = run_evaluation(&cfg, true).unwrap();
    assert_desk_metrics(&report);
    let log_after = std::fs::read(cfg.out_dir.join("run.jsonl")).unwrap();
    assert_eq!(log_before, log_after, "a complete log gains no events");
}

/// Kill-and-resume torture: truncate a finished run's log at stage
/// boundaries, inside stages, and mid-line, then resume. Every variant must
/// converge to byte-identical report.json.
#[test]
fn resume_from_any_truncation_converges() {
    let dir = tempfile::tempdir().unwrap();
    let reference = desk_config(dir.path().join("ref"));
    run_evaluation(&reference, false).unwrap();
    let ref_report = std::fs::read(reference.out_dir.join("report.json")).unwrap();
    let full_log = std::fs::read_to_string(reference.out_dir.join("run.jsonl")).unwrap();

    let lines: Vec<&str> = full_log.lines().collect();
    let first_sim = lines.iter().position(|l| l.contains(r#""event":"simulated""#)).unwrap();
    let first_score = lines
        .iter()
        .position(|l| l.contains(r#""event":"scored""#) || l.contains(r#""event":"unscorable""#))
        .unwrap();
    assert!(0 < first_sim && first_sim < first_score);

    let prefix = |n: usize| -> Vec<u8> {
        let mut s = lines[..n].join("\n");
        if n > 0 {
            s.push('\n');
        }
        s.into_bytes()
    };
    let torn = {
        // Cut inside a line well past the generate stage.
        let upto = full_log
            .lines()
            .take(first_score + 2)
            .map(|l| l.len() + 1)
            .sum::<usize>();
        full_log.as_bytes()[..upto - 17].to_vec()
    };

    let variants: Vec<(&str, Vec<u8>)> = vec![
        ("empty log", prefix(0)),
        ("mid-generate", prefix(first_sim / 2)),
        ("generate/simulate boundary", prefix(first_sim)),
        ("mid-simulate", prefix(first_sim + (first_score - first_sim) / 2)),
        ("simulate/score boundary", prefix(first_score)),
        ("mid-score", prefix(first_score + 3)),
        ("torn line", torn),
    ];

    for (name, log_bytes) in variants {
        let out = dir.path().join(format!("case-{}", name.replace([' ', '/'], "-")));
        std::fs::create_dir_all(&out).unwrap();
        let cfg = desk_config(out.clone());
        std::fs::write(out.join("config.json"), cfg.persisted_json()).unwrap();
        std::fs::write(out.join("run.jsonl"), &log_bytes).unwrap();

        let report = run_evaluation(&cfg, true).unwrap();
        assert_desk_metrics(&report);
        let resumed = std::fs::read(out.join("report.json")).unwrap();
        assert_eq!(resumed, ref_report, "{name}: report.json diverged after resume");
    }
}

#[test]
fn resume_rejects_changed_settings_but_not_relocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path().join("out"));
    run_evaluation(&cfg, false).unwrap();

    let mut drifted = cfg.clone();
    drifted.sampling.t = 4;
    match run_evaluation(&drifted, true) {
        Err(e @ PipelineError::Fault(_)) => {
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains("differs"), "got {e}");
        }
        Err(other) => panic!("expected Fault, got {other}"),
        Ok(_) => panic!("resume must reject drifted settings"),
    }

    // Moving the whole output directory is not drift: the directory names
    // the run, it does not shape it.
    let moved = dir.path().join("moved");
    copy_tree(&cfg.out_dir, &moved);
    let mut relocated = cfg.clone();
    relocated.out_dir = moved.clone();
    let report = run_evaluation(&relocated, true).unwrap();
    assert_desk_metrics(&report);

    // Resume without any previous run is a config fault, not a crash.
    let fresh = desk_config(dir.path().join("nothing-here"));
    match run_evaluation(&fresh, true) {
        Err(e @ PipelineError::Fault(_)) => assert!(e.to_string().contains("cannot resume")),
        other => panic!("expected Fault, got {:?}", other.err().map(|e| e.to_string())),
    }
}

#[test]
fn rederive_recomputes_the_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path().join("out"));
    let run_report = run_evaluation(&cfg, false).unwrap();
    let rederived = rederive_report(&cfg.out_dir).unwrap();
    assert_eq!(rederived, run_report);
}

#[test]
fn broken_goldens_abort_before_any_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    copy_tree(&common::fixture_corpus_dir(), &corpus);
    let golden = corpus.join("and_gate/golden.v");
    let text = std::fs::read_to_string(&golden).unwrap();
    std::fs::write(&golden, text.replace("a & b", "a | b")).unwrap();

    let mut cfg = desk_config(dir.path().join("out"));
    cfg.corpus = corpus;
    match run_evaluation(&cfg, false) {
        Err(e @ PipelineError::GoldenFailure(_)) => {
            assert_eq!(e.exit_code(), 1);
            assert!(e.to_string().contains("and_gate"), "got {e}");
        }
        Err(other) => panic!("expected GoldenFailure, got {other}"),
        Ok(_) => panic!("a broken golden must abort the run"),
    }
    assert!(!cfg.out_dir.join("report.json").exists());
    assert!(
        !cfg.out_dir.join("run.jsonl").exists()
            || std::fs::read(cfg.out_dir.join("run.jsonl")).unwrap().is_empty(),
        "no samples may be drawn behind a failed golden gate"
    );
}

#[test]
fn experiment_subsets_skip_metrics_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk_config(dir.path().join("elab-only"));
    cfg.experiments = vec![Experiment::Elaboration];
    let report = run_evaluation(&cfg, false).unwrap();
    assert_eq!(report.fluency, None);
    assert_eq!(report.flexibility, None);
    assert_eq!(report.originality, None);
    assert_eq!(report.elaboration, Some(0.5));
    assert_eq!(report.creativity, None);
    assert_eq!(report.functionality, Some(1.0), "both multi prompts had a pass");
    let codes: Vec<&str> = report.flags.iter().map(|f| f.code.as_str()).collect();
    assert_eq!(
        codes,
        vec![
            "metric_not_run",
            "metric_not_run",
            "metric_not_run",
            "partial_functionality",
            "not_all_components",
        ]
    );

    let mut cfg = desk_config(dir.path().join("completion-only"));
    cfg.experiments = vec![Experiment::Completion];
    let report = run_evaluation(&cfg, false).unwrap();
    assert_eq!(report.fluency, Some(0.5333333333333333));
    assert_eq!(report.originality, Some(0.16374903490430284));
    assert_eq!(report.flexibility, None);
    assert_eq!(report.elaboration, None);
    assert_eq!(report.creativity, None);
    assert_eq!(report.functionality, Some(5.0 / 6.0));
    assert_eq!(report.n.functionality_prompts, 6);
}

// ---------------------------------------------------------------- binary

fn creativ() -> Command {
    Command::new(env!("CARGO_BIN_EXE_creativ"))
}

fn run_args(cfg_dir: &Path, out: &Path, model_id: &str) -> Vec<String> {
    let _ = cfg_dir;
    vec![
        "run".into(),
        "--corpus".into(),
        common::fixture_corpus_dir().display().to_string(),
        "--out-dir".into(),
        out.display().to_string(),
        "--model-id".into(),
        model_id.into(),
        "--backend".into(),
        "replay".into(),
        "--replay".into(),
        common::fixture_replay_path().display().to_string(),
        "-t".into(),
        "3".into(),
        "--sim-compile".into(),
        common::refsim_compile_cmd(),
        "--sim-run".into(),
        common::refsim_run_cmd(),
    ]
}

#[test]
fn cli_validate_reports_every_golden() {
    let dir = tempfile::tempdir().unwrap();
    let output = creativ()
        .args([
            "validate",
            "--corpus",
            &common::fixture_corpus_dir().display().to_string(),
            "--sim-compile",
            &common::refsim_compile_cmd(),
            "--sim-run",
            &common::refsim_run_cmd(),
            "--workdir",
            &dir.path().join("work").display().to_string(),
        ])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(stdout.matches("ok  ").count(), 8, "got:\n{stdout}");
    assert!(stdout.contains("and_gate"));
}

#[test]
fn cli_run_report_resume_and_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");

    let output = creativ().args(run_args(dir.path(), &out_a, "desk-model")).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout.contains("| desk-model | 0.8750 | 0.5333 | 0.2000 | 0.1637 | 0.5000 | 0.3493"));
    assert!(out_a.join("report.json").exists());

    // The same directory refuses a fresh run but accepts a resume.
    let rerun = creativ().args(run_args(dir.path(), &out_a, "desk-model")).output().unwrap();
    assert_eq!(rerun.status.code(), Some(2), "used dir is a config fault");
    assert!(String::from_utf8_lossy(&rerun.stderr).contains("--resume"));

    let mut resume_args = run_args(dir.path(), &out_a, "desk-model");
    resume_args.push("--resume".into());
    let resumed = creativ().args(resume_args).output().unwrap();
    assert!(resumed.status.success());

    let report_cmd = creativ()
        .args(["report", "--out-dir", &out_a.display().to_string()])
        .output()
        .unwrap();
    assert!(report_cmd.status.success());
    assert!(String::from_utf8_lossy(&report_cmd.stdout).contains("0.3493"));

    // A second model gives compare something to rank.
    let out_b = dir.path().join("b");
    let second = creativ().args(run_args(dir.path(), &out_b, "other-model")).output().unwrap();
    assert!(second.status.success());

    let cmp_dir = dir.path().join("cmp");
    std::fs::create_dir_all(&cmp_dir).unwrap();
    let compare = creativ()
        .args([
            "compare",
            &out_a.join("report.json").display().to_string(),
            &out_b.join("report.json").display().to_string(),
            "--out-dir",
            &cmp_dir.display().to_string(),
        ])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&compare.stdout);
    assert!(compare.status.success(), "stderr: {}", String::from_utf8_lossy(&compare.stderr));
    assert!(stdout.contains("desk-model") && stdout.contains("other-model"));
    assert!(cmp_dir.join("comparison.md").exists());
    assert!(cmp_dir.join("plotdata.txt").exists());

    // Identical runs under two names tie on creativity; ids break the tie.
    let md = std::fs::read_to_string(cmp_dir.join("comparison.md")).unwrap();
    let desk_pos = md.find("| desk-model |").unwrap();
    let other_pos = md.find("| other-model |").unwrap();
    assert!(desk_pos < other_pos);
}

#[test]
fn cli_resolves_a_relative_out_dir_against_its_own_cwd() {
    // A relative --out-dir must not be re-resolved against each simulation
    // workdir when the simulator child is spawned there.
    let home = tempfile::tempdir().unwrap();
    let args = run_args(home.path(), Path::new("nested/probe"), "desk-model");
    let output = creativ().current_dir(home.path()).args(args).output().unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = home.path().join("nested/probe/report.json");
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.contains("0.349270592059409"), "got:\n{text}");
}

#[test]
fn cli_exit_codes_separate_faults_from_failures() {
    // Config fault: replay backend without a store path.
    let dir = tempfile::tempdir().unwrap();
    let output = creativ()
        .args([
            "run",
            "--corpus",
            &common::fixture_corpus_dir().display().to_string(),
            "--out-dir",
            &dir.path().join("x").display().to_string(),
            "--backend",
            "replay",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Evaluation failure: a corpus whose golden no longer passes.
    let corpus = dir.path().join("corpus");
    copy_tree(&common::fixture_corpus_dir(), &corpus);
    let golden = corpus.join("and_gate/golden.v");
    let text = std::fs::read_to_string(&golden).unwrap();
    std::fs::write(&golden, text.replace("a & b", "a | b")).unwrap();
    let mut args = run_args(dir.path(), &dir.path().join("y"), "m");
    args[2] = corpus.display().to_string();
    let output = creativ().args(args).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("and_gate"));

    // Missing corpus directory is a config fault.
    let output = creativ()
        .args([
            "validate",
            "--corpus",
            &dir.path().join("no-such-corpus").display().to_string(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}
