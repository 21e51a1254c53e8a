mod common;

use std::path::PathBuf;
use std::time::Duration;

use creativ::corpus::{PassRule, PromptCase, Submodule};
use creativ::sim::{
    apply_pass_rule, check_functionality, compile_pass_rule, validate_corpus, SimConfig, SimError,
    Verdict,
};
use creativ::Experiment;

// ---------------------------------------------------------------- pass rule

fn rule(failure: &str, pass: Option<&str>) -> creativ::sim::CompiledPassRule {
    compile_pass_rule(&PassRule {
        failure_pattern: failure.to_string(),
        pass_pattern: pass.map(str::to_string),
    })
    .unwrap()
}

#[test]
fn pass_rule_rejects_failure_matches() {
    let r = rule(r"(?i)\b(error|failed|fatal)\b", None);
    assert!(apply_pass_rule("10 vectors checked\n", true, &r));
    assert!(!apply_pass_rule("ERROR: mismatch at vector 3\n", true, &r));
    assert!(!apply_pass_rule("2 tests FAILED\n", true, &r));
    assert!(!apply_pass_rule("clean log", false, &r), "bad exit fails regardless");
    // Whole words only: identifiers containing the words are fine.
    assert!(apply_pass_rule("wire error_free_zone;\n", true, &r));
}

#[test]
fn pass_rule_requires_pass_pattern_when_given() {
    let r = rule("RESULT: BAD", Some("RESULT: OK"));
    assert!(apply_pass_rule("RESULT: OK\n", true, &r));
    assert!(!apply_pass_rule("simulation finished\n", true, &r), "missing pass marker");
    assert!(!apply_pass_rule("RESULT: BAD\nRESULT: OK\n", true, &r), "failure wins");
}

#[test]
fn invalid_pattern_is_rejected() {
    match compile_pass_rule(&PassRule {
        failure_pattern: "(unclosed".to_string(),
        pass_pattern: None,
    }) {
        Err(SimError::InvalidPattern { pattern, .. }) => assert_eq!(pattern, "(unclosed"),
        Err(other) => panic!("expected InvalidPattern, got {other}"),
        Ok(_) => panic!("invalid regex must not compile"),
    }
}

// ---------------------------------------------------------------- fake sims

/// Case whose sources are never interpreted: the fake simulator scripts
/// decide the outcome, so the harness plumbing is tested in isolation.
fn stub_case(pass_rule: Option<PassRule>) -> PromptCase {
    PromptCase {
        id: "stub".to_string(),
        kind: creativ::corpus::CaseKind::Single,
        description: "stub".to_string(),
        interface_decl: "module stub(input a, output y);".to_string(),
        golden_solution: "module stub(input a, output y);\nassign y = a;\nendmodule\n".to_string(),
        testbench: "module tb();\nendmodule\n".to_string(),
        submodules: vec![Submodule {
            path: "sub.v".to_string(),
            source: "module sub(input a, output y);\nassign y = a;\nendmodule\n".to_string(),
            module_name: "sub".to_string(),
        }],
        pass_rule,
    }
}

struct FakeSim {
    _dir: tempfile::TempDir,
    cfg: SimConfig,
}

/// Install `compile.sh`/`run.sh` with the given bodies. The compile template
/// passes `{out}` then `{sources}`; the run template passes `{out}`.
fn fake_sim(compile_body: &str, run_body: &str) -> FakeSim {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [("compile.sh", compile_body), ("run.sh", run_body)] {
        let path = dir.path().join(name);
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let cfg = SimConfig {
        compile_cmd: format!("{} {{out}} {{sources}}", dir.path().join("compile.sh").display()),
        run_cmd: format!("{} {{out}}", dir.path().join("run.sh").display()),
        workdir_root: dir.path().join("work"),
        timeout: Duration::from_secs(10),
        ..SimConfig::default()
    };
    FakeSim { _dir: dir, cfg }
}

fn check_stub(sim: &FakeSim, case: &PromptCase) -> creativ::sim::FunctionalityResult {
    check_functionality("candidate text", case, Experiment::Completion, 0, &sim.cfg).unwrap()
}

#[test]
fn clean_compile_and_run_pass() {
    let sim = fake_sim("touch \"$1\"", "echo 10 vectors checked");
    let case = stub_case(None);
    let result = check_stub(&sim, &case);
    assert_eq!(result.verdict, Verdict::Pass);
    assert_eq!(result.case_id, "stub");
    assert_eq!(result.sample_index, 0);
    assert!(result.log.contains("10 vectors checked"));
    assert!(result.wall_time >= 0.0);
    // Passing runs leave no workdir behind.
    assert!(!sim.cfg.workdir_root.join("stub/completion/0").exists());
}

#[test]
fn workdir_receives_candidate_submodules_and_testbench() {
    // The compile step lists the source basenames it was handed.
    let sim = fake_sim("shift; for f in \"$@\"; do basename \"$f\"; done >&2; exit 1", "true");
    let case = stub_case(None);
    let result = check_stub(&sim, &case);
    assert_eq!(result.verdict, Verdict::FailCompile);
    assert!(result.log.contains("candidate.v"));
    assert!(result.log.contains("sub.v"));
    assert!(result.log.contains("tb.v"));
    // keep_failures retains the directory with the exact sources written.
    let work = sim.cfg.workdir_root.join("stub/completion/0");
    assert!(work.join("candidate.v").exists());
    let written = std::fs::read_to_string(work.join("candidate.v")).unwrap();
    assert_eq!(written, "candidate text\n", "a trailing newline is ensured");
}

#[test]
fn compile_exit_failure_is_fail_compile() {
    // The stderr diagnostic would match the failure pattern, but compile
    // failures are classified before any rule is consulted.
    let sim = fake_sim("echo 'syntax ERROR near endmodule' >&2; exit 1", "true");
    let result = check_stub(&sim, &stub_case(None));
    assert_eq!(result.verdict, Verdict::FailCompile);
    assert!(result.log.contains("syntax ERROR"));
}

#[test]
fn run_exit_failure_is_fail_sim() {
    let sim = fake_sim("touch \"$1\"", "echo crashed >&2; exit 2");
    let result = check_stub(&sim, &stub_case(None));
    assert_eq!(result.verdict, Verdict::FailSim);
    assert!(result.log.contains("crashed"));
}

#[test]
fn failure_words_in_clean_run_are_fail_rule() {
    let sim = fake_sim("touch \"$1\"", "echo 'ERROR: y=0 expected 1'; exit 0");
    let result = check_stub(&sim, &stub_case(None));
    assert_eq!(result.verdict, Verdict::FailRule);
}

#[test]
fn case_rule_overrides_default() {
    // Log contains "error" but the case rule only rejects RESULT: BAD and
    // demands RESULT: OK.
    let sim = fake_sim("touch \"$1\"", "echo 'error counter at zero'; echo 'RESULT: OK'");
    let case = stub_case(Some(PassRule {
        failure_pattern: "RESULT: BAD".to_string(),
        pass_pattern: Some("RESULT: OK".to_string()),
    }));
    assert_eq!(check_stub(&sim, &case).verdict, Verdict::Pass);

    let sim = fake_sim("touch \"$1\"", "echo 'simulation finished'");
    assert_eq!(check_stub(&sim, &case).verdict, Verdict::FailRule, "pass marker missing");
}

#[test]
fn slow_run_times_out_within_bound() {
    let sim = {
        let mut s = fake_sim("touch \"$1\"", "sleep 30");
        s.cfg.timeout = Duration::from_millis(300);
        s
    };
    let started = std::time::Instant::now();
    let result = check_stub(&sim, &stub_case(None));
    assert_eq!(result.verdict, Verdict::Timeout);
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "timeout must not wait for the child's own exit"
    );
}

#[test]
fn missing_simulator_binary_is_reported() {
    let mut sim = fake_sim("true", "true");
    sim.cfg.compile_cmd = "creativ-no-such-simulator {out} {sources}".to_string();
    let err = check_functionality("x", &stub_case(None), Experiment::Completion, 0, &sim.cfg)
        .unwrap_err();
    match err {
        SimError::SimulatorNotFound { cmd } => assert_eq!(cmd, "creativ-no-such-simulator"),
        other => panic!("expected SimulatorNotFound, got {other}"),
    }
}

#[test]
fn compile_template_must_mention_sources() {
    let mut sim = fake_sim("true", "true");
    sim.cfg.compile_cmd = "simulate -o {out}".to_string();
    let err = check_functionality("x", &stub_case(None), Experiment::Completion, 0, &sim.cfg)
        .unwrap_err();
    match err {
        SimError::BadTemplate { placeholder, .. } => assert_eq!(placeholder, "{sources}"),
        other => panic!("expected BadTemplate, got {other}"),
    }
}

#[test]
fn discard_failures_removes_workdir() {
    let mut sim = fake_sim("exit 1", "true");
    sim.cfg.keep_failures = false;
    let result = check_stub(&sim, &stub_case(None));
    assert_eq!(result.verdict, Verdict::FailCompile);
    assert!(!sim.cfg.workdir_root.join("stub/completion/0").exists());
}

#[test]
fn reruns_replace_stale_workdirs() {
    let sim = fake_sim("exit 1", "true");
    let case = stub_case(None);
    check_stub(&sim, &case);
    let stale = sim.cfg.workdir_root.join("stub/completion/0/leftover.txt");
    std::fs::write(&stale, "old junk").unwrap();
    check_stub(&sim, &case);
    assert!(!stale.exists(), "workdir is rebuilt from scratch per attempt");
}

// ---------------------------------------------------------------- refsim

fn refsim_cfg(root: &std::path::Path) -> SimConfig {
    common::refsim_sim_config(root.join("work"))
}

#[test]
fn golden_gate_passes_the_whole_fixture_corpus() {
    let corpus = common::load_fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    let report = validate_corpus(&corpus, &refsim_cfg(dir.path())).unwrap();
    assert_eq!(report.checks.len(), 8);
    let failures: Vec<String> = report
        .failures()
        .iter()
        .map(|c| format!("{} ({:?}): {}", c.case_id, c.verdict, c.log))
        .collect();
    assert!(report.all_pass(), "golden failures: {failures:?}");
    // The and_gate testbench speaks the custom RESULT: dialect.
    let and_gate = report.checks.iter().find(|c| c.case_id == "and_gate").unwrap();
    assert!(and_gate.log.contains("RESULT: OK"));
}

#[test]
fn golden_gate_catches_a_broken_golden() {
    let mut corpus = common::load_fixture_corpus();
    let case = corpus.cases.iter_mut().find(|c| c.id == "and_gate").unwrap();
    case.golden_solution = case.golden_solution.replace("a & b", "a | b");
    let dir = tempfile::tempdir().unwrap();
    let report = validate_corpus(&corpus, &refsim_cfg(dir.path())).unwrap();
    assert!(!report.all_pass());
    let failures = report.failures();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].case_id, "and_gate");
    assert_eq!(failures[0].verdict, Verdict::FailRule);
    assert!(failures[0].log.contains("RESULT: BAD"));
}

#[test]
fn golden_candidate_passes_and_wrong_one_fails() {
    let corpus = common::load_fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    let cfg = refsim_cfg(dir.path());

    let case = corpus.cases.iter().find(|c| c.id == "mux2").unwrap();
    let good = check_functionality(&case.golden_solution, case, Experiment::Rewrite, 0, &cfg)
        .unwrap();
    assert_eq!(good.verdict, Verdict::Pass, "log: {}", good.log);

    let wrong = "module mux2(input a, input b, input sel, output y);\nassign y = a;\nendmodule\n";
    let bad = check_functionality(wrong, case, Experiment::Rewrite, 1, &cfg).unwrap();
    assert_eq!(bad.verdict, Verdict::FailRule, "log: {}", bad.log);
    // keep_failures leaves the evidence on disk for this failing sample only.
    assert!(cfg.workdir_root.join("mux2/rewrite/1/candidate.v").exists());
    assert!(!cfg.workdir_root.join("mux2/rewrite/0").exists());
}

#[test]
fn multi_case_uses_corpus_submodules() {
    let corpus = common::load_fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    let cfg = refsim_cfg(dir.path());
    let case = corpus.cases.iter().find(|c| c.id == "full_add").unwrap();
    assert!(!case.submodules.is_empty());
    let result =
        check_functionality(&case.golden_solution, case, Experiment::Elaboration, 0, &cfg)
            .unwrap();
    assert_eq!(result.verdict, Verdict::Pass, "log: {}", result.log);
}

#[test]
fn candidate_that_fails_to_compile_is_fail_compile_under_refsim() {
    let corpus = common::load_fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    let cfg = refsim_cfg(dir.path());
    let case = corpus.cases.iter().find(|c| c.id == "xnor2").unwrap();
    let result = check_functionality(
        "module xnor2(input a, input b, output y);\nassign y = ~(a ^ ;\nendmodule\n",
        case,
        Experiment::Completion,
        2,
        &cfg,
    )
    .unwrap();
    assert_eq!(result.verdict, Verdict::FailCompile, "log: {}", result.log);
}

#[test]
fn default_config_paths_are_sane() {
    let cfg = SimConfig::default();
    assert!(cfg.compile_cmd.contains("{sources}"));
    assert!(cfg.compile_cmd.contains("{out}"));
    assert!(cfg.run_cmd.contains("{out}"));
    assert_eq!(cfg.workdir_root, PathBuf::from("creativ-work"));
    assert!(cfg.keep_failures);
}
