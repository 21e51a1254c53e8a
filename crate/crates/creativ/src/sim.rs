//! External-simulator harness: compile and run a candidate module against its
//! case testbench, and decide pass/fail from exit codes and the run log.
//!
//! Command templates are plain strings split on whitespace; `{sources}`
//! expands to the source-file list and `{out}` to the compiled image path, so
//! any simulator with a CLI works (`iverilog`/`vvp` are the defaults, the
//! bundled `refsim` binary is what the test fixtures use).

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PassRule, PromptCase};
use crate::Experiment;

pub const DEFAULT_FAILURE_PATTERN: &str = r"(?i)\b(error|failed|fatal)\b";

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub compile_cmd: String,
    pub run_cmd: String,
    pub timeout: Duration,
    pub workdir_root: PathBuf,
    pub default_pass_rule: PassRule,
    pub keep_failures: bool,
    pub jobs: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            compile_cmd: "iverilog -o {out} {sources}".to_string(),
            run_cmd: "vvp {out}".to_string(),
            timeout: Duration::from_secs(30),
            workdir_root: PathBuf::from("creativ-work"),
            default_pass_rule: PassRule {
                failure_pattern: DEFAULT_FAILURE_PATTERN.to_string(),
                pass_pattern: None,
            },
            keep_failures: true,
            jobs: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    FailCompile,
    FailSim,
    FailRule,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalityResult {
    pub case_id: String,
    pub experiment: Experiment,
    pub sample_index: u32,
    pub verdict: Verdict,
    pub log: String,
    pub wall_time: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("simulator not found: `{cmd}`")]
    SimulatorNotFound { cmd: String },
    #[error("sim harness io error at {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("invalid pass rule pattern `{pattern}`: {msg}")]
    InvalidPattern { pattern: String, msg: String },
    #[error("command template `{template}` lacks the {placeholder} placeholder")]
    BadTemplate {
        template: String,
        placeholder: &'static str,
    },
}

pub struct CompiledPassRule {
    pub failure: Regex,
    pub pass: Option<Regex>,
}

pub fn compile_pass_rule(rule: &PassRule) -> Result<CompiledPassRule, SimError> {
    let build = |pat: &str| {
        Regex::new(pat).map_err(|e| SimError::InvalidPattern {
            pattern: pat.to_string(),
            msg: e.to_string(),
        })
    };
    Ok(CompiledPassRule {
        failure: build(&rule.failure_pattern)?,
        pass: rule.pass_pattern.as_deref().map(build).transpose()?,
    })
}

/// True iff the run exited cleanly, the log has no failure match, and the
/// pass pattern (when given) matches.
pub fn apply_pass_rule(log: &str, exit_ok: bool, rule: &CompiledPassRule) -> bool {
    exit_ok
        && !rule.failure.is_match(log)
        && rule.pass.as_ref().map_or(true, |p| p.is_match(log))
}

fn expand_template(
    template: &str,
    sources: &[PathBuf],
    out: &Path,
) -> Result<Vec<String>, SimError> {
    let mut argv = Vec::new();
    for tok in template.split_whitespace() {
        if tok == "{sources}" {
            argv.extend(sources.iter().map(|p| p.display().to_string()));
        } else {
            argv.push(tok.replace("{out}", &out.display().to_string()));
        }
    }
    if argv.is_empty() {
        return Err(SimError::BadTemplate {
            template: template.to_string(),
            placeholder: "command",
        });
    }
    Ok(argv)
}

struct CmdOutcome {
    exit_ok: bool,
    timed_out: bool,
    log: String,
}

/// Run one command with captured, merged output and a hard deadline. Output
/// is drained on threads so a chatty child cannot deadlock on a full pipe.
/// The child gets its own process group so a timeout kills the whole tree;
/// otherwise a grandchild (a shell-wrapped simulator, a forked solver) keeps
/// the output pipe open and the drain outlives the deadline.
fn run_command(argv: &[String], cwd: &Path, timeout: Duration) -> Result<CmdOutcome, SimError> {
    let mut cmd = std::process::Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(cwd)
        .stdin(std::process::Stdio::null())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                SimError::SimulatorNotFound {
                    cmd: argv[0].clone(),
                }
            } else {
                SimError::Io {
                    path: PathBuf::from(&argv[0]),
                    msg: e.to_string(),
                }
            }
        })?;

    let drain = |stream: Option<Box<dyn Read + Send>>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            if let Some(mut s) = stream {
                let _ = s.read_to_end(&mut buf);
            }
            buf
        })
    };
    let out_t = drain(child.stdout.take().map(|s| Box::new(s) as Box<dyn Read + Send>));
    let err_t = drain(child.stderr.take().map(|s| Box::new(s) as Box<dyn Read + Send>));

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let exit_ok = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status.success(),
            Ok(None) => {
                if Instant::now() >= deadline {
                    timed_out = true;
                    #[cfg(unix)]
                    unsafe {
                        libc::kill(-(child.id() as i32), libc::SIGKILL);
                    }
                    let _ = child.kill();
                    let _ = child.wait();
                    break false;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => {
                return Err(SimError::Io {
                    path: PathBuf::from(&argv[0]),
                    msg: e.to_string(),
                })
            }
        }
    };

    let mut log = String::from_utf8_lossy(&out_t.join().unwrap_or_default()).into_owned();
    let err = String::from_utf8_lossy(&err_t.join().unwrap_or_default()).into_owned();
    if !err.is_empty() {
        if !log.is_empty() && !log.ends_with('\n') {
            log.push('\n');
        }
        log.push_str(&err);
    }
    Ok(CmdOutcome {
        exit_ok,
        timed_out,
        log,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), SimError> {
    let text = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    std::fs::write(path, text).map_err(|e| SimError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn file_stem(rel: &str) -> String {
    Path::new(rel)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| rel.to_string())
}

/// Compile + run one source set in its own directory and apply the pass
/// rule. The rule sees the run log only; a compile failure never reaches it.
fn simulate_sources(
    workdir: &Path,
    files: &[(String, &str)],
    rule: &CompiledPassRule,
    cfg: &SimConfig,
) -> Result<(Verdict, String, f64), SimError> {
    // The child runs inside workdir, so the {sources}/{out} paths handed to
    // it must not be relative to our own cwd.
    let abs;
    let workdir = if workdir.is_absolute() {
        workdir
    } else {
        abs = std::env::current_dir()
            .map_err(|e| SimError::Io {
                path: workdir.to_path_buf(),
                msg: e.to_string(),
            })?
            .join(workdir);
        abs.as_path()
    };
    if workdir.exists() {
        std::fs::remove_dir_all(workdir).map_err(|e| SimError::Io {
            path: workdir.to_path_buf(),
            msg: e.to_string(),
        })?;
    }
    std::fs::create_dir_all(workdir).map_err(|e| SimError::Io {
        path: workdir.to_path_buf(),
        msg: e.to_string(),
    })?;

    let mut sources = Vec::new();
    for (name, content) in files {
        let path = workdir.join(name);
        write_file(&path, content)?;
        sources.push(path);
    }
    let out = workdir.join("sim.out");

    if !cfg.compile_cmd.contains("{sources}") {
        return Err(SimError::BadTemplate {
            template: cfg.compile_cmd.clone(),
            placeholder: "{sources}",
        });
    }

    let started = Instant::now();
    let compile_argv = expand_template(&cfg.compile_cmd, &sources, &out)?;
    let compiled = run_command(&compile_argv, workdir, cfg.timeout)?;
    if compiled.timed_out {
        return Ok((Verdict::Timeout, compiled.log, started.elapsed().as_secs_f64()));
    }
    if !compiled.exit_ok {
        return Ok((
            Verdict::FailCompile,
            compiled.log,
            started.elapsed().as_secs_f64(),
        ));
    }

    let run_argv = expand_template(&cfg.run_cmd, &sources, &out)?;
    let ran = run_command(&run_argv, workdir, cfg.timeout)?;
    let wall = started.elapsed().as_secs_f64();
    let verdict = if ran.timed_out {
        Verdict::Timeout
    } else if !ran.exit_ok {
        Verdict::FailSim
    } else if !apply_pass_rule(&ran.log, ran.exit_ok, rule) {
        Verdict::FailRule
    } else {
        Verdict::Pass
    };
    Ok((verdict, ran.log, wall))
}

fn cleanup(workdir: &Path, verdict: Verdict, cfg: &SimConfig) {
    if verdict == Verdict::Pass || !cfg.keep_failures {
        let _ = std::fs::remove_dir_all(workdir);
    }
}

/// Check one candidate against the case testbench. Submodules come from the
/// corpus, never from the response: trimming at the first `endmodule` drops
/// any echoed submodule text, and the corpus copies are the trusted ones.
pub fn check_functionality(
    candidate: &str,
    case: &PromptCase,
    experiment: Experiment,
    sample_index: u32,
    cfg: &SimConfig,
) -> Result<FunctionalityResult, SimError> {
    let rule = compile_pass_rule(case.pass_rule.as_ref().unwrap_or(&cfg.default_pass_rule))?;
    let workdir = cfg
        .workdir_root
        .join(&case.id)
        .join(experiment.name())
        .join(sample_index.to_string());

    let mut files: Vec<(String, &str)> = vec![("candidate.v".to_string(), candidate)];
    for sub in &case.submodules {
        files.push((file_stem(&sub.path), sub.source.as_str()));
    }
    files.push(("tb.v".to_string(), case.testbench.as_str()));

    let (verdict, log, wall_time) = simulate_sources(&workdir, &files, &rule, cfg)?;
    cleanup(&workdir, verdict, cfg);
    Ok(FunctionalityResult {
        case_id: case.id.clone(),
        experiment,
        sample_index,
        verdict,
        log,
        wall_time,
    })
}

#[derive(Clone, Debug)]
pub struct GoldenCheck {
    pub case_id: String,
    pub verdict: Verdict,
    pub log: String,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<GoldenCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn failures(&self) -> Vec<&GoldenCheck> {
        self.checks
            .iter()
            .filter(|c| c.verdict != Verdict::Pass)
            .collect()
    }
}

/// Golden gate: every golden solution must pass its own testbench before any
/// metric is computed. A failure here means the corpus or the pass rule is
/// broken, not the model.
pub fn validate_corpus(corpus: &Corpus, cfg: &SimConfig) -> Result<ValidationReport, SimError> {
    let mut report = ValidationReport::default();
    for case in &corpus.cases {
        let rule = compile_pass_rule(case.pass_rule.as_ref().unwrap_or(&cfg.default_pass_rule))?;
        let workdir = cfg.workdir_root.join(&case.id).join("golden");

        let mut files: Vec<(String, &str)> =
            vec![("golden.v".to_string(), case.golden_solution.as_str())];
        for sub in &case.submodules {
            files.push((file_stem(&sub.path), sub.source.as_str()));
        }
        files.push(("tb.v".to_string(), case.testbench.as_str()));

        let (verdict, log, wall_time) = simulate_sources(&workdir, &files, &rule, cfg)?;
        cleanup(&workdir, verdict, cfg);
        report.checks.push(GoldenCheck {
            case_id: case.id.clone(),
            verdict,
            log,
            wall_time,
        });
    }
    Ok(report)
}
