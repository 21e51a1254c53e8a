//! Similarity scoring in [-1, 1] between a candidate module and the case
//! golden, via a built-in Weisfeiler-Lehman subtree kernel over the data-flow
//! graphs or an external adapter process speaking line-delimited JSON.
//!
//! The kernel refines node labels with sorted in-neighbor labels for a
//! configured number of rounds, counts (round, label) features, and maps the
//! cosine of the two count vectors affinely from [0, 1] onto [-1, 1], so
//! identical graphs score exactly 1 and label-disjoint graphs score -1.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Stdio};
use std::sync::{Arc, Mutex};

use creativ_hdl::{extract_dfg, parse_module, Dfg};
use serde::{Deserialize, Serialize};

use crate::corpus::PromptCase;
use crate::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// Node labels as extracted, widths included.
    Full,
    /// Port labels stripped of their width suffix (`input:2` -> `input`), so
    /// similarity ignores bus widths.
    OpOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub wl_iterations: u32,
    pub label_scheme: LabelScheme,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            wl_iterations: 3,
            label_scheme: LabelScheme::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub case_id: String,
    pub experiment: Experiment,
    pub sample_index: u32,
    pub backend_id: String,
    pub value: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("cannot score an empty graph")]
    EmptyGraph,
    #[error("similarity adapter exited with {code:?}: {stderr}")]
    AdapterCrash { code: Option<i32>, stderr: String },
    #[error("similarity adapter protocol error: {0}")]
    AdapterProtocolError(String),
    #[error("similarity adapter scored pair `{id}` at {value}, outside [-1, 1]")]
    AdapterRangeError { id: String, value: f64 },
    #[error("cannot launch similarity adapter `{cmd}`: {msg}")]
    AdapterSpawn { cmd: String, msg: String },
}

fn scheme_label(label: &str, scheme: LabelScheme) -> String {
    match scheme {
        LabelScheme::Full => label.to_string(),
        LabelScheme::OpOnly => {
            if let Some(base) = label
                .strip_prefix("input:")
                .map(|_| "input")
                .or_else(|| label.strip_prefix("output:").map(|_| "output"))
            {
                base.to_string()
            } else {
                label.to_string()
            }
        }
    }
}

/// Counts of (round, refined label) over rounds 0..=wl_iterations. Round r+1
/// relabels each node with its round-r label plus the sorted multiset of its
/// in-neighbors' round-r labels.
pub fn wl_features(g: &Dfg, cfg: &KernelConfig) -> BTreeMap<(u32, String), u64> {
    let mut labels: Vec<String> = g
        .nodes
        .iter()
        .map(|l| scheme_label(l, cfg.label_scheme))
        .collect();
    let mut in_nbrs: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for &(s, d) in &g.edges {
        in_nbrs[d].push(s);
    }

    let mut feats: BTreeMap<(u32, String), u64> = BTreeMap::new();
    for l in &labels {
        *feats.entry((0, l.clone())).or_insert(0) += 1;
    }
    for r in 1..=cfg.wl_iterations {
        let mut new = Vec::with_capacity(labels.len());
        for v in 0..labels.len() {
            let mut nb: Vec<&str> = in_nbrs[v].iter().map(|&u| labels[u].as_str()).collect();
            nb.sort_unstable();
            new.push(format!("{}|{}", labels[v], nb.join(",")));
        }
        labels = new;
        for l in &labels {
            *feats.entry((r, l.clone())).or_insert(0) += 1;
        }
    }
    feats
}

/// 2·cosine(features a, features b) − 1. Identical feature vectors short-cut
/// to exactly 1.0 so self-similarity never rounds below 1 in floating point.
pub fn wl_similarity(a: &Dfg, b: &Dfg, cfg: &KernelConfig) -> Result<f64, SimilarityError> {
    if a.nodes.is_empty() || b.nodes.is_empty() {
        return Err(SimilarityError::EmptyGraph);
    }
    let fa = wl_features(a, cfg);
    let fb = wl_features(b, cfg);
    if fa == fb {
        return Ok(1.0);
    }
    let mut dot: u64 = 0;
    for (k, &va) in &fa {
        if let Some(&vb) = fb.get(k) {
            dot += va * vb;
        }
    }
    let na2: u64 = fa.values().map(|v| v * v).sum();
    let nb2: u64 = fb.values().map(|v| v * v).sum();
    let c = dot as f64 / ((na2 as u128 * nb2 as u128) as f64).sqrt();
    Ok(2.0 * c - 1.0)
}

// ---------------------------------------------------------------- adapter

#[derive(Serialize)]
struct AdapterPair<'a> {
    id: &'a str,
    module_a: &'a str,
    module_b: &'a str,
}

#[derive(Deserialize)]
struct AdapterScore {
    id: String,
    score: f64,
}

#[derive(Deserialize)]
struct AdapterResponse {
    scores: Vec<AdapterScore>,
}

/// One adapter process per run; each request is a batched line of pairs and
/// the reply is one line of scores. Used when an external scorer (e.g. a
/// trained GNN wrapped in a small script) should replace the built-in kernel.
pub struct AdapterClient {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    stderr: Arc<Mutex<Vec<u8>>>,
    pub cmd: String,
}

impl AdapterClient {
    pub fn spawn(cmd: &str) -> Result<AdapterClient, SimilarityError> {
        let argv: Vec<&str> = cmd.split_whitespace().collect();
        if argv.is_empty() {
            return Err(SimilarityError::AdapterSpawn {
                cmd: cmd.to_string(),
                msg: "empty command".into(),
            });
        }
        let mut child = std::process::Command::new(argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SimilarityError::AdapterSpawn {
                cmd: cmd.to_string(),
                msg: e.to_string(),
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let stderr_buf = Arc::new(Mutex::new(Vec::new()));
        if let Some(mut err) = child.stderr.take() {
            let sink = Arc::clone(&stderr_buf);
            std::thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = std::io::Read::read_to_end(&mut err, &mut buf);
                *sink.lock().unwrap() = buf;
            });
        }
        Ok(AdapterClient {
            child,
            stdin,
            stdout,
            stderr: stderr_buf,
            cmd: cmd.to_string(),
        })
    }

    fn crash(&mut self) -> SimilarityError {
        let code = self.child.wait().ok().and_then(|s| s.code());
        // Give the drain thread a moment to observe EOF.
        std::thread::sleep(std::time::Duration::from_millis(50));
        let stderr = String::from_utf8_lossy(&self.stderr.lock().unwrap()).into_owned();
        SimilarityError::AdapterCrash { code, stderr }
    }

    /// Score a batch of (id, module_a, module_b) pairs; results come back in
    /// request order.
    pub fn score_pairs(
        &mut self,
        pairs: &[(String, String, String)],
    ) -> Result<Vec<(String, f64)>, SimilarityError> {
        let request = serde_json::json!({
            "pairs": pairs
                .iter()
                .map(|(id, a, b)| AdapterPair { id, module_a: a, module_b: b })
                .collect::<Vec<_>>(),
        });
        let line = serde_json::to_string(&request).expect("request serializes");
        let stdin = self.stdin.as_mut().expect("adapter stdin open");
        if stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .is_err()
        {
            return Err(self.crash());
        }

        let mut reply = String::new();
        match self.stdout.read_line(&mut reply) {
            Ok(0) | Err(_) => return Err(self.crash()),
            Ok(_) => {}
        }
        let response: AdapterResponse = serde_json::from_str(&reply)
            .map_err(|e| SimilarityError::AdapterProtocolError(e.to_string()))?;

        let by_id: std::collections::HashMap<&str, f64> = response
            .scores
            .iter()
            .map(|s| (s.id.as_str(), s.score))
            .collect();
        let mut out = Vec::with_capacity(pairs.len());
        for (id, _, _) in pairs {
            let value = *by_id.get(id.as_str()).ok_or_else(|| {
                SimilarityError::AdapterProtocolError(format!("no score for pair `{id}`"))
            })?;
            if !(-1.0..=1.0).contains(&value) || value.is_nan() {
                return Err(SimilarityError::AdapterRangeError {
                    id: id.clone(),
                    value,
                });
            }
            out.push((id.clone(), value));
        }
        Ok(out)
    }

    /// Close the adapter and require a clean exit.
    pub fn finish(mut self) -> Result<(), SimilarityError> {
        drop(self.stdin.take());
        match self.child.wait() {
            Ok(status) if status.success() => Ok(()),
            Ok(status) => {
                std::thread::sleep(std::time::Duration::from_millis(50));
                let stderr = String::from_utf8_lossy(&self.stderr.lock().unwrap()).into_owned();
                Err(SimilarityError::AdapterCrash {
                    code: status.code(),
                    stderr,
                })
            }
            Err(e) => Err(SimilarityError::AdapterProtocolError(e.to_string())),
        }
    }
}

impl Drop for AdapterClient {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

// ---------------------------------------------------------------- scoring

pub enum Scorer<'a> {
    Builtin(KernelConfig),
    Adapter(&'a mut AdapterClient),
}

impl Scorer<'_> {
    pub fn backend_id(&self) -> String {
        match self {
            Scorer::Builtin(_) => "wl-kernel".to_string(),
            Scorer::Adapter(c) => format!("adapter:{}", c.cmd),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScoreOutcome {
    Scored(f64),
    /// Functional but outside the supported subset (or an empty graph);
    /// excluded from similarity-based metrics and itemized in the report.
    Unscorable { reason: String },
}

/// Score a functional candidate against the case golden. The subset-parse
/// gate applies to both backends: what our parser cannot read, no backend is
/// asked to score.
pub fn score_against_golden(
    candidate: &str,
    case: &PromptCase,
    scorer: &mut Scorer,
) -> Result<ScoreOutcome, SimilarityError> {
    let module = match parse_module(candidate) {
        Ok(m) => m,
        Err(e) => {
            return Ok(ScoreOutcome::Unscorable {
                reason: e.to_string(),
            })
        }
    };
    match scorer {
        Scorer::Builtin(cfg) => {
            let a = extract_dfg(&module);
            let b = extract_dfg(&case.golden_module());
            match wl_similarity(&a, &b, cfg) {
                Ok(v) => Ok(ScoreOutcome::Scored(v)),
                Err(SimilarityError::EmptyGraph) => Ok(ScoreOutcome::Unscorable {
                    reason: "empty data-flow graph".into(),
                }),
                Err(e) => Err(e),
            }
        }
        Scorer::Adapter(client) => {
            let pairs = vec![(
                case.id.clone(),
                candidate.to_string(),
                case.golden_solution.clone(),
            )];
            let scores = client.score_pairs(&pairs)?;
            Ok(ScoreOutcome::Scored(scores[0].1))
        }
    }
}
