//! Sampling gateway: t responses per prompt from an OpenAI-compatible HTTP
//! endpoint or a deterministic replay store, with the first-`endmodule` trim
//! applied to every response.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::Experiment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_k: u32,
    pub top_p: f64,
    /// Samples per prompt (t).
    pub t: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.3,
            max_tokens: 1024,
            top_k: 10,
            top_p: 0.95,
            t: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub case_id: String,
    pub experiment: Experiment,
    pub sample_index: u32,
    pub raw_text: String,
    pub trimmed_text: String,
    /// Whether a whole-word `endmodule` was found (and the text cut there).
    pub trimmed: bool,
    pub backend_id: String,
    pub params: SamplingParams,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unreachable after {attempts} attempts: {detail}")]
    BackendUnreachable { attempts: u32, detail: String },
    #[error("rate limited after {attempts} attempts: {detail}")]
    RateLimited { attempts: u32, detail: String },
    #[error("replay store has no entry for {case_id}/{experiment}/sample {sample_index}")]
    ReplayMiss {
        case_id: String,
        experiment: Experiment,
        sample_index: u32,
    },
    #[error("replay store {path}: line {line}: {msg}")]
    BadStore {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("cannot write replay store {path}: {msg}")]
    StoreWrite { path: PathBuf, msg: String },
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

/// Cut at the first whole-word `endmodule`, keeping it. Substrings inside
/// identifiers (`my_endmodule_reg`) never match. Idempotent.
pub fn trim_response(raw: &str) -> (String, bool) {
    const TOKEN: &str = "endmodule";
    let mut from = 0;
    while let Some(pos) = raw[from..].find(TOKEN) {
        let start = from + pos;
        let end = start + TOKEN.len();
        let before_ok = raw[..start].chars().next_back().map_or(true, |c| !is_ident_char(c));
        let after_ok = raw[end..].chars().next().map_or(true, |c| !is_ident_char(c));
        if before_ok && after_ok {
            return (raw[..end].to_string(), true);
        }
        from = end;
    }
    (raw.to_string(), false)
}

/// One sampled raw completion. Implementations may be stateful (retry
/// bookkeeping, run-log notes).
pub trait Backend {
    fn id(&self) -> String;
    fn sample(
        &mut self,
        case_id: &str,
        experiment: Experiment,
        sample_index: u32,
        prompt: &str,
        params: &SamplingParams,
    ) -> Result<String, GatewayError>;
    /// Run-log notes accumulated so far (e.g. a dropped sampling knob);
    /// draining clears them.
    fn drain_notes(&mut self) -> Vec<String> {
        Vec::new()
    }
}

pub fn make_record(
    backend_id: String,
    case_id: &str,
    experiment: Experiment,
    sample_index: u32,
    raw_text: String,
    params: &SamplingParams,
) -> GenerationRecord {
    let (trimmed_text, trimmed) = trim_response(&raw_text);
    GenerationRecord {
        case_id: case_id.to_string(),
        experiment,
        sample_index,
        raw_text,
        trimmed_text,
        trimmed,
        backend_id,
        params: params.clone(),
    }
}

/// Exactly t records in sample order, or an error; never a short list.
pub fn generate(
    prompt: &str,
    case_id: &str,
    experiment: Experiment,
    params: &SamplingParams,
    backend: &mut dyn Backend,
) -> Result<Vec<GenerationRecord>, GatewayError> {
    let mut records = Vec::with_capacity(params.t as usize);
    for i in 0..params.t {
        let raw = backend.sample(case_id, experiment, i, prompt, params)?;
        records.push(make_record(backend.id(), case_id, experiment, i, raw, params));
    }
    Ok(records)
}

// ---------------------------------------------------------------- replay

#[derive(Serialize, Deserialize)]
struct ReplayEntry {
    case_id: String,
    experiment: Experiment,
    sample_index: u32,
    raw_text: String,
    params: SamplingParams,
}

/// In-memory view of a JSON-lines replay store. Duplicate keys keep the
/// first entry; a torn final line (crashed writer) is tolerated, any other
/// malformed line is an error.
pub struct ReplayStore {
    entries: HashMap<(String, Experiment, u32), String>,
}

impl ReplayStore {
    pub fn load(path: &Path) -> Result<ReplayStore, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::BadStore {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        let mut entries = HashMap::new();
        let lines: Vec<&str> = text.split('\n').collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ReplayEntry>(line) {
                Ok(e) => {
                    entries
                        .entry((e.case_id, e.experiment, e.sample_index))
                        .or_insert(e.raw_text);
                }
                Err(err) => {
                    if i + 1 == lines.len() {
                        continue; // torn tail from an interrupted append
                    }
                    return Err(GatewayError::BadStore {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: err.to_string(),
                    });
                }
            }
        }
        Ok(ReplayStore { entries })
    }

    pub fn empty(_path: &Path) -> ReplayStore {
        ReplayStore {
            entries: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, case_id: &str, experiment: Experiment, sample_index: u32) -> bool {
        self.entries
            .contains_key(&(case_id.to_string(), experiment, sample_index))
    }
}

impl Backend for ReplayStore {
    fn id(&self) -> String {
        "replay".to_string()
    }

    fn sample(
        &mut self,
        case_id: &str,
        experiment: Experiment,
        sample_index: u32,
        _prompt: &str,
        _params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        self.entries
            .get(&(case_id.to_string(), experiment, sample_index))
            .cloned()
            .ok_or_else(|| GatewayError::ReplayMiss {
                case_id: case_id.to_string(),
                experiment,
                sample_index,
            })
    }
}

// ---------------------------------------------------------------- http

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiMode {
    Completion,
    Chat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the completions (or chat completions) endpoint.
    pub endpoint: String,
    pub model: String,
    pub mode: ApiMode,
    /// Environment variable holding the bearer token; empty value or unset
    /// variable sends no Authorization header.
    pub api_key_env: String,
    pub retries: u32,
    pub retry_base_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: String::new(),
            mode: ApiMode::Completion,
            api_key_env: "CREATIV_API_KEY".to_string(),
            retries: 3,
            retry_base_ms: 500,
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    send_top_k: bool,
    notes: Vec<String>,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> HttpBackend {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .expect("reqwest client");
        HttpBackend {
            cfg,
            client,
            send_top_k: true,
            notes: Vec::new(),
        }
    }

    fn body(&self, prompt: &str, params: &SamplingParams) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "top_p": params.top_p,
            "n": 1,
        });
        if self.send_top_k {
            body["top_k"] = params.top_k.into();
        }
        match self.cfg.mode {
            ApiMode::Completion => body["prompt"] = prompt.into(),
            ApiMode::Chat => {
                body["messages"] = serde_json::json!([{"role": "user", "content": prompt}]);
            }
        }
        body
    }

    fn extract_text(&self, value: &serde_json::Value) -> Result<String, GatewayError> {
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::Protocol("response has no choices".into()))?;
        let text = match self.cfg.mode {
            ApiMode::Completion => choice.get("text"),
            ApiMode::Chat => choice.get("message").and_then(|m| m.get("content")),
        };
        text.and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Protocol("choice carries no text".into()))
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        self.cfg.model.clone()
    }

    fn sample(
        &mut self,
        _case_id: &str,
        _experiment: Experiment,
        _sample_index: u32,
        prompt: &str,
        params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        let attempts = self.cfg.retries + 1;
        let mut last_rate_limited = false;
        let mut last_detail = String::new();
        let mut attempt = 0;
        while attempt < attempts {
            let mut req = self
                .client
                .post(&self.cfg.endpoint)
                .json(&self.body(prompt, params));
            if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
                if !key.is_empty() {
                    req = req.bearer_auth(key);
                }
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    if status.is_success() {
                        let value: serde_json::Value = serde_json::from_str(&text)
                            .map_err(|e| GatewayError::Protocol(e.to_string()))?;
                        return self.extract_text(&value);
                    }
                    // Endpoints vary on sampling knobs: a 400 naming top_k
                    // means it is unsupported there; drop it for the rest of
                    // the run and note that in the run log.
                    if status.as_u16() == 400 && self.send_top_k && text.contains("top_k") {
                        self.send_top_k = false;
                        self.notes
                            .push("endpoint rejected top_k; dropped for this run".to_string());
                        continue; // not a retry: same attempt, adjusted body
                    }
                    last_rate_limited = status.as_u16() == 429;
                    last_detail = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
                    if !(last_rate_limited || status.is_server_error()) {
                        return Err(GatewayError::Protocol(last_detail));
                    }
                }
                Err(e) => {
                    last_rate_limited = false;
                    last_detail = e.to_string();
                }
            }
            attempt += 1;
            if attempt < attempts {
                std::thread::sleep(Duration::from_millis(
                    self.cfg.retry_base_ms.saturating_mul(1 << attempt.min(10)),
                ));
            }
        }
        if last_rate_limited {
            Err(GatewayError::RateLimited {
                attempts,
                detail: last_detail,
            })
        } else {
            Err(GatewayError::BackendUnreachable {
                attempts,
                detail: last_detail,
            })
        }
    }

    fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }
}

// ---------------------------------------------------------------- record

pub struct PromptJob {
    pub case_id: String,
    pub experiment: Experiment,
    pub prompt: String,
}

#[derive(Debug, Default, PartialEq)]
pub struct RecordSummary {
    pub sampled: usize,
    pub skipped: usize,
}

/// Record raw responses into a JSON-lines replay store, skipping samples the
/// store already holds, so an interrupted session resumes at the first
/// missing index. Every line is flushed before the next request.
pub fn record_session(
    jobs: &[PromptJob],
    params: &SamplingParams,
    backend: &mut dyn Backend,
    store_path: &Path,
) -> Result<RecordSummary, GatewayError> {
    let existing = if store_path.exists() {
        ReplayStore::load(store_path)?
    } else {
        ReplayStore::empty(store_path)
    };
    // A session killed mid-write leaves a torn final line; truncate it so
    // the next append starts on a fresh line.
    if let Ok(bytes) = std::fs::read(store_path) {
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            std::fs::OpenOptions::new()
                .write(true)
                .open(store_path)
                .and_then(|f| f.set_len(keep as u64))
                .map_err(|e| GatewayError::StoreWrite {
                    path: store_path.to_path_buf(),
                    msg: e.to_string(),
                })?;
        }
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(store_path)
        .map_err(|e| GatewayError::StoreWrite {
            path: store_path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let write_err = |e: std::io::Error| GatewayError::StoreWrite {
        path: store_path.to_path_buf(),
        msg: e.to_string(),
    };

    let mut summary = RecordSummary::default();
    for job in jobs {
        for i in 0..params.t {
            if existing.contains(&job.case_id, job.experiment, i) {
                summary.skipped += 1;
                continue;
            }
            let raw = backend.sample(&job.case_id, job.experiment, i, &job.prompt, params)?;
            let entry = ReplayEntry {
                case_id: job.case_id.clone(),
                experiment: job.experiment,
                sample_index: i,
                raw_text: raw,
                params: params.clone(),
            };
            let line = serde_json::to_string(&entry).expect("replay entry serializes");
            file.write_all(line.as_bytes()).map_err(write_err)?;
            file.write_all(b"\n").map_err(write_err)?;
            file.flush().map_err(write_err)?;
            summary.sampled += 1;
        }
    }
    Ok(summary)
}

/// Convenience for tests and tools: read a store's keys in file order.
pub fn replay_keys(path: &Path) -> Result<Vec<(String, Experiment, u32)>, GatewayError> {
    let file = std::fs::File::open(path).map_err(|e| GatewayError::BadStore {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut keys = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| GatewayError::BadStore {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(e) = serde_json::from_str::<ReplayEntry>(&line) {
            keys.push((e.case_id, e.experiment, e.sample_index));
        }
    }
    Ok(keys)
}
