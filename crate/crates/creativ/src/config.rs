//! Run configuration: a TOML or JSON file with CLI-flag overrides on top.
//! Validation failures are configuration faults (exit code 2), never
//! evaluation faults. The resolved config is persisted to the output
//! directory so resumed runs can prove they match the original.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{PromptTemplates, PassRule};
use crate::gateway::{ApiMode, HttpConfig, SamplingParams};
use crate::metrics;
use crate::sim::{SimConfig, DEFAULT_FAILURE_PATTERN};
use crate::similarity::KernelConfig;
use crate::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Replay,
    Http,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityBackendKind {
    Builtin,
    Adapter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub replay_store: Option<PathBuf>,
    pub http: HttpConfig,
    /// Generation worker limit for live backends.
    pub parallelism: usize,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            kind: BackendKind::Replay,
            replay_store: None,
            http: HttpConfig::default(),
            parallelism: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub compile_cmd: String,
    pub run_cmd: String,
    pub timeout_secs: f64,
    pub jobs: usize,
    pub keep_failures: bool,
    /// Scratch root for simulation directories; default `<out_dir>/work`.
    pub workdir: Option<PathBuf>,
    pub failure_pattern: String,
    pub pass_pattern: Option<String>,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            compile_cmd: "iverilog -o {out} {sources}".to_string(),
            run_cmd: "vvp {out}".to_string(),
            timeout_secs: 30.0,
            jobs: 1,
            keep_failures: true,
            workdir: None,
            failure_pattern: DEFAULT_FAILURE_PATTERN.to_string(),
            pass_pattern: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilaritySettings {
    pub backend: SimilarityBackendKind,
    pub kernel: KernelConfig,
    pub adapter_cmd: Option<String>,
}

impl Default for SimilaritySettings {
    fn default() -> Self {
        SimilaritySettings {
            backend: SimilarityBackendKind::Builtin,
            kernel: KernelConfig::default(),
            adapter_cmd: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub flex_threshold: f64,
    pub eps: f64,
    pub weights: [f64; 4],
    /// Variant: normalize fluency by the functional count m instead of t.
    pub fluency_normalize_by_functional: bool,
    /// Variant: count distinct implementations by pairwise response
    /// similarity instead of unique scores vs golden (builtin backend only).
    pub fluency_pairwise: bool,
    /// Require all provided submodules instantiated, not just one.
    pub elaboration_requires_all: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            flex_threshold: metrics::DEFAULT_FLEX_THRESHOLD,
            eps: metrics::DEFAULT_EPS,
            weights: metrics::DEFAULT_WEIGHTS,
            fluency_normalize_by_functional: false,
            fluency_pairwise: false,
            elaboration_requires_all: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub rewrite_template: Option<String>,
    pub elaboration_template: Option<String>,
}

impl PromptSettings {
    pub fn templates(&self) -> PromptTemplates {
        let mut t = PromptTemplates::default();
        if let Some(r) = &self.rewrite_template {
            t.rewrite = r.clone();
        }
        if let Some(e) = &self.elaboration_template {
            t.elaboration = e.clone();
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model_id: String,
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    pub experiments: Vec<Experiment>,
    pub backend: BackendSettings,
    pub sampling: SamplingParams,
    pub sim: SimSettings,
    pub similarity: SimilaritySettings,
    pub metrics: MetricSettings,
    pub prompts: PromptSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_id: "model".to_string(),
            corpus: PathBuf::new(),
            out_dir: PathBuf::from("creativ-out"),
            experiments: Experiment::ALL.to_vec(),
            backend: BackendSettings::default(),
            sampling: SamplingParams::default(),
            sim: SimSettings::default(),
            similarity: SimilaritySettings::default(),
            metrics: MetricSettings::default(),
            prompts: PromptSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {msg}")]
    Load { path: PathBuf, msg: String },
    #[error("config: {0}")]
    Invalid(String),
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Load {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let cfg = match ext {
        "toml" => toml::from_str(&text).map_err(|e| ConfigError::Load {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?,
        "json" => serde_json::from_str(&text).map_err(|e| ConfigError::Load {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?,
        other => {
            return Err(ConfigError::Load {
                path: path.to_path_buf(),
                msg: format!("unknown config extension `{other}` (expected .toml or .json)"),
            })
        }
    };
    Ok(cfg)
}

impl RunConfig {
    /// Canonical experiment order, duplicates dropped; run order is fixed no
    /// matter how the list was written.
    pub fn normalize(&mut self) {
        self.experiments.sort();
        self.experiments.dedup();
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.corpus.as_os_str().is_empty() {
            return fail("corpus path is required".into());
        }
        if self.model_id.is_empty() {
            return fail("model_id must be non-empty".into());
        }
        if self.experiments.is_empty() {
            return fail("experiments must be non-empty".into());
        }
        let s = &self.sampling;
        if s.t == 0 {
            return fail("sampling.t must be at least 1".into());
        }
        if s.max_tokens == 0 {
            return fail("sampling.max_tokens must be at least 1".into());
        }
        if !(s.temperature >= 0.0) {
            return fail("sampling.temperature must be >= 0".into());
        }
        if !(s.top_p > 0.0 && s.top_p <= 1.0) {
            return fail("sampling.top_p must be in (0, 1]".into());
        }
        if !(self.sim.timeout_secs > 0.0) {
            return fail("sim.timeout_secs must be positive".into());
        }
        if !self.sim.compile_cmd.contains("{sources}") {
            return fail("sim.compile_cmd must contain the {sources} placeholder".into());
        }
        for pat in std::iter::once(&self.sim.failure_pattern).chain(self.sim.pass_pattern.iter()) {
            if let Err(e) = regex::Regex::new(pat) {
                return fail(format!("invalid sim pattern `{pat}`: {e}"));
            }
        }
        match self.backend.kind {
            BackendKind::Replay => {
                if self.backend.replay_store.is_none() {
                    return fail("backend.kind = replay needs backend.replay_store".into());
                }
            }
            BackendKind::Http => {
                if self.backend.http.endpoint.is_empty() || self.backend.http.model.is_empty() {
                    return fail(
                        "backend.kind = http needs backend.http.endpoint and .model".into(),
                    );
                }
            }
        }
        if self.similarity.kernel.wl_iterations < 1 {
            return fail("similarity.kernel.wl_iterations must be at least 1".into());
        }
        match self.similarity.backend {
            SimilarityBackendKind::Adapter => {
                if self.similarity.adapter_cmd.is_none() {
                    return fail("similarity.backend = adapter needs similarity.adapter_cmd".into());
                }
                if self.metrics.fluency_pairwise {
                    return fail(
                        "metrics.fluency_pairwise needs the builtin similarity backend".into(),
                    );
                }
            }
            SimilarityBackendKind::Builtin => {}
        }
        let m = &self.metrics;
        if !(m.eps >= 0.0) {
            return fail("metrics.eps must be >= 0".into());
        }
        if !(-1.0..=1.0).contains(&m.flex_threshold) {
            return fail("metrics.flex_threshold must be in [-1, 1]".into());
        }
        let wsum: f64 = m.weights.iter().sum();
        if m.weights.iter().any(|&w| w < 0.0) || (wsum - 1.0).abs() > 1e-9 {
            return fail(format!(
                "metrics.weights must be non-negative and sum to 1, got {:?}",
                m.weights
            ));
        }
        Ok(())
    }

    pub fn default_pass_rule(&self) -> PassRule {
        PassRule {
            failure_pattern: self.sim.failure_pattern.clone(),
            pass_pattern: self.sim.pass_pattern.clone(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            compile_cmd: self.sim.compile_cmd.clone(),
            run_cmd: self.sim.run_cmd.clone(),
            timeout: std::time::Duration::from_secs_f64(self.sim.timeout_secs),
            workdir_root: self
                .sim
                .workdir
                .clone()
                .unwrap_or_else(|| self.out_dir.join("work")),
            default_pass_rule: self.default_pass_rule(),
            keep_failures: self.sim.keep_failures,
            jobs: self.sim.jobs.max(1),
        }
    }

    /// Canonical serialized form, persisted as `config.json` in the output
    /// directory; a resumed run must match it byte for byte.
    pub fn persisted_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// CLI-flag values layered over the file config (flags win).
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub model_id: Option<String>,
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub experiments: Option<Vec<Experiment>>,
    pub backend: Option<BackendKind>,
    pub replay_store: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_mode: Option<ApiMode>,
    pub parallelism: Option<usize>,
    pub samples: Option<u32>,
    pub temperature: Option<f64>,
    pub sim_compile: Option<String>,
    pub sim_run: Option<String>,
    pub sim_timeout: Option<f64>,
    pub sim_jobs: Option<usize>,
    pub keep_failures: Option<bool>,
    pub similarity: Option<SimilarityBackendKind>,
    pub adapter_cmd: Option<String>,
    pub wl_iterations: Option<u32>,
    pub flex_threshold: Option<f64>,
    pub eps: Option<f64>,
}

pub fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) {
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = &$value {
                $field = v.clone();
            }
        };
    }
    set!(cfg.model_id, o.model_id);
    set!(cfg.corpus, o.corpus);
    set!(cfg.out_dir, o.out_dir);
    set!(cfg.experiments, o.experiments);
    set!(cfg.backend.kind, o.backend);
    if o.replay_store.is_some() {
        cfg.backend.replay_store = o.replay_store.clone();
    }
    set!(cfg.backend.http.endpoint, o.endpoint);
    set!(cfg.backend.http.model, o.model);
    set!(cfg.backend.http.mode, o.api_mode);
    set!(cfg.backend.parallelism, o.parallelism);
    set!(cfg.sampling.t, o.samples);
    set!(cfg.sampling.temperature, o.temperature);
    set!(cfg.sim.compile_cmd, o.sim_compile);
    set!(cfg.sim.run_cmd, o.sim_run);
    set!(cfg.sim.timeout_secs, o.sim_timeout);
    set!(cfg.sim.jobs, o.sim_jobs);
    set!(cfg.sim.keep_failures, o.keep_failures);
    set!(cfg.similarity.backend, o.similarity);
    if o.adapter_cmd.is_some() {
        cfg.similarity.adapter_cmd = o.adapter_cmd.clone();
    }
    set!(cfg.similarity.kernel.wl_iterations, o.wl_iterations);
    set!(cfg.metrics.flex_threshold, o.flex_threshold);
    set!(cfg.metrics.eps, o.eps);
}

/// Defaults, then the file (if any), then flag overrides; normalized and
/// validated.
pub fn resolve(
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = match config_path {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, overrides);
    cfg.normalize();
    cfg.validate()?;
    Ok(cfg)
}
