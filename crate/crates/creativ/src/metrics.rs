//! The creativity metrics over per-prompt outcome sets.
//!
//! Fluency: mean over functional prompts of unique-similarity-score count
//! normalized by t. Flexibility: fraction of prompts whose minimum rewrite
//! score falls below a threshold (default 0, strict). Originality: mean of
//! (1 - min score) / 2 over functional prompts. Elaboration: fraction of
//! multi-module prompts with a functional response instantiating provided
//! submodules. Creativity: their weighted mean (default weights 0.25).
//! Functionality: pass@t, the fraction of prompts with any passing sample.
//!
//! Every compute_* sorts its per-prompt contributions by case id before
//! summing, so results are bitwise identical regardless of input order.

use creativ_hdl::{instantiated_modules, parse_module};
use serde::{Deserialize, Serialize};

use crate::corpus::PromptCase;
use crate::Experiment;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_FLEX_THRESHOLD: f64 = 0.0;
pub const DEFAULT_WEIGHTS: [f64; 4] = [0.25, 0.25, 0.25, 0.25];

/// Everything the metrics need to know about one prompt in one experiment.
/// `scores` holds similarity values of the functional, scorable responses in
/// sample order; functional responses the parser cannot read are counted in
/// `unscorable_count` instead, so |scores| + unscorable_count = m for the
/// completion and rewrite experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptOutcome {
    pub case_id: String,
    pub experiment: Experiment,
    pub t: u32,
    pub functional_indices: Vec<u32>,
    pub scores: Vec<f64>,
    pub unscorable_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elaborated: Option<bool>,
    /// Distinct-implementation count from the pairwise-uniqueness variant,
    /// when the pipeline computed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_unique: Option<usize>,
}

impl PromptOutcome {
    pub fn m(&self) -> usize {
        self.functional_indices.len()
    }

    pub fn min_score(&self) -> Option<f64> {
        self.scores
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("weights must be non-negative and sum to 1, got {0:?}")]
    BadWeights([f64; 4]),
    #[error("metric over zero prompts")]
    ZeroPrompts,
}

/// Cluster count of the sorted scores under eps gap clustering: values whose
/// consecutive gap stays within eps chain into one cluster.
pub fn unique_count(scores: &[f64], eps: f64) -> usize {
    if scores.is_empty() {
        return 0;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    1 + sorted
        .windows(2)
        .filter(|w| w[1] - w[0] > eps)
        .count()
}

fn sorted_refs<'a>(outcomes: &'a [PromptOutcome]) -> Vec<&'a PromptOutcome> {
    let mut refs: Vec<&PromptOutcome> = outcomes.iter().collect();
    refs.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    refs
}

/// Metric value plus the number of prompts that contributed to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub n: usize,
}

/// Mean over prompts with at least one functional response of
/// unique_count(scores) / t.
pub fn compute_fluency(outcomes: &[PromptOutcome], t: u32, eps: f64) -> MetricValue {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in sorted_refs(outcomes) {
        if o.m() == 0 {
            continue;
        }
        sum += unique_count(&o.scores, eps) as f64 / t as f64;
        n += 1;
    }
    MetricValue {
        value: if n == 0 { 0.0 } else { sum / n as f64 },
        n,
    }
}

/// Variant: normalize each prompt's unique count by its functional count m
/// instead of t. Never used in reported defaults.
pub fn compute_fluency_by_m(outcomes: &[PromptOutcome], eps: f64) -> MetricValue {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in sorted_refs(outcomes) {
        if o.m() == 0 {
            continue;
        }
        sum += unique_count(&o.scores, eps) as f64 / o.m() as f64;
        n += 1;
    }
    MetricValue {
        value: if n == 0 { 0.0 } else { sum / n as f64 },
        n,
    }
}

/// Variant: per-prompt distinct-implementation counts from pairwise response
/// similarity (connected components under a "same implementation" edge),
/// precomputed by the pipeline into `pairwise_unique`.
pub fn compute_fluency_pairwise(outcomes: &[PromptOutcome], t: u32) -> MetricValue {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in sorted_refs(outcomes) {
        if o.m() == 0 {
            continue;
        }
        sum += o.pairwise_unique.unwrap_or(0) as f64 / t as f64;
        n += 1;
    }
    MetricValue {
        value: if n == 0 { 0.0 } else { sum / n as f64 },
        n,
    }
}

/// Connected components of `n` items under `same` edges; the pairwise
/// uniqueness proxy counts each component as one implementation.
pub fn component_count(n: usize, same: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(a, b) in same {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    (0..n).filter(|&v| find(&mut parent, v) == v).count()
}

/// Fraction of prompts (with at least one scored response) whose minimum
/// rewrite score is strictly below the threshold.
pub fn compute_flexibility(outcomes: &[PromptOutcome], threshold: f64) -> MetricValue {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in sorted_refs(outcomes) {
        let Some(min) = o.min_score() else { continue };
        sum += if min < threshold { 1.0 } else { 0.0 };
        n += 1;
    }
    MetricValue {
        value: if n == 0 { 0.0 } else { sum / n as f64 },
        n,
    }
}

/// Mean over prompts (with at least one scored response) of (1 - min) / 2,
/// mapping minimum similarity 1 to 0 and -1 to 1.
pub fn compute_originality(outcomes: &[PromptOutcome]) -> MetricValue {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in sorted_refs(outcomes) {
        let Some(min) = o.min_score() else { continue };
        sum += (1.0 - min) / 2.0;
        n += 1;
    }
    MetricValue {
        value: if n == 0 { 0.0 } else { sum / n as f64 },
        n,
    }
}

/// True iff some functional response parses and instantiates the provided
/// submodules (any one of them by default, all of them when `require_all`).
/// Responses outside the subset contribute false.
pub fn check_elaboration(
    functional_sources: &[String],
    case: &PromptCase,
    require_all: bool,
) -> bool {
    let names = case.submodule_names();
    if names.is_empty() {
        return false;
    }
    functional_sources.iter().any(|src| {
        let Ok(module) = parse_module(src) else {
            return false;
        };
        let used = instantiated_modules(&module);
        if require_all {
            names.iter().all(|n| used.contains(*n))
        } else {
            names.iter().any(|n| used.contains(*n))
        }
    })
}

/// Fraction of multi-module prompts elaborated.
pub fn compute_elaboration(flags: &[bool], p: usize) -> Result<MetricValue, MetricsError> {
    if p == 0 {
        return Err(MetricsError::ZeroPrompts);
    }
    let k = flags.iter().filter(|&&f| f).count();
    Ok(MetricValue {
        value: k as f64 / p as f64,
        n: p,
    })
}

pub fn compute_creativity(
    f: f64,
    x: f64,
    o: f64,
    e: f64,
    weights: &[f64; 4],
) -> Result<f64, MetricsError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(MetricsError::BadWeights(*weights));
    }
    Ok(weights[0] * f + weights[1] * x + weights[2] * o + weights[3] * e)
}

/// pass@t: fraction of prompts with at least one functional sample.
pub fn compute_functionality(pass_flags: &[bool]) -> Result<f64, MetricsError> {
    if pass_flags.is_empty() {
        return Err(MetricsError::ZeroPrompts);
    }
    let k = pass_flags.iter().filter(|&&f| f).count();
    Ok(k as f64 / pass_flags.len() as f64)
}

// ---------------------------------------------------------------- report

/// Structural notes attached to a report: degenerate inputs, skipped
/// components, exclusions that would otherwise distort a metric silently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFlag {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub detail: String,
}

impl MetricFlag {
    pub fn no_functional_responses(metric: &str) -> MetricFlag {
        MetricFlag {
            code: "no_functional_responses".into(),
            metric: Some(metric.to_string()),
            detail: format!("no prompt contributed to {metric}; reported as 0"),
        }
    }

    pub fn not_run(metric: &str) -> MetricFlag {
        MetricFlag {
            code: "metric_not_run".into(),
            metric: Some(metric.to_string()),
            detail: format!("{metric} skipped: its experiment was not requested"),
        }
    }

    pub fn no_prompts(metric: &str) -> MetricFlag {
        MetricFlag {
            code: "no_contributing_prompts".into(),
            metric: Some(metric.to_string()),
            detail: format!("{metric} skipped: the corpus has no prompts of the required kind"),
        }
    }

    pub fn not_all_components() -> MetricFlag {
        MetricFlag {
            code: "not_all_components".into(),
            metric: Some("creativity".into()),
            detail: "creativity omitted: not all four component metrics ran".into(),
        }
    }

    pub fn unscorable(count: usize) -> MetricFlag {
        MetricFlag {
            code: "unscorable_responses".into(),
            metric: None,
            detail: format!(
                "{count} functional response(s) outside the supported subset were excluded from similarity scoring"
            ),
        }
    }

    pub fn timeouts(count: usize) -> MetricFlag {
        MetricFlag {
            code: "timeouts".into(),
            metric: None,
            detail: format!("{count} simulation(s) hit the per-run timeout"),
        }
    }

    pub fn partial_functionality(covered: usize, total: usize) -> MetricFlag {
        MetricFlag {
            code: "partial_functionality".into(),
            metric: Some("functionality".into()),
            detail: format!(
                "pass@t covers {covered} of {total} corpus prompts (an experiment was skipped)"
            ),
        }
    }
}

/// Contributing prompt counts per metric (the n of each mean).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContributingCounts {
    pub fluency: usize,
    pub flexibility: usize,
    pub originality: usize,
    pub elaboration_prompts: usize,
    pub functionality_prompts: usize,
}

/// Work-unit totals per experiment; generated = simulated = t x prompts when
/// a run is complete, and every exclusion is itemized so totals reconcile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTotals {
    pub experiment: Experiment,
    pub prompts: usize,
    pub generated: usize,
    pub simulated: usize,
    pub passes: usize,
    pub scored: usize,
    pub unscorable: usize,
    pub timeouts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_id: String,
    pub functionality: Option<f64>,
    pub fluency: Option<f64>,
    pub flexibility: Option<f64>,
    pub originality: Option<f64>,
    pub elaboration: Option<f64>,
    pub creativity: Option<f64>,
    pub weights: [f64; 4],
    pub n: ContributingCounts,
    pub flags: Vec<MetricFlag>,
    pub accounting: Vec<ExperimentTotals>,
    pub per_prompt: Vec<PromptOutcome>,
}
