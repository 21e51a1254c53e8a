//! Batch harness measuring the creativity of LLM-generated Verilog.
//!
//! The evaluation runs three prompt experiments over a corpus of Verilog
//! design cases (body completion, module rewrite, multi-module elaboration),
//! checks every sampled response for functionality with an external
//! simulator, scores functional responses against the case's golden solution
//! with a data-flow-graph similarity backend, and folds the per-prompt
//! results into fluency / flexibility / originality / elaboration scores and
//! their weighted creativity mean, plus a pass@t functionality rate.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod config;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod similarity;
pub mod store;

/// The three prompt experiments. Completion and rewrite run on single-module
/// cases, elaboration on multi-module cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Completion,
    Rewrite,
    Elaboration,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [
        Experiment::Completion,
        Experiment::Rewrite,
        Experiment::Elaboration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Completion => "completion",
            Experiment::Rewrite => "rewrite",
            Experiment::Elaboration => "elaboration",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        match s {
            "completion" => Some(Experiment::Completion),
            "rewrite" => Some(Experiment::Rewrite),
            "elaboration" => Some(Experiment::Elaboration),
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
