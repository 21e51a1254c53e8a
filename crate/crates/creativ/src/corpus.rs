//! Corpus loading and the three prompt shapes.
//!
//! A corpus is a directory with a `manifest.json` array; each entry names a
//! case id, its kind (`single`/`multi`), the description shown to the model,
//! the module header line, and relative paths for the golden solution, the
//! self-checking testbench, and (multi only) the provided submodules. Golden
//! and submodule sources must parse under the supported synthesizable subset;
//! testbenches are only ever simulated, never parsed here.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use creativ_hdl::{parse_module, Module};
use serde::{Deserialize, Serialize};

use crate::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Single,
    Multi,
}

/// Per-case override of the simulator pass rule. Patterns are regular
/// expressions over the run log; see `sim::apply_pass_rule`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassRule {
    pub failure_pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_pattern: Option<String>,
}

/// One provided submodule of a multi case: manifest-relative path, source
/// text, and the module name parsed out of it.
#[derive(Clone, Debug, PartialEq)]
pub struct Submodule {
    pub path: String,
    pub source: String,
    pub module_name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PromptCase {
    pub id: String,
    pub kind: CaseKind,
    pub description: String,
    pub interface_decl: String,
    pub golden_solution: String,
    pub testbench: String,
    pub submodules: Vec<Submodule>,
    pub pass_rule: Option<PassRule>,
}

impl PromptCase {
    /// Parsed golden module (already validated at load time).
    pub fn golden_module(&self) -> Module {
        parse_module(&self.golden_solution).expect("golden validated at load")
    }

    pub fn submodule_names(&self) -> Vec<&str> {
        self.submodules
            .iter()
            .map(|s| s.module_name.as_str())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub cases: Vec<PromptCase>,
    pub source_path: PathBuf,
    pub p_single: usize,
    pub p_multi: usize,
}

impl Corpus {
    pub fn case(&self, id: &str) -> Option<&PromptCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    /// Cases a given experiment applies to, in manifest order.
    pub fn cases_for(&self, experiment: Experiment) -> Vec<&PromptCase> {
        let want = match experiment {
            Experiment::Completion | Experiment::Rewrite => CaseKind::Single,
            Experiment::Elaboration => CaseKind::Multi,
        };
        self.cases.iter().filter(|c| c.kind == want).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus case `{case_id}`: missing file {path}")]
    MissingFile { case_id: String, path: PathBuf },
    #[error("duplicate case id `{0}` in manifest")]
    DuplicateId(String),
    #[error("malformed manifest {path}: {msg}")]
    MalformedManifest { path: PathBuf, msg: String },
    #[error("corpus case `{case_id}`: {file} fails the supported subset: {err}")]
    SubsetParse {
        case_id: String,
        file: String,
        err: creativ_hdl::HdlError,
    },
    #[error("corpus case `{case_id}`: {msg}")]
    BadCase { case_id: String, msg: String },
    #[error("corpus case `{case_id}`: invalid pass rule pattern `{pattern}`: {msg}")]
    InvalidPattern {
        case_id: String,
        pattern: String,
        msg: String,
    },
    #[error("case `{case_id}` is a {actual} case; {experiment} prompts need a {required} case")]
    WrongKind {
        case_id: String,
        experiment: Experiment,
        actual: &'static str,
        required: &'static str,
    },
}

#[derive(Deserialize)]
struct ManifestEntry {
    id: String,
    kind: CaseKind,
    description: String,
    interface_decl: String,
    golden: String,
    testbench: String,
    #[serde(default)]
    submodules: Vec<String>,
    #[serde(default)]
    pass_rule: Option<PassRule>,
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let manifest_path = path.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|_| CorpusError::MissingFile {
        case_id: String::new(),
        path: manifest_path.clone(),
    })?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| CorpusError::MalformedManifest {
            path: manifest_path.clone(),
            msg: e.to_string(),
        })?;

    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    for entry in entries {
        if !seen.insert(entry.id.clone()) {
            return Err(CorpusError::DuplicateId(entry.id));
        }
        cases.push(load_case(path, entry)?);
    }

    let p_multi = cases.iter().filter(|c| c.kind == CaseKind::Multi).count();
    Ok(Corpus {
        p_single: cases.len() - p_multi,
        p_multi,
        cases,
        source_path: path.to_path_buf(),
    })
}

fn load_case(root: &Path, entry: ManifestEntry) -> Result<PromptCase, CorpusError> {
    let id = entry.id;
    let read = |rel: &str| -> Result<String, CorpusError> {
        let p = root.join(rel);
        std::fs::read_to_string(&p).map_err(|_| CorpusError::MissingFile {
            case_id: id.clone(),
            path: p,
        })
    };

    let golden_solution = read(&entry.golden)?;
    let testbench = read(&entry.testbench)?;

    // Golden must be a single subset module; its name anchors nothing here,
    // but a parse failure means the corpus itself is broken.
    parse_module(&golden_solution).map_err(|err| CorpusError::SubsetParse {
        case_id: id.clone(),
        file: entry.golden.clone(),
        err,
    })?;

    // Submodules are parsed too: prompts embed them, simulation trusts them,
    // and the elaboration check needs their module names.
    let mut submodules = Vec::new();
    for rel in &entry.submodules {
        let source = read(rel)?;
        let module = parse_module(&source).map_err(|err| CorpusError::SubsetParse {
            case_id: id.clone(),
            file: rel.clone(),
            err,
        })?;
        submodules.push(Submodule {
            path: rel.clone(),
            source,
            module_name: module.name,
        });
    }

    match entry.kind {
        CaseKind::Multi if submodules.is_empty() => {
            return Err(CorpusError::BadCase {
                case_id: id,
                msg: "multi case lists no submodules".into(),
            });
        }
        CaseKind::Single if !submodules.is_empty() => {
            return Err(CorpusError::BadCase {
                case_id: id,
                msg: "single case lists submodules".into(),
            });
        }
        _ => {}
    }

    if let Some(rule) = &entry.pass_rule {
        for pat in std::iter::once(&rule.failure_pattern).chain(rule.pass_pattern.iter()) {
            if let Err(e) = regex::Regex::new(pat) {
                return Err(CorpusError::InvalidPattern {
                    case_id: id,
                    pattern: pat.clone(),
                    msg: e.to_string(),
                });
            }
        }
    }

    Ok(PromptCase {
        id,
        kind: entry.kind,
        description: entry.description,
        interface_decl: entry.interface_decl,
        golden_solution,
        testbench,
        submodules,
        pass_rule: entry.pass_rule,
    })
}

/// Instruction wording for the rewrite and elaboration prompts. Placeholders:
/// `{description}` (rendered as `//` comment lines), `{golden}`, `{interface}`,
/// and `{submodules}` (sources joined by blank lines, manifest order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub rewrite: String,
    pub elaboration: String,
}

pub const DEFAULT_REWRITE_TEMPLATE: &str = "\
// Rewrite the Verilog module below so it behaves identically but is
// implemented differently. Reply with the complete rewritten module.
//
{description}

{golden}
";

pub const DEFAULT_ELABORATION_TEMPLATE: &str = "\
// The following Verilog modules are available as building blocks.

{submodules}

// Using them where helpful, implement the module described below.
{description}
{interface}
";

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            rewrite: DEFAULT_REWRITE_TEMPLATE.to_string(),
            elaboration: DEFAULT_ELABORATION_TEMPLATE.to_string(),
        }
    }
}

/// Description text rendered as `//` comment lines.
pub fn comment_block(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        if line.is_empty() {
            out.push_str("//\n");
        } else {
            out.push_str("// ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn require_kind(
    case: &PromptCase,
    experiment: Experiment,
    required: CaseKind,
) -> Result<(), CorpusError> {
    if case.kind == required {
        return Ok(());
    }
    let name = |k: CaseKind| match k {
        CaseKind::Single => "single",
        CaseKind::Multi => "multi",
    };
    Err(CorpusError::WrongKind {
        case_id: case.id.clone(),
        experiment,
        actual: name(case.kind),
        required: name(required),
    })
}

/// Description as a comment block, then the module header; the expected
/// continuation is the module body.
pub fn build_completion_prompt(case: &PromptCase) -> Result<String, CorpusError> {
    require_kind(case, Experiment::Completion, CaseKind::Single)?;
    Ok(format!(
        "{}{}\n",
        comment_block(&case.description),
        case.interface_decl
    ))
}

/// Instruction plus the full golden source; the expected continuation is a
/// complete rewritten module.
pub fn build_rewrite_prompt(
    case: &PromptCase,
    templates: &PromptTemplates,
) -> Result<String, CorpusError> {
    require_kind(case, Experiment::Rewrite, CaseKind::Single)?;
    Ok(substitute(&templates.rewrite, case))
}

/// All submodule sources, the target description, and the target header; the
/// expected continuation is the top-module body.
pub fn build_elaboration_prompt(
    case: &PromptCase,
    templates: &PromptTemplates,
) -> Result<String, CorpusError> {
    require_kind(case, Experiment::Elaboration, CaseKind::Multi)?;
    Ok(substitute(&templates.elaboration, case))
}

pub fn build_prompt(
    case: &PromptCase,
    experiment: Experiment,
    templates: &PromptTemplates,
) -> Result<String, CorpusError> {
    match experiment {
        Experiment::Completion => build_completion_prompt(case),
        Experiment::Rewrite => build_rewrite_prompt(case, templates),
        Experiment::Elaboration => build_elaboration_prompt(case, templates),
    }
}

fn substitute(template: &str, case: &PromptCase) -> String {
    let description = comment_block(&case.description);
    let submodules: Vec<&str> = case.submodules.iter().map(|s| s.source.as_str()).collect();
    template
        .replace("{description}", description.trim_end_matches('\n'))
        .replace("{golden}", case.golden_solution.trim_end_matches('\n'))
        .replace("{interface}", &case.interface_decl)
        .replace("{submodules}", join_sources(&submodules).trim_end_matches('\n'))
}

fn join_sources(sources: &[&str]) -> String {
    sources
        .iter()
        .map(|s| s.trim_end_matches('\n'))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Full candidate source for a trimmed response. Completion and elaboration
/// prompts end at the module header, so the response is a body continuation;
/// rewrite responses are complete modules already.
pub fn assemble_candidate(case: &PromptCase, experiment: Experiment, trimmed_text: &str) -> String {
    match experiment {
        Experiment::Completion | Experiment::Elaboration => {
            format!("{}\n{}", case.interface_decl, trimmed_text)
        }
        Experiment::Rewrite => trimmed_text.to_string(),
    }
}
