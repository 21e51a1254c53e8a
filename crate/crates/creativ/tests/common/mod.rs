#![allow(dead_code)]

use std::path::{Path, PathBuf};

use creativ::corpus::{load_corpus, Corpus};
use creativ::sim::SimConfig;

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_corpus_dir() -> PathBuf {
    fixture_root().join("corpus")
}

pub fn fixture_replay_path() -> PathBuf {
    fixture_root().join("replay/desk.jsonl")
}

pub fn load_fixture_corpus() -> Corpus {
    load_corpus(&fixture_corpus_dir()).expect("fixture corpus loads")
}

pub fn refsim_compile_cmd() -> String {
    format!("{} compile -o {{out}} {{sources}}", env!("CARGO_BIN_EXE_refsim"))
}

pub fn refsim_run_cmd() -> String {
    format!("{} run {{out}}", env!("CARGO_BIN_EXE_refsim"))
}

pub fn refsim_sim_config(workdir_root: PathBuf) -> SimConfig {
    SimConfig {
        compile_cmd: refsim_compile_cmd(),
        run_cmd: refsim_run_cmd(),
        workdir_root,
        ..SimConfig::default()
    }
}
