//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use asmt_core::corpus::{read_lines, tokenize_parallel};
use asmt_core::ParallelCorpus;

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

/// The bundled Assamese-English toy corpus, tokenized.
pub fn toy_corpus() -> ParallelCorpus {
    let src = read_lines(&toy_dir().join("toy.as")).expect("toy source");
    let tgt = read_lines(&toy_dir().join("toy.en")).expect("toy target");
    tokenize_parallel(&src, &tgt, "as", "en").expect("toy corpus is aligned")
}
