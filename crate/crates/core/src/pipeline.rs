//! End-to-end training and translation built from the individual stages.

use crate::align::{align_corpus, EmTrace, Heuristic};
use crate::corpus::{
    clean_parallel, detokenize, detruecase, tokenize, train_truecaser, truecase, CleanParams, ParallelCorpus,
    Sentence, SentencePair, TruecaseModel,
};
use crate::decoder::{decode, DecoderConfig, Translation, Weights};
use crate::error::{Error, Result};
use crate::lm::{train_ngram, NGramModel, Smoothing};
use crate::phrase::{build_phrase_table, PhraseTable, DEFAULT_MAX_PHRASE_LEN};
use crate::translit::{post_edit, ScriptRange, TransliterationTable};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub lm_order: usize,
    pub smoothing: Smoothing,
    pub em_iterations: usize,
    pub use_null: bool,
    pub heuristic: Heuristic,
    pub max_phrase_len: usize,
    pub clean: CleanParams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lm_order: 3,
            smoothing: Smoothing::default(),
            em_iterations: 5,
            use_null: true,
            heuristic: Heuristic::GrowDiag,
            max_phrase_len: DEFAULT_MAX_PHRASE_LEN,
            clean: CleanParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub pairs_loaded: usize,
    pub pairs_kept: usize,
    pub forward_trace: Vec<EmTrace>,
    pub reverse_trace: Vec<EmTrace>,
    pub lm_entries: usize,
    pub phrase_entries: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub source_truecaser: TruecaseModel,
    pub lm: NGramModel,
    pub phrase_table: PhraseTable,
    pub summary: TrainSummary,
}

/// Runs truecasing, cleaning, LM training, bidirectional alignment and
/// phrase scoring on an already tokenized corpus.
pub fn train(corpus: &ParallelCorpus, opts: &TrainOptions) -> Result<TrainedModels> {
    let source_truecaser = train_truecaser(&corpus.sources());
    let target_truecaser = train_truecaser(&corpus.targets());
    let cased = ParallelCorpus::new(
        corpus
            .pairs
            .iter()
            .map(|p| {
                SentencePair::new(
                    truecase(&p.source, &source_truecaser),
                    truecase(&p.target, &target_truecaser),
                )
            })
            .collect(),
        corpus.source_lang.clone(),
        corpus.target_lang.clone(),
    );

    let cleaned = clean_parallel(&cased, opts.clean).map_err(|e| e.in_stage("clean"))?;
    if cleaned.is_empty() {
        return Err(Error::Training("no sentence pairs survive cleaning".into()).in_stage("clean"));
    }
    let lm = train_ngram(&cleaned.targets(), opts.lm_order, opts.smoothing).map_err(|e| e.in_stage("lm"))?;
    let aligned = align_corpus(&cleaned, opts.em_iterations, opts.use_null, opts.heuristic)
        .map_err(|e| e.in_stage("align"))?;
    let phrase_table = build_phrase_table(&cleaned, &aligned.alignments, opts.max_phrase_len)
        .map_err(|e| e.in_stage("phrase"))?;

    let summary = TrainSummary {
        pairs_loaded: corpus.len(),
        pairs_kept: cleaned.len(),
        forward_trace: aligned.forward_trace,
        reverse_trace: aligned.reverse_trace,
        lm_entries: lm.len(),
        phrase_entries: phrase_table.len(),
    };
    Ok(TrainedModels {
        source_truecaser,
        lm,
        phrase_table,
        summary,
    })
}

/// Output positions holding copied-through OOV tokens.
pub fn oov_output_positions(t: &Translation) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for step in &t.derivation {
        if step.src_end == step.src_start + 1 && t.oov.contains(&step.src_start) {
            out.push(offset);
        }
        offset += step.target.len();
    }
    out
}

/// A trained system ready to translate raw lines.
#[derive(Debug, Clone)]
pub struct Translator {
    pub source_truecaser: TruecaseModel,
    pub lm: NGramModel,
    pub phrase_table: PhraseTable,
    pub weights: Weights,
    pub decoder: DecoderConfig,
    /// Table and output script used to post-edit OOV tokens.
    pub translit: Option<(TransliterationTable, ScriptRange)>,
}

impl Translator {
    /// Decodes a tokenized sentence and post-edits OOV tokens. The result is
    /// still truecased; the second value lists the OOV output positions.
    pub fn translate_tokens(&self, s: &Sentence) -> Result<(Sentence, Vec<usize>)> {
        if s.is_empty() {
            return Ok((Sentence::default(), Vec::new()));
        }
        let cased = truecase(s, &self.source_truecaser);
        let t = decode(&cased, &self.phrase_table, &self.lm, &self.weights, &self.decoder)?;
        let oov = oov_output_positions(&t);
        let tokens = match &self.translit {
            Some((table, script)) => post_edit(&t.tokens, &oov, table, script),
            None => t.tokens,
        };
        Ok((tokens, oov))
    }

    /// Full line pipeline. A copied-through OOV token at the start of the
    /// output keeps its case.
    pub fn translate_line(&self, line: &str) -> Result<String> {
        let (out, oov) = self.translate_tokens(&tokenize(line))?;
        let out = if oov.first() == Some(&0) { out } else { detruecase(&out) };
        Ok(detokenize(&out))
    }
}
