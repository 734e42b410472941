//! Phrase-based statistical machine translation toolkit.
//!
//! The pipeline trains an n-gram [`lm::NGramModel`] on the target side,
//! learns lexical translation tables with IBM Model 1 EM ([`align`]),
//! extracts and scores a [`phrase::PhraseTable`], and searches for the
//! best translation with a monotone beam [`decoder`]. Output can be scored
//! with corpus [`bleu`] and out-of-vocabulary tokens are transliterated
//! by [`translit`].

pub mod align;
pub mod bleu;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod lm;
pub mod phrase;
pub mod pipeline;
pub mod translit;

pub use align::{Alignment, EmTrace, Heuristic, TTable};
pub use bleu::{corpus_bleu, BleuReport};
pub use corpus::{ParallelCorpus, Sentence, SentencePair, Token, TruecaseModel};
pub use decoder::{decode, DecoderConfig, Translation, Weights};
pub use error::{Error, Result};
pub use lm::{train_ngram, NGramModel, Smoothing};
pub use phrase::{PhrasePair, PhraseTable};
pub use translit::{ScriptRange, TransliterationTable};
pub use pipeline::{TrainOptions, TrainedModels, Translator};
