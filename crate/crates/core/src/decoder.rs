//! Monotone phrase-based beam search.
//!
//! Hypotheses extend the source left to right, so the set of covered
//! source positions is always a prefix and is represented by its length.
//! There is one stack per covered count. Hypotheses with the same coverage
//! and language-model state are recombined (keeping the better one), and
//! each stack is pruned to the `beam_size` best.
//!
//! The score of a translation `T` of `S` is log-linear in log10 space:
//!
//! ```text
//! lm * log P(T) + tm_fwd * sum log p(s|t) + tm_rev * sum log p(t|s) - word_penalty * |T|
//! ```
//!
//! With the default weights `(1, 1, 0, 0)` this is the noisy-channel
//! objective `P(T) * P(S|T)`.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::bleu::{corpus_bleu, DEFAULT_MAX_N};
use crate::corpus::{ParallelCorpus, Sentence, Token};
use crate::error::{Error, Result};
use crate::lm::{NGramModel, WordId, BOS_ID, EOS_ID};
use crate::phrase::{PhrasePair, PhraseScores, PhraseTable, DEFAULT_MAX_PHRASE_LEN};

/// Upper bound on complete hypotheses enumerated by [`exhaustive_decode`].
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub lm: f64,
    /// Weight of the channel model `log p(source | target)`.
    pub tm_fwd: f64,
    /// Weight of `log p(target | source)`.
    pub tm_rev: f64,
    pub word_penalty: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            lm: 1.0,
            tm_fwd: 1.0,
            tm_rev: 0.0,
            word_penalty: 0.0,
        }
    }
}

impl Weights {
    pub fn new(lm: f64, tm_fwd: f64, tm_rev: f64, word_penalty: f64) -> Result<Self> {
        let w = Weights {
            lm,
            tm_fwd,
            tm_rev,
            word_penalty,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.lm, self.tm_fwd, self.tm_rev, self.word_penalty]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::param("weights must be finite"))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Weights {
            lm: self.lm * factor,
            tm_fwd: self.tm_fwd * factor,
            tm_rev: self.tm_rev * factor,
            word_penalty: self.word_penalty * factor,
        }
    }
}

// A zero weight switches a feature off even when the feature is -inf.
fn term(weight: f64, feature: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * feature
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reordering {
    #[default]
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Hypotheses kept per stack; `usize::MAX` disables pruning.
    pub beam_size: usize,
    pub max_phrase_len: usize,
    pub reordering: Reordering,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam_size: 100,
            max_phrase_len: DEFAULT_MAX_PHRASE_LEN,
            reordering: Reordering::Monotone,
        }
    }
}

impl DecoderConfig {
    pub fn with_beam(beam_size: usize) -> Self {
        DecoderConfig {
            beam_size,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.beam_size < 1 {
            return Err(Error::param("beam size must be at least 1"));
        }
        if self.max_phrase_len < 1 {
            return Err(Error::param("max phrase length must be at least 1"));
        }
        Ok(())
    }
}

/// One applied phrase: source span `[src_start, src_end)` and its target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationStep {
    pub src_start: usize,
    pub src_end: usize,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub tokens: Sentence,
    pub score: f64,
    /// Source positions copied through because no phrase covers them.
    pub oov: Vec<usize>,
    pub derivation: Vec<DerivationStep>,
}

struct SpanOption {
    end: usize,
    target: Vec<String>,
    target_ids: Vec<WordId>,
    // None for copied-through OOV tokens
    scores: Option<PhraseScores>,
}

/// Translation options per start position, plus OOV positions.
struct Lattice {
    by_start: Vec<Vec<SpanOption>>,
    oov: Vec<usize>,
}

impl Lattice {
    fn build(s: &Sentence, pt: &PhraseTable, lm: &NGramModel, max_len: usize) -> Self {
        let n = s.len();
        let words: Vec<String> = s.iter().map(|t| t.as_str().to_owned()).collect();
        let mut by_start: Vec<Vec<SpanOption>> = (0..n).map(|_| Vec::new()).collect();
        let mut covered = vec![false; n];
        for start in 0..n {
            for end in start + 1..=n.min(start + max_len) {
                let opts = pt.options(&words[start..end]);
                if opts.is_empty() {
                    continue;
                }
                covered[start..end].iter_mut().for_each(|c| *c = true);
                for o in opts {
                    by_start[start].push(SpanOption {
                        end,
                        target_ids: o.target.iter().map(|w| lm.word_id(w)).collect(),
                        target: o.target.clone(),
                        scores: Some(o.scores),
                    });
                }
            }
        }
        let oov: Vec<usize> = (0..n).filter(|&i| !covered[i]).collect();
        for &i in &oov {
            by_start[i].push(SpanOption {
                end: i + 1,
                target: vec![words[i].clone()],
                target_ids: vec![lm.word_id(&words[i])],
                scores: None,
            });
        }
        Lattice { by_start, oov }
    }

    fn complete_count(&self) -> u128 {
        let n = self.by_start.len();
        let mut ways = vec![0u128; n + 1];
        ways[n] = 1;
        for i in (0..n).rev() {
            ways[i] = self.by_start[i]
                .iter()
                .fold(0u128, |acc, o| acc.saturating_add(ways[o.end]));
        }
        ways[0]
    }
}

/// Score increment for appending `opt` after LM history `state`, and the
/// resulting LM state.
fn extend(
    lm: &NGramModel,
    w: &Weights,
    state: &[WordId],
    opt: &SpanOption,
) -> (f64, Vec<WordId>) {
    let keep = lm.order() - 1;
    let mut history: Vec<WordId> = state.to_vec();
    let mut lm_lp = 0.0;
    for &id in &opt.target_ids {
        lm_lp += lm.logprob_ids(&history, id);
        history.push(id);
    }
    let next_state = history[history.len() - keep..].to_vec();

    let (fwd, rev) = match opt.scores {
        Some(s) => (s.p_src_given_tgt.log10(), s.p_tgt_given_src.log10()),
        None => (0.0, 0.0),
    };
    let delta = term(w.lm, lm_lp)
        + term(w.tm_fwd, fwd)
        + term(w.tm_rev, rev)
        + term(w.word_penalty, -(opt.target.len() as f64));
    (delta, next_state)
}

fn end_score(lm: &NGramModel, w: &Weights, state: &[WordId]) -> f64 {
    term(w.lm, lm.logprob_ids(state, EOS_ID))
}

fn initial_state(lm: &NGramModel) -> Vec<WordId> {
    vec![BOS_ID; lm.order() - 1]
}

struct Hyp {
    covered: usize,
    state: Vec<WordId>,
    score: f64,
    back: Option<(usize, usize, usize)>, // (predecessor, start, option index)
}

fn target_text(arena: &[Hyp], lattice: &Lattice, mut idx: usize) -> String {
    let mut parts: Vec<&str> = Vec::new();
    while let Some((prev, start, opt)) = arena[idx].back {
        for w in lattice.by_start[start][opt].target.iter().rev() {
            parts.push(w);
        }
        idx = prev;
    }
    parts.reverse();
    parts.join(" ")
}

// Better score first; equal scores resolved by the smaller target string.
fn better(arena: &[Hyp], lattice: &Lattice, a: usize, a_score: f64, b: usize, b_score: f64) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| target_text(arena, lattice, a).cmp(&target_text(arena, lattice, b)))
}

/// Beam-search translation of `s`.
pub fn decode(
    s: &Sentence,
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &Weights,
    cfg: &DecoderConfig,
) -> Result<Translation> {
    if s.is_empty() {
        return Err(Error::param("cannot decode an empty sentence"));
    }
    cfg.validate()?;
    w.validate()?;
    let n = s.len();
    let lattice = Lattice::build(s, pt, lm, cfg.max_phrase_len);

    let mut arena = vec![Hyp {
        covered: 0,
        state: initial_state(lm),
        score: 0.0,
        back: None,
    }];
    let mut stacks: Vec<HashMap<Vec<WordId>, usize>> = (0..=n).map(|_| HashMap::new()).collect();
    stacks[0].insert(arena[0].state.clone(), 0);

    for k in 0..n {
        let mut members: Vec<usize> = stacks[k].values().copied().collect();
        members.sort_by(|&a, &b| better(&arena, &lattice, a, arena[a].score, b, arena[b].score));
        members.truncate(cfg.beam_size);

        for idx in members {
            for (oi, opt) in lattice.by_start[k].iter().enumerate() {
                let (delta, state) = extend(lm, w, &arena[idx].state, opt);
                let score = arena[idx].score + delta;
                let new_idx = arena.len();
                arena.push(Hyp {
                    covered: opt.end,
                    state: state.clone(),
                    score,
                    back: Some((idx, k, oi)),
                });
                match stacks[opt.end].get(&state).copied() {
                    Some(old) => {
                        let ord = better(&arena, &lattice, new_idx, score, old, arena[old].score);
                        if ord == Ordering::Less {
                            stacks[opt.end].insert(state, new_idx);
                        }
                    }
                    None => {
                        stacks[opt.end].insert(state, new_idx);
                    }
                }
            }
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for &idx in stacks[n].values() {
        debug_assert_eq!(arena[idx].covered, n);
        let total = arena[idx].score + end_score(lm, w, &arena[idx].state);
        best = match best {
            Some((b, bs)) if better(&arena, &lattice, b, bs, idx, total) != Ordering::Greater => {
                Some((b, bs))
            }
            _ => Some((idx, total)),
        };
    }
    let (idx, score) = best.ok_or(Error::NoTranslation)?;

    let mut steps = Vec::new();
    let mut cur = idx;
    while let Some((prev, start, oi)) = arena[cur].back {
        let opt = &lattice.by_start[start][oi];
        steps.push(DerivationStep {
            src_start: start,
            src_end: opt.end,
            target: opt.target.clone(),
        });
        cur = prev;
    }
    steps.reverse();
    Ok(assemble(steps, score, lattice.oov))
}

fn assemble(derivation: Vec<DerivationStep>, score: f64, oov: Vec<usize>) -> Translation {
    let tokens = derivation
        .iter()
        .flat_map(|st| st.target.iter())
        .map(|w| Token::new(w.as_str()).expect("phrase table words are valid tokens"))
        .collect();
    Translation {
        tokens,
        score,
        oov,
        derivation,
    }
}

/// Enumerates every monotone segmentation and phrase choice and returns
/// the true argmax. Ties go to the lexicographically smallest target.
pub fn exhaustive_decode(
    s: &Sentence,
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &Weights,
    cfg: &DecoderConfig,
) -> Result<Translation> {
    if s.is_empty() {
        return Err(Error::param("cannot decode an empty sentence"));
    }
    cfg.validate()?;
    let lattice = Lattice::build(s, pt, lm, cfg.max_phrase_len);
    let count = lattice.complete_count();
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpace {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    struct Search<'a> {
        lattice: &'a Lattice,
        lm: &'a NGramModel,
        w: &'a Weights,
        path: Vec<(usize, usize)>,
        best: Option<(f64, String, Vec<(usize, usize)>)>,
    }

    impl Search<'_> {
        fn text(&self, path: &[(usize, usize)]) -> String {
            path.iter()
                .flat_map(|&(st, oi)| self.lattice.by_start[st][oi].target.iter())
                .map(String::as_str)
                .collect::<Vec<_>>()
                .join(" ")
        }

        fn walk(&mut self, pos: usize, state: Vec<WordId>, score: f64) {
            let n = self.lattice.by_start.len();
            if pos == n {
                let total = score + end_score(self.lm, self.w, &state);
                let text = self.text(&self.path);
                let replace = match &self.best {
                    None => true,
                    Some((bs, bt, _)) => match total.total_cmp(bs) {
                        Ordering::Greater => true,
                        Ordering::Equal => text < *bt,
                        Ordering::Less => false,
                    },
                };
                if replace {
                    self.best = Some((total, text, self.path.clone()));
                }
                return;
            }
            for oi in 0..self.lattice.by_start[pos].len() {
                let opt = &self.lattice.by_start[pos][oi];
                let (delta, next) = extend(self.lm, self.w, &state, opt);
                let end = opt.end;
                self.path.push((pos, oi));
                self.walk(end, next, score + delta);
                self.path.pop();
            }
        }
    }

    let mut search = Search {
        lattice: &lattice,
        lm,
        w,
        path: Vec::new(),
        best: None,
    };
    search.walk(0, initial_state(lm), 0.0);
    let (score, _, path) = search.best.ok_or(Error::NoTranslation)?;
    let steps = path
        .into_iter()
        .map(|(st, oi)| {
            let opt = &lattice.by_start[st][oi];
            DerivationStep {
                src_start: st,
                src_end: opt.end,
                target: opt.target.clone(),
            }
        })
        .collect();
    Ok(assemble(steps, score, lattice.oov.clone()))
}

/// Recomputes a translation's score from its derivation. Steps must tile
/// the source left to right; a step not in the phrase table must copy a
/// single source token.
pub fn rescore(
    source: &Sentence,
    translation: &Sentence,
    derivation: &[DerivationStep],
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &Weights,
) -> Result<f64> {
    let mut pos = 0;
    let mut fwd = 0.0;
    let mut rev = 0.0;
    let mut output: Vec<&str> = Vec::new();
    for (i, step) in derivation.iter().enumerate() {
        if step.src_start != pos || step.src_end <= step.src_start || step.src_end > source.len() {
            return Err(Error::param(format!(
                "derivation step {i} covers [{}, {}) but the next uncovered position is {pos}",
                step.src_start, step.src_end
            )));
        }
        if step.target.is_empty() {
            return Err(Error::param(format!("derivation step {i} has an empty target")));
        }
        let src = &source[step.src_start..step.src_end];
        let pair = PhrasePair {
            source: src.iter().map(|t| t.as_str().to_owned()).collect(),
            target: step.target.clone(),
        };
        match pt.get(&pair) {
            Some(s) => {
                fwd += s.p_src_given_tgt.log10();
                rev += s.p_tgt_given_src.log10();
            }
            None => {
                let copied = src.len() == 1 && step.target.len() == 1 && step.target[0] == src[0].as_str();
                if !copied {
                    return Err(Error::param(format!("derivation step {i} is not in the phrase table")));
                }
            }
        }
        output.extend(step.target.iter().map(String::as_str));
        pos = step.src_end;
    }
    if pos != source.len() {
        return Err(Error::param(format!(
            "derivation stops at {pos} of {} source tokens",
            source.len()
        )));
    }
    if output != translation.words() {
        return Err(Error::param("translation does not match the derivation"));
    }
    let lm_lp = lm.sentence_logprob(translation);
    Ok(term(w.lm, lm_lp)
        + term(w.tm_fwd, fwd)
        + term(w.tm_rev, rev)
        + term(w.word_penalty, -(translation.len() as f64)))
}

/// Candidate values per weight for grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    pub lm: Vec<f64>,
    pub tm_fwd: Vec<f64>,
    pub tm_rev: Vec<f64>,
    pub word_penalty: Vec<f64>,
}

impl WeightGrid {
    pub fn single(w: Weights) -> Self {
        WeightGrid {
            lm: vec![w.lm],
            tm_fwd: vec![w.tm_fwd],
            tm_rev: vec![w.tm_rev],
            word_penalty: vec![w.word_penalty],
        }
    }

    /// Grid points with `lm` varying slowest.
    pub fn points(&self) -> Vec<Weights> {
        let mut out = Vec::new();
        for &lm in &self.lm {
            for &tm_fwd in &self.tm_fwd {
                for &tm_rev in &self.tm_rev {
                    for &word_penalty in &self.word_penalty {
                        out.push(Weights {
                            lm,
                            tm_fwd,
                            tm_rev,
                            word_penalty,
                        });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("lm", &self.lm),
            ("tm_fwd", &self.tm_fwd),
            ("tm_rev", &self.tm_rev),
            ("word_penalty", &self.word_penalty),
        ] {
            if values.is_empty() {
                return Err(Error::param(format!("grid for {name} is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("grid for {name} has a non-finite value")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: Weights,
    pub best_bleu: f64,
    /// Every grid point with its dev BLEU, in search order.
    pub table: Vec<(Weights, f64)>,
}

/// Decodes the dev source and returns hypotheses; sentences that cannot be
/// decoded are copied through.
pub fn translate_all(
    sources: &[Sentence],
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &Weights,
    cfg: &DecoderConfig,
) -> Vec<Sentence> {
    sources
        .par_iter()
        .map(|s| match decode(s, pt, lm, w, cfg) {
            Ok(t) => t.tokens,
            Err(_) => s.clone(),
        })
        .collect()
}

/// Grid search maximizing corpus BLEU on `dev`. Ties keep the earliest
/// grid point.
pub fn tune_weights(
    dev: &ParallelCorpus,
    pt: &PhraseTable,
    lm: &NGramModel,
    grid: &WeightGrid,
    cfg: &DecoderConfig,
) -> Result<TuneResult> {
    if dev.is_empty() {
        return Err(Error::param("tuning needs a non-empty dev set"));
    }
    grid.validate()?;
    if let Some(i) = dev.pairs.iter().position(|p| p.source.is_empty()) {
        return Err(Error::param(format!("dev sentence {} is empty", i + 1)));
    }
    let sources = dev.sources();
    let refs = dev.targets();

    let mut table = Vec::new();
    let mut best: Option<(Weights, f64)> = None;
    for point in grid.points() {
        let hyps = translate_all(&sources, pt, lm, &point, cfg);
        let bleu = corpus_bleu(&hyps, &refs, DEFAULT_MAX_N)?.score;
        table.push((point, bleu));
        if best.is_none_or(|(_, b)| bleu > b) {
            best = Some((point, bleu));
        }
    }
    let (best, best_bleu) = best.expect("grid has at least one point");
    Ok(TuneResult {
        best,
        best_bleu,
        table,
    })
}
