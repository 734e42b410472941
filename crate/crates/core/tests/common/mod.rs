//! Brute-force reference implementations and random instance generators
//! shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use asmt_core::corpus::{ParallelCorpus, Sentence, SentencePair};
use asmt_core::phrase::PhraseScores;
use asmt_core::{Alignment, NGramModel, PhrasePair, PhraseTable, Smoothing};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NULL: &str = "<NULL>";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sentence(rng: &mut ChaCha8Rng, vocab: &[&str], min: usize, max: usize) -> Sentence {
    let len = rng.gen_range(min..=max);
    let words: Vec<&str> = (0..len).map(|_| *vocab.choose(rng).unwrap()).collect();
    Sentence::from_words(&words)
}

pub fn word_list(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

pub fn random_corpus(rng: &mut ChaCha8Rng, pairs: usize, max_len: usize) -> ParallelCorpus {
    let src_vocab = word_list("s", rng.gen_range(2..=6));
    let tgt_vocab = word_list("t", rng.gen_range(2..=6));
    let pairs = (0..pairs)
        .map(|_| {
            SentencePair::new(
                random_sentence(rng, &as_strs(&src_vocab), 1, max_len),
                random_sentence(rng, &as_strs(&tgt_vocab), 1, max_len),
            )
        })
        .collect();
    ParallelCorpus::new(pairs, "src", "tgt")
}

// ---------------------------------------------------------------- LM

/// Counts of every k-gram (k = history.len() + 1) over sentences padded
/// with `order - 1` start markers and one end marker.
pub fn padded(s: &Sentence, order: usize) -> Vec<String> {
    let mut out: Vec<String> = vec!["<s>".to_owned(); order - 1];
    out.extend(s.words().iter().map(|w| w.to_string()));
    out.push("</s>".to_owned());
    out
}

/// Maximum-likelihood conditional `c(h w) / c(h .)` counted naively over
/// predicted positions of the padded corpus.
pub fn mle_oracle(corpus: &[Sentence], order: usize, history: &[String], word: &str) -> Option<f64> {
    let mut joint = 0u64;
    let mut hist = 0u64;
    for s in corpus {
        let p = padded(s, order);
        for i in (order - 1)..p.len() {
            let start = i - history.len();
            if p[start..i] == *history {
                hist += 1;
                if p[i] == word {
                    joint += 1;
                }
            }
        }
    }
    if joint == 0 {
        None
    } else {
        Some(joint as f64 / hist as f64)
    }
}

/// Every distinct (history, word) with a nonzero count, for histories of
/// exactly `order - 1` words.
pub fn observed_ngrams(corpus: &[Sentence], order: usize) -> BTreeSet<(Vec<String>, String)> {
    let mut out = BTreeSet::new();
    for s in corpus {
        let p = padded(s, order);
        for i in (order - 1)..p.len() {
            out.insert((p[i + 1 - order..i].to_vec(), p[i].clone()));
        }
    }
    out
}

/// Sum of `P(w | history)` over every predictable word.
pub fn history_mass(lm: &NGramModel, history: &[&str]) -> f64 {
    lm.vocab()
        .iter()
        .filter(|w| w.as_str() != "<s>")
        .map(|w| 10f64.powf(lm.logprob(history, w)))
        .sum()
}

pub fn smoothing_name(s: Smoothing) -> String {
    format!("{s:?}")
}

// ---------------------------------------------------------------- IBM Model 1

pub type StringTable = BTreeMap<(String, String), f64>;

fn source_words(pair: &SentencePair, use_null: bool) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    if use_null {
        out.push(NULL.to_owned());
    }
    out.extend(pair.source.words().iter().map(|w| w.to_string()));
    out
}

/// Direct implementation of Model 1 EM over string keys. Returns the final
/// table and the log-likelihood of each iteration's input table.
pub fn em_oracle(corpus: &ParallelCorpus, iterations: usize, use_null: bool) -> (StringTable, Vec<f64>) {
    let mut cooc: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let all_targets: BTreeSet<String> = corpus
        .pairs
        .iter()
        .flat_map(|p| p.target.words().into_iter().map(str::to_owned))
        .collect();
    for pair in &corpus.pairs {
        for s in pair.source.words() {
            let entry = cooc.entry(s.to_owned()).or_default();
            for t in pair.target.words() {
                entry.insert(t.to_owned());
            }
        }
    }
    if use_null {
        cooc.insert(NULL.to_owned(), all_targets);
    }
    let mut t: StringTable = BTreeMap::new();
    for (s, targets) in &cooc {
        for tw in targets {
            t.insert((s.clone(), tw.clone()), 1.0 / targets.len() as f64);
        }
    }

    let mut lls = Vec::new();
    for _ in 0..iterations {
        let mut count: StringTable = BTreeMap::new();
        let mut total: BTreeMap<String, f64> = BTreeMap::new();
        let mut ll = 0.0;
        for pair in &corpus.pairs {
            let src = source_words(pair, use_null);
            for tw in pair.target.words() {
                let mut z = 0.0;
                for s in &src {
                    z += t.get(&(s.clone(), tw.to_owned())).copied().unwrap_or(0.0);
                }
                ll += (z / src.len() as f64).ln();
                for s in &src {
                    let p = t.get(&(s.clone(), tw.to_owned())).copied().unwrap_or(0.0);
                    *count.entry((s.clone(), tw.to_owned())).or_insert(0.0) += p / z;
                    *total.entry(s.clone()).or_insert(0.0) += p / z;
                }
            }
        }
        lls.push(ll);
        t = count
            .into_iter()
            .filter(|(_, c)| *c > 0.0)
            .map(|((s, tw), c)| {
                let p = c / total[&s];
                ((s, tw), p)
            })
            .collect();
    }
    (t, lls)
}

// ---------------------------------------------------------------- phrases

pub fn random_alignment(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> Alignment {
    let mut links = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(density) {
                links.push((i, j));
            }
        }
    }
    Alignment::new(links)
}

/// Enumerates every box and keeps those with a link inside, no link
/// crossing the boundary, and a link on each of the four boundary lines.
pub fn phrase_oracle(pair: &SentencePair, a: &Alignment, max_len: usize) -> Vec<(Vec<String>, Vec<String>)> {
    let (n, m) = (pair.source.len(), pair.target.len());
    let links: Vec<(usize, usize)> = a.iter().collect();
    let mut out = Vec::new();
    for s1 in 0..n {
        for s2 in s1..n {
            for t1 in 0..m {
                for t2 in t1..m {
                    if s2 - s1 + 1 > max_len || t2 - t1 + 1 > max_len {
                        continue;
                    }
                    let inside = |&(i, j): &(usize, usize)| s1 <= i && i <= s2 && t1 <= j && j <= t2;
                    let src_in = |i: usize| s1 <= i && i <= s2;
                    let tgt_in = |j: usize| t1 <= j && j <= t2;
                    if !links.iter().any(inside) {
                        continue;
                    }
                    if links.iter().any(|&(i, j)| src_in(i) != tgt_in(j)) {
                        continue;
                    }
                    let row = |r: usize| links.iter().any(|&(i, j)| i == r && tgt_in(j));
                    let col = |c: usize| links.iter().any(|&(i, j)| j == c && src_in(i));
                    if !(row(s1) && row(s2) && col(t1) && col(t2)) {
                        continue;
                    }
                    out.push((
                        pair.source[s1..=s2].iter().map(|t| t.to_string()).collect(),
                        pair.target[t1..=t2].iter().map(|t| t.to_string()).collect(),
                    ));
                }
            }
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------- BLEU

fn count_occurrences(haystack: &[String], needle: &[String]) -> usize {
    if needle.len() > haystack.len() {
        return 0;
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| haystack[i..i + needle.len()] == *needle)
        .count()
}

/// Corpus BLEU computed from naive n-gram multiset counts.
pub fn bleu_oracle(hyps: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> f64 {
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (h, r) in hyps.iter().zip(refs) {
            if h.len() < n {
                continue;
            }
            let mut seen: Vec<&[String]> = Vec::new();
            for i in 0..=h.len() - n {
                let gram = &h[i..i + n];
                if seen.contains(&gram) {
                    continue;
                }
                seen.push(gram);
                let ch = count_occurrences(h, gram);
                clipped += ch.min(count_occurrences(r, gram));
                total += ch;
            }
        }
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let c: usize = hyps.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

// ---------------------------------------------------------------- decoding

pub struct DecodeInstance {
    pub source: Sentence,
    pub table: PhraseTable,
    pub lm: NGramModel,
}

/// A small random phrase table over a source vocabulary, a Witten-Bell
/// bigram LM over the target vocabulary and a source sentence. Some source
/// words may be missing from the table.
pub fn random_decode_instance(rng: &mut ChaCha8Rng) -> DecodeInstance {
    let src_vocab = word_list("s", 4);
    let tgt_vocab = word_list("t", 5);
    let src = as_strs(&src_vocab);
    let tgt = as_strs(&tgt_vocab);

    let mut counts: BTreeMap<PhrasePair, usize> = BTreeMap::new();
    let entries = rng.gen_range(4..=10);
    for _ in 0..entries {
        let s = random_sentence(rng, &src, 1, 2);
        let t = random_sentence(rng, &tgt, 1, 2);
        *counts.entry(PhrasePair::new(&s.words(), &t.words())).or_default() += rng.gen_range(1..=3);
    }
    let table = PhraseTable::from_counts(&counts, 2);

    let lm_corpus: Vec<Sentence> = (0..8).map(|_| random_sentence(rng, &tgt, 1, 4)).collect();
    let lm = asmt_core::train_ngram(&lm_corpus, 2, Smoothing::WittenBell).unwrap();
    let source = random_sentence(rng, &src, 2, 5);
    DecodeInstance { source, table, lm }
}

pub fn scores(f: f64, r: f64) -> PhraseScores {
    PhraseScores {
        p_tgt_given_src: f,
        p_src_given_tgt: r,
    }
}

pub fn word_vec(s: &Sentence) -> Vec<String> {
    s.words().into_iter().map(str::to_owned).collect()
}

pub fn string_counts(items: &[(Vec<String>, Vec<String>)]) -> HashMap<(Vec<String>, Vec<String>), usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it.clone()).or_insert(0) += 1;
    }
    m
}
