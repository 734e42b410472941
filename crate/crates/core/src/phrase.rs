//! Phrase-pair extraction from word alignments and relative-frequency
//! phrase tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::align::Alignment;
use crate::corpus::{ParallelCorpus, SentencePair};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 7;

const FIELD_SEP: &str = " ||| ";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhrasePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl PhrasePair {
    pub fn new<S: AsRef<str>>(source: &[S], target: &[S]) -> Self {
        PhrasePair {
            source: source.iter().map(|s| s.as_ref().to_owned()).collect(),
            target: target.iter().map(|s| s.as_ref().to_owned()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseScores {
    pub p_tgt_given_src: f64,
    pub p_src_given_tgt: f64,
}

/// A target phrase available for some source phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseOption {
    pub target: Vec<String>,
    pub scores: PhraseScores,
}

/// Whether the box `[s1, s2] x [t1, t2]` is a phrase pair: it holds at
/// least one link, no link crosses its border, and each of its first and
/// last rows and columns is aligned. Boxes are never grown over unaligned
/// boundary words.
pub fn is_consistent_box(a: &Alignment, s1: usize, s2: usize, t1: usize, t2: usize) -> bool {
    let in_src = |i: usize| (s1..=s2).contains(&i);
    let in_tgt = |j: usize| (t1..=t2).contains(&j);
    let mut inside = false;
    let (mut s1_hit, mut s2_hit, mut t1_hit, mut t2_hit) = (false, false, false, false);
    for (i, j) in a.iter() {
        match (in_src(i), in_tgt(j)) {
            (true, true) => {
                inside = true;
                s1_hit |= i == s1;
                s2_hit |= i == s2;
                t1_hit |= j == t1;
                t2_hit |= j == t2;
            }
            (false, false) => {}
            _ => return false,
        }
    }
    inside && s1_hit && s2_hit && t1_hit && t2_hit
}

/// All alignment-consistent phrase pairs with both sides at most
/// `max_len` tokens.
pub fn extract_phrases(pair: &SentencePair, a: &Alignment, max_len: usize) -> Result<Vec<PhrasePair>> {
    if max_len < 1 {
        return Err(Error::param("max phrase length must be at least 1"));
    }
    let (n, m) = (pair.source.len(), pair.target.len());
    a.check_bounds(n, m)?;

    let mut src_links: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut tgt_links: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, j) in a.iter() {
        src_links[i].push(j);
        tgt_links[j].push(i);
    }

    let mut out = Vec::new();
    for s1 in 0..n {
        if src_links[s1].is_empty() {
            continue;
        }
        let (mut t1, mut t2) = (usize::MAX, 0);
        for s2 in s1..n.min(s1 + max_len) {
            for &j in &src_links[s2] {
                t1 = t1.min(j);
                t2 = t2.max(j);
            }
            if t2 - t1 + 1 > max_len {
                break;
            }
            if src_links[s2].is_empty() {
                continue;
            }
            let closed = (t1..=t2).all(|j| tgt_links[j].iter().all(|&i| i >= s1 && i <= s2));
            if closed {
                out.push(PhrasePair::new(&pair.source[s1..=s2], &pair.target[t1..=t2]));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    entries: BTreeMap<PhrasePair, PhraseScores>,
    by_source: HashMap<Vec<String>, Vec<PhraseOption>>,
    max_phrase_len: usize,
}

fn option_order(a: &PhraseOption, b: &PhraseOption) -> Ordering {
    b.scores
        .p_tgt_given_src
        .total_cmp(&a.scores.p_tgt_given_src)
        .then_with(|| a.target.join(" ").cmp(&b.target.join(" ")))
}

impl PhraseTable {
    pub fn from_entries(entries: BTreeMap<PhrasePair, PhraseScores>, max_phrase_len: usize) -> Self {
        let mut by_source: HashMap<Vec<String>, Vec<PhraseOption>> = HashMap::new();
        for (pair, scores) in &entries {
            by_source.entry(pair.source.clone()).or_default().push(PhraseOption {
                target: pair.target.clone(),
                scores: *scores,
            });
        }
        for options in by_source.values_mut() {
            options.sort_by(option_order);
        }
        PhraseTable {
            entries,
            by_source,
            max_phrase_len,
        }
    }

    /// Relative-frequency scores in both directions from pair counts.
    pub fn from_counts(counts: &BTreeMap<PhrasePair, usize>, max_phrase_len: usize) -> Self {
        let mut src_totals: HashMap<&[String], usize> = HashMap::new();
        let mut tgt_totals: HashMap<&[String], usize> = HashMap::new();
        for (pair, &c) in counts {
            *src_totals.entry(&pair.source).or_default() += c;
            *tgt_totals.entry(&pair.target).or_default() += c;
        }
        let entries = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(pair, &c)| {
                let scores = PhraseScores {
                    p_tgt_given_src: c as f64 / src_totals[pair.source.as_slice()] as f64,
                    p_src_given_tgt: c as f64 / tgt_totals[pair.target.as_slice()] as f64,
                };
                (pair.clone(), scores)
            })
            .collect();
        Self::from_entries(entries, max_phrase_len)
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<PhrasePair, PhraseScores> {
        &self.entries
    }

    pub fn get(&self, pair: &PhrasePair) -> Option<PhraseScores> {
        self.entries.get(pair).copied()
    }

    /// Target options for a source phrase, most probable first and ties in
    /// lexicographic target order.
    pub fn options(&self, source: &[String]) -> &[PhraseOption] {
        self.by_source.get(source).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn query<S: AsRef<str>>(&self, source: &[S]) -> &[PhraseOption] {
        let key: Vec<String> = source.iter().map(|s| s.as_ref().to_owned()).collect();
        self.options(&key)
    }

    pub fn has_source(&self, source: &[String]) -> bool {
        self.by_source.contains_key(source)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (pair, s) in &self.entries {
            let _ = writeln!(
                out,
                "{}{FIELD_SEP}{}{FIELD_SEP}{} {}",
                pair.source.join(" "),
                pair.target.join(" "),
                s.p_tgt_given_src,
                s.p_src_given_tgt
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut max_len = 0;
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(FIELD_SEP).collect();
            let [src, tgt, scores] = fields.as_slice() else {
                return Err(Error::parse(no, format!("expected 3 fields, found {}", fields.len())));
            };
            let source: Vec<String> = src.split_whitespace().map(str::to_owned).collect();
            let target: Vec<String> = tgt.split_whitespace().map(str::to_owned).collect();
            if source.is_empty() || target.is_empty() {
                return Err(Error::parse(no, "empty phrase"));
            }
            let probs: Vec<f64> = scores
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(no, "bad score"))?;
            let [fwd, rev] = probs.as_slice() else {
                return Err(Error::parse(no, "expected two scores"));
            };
            if !(*fwd > 0.0 && *fwd <= 1.0 && *rev > 0.0 && *rev <= 1.0) {
                return Err(Error::parse(no, "scores must lie in (0, 1]"));
            }
            max_len = max_len.max(source.len()).max(target.len());
            let pair = PhrasePair { source, target };
            let scores = PhraseScores {
                p_tgt_given_src: *fwd,
                p_src_given_tgt: *rev,
            };
            if entries.insert(pair, scores).is_some() {
                return Err(Error::parse(no, "duplicate phrase pair"));
            }
        }
        Ok(Self::from_entries(entries, max_len))
    }
}

/// Extracts phrases from every aligned pair and scores them by relative
/// frequency.
pub fn build_phrase_table(
    corpus: &ParallelCorpus,
    alignments: &[Alignment],
    max_len: usize,
) -> Result<PhraseTable> {
    if corpus.len() != alignments.len() {
        return Err(Error::param(format!(
            "{} sentence pairs but {} alignments",
            corpus.len(),
            alignments.len()
        )));
    }
    let extracted: Vec<Vec<PhrasePair>> = corpus
        .pairs
        .par_iter()
        .zip(alignments.par_iter())
        .map(|(pair, a)| extract_phrases(pair, a, max_len))
        .collect::<Result<_>>()?;

    let mut counts: BTreeMap<PhrasePair, usize> = BTreeMap::new();
    for phrase in extracted.into_iter().flatten() {
        *counts.entry(phrase).or_default() += 1;
    }
    Ok(PhraseTable::from_counts(&counts, max_len))
}
