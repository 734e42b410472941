//! Corpus-level BLEU with a single reference per hypothesis.

use std::collections::HashMap;
use std::fmt;

use crate::corpus::{Sentence, Token};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Precision {
    pub clipped: usize,
    pub total: usize,
}

impl Precision {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clipped as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    pub precisions: Vec<Precision>,
    pub brevity_penalty: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
    /// 0..=100
    pub score: f64,
}

impl BleuReport {
    pub fn ratio(&self) -> f64 {
        self.hyp_length as f64 / self.ref_length as f64
    }
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_report(self))
    }
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn sentence_precision(hyp: &Sentence, reference: &Sentence, n: usize) -> Precision {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let mut p = Precision::default();
    for (gram, c) in hyp_counts {
        p.total += c;
        p.clipped += c.min(ref_counts.get(gram).copied().unwrap_or(0));
    }
    p
}

/// Clipped and total n-gram counts summed over the corpus.
pub fn modified_precision(hyps: &[Sentence], refs: &[Sentence], n: usize) -> Result<Precision> {
    if hyps.len() != refs.len() {
        return Err(Error::param(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if n < 1 {
        return Err(Error::param("n-gram size must be at least 1"));
    }
    Ok(hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| sentence_precision(h, r, n))
        .fold(Precision::default(), |acc, p| Precision {
            clipped: acc.clipped + p.clipped,
            total: acc.total + p.total,
        }))
}

pub fn brevity_penalty(hyp_length: usize, ref_length: usize) -> f64 {
    if hyp_length > ref_length {
        1.0
    } else {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    }
}

/// Geometric mean of modified precisions for n = 1..=max_n times the
/// brevity penalty, on a 0-100 scale. Zero when any precision is zero.
pub fn corpus_bleu(hyps: &[Sentence], refs: &[Sentence], max_n: usize) -> Result<BleuReport> {
    if hyps.is_empty() {
        return Err(Error::param("BLEU needs a non-empty corpus"));
    }
    if max_n < 1 {
        return Err(Error::param("max_n must be at least 1"));
    }
    if let Some(i) = hyps.iter().position(|h| h.is_empty()) {
        return Err(Error::param(format!("hypothesis {} is empty", i + 1)));
    }
    let precisions = (1..=max_n)
        .map(|n| modified_precision(hyps, refs, n))
        .collect::<Result<Vec<_>>>()?;
    let hyp_length: usize = hyps.iter().map(|h| h.len()).sum();
    let ref_length: usize = refs.iter().map(|r| r.len()).sum();
    let bp = brevity_penalty(hyp_length, ref_length);

    let score = if precisions.iter().any(|p| p.clipped == 0) {
        0.0
    } else {
        let log_mean: f64 =
            precisions.iter().map(|p| p.value().ln()).sum::<f64>() / max_n as f64;
        bp * log_mean.exp() * 100.0
    };
    Ok(BleuReport {
        precisions,
        brevity_penalty: bp,
        hyp_length,
        ref_length,
        score,
    })
}

/// `BLEU = s, p1/p2/p3/p4 (BP=b, ratio=r, hyp_len=h, ref_len=l)`
pub fn write_report(r: &BleuReport) -> String {
    let precisions: Vec<String> =
        r.precisions.iter().map(|p| format!("{:.2}", 100.0 * p.value())).collect();
    format!(
        "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
        r.score,
        precisions.join("/"),
        r.brevity_penalty,
        r.ratio(),
        r.hyp_length,
        r.ref_length
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        Sentence::from_whitespace(text)
    }

    #[test]
    fn clipped_unigrams() {
        let p = modified_precision(
            &[s("the the the the the the the")],
            &[s("the cat is on the mat")],
            1,
        )
        .unwrap();
        assert_eq!(p, Precision { clipped: 2, total: 7 });
    }

    #[test]
    fn identity_precision() {
        let x = s("a b c d e");
        for n in 1..=5 {
            let p = modified_precision(std::slice::from_ref(&x), std::slice::from_ref(&x), n).unwrap();
            assert_eq!(p, Precision { clipped: 6 - n, total: 6 - n });
        }
        let p = modified_precision(&[s("a b")], &[s("a b")], 3).unwrap();
        assert_eq!(p, Precision::default());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(modified_precision(&[s("a")], &[], 1).is_err());
        assert!(corpus_bleu(&[], &[], 4).is_err());
        assert!(corpus_bleu(&[Sentence::default()], &[s("a")], 4).is_err());
    }

    #[test]
    fn identity_corpus_scores_100() {
        let c = [s("a b c d"), s("e f g h i")];
        let r = corpus_bleu(&c, &c, 4).unwrap();
        assert_eq!(r.score, 100.0);
        assert!(write_report(&r).starts_with(
            "BLEU = 100.00, 100.00/100.00/100.00/100.00 (BP=1.000, ratio=1.000, hyp_len=9, ref_len=9)"
        ));
    }

    #[test]
    fn short_hypothesis_brevity_penalty() {
        let r = corpus_bleu(&[s("a b c d")], &[s("a b c d e")], 4).unwrap();
        let want_bp = (1.0f64 - 5.0 / 4.0).exp();
        assert!((r.brevity_penalty - want_bp).abs() < 1e-15);
        assert!((r.score - 77.88).abs() < 0.01, "{}", r.score);
        assert!(write_report(&r).contains("BP=0.779"));
    }

    #[test]
    fn disjoint_vocabulary_scores_zero() {
        let r = corpus_bleu(&[s("x y z w")], &[s("a b c d")], 4).unwrap();
        assert_eq!(r.score, 0.0);
        assert!(write_report(&r).starts_with("BLEU = 0.00"));
    }
}
