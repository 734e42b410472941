//! Backoff n-gram language model with ARPA-style text serialization.
//!
//! Probabilities and backoff weights are stored as log10 values keyed by
//! interned word ids. A query for `(h, w)` returns the stored n-gram if
//! present and otherwise backs off: `bow(h) + logprob(h[1..], w)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub type WordId = u32;

pub const BOS_ID: WordId = 0;
pub const EOS_ID: WordId = 1;
pub const UNK_ID: WordId = 2;

// Placeholder probability for ARPA entries that only carry a backoff weight.
const ARPA_ABSENT: f64 = -99.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    None,
    AddK(f64),
    #[default]
    WittenBell,
}

/// Conditional query `P(word | history)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramQuery {
    history: Vec<String>,
    word: String,
}

impl NGramQuery {
    pub fn new(model: &NGramModel, history: &[&str], word: &str) -> Result<Self> {
        if history.len() >= model.order() {
            return Err(Error::param(format!(
                "history of length {} is too long for an order-{} model",
                history.len(),
                model.order()
            )));
        }
        Ok(NGramQuery {
            history: history.iter().map(|s| s.to_string()).collect(),
            word: word.to_owned(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    words: Vec<String>,
    ids: HashMap<String, WordId>,
    probs: HashMap<Vec<WordId>, f64>,
    backoff: HashMap<Vec<WordId>, f64>,
}

impl NGramModel {
    /// An empty model of the given order containing only the reserved
    /// markers. Entries are added with [`NGramModel::insert`].
    pub fn empty(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::param("n-gram order must be at least 1"));
        }
        let mut m = NGramModel {
            order,
            words: Vec::new(),
            ids: HashMap::new(),
            probs: HashMap::new(),
            backoff: HashMap::new(),
        };
        for w in [BOS, EOS, UNK] {
            m.intern(w);
        }
        Ok(m)
    }

    fn intern(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as WordId;
        self.words.push(word.to_owned());
        self.ids.insert(word.to_owned(), id);
        id
    }

    /// Stores `log10 P(ngram[last] | ngram[..last])`, adding unseen words to
    /// the vocabulary.
    pub fn insert(&mut self, ngram: &[&str], log10_prob: f64) -> Result<()> {
        if ngram.is_empty() || ngram.len() > self.order {
            return Err(Error::param(format!(
                "n-gram length {} outside 1..={}",
                ngram.len(),
                self.order
            )));
        }
        if log10_prob > 0.0 {
            return Err(Error::param("log10 probability must be <= 0"));
        }
        if ngram[ngram.len() - 1] == BOS {
            return Err(Error::param("the sentence-start marker cannot be predicted"));
        }
        let key: Vec<WordId> = ngram.iter().map(|w| self.intern(w)).collect();
        self.probs.insert(key, log10_prob);
        Ok(())
    }

    pub fn set_backoff(&mut self, history: &[&str], log10_weight: f64) -> Result<()> {
        if history.is_empty() || history.len() >= self.order {
            return Err(Error::param("backoff history must have length 1..order"));
        }
        let key: Vec<WordId> = history.iter().map(|w| self.intern(w)).collect();
        self.backoff.insert(key, log10_weight);
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Vocabulary including the reserved markers.
    pub fn vocab(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// Id of `word`, or the unknown-word id.
    pub fn word_id(&self, word: &str) -> WordId {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    /// Number of stored probabilities.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn stored_logprob(&self, ngram: &[WordId]) -> Option<f64> {
        self.probs.get(ngram).copied()
    }

    pub fn stored_backoff(&self, history: &[WordId]) -> Option<f64> {
        self.backoff.get(history).copied()
    }

    /// Backoff query over word ids. Only the last `order - 1` history ids
    /// are consulted.
    pub fn logprob_ids(&self, history: &[WordId], word: WordId) -> f64 {
        let keep = history.len().min(self.order - 1);
        let mut hist = &history[history.len() - keep..];
        let mut key = Vec::with_capacity(keep + 1);
        let mut acc = 0.0;
        loop {
            key.clear();
            key.extend_from_slice(hist);
            key.push(word);
            if let Some(p) = self.probs.get(&key) {
                return acc + p;
            }
            if hist.is_empty() {
                return f64::NEG_INFINITY;
            }
            if let Some(b) = self.backoff.get(hist) {
                acc += b;
                if acc == f64::NEG_INFINITY {
                    return acc;
                }
            }
            hist = &hist[1..];
        }
    }

    pub fn logprob(&self, history: &[&str], word: &str) -> f64 {
        let hist: Vec<WordId> = history.iter().map(|w| self.word_id(w)).collect();
        self.logprob_ids(&hist, self.word_id(word))
    }

    pub fn ngram_logprob(&self, q: &NGramQuery) -> f64 {
        let hist: Vec<&str> = q.history.iter().map(String::as_str).collect();
        self.logprob(&hist, &q.word)
    }

    /// Start-padded id stream for a sentence; `include_end` appends the end
    /// marker.
    pub fn padded_ids(&self, s: &Sentence, include_end: bool) -> Vec<WordId> {
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(s.iter().map(|t| self.word_id(t)));
        if include_end {
            ids.push(EOS_ID);
        }
        ids
    }

    /// Per-token log10 probabilities of the padded sentence, in order.
    pub fn token_logprobs(&self, s: &Sentence, include_end: bool) -> Vec<f64> {
        let ids = self.padded_ids(s, include_end);
        let start = self.order - 1;
        (start..ids.len())
            .map(|i| self.logprob_ids(&ids[i - start..i], ids[i]))
            .collect()
    }

    pub fn sentence_logprob(&self, s: &Sentence) -> f64 {
        self.sentence_logprob_with(s, true)
    }

    pub fn sentence_logprob_with(&self, s: &Sentence, include_end: bool) -> f64 {
        self.token_logprobs(s, include_end).into_iter().sum()
    }

    /// `10^(-logprob / predicted tokens)`, counting one end marker per
    /// sentence. Infinite when any sentence is impossible.
    pub fn perplexity(&self, corpus: &[Sentence]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::param("perplexity needs a non-empty corpus"));
        }
        let mut total = 0.0;
        let mut n = 0usize;
        for s in corpus {
            let lp = self.sentence_logprob(s);
            if lp == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            total += lp;
            n += s.len() + 1;
        }
        Ok(10f64.powf(-total / n as f64))
    }

    /// Writes the model in ARPA format.
    pub fn to_arpa(&self) -> String {
        let mut by_order: Vec<BTreeMap<Vec<&str>, (Option<f64>, Option<f64>)>> =
            vec![BTreeMap::new(); self.order];
        for (key, &p) in &self.probs {
            by_order[key.len() - 1].entry(self.spell(key)).or_default().0 = Some(p);
        }
        for (key, &b) in &self.backoff {
            by_order[key.len() - 1].entry(self.spell(key)).or_default().1 = Some(b);
        }

        let mut out = String::from("\\data\\\n");
        for (i, entries) in by_order.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", i + 1, entries.len());
        }
        for (i, entries) in by_order.iter().enumerate() {
            let n = i + 1;
            let _ = writeln!(out, "\n\\{n}-grams:");
            for (words, (p, b)) in entries {
                let p = p.unwrap_or(ARPA_ABSENT);
                let _ = write!(out, "{}\t{}", p, words.join(" "));
                if n < self.order {
                    if let Some(b) = b {
                        let _ = write!(out, "\t{b}");
                    }
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    fn spell(&self, key: &[WordId]) -> Vec<&str> {
        key.iter().map(|&id| self.word(id)).collect()
    }

    pub fn write_arpa(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_arpa()).map_err(|e| Error::io(path, e))
    }

    pub fn read_arpa(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_arpa(&text)
    }

    pub fn parse_arpa(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

        let mut declared: BTreeMap<usize, usize> = BTreeMap::new();
        let mut saw_data = false;
        let mut pending: Option<(usize, &str)> = None;
        for (no, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !saw_data {
                if line != "\\data\\" {
                    return Err(Error::parse(no, "expected \\data\\ header"));
                }
                saw_data = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                let (n, count) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(no, "malformed ngram count line"))?;
                let n: usize = n.trim().parse().map_err(|_| Error::parse(no, "bad n-gram order"))?;
                let count: usize =
                    count.trim().parse().map_err(|_| Error::parse(no, "bad n-gram count"))?;
                if n == 0 || declared.insert(n, count).is_some() {
                    return Err(Error::parse(no, format!("invalid or repeated order {n}")));
                }
            } else {
                pending = Some((no, line));
                break;
            }
        }
        if !saw_data {
            return Err(Error::parse(1, "empty file"));
        }
        let order = match declared.keys().next_back() {
            Some(&n) => n,
            None => return Err(Error::parse(1, "no n-gram counts declared")),
        };
        if declared.keys().copied().ne(1..=order) {
            return Err(Error::parse(1, "declared orders must be 1..=n without gaps"));
        }

        let mut model = NGramModel::empty(order)?;
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let mut current: Option<usize> = None;
        let mut ended = false;
        let mut last_no = 1;

        let rest = pending.into_iter().chain(lines.map(|(n, l)| (n, l.trim())));
        for (no, line) in rest {
            last_no = no;
            if line.is_empty() {
                continue;
            }
            if ended {
                return Err(Error::parse(no, "content after \\end\\"));
            }
            if line == "\\end\\" {
                ended = true;
                continue;
            }
            if let Some(header) = line.strip_prefix('\\') {
                let n = header
                    .strip_suffix("-grams:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(no, format!("unknown section {line:?}")))?;
                if !declared.contains_key(&n) || seen.contains_key(&n) {
                    return Err(Error::parse(no, format!("unexpected section for order {n}")));
                }
                seen.insert(n, 0);
                current = Some(n);
                continue;
            }
            let n = current.ok_or_else(|| Error::parse(no, "entry outside of a section"))?;
            model.parse_entry(no, n, line)?;
            *seen.get_mut(&n).expect("section registered") += 1;
        }

        if !ended {
            return Err(Error::parse(last_no, "missing \\end\\ marker"));
        }
        for (n, count) in &declared {
            match seen.get(n) {
                None => return Err(Error::parse(last_no, format!("missing \\{n}-grams: section"))),
                Some(c) if c != count => {
                    return Err(Error::parse(
                        last_no,
                        format!("order {n} declares {count} entries but has {c}"),
                    ))
                }
                _ => {}
            }
        }
        Ok(model)
    }

    fn parse_entry(&mut self, no: usize, n: usize, line: &str) -> Result<()> {
        let fields: Vec<&str> = line.split('\t').collect();
        let (prob, words, bow) = match fields.as_slice() {
            [p, w] => (*p, *w, None),
            [p, w, b] => (*p, *w, Some(*b)),
            _ => return Err(Error::parse(no, "expected 2 or 3 tab-separated fields")),
        };
        let prob: f64 = prob.trim().parse().map_err(|_| Error::parse(no, "bad probability"))?;
        let words: Vec<&str> = words.split(' ').filter(|w| !w.is_empty()).collect();
        if words.len() != n {
            return Err(Error::parse(no, format!("expected {n} words, found {}", words.len())));
        }
        if prob > 0.0 {
            return Err(Error::parse(no, "log probability must be <= 0"));
        }
        if words[n - 1] == BOS {
            for w in &words {
                self.intern(w);
            }
        } else {
            let key: Vec<WordId> = words.iter().map(|w| self.intern(w)).collect();
            self.probs.insert(key, prob);
        }
        if let Some(b) = bow {
            if n == self.order {
                return Err(Error::parse(no, "highest order entries carry no backoff"));
            }
            let b: f64 = b.trim().parse().map_err(|_| Error::parse(no, "bad backoff weight"))?;
            let key: Vec<WordId> = words.iter().map(|w| self.intern(w)).collect();
            self.backoff.insert(key, b);
        }
        Ok(())
    }
}

type CountTable = BTreeMap<Vec<WordId>, u64>;

struct HistoryStats {
    total: u64,
    types: u64,
}

/// Trains an order-`order` model. Sentences are padded with `order - 1`
/// start markers and one end marker.
pub fn train_ngram(corpus: &[Sentence], order: usize, smoothing: Smoothing) -> Result<NGramModel> {
    if order < 1 {
        return Err(Error::param("n-gram order must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(Error::Training("cannot train a language model on an empty corpus".into()));
    }
    if let Smoothing::AddK(k) = smoothing {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::param("add-k smoothing needs k > 0"));
        }
    }

    let mut model = NGramModel::empty(order)?;
    let vocab: BTreeSet<&str> = corpus.iter().flat_map(|s| s.iter().map(|t| t.as_str())).collect();
    for w in vocab {
        model.intern(w);
    }

    // counts[k-1] holds k-gram counts over predicted positions
    let mut counts: Vec<CountTable> = vec![BTreeMap::new(); order];
    for s in corpus {
        let ids = model.padded_ids(s, true);
        for i in (order - 1)..ids.len() {
            for k in 1..=order {
                *counts[k - 1].entry(ids[i + 1 - k..=i].to_vec()).or_default() += 1;
            }
        }
    }

    // prediction event space: every word except the start marker
    let events: Vec<WordId> = (0..model.words.len() as WordId).filter(|&id| id != BOS_ID).collect();
    let v = events.len() as f64;

    let unigrams = &counts[0];
    let n_tokens: u64 = unigrams.values().sum();
    let n_types = unigrams.len() as u64;
    for &w in &events {
        let c = unigrams.get(&vec![w]).copied().unwrap_or(0);
        let p = match smoothing {
            Smoothing::None if c == 0 => continue,
            Smoothing::None => c as f64 / n_tokens as f64,
            Smoothing::AddK(k) => (c as f64 + k) / (n_tokens as f64 + k * v),
            Smoothing::WittenBell => {
                (c as f64 + n_types as f64 / v) / (n_tokens as f64 + n_types as f64)
            }
        };
        model.probs.insert(vec![w], p.log10());
    }

    for k in 2..=order {
        let mut stats: BTreeMap<&[WordId], HistoryStats> = BTreeMap::new();
        for (ngram, &c) in &counts[k - 1] {
            let st = stats
                .entry(&ngram[..k - 1])
                .or_insert(HistoryStats { total: 0, types: 0 });
            st.total += c;
            st.types += 1;
        }

        let mut new_probs = Vec::new();
        let mut new_backoff = Vec::new();
        let mut seen_mass: BTreeMap<&[WordId], (f64, f64)> = BTreeMap::new();
        for (ngram, &c) in &counts[k - 1] {
            let hist = &ngram[..k - 1];
            let word = ngram[k - 1];
            let st = &stats[hist];
            let lower = 10f64.powf(model.logprob_ids(&hist[1..], word));
            let p = match smoothing {
                Smoothing::None => c as f64 / st.total as f64,
                Smoothing::AddK(add) => (c as f64 + add) / (st.total as f64 + add * v),
                Smoothing::WittenBell => {
                    (c as f64 + st.types as f64 * lower) / (st.total + st.types) as f64
                }
            };
            let mass = seen_mass.entry(hist).or_insert((0.0, 0.0));
            mass.0 += p;
            mass.1 += lower;
            new_probs.push((ngram.clone(), p.log10()));
        }
        for (hist, st) in &stats {
            let bow = match smoothing {
                Smoothing::None => f64::NEG_INFINITY,
                Smoothing::AddK(_) => {
                    let (seen, seen_lower) = seen_mass[hist];
                    if seen_lower >= 1.0 {
                        // every event is seen; the weight is never used
                        0.0
                    } else {
                        ((1.0 - seen).max(0.0) / (1.0 - seen_lower)).log10()
                    }
                }
                Smoothing::WittenBell => {
                    (st.types as f64 / (st.total + st.types) as f64).log10()
                }
            };
            new_backoff.push((hist.to_vec(), bow));
        }
        model.probs.extend(new_probs);
        model.backoff.extend(new_backoff);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| Sentence::from_whitespace(l)).collect()
    }

    #[test]
    fn mle_bigram_relative_frequency() {
        let m = train_ngram(&corpus(&["a b", "a c"]), 2, Smoothing::None).unwrap();
        assert_eq!(m.logprob(&["a"], "b"), 0.5f64.log10());
        assert_eq!(m.logprob(&["a"], "c"), 0.5f64.log10());
    }

    #[test]
    fn single_path_model_is_certain() {
        let m = train_ngram(&corpus(&["a", "a", "a"]), 2, Smoothing::None).unwrap();
        assert_eq!(m.logprob(&[BOS], "a"), 0.0);
        assert_eq!(m.logprob(&["a"], EOS), 0.0);
        assert_eq!(m.sentence_logprob(&Sentence::from_words(&["a"])), 0.0);
        assert_eq!(m.perplexity(&corpus(&["a"])).unwrap(), 1.0);
    }

    #[test]
    fn add_one_bigram() {
        let m = train_ngram(&corpus(&["a b"]), 2, Smoothing::AddK(1.0)).unwrap();
        // event space {a, b, </s>, <unk>}
        assert!((m.logprob(&["a"], "b") - 0.4f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn unknown_word_without_smoothing_is_impossible() {
        let m = train_ngram(&corpus(&["a b"]), 2, Smoothing::None).unwrap();
        assert_eq!(m.logprob(&["a"], "zzz"), f64::NEG_INFINITY);
        assert_eq!(m.logprob(&[], "zzz"), f64::NEG_INFINITY);
        let s = Sentence::from_words(&["b", "a"]);
        assert_eq!(m.sentence_logprob(&s), f64::NEG_INFINITY);
        assert_eq!(m.perplexity(&[s]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn smoothed_unknown_is_finite() {
        let m = train_ngram(&corpus(&["a b"]), 3, Smoothing::WittenBell).unwrap();
        let lp = m.logprob(&["a", "b"], "nope");
        assert!(lp.is_finite() && lp < 0.0);
    }

    #[test]
    fn perplexity_by_hand() {
        let m = train_ngram(&corpus(&["a b", "a c"]), 2, Smoothing::None).unwrap();
        // six predicted tokens, two of them with probability 1/2
        let expected = 10f64.powf(-(2.0 * 0.5f64.log10()) / 6.0);
        let ppl = m.perplexity(&corpus(&["a b", "a c"])).unwrap();
        assert!((ppl - expected).abs() < 1e-12);
        assert!((ppl - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let mut m = NGramModel::empty(1).unwrap();
        let p = (0.25f64).log10();
        for w in ["a", "b", "c", EOS] {
            m.insert(&[w], p).unwrap();
        }
        let ppl = m.perplexity(&corpus(&["a b c", "c"])).unwrap();
        assert!((ppl - 4.0).abs() < 1e-9);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(train_ngram(&[], 2, Smoothing::None), Err(Error::Training(_))));
        assert!(matches!(
            train_ngram(&corpus(&["a"]), 0, Smoothing::None),
            Err(Error::Parameter(_))
        ));
        assert!(train_ngram(&corpus(&["a"]), 2, Smoothing::AddK(0.0)).is_err());
    }

    #[test]
    fn query_validates_history_length() {
        let m = train_ngram(&corpus(&["a b"]), 2, Smoothing::None).unwrap();
        assert!(NGramQuery::new(&m, &["a", "b"], "c").is_err());
        let q = NGramQuery::new(&m, &["a"], "b").unwrap();
        assert_eq!(m.ngram_logprob(&q), 0.0);
    }

    #[test]
    fn start_marker_is_never_predicted() {
        let m = train_ngram(&corpus(&["a b", "b"]), 3, Smoothing::WittenBell).unwrap();
        for key in m.probs.keys() {
            assert_ne!(*key.last().unwrap(), BOS_ID);
        }
        let mut m = NGramModel::empty(2).unwrap();
        assert!(m.insert(&["a", BOS], -1.0).is_err());
    }

    #[test]
    fn arpa_rejects_malformed_input() {
        assert!(NGramModel::parse_arpa("").is_err());
        assert!(NGramModel::parse_arpa("\n\n").is_err());
        let missing = "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-1\ta\n\n\\end\\\n";
        let err = NGramModel::parse_arpa(missing).unwrap_err();
        assert!(err.to_string().contains("2-grams"), "{err}");
        let bad_prob = "\\data\\\nngram 1=1\n\n\\1-grams:\nx\ta\n\\end\\\n";
        match NGramModel::parse_arpa(bad_prob) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arpa_preserves_impossible_backoff() {
        let m = train_ngram(&corpus(&["a b", "a c"]), 2, Smoothing::None).unwrap();
        let back = NGramModel::parse_arpa(&m.to_arpa()).unwrap();
        assert_eq!(back.logprob(&["b"], "a"), f64::NEG_INFINITY);
        assert_eq!(back.logprob(&["a"], "b"), 0.5f64.log10());
    }
}
