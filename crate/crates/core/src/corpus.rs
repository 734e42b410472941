//! Corpus ingestion and preparation: tokenization, truecasing and cleaning
//! of line-aligned parallel text.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

const DANDA: char = '\u{0964}';
const DOUBLE_DANDA: char = '\u{0965}';

/// A single non-empty, whitespace-free token.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::param("token must not be empty"));
        }
        if text.chars().any(char::is_whitespace) {
            return Err(Error::param(format!("token {text:?} contains whitespace")));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl Deref for Token {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// An ordered sequence of tokens.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sentence(Vec<Token>);

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence(tokens)
    }

    /// Builds a sentence from whitespace-free strings.
    ///
    /// Panics if any item is empty or contains whitespace; intended for
    /// literals in tests and examples.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Sentence(
            words
                .iter()
                .map(|w| Token::new(w.as_ref()).expect("invalid token literal"))
                .collect(),
        )
    }

    /// Splits on whitespace without any punctuation handling.
    pub fn from_whitespace(line: &str) -> Self {
        Sentence(line.split_whitespace().map(|w| Token(w.to_owned())).collect())
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.0
    }

    pub fn words(&self) -> Vec<&str> {
        self.0.iter().map(Token::as_str).collect()
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.words().join(" ")
    }
}

impl Deref for Sentence {
    type Target = [Token];

    fn deref(&self) -> &[Token] {
        &self.0
    }
}

impl FromIterator<Token> for Sentence {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        Sentence(iter.into_iter().collect())
    }
}

impl fmt::Debug for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
}

impl SentencePair {
    pub fn new(source: Sentence, target: Sentence) -> Self {
        SentencePair { source, target }
    }

    pub fn swapped(&self) -> Self {
        SentencePair {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// Line-aligned source/target sentence pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub source_lang: String,
    pub target_lang: String,
}

impl ParallelCorpus {
    pub fn new(
        pairs: Vec<SentencePair>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
    ) -> Self {
        ParallelCorpus {
            pairs,
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        }
    }

    /// Builds an untagged corpus from whitespace-tokenized string pairs.
    pub fn from_str_pairs(pairs: &[(&str, &str)]) -> Self {
        let pairs = pairs
            .iter()
            .map(|(s, t)| SentencePair::new(Sentence::from_whitespace(s), Sentence::from_whitespace(t)))
            .collect();
        ParallelCorpus::new(pairs, "src", "tgt")
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same corpus with source and target exchanged.
    pub fn reversed(&self) -> Self {
        ParallelCorpus {
            pairs: self.pairs.iter().map(SentencePair::swapped).collect(),
            source_lang: self.target_lang.clone(),
            target_lang: self.source_lang.clone(),
        }
    }

    pub fn sources(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|p| p.source.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|p| p.target.clone()).collect()
    }
}

pub fn is_punctuation(c: char) -> bool {
    if c == DANDA || c == DOUBLE_DANDA {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

// Hyphens and apostrophes survive inside words ("Indo-Saracenic", "I'd").
fn is_word_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2010}' | '\u{2011}' | '\u{2019}')
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !is_punctuation(c)
}

/// Splits a line into tokens, isolating every punctuation mark.
///
/// The input is NFC-normalized first. A hyphen or apostrophe with word
/// characters on both sides stays inside its word.
pub fn tokenize(line: &str) -> Sentence {
    let chars: Vec<char> = line.nfc().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if is_punctuation(c) {
            let intra_word = is_word_joiner(c)
                && i > 0
                && is_word_char(chars[i - 1])
                && chars.get(i + 1).is_some_and(|&n| is_word_char(n));
            if intra_word {
                current.push(c);
            } else {
                flush(&mut current, &mut tokens);
                tokens.push(Token(c.to_string()));
            }
        } else {
            current.push(c);
        }
    }
    flush(&mut current, &mut tokens);
    Sentence(tokens)
}

fn flush(current: &mut String, tokens: &mut Vec<Token>) {
    if !current.is_empty() {
        tokens.push(Token(std::mem::take(current)));
    }
}

/// Tokenizes raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(raw: &[u8]) -> Result<Sentence> {
    let line = std::str::from_utf8(raw).map_err(|e| Error::Encoding {
        offset: e.valid_up_to(),
    })?;
    Ok(tokenize(line))
}

const CLOSING_PUNCT: &[&str] = &[".", ",", "\u{0964}", "?", "!"];

/// Joins tokens with spaces, then drops the space before closing punctuation.
pub fn detokenize(s: &Sentence) -> String {
    let mut out = String::new();
    for (i, tok) in s.iter().enumerate() {
        if i > 0 && !CLOSING_PUNCT.contains(&tok.as_str()) {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

fn fold(word: &str) -> String {
    word.to_lowercase()
}

/// Preferred casing per case-folded word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruecaseModel {
    pub preferred_form: BTreeMap<String, String>,
    /// Occurrence counts of each surface form that took part in the vote.
    pub counts: BTreeMap<String, usize>,
}

impl TruecaseModel {
    /// One `folded<TAB>preferred` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.preferred_form {
            out.push_str(k);
            out.push('\t');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut model = TruecaseModel::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('\t') else {
                return Err(Error::parse(i + 1, "expected folded<TAB>preferred"));
            };
            if k.is_empty() || v.is_empty() || v.contains('\t') || fold(v) != k {
                return Err(Error::parse(i + 1, format!("invalid truecase entry {line:?}")));
            }
            model.preferred_form.insert(k.to_owned(), v.to_owned());
        }
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Default)]
struct FormTally {
    // (surface form, count), in order of first appearance
    forms: Vec<(String, usize)>,
}

impl FormTally {
    fn add(&mut self, form: &str) {
        match self.forms.iter_mut().find(|(f, _)| f == form) {
            Some((_, n)) => *n += 1,
            None => self.forms.push((form.to_owned(), 1)),
        }
    }

    fn winner(&self) -> &str {
        // max_by_key keeps the last maximum; scan manually to keep the first
        let mut best = &self.forms[0];
        for entry in &self.forms[1..] {
            if entry.1 > best.1 {
                best = entry;
            }
        }
        &best.0
    }
}

/// Learns each word's most frequent casing from non-sentence-initial
/// positions. Words only ever seen sentence-initially keep their observed
/// form.
pub fn train_truecaser(corpus: &[Sentence]) -> TruecaseModel {
    let mut inner: HashMap<String, FormTally> = HashMap::new();
    let mut initial: HashMap<String, FormTally> = HashMap::new();
    let mut order: Vec<String> = Vec::new();

    for sentence in corpus {
        for (i, tok) in sentence.iter().enumerate() {
            let key = fold(tok);
            let table = if i == 0 { &mut initial } else { &mut inner };
            match table.entry(key) {
                Entry::Occupied(mut e) => e.get_mut().add(tok),
                Entry::Vacant(e) => {
                    order.push(e.key().clone());
                    e.insert(FormTally::default()).add(tok);
                }
            }
        }
    }

    let mut model = TruecaseModel::default();
    for key in order {
        if model.preferred_form.contains_key(&key) {
            continue;
        }
        let tally = inner.get(&key).or_else(|| initial.get(&key)).expect("key was recorded");
        model.preferred_form.insert(key, tally.winner().to_owned());
        for (form, n) in &tally.forms {
            *model.counts.entry(form.clone()).or_default() += n;
        }
    }
    model
}

/// Replaces the first token with its preferred casing, when known.
pub fn truecase(s: &Sentence, model: &TruecaseModel) -> Sentence {
    let mut tokens = s.0.clone();
    if let Some(first) = tokens.first_mut() {
        if let Some(pref) = model.preferred_form.get(&fold(first)) {
            *first = Token(pref.clone());
        }
    }
    Sentence(tokens)
}

/// Uppercases the first code point of the first token. Identity for
/// caseless scripts.
pub fn detruecase(s: &Sentence) -> Sentence {
    let mut tokens = s.0.clone();
    if let Some(first) = tokens.first_mut() {
        let mut chars = first.0.chars();
        if let Some(c) = chars.next() {
            let upper: String = c.to_uppercase().collect();
            if upper != c.to_string() {
                *first = Token(upper + chars.as_str());
            }
        }
    }
    Sentence(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanParams {
    pub min_len: usize,
    pub max_len: usize,
    pub max_ratio: f64,
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            min_len: 1,
            max_len: 80,
            max_ratio: 9.0,
        }
    }
}

impl CleanParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_len < 1 {
            return Err(Error::param("min_len must be at least 1"));
        }
        if self.max_len < self.min_len {
            return Err(Error::param("max_len must be >= min_len"));
        }
        if self.max_ratio.is_nan() || self.max_ratio < 1.0 {
            return Err(Error::param("max_ratio must be >= 1"));
        }
        Ok(())
    }

    pub fn keeps(&self, pair: &SentencePair) -> bool {
        let (s, t) = (pair.source.len(), pair.target.len());
        let in_range = |n: usize| n >= self.min_len && n <= self.max_len;
        if !in_range(s) || !in_range(t) {
            return false;
        }
        let (lo, hi) = (s.min(t) as f64, s.max(t) as f64);
        hi / lo <= self.max_ratio
    }
}

/// Drops pairs that are too short, too long or too unbalanced. Order is
/// preserved.
pub fn clean_parallel(corpus: &ParallelCorpus, params: CleanParams) -> Result<ParallelCorpus> {
    params.validate()?;
    Ok(ParallelCorpus {
        pairs: corpus.pairs.iter().filter(|p| params.keeps(p)).cloned().collect(),
        source_lang: corpus.source_lang.clone(),
        target_lang: corpus.target_lang.clone(),
    })
}

/// Reads a one-sentence-per-line UTF-8 file. A leading BOM is dropped and
/// CRLF endings are accepted.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Encoding {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    Ok(text.lines().map(str::to_owned).collect())
}

/// Tokenizes both sides of raw line pairs.
pub fn tokenize_parallel(
    source_lines: &[String],
    target_lines: &[String],
    src_lang: &str,
    tgt_lang: &str,
) -> Result<ParallelCorpus> {
    if source_lines.len() != target_lines.len() {
        return Err(Error::Misaligned {
            source_lines: source_lines.len(),
            target_lines: target_lines.len(),
        });
    }
    let pairs = source_lines
        .iter()
        .zip(target_lines)
        .map(|(s, t)| SentencePair::new(tokenize(s), tokenize(t)))
        .collect();
    Ok(ParallelCorpus::new(pairs, src_lang, tgt_lang))
}

pub fn load_parallel(
    src_path: &Path,
    tgt_path: &Path,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<ParallelCorpus> {
    tokenize_parallel(&read_lines(src_path)?, &read_lines(tgt_path)?, src_lang, tgt_lang)
}
