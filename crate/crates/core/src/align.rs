//! IBM Model 1 lexical translation tables trained by EM, Viterbi word
//! alignment, and alignment symmetrization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{ParallelCorpus, SentencePair};
use crate::error::{Error, Result};

/// Spelling of the empty source word in serialized tables.
pub const NULL: &str = "<NULL>";
const NULL_ID: u32 = 0;

// Fixed chunking keeps the E-step summation order independent of the
// number of worker threads.
const EM_CHUNK: usize = 64;

/// Lexical translation probabilities `t(target | source)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTable {
    source_vocab: Vec<String>,
    source_ids: HashMap<String, u32>,
    target_vocab: Vec<String>,
    target_ids: HashMap<String, u32>,
    t: HashMap<(u32, u32), f64>,
    use_null: bool,
}

impl TTable {
    fn with_vocab(corpus: &ParallelCorpus, use_null: bool) -> Self {
        let mut table = TTable {
            source_vocab: vec![NULL.to_owned()],
            source_ids: HashMap::from([(NULL.to_owned(), NULL_ID)]),
            target_vocab: Vec::new(),
            target_ids: HashMap::new(),
            t: HashMap::new(),
            use_null,
        };
        for pair in &corpus.pairs {
            for tok in pair.source.iter() {
                table.source_id_or_insert(tok);
            }
            for tok in pair.target.iter() {
                table.target_id_or_insert(tok);
            }
        }
        table
    }

    fn source_id_or_insert(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.source_ids.get(word) {
            return id;
        }
        let id = self.source_vocab.len() as u32;
        self.source_vocab.push(word.to_owned());
        self.source_ids.insert(word.to_owned(), id);
        id
    }

    fn target_id_or_insert(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.target_ids.get(word) {
            return id;
        }
        let id = self.target_vocab.len() as u32;
        self.target_vocab.push(word.to_owned());
        self.target_ids.insert(word.to_owned(), id);
        id
    }

    pub fn uses_null(&self) -> bool {
        self.use_null
    }

    /// `t(target | source)`; zero for unseen entries. Use [`NULL`] for the
    /// empty source word.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        match (self.source_ids.get(source), self.target_ids.get(target)) {
            (Some(&s), Some(&t)) => self.t.get(&(s, t)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// All stored entries as `(source, target, probability)`, sorted.
    pub fn entries(&self) -> Vec<(&str, &str, f64)> {
        let mut out: Vec<_> = self
            .t
            .iter()
            .map(|(&(s, t), &p)| {
                (
                    self.source_vocab[s as usize].as_str(),
                    self.target_vocab[t as usize].as_str(),
                    p,
                )
            })
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    /// Sum of `t(. | s)` per source word, in source-word order.
    pub fn row_sums(&self) -> BTreeMap<&str, f64> {
        let mut sums = BTreeMap::new();
        for (s, _, p) in self.entries() {
            *sums.entry(s).or_insert(0.0) += p;
        }
        sums
    }

    fn encode(&self, pair: &SentencePair) -> (Vec<u32>, Vec<u32>) {
        let mut src = Vec::with_capacity(pair.source.len() + 1);
        if self.use_null {
            src.push(NULL_ID);
        }
        src.extend(pair.source.iter().map(|w| self.source_ids.get(w.as_str()).copied().unwrap_or(u32::MAX)));
        let tgt = pair
            .target
            .iter()
            .map(|w| self.target_ids.get(w.as_str()).copied().unwrap_or(u32::MAX))
            .collect();
        (src, tgt)
    }

    fn get_id(&self, s: u32, t: u32) -> f64 {
        self.t.get(&(s, t)).copied().unwrap_or(0.0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, t, p) in self.entries() {
            let _ = writeln!(out, "{s}\t{t}\t{}", format_prob(p));
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
        let mut table = TTable {
            source_vocab: vec![NULL.to_owned()],
            source_ids: HashMap::from([(NULL.to_owned(), NULL_ID)]),
            target_vocab: Vec::new(),
            target_ids: HashMap::new(),
            t: HashMap::new(),
            use_null: false,
        };
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [s, t, p] = fields.as_slice() else {
                return Err(Error::parse(no, "expected source<TAB>target<TAB>probability"));
            };
            let p: f64 = p.trim().parse().map_err(|_| Error::parse(no, "bad probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(no, "probability outside [0, 1]"));
            }
            if s.is_empty() || t.is_empty() {
                return Err(Error::parse(no, "empty word"));
            }
            let sid = table.source_id_or_insert(s);
            let tid = table.target_id_or_insert(t);
            if sid == NULL_ID {
                table.use_null = true;
            }
            if table.t.insert((sid, tid), p).is_some() {
                return Err(Error::parse(no, format!("duplicate entry {s} {t}")));
            }
        }
        Ok(table)
    }
}

// Positional decimal with 17 significant digits.
fn format_prob(p: f64) -> String {
    if p == 0.0 {
        return "0".to_owned();
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(0) as usize;
    format!("{p:.decimals$}")
}

/// Uniform initialization: `t(. | s)` is uniform over the target words that
/// co-occur with `s`, and over every target word for NULL.
pub fn init_uniform(corpus: &ParallelCorpus, use_null: bool) -> Result<TTable> {
    if corpus.is_empty() {
        return Err(Error::Training("cannot align an empty corpus".into()));
    }
    let mut table = TTable::with_vocab(corpus, use_null);
    let mut cooc: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for pair in &corpus.pairs {
        let (src, tgt) = table.encode(pair);
        for &s in &src {
            cooc.entry(s).or_default().extend(tgt.iter().copied());
        }
    }
    if use_null {
        cooc.insert(NULL_ID, (0..table.target_vocab.len() as u32).collect());
    }
    for (s, targets) in cooc {
        if targets.is_empty() {
            continue;
        }
        let p = 1.0 / targets.len() as f64;
        for t in targets {
            table.t.insert((s, t), p);
        }
    }
    Ok(table)
}

#[derive(Default)]
struct ExpectedCounts {
    pair_counts: HashMap<(u32, u32), f64>,
    totals: HashMap<u32, f64>,
    log_likelihood: f64,
}

fn e_step(tt: &TTable, pairs: &[(Vec<u32>, Vec<u32>)]) -> ExpectedCounts {
    let mut acc = ExpectedCounts::default();
    for (src, tgt) in pairs {
        if src.is_empty() {
            continue;
        }
        let uniform = (src.len() as f64).ln();
        for &t in tgt {
            let denom: f64 = src.iter().map(|&s| tt.get_id(s, t)).sum();
            if denom <= 0.0 {
                acc.log_likelihood = f64::NEG_INFINITY;
                continue;
            }
            acc.log_likelihood += denom.ln() - uniform;
            for &s in src {
                let p = tt.get_id(s, t);
                if p > 0.0 {
                    let c = p / denom;
                    *acc.pair_counts.entry((s, t)).or_insert(0.0) += c;
                    *acc.totals.entry(s).or_insert(0.0) += c;
                }
            }
        }
    }
    acc
}

/// One EM step. The returned log-likelihood (natural log, with Model 1's
/// uniform alignment term) is that of the *input* table.
pub fn em_iteration(tt: &TTable, corpus: &ParallelCorpus) -> (TTable, f64) {
    let encoded: Vec<_> = corpus.pairs.iter().map(|p| tt.encode(p)).collect();
    let partials: Vec<ExpectedCounts> = encoded.par_chunks(EM_CHUNK).map(|c| e_step(tt, c)).collect();

    let mut merged = ExpectedCounts::default();
    for part in partials {
        merged.log_likelihood += part.log_likelihood;
        for (k, v) in part.pair_counts {
            *merged.pair_counts.entry(k).or_insert(0.0) += v;
        }
        for (k, v) in part.totals {
            *merged.totals.entry(k).or_insert(0.0) += v;
        }
    }

    let mut next = TTable {
        t: HashMap::with_capacity(merged.pair_counts.len()),
        ..tt.clone()
    };
    for ((s, t), c) in merged.pair_counts {
        next.t.insert((s, t), c / merged.totals[&s]);
    }
    (next, merged.log_likelihood)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmTrace {
    pub iteration: usize,
    pub log_likelihood: f64,
}

/// Uniform initialization followed by `iterations` EM steps.
pub fn train_ibm1(
    corpus: &ParallelCorpus,
    iterations: usize,
    use_null: bool,
) -> Result<(TTable, Vec<EmTrace>)> {
    if iterations == 0 {
        return Err(Error::param("EM needs at least one iteration"));
    }
    let mut table = init_uniform(corpus, use_null)?;
    let mut trace = Vec::with_capacity(iterations);
    for iteration in 1..=iterations {
        let (next, ll) = em_iteration(&table, corpus);
        trace.push(EmTrace {
            iteration,
            log_likelihood: ll,
        });
        table = next;
    }
    Ok((table, trace))
}

/// Word links `(source_index, target_index)` for one sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    links: BTreeSet<(usize, usize)>,
}

impl Alignment {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Alignment {
            links: links.into_iter().collect(),
        }
    }

    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.links
    }

    pub fn contains(&self, src: usize, tgt: usize) -> bool {
        self.links.contains(&(src, tgt))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    /// Exchanges the roles of source and target indices.
    pub fn transposed(&self) -> Self {
        Alignment::new(self.links.iter().map(|&(s, t)| (t, s)))
    }

    pub fn check_bounds(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        match self.links.iter().find(|&&(s, t)| s >= src_len || t >= tgt_len) {
            Some((s, t)) => Err(Error::param(format!(
                "link {s}-{t} out of bounds for a {src_len}x{tgt_len} pair"
            ))),
            None => Ok(()),
        }
    }

    /// Parses `"0-0 1-2 ..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut links = BTreeSet::new();
        for item in text.split_whitespace() {
            let parsed = item
                .split_once('-')
                .and_then(|(s, t)| Some((s.parse().ok()?, t.parse().ok()?)));
            match parsed {
                Some(link) => {
                    links.insert(link);
                }
                None => return Err(Error::param(format!("bad alignment link {item:?}"))),
            }
        }
        Ok(Alignment { links })
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, t)) in self.links.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}-{t}")?;
        }
        Ok(())
    }
}

/// Links every target word to its most probable source word. Ties go to
/// the smallest source index; NULL only wins when strictly more probable
/// than every real source word, and then produces no link.
pub fn viterbi_align(tt: &TTable, pair: &SentencePair, use_null: bool) -> Result<Alignment> {
    if pair.source.is_empty() || pair.target.is_empty() {
        return Err(Error::param("cannot align an empty sentence"));
    }
    let mut links = BTreeSet::new();
    for (j, tw) in pair.target.iter().enumerate() {
        let mut best = 0;
        let mut best_p = tt.prob(&pair.source[0], tw);
        for (i, sw) in pair.source.iter().enumerate().skip(1) {
            let p = tt.prob(sw, tw);
            if p > best_p {
                best = i;
                best_p = p;
            }
        }
        if use_null && tt.prob(NULL, tw) > best_p {
            continue;
        }
        links.insert((best, j));
    }
    Ok(Alignment { links })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heuristic {
    Intersection,
    Union,
    #[default]
    GrowDiag,
}

impl std::str::FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersection" => Ok(Heuristic::Intersection),
            "union" => Ok(Heuristic::Union),
            "grow_diag" | "grow-diag" => Ok(Heuristic::GrowDiag),
            other => Err(Error::param(format!("unknown symmetrization heuristic {other:?}"))),
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Combines a forward alignment with a reverse alignment that has already
/// been re-indexed to `(source, target)`.
pub fn symmetrize(fwd: &Alignment, rev: &Alignment, heuristic: Heuristic) -> Alignment {
    let union: BTreeSet<_> = fwd.links.union(&rev.links).copied().collect();
    let inter: BTreeSet<_> = fwd.links.intersection(&rev.links).copied().collect();
    match heuristic {
        Heuristic::Intersection => Alignment { links: inter },
        Heuristic::Union => Alignment { links: union },
        Heuristic::GrowDiag => grow_diag(inter, &union),
    }
}

fn grow_diag(mut current: BTreeSet<(usize, usize)>, union: &BTreeSet<(usize, usize)>) -> Alignment {
    let mut src_aligned: BTreeSet<usize> = current.iter().map(|l| l.0).collect();
    let mut tgt_aligned: BTreeSet<usize> = current.iter().map(|l| l.1).collect();

    // target-major scan order
    let mut candidates: Vec<(usize, usize)> = union.difference(&current).copied().collect();
    candidates.sort_by_key(|&(s, t)| (t, s));

    loop {
        let mut added = false;
        for &(s, t) in &candidates {
            if current.contains(&(s, t)) {
                continue;
            }
            if src_aligned.contains(&s) && tgt_aligned.contains(&t) {
                continue;
            }
            let adjacent = NEIGHBORS.iter().any(|&(ds, dt)| {
                match (s.checked_add_signed(ds), t.checked_add_signed(dt)) {
                    (Some(ns), Some(nt)) => current.contains(&(ns, nt)),
                    _ => false,
                }
            });
            if adjacent {
                current.insert((s, t));
                src_aligned.insert(s);
                tgt_aligned.insert(t);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    Alignment { links: current }
}

/// Summary of aligning a corpus in both directions.
#[derive(Debug, Clone)]
pub struct CorpusAlignment {
    pub alignments: Vec<Alignment>,
    pub forward: TTable,
    pub reverse: TTable,
    pub forward_trace: Vec<EmTrace>,
    pub reverse_trace: Vec<EmTrace>,
}

/// Trains Model 1 in both directions, takes Viterbi alignments and
/// symmetrizes them. Pairs with an empty side get an empty alignment.
pub fn align_corpus(
    corpus: &ParallelCorpus,
    iterations: usize,
    use_null: bool,
    heuristic: Heuristic,
) -> Result<CorpusAlignment> {
    let reversed = corpus.reversed();
    let (forward, forward_trace) = train_ibm1(corpus, iterations, use_null)?;
    let (reverse, reverse_trace) = train_ibm1(&reversed, iterations, use_null)?;

    let alignments = corpus
        .pairs
        .par_iter()
        .zip(reversed.pairs.par_iter())
        .map(|(pair, rpair)| {
            if pair.source.is_empty() || pair.target.is_empty() {
                return Ok(Alignment::default());
            }
            let fwd = viterbi_align(&forward, pair, use_null)?;
            let rev = viterbi_align(&reverse, rpair, use_null)?.transposed();
            Ok(symmetrize(&fwd, &rev, heuristic))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CorpusAlignment {
        alignments,
        forward,
        reverse,
        forward_trace,
        reverse_trace,
    })
}
