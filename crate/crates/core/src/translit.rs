//! Grapheme-mapping transliteration for out-of-vocabulary tokens.

use std::collections::BTreeMap;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Sentence, Token};
use crate::error::{Error, Result};

const BUNDLED_TABLE: &str = include_str!("../data/assamese-latin.tsv");

pub const ASSAMESE: &str = "Assamese";
pub const LATIN: &str = "Latin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Left column to right column.
    Forward,
    /// Right column to left column.
    Reverse,
}

/// A named set of code-point intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRange {
    pub name: String,
    ranges: Vec<(u32, u32)>,
}

impl ScriptRange {
    /// Intervals are inclusive and must be ascending and disjoint.
    pub fn new(name: impl Into<String>, ranges: Vec<(u32, u32)>) -> Result<Self> {
        for &(lo, hi) in &ranges {
            if lo > hi {
                return Err(Error::param(format!("empty interval {lo:#x}..{hi:#x}")));
            }
        }
        if ranges.windows(2).any(|w| w[0].1 >= w[1].0) {
            return Err(Error::param("script intervals must be ascending and disjoint"));
        }
        Ok(ScriptRange {
            name: name.into(),
            ranges,
        })
    }

    pub fn latin() -> Self {
        Self::new(LATIN, vec![(0x41, 0x5A), (0x61, 0x7A), (0xC0, 0x24F)]).expect("static ranges")
    }

    /// The Bengali-Assamese block.
    pub fn assamese() -> Self {
        Self::new(ASSAMESE, vec![(0x980, 0x9FF)]).expect("static ranges")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "latin" => Some(Self::latin()),
            "assamese" | "bengali" => Some(Self::assamese()),
            _ => None,
        }
    }

    pub fn contains(&self, c: char) -> bool {
        let c = c as u32;
        self.ranges.iter().any(|&(lo, hi)| c >= lo && c <= hi)
    }

    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransliterationTable {
    pub forward: BTreeMap<String, String>,
    pub reverse: BTreeMap<String, String>,
    /// Scripts of the left and right columns.
    pub scripts: (String, String),
}

impl TransliterationTable {
    /// The bundled Assamese to Latin table.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled table is well formed")
    }

    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `source<TAB>target` rows. `#` starts a comment line. The
    /// reverse map keeps the first row for each target.
    pub fn parse(text: &str) -> Result<Self> {
        let mut forward = BTreeMap::new();
        let mut reverse = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [src, tgt] = fields.as_slice() else {
                return Err(Error::parse(no, "expected source<TAB>target"));
            };
            let src: String = src.nfc().collect();
            let tgt: String = tgt.nfc().collect();
            if src.is_empty() || tgt.is_empty() {
                return Err(Error::parse(no, "empty grapheme"));
            }
            if forward.contains_key(&src) {
                return Err(Error::parse(no, format!("duplicate source grapheme {src:?}")));
            }
            reverse.entry(tgt.clone()).or_insert_with(|| src.clone());
            forward.insert(src, tgt);
        }
        Ok(TransliterationTable {
            forward,
            reverse,
            scripts: (ASSAMESE.to_owned(), LATIN.to_owned()),
        })
    }

    pub fn with_scripts(mut self, left: impl Into<String>, right: impl Into<String>) -> Self {
        self.scripts = (left.into(), right.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    fn map(&self, dir: Direction) -> &BTreeMap<String, String> {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Reverse => &self.reverse,
        }
    }

    /// Direction whose output is in the named script.
    pub fn direction_towards(&self, script: &str) -> Option<Direction> {
        if script.eq_ignore_ascii_case(&self.scripts.1) {
            Some(Direction::Forward)
        } else if script.eq_ignore_ascii_case(&self.scripts.0) {
            Some(Direction::Reverse)
        } else {
            None
        }
    }

    /// Longest-match-first left-to-right rewrite; unmapped code points pass
    /// through. When no key of the map has uppercase letters, matching
    /// ignores case.
    pub fn transliterate(&self, text: &str, dir: Direction) -> String {
        let map = self.map(dir);
        let longest = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        let fold = !map.keys().any(|k| k.chars().any(char::is_uppercase));

        let chars: Vec<char> = text.chars().collect();
        let keyed: Vec<char> = if fold {
            chars
                .iter()
                .map(|&c| {
                    let mut lower = c.to_lowercase();
                    match (lower.next(), lower.next()) {
                        (Some(l), None) => l,
                        _ => c,
                    }
                })
                .collect()
        } else {
            chars.clone()
        };

        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        let mut probe = String::new();
        while i < chars.len() {
            let mut matched = false;
            for len in (1..=longest.min(chars.len() - i)).rev() {
                probe.clear();
                probe.extend(&keyed[i..i + len]);
                if let Some(image) = map.get(&probe) {
                    out.push_str(image);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if !matched {
                out.push(chars[i]);
                i += 1;
            }
        }
        out
    }

    pub fn transliterate_token(&self, token: &Token, dir: Direction) -> Token {
        let out = self.transliterate(token, dir);
        Token::new(out).unwrap_or_else(|_| token.clone())
    }
}

fn needs_conversion(token: &str, target: &ScriptRange) -> bool {
    token.chars().any(|c| c.is_alphabetic() && !target.contains(c))
}

/// Transliterates each token at an OOV position that is not already in the
/// target script. Other tokens are left alone.
pub fn post_edit(
    output: &Sentence,
    oov_positions: &[usize],
    table: &TransliterationTable,
    target_script: &ScriptRange,
) -> Sentence {
    let Some(dir) = table.direction_towards(&target_script.name) else {
        return output.clone();
    };
    let mut tokens = output.tokens().to_vec();
    for &pos in oov_positions {
        if let Some(tok) = tokens.get_mut(pos) {
            if needs_conversion(tok, target_script) {
                *tok = table.transliterate_token(tok, dir);
            }
        }
    }
    Sentence::new(tokens)
}
