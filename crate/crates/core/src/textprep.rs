//! Corpus preprocessing: tokenization, truecasing, length cleaning, and
//! corpus statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Token limit above which a pair is dropped during cleaning.
pub const DEFAULT_MAX_TOKENS: usize = 80;

const TRUECASE_TAG: &str = "C2C-TRUECASE-1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    /// 1-based line number in the input files.
    pub line_number: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub line_number: usize,
}

impl TokenizedPair {
    pub fn from_pair(pair: &SentencePair) -> Self {
        TokenizedPair {
            source: tokenize(&pair.source),
            target: tokenize(&pair.target),
            line_number: pair.line_number,
        }
    }
}

/// Splits a line into letter/digit runs and single punctuation characters.
/// Whitespace separates tokens and is dropped.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in line.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Most frequent non-initial surface form for every lowercased token type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruecaseModel {
    forms: BTreeMap<String, (String, u64)>,
}

impl TruecaseModel {
    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    /// Preferred surface form for `token`, if its lowercase type was seen.
    pub fn lookup(&self, token: &str) -> Option<&str> {
        self.forms.get(&token.to_lowercase()).map(|(s, _)| s.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.forms.iter().map(|(k, (s, n))| (k.as_str(), s.as_str(), *n))
    }

    /// Serializes as a tagged header, an optional vocabulary fingerprint
    /// line, and one `surface<TAB>count` line per type.
    pub fn to_text(&self, vocab_fingerprint: Option<&str>) -> String {
        let mut out = String::new();
        out.push_str(TRUECASE_TAG);
        out.push('\n');
        let _ = writeln!(out, "vocab\t{}", vocab_fingerprint.unwrap_or("-"));
        for (surface, count) in self.forms.values() {
            let _ = writeln!(out, "{surface}\t{count}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<(Self, Option<String>)> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, TRUECASE_TAG)) => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {TRUECASE_TAG}"),
                })
            }
        }
        let fingerprint = match lines.next() {
            Some((_, l)) if l.starts_with("vocab\t") => {
                let v = &l["vocab\t".len()..];
                (v != "-").then(|| v.to_string())
            }
            _ => {
                return Err(Error::Parse {
                    line: 2,
                    msg: "expected vocab fingerprint line".into(),
                })
            }
        };
        let mut model = TruecaseModel::default();
        for (i, line) in lines {
            let parse_err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let (surface, count) = line.split_once('\t').ok_or_else(|| parse_err("missing tab"))?;
            if surface.is_empty() {
                return Err(parse_err("empty surface form"));
            }
            let count: u64 = count.parse().map_err(|_| parse_err("bad count"))?;
            let key = surface.to_lowercase();
            if model.forms.insert(key, (surface.to_string(), count)).is_some() {
                return Err(parse_err("duplicate token type"));
            }
        }
        Ok((model, fingerprint))
    }
}

/// Learns the preferred casing of every token type from non-initial
/// positions. Ties go to the lexicographically smallest surface form.
pub fn train_truecaser<S: AsRef<str>>(sentences: &[Vec<S>]) -> TruecaseModel {
    let mut counts: HashMap<String, HashMap<String, u64>> = HashMap::new();
    for sentence in sentences {
        for token in sentence.iter().skip(1) {
            let token = token.as_ref();
            *counts
                .entry(token.to_lowercase())
                .or_default()
                .entry(token.to_string())
                .or_insert(0) += 1;
        }
    }
    let forms = counts
        .into_iter()
        .map(|(key, surfaces)| {
            let best = surfaces
                .into_iter()
                .max_by(|(sa, na), (sb, nb)| na.cmp(nb).then_with(|| sb.cmp(sa)))
                .expect("every key has at least one surface form");
            (key, best)
        })
        .collect();
    TruecaseModel { forms }
}

/// Rewrites the sentence-initial token to its preferred form (lowercased when
/// unseen); every other token passes through.
pub fn truecase<S: AsRef<str>>(model: &TruecaseModel, tokens: &[S]) -> Vec<String> {
    let mut out: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    if let Some(first) = out.first_mut() {
        *first = match model.lookup(first) {
            Some(form) => form.to_string(),
            None => first.to_lowercase(),
        };
    }
    out
}

/// Tokenize, truecase, and join with single spaces.
pub fn preprocess_line(model: &TruecaseModel, line: &str) -> String {
    truecase(model, &tokenize(line)).join(" ")
}

/// Keeps the pairs whose sides both have at most `max_tokens` tokens.
/// Returns the kept pairs in input order and the number removed.
pub fn clean(pairs: Vec<TokenizedPair>, max_tokens: usize) -> Result<(Vec<TokenizedPair>, usize)> {
    if max_tokens < 1 {
        return Err(Error::config(format!("max_tokens must be at least 1, got {max_tokens}")));
    }
    let total = pairs.len();
    let kept: Vec<_> = pairs
        .into_iter()
        .filter(|p| p.source.len() <= max_tokens && p.target.len() <= max_tokens)
        .collect();
    let removed = total - kept.len();
    Ok((kept, removed))
}

/// Per-side corpus counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentence_count: u64,
    pub word_count: u64,
    pub word_vocab_size: u64,
    pub char_count: u64,
    pub char_vocab_size: u64,
}

impl CorpusStats {
    pub const KEYS: [&'static str; 5] = ["sentences", "words", "word_vocab_size", "chars", "char_vocab_size"];

    pub fn values(&self) -> [u64; 5] {
        [
            self.sentence_count,
            self.word_count,
            self.word_vocab_size,
            self.char_count,
            self.char_vocab_size,
        ]
    }

    /// `key=value` lines, keys optionally prefixed with `prefix.`.
    pub fn to_kv_lines(&self, prefix: Option<&str>) -> String {
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(self.values()) {
            match prefix {
                Some(p) => {
                    let _ = writeln!(out, "{p}.{k}={v}");
                }
                None => {
                    let _ = writeln!(out, "{k}={v}");
                }
            }
        }
        out
    }
}

/// Streaming accumulator behind [`corpus_stats`]; shards may be merged.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    sentences: u64,
    words: u64,
    chars: u64,
    word_types: HashSet<String>,
    char_types: HashSet<char>,
}

impl StatsAccumulator {
    pub fn add_line(&mut self, line: &str) {
        let line = line.trim_end_matches(['\n', '\r']);
        self.sentences += 1;
        for token in tokenize(line) {
            self.words += 1;
            if !self.word_types.contains(&token) {
                self.word_types.insert(token);
            }
        }
        for ch in line.chars() {
            self.chars += 1;
            self.char_types.insert(ch);
        }
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.sentences += other.sentences;
        self.words += other.words;
        self.chars += other.chars;
        self.word_types.extend(other.word_types);
        self.char_types.extend(other.char_types);
    }

    pub fn finish(&self) -> CorpusStats {
        CorpusStats {
            sentence_count: self.sentences,
            word_count: self.words,
            word_vocab_size: self.word_types.len() as u64,
            char_count: self.chars,
            char_vocab_size: self.char_types.len() as u64,
        }
    }
}

/// Sentence, word and character counts for one side of a corpus.
pub fn corpus_stats<S: AsRef<str>>(lines: &[S]) -> CorpusStats {
    let mut acc = StatsAccumulator::default();
    for line in lines {
        acc.add_line(line.as_ref());
    }
    acc.finish()
}
