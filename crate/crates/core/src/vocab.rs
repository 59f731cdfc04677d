//! Character inventories and one-hot encoding.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
/// Number of reserved control indices preceding the characters.
pub const NUM_CONTROLS: usize = 4;

pub const VOCAB_TAG: &str = "C2C-VOCAB-1";

/// Ordered character inventory. Indices `0..4` are PAD, SOS, EOS, UNK;
/// characters follow in code-point order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    /// Builds a vocabulary from explicit symbols in index order.
    pub fn from_symbols(symbols: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &ch) in symbols.iter().enumerate() {
            if index.insert(ch, i + NUM_CONTROLS).is_some() {
                return Err(Error::data(format!("duplicate vocabulary symbol {ch:?}")));
            }
        }
        Ok(CharVocab { symbols, index })
    }

    /// Distinct characters of `lines`, sorted by code point.
    pub fn build<S: AsRef<str>>(lines: &[S]) -> Self {
        let distinct: BTreeSet<char> = lines.iter().flat_map(|l| l.as_ref().chars()).collect();
        Self::from_symbols(distinct.into_iter().collect()).expect("set has no duplicates")
    }

    /// Total size including control symbols.
    pub fn len(&self) -> usize {
        NUM_CONTROLS + self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn id(&self, ch: char) -> Option<usize> {
        self.index.get(&ch).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<char> {
        id.checked_sub(NUM_CONTROLS).and_then(|i| self.symbols.get(i).copied())
    }

    /// Per-character ids with unknown characters mapped to UNK.
    pub fn encode(&self, text: &str, add_sos: bool, add_eos: bool) -> Vec<usize> {
        let mut ids = Vec::with_capacity(text.len() + 2);
        if add_sos {
            ids.push(SOS);
        }
        ids.extend(text.chars().map(|c| self.id(c).unwrap_or(UNK)));
        if add_eos {
            ids.push(EOS);
        }
        ids
    }

    /// Concatenates symbols, skipping PAD and SOS and stopping at the first
    /// EOS. UNK (and any out-of-range id) renders as U+FFFD.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            match id {
                PAD | SOS => {}
                EOS => break,
                _ => out.push(self.symbol(id).unwrap_or(char::REPLACEMENT_CHARACTER)),
            }
        }
        out
    }

    /// `T × V` matrix with a single 1.0 per row.
    pub fn onehot(&self, ids: &[usize]) -> Result<Matrix> {
        let v = self.len();
        let mut m = Matrix::zeros(ids.len(), v);
        for (t, &id) in ids.iter().enumerate() {
            if id >= v {
                return Err(Error::contract(format!(
                    "id {id} at position {t} out of range for vocabulary of size {v}"
                )));
            }
            m.set(t, id, 1.0);
        }
        Ok(m)
    }

    /// Serialized form: the format tag, then one escaped symbol per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.symbols.len() * 3 + VOCAB_TAG.len() + 1);
        out.push_str(VOCAB_TAG);
        out.push('\n');
        for &ch in &self.symbols {
            escape_symbol(ch, &mut out);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.split('\n');
        if lines.next() != Some(VOCAB_TAG) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {VOCAB_TAG}"),
            });
        }
        let mut symbols = Vec::new();
        let rest: Vec<&str> = lines.collect();
        // trailing newline leaves one empty element
        let body = match rest.split_last() {
            Some((&"", body)) => body,
            _ => &rest[..],
        };
        for (i, line) in body.iter().enumerate() {
            let ch = unescape_symbol(line).ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("invalid symbol entry {line:?}"),
            })?;
            symbols.push(ch);
        }
        Self::from_symbols(symbols)
    }
}

fn escape_symbol(ch: char, out: &mut String) {
    match ch {
        '\n' => out.push_str("\\n"),
        '\\' => out.push_str("\\\\"),
        c if c.is_control() || (c.is_whitespace() && c != ' ') => {
            let _ = write!(out, "\\u{:04X}", c as u32);
        }
        c => out.push(c),
    }
}

fn unescape_symbol(line: &str) -> Option<char> {
    match line {
        "\\n" => Some('\n'),
        "\\\\" => Some('\\'),
        l if l.starts_with("\\u") && l.len() == 6 => {
            u32::from_str_radix(&l[2..], 16).ok().and_then(char::from_u32)
        }
        l => {
            let mut it = l.chars();
            let ch = it.next()?;
            (it.next().is_none() && ch != '\\').then_some(ch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn build_examples() {
        let v = CharVocab::build(&["ba", "ab"]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.symbols(), &['a', 'b']);
        assert_eq!(CharVocab::build::<&str>(&[]).len(), 4);
    }

    #[test]
    fn encode_examples() {
        let v = CharVocab::build(&["ab"]);
        assert_eq!(v.encode("ba", false, false), vec![5, 4]);
        assert_eq!(v.encode("", true, true), vec![SOS, EOS]);
        assert_eq!(v.encode("z", false, false), vec![UNK]);
    }

    #[test]
    fn decode_examples() {
        let v = CharVocab::build(&["ab"]);
        assert_eq!(v.decode(&[1, 4, 5, 2]), "ab");
        assert_eq!(v.decode(&[2]), "");
        assert_eq!(v.decode(&[4, 0, 3, 2, 5]), "a\u{FFFD}");
    }

    #[test]
    fn onehot_examples() {
        let v = CharVocab::from_symbols(vec![]).unwrap();
        let m = v.onehot(&[1]).unwrap();
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert!(v.onehot(&[4]).is_err());
    }

    #[test]
    fn duplicate_symbols_rejected() {
        assert!(CharVocab::from_symbols(vec!['a', 'a']).is_err());
    }

    #[test]
    fn text_format_escapes() {
        let v = CharVocab::build(&["a\\\n\t \u{7f}é"]);
        let text = v.to_text();
        assert!(text.starts_with("C2C-VOCAB-1\n"));
        assert!(text.contains("\n\\n\n") && text.contains("\n\\\\\n") && text.contains("\\u0009"));
        assert!(text.contains("\\u007F") && text.contains("\n \n"));
        assert_eq!(CharVocab::from_text(&text).unwrap(), v);
        assert!(CharVocab::from_text("C2C-VOCAB-2\n").is_err());
        let e = CharVocab::from_text("C2C-VOCAB-1\nab\n").unwrap_err();
        assert!(e.to_string().contains("line 2"));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(lines in prop::collection::vec("\\PC{0,12}", 1..6), pick in prop::collection::vec(any::<prop::sample::Index>(), 0..20)) {
            let v = CharVocab::build(&lines);
            let alphabet = v.symbols();
            prop_assume!(!alphabet.is_empty());
            let s: String = pick.iter().map(|ix| alphabet[ix.index(alphabet.len())]).collect();
            prop_assert_eq!(v.decode(&v.encode(&s, true, true)), s.clone());
            prop_assert_eq!(v.decode(&v.encode(&s, false, false)), s);
        }

        #[test]
        fn build_is_permutation_invariant(mut lines in prop::collection::vec("\\PC{0,12}", 0..8)) {
            let a = CharVocab::build(&lines);
            lines.reverse();
            prop_assert_eq!(CharVocab::build(&lines), a);
        }

        #[test]
        fn onehot_rows_are_basis_vectors(ids in prop::collection::vec(0usize..9, 0..30)) {
            let v = CharVocab::build(&["abcde"]);
            let m = v.onehot(&ids).unwrap();
            for (t, &id) in ids.iter().enumerate() {
                let row = m.row(t);
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
                for (j, &x) in row.iter().enumerate() {
                    prop_assert_eq!(x, if j == id { 1.0 } else { 0.0 });
                }
                prop_assert_eq!(crate::numerics::argmax(row), id);
            }
        }

        #[test]
        fn text_round_trip(chars in prop::collection::btree_set(any::<char>(), 0..40)) {
            let v = CharVocab::from_symbols(chars.into_iter().collect()).unwrap();
            prop_assert_eq!(CharVocab::from_text(&v.to_text()).unwrap(), v);
        }
    }
}
