//! Corpus BLEU and translation edit rate at word and character level.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 4;

/// Pooled n-gram statistics for BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    /// Clipped matches per order, index 0 = unigrams.
    pub matches: [u64; MAX_NGRAM],
    /// Hypothesis n-gram count per order.
    pub totals: [u64; MAX_NGRAM],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_NGRAM {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU percentage from pooled counts.
    ///
    /// Orders with no hypothesis n-grams at all are left out of the
    /// geometric mean; any order with n-grams but no match gives 0.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_NGRAM {
            if self.totals[n] == 0 {
                continue;
            }
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
            orders += 1;
        }
        let bp = if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Segment-level clipped n-gram counts.
pub fn bleu_stats<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> BleuStats {
    let mut s = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_NGRAM {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        s.totals[n - 1] = h.values().sum();
        s.matches[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    s
}

fn casefold<S: AsRef<str>>(seg: &[S], cased: bool) -> Vec<String> {
    seg.iter()
        .map(|t| {
            if cased {
                t.as_ref().to_string()
            } else {
                t.as_ref().to_lowercase()
            }
        })
        .collect()
}

fn check_aligned(hyps: usize, refs: usize) -> Result<()> {
    if hyps != refs {
        return Err(Error::contract(format!(
            "{hyps} hypothesis segments vs {refs} reference segments"
        )));
    }
    if hyps == 0 {
        return Err(Error::data("cannot score an empty corpus"));
    }
    Ok(())
}

/// Corpus BLEU over tokenized segments with one reference each. The uncased
/// variant lowercases both sides first.
pub fn corpus_bleu<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>], cased: bool) -> Result<f64> {
    check_aligned(hyps.len(), refs.len())?;
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&bleu_stats(&casefold(h, cased), &casefold(r, cased)));
    }
    Ok(total.score())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerOptions {
    /// Allow block shifts; without them the score is plain edit distance
    /// over reference length.
    pub shifts: bool,
    /// Longest span considered for a single shift.
    pub max_shift_len: usize,
}

impl Default for TerOptions {
    fn default() -> Self {
        TerOptions {
            shifts: true,
            max_shift_len: 10,
        }
    }
}

/// Edit and shift counts for one segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TerStats {
    pub edits: usize,
    pub shifts: usize,
    pub ref_len: usize,
}

impl TerStats {
    pub fn cost(&self) -> usize {
        self.edits + self.shifts
    }

    pub fn add(&mut self, other: &TerStats) {
        self.edits += other.edits;
        self.shifts += other.shifts;
        self.ref_len += other.ref_len;
    }

    pub fn score(&self) -> Result<f64> {
        if self.ref_len == 0 {
            return Err(Error::contract("TER needs a non-empty reference"));
        }
        Ok(self.cost() as f64 / self.ref_len as f64)
    }
}

/// Unit-cost Levenshtein distance (two-row DP).
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimum-cost alignment summary used to propose shifts.
struct Alignment {
    cost: usize,
    hyp_matched: Vec<bool>,
    ref_matched: Vec<bool>,
    /// Hypothesis index each reference position lines up with (for an
    /// inserted reference token, the hypothesis index that follows it).
    ref_to_hyp: Vec<usize>,
}

fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Alignment {
    let (n, m) = (hyp.len(), reference.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut hyp_matched = vec![false; n];
    let mut ref_matched = vec![false; m];
    let mut ref_to_hyp = vec![0; m];
    let (mut i, mut j) = (n, m);
    // prefer diagonal, then hypothesis deletion, then insertion
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if d[i * w + j] == d[(i - 1) * w + j - 1] + usize::from(!same) {
                hyp_matched[i - 1] = same;
                ref_matched[j - 1] = same;
                ref_to_hyp[j - 1] = i - 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i * w + j] == d[(i - 1) * w + j] + 1 {
            i -= 1;
        } else {
            ref_to_hyp[j - 1] = i;
            j -= 1;
        }
    }
    Alignment {
        cost: d[n * w + m],
        hyp_matched,
        ref_matched,
        ref_to_hyp,
    }
}

/// Moves `hyp[start..start+len]` so that it begins before original index `dest`.
fn apply_shift<T: Clone>(hyp: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let span = &hyp[start..start + len];
    let mut rest: Vec<T> = Vec::with_capacity(hyp.len());
    rest.extend_from_slice(&hyp[..start]);
    rest.extend_from_slice(&hyp[start + len..]);
    let at = if dest > start { dest - len } else { dest };
    rest.splice(at..at, span.iter().cloned());
    rest
}

/// Greedy shift search followed by edit distance.
///
/// Each round tries every hypothesis span (up to `max_shift_len`) that is
/// not already fully matched and that occurs at a not-fully-matched place in
/// the reference, moving it to the hypothesis position aligned with that
/// occurrence. The move with the lowest resulting edit distance is applied
/// if it lowers edits + shifts; ties go to the smallest start, then the
/// shortest span, then the smallest destination.
pub fn ter_stats<T: PartialEq + Clone>(hyp: &[T], reference: &[T], opts: TerOptions) -> TerStats {
    let mut current = hyp.to_vec();
    let mut shifts = 0;
    let mut alignment = align(&current, reference);
    if opts.shifts {
        loop {
            let mut best: Option<(usize, usize, usize, usize)> = None; // (cost, start, len, dest)
            let n = current.len();
            for start in 0..n {
                for len in 1..=opts.max_shift_len.min(n - start) {
                    if alignment.hyp_matched[start..start + len].iter().all(|&b| b) {
                        continue;
                    }
                    let span = &current[start..start + len];
                    for j in 0..reference.len().saturating_sub(len - 1) {
                        if &reference[j..j + len] != span || alignment.ref_matched[j..j + len].iter().all(|&b| b) {
                            continue;
                        }
                        let dest = alignment.ref_to_hyp[j];
                        if dest >= start && dest <= start + len {
                            continue;
                        }
                        let cand = (0, start, len, dest);
                        if best.is_some_and(|b| (b.1, b.2, b.3) == (start, len, dest)) {
                            continue;
                        }
                        let cost = edit_distance(&apply_shift(&current, start, len, dest), reference);
                        let cand = (cost, cand.1, cand.2, cand.3);
                        if best.map_or(true, |b| cand < b) {
                            best = Some(cand);
                        }
                    }
                }
            }
            match best {
                Some((cost, start, len, dest)) if cost + 1 < alignment.cost => {
                    current = apply_shift(&current, start, len, dest);
                    shifts += 1;
                    alignment = align(&current, reference);
                    debug_assert_eq!(alignment.cost, cost);
                }
                _ => break,
            }
        }
    }
    TerStats {
        edits: alignment.cost,
        shifts,
        ref_len: reference.len(),
    }
}

/// Segment TER with block shifts.
pub fn ter<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> Result<f64> {
    ter_with(hyp, reference, TerOptions::default())
}

pub fn ter_with<T: PartialEq + Clone>(hyp: &[T], reference: &[T], opts: TerOptions) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::contract("TER needs a non-empty reference"));
    }
    ter_stats(hyp, reference, opts).score()
}

/// TER over characters, spaces included.
pub fn char_ter(hyp: &str, reference: &str) -> Result<f64> {
    char_ter_with(hyp, reference, TerOptions::default())
}

pub fn char_ter_with(hyp: &str, reference: &str, opts: TerOptions) -> Result<f64> {
    let h: Vec<char> = hyp.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    ter_with(&h, &r, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Lowercased BLEU, percent.
    pub bleu: f64,
    pub bleu_cased: f64,
    pub ter: f64,
    pub char_ter: f64,
    pub segment_count: usize,
}

impl EvalReport {
    pub const KEYS: [&'static str; 5] = ["BLEU", "BLEU-cased", "TER", "CharTER", "segments"];

    /// One `key=value` line per field, scores with four decimals.
    pub fn to_kv_lines(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "BLEU={:.4}", self.bleu);
        let _ = writeln!(out, "BLEU-cased={:.4}", self.bleu_cased);
        let _ = writeln!(out, "TER={:.4}", self.ter);
        let _ = writeln!(out, "CharTER={:.4}", self.char_ter);
        let _ = writeln!(out, "segments={}", self.segment_count);
        out
    }
}

/// All metrics for aligned plain-text segments. Word-level metrics split on
/// whitespace; character TER uses the raw segment text.
pub fn evaluate<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<EvalReport> {
    evaluate_with(hyps, refs, TerOptions::default())
}

pub fn evaluate_with<S: AsRef<str>>(hyps: &[S], refs: &[S], opts: TerOptions) -> Result<EvalReport> {
    check_aligned(hyps.len(), refs.len())?;
    let split = |s: &S| -> Vec<String> { s.as_ref().split_whitespace().map(str::to_string).collect() };
    let hyp_tokens: Vec<Vec<String>> = hyps.iter().map(split).collect();
    let ref_tokens: Vec<Vec<String>> = refs.iter().map(split).collect();

    let mut word = TerStats::default();
    let mut chars = TerStats::default();
    for (i, (h, r)) in hyp_tokens.iter().zip(&ref_tokens).enumerate() {
        word.add(&ter_stats(h, r, opts));
        let hc: Vec<char> = hyps[i].as_ref().chars().collect();
        let rc: Vec<char> = refs[i].as_ref().chars().collect();
        chars.add(&ter_stats(&hc, &rc, opts));
    }
    Ok(EvalReport {
        bleu: corpus_bleu(&hyp_tokens, &ref_tokens, false)?,
        bleu_cased: corpus_bleu(&hyp_tokens, &ref_tokens, true)?,
        ter: word.score().map_err(|_| Error::data("all reference segments are empty"))?,
        char_ter: chars.score().map_err(|_| Error::data("all reference segments are empty"))?,
        segment_count: hyps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn bleu_perfect_and_disjoint() {
        let h = vec![w("the cat sat on the mat")];
        assert_eq!(corpus_bleu(&h, &h, true).unwrap(), 100.0);
        let r = vec![w("a dog ran")];
        assert_eq!(corpus_bleu(&h, &r, true).unwrap(), 0.0);
    }

    #[test]
    fn bleu_hand_computed() {
        let h = vec![w("the cat sat on mat")];
        let r = vec![w("the cat sat on the mat")];
        let b = corpus_bleu(&h, &r, true).unwrap();
        // p = 1, 3/4, 2/3, 1/2; BP = exp(1 − 6/5)
        let expected = 100.0 * (-0.2f64).exp() * (1.0f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 57.89).abs() < 0.01, "{b}");
    }

    #[test]
    fn bleu_errors() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(corpus_bleu(&empty, &empty, true).is_err());
        assert!(matches!(
            corpus_bleu(&[w("a")], &[w("a"), w("b")], true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn bleu_short_segments_use_available_orders() {
        let h = vec![w("a b"), w("c")];
        assert_eq!(corpus_bleu(&h, &h, true).unwrap(), 100.0);
        assert_eq!(corpus_bleu(&[w("")], &[w("a")], true).unwrap(), 0.0);
    }

    #[test]
    fn uncased_bleu_lowercases() {
        let h = vec![w("The Cat sat on the mat")];
        let r = vec![w("the cat sat on the mat")];
        assert_eq!(corpus_bleu(&h, &r, false).unwrap(), 100.0);
        assert!(corpus_bleu(&h, &r, true).unwrap() < 100.0);
    }

    #[test]
    fn ter_examples() {
        assert_eq!(ter(&w("a b c d"), &w("a b c d")).unwrap(), 0.0);
        assert_eq!(ter(&w("a b x d"), &w("a b c d")).unwrap(), 0.25);
        let s = ter_stats(&w("d a b c"), &w("a b c d"), TerOptions::default());
        assert_eq!((s.edits, s.shifts), (0, 1));
        assert_eq!(ter(&w("d a b c"), &w("a b c d")).unwrap(), 0.25);
        assert!(ter::<&str>(&w("a"), &[]).is_err());
        assert_eq!(ter(&[] as &[&str], &w("a b")).unwrap(), 1.0);
    }

    #[test]
    fn ter_moves_whole_blocks() {
        let h = w("on the mat the cat sat");
        let r = w("the cat sat on the mat");
        let s = ter_stats(&h, &r, TerOptions::default());
        assert_eq!((s.edits, s.shifts), (0, 1));
        let plain = ter_stats(&h, &r, TerOptions { shifts: false, ..Default::default() });
        assert_eq!((plain.edits, plain.shifts), (6, 0));
    }

    #[test]
    fn char_ter_examples() {
        assert_eq!(char_ter("hello world", "hello world").unwrap(), 0.0);
        assert_eq!(char_ter("abxd", "abcd").unwrap(), 0.25);
        assert!(char_ter("a", "").is_err());
    }

    #[test]
    fn apply_shift_directions() {
        let v = ['a', 'b', 'c', 'd', 'e'];
        assert_eq!(apply_shift(&v, 0, 1, 5), vec!['b', 'c', 'd', 'e', 'a']);
        assert_eq!(apply_shift(&v, 3, 2, 0), vec!['d', 'e', 'a', 'b', 'c']);
        assert_eq!(apply_shift(&v, 1, 2, 4), vec!['a', 'd', 'b', 'c', 'e']);
    }

    #[test]
    fn evaluate_identity_and_single_segment() {
        let h = ["the cat sat", "a b c d e"];
        let r = evaluate(&h, &h).unwrap();
        assert_eq!((r.bleu, r.bleu_cased, r.ter, r.char_ter, r.segment_count), (100.0, 100.0, 0.0, 0.0, 2));

        let hyp = ["The cat sat on mat"];
        let rf = ["the cat sat on the mat"];
        let r = evaluate(&hyp, &rf).unwrap();
        assert_eq!(r.bleu_cased, corpus_bleu(&[w(hyp[0])], &[w(rf[0])], true).unwrap());
        assert_eq!(r.ter, ter(&w(hyp[0]), &w(rf[0])).unwrap());
        assert_eq!(r.char_ter, char_ter(hyp[0], rf[0]).unwrap());
    }

    #[test]
    fn report_lines() {
        let r = EvalReport {
            bleu: 100.0,
            bleu_cased: 57.8947,
            ter: 0.0,
            char_ter: 0.123456,
            segment_count: 3,
        };
        assert_eq!(
            r.to_kv_lines(),
            "BLEU=100.0000\nBLEU-cased=57.8947\nTER=0.0000\nCharTER=0.1235\nsegments=3\n"
        );
    }

    proptest! {
        #[test]
        fn ter_never_exceeds_plain_edit_rate(h in prop::collection::vec(0u8..5, 0..15), r in prop::collection::vec(0u8..5, 1..15)) {
            let with = ter_stats(&h, &r, TerOptions::default());
            prop_assert!(with.cost() <= edit_distance(&h, &r));
        }

        #[test]
        fn edit_distance_is_symmetric(a in prop::collection::vec(0u8..4, 0..12), b in prop::collection::vec(0u8..4, 0..12)) {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            prop_assert_eq!(align(&a, &b).cost, edit_distance(&a, &b));
        }
    }
}
