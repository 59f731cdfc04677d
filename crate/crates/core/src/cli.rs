//! Subcommand implementations behind the `charnmt` binary. Each takes a
//! [`JobConfig`] already merged with command-line flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::checkpoint::load_checkpoint;
use crate::config::{JobConfig, TRAINING_KEYS};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_with, EvalReport, TerOptions};
use crate::model::Seq2SeqModel;
use crate::sgml::{looks_like_sgml, parse_sgml_str, write_sgml, SetKind, SgmlDocument};
use crate::textprep::{
    clean, corpus_stats, preprocess_line, tokenize, train_truecaser, truecase, TokenizedPair, TruecaseModel,
    DEFAULT_MAX_TOKENS,
};
use crate::trainer::{train, ParallelCorpus, TrainLog, TrainOutputs};
use crate::vocab::CharVocab;

pub const PREP_KEYS: [&str; 4] = ["src", "tgt", "out", "max_tokens"];
pub const TRAIN_PATH_KEYS: [&str; 6] = ["src", "tgt", "src_vocab", "tgt_vocab", "checkpoint", "log"];
pub const TRANSLATE_KEYS: [&str; 9] = [
    "checkpoint",
    "input",
    "output",
    "truecase",
    "setid",
    "srclang",
    "trglang",
    "docid",
    "max_len",
];
pub const EVAL_KEYS: [&str; 3] = ["hyp", "ref", "shifts"];

pub const DEFAULT_MAX_DECODE_LEN: usize = 400;

/// Reads a UTF-8 text file as lines without terminators.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Data(format!("{}: not UTF-8: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of the vocabulary file text.
pub fn vocab_fingerprint(vocab: &CharVocab) -> String {
    let digest = Sha256::digest(vocab.to_text().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn load_vocab(path: &Path) -> Result<CharVocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CharVocab::from_text(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn load_truecaser(path: &Path) -> Result<(TruecaseModel, Option<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TruecaseModel::from_text(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// File names written by [`cmd_prep`] inside the output directory.
pub mod prep_files {
    pub const TRAIN_SRC: &str = "train.src";
    pub const TRAIN_TGT: &str = "train.tgt";
    pub const TRUECASE_SRC: &str = "truecase.src";
    pub const TRUECASE_TGT: &str = "truecase.tgt";
    pub const VOCAB_SRC: &str = "vocab.src";
    pub const VOCAB_TGT: &str = "vocab.tgt";
    pub const STATS: &str = "stats.txt";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepReport {
    pub pairs_in: usize,
    pub kept: usize,
    pub removed: usize,
    pub out_dir: PathBuf,
}

/// Tokenize, truecase, and length-clean a raw parallel corpus, then write
/// the side files, truecase models, vocabularies, and a stats report.
pub fn cmd_prep(cfg: &JobConfig) -> Result<PrepReport> {
    cfg.check_keys(&PREP_KEYS)?;
    let src_path = cfg.input_path("src")?;
    let tgt_path = cfg.input_path("tgt")?;
    let out = cfg.path("out").ok_or_else(|| Error::config("missing required key out"))?;
    let max_tokens = cfg.parsed("max_tokens")?.unwrap_or(DEFAULT_MAX_TOKENS);
    if max_tokens < 1 {
        return Err(Error::config("max_tokens: must be at least 1"));
    }
    let src = read_lines(&src_path)?;
    let tgt = read_lines(&tgt_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            src_path.display(),
            src.len(),
            tgt_path.display(),
            tgt.len()
        )));
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let src_tok: Vec<Vec<String>> = src.iter().map(|l| tokenize(l)).collect();
    let tgt_tok: Vec<Vec<String>> = tgt.iter().map(|l| tokenize(l)).collect();
    let src_tc = train_truecaser(&src_tok);
    let tgt_tc = train_truecaser(&tgt_tok);
    let pairs: Vec<TokenizedPair> = src_tok
        .iter()
        .zip(&tgt_tok)
        .enumerate()
        .map(|(i, (s, t))| TokenizedPair {
            source: truecase(&src_tc, s),
            target: truecase(&tgt_tc, t),
            line_number: i + 1,
        })
        .collect();
    let pairs_in = pairs.len();
    let (kept, removed) = clean(pairs, max_tokens)?;
    let src_out: Vec<String> = kept.iter().map(|p| p.source.join(" ")).collect();
    let tgt_out: Vec<String> = kept.iter().map(|p| p.target.join(" ")).collect();
    let src_vocab = CharVocab::build(&src_out);
    let tgt_vocab = CharVocab::build(&tgt_out);

    use prep_files::*;
    write_lines(&out.join(TRAIN_SRC), &src_out)?;
    write_lines(&out.join(TRAIN_TGT), &tgt_out)?;
    write_text(&out.join(VOCAB_SRC), &src_vocab.to_text())?;
    write_text(&out.join(VOCAB_TGT), &tgt_vocab.to_text())?;
    write_text(
        &out.join(TRUECASE_SRC),
        &src_tc.to_text(Some(&vocab_fingerprint(&src_vocab))),
    )?;
    write_text(
        &out.join(TRUECASE_TGT),
        &tgt_tc.to_text(Some(&vocab_fingerprint(&tgt_vocab))),
    )?;

    let mut stats = String::new();
    let _ = writeln!(stats, "pairs_in={pairs_in}");
    let _ = writeln!(stats, "pairs_kept={}", kept.len());
    let _ = writeln!(stats, "pairs_removed={removed}");
    let _ = writeln!(stats, "max_tokens={max_tokens}");
    stats.push_str(&corpus_stats(&src_out).to_kv_lines(Some("src")));
    stats.push_str(&corpus_stats(&tgt_out).to_kv_lines(Some("tgt")));
    write_text(&out.join(STATS), &stats)?;

    Ok(PrepReport {
        pairs_in,
        kept: kept.len(),
        removed,
        out_dir: out,
    })
}

/// Corpus statistics for each file, keys prefixed by the file path when
/// more than one file is given.
pub fn cmd_stats(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::config("stats needs at least one file"));
    }
    let mut out = String::new();
    for p in paths {
        let lines = read_lines(p)?;
        let prefix = (paths.len() > 1).then(|| p.display().to_string());
        out.push_str(&corpus_stats(&lines).to_kv_lines(prefix.as_deref()));
    }
    Ok(out)
}

fn train_keys() -> Vec<&'static str> {
    TRAIN_PATH_KEYS.iter().chain(TRAINING_KEYS.iter()).copied().collect()
}

/// Trains a model on a prepared corpus. Every path is checked and both
/// vocabularies are loaded before the first epoch.
pub fn cmd_train(cfg: &JobConfig, verbose: bool) -> Result<TrainLog> {
    cfg.check_keys(&train_keys())?;
    let tcfg = cfg.training_config()?;
    let src_path = cfg.input_path("src")?;
    let tgt_path = cfg.input_path("tgt")?;
    let src_vocab_path = cfg.input_path("src_vocab")?;
    let tgt_vocab_path = cfg.input_path("tgt_vocab")?;
    let checkpoint = cfg.output_path("checkpoint")?;
    let log = match cfg.get("log") {
        Some(_) => Some(cfg.output_path("log")?),
        None => None,
    };
    let src_vocab = load_vocab(&src_vocab_path)?;
    let tgt_vocab = load_vocab(&tgt_vocab_path)?;
    let src = read_lines(&src_path)?;
    let tgt = read_lines(&tgt_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} source lines vs {} target lines",
            src.len(),
            tgt.len()
        )));
    }
    let corpus = ParallelCorpus::with_vocabs(src_vocab, tgt_vocab, src.into_iter().zip(tgt).collect());
    if let Some(log) = &log {
        write_text(log, "")?;
    }
    let outputs = TrainOutputs {
        checkpoint: Some(checkpoint),
        log,
        verbose,
    };
    let (_, log) = train(&corpus, &tcfg, &outputs)?;
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslateReport {
    pub segments: usize,
    pub sgml: bool,
}

fn translate_all(model: &Seq2SeqModel, tc: Option<&TruecaseModel>, lines: &[String], max_len: usize) -> Result<Vec<String>> {
    lines
        .iter()
        .map(|l| match tc {
            Some(tc) => model.translate(&preprocess_line(tc, l), max_len),
            None => model.translate(l, max_len),
        })
        .collect()
}

/// Greedy-decodes every input line or SGML segment. SGML input always
/// yields an SGML test set; plain input does when `setid` is given.
pub fn cmd_translate(cfg: &JobConfig) -> Result<TranslateReport> {
    cfg.check_keys(&TRANSLATE_KEYS)?;
    let ckpt = cfg.input_path("checkpoint")?;
    let input = cfg.input_path("input")?;
    let output = cfg.output_path("output")?;
    let max_len = cfg.parsed("max_len")?.unwrap_or(DEFAULT_MAX_DECODE_LEN);
    let truecaser = match cfg.get("truecase") {
        Some(_) => Some(load_truecaser(&cfg.input_path("truecase")?)?),
        None => None,
    };
    let model = load_checkpoint(&ckpt)?;
    let tc = match truecaser {
        Some((tc, fp)) => {
            let expected = vocab_fingerprint(model.src_vocab());
            match fp {
                Some(fp) if fp != expected => {
                    return Err(Error::config(format!(
                        "truecase model was prepared for a different source vocabulary than {} ({fp} vs {expected})",
                        ckpt.display()
                    )))
                }
                _ => Some(tc),
            }
        }
        None => None,
    };

    let text = fs::read_to_string(&input)
        .map_err(|e| Error::Data(format!("{}: {e}", input.display())))?;
    if looks_like_sgml(&text) {
        let src = parse_sgml_str(&text)?;
        let hyps = translate_all(&model, tc.as_ref(), &src.texts(), max_len)?;
        let mut doc = src.with_texts(SetKind::Tst, cfg.get("trglang"), &hyps)?;
        if let Some(s) = cfg.get("setid") {
            doc.setid = s.to_string();
        }
        if let Some(s) = cfg.get("srclang") {
            doc.srclang = s.to_string();
        }
        write_sgml(&doc, &output)?;
        return Ok(TranslateReport {
            segments: hyps.len(),
            sgml: true,
        });
    }
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    let hyps = translate_all(&model, tc.as_ref(), &lines, max_len)?;
    match cfg.get("setid") {
        Some(setid) => {
            let doc = SgmlDocument::from_lines(
                SetKind::Tst,
                setid,
                cfg.get("srclang").unwrap_or("fi"),
                Some(cfg.get("trglang").unwrap_or("en")),
                cfg.get("docid").unwrap_or(setid),
                &hyps,
            );
            write_sgml(&doc, &output)?;
        }
        None => write_lines(&output, &hyps)?,
    }
    Ok(TranslateReport {
        segments: hyps.len(),
        sgml: cfg.get("setid").is_some(),
    })
}

enum Segments {
    Plain(Vec<String>),
    Sgml(SgmlDocument),
}

fn read_segments(path: &Path) -> Result<Segments> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if looks_like_sgml(&text) {
        Ok(Segments::Sgml(parse_sgml_str(&text).map_err(|e| {
            Error::Data(format!("{}: {e}", path.display()))
        })?))
    } else {
        Ok(Segments::Plain(text.lines().map(str::to_string).collect()))
    }
}

/// Aligns hypothesis and reference segments. SGML pairs are matched by
/// `(docid, seg id)` in order; a plain file is matched by position.
fn align_segments(hyp: Segments, reference: Segments) -> Result<(Vec<String>, Vec<String>)> {
    let ids = |d: &SgmlDocument| -> Vec<String> { d.segments().map(|(doc, s)| format!("{doc}/{}", s.id)).collect() };
    match (hyp, reference) {
        (Segments::Sgml(h), Segments::Sgml(r)) => {
            let (hi, ri) = (ids(&h), ids(&r));
            for i in 0..hi.len().max(ri.len()) {
                match (hi.get(i), ri.get(i)) {
                    (Some(a), Some(b)) if a == b => {}
                    (Some(a), Some(b)) => {
                        return Err(Error::Data(format!(
                            "segment mismatch at position {}: hypothesis {a} vs reference {b}",
                            i + 1
                        )))
                    }
                    (Some(a), None) => return Err(Error::Data(format!("hypothesis segment {a} has no reference"))),
                    (None, Some(b)) => return Err(Error::Data(format!("reference segment {b} has no hypothesis"))),
                    (None, None) => unreachable!(),
                }
            }
            Ok((h.texts(), r.texts()))
        }
        (h, r) => {
            let (hn, rn) = (segment_ids(&h), segment_ids(&r));
            let (ht, rt) = (texts(h), texts(r));
            if ht.len() != rt.len() {
                let first = ht.len().min(rt.len());
                let id = if ht.len() > rt.len() { &hn[first] } else { &rn[first] };
                return Err(Error::Data(format!(
                    "{} hypothesis segments vs {} reference segments; first unmatched segment is {id}",
                    ht.len(),
                    rt.len()
                )));
            }
            Ok((ht, rt))
        }
    }
}

fn segment_ids(s: &Segments) -> Vec<String> {
    match s {
        Segments::Plain(l) => (1..=l.len()).map(|i| format!("line {i}")).collect(),
        Segments::Sgml(d) => d.segments().map(|(doc, s)| format!("{doc}/{}", s.id)).collect(),
    }
}

fn texts(s: Segments) -> Vec<String> {
    match s {
        Segments::Plain(l) => l,
        Segments::Sgml(d) => d.texts(),
    }
}

pub fn cmd_eval(cfg: &JobConfig) -> Result<EvalReport> {
    cfg.check_keys(&EVAL_KEYS)?;
    let hyp = read_segments(&cfg.input_path("hyp")?)?;
    let reference = read_segments(&cfg.input_path("ref")?)?;
    let shifts = cfg.parsed("shifts")?.unwrap_or(true);
    let (h, r) = align_segments(hyp, reference)?;
    evaluate_with(
        &h,
        &r,
        TerOptions {
            shifts,
            ..TerOptions::default()
        },
    )
}
