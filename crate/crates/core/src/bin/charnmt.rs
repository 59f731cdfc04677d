use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use charnmt::cli::{cmd_eval, cmd_prep, cmd_stats, cmd_train, cmd_translate};
use charnmt::config::JobConfig;
use charnmt::{Error, Result};

/// Character-level encoder-decoder translation.
///
/// Settings come from an optional `--config` file of `key = value` lines;
/// any flag given on the command line overrides the file value. Relative
/// paths in the file resolve against the file's directory.
#[derive(Parser, Debug)]
#[command(name = "charnmt", version)]
struct Cli {
    /// key = value configuration file for the subcommand
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed (training shuffle and initialization)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Suppress progress output on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize, truecase, and clean a raw parallel corpus
    Prep(PrepArgs),
    /// Print sentence, word, and character counts
    Stats(StatsArgs),
    /// Train a model on a prepared corpus
    Train(TrainArgs),
    /// Greedy-decode plain-text lines or an SGML source set
    Translate(TranslateArgs),
    /// Score hypotheses against references (BLEU, TER, character TER)
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct PrepArgs {
    /// Raw source-side file, one sentence per line
    #[arg(long)]
    src: Option<PathBuf>,
    /// Raw target-side file, line-aligned with --src
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop pairs with more tokens than this on either side [default: 80]
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Text files, one sentence per line
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    src: Option<PathBuf>,
    #[arg(long)]
    tgt: Option<PathBuf>,
    #[arg(long)]
    src_vocab: Option<PathBuf>,
    #[arg(long)]
    tgt_vocab: Option<PathBuf>,
    /// Checkpoint written after every epoch
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Training log, one tab-separated line per epoch
    #[arg(long)]
    log: Option<PathBuf>,
    /// [default: 128]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// rmsprop decay [default: 0.9]
    #[arg(long)]
    rho: Option<f64>,
    /// [default: 1e-8]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Global gradient norm ceiling, `inf` disables [default: 5]
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Drop pairs longer than this many characters [default: 400]
    #[arg(long)]
    max_char_len: Option<usize>,
    /// LSTM state size [default: 256]
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args, Debug)]
struct TranslateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Plain text (one sentence per line) or an SGML source set
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Source truecase model from `prep`; enables tokenization and truecasing of the input
    #[arg(long)]
    truecase: Option<PathBuf>,
    /// Write an SGML test set with this set id
    #[arg(long)]
    setid: Option<String>,
    /// [default: fi]
    #[arg(long)]
    srclang: Option<String>,
    /// [default: en]
    #[arg(long)]
    trglang: Option<String>,
    /// [default: the set id]
    #[arg(long)]
    docid: Option<String>,
    /// Longest output in characters [default: 400]
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Hypotheses, plain text or SGML
    #[arg(long)]
    hyp: Option<PathBuf>,
    /// References, plain text or SGML
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Plain edit distance for TER, without block shifts
    #[arg(long)]
    no_shifts: bool,
}

struct Overrides<'a>(&'a mut JobConfig);

impl Overrides<'_> {
    fn path(&mut self, key: &str, v: &Option<PathBuf>) {
        if let Some(p) = v {
            self.0.set_path(key, p);
        }
    }

    fn value<T: ToString>(&mut self, key: &str, v: &Option<T>) {
        if let Some(x) = v {
            self.0.set(key, x.to_string());
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::new(),
    };
    let mut o = Overrides(&mut cfg);
    match &cli.command {
        Command::Prep(a) => {
            o.path("src", &a.src);
            o.path("tgt", &a.tgt);
            o.path("out", &a.out);
            o.value("max_tokens", &a.max_tokens);
            let r = cmd_prep(&cfg)?;
            if !cli.quiet {
                eprintln!(
                    "kept {} of {} pairs ({} removed) -> {}",
                    r.kept,
                    r.pairs_in,
                    r.removed,
                    r.out_dir.display()
                );
            }
        }
        Command::Stats(a) => {
            print!("{}", cmd_stats(&a.files)?);
        }
        Command::Train(a) => {
            o.path("src", &a.src);
            o.path("tgt", &a.tgt);
            o.path("src_vocab", &a.src_vocab);
            o.path("tgt_vocab", &a.tgt_vocab);
            o.path("checkpoint", &a.checkpoint);
            o.path("log", &a.log);
            o.value("batch_size", &a.batch_size);
            o.value("epochs", &a.epochs);
            o.value("learning_rate", &a.learning_rate);
            o.value("rho", &a.rho);
            o.value("epsilon", &a.epsilon);
            o.value("clip_norm", &a.clip_norm);
            o.value("max_char_len", &a.max_char_len);
            o.value("hidden", &a.hidden);
            o.value("seed", &cli.seed);
            let log = cmd_train(&cfg, !cli.quiet)?;
            if !cli.quiet {
                if let Some(last) = log.entries().last() {
                    eprintln!("finished {} epochs, final loss {:.6}", last.epoch, last.loss);
                }
            }
        }
        Command::Translate(a) => {
            o.path("checkpoint", &a.checkpoint);
            o.path("input", &a.input);
            o.path("output", &a.output);
            o.path("truecase", &a.truecase);
            o.value("setid", &a.setid);
            o.value("srclang", &a.srclang);
            o.value("trglang", &a.trglang);
            o.value("docid", &a.docid);
            o.value("max_len", &a.max_len);
            let r = cmd_translate(&cfg)?;
            if !cli.quiet {
                eprintln!("translated {} segments{}", r.segments, if r.sgml { " (SGML)" } else { "" });
            }
        }
        Command::Eval(a) => {
            o.path("hyp", &a.hyp);
            o.path("ref", &a.reference);
            if a.no_shifts {
                o.0.set("shifts", "false");
            }
            print!("{}", cmd_eval(&cfg)?.to_kv_lines());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("charnmt: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
