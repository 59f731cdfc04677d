//! Mini-batch rmsprop training with global-norm gradient clipping.
//!
//! The optimized objective is the mean over sentences of the summed
//! per-symbol negative log-likelihood. The logged loss is the mean per
//! predicted symbol so runs with different corpora stay comparable.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::save_checkpoint;
use crate::error::{Error, Result};
use crate::model::{ModelGrads, Seq2SeqModel, DEFAULT_HIDDEN};
use crate::vocab::{CharVocab, EOS, PAD};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    /// Pairs with a side longer than this many characters are dropped.
    pub max_char_len: usize,
    pub hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 128,
            epochs: 100,
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
            clip_norm: 5.0,
            seed: 0,
            max_char_len: 400,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: &str| Err(Error::config(format!("{key}: {why}")));
        if self.batch_size < 1 {
            return fail("batch_size", "must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate", "must be a positive finite number");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail("rho", "must lie strictly between 0 and 1");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail("epsilon", "must be a non-negative finite number");
        }
        if !(self.clip_norm > 0.0) {
            return fail("clip_norm", "must be positive (use inf to disable)");
        }
        if self.max_char_len < 1 {
            return fail("max_char_len", "must be at least 1");
        }
        if self.hidden < 1 {
            return fail("hidden", "must be at least 1");
        }
        Ok(())
    }
}

/// Squared-gradient running averages, one per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    acc: Vec<Vec<f64>>,
}

impl RmspropState {
    pub fn new(lengths: &[usize]) -> Self {
        RmspropState {
            acc: lengths.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &Seq2SeqModel) -> Self {
        let lengths: Vec<usize> = model.arrays().iter().map(|a| a.len()).collect();
        Self::new(&lengths)
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.acc
    }
}

/// Scales all gradient arrays jointly so their global L2 norm is at most
/// `clip_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], clip_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

/// One rmsprop update after global-norm clipping:
/// `acc ← ρ·acc + (1−ρ)·g²`, `θ ← θ − lr·g / (√acc + ε)`.
///
/// Clipping happens in place on `grads`. Returns the pre-clip norm.
pub fn rmsprop_step(
    state: &mut RmspropState,
    params: &mut [&mut [f64]],
    grads: &mut [&mut [f64]],
    cfg: &TrainingConfig,
) -> Result<f64> {
    let aligned = params.len() == grads.len()
        && params.len() == state.acc.len()
        && params
            .iter()
            .zip(grads.iter())
            .zip(&state.acc)
            .all(|((p, g), a)| p.len() == g.len() && g.len() == a.len());
    if !aligned {
        return Err(Error::contract("rmsprop: parameter, gradient and accumulator shapes differ"));
    }
    let norm = clip_global_norm(grads, cfg.clip_norm);
    let (rho, lr, eps) = (cfg.rho, cfg.learning_rate, cfg.epsilon);
    for ((p, g), acc) in params.iter_mut().zip(grads.iter()).zip(state.acc.iter_mut()) {
        for ((theta, &gi), a) in p.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
            *a = rho * *a + (1.0 - rho) * gi * gi;
            *theta -= lr * gi / (a.sqrt() + eps);
        }
    }
    Ok(norm)
}

/// Character ids of one training pair, without control symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// Sentence pairs and the vocabularies built from each side.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub src_vocab: CharVocab,
    pub tgt_vocab: CharVocab,
    pub pairs: Vec<(String, String)>,
}

impl ParallelCorpus {
    /// Source vocabulary from the source side only, target from the target side.
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Self {
        let src: Vec<&str> = pairs.iter().map(|(s, _)| s.as_str()).collect();
        let tgt: Vec<&str> = pairs.iter().map(|(_, t)| t.as_str()).collect();
        ParallelCorpus {
            src_vocab: CharVocab::build(&src),
            tgt_vocab: CharVocab::build(&tgt),
            pairs,
        }
    }

    pub fn with_vocabs(src_vocab: CharVocab, tgt_vocab: CharVocab, pairs: Vec<(String, String)>) -> Self {
        ParallelCorpus {
            src_vocab,
            tgt_vocab,
            pairs,
        }
    }

    pub fn encoded(&self) -> Vec<EncodedPair> {
        self.pairs
            .iter()
            .map(|(s, t)| EncodedPair {
                src: self.src_vocab.encode(s, false, false),
                tgt: self.tgt_vocab.encode(t, false, false),
            })
            .collect()
    }
}

/// Padded mini-batch. Row `r` holds `source_lens[r]` real source ids and
/// `target_lens[r]` real target ids, followed by PAD.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub source: Vec<Vec<usize>>,
    pub target: Vec<Vec<usize>>,
    pub source_lens: Vec<usize>,
    pub target_lens: Vec<usize>,
}

impl Batch {
    pub fn from_pairs(pairs: &[&EncodedPair]) -> Self {
        let src_max = pairs.iter().map(|p| p.src.len()).max().unwrap_or(0);
        let tgt_max = pairs.iter().map(|p| p.tgt.len()).max().unwrap_or(0);
        let pad = |ids: &[usize], n: usize| {
            let mut v = ids.to_vec();
            v.resize(n, PAD);
            v
        };
        Batch {
            source: pairs.iter().map(|p| pad(&p.src, src_max)).collect(),
            target: pairs.iter().map(|p| pad(&p.tgt, tgt_max)).collect(),
            source_lens: pairs.iter().map(|p| p.src.len()).collect(),
            target_lens: pairs.iter().map(|p| p.tgt.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Real (unpadded) source and target ids of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[usize]) {
        (
            &self.source[r][..self.source_lens[r]],
            &self.target[r][..self.target_lens[r]],
        )
    }

    /// Decoder prediction targets of row `r` over the padded width:
    /// the target ids, EOS, then PAD.
    pub fn prediction_targets(&self, r: usize) -> Vec<usize> {
        let (_, tgt) = self.row(r);
        let width = self.target[r].len() + 1;
        let mut out = tgt.to_vec();
        out.push(EOS);
        out.resize(width, PAD);
        out
    }

    /// 1.0 on supervised prediction steps, 0.0 on PAD steps.
    pub fn loss_mask(&self, r: usize) -> Vec<f64> {
        let width = self.target[r].len() + 1;
        (0..width)
            .map(|t| if t <= self.target_lens[r] { 1.0 } else { 0.0 })
            .collect()
    }

    /// Number of supervised prediction steps in the batch.
    pub fn symbols(&self) -> usize {
        self.target_lens.iter().map(|n| n + 1).sum()
    }
}

#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub batches: Vec<Batch>,
    /// Pairs dropped for an empty side or a side over `max_char_len`.
    pub dropped: usize,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Shuffles deterministically by `(seed, epoch)` and cuts the corpus into
/// padded batches of `batch_size` (the last may be smaller).
pub fn make_batches(pairs: &[EncodedPair], cfg: &TrainingConfig, epoch: usize) -> Result<BatchPlan> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::config("training corpus is empty"));
    }
    let usable = |p: &EncodedPair| {
        !p.src.is_empty() && !p.tgt.is_empty() && p.src.len() <= cfg.max_char_len && p.tgt.len() <= cfg.max_char_len
    };
    let mut order: Vec<usize> = (0..pairs.len()).filter(|&i| usable(&pairs[i])).collect();
    let dropped = pairs.len() - order.len();
    if order.is_empty() {
        return Err(Error::config(format!(
            "no usable training pairs: all {dropped} have an empty side or exceed max_char_len {}",
            cfg.max_char_len
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch));
    order.shuffle(&mut rng);
    let batches = order
        .chunks(cfg.batch_size)
        .map(|idx| {
            let rows: Vec<&EncodedPair> = idx.iter().map(|&i| &pairs[i]).collect();
            Batch::from_pairs(&rows)
        })
        .collect();
    Ok(BatchPlan { batches, dropped })
}

/// Summed loss and symbol count of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    pub symbols: usize,
    pub sentences: usize,
}

/// Fills `grads` with the gradient of the batch objective
/// `(1/N) Σ_n Σ_t −log p` and returns the summed (unnormalized) loss.
///
/// PAD positions are never run through the network, so they add no loss and
/// no gradient.
pub fn batch_gradients(model: &Seq2SeqModel, batch: &Batch, grads: &mut ModelGrads) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    grads.fill_zero();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut symbols = 0;
    for r in 0..batch.len() {
        let (src, tgt) = batch.row(r);
        let (loss, cache) = model.teacher_forced_loss(src, tgt)?;
        model.backward_into(&cache, scale, grads)?;
        total += loss;
        symbols += cache.prediction_steps();
    }
    Ok(BatchLoss {
        total,
        symbols,
        sentences: batch.len(),
    })
}

/// Summed loss of one batch without gradients.
pub fn batch_loss(model: &Seq2SeqModel, batch: &Batch) -> Result<BatchLoss> {
    let mut total = 0.0;
    let mut symbols = 0;
    for r in 0..batch.len() {
        let (src, tgt) = batch.row(r);
        let (loss, cache) = model.teacher_forced_loss(src, tgt)?;
        total += loss;
        symbols += cache.prediction_steps();
    }
    Ok(BatchLoss {
        total,
        symbols,
        sentences: batch.len(),
    })
}

/// Mean loss per predicted symbol over `pairs` (pairs with an empty side are
/// skipped).
pub fn mean_symbol_loss(model: &Seq2SeqModel, pairs: &[EncodedPair]) -> Result<f64> {
    let mut total = 0.0;
    let mut symbols = 0;
    for p in pairs.iter().filter(|p| !p.src.is_empty() && !p.tgt.is_empty()) {
        let (loss, cache) = model.teacher_forced_loss(&p.src, &p.tgt)?;
        total += loss;
        symbols += cache.prediction_steps();
    }
    if symbols == 0 {
        return Err(Error::config("no usable pairs to score"));
    }
    Ok(total / symbols as f64)
}

/// Fraction of teacher-forced prediction steps whose argmax is the gold symbol.
pub fn teacher_forced_accuracy(model: &Seq2SeqModel, pairs: &[EncodedPair]) -> Result<f64> {
    let (mut hits, mut total) = (0, 0);
    for p in pairs.iter().filter(|p| !p.src.is_empty() && !p.tgt.is_empty()) {
        let (h, n) = model.teacher_forced_hits(&p.src, &p.tgt)?;
        hits += h;
        total += n;
    }
    if total == 0 {
        return Err(Error::config("no usable pairs to score"));
    }
    Ok(hits as f64 / total as f64)
}

/// Fraction of pairs whose greedy decode reproduces the target exactly.
pub fn exact_match_rate(model: &Seq2SeqModel, pairs: &[EncodedPair], max_len: usize) -> Result<f64> {
    let usable: Vec<&EncodedPair> = pairs.iter().filter(|p| !p.src.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::config("no usable pairs to score"));
    }
    let mut hits = 0;
    for p in &usable {
        if model.greedy_decode(&p.src, max_len)? == p.tgt {
            hits += 1;
        }
    }
    Ok(hits as f64 / usable.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss per predicted symbol over the epoch's batches.
    pub loss: f64,
    pub seconds: f64,
    pub chars_per_sec: f64,
}

impl EpochRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{:.3}\t{:.1}",
            self.epoch, self.loss, self.seconds, self.chars_per_sec
        )
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let mut f = line.split('\t');
        let rec = EpochRecord {
            epoch: f.next()?.parse().ok()?,
            loss: f.next()?.parse().ok()?,
            seconds: f.next()?.parse().ok()?,
            chars_per_sec: f.next()?.parse().ok()?,
        };
        f.next().is_none().then_some(rec)
    }
}

/// Per-epoch training telemetry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    entries: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn entries(&self) -> &[EpochRecord] {
        &self.entries
    }

    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        let expected = self.entries.len() + 1;
        if record.epoch != expected {
            return Err(Error::contract(format!(
                "train log expects epoch {expected}, got {}",
                record.epoch
            )));
        }
        self.entries.push(record);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| e.to_line() + "\n").collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut log = TrainLog::default();
        for (i, line) in text.lines().enumerate() {
            let rec = EpochRecord::parse_line(line).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("bad train log line {line:?}"),
            })?;
            log.push(rec)?;
        }
        Ok(log)
    }
}

/// Owns the model and optimizer state for a training run.
#[derive(Debug)]
pub struct Trainer {
    cfg: TrainingConfig,
    model: Seq2SeqModel,
    optimizer: RmspropState,
    grads: ModelGrads,
    pairs: Vec<EncodedPair>,
    log: TrainLog,
    dropped: usize,
}

impl Trainer {
    /// Initializes a model of `cfg.hidden` units seeded from `cfg.seed`.
    pub fn new(corpus: &ParallelCorpus, cfg: TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        let model = Seq2SeqModel::new(corpus.src_vocab.clone(), corpus.tgt_vocab.clone(), cfg.hidden, cfg.seed)?;
        Self::with_model(model, corpus.encoded(), cfg)
    }

    pub fn with_model(model: Seq2SeqModel, pairs: Vec<EncodedPair>, cfg: TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        if model.hidden() != cfg.hidden {
            return Err(Error::config(format!(
                "hidden: model has {} units, config says {}",
                model.hidden(),
                cfg.hidden
            )));
        }
        // fail early on an empty or unusable corpus
        let plan = make_batches(&pairs, &cfg, 0)?;
        Ok(Trainer {
            optimizer: RmspropState::for_model(&model),
            grads: ModelGrads::zeros_like(&model),
            dropped: plan.dropped,
            cfg,
            model,
            pairs,
            log: TrainLog::default(),
        })
    }

    pub fn model(&self) -> &Seq2SeqModel {
        &self.model
    }

    pub fn into_model(self) -> Seq2SeqModel {
        self.model
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn pairs(&self) -> &[EncodedPair] {
        &self.pairs
    }

    /// Pairs excluded from training by the length limits.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn epochs_done(&self) -> usize {
        self.log.entries.len()
    }

    /// Runs one pass over the shuffled corpus.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epochs_done() + 1;
        let start = Instant::now();
        let plan = make_batches(&self.pairs, &self.cfg, epoch)?;
        let mut total = 0.0;
        let mut symbols = 0usize;
        for (b, batch) in plan.batches.iter().enumerate() {
            let stats = batch_gradients(&self.model, batch, &mut self.grads).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, batch {}: {msg}", b + 1)),
                other => other,
            })?;
            if !stats.total.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, batch {}: non-finite loss {}",
                    b + 1,
                    stats.total
                )));
            }
            total += stats.total;
            symbols += stats.symbols;
            let mut params = self.model.arrays_mut();
            let mut grads = self.grads.arrays_mut();
            rmsprop_step(&mut self.optimizer, &mut params, &mut grads, &self.cfg)?;
            if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, batch {}: parameters became non-finite",
                    b + 1
                )));
            }
        }
        let seconds = start.elapsed().as_secs_f64();
        let record = EpochRecord {
            epoch,
            loss: total / symbols as f64,
            seconds,
            chars_per_sec: if seconds > 0.0 { symbols as f64 / seconds } else { 0.0 },
        };
        self.log.push(record)?;
        Ok(record)
    }
}

/// Where `train` writes its outputs.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    /// Rewritten after every epoch and at completion.
    pub checkpoint: Option<PathBuf>,
    /// Appended with one line per epoch.
    pub log: Option<PathBuf>,
    pub verbose: bool,
}

/// Trains a fresh model for `cfg.epochs` epochs.
pub fn train(
    corpus: &ParallelCorpus,
    cfg: &TrainingConfig,
    outputs: &TrainOutputs,
) -> Result<(Seq2SeqModel, TrainLog)> {
    let mut trainer = Trainer::new(corpus, cfg.clone())?;
    if trainer.dropped() > 0 {
        eprintln!(
            "warning: dropped {} pair(s) with an empty side or more than {} characters",
            trainer.dropped(),
            cfg.max_char_len
        );
    }
    for _ in 0..cfg.epochs {
        let record = trainer.run_epoch()?;
        if let Some(path) = &outputs.log {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writeln!(f, "{}", record.to_line()).map_err(|e| Error::io(path, e))?;
        }
        if let Some(path) = &outputs.checkpoint {
            save_checkpoint(trainer.model(), path)?;
        }
        if outputs.verbose {
            eprintln!(
                "epoch {:>4}  loss {:.6}  {:.1}s  {:.0} chars/s",
                record.epoch, record.loss, record.seconds, record.chars_per_sec
            );
        }
    }
    if let Some(path) = &outputs.checkpoint {
        save_checkpoint(trainer.model(), path)?;
    }
    let log = trainer.log().clone();
    Ok((trainer.into_model(), log))
}
