//! Encoder-decoder assembly: teacher-forced loss, backpropagation through
//! time, and greedy inference.
//!
//! The encoder reads the one-hot source left to right from the zero state.
//! Only its final `(h, c)` is kept; it initializes the decoder, which reads
//! `[SOS] + target` and is trained to predict `target + [EOS]` through a
//! dense layer on its hidden state.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{
    dense_backward, dense_forward, lstm_backward_acc, lstm_step_onehot, DenseGrads, DenseParams, LstmGrads,
    LstmParams, LstmState, LstmStepCache,
};
use crate::numerics::{argmax, axpy, capped_neg_log, softmax_in_place};
use crate::vocab::{CharVocab, EOS, SOS};

pub const DEFAULT_HIDDEN: usize = 256;

/// Number of parameter arrays, in persisted order:
/// encoder W, U, b; decoder W, U, b; output W, b.
pub const NUM_PARAM_ARRAYS: usize = 8;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct Seq2SeqModel {
    encoder: LstmParams,
    decoder: LstmParams,
    output: DenseParams,
    src_vocab: CharVocab,
    tgt_vocab: CharVocab,
    // Identifies the exact parameter values a forward cache was built from.
    stamp: u64,
}

impl Clone for Seq2SeqModel {
    fn clone(&self) -> Self {
        Seq2SeqModel {
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            output: self.output.clone(),
            src_vocab: self.src_vocab.clone(),
            tgt_vocab: self.tgt_vocab.clone(),
            stamp: fresh_stamp(),
        }
    }
}

impl PartialEq for Seq2SeqModel {
    fn eq(&self, other: &Self) -> bool {
        self.encoder == other.encoder
            && self.decoder == other.decoder
            && self.output == other.output
            && self.src_vocab == other.src_vocab
            && self.tgt_vocab == other.tgt_vocab
    }
}

impl Seq2SeqModel {
    /// Freshly initialized model; encoder, decoder and output layer draw from
    /// one generator seeded with `seed`, in that order.
    pub fn new(src_vocab: CharVocab, tgt_vocab: CharVocab, hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = LstmParams::init_with(&mut rng, hidden, src_vocab.len())?;
        let decoder = LstmParams::init_with(&mut rng, hidden, tgt_vocab.len())?;
        let output = DenseParams::init_with(&mut rng, tgt_vocab.len(), hidden)?;
        Self::from_parts(encoder, decoder, output, src_vocab, tgt_vocab)
    }

    pub fn from_parts(
        encoder: LstmParams,
        decoder: LstmParams,
        output: DenseParams,
        src_vocab: CharVocab,
        tgt_vocab: CharVocab,
    ) -> Result<Self> {
        encoder.validate()?;
        decoder.validate()?;
        let h = encoder.hidden();
        let consistent = decoder.hidden() == h
            && encoder.input_dim() == src_vocab.len()
            && decoder.input_dim() == tgt_vocab.len()
            && output.out_dim() == tgt_vocab.len()
            && output.b.len() == tgt_vocab.len()
            && output.input_dim() == h;
        if !consistent {
            return Err(Error::contract(format!(
                "inconsistent model dims: encoder W {:?}, decoder W {:?}, output W {:?}, vocabs {}/{}",
                encoder.w.shape(),
                decoder.w.shape(),
                output.w.shape(),
                src_vocab.len(),
                tgt_vocab.len()
            )));
        }
        Ok(Seq2SeqModel {
            encoder,
            decoder,
            output,
            src_vocab,
            tgt_vocab,
            stamp: fresh_stamp(),
        })
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden()
    }

    pub fn src_vocab(&self) -> &CharVocab {
        &self.src_vocab
    }

    pub fn tgt_vocab(&self) -> &CharVocab {
        &self.tgt_vocab
    }

    pub fn encoder(&self) -> &LstmParams {
        &self.encoder
    }

    pub fn decoder(&self) -> &LstmParams {
        &self.decoder
    }

    pub fn output(&self) -> &DenseParams {
        &self.output
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn encoder_mut(&mut self) -> &mut LstmParams {
        self.stamp = fresh_stamp();
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut LstmParams {
        self.stamp = fresh_stamp();
        &mut self.decoder
    }

    pub fn output_mut(&mut self) -> &mut DenseParams {
        self.stamp = fresh_stamp();
        &mut self.output
    }

    /// Parameter arrays in persisted order.
    pub fn arrays(&self) -> [&[f64]; NUM_PARAM_ARRAYS] {
        let [ew, eu, eb] = self.encoder.arrays();
        let [dw, du, db] = self.decoder.arrays();
        let [ow, ob] = self.output.arrays();
        [ew, eu, eb, dw, du, db, ow, ob]
    }

    /// Mutable parameter arrays in persisted order. Invalidates outstanding
    /// forward caches.
    pub fn arrays_mut(&mut self) -> [&mut [f64]; NUM_PARAM_ARRAYS] {
        self.stamp = fresh_stamp();
        let [ew, eu, eb] = self.encoder.arrays_mut();
        let [dw, du, db] = self.decoder.arrays_mut();
        let [ow, ob] = self.output.arrays_mut();
        [ew, eu, eb, dw, du, db, ow, ob]
    }

    pub fn num_params(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape {
                op: "set_flat_params",
                lhs: (self.num_params(), 1),
                rhs: (flat.len(), 1),
            });
        }
        let mut off = 0;
        for a in self.arrays_mut() {
            a.copy_from_slice(&flat[off..off + a.len()]);
            off += a.len();
        }
        Ok(())
    }

    fn check_ids(ids: &[usize], vocab: &CharVocab, side: &str) -> Result<()> {
        if let Some((pos, id)) = ids.iter().enumerate().find(|(_, &id)| id >= vocab.len()) {
            return Err(Error::contract(format!(
                "{side} id {id} at position {pos} out of range for vocabulary of size {}",
                vocab.len()
            )));
        }
        Ok(())
    }

    /// Runs the encoder over `src_ids` and returns its final state.
    pub fn encode_source(&self, src_ids: &[usize]) -> Result<(EncoderSummary, EncoderCache)> {
        if src_ids.is_empty() {
            return Err(Error::contract("empty source sequence"));
        }
        Self::check_ids(src_ids, &self.src_vocab, "source")?;
        Ok(self.encode_unchecked(src_ids))
    }

    fn encode_unchecked(&self, src_ids: &[usize]) -> (EncoderSummary, EncoderCache) {
        let mut state = LstmState::zeros(self.hidden());
        let mut steps = Vec::with_capacity(src_ids.len());
        for &id in src_ids {
            let (next, cache) = lstm_step_onehot(&self.encoder, id, &state);
            steps.push(cache);
            state = next;
        }
        (
            EncoderSummary { final_state: state },
            EncoderCache {
                stamp: self.stamp,
                steps,
            },
        )
    }

    /// Teacher-forced negative log-likelihood of `tgt_ids` (plus EOS) given
    /// `src_ids`, summed over the `len(tgt) + 1` prediction steps.
    pub fn teacher_forced_loss(&self, src_ids: &[usize], tgt_ids: &[usize]) -> Result<(f64, ForwardCache)> {
        if tgt_ids.is_empty() {
            return Err(Error::contract("empty target sequence"));
        }
        Self::check_ids(tgt_ids, &self.tgt_vocab, "target")?;
        let (summary, encoder) = self.encode_source(src_ids)?;

        let steps = tgt_ids.len() + 1;
        let mut state = summary.final_state;
        let mut decoder = Vec::with_capacity(steps);
        let mut hidden_states = Vec::with_capacity(steps);
        let mut probs = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps);
        let mut loss = 0.0;
        for t in 0..steps {
            let input = if t == 0 { SOS } else { tgt_ids[t - 1] };
            let target = if t < tgt_ids.len() { tgt_ids[t] } else { EOS };
            let (next, cache) = lstm_step_onehot(&self.decoder, input, &state);
            let mut p = dense_forward(&self.output, &next.h)?;
            softmax_in_place(&mut p);
            loss += capped_neg_log(p[target]);
            decoder.push(cache);
            hidden_states.push(next.h.clone());
            probs.push(p);
            targets.push(target);
            state = next;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite sequence loss {loss}")));
        }
        Ok((
            loss,
            ForwardCache {
                encoder,
                decoder,
                hidden_states,
                probs,
                targets,
            },
        ))
    }

    /// Exact gradients of the summed sequence loss.
    pub fn backward(&self, cache: &ForwardCache) -> Result<ModelGrads> {
        self.backward_scaled(cache, 1.0)
    }

    /// Gradients of `scale × loss`.
    pub fn backward_scaled(&self, cache: &ForwardCache, scale: f64) -> Result<ModelGrads> {
        let mut grads = ModelGrads::zeros_like(self);
        self.backward_into(cache, scale, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients of `scale × loss` into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, scale: f64, grads: &mut ModelGrads) -> Result<()> {
        if cache.encoder.stamp != self.stamp {
            return Err(Error::contract(
                "stale forward cache: parameters changed since the forward pass",
            ));
        }
        if !grads.matches(self) {
            return Err(Error::contract("gradient buffers do not match model dims"));
        }
        let hidden = self.hidden();
        let mut scratch = vec![0.0; 4 * hidden];
        let mut dh = vec![0.0; hidden];
        let mut dc = vec![0.0; hidden];
        let mut dlogits = vec![0.0; self.tgt_vocab.len()];

        for t in (0..cache.decoder.len()).rev() {
            dlogits.copy_from_slice(&cache.probs[t]);
            dlogits[cache.targets[t]] -= 1.0;
            if scale != 1.0 {
                dlogits.iter_mut().for_each(|g| *g *= scale);
            }
            let dh_out = dense_backward(&self.output, &cache.hidden_states[t], &dlogits, &mut grads.output);
            axpy(1.0, &dh_out, &mut dh);
            let prev = lstm_backward_acc(
                &self.decoder,
                &cache.decoder[t],
                &dh,
                &dc,
                &mut grads.decoder,
                None,
                &mut scratch,
            );
            dh = prev.h;
            dc = prev.c;
        }
        for step in cache.encoder.steps.iter().rev() {
            let prev = lstm_backward_acc(&self.encoder, step, &dh, &dc, &mut grads.encoder, None, &mut scratch);
            dh = prev.h;
            dc = prev.c;
        }
        Ok(())
    }

    /// Decodes by feeding back the argmax symbol, stopping at EOS or after
    /// `max_len` symbols. The returned ids exclude SOS and EOS.
    pub fn greedy_decode(&self, src_ids: &[usize], max_len: usize) -> Result<Vec<usize>> {
        if max_len < 1 {
            return Err(Error::contract("max_len must be at least 1"));
        }
        let (summary, _) = self.encode_source(src_ids)?;
        let mut state = summary.final_state;
        let mut input = SOS;
        let mut out = Vec::new();
        while out.len() < max_len {
            let (next, _) = lstm_step_onehot(&self.decoder, input, &state);
            let logits = dense_forward(&self.output, &next.h)?;
            let best = argmax(&logits);
            if best == EOS {
                break;
            }
            out.push(best);
            input = best;
            state = next;
        }
        Ok(out)
    }

    /// Encodes `text` with the source vocabulary, decodes greedily, and
    /// renders the result with the target vocabulary.
    pub fn translate(&self, text: &str, max_len: usize) -> Result<String> {
        let ids = self.src_vocab.encode(text, false, false);
        let out = self.greedy_decode(&ids, max_len)?;
        Ok(self.tgt_vocab.decode(&out))
    }

    /// Count of teacher-forced steps whose argmax equals the gold symbol,
    /// and the total number of steps.
    pub fn teacher_forced_hits(&self, src_ids: &[usize], tgt_ids: &[usize]) -> Result<(usize, usize)> {
        let (_, cache) = self.teacher_forced_loss(src_ids, tgt_ids)?;
        let hits = cache
            .probs
            .iter()
            .zip(&cache.targets)
            .filter(|(p, &t)| argmax(p) == t)
            .count();
        Ok((hits, cache.targets.len()))
    }
}

/// Final encoder state handed to the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSummary {
    pub final_state: LstmState,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    stamp: u64,
    steps: Vec<LstmStepCache>,
}

impl EncoderCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Per-timestep intermediates of a teacher-forced forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    encoder: EncoderCache,
    decoder: Vec<LstmStepCache>,
    hidden_states: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl ForwardCache {
    pub fn source_len(&self) -> usize {
        self.encoder.len()
    }

    /// Number of supervised prediction steps.
    pub fn prediction_steps(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

/// Gradients for every parameter group, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: LstmGrads,
    pub decoder: LstmGrads,
    pub output: DenseGrads,
}

impl ModelGrads {
    pub fn zeros_like(m: &Seq2SeqModel) -> Self {
        ModelGrads {
            encoder: m.encoder.zero_like(),
            decoder: m.decoder.zero_like(),
            output: m.output.zero_like(),
        }
    }

    fn matches(&self, m: &Seq2SeqModel) -> bool {
        self.encoder.w.shape() == m.encoder.w.shape()
            && self.encoder.u.shape() == m.encoder.u.shape()
            && self.decoder.w.shape() == m.decoder.w.shape()
            && self.decoder.u.shape() == m.decoder.u.shape()
            && self.output.w.shape() == m.output.w.shape()
    }

    pub fn fill_zero(&mut self) {
        self.encoder.fill_zero();
        self.decoder.fill_zero();
        self.output.fill_zero();
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.encoder.add_assign(&other.encoder);
        self.decoder.add_assign(&other.decoder);
        self.output.add_assign(&other.output);
    }

    pub fn arrays(&self) -> [&[f64]; NUM_PARAM_ARRAYS] {
        let [ew, eu, eb] = self.encoder.arrays();
        let [dw, du, db] = self.decoder.arrays();
        let [ow, ob] = self.output.arrays();
        [ew, eu, eb, dw, du, db, ow, ob]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; NUM_PARAM_ARRAYS] {
        let [ew, eu, eb] = self.encoder.arrays_mut();
        let [dw, du, db] = self.decoder.arrays_mut();
        let [ow, ob] = self.output.arrays_mut();
        [ew, eu, eb, dw, du, db, ow, ob]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    pub fn global_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|a| a.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{lstm_step, StepInput};
    use crate::numerics::{cross_entropy, grad_check, softmax};
    use rand::Rng;

    fn vocab(n_chars: usize) -> CharVocab {
        CharVocab::from_symbols(('a'..).take(n_chars).collect()).unwrap()
    }

    fn random_ids(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> Vec<usize> {
        (0..len).map(|_| rng.gen_range(0..vocab)).collect()
    }

    #[test]
    fn zero_encoder_gives_zero_summary() {
        let mut m = Seq2SeqModel::new(vocab(3), vocab(3), 4, 1).unwrap();
        let enc = m.encoder_mut();
        enc.fill_zero();
        let (s, _) = m.encode_source(&[4, 5, 6, 4]).unwrap();
        assert_eq!(s.final_state, LstmState::zeros(4));
    }

    #[test]
    fn single_char_summary_is_one_step() {
        let m = Seq2SeqModel::new(vocab(3), vocab(5), 6, 2).unwrap();
        let (s, _) = m.encode_source(&[5]).unwrap();
        let mut x = vec![0.0; m.src_vocab().len()];
        x[5] = 1.0;
        let (direct, _) = lstm_step(m.encoder(), StepInput::Dense(&x), &LstmState::zeros(6)).unwrap();
        for (a, b) in s.final_state.h.iter().zip(&direct.h) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sequences_rejected() {
        let m = Seq2SeqModel::new(vocab(3), vocab(3), 4, 1).unwrap();
        assert!(matches!(m.encode_source(&[]), Err(Error::Contract(_))));
        assert!(m.teacher_forced_loss(&[4], &[]).is_err());
        assert!(m.teacher_forced_loss(&[99], &[4]).is_err());
        assert!(m.greedy_decode(&[4], 0).is_err());
    }

    #[test]
    fn offset_law() {
        let m = Seq2SeqModel::new(vocab(3), vocab(3), 4, 1).unwrap();
        for len in 1..6 {
            let (_, cache) = m.teacher_forced_loss(&[4, 5], &vec![6; len]).unwrap();
            assert_eq!(cache.prediction_steps(), len + 1);
            assert_eq!(*cache.targets().last().unwrap(), EOS);
        }
    }

    #[test]
    fn uniform_output_gives_ln_v_per_symbol() {
        let mut m = Seq2SeqModel::new(vocab(8), vocab(8), 4, 1).unwrap();
        m.output_mut().w.fill(0.0);
        let (loss, cache) = m.teacher_forced_loss(&[4, 5], &[6, 7, 8]).unwrap();
        let per = loss / cache.prediction_steps() as f64;
        assert!((per - (12f64).ln()).abs() < 1e-12);
    }

    /// Recomputes the loss with only the public layer and numeric primitives.
    fn manual_loss(m: &Seq2SeqModel, src: &[usize], tgt: &[usize]) -> f64 {
        let mut s = LstmState::zeros(m.hidden());
        for &id in src {
            let x = m.src_vocab().onehot(&[id]).unwrap();
            s = lstm_step(m.encoder(), StepInput::Dense(x.row(0)), &s).unwrap().0;
        }
        let inputs: Vec<usize> = std::iter::once(SOS).chain(tgt.iter().copied()).collect();
        let targets: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS)).collect();
        let mut total = 0.0;
        for (&i, &t) in inputs.iter().zip(&targets) {
            let x = m.tgt_vocab().onehot(&[i]).unwrap();
            s = lstm_step(m.decoder(), StepInput::Dense(x.row(0)), &s).unwrap().0;
            let p = softmax(&dense_forward(m.output(), &s.h).unwrap()).unwrap();
            total += cross_entropy(&p, t).unwrap();
        }
        total
    }

    #[test]
    fn loss_matches_primitive_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let m = Seq2SeqModel::new(vocab(6), vocab(7), 5, trial).unwrap();
            let (src_len, tgt_len) = (rng.gen_range(1..7), rng.gen_range(1..7));
            let src = random_ids(&mut rng, src_len, m.src_vocab().len());
            let tgt = random_ids(&mut rng, tgt_len, m.tgt_vocab().len());
            let (loss, _) = m.teacher_forced_loss(&src, &tgt).unwrap();
            let manual = manual_loss(&m, &src, &tgt);
            assert!((loss - manual).abs() < 1e-10, "{loss} vs {manual}");
        }
    }

    #[test]
    fn end_to_end_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut m = Seq2SeqModel::new(vocab(8), vocab(8), 8, 3).unwrap();
        let src = random_ids(&mut rng, 5, 12);
        let tgt = random_ids(&mut rng, 4, 12);
        let (_, cache) = m.teacher_forced_loss(&src, &tgt).unwrap();
        let analytic = m.backward(&cache).unwrap().flat();
        let theta = m.flat_params();
        let err = grad_check(
            |t| {
                m.set_flat_params(t).unwrap();
                m.teacher_forced_loss(&src, &tgt).unwrap().0
            },
            &theta,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn encoder_gradients_are_nonzero() {
        let m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        let (_, cache) = m.teacher_forced_loss(&[4, 5, 6], &[7, 8]).unwrap();
        let g = m.backward(&cache).unwrap();
        assert!(g.encoder.u.as_slice().iter().any(|&v| v != 0.0));
        assert!(g.encoder.w.as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_are_linear_in_loss_scale() {
        let m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        let (_, cache) = m.teacher_forced_loss(&[4, 5, 6], &[7, 8]).unwrap();
        let g1 = m.backward(&cache).unwrap().flat();
        let g2 = m.backward_scaled(&cache, 2.0).unwrap().flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        let (_, cache) = m.teacher_forced_loss(&[4, 5], &[7]).unwrap();
        m.decoder_mut().b[0] += 0.1;
        assert!(matches!(m.backward(&cache), Err(Error::Contract(_))));
        let copy = m.clone();
        let (_, cache) = m.teacher_forced_loss(&[4, 5], &[7]).unwrap();
        assert!(copy.backward(&cache).is_err());
    }

    #[test]
    fn decoder_perturbation_leaves_encoder_untouched() {
        let mut m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        let (before, _) = m.encode_source(&[4, 6, 8]).unwrap();
        m.decoder_mut().u.as_mut_slice().iter_mut().for_each(|v| *v += 0.3);
        m.output_mut().b[2] -= 1.0;
        let (after, _) = m.encode_source(&[4, 6, 8]).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn eos_bias_stops_immediately() {
        let mut m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        m.output_mut().b[EOS] = 1e3;
        assert!(m.greedy_decode(&[4, 5], 10).unwrap().is_empty());
    }

    #[test]
    fn decode_respects_cap_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut m = Seq2SeqModel::new(vocab(5), vocab(5), 6, 8).unwrap();
        m.output_mut().b[EOS] = -1e3;
        for _ in 0..20 {
            let src = random_ids(&mut rng, 4, 9);
            let max_len = rng.gen_range(1..12);
            let a = m.greedy_decode(&src, max_len).unwrap();
            assert_eq!(a.len(), max_len);
            assert_eq!(a, m.greedy_decode(&src, max_len).unwrap());
        }
    }
}
