//! LSTM cell and dense output layer with hand-written backward passes.
//!
//! Gate pre-activations are stacked in row blocks of height `H` in the fixed
//! order input, forget, candidate, output. The order is part of the
//! checkpoint format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{axpy, sigmoid, Matrix};

/// Row-block index of each gate inside the stacked `4H` pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub fn block(self, hidden: usize) -> std::ops::Range<usize> {
        let k = self as usize;
        k * hidden..(k + 1) * hidden
    }
}

/// Weights of one LSTM layer. Also used as the gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × D` input weights.
    pub w: Matrix,
    /// `4H × H` recurrent weights.
    pub u: Matrix,
    /// `4H` bias.
    pub b: Vec<f64>,
}

pub type LstmGrads = LstmParams;

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Glorot-uniform weights, zero bias except a forget-gate bias of 1.
    pub fn init(seed: u64, hidden: usize, input: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(&mut rng, hidden, input)
    }

    pub(crate) fn init_with(rng: &mut impl Rng, hidden: usize, input: usize) -> Result<Self> {
        if hidden == 0 || input == 0 {
            return Err(Error::contract(format!(
                "LSTM dims must be positive (hidden {hidden}, input {input})"
            )));
        }
        let mut p = LstmParams::zeros(hidden, input);
        glorot_fill(rng, &mut p.w);
        glorot_fill(rng, &mut p.u);
        p.b[Gate::Forget.block(hidden)].fill(1.0);
        Ok(p)
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.u.cols()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let ok = h > 0
            && self.input_dim() > 0
            && self.u.rows() == 4 * h
            && self.w.rows() == 4 * h
            && self.b.len() == 4 * h;
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "inconsistent LSTM params: W {:?}, U {:?}, b {}",
                self.w.shape(),
                self.u.shape(),
                self.b.len()
            )))
        }
    }

    pub fn zero_like(&self) -> Self {
        LstmParams::zeros(self.hidden(), self.input_dim())
    }

    pub fn fill_zero(&mut self) {
        self.w.fill(0.0);
        self.u.fill(0.0);
        self.b.fill(0.0);
    }

    pub fn add_assign(&mut self, other: &LstmParams) {
        axpy(1.0, other.w.as_slice(), self.w.as_mut_slice());
        axpy(1.0, other.u.as_slice(), self.u.as_mut_slice());
        axpy(1.0, &other.b, &mut self.b);
    }

    pub fn arrays(&self) -> [&[f64]; 3] {
        [self.w.as_slice(), self.u.as_slice(), &self.b]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 3] {
        [self.w.as_mut_slice(), self.u.as_mut_slice(), &mut self.b]
    }
}

fn glorot_fill(rng: &mut impl Rng, m: &mut Matrix) {
    let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    for v in m.as_mut_slice() {
        *v = rng.gen_range(-limit..=limit);
    }
}

/// Hidden and cell state of an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.h.len()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

/// Input to one LSTM step: a dense vector, or a one-hot vector given by its
/// hot index (the character embedding lookup).
#[derive(Debug, Clone, Copy)]
pub enum StepInput<'a> {
    Dense(&'a [f64]),
    OneHot(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum CachedInput {
    Dense(Vec<f64>),
    OneHot(usize),
}

/// Forward intermediates of one step, enough for an exact backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepCache {
    input: CachedInput,
    prev: LstmState,
    /// Activated gates `[i, f, g, o]`, length `4H`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmStepCache {
    pub fn prev(&self) -> &LstmState {
        &self.prev
    }
}

/// One LSTM step: `z = W·x + U·h + b`, `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(
    p: &LstmParams,
    x: StepInput<'_>,
    prev: &LstmState,
) -> Result<(LstmState, LstmStepCache)> {
    let hidden = p.hidden();
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::Shape {
            op: "lstm_step state",
            lhs: p.u.shape(),
            rhs: (prev.h.len(), prev.c.len()),
        });
    }
    let input = match x {
        StepInput::Dense(v) => {
            if v.len() != p.input_dim() {
                return Err(Error::Shape {
                    op: "lstm_step input",
                    lhs: p.w.shape(),
                    rhs: (v.len(), 1),
                });
            }
            CachedInput::Dense(v.to_vec())
        }
        StepInput::OneHot(idx) => {
            if idx >= p.input_dim() {
                return Err(Error::contract(format!(
                    "one-hot index {idx} out of range for input dim {}",
                    p.input_dim()
                )));
            }
            CachedInput::OneHot(idx)
        }
    };
    Ok(step_unchecked(p, input, prev))
}

fn step_unchecked(p: &LstmParams, input: CachedInput, prev: &LstmState) -> (LstmState, LstmStepCache) {
    let hidden = p.hidden();
    let mut z = p.b.clone();
    match &input {
        CachedInput::Dense(v) => p.w.matvec_acc(v, &mut z),
        CachedInput::OneHot(idx) => {
            let d = p.input_dim();
            let w = p.w.as_slice();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += w[r * d + idx];
            }
        }
    }
    p.u.matvec_acc(&prev.h, &mut z);

    let (ifo_head, rest) = z.split_at_mut(2 * hidden);
    for v in ifo_head.iter_mut() {
        *v = sigmoid(*v);
    }
    let (g, o) = rest.split_at_mut(hidden);
    for v in g.iter_mut() {
        *v = v.tanh();
    }
    for v in o.iter_mut() {
        *v = sigmoid(*v);
    }

    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, g, o) = (z[k], z[hidden + k], z[2 * hidden + k], z[3 * hidden + k]);
        c[k] = f * prev.c[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
    let cache = LstmStepCache {
        input,
        prev: prev.clone(),
        gates: z,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

pub(crate) fn lstm_step_onehot(p: &LstmParams, idx: usize, prev: &LstmState) -> (LstmState, LstmStepCache) {
    debug_assert!(idx < p.input_dim());
    step_unchecked(p, CachedInput::OneHot(idx), prev)
}

/// Result of backpropagating through one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepGrads {
    pub params: LstmGrads,
    /// Gradient with respect to the step input (all `D` coordinates, also
    /// for one-hot inputs).
    pub dx: Vec<f64>,
    pub dprev: LstmState,
}

/// Gradients of one forward step given upstream `dL/dh'` and `dL/dc'`.
pub fn lstm_step_backward(
    p: &LstmParams,
    cache: &LstmStepCache,
    dh_next: &[f64],
    dc_next: &[f64],
) -> Result<LstmStepGrads> {
    let hidden = p.hidden();
    if cache.gates.len() != 4 * hidden || cache.prev.h.len() != hidden {
        return Err(Error::contract("LSTM cache does not match parameter dims"));
    }
    if dh_next.len() != hidden || dc_next.len() != hidden {
        return Err(Error::Shape {
            op: "lstm_step_backward",
            lhs: (hidden, hidden),
            rhs: (dh_next.len(), dc_next.len()),
        });
    }
    match &cache.input {
        CachedInput::Dense(v) if v.len() != p.input_dim() => {
            return Err(Error::contract("LSTM cache input does not match parameter dims"))
        }
        CachedInput::OneHot(i) if *i >= p.input_dim() => {
            return Err(Error::contract("LSTM cache input does not match parameter dims"))
        }
        _ => {}
    }
    let mut grads = p.zero_like();
    let mut dx = vec![0.0; p.input_dim()];
    let mut scratch = vec![0.0; 4 * hidden];
    let dprev = lstm_backward_acc(p, cache, dh_next, dc_next, &mut grads, Some(&mut dx), &mut scratch);
    Ok(LstmStepGrads {
        params: grads,
        dx,
        dprev,
    })
}

/// Accumulates parameter gradients into `grads` and returns `dL/dprev`.
/// `scratch` must hold `4H` values.
pub(crate) fn lstm_backward_acc(
    p: &LstmParams,
    cache: &LstmStepCache,
    dh: &[f64],
    dc_next: &[f64],
    grads: &mut LstmGrads,
    dx: Option<&mut [f64]>,
    scratch: &mut [f64],
) -> LstmState {
    let hidden = p.hidden();
    let gates = &cache.gates;
    let dz = &mut scratch[..4 * hidden];
    let mut dprev_c = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, g, o) = (
            gates[k],
            gates[hidden + k],
            gates[2 * hidden + k],
            gates[3 * hidden + k],
        );
        let tc = cache.tanh_c[k];
        let d_o = dh[k] * tc;
        let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
        let d_i = dc * g;
        let d_g = dc * i;
        let d_f = dc * cache.prev.c[k];
        dprev_c[k] = dc * f;
        dz[k] = d_i * i * (1.0 - i);
        dz[hidden + k] = d_f * f * (1.0 - f);
        dz[2 * hidden + k] = d_g * (1.0 - g * g);
        dz[3 * hidden + k] = d_o * o * (1.0 - o);
    }

    axpy(1.0, dz, &mut grads.b);
    grads.u.add_outer(dz, &cache.prev.h);
    match &cache.input {
        CachedInput::Dense(v) => grads.w.add_outer(dz, v),
        CachedInput::OneHot(idx) => {
            let d = grads.w.cols();
            let w = grads.w.as_mut_slice();
            for (r, &g) in dz.iter().enumerate() {
                w[r * d + idx] += g;
            }
        }
    }
    if let Some(dx) = dx {
        dx.fill(0.0);
        p.w.matvec_t_acc(dz, dx);
    }
    let mut dprev_h = vec![0.0; hidden];
    p.u.matvec_t_acc(dz, &mut dprev_h);
    LstmState {
        h: dprev_h,
        c: dprev_c,
    }
}

/// Affine map from decoder hidden state to target-vocabulary logits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `V × H`.
    pub w: Matrix,
    /// `V`.
    pub b: Vec<f64>,
}

pub type DenseGrads = DenseParams;

impl DenseParams {
    pub fn zeros(out: usize, input: usize) -> Self {
        DenseParams {
            w: Matrix::zeros(out, input),
            b: vec![0.0; out],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(seed: u64, out: usize, input: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(&mut rng, out, input)
    }

    pub(crate) fn init_with(rng: &mut impl Rng, out: usize, input: usize) -> Result<Self> {
        if out == 0 || input == 0 {
            return Err(Error::contract(format!(
                "dense dims must be positive (out {out}, input {input})"
            )));
        }
        let mut p = DenseParams::zeros(out, input);
        glorot_fill(rng, &mut p.w);
        Ok(p)
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn zero_like(&self) -> Self {
        DenseParams::zeros(self.out_dim(), self.input_dim())
    }

    pub fn fill_zero(&mut self) {
        self.w.fill(0.0);
        self.b.fill(0.0);
    }

    pub fn add_assign(&mut self, other: &DenseParams) {
        axpy(1.0, other.w.as_slice(), self.w.as_mut_slice());
        axpy(1.0, &other.b, &mut self.b);
    }

    pub fn arrays(&self) -> [&[f64]; 2] {
        [self.w.as_slice(), &self.b]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 2] {
        [self.w.as_mut_slice(), &mut self.b]
    }
}

/// `W·h + b`.
pub fn dense_forward(p: &DenseParams, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != p.input_dim() || p.b.len() != p.out_dim() {
        return Err(Error::Shape {
            op: "dense_forward",
            lhs: p.w.shape(),
            rhs: (h.len(), 1),
        });
    }
    let mut out = p.b.clone();
    p.w.matvec_acc(h, &mut out);
    Ok(out)
}

/// Accumulates `dW`, `db` for upstream `dlogits` and returns `dL/dh`.
pub fn dense_backward(p: &DenseParams, h: &[f64], dlogits: &[f64], grads: &mut DenseGrads) -> Vec<f64> {
    axpy(1.0, dlogits, &mut grads.b);
    grads.w.add_outer(dlogits, h);
    let mut dh = vec![0.0; p.input_dim()];
    p.w.matvec_t_acc(dlogits, &mut dh);
    dh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn random_params(seed: u64, hidden: usize, input: usize, scale: f64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(hidden, input);
        for a in p.arrays_mut() {
            for v in a.iter_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        p
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let p = LstmParams::zeros(3, 2);
        let (next, _) = lstm_step(&p, StepInput::Dense(&[0.7, -2.0]), &LstmState::zeros(3)).unwrap();
        assert_eq!(next, LstmState::zeros(3));
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let p = LstmParams::zeros(1, 1);
        let prev = LstmState {
            h: vec![0.0],
            c: vec![1.0],
        };
        let (next, _) = lstm_step(&p, StepInput::Dense(&[3.0]), &prev).unwrap();
        assert_eq!(next.c, vec![0.5]);
        assert!((next.h[0] - 0.231059).abs() < 1e-6, "{}", next.h[0]);
    }

    #[test]
    fn unit_weights_zero_input() {
        let mut p = LstmParams::zeros(1, 1);
        p.w.fill(1.0);
        p.u.fill(1.0);
        let (next, _) = lstm_step(&p, StepInput::Dense(&[0.0]), &LstmState::zeros(1)).unwrap();
        assert_eq!(next, LstmState::zeros(1));
    }

    #[test]
    fn onehot_matches_dense() {
        let p = random_params(1, 4, 6, 1.0);
        let prev = LstmState {
            h: vec![0.1, -0.2, 0.3, 0.0],
            c: vec![1.0, 0.5, -0.5, 0.2],
        };
        let mut x = vec![0.0; 6];
        x[2] = 1.0;
        let (a, _) = lstm_step(&p, StepInput::Dense(&x), &prev).unwrap();
        let (b, _) = lstm_step(&p, StepInput::OneHot(2), &prev).unwrap();
        for (u, v) in a.h.iter().zip(&b.h).chain(a.c.iter().zip(&b.c)) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(2, 3);
        assert!(lstm_step(&p, StepInput::Dense(&[1.0]), &LstmState::zeros(2)).is_err());
        assert!(lstm_step(&p, StepInput::OneHot(3), &LstmState::zeros(2)).is_err());
        assert!(lstm_step(&p, StepInput::OneHot(0), &LstmState::zeros(3)).is_err());
        assert!(dense_forward(&DenseParams::zeros(2, 3), &[1.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = random_params(2, 3, 2, 1.0);
        let (_, cache) = lstm_step(&p, StepInput::Dense(&[0.3, -0.4]), &LstmState::zeros(3)).unwrap();
        let g = lstm_step_backward(&p, &cache, &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(g.params.arrays().iter().all(|a| a.iter().all(|&v| v == 0.0)));
        assert!(g.dx.iter().all(|&v| v == 0.0));
        assert!(g.dprev.h.iter().chain(&g.dprev.c).all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let p = random_params(2, 3, 2, 1.0);
        let (_, cache) = lstm_step(&p, StepInput::Dense(&[0.3, -0.4]), &LstmState::zeros(3)).unwrap();
        let other = random_params(2, 4, 2, 1.0);
        assert!(lstm_step_backward(&other, &cache, &[0.0; 4], &[0.0; 4]).is_err());
    }

    /// Flattens (W, U, b, x, h0, c0) so one finite-difference sweep covers
    /// every input of a chain of steps.
    struct Problem {
        hidden: usize,
        input: usize,
        steps: usize,
        dh_w: Vec<Vec<f64>>,
        dc_w: Vec<f64>,
    }

    impl Problem {
        fn n_params(&self) -> usize {
            4 * self.hidden * (self.input + self.hidden + 1)
        }

        fn unpack(&self, theta: &[f64]) -> (LstmParams, Vec<Vec<f64>>, LstmState) {
            let (h, d) = (self.hidden, self.input);
            let mut off = 0;
            let mut take = |n: usize| {
                let s = theta[off..off + n].to_vec();
                off += n;
                s
            };
            let w = Matrix::from_vec(4 * h, d, take(4 * h * d)).unwrap();
            let u = Matrix::from_vec(4 * h, h, take(4 * h * h)).unwrap();
            let b = take(4 * h);
            let xs = (0..self.steps).map(|_| take(d)).collect();
            let state = LstmState { h: take(h), c: take(h) };
            (LstmParams { w, u, b }, xs, state)
        }

        // Scalar objective: Σ_t ⟨dh_w[t], h_t⟩ + ⟨dc_w, c_T⟩.
        fn loss(&self, theta: &[f64]) -> f64 {
            let (p, xs, mut s) = self.unpack(theta);
            let mut total = 0.0;
            for (t, x) in xs.iter().enumerate() {
                s = lstm_step(&p, StepInput::Dense(x), &s).unwrap().0;
                total += s.h.iter().zip(&self.dh_w[t]).map(|(a, b)| a * b).sum::<f64>();
            }
            total + s.c.iter().zip(&self.dc_w).map(|(a, b)| a * b).sum::<f64>()
        }

        fn analytic(&self, theta: &[f64]) -> Vec<f64> {
            let (p, xs, s0) = self.unpack(theta);
            let mut caches = Vec::new();
            let mut s = s0;
            for x in &xs {
                let (n, c) = lstm_step(&p, StepInput::Dense(x), &s).unwrap();
                caches.push(c);
                s = n;
            }
            let mut grads = p.zero_like();
            let mut dxs = vec![Vec::new(); self.steps];
            let mut dh = vec![0.0; self.hidden];
            let mut dc = self.dc_w.clone();
            for t in (0..self.steps).rev() {
                for (a, b) in dh.iter_mut().zip(&self.dh_w[t]) {
                    *a += b;
                }
                let g = lstm_step_backward(&p, &caches[t], &dh, &dc).unwrap();
                grads.add_assign(&g.params);
                dxs[t] = g.dx;
                dh = g.dprev.h;
                dc = g.dprev.c;
            }
            let mut out = Vec::with_capacity(theta.len());
            for a in grads.arrays() {
                out.extend_from_slice(a);
            }
            for dx in dxs {
                out.extend(dx);
            }
            out.extend(dh);
            out.extend(dc);
            out
        }
    }

    fn check_chain(seed: u64, hidden: usize, input: usize, steps: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = Problem {
            hidden,
            input,
            steps,
            dh_w: (0..steps).map(|_| random_vec(&mut rng, hidden, 1.0)).collect(),
            dc_w: random_vec(&mut rng, hidden, 1.0),
        };
        let n = prob.n_params() + steps * input + 2 * hidden;
        let theta = random_vec(&mut rng, n, 1.0);
        let analytic = prob.analytic(&theta);
        grad_check(|t| prob.loss(t), &theta, &analytic, 1e-5).unwrap()
    }

    #[test]
    fn single_step_gradient_check() {
        let err = check_chain(7, 4, 6, 1);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn two_step_bptt_gradient_check() {
        let err = check_chain(8, 4, 6, 2);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradient_check_over_random_configurations() {
        let mut worst = 0.0f64;
        let mut seed = 100;
        for &hidden in &[1, 4, 8] {
            for &input in &[1, 3, 12] {
                for _ in 0..11 {
                    seed += 1;
                    worst = worst.max(check_chain(seed, hidden, input, 1 + (seed as usize % 3)));
                }
            }
        }
        // 9 shapes × 11 draws covers the 100-configuration sweep (99) plus one
        worst = worst.max(check_chain(999, 8, 12, 3));
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn dense_examples() {
        let p = DenseParams {
            w: Matrix::identity(3),
            b: vec![0.0; 3],
        };
        assert_eq!(dense_forward(&p, &[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
        let p = DenseParams {
            w: Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(),
            b: vec![1.0, 1.0],
        };
        assert_eq!(dense_forward(&p, &[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(dense_forward(&p, &[1.0, 1.0]).unwrap(), vec![4.0, 8.0]);
    }

    #[test]
    fn dense_backward_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (v, h) = (5, 4);
        let up = random_vec(&mut rng, v, 1.0);
        let theta = random_vec(&mut rng, v * h + v + h, 1.0);
        let unpack = |t: &[f64]| {
            let p = DenseParams {
                w: Matrix::from_vec(v, h, t[..v * h].to_vec()).unwrap(),
                b: t[v * h..v * h + v].to_vec(),
            };
            (p, t[v * h + v..].to_vec())
        };
        let f = |t: &[f64]| {
            let (p, x) = unpack(t);
            dense_forward(&p, &x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let (p, x) = unpack(&theta);
        let mut g = p.zero_like();
        let dh = dense_backward(&p, &x, &up, &mut g);
        let mut analytic = g.w.into_vec();
        analytic.extend(g.b);
        analytic.extend(dh);
        assert!(grad_check(f, &theta, &analytic, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn init_is_deterministic_with_forget_bias() {
        let a = LstmParams::init(42, 8, 5).unwrap();
        let b = LstmParams::init(42, 8, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, LstmParams::init(43, 8, 5).unwrap());
        for (k, &v) in a.b.iter().enumerate() {
            let expected = if Gate::Forget.block(8).contains(&k) { 1.0 } else { 0.0 };
            assert_eq!(v, expected);
        }
        assert!(DenseParams::init(1, 3, 8).unwrap().b.iter().all(|&v| v == 0.0));
        assert!(LstmParams::init(1, 0, 3).is_err());
    }

    #[test]
    fn init_weights_follow_glorot_uniform() {
        // 4H×D with H=25, D=100: W alone holds 10⁴ draws.
        let p = LstmParams::init(9, 25, 100).unwrap();
        let w = p.w.as_slice();
        assert_eq!(w.len(), 10_000);
        let limit = (6.0f64 / (100.0 + 100.0)).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        // uniform(−a, a) has σ = a/√3
        let stderr = limit / 3f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * stderr, "mean {mean}, 3·se {}", 3.0 * stderr);
    }

    #[test]
    fn bounded_outputs_for_bounded_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let hidden = rng.gen_range(1..6);
            let input = rng.gen_range(1..6);
            let p = random_params(rng.gen(), hidden, input, 10.0);
            let x = random_vec(&mut rng, input, 10.0);
            let prev = LstmState {
                h: random_vec(&mut rng, hidden, 1.0),
                c: random_vec(&mut rng, hidden, 10.0),
            };
            let (next, _) = lstm_step(&p, StepInput::Dense(&x), &prev).unwrap();
            for k in 0..hidden {
                // tanh rounds to exactly ±1 in f64 once |c| passes ~19
                if next.c[k].abs() < 15.0 {
                    assert!(next.h[k].abs() < 1.0);
                } else {
                    assert!(next.h[k].abs() <= 1.0);
                }
                assert!(next.c[k].abs() <= prev.c[k].abs() + 1.0);
            }
        }
    }
}
