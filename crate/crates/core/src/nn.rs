//! Minimal neural building blocks: linear layers, a feedforward scorer, a
//! bidirectional recurrent encoder, softmax/cross-entropy, and Adam.
//!
//! Everything is written with explicit forward caches and hand-derived
//! backward passes; the unit tests check every gradient against central
//! finite differences.

use serde::{Deserialize, Serialize};

use crate::num::{sc, Scalar};
use crate::rng::Rng;

// ── linear layer ───────────────────────────────────────────────────────────

/// Dense layer, weights row-major `w[out * in_dim + in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<S: Scalar> Linear<S> {
    /// Glorot-uniform initialization.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.uniform_in::<S>(-limit, limit))
            .collect();
        Linear {
            w,
            b: vec![S::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            w: vec![S::zero(); in_dim * out_dim],
            b: vec![S::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            out[o] = out[o] + crate::num::dot(row, x);
        }
        out
    }

    /// Accumulates dW/db into `grad` and, when requested, adds the input
    /// gradient into `dx`.
    pub fn backward(&self, x: &[S], dy: &[S], grad: &mut Linear<S>, dx: Option<&mut [S]>) {
        debug_assert_eq!(dy.len(), self.out_dim);
        for o in 0..self.out_dim {
            let g = dy[o];
            grad.b[o] = grad.b[o] + g;
            let row = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (gw, &xi) in row.iter_mut().zip(x.iter()) {
                *gw = *gw + g * xi;
            }
        }
        if let Some(dx) = dx {
            for o in 0..self.out_dim {
                let g = dy[o];
                let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (d, &wv) in dx.iter_mut().zip(row.iter()) {
                    *d = *d + g * wv;
                }
            }
        }
    }

    fn param_slices_mut(&mut self) -> [&mut Vec<S>; 2] {
        [&mut self.w, &mut self.b]
    }
}

// ── feedforward scorer ─────────────────────────────────────────────────────

/// Feedforward network with tanh on all but the last layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<S> {
    pub layers: Vec<Linear<S>>,
}

pub struct MlpCache<S> {
    /// inputs[i] is the input to layer i; inputs[L] is the final output.
    inputs: Vec<Vec<S>>,
}

impl<S: Scalar> Mlp<S> {
    /// `dims = [in, hidden…, out]`.
    pub fn init(dims: &[usize], rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn grad_shape(&self) -> Mlp<S> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, x: &[S]) -> (Vec<S>, MlpCache<S>) {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(inputs.last().unwrap());
            if i != last {
                for v in y.iter_mut() {
                    *v = v.tanh();
                }
            }
            inputs.push(y);
        }
        (inputs.last().unwrap().clone(), MlpCache { inputs })
    }

    /// Backpropagates `dy` (gradient at the output), accumulating parameter
    /// gradients into `grads`; returns the gradient at the input.
    pub fn backward(&self, cache: &MlpCache<S>, dy: &[S], grads: &mut Mlp<S>) -> Vec<S> {
        let last = self.layers.len() - 1;
        let mut dcur = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                // cache.inputs[i + 1] holds tanh activations of layer i
                let act = &cache.inputs[i + 1];
                for (d, &a) in dcur.iter_mut().zip(act.iter()) {
                    *d = *d * (S::one() - a * a);
                }
            }
            let mut dx = vec![S::zero(); self.layers[i].in_dim];
            self.layers[i].backward(&cache.inputs[i], &dcur, &mut grads.layers[i], Some(&mut dx));
            dcur = dx;
        }
        dcur
    }
}

// ── bidirectional recurrent encoder ────────────────────────────────────────

/// Elman-style tanh RNN run in both directions; the per-token code is the
/// concatenation `[h_fwd_t ; h_bwd_t]` of size `2 * hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiRnn<S> {
    pub wx_f: Linear<S>,
    pub wh_f: Linear<S>,
    pub wx_b: Linear<S>,
    pub wh_b: Linear<S>,
    pub hidden: usize,
    pub input: usize,
}

pub struct BiRnnCache<S> {
    pub hf: Vec<Vec<S>>,
    pub hb: Vec<Vec<S>>,
}

impl<S: Scalar> BiRnn<S> {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiRnn {
            wx_f: Linear::init(input, hidden, rng),
            wh_f: Linear::init(hidden, hidden, rng),
            wx_b: Linear::init(input, hidden, rng),
            wh_b: Linear::init(hidden, hidden, rng),
            hidden,
            input,
        }
    }

    pub fn grad_shape(&self) -> BiRnn<S> {
        BiRnn {
            wx_f: Linear::zeros(self.input, self.hidden),
            wh_f: Linear::zeros(self.hidden, self.hidden),
            wx_b: Linear::zeros(self.input, self.hidden),
            wh_b: Linear::zeros(self.hidden, self.hidden),
            hidden: self.hidden,
            input: self.input,
        }
    }

    pub fn forward(&self, xs: &[Vec<S>]) -> BiRnnCache<S> {
        let n = xs.len();
        let mut hf = Vec::with_capacity(n);
        let mut prev = vec![S::zero(); self.hidden];
        for x in xs {
            let mut a = self.wx_f.forward(x);
            let rec = self.wh_f.forward(&prev);
            for (av, rv) in a.iter_mut().zip(rec) {
                *av = (*av + rv).tanh();
            }
            hf.push(a.clone());
            prev = a;
        }
        let mut hb = vec![Vec::new(); n];
        let mut next = vec![S::zero(); self.hidden];
        for t in (0..n).rev() {
            let mut a = self.wx_b.forward(&xs[t]);
            let rec = self.wh_b.forward(&next);
            for (av, rv) in a.iter_mut().zip(rec) {
                *av = (*av + rv).tanh();
            }
            hb[t] = a.clone();
            next = a;
        }
        BiRnnCache { hf, hb }
    }

    pub fn code(&self, cache: &BiRnnCache<S>, t: usize) -> Vec<S> {
        let mut v = cache.hf[t].clone();
        v.extend_from_slice(&cache.hb[t]);
        v
    }

    /// BPTT given gradients on the concatenated per-token codes.
    pub fn backward(
        &self,
        xs: &[Vec<S>],
        cache: &BiRnnCache<S>,
        dcodes: &[Vec<S>],
        grads: &mut BiRnn<S>,
    ) {
        let n = xs.len();
        let h = self.hidden;
        // forward direction: walk time backwards
        let mut carry = vec![S::zero(); h];
        for t in (0..n).rev() {
            let mut dh: Vec<S> = dcodes[t][..h].to_vec();
            for (d, c) in dh.iter_mut().zip(carry.iter()) {
                *d = *d + *c;
            }
            let act = &cache.hf[t];
            let da: Vec<S> = dh
                .iter()
                .zip(act.iter())
                .map(|(&d, &a)| d * (S::one() - a * a))
                .collect();
            self.wx_f.backward(&xs[t], &da, &mut grads.wx_f, None);
            let prev = if t == 0 {
                vec![S::zero(); h]
            } else {
                cache.hf[t - 1].clone()
            };
            let mut dprev = vec![S::zero(); h];
            self.wh_f
                .backward(&prev, &da, &mut grads.wh_f, Some(&mut dprev));
            carry = dprev;
        }
        // backward direction: walk time forwards
        let mut carry = vec![S::zero(); h];
        for t in 0..n {
            let mut dh: Vec<S> = dcodes[t][h..].to_vec();
            for (d, c) in dh.iter_mut().zip(carry.iter()) {
                *d = *d + *c;
            }
            let act = &cache.hb[t];
            let da: Vec<S> = dh
                .iter()
                .zip(act.iter())
                .map(|(&d, &a)| d * (S::one() - a * a))
                .collect();
            self.wx_b.backward(&xs[t], &da, &mut grads.wx_b, None);
            let next = if t + 1 == n {
                vec![S::zero(); h]
            } else {
                cache.hb[t + 1].clone()
            };
            let mut dnext = vec![S::zero(); h];
            self.wh_b
                .backward(&next, &da, &mut grads.wh_b, Some(&mut dnext));
            carry = dnext;
        }
    }
}

// ── softmax / losses ───────────────────────────────────────────────────────

pub fn softmax<S: Scalar>(xs: &[S]) -> Vec<S> {
    let max = xs.iter().cloned().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: S = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a softmax over `logits` against `target`; returns the
/// loss and the gradient at the logits (`p - onehot`).
pub fn cross_entropy_logits<S: Scalar>(logits: &[S], target: usize) -> (S, Vec<S>) {
    let probs = softmax(logits);
    let eps = sc::<S>(1e-12);
    let loss = -(probs[target] + eps).ln();
    let mut dlogits = probs;
    dlogits[target] = dlogits[target] - S::one();
    (loss, dlogits)
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

// ── Adam ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second-moment state for one parameter block.
#[derive(Debug, Clone)]
pub struct AdamBlock<S> {
    m: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> AdamBlock<S> {
    pub fn new(n: usize) -> Self {
        AdamBlock {
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
        }
    }

    /// One Adam step; `t` is 1-based. Clears `grads` afterwards.
    pub fn step(&mut self, t: u64, hp: &AdamParams, params: &mut [S], grads: &mut [S]) {
        let b1 = sc::<S>(hp.beta1);
        let b2 = sc::<S>(hp.beta2);
        let lr = sc::<S>(hp.lr);
        let eps = sc::<S>(hp.eps);
        let corr1 = S::one() - sc::<S>(hp.beta1.powi(t as i32));
        let corr2 = S::one() - sc::<S>(hp.beta2.powi(t as i32));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter_mut())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (S::one() - b1) * *g;
            *v = b2 * *v + (S::one() - b2) * *g * *g;
            let mhat = *m / corr1;
            let vhat = *v / corr2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
            *g = S::zero();
        }
    }
}

/// Adam over the two blocks of one Linear layer.
#[derive(Debug, Clone)]
pub struct LinearAdam<S> {
    blocks: [AdamBlock<S>; 2],
}

impl<S: Scalar> LinearAdam<S> {
    pub fn new(layer: &Linear<S>) -> Self {
        LinearAdam {
            blocks: [
                AdamBlock::new(layer.w.len()),
                AdamBlock::new(layer.b.len()),
            ],
        }
    }

    pub fn step(&mut self, t: u64, hp: &AdamParams, layer: &mut Linear<S>, grads: &mut Linear<S>) {
        let params = layer.param_slices_mut();
        let gslices = grads.param_slices_mut();
        for ((block, p), g) in self.blocks.iter_mut().zip(params).zip(gslices) {
            block.step(t, hp, p, g);
        }
    }
}

/// Adam over all layers of an Mlp.
#[derive(Debug, Clone)]
pub struct MlpAdam<S> {
    layers: Vec<LinearAdam<S>>,
}

impl<S: Scalar> MlpAdam<S> {
    pub fn new(mlp: &Mlp<S>) -> Self {
        MlpAdam {
            layers: mlp.layers.iter().map(LinearAdam::new).collect(),
        }
    }

    pub fn step(&mut self, t: u64, hp: &AdamParams, mlp: &mut Mlp<S>, grads: &mut Mlp<S>) {
        for ((opt, layer), grad) in self
            .layers
            .iter_mut()
            .zip(mlp.layers.iter_mut())
            .zip(grads.layers.iter_mut())
        {
            opt.step(t, hp, layer, grad);
        }
    }
}

/// Adam over the four blocks of a BiRnn.
#[derive(Debug, Clone)]
pub struct BiRnnAdam<S> {
    wx_f: LinearAdam<S>,
    wh_f: LinearAdam<S>,
    wx_b: LinearAdam<S>,
    wh_b: LinearAdam<S>,
}

impl<S: Scalar> BiRnnAdam<S> {
    pub fn new(rnn: &BiRnn<S>) -> Self {
        BiRnnAdam {
            wx_f: LinearAdam::new(&rnn.wx_f),
            wh_f: LinearAdam::new(&rnn.wh_f),
            wx_b: LinearAdam::new(&rnn.wx_b),
            wh_b: LinearAdam::new(&rnn.wh_b),
        }
    }

    pub fn step(&mut self, t: u64, hp: &AdamParams, rnn: &mut BiRnn<S>, grads: &mut BiRnn<S>) {
        self.wx_f.step(t, hp, &mut rnn.wx_f, &mut grads.wx_f);
        self.wh_f.step(t, hp, &mut rnn.wh_f, &mut grads.wh_f);
        self.wx_b.step(t, hp, &mut rnn.wx_b, &mut grads.wx_b);
        self.wh_b.step(t, hp, &mut rnn.wh_b, &mut grads.wh_b);
    }
}
