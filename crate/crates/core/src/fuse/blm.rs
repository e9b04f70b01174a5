//! The blank language model: given the concrete words adjoining a blank, it
//! scores fill words and left/right spawn decisions.
//!
//! Training samples gaps from complete sentences and learns to reconstruct
//! the gap's first word plus whether more of the gap remains to the right
//! (the canonical left-to-right fill order). The scorer is
//! `hidden = tanh(W_l e(left) + W_r e(right))`, with a word softmax and two
//! spawn logits on top; embeddings are learned jointly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy_logits, sigmoid, softmax, AdamParams, Linear, LinearAdam,
};
use crate::num::{sc, Scalar};
use crate::rng::Rng;
use crate::text::lower_tokens;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
const SPECIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankLm<S> {
    pub vocab: Vec<String>,
    pub emb: Vec<Vec<S>>,
    pub w_left: Linear<S>,
    pub w_right: Linear<S>,
    pub u_word: Linear<S>,
    pub u_spawn: Linear<S>,
    pub dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlmConfig {
    pub dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
    /// Minimum training corpus size; lower it explicitly for overfit
    /// sanity checks.
    pub min_sentences: usize,
    pub max_gap: usize,
}

impl Default for BlmConfig {
    fn default() -> Self {
        BlmConfig {
            dim: 32,
            hidden: 64,
            lr: 0.01,
            epochs: 60,
            seed: 42,
            holdout_fraction: 0.2,
            min_sentences: 100,
            max_gap: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlmReport {
    pub holdout_perplexity: f64,
    pub unigram_perplexity: f64,
    pub train_sentences: usize,
    pub vocab_size: usize,
}

impl<S: Scalar> BlankLm<S> {
    fn word_id(&self, word: &str) -> usize {
        self.vocab
            .iter()
            .position(|w| w == word)
            .unwrap_or(UNK_ID)
    }

    fn hidden_state(&self, left: Option<&str>, right: Option<&str>) -> Vec<S> {
        let li = left.map_or(BOS_ID, |w| self.word_id(&w.to_lowercase()));
        let ri = right.map_or(EOS_ID, |w| self.word_id(&w.to_lowercase()));
        let mut h = self.w_left.forward(&self.emb[li]);
        let hr = self.w_right.forward(&self.emb[ri]);
        for (a, b) in h.iter_mut().zip(hr) {
            *a = (*a + b).tanh();
        }
        h
    }

    /// Log-probabilities of fill words for a blank with the given concrete
    /// neighbors. `allowed = None` scores the full vocabulary (specials
    /// excluded); otherwise only the allowed words, renormalized over the
    /// full softmax (scores stay comparable across blanks).
    pub fn score_blank(
        &self,
        left: Option<&str>,
        right: Option<&str>,
        allowed: Option<&[String]>,
    ) -> Vec<(String, S)> {
        let h = self.hidden_state(left, right);
        let logits = self.u_word.forward(&h);
        let logp: Vec<S> = {
            let probs = softmax(&logits);
            probs.iter().map(|&p| (p + sc::<S>(1e-12)).ln()).collect()
        };
        match allowed {
            Some(words) => words
                .iter()
                .map(|w| {
                    let id = self.word_id(&w.to_lowercase());
                    (w.clone(), logp[id])
                })
                .collect(),
            None => self
                .vocab
                .iter()
                .enumerate()
                .skip(SPECIALS)
                .map(|(i, w)| (w.clone(), logp[i]))
                .collect(),
        }
    }

    /// (P(spawn_left), P(spawn_right)) for a blank with these neighbors.
    pub fn spawn_probs(&self, left: Option<&str>, right: Option<&str>) -> (S, S) {
        let h = self.hidden_state(left, right);
        let logits = self.u_spawn.forward(&h);
        (sigmoid(logits[0]), sigmoid(logits[1]))
    }
}

const BOS_ID: usize = 0;
const EOS_ID: usize = 1;
const UNK_ID: usize = 2;

struct GapExample {
    left: usize,
    right: usize,
    target: usize,
    spawn_right: bool,
}

fn sentence_gaps(tokens: &[usize], rng: &mut Rng, max_gap: usize) -> Option<GapExample> {
    let n = tokens.len();
    if n == 0 {
        return None;
    }
    let start = rng.index(n);
    let max_len = max_gap.min(n - start);
    let len = 1 + rng.index(max_len);
    Some(GapExample {
        left: if start == 0 { BOS_ID } else { tokens[start - 1] },
        right: if start + len >= n { EOS_ID } else { tokens[start + len] },
        target: tokens[start],
        spawn_right: len > 1,
    })
}

/// Train on complete sentences by reconstructing sampled gaps. Deterministic
/// under the seed; reports held-out reconstruction perplexity next to a
/// unigram baseline.
pub fn train_blank_lm<S: Scalar>(
    sentences: &[String],
    config: &BlmConfig,
) -> Result<(BlankLm<S>, BlmReport)> {
    if sentences.len() < config.min_sentences {
        return Err(Error::Training(format!(
            "blank LM corpus too small: {} sentences < minimum {}",
            sentences.len(),
            config.min_sentences
        )));
    }
    // vocabulary: specials + sorted corpus words
    let mut words: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for s in sentences {
        words.extend(lower_tokens(s));
    }
    let mut vocab: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
    vocab.extend(words);
    let index: std::collections::BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let tokenized: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| lower_tokens(s).iter().map(|w| index[w.as_str()]).collect())
        .collect();

    let mut rng = Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    rng.shuffle(&mut order);
    let n_holdout = ((sentences.len() as f64 * config.holdout_fraction) as usize)
        .max(1)
        .min(sentences.len() - 1);
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    let scale = 1.0 / (config.dim as f64).sqrt();
    let emb: Vec<Vec<S>> = (0..vocab.len())
        .map(|_| {
            (0..config.dim)
                .map(|_| rng.uniform_in::<S>(-scale, scale))
                .collect()
        })
        .collect();
    let w_left = Linear::init(config.dim, config.hidden, &mut rng);
    let w_right = Linear::init(config.dim, config.hidden, &mut rng);
    let u_word = Linear::init(config.hidden, vocab.len(), &mut rng);
    let u_spawn = Linear::init(config.hidden, 2, &mut rng);
    let mut model = BlankLm {
        vocab,
        emb,
        w_left,
        w_right,
        u_word,
        u_spawn,
        dim: config.dim,
        hidden: config.hidden,
    };

    let hp = AdamParams::with_lr(config.lr);
    let mut g_wl = Linear::zeros(config.dim, config.hidden);
    let mut g_wr = Linear::zeros(config.dim, config.hidden);
    let mut g_uw = Linear::zeros(config.hidden, model.vocab.len());
    let mut g_us = Linear::zeros(config.hidden, 2);
    let mut opt_wl = LinearAdam::new(&model.w_left);
    let mut opt_wr = LinearAdam::new(&model.w_right);
    let mut opt_uw = LinearAdam::new(&model.u_word);
    let mut opt_us = LinearAdam::new(&model.u_spawn);
    // embedding rows get plain SGD steps (sparse; two rows per example)
    let emb_lr = sc::<S>(config.lr);
    let mut step = 0u64;

    for _epoch in 0..config.epochs {
        for &si in train_idx {
            let Some(gap) = sentence_gaps(&tokenized[si], &mut rng, config.max_gap) else {
                continue;
            };
            // forward
            let e_left = model.emb[gap.left].clone();
            let e_right = model.emb[gap.right].clone();
            let a_l = model.w_left.forward(&e_left);
            let a_r = model.w_right.forward(&e_right);
            let h: Vec<S> = a_l
                .iter()
                .zip(&a_r)
                .map(|(&x, &y)| (x + y).tanh())
                .collect();
            let word_logits = model.u_word.forward(&h);
            let (word_loss, dword_logits) = cross_entropy_logits(&word_logits, gap.target);
            let spawn_logits = model.u_spawn.forward(&h);
            // spawn_left is always false in the canonical fill order
            let targets = [S::zero(), if gap.spawn_right { S::one() } else { S::zero() }];
            let mut spawn_loss = S::zero();
            let mut dspawn = [S::zero(); 2];
            for k in 0..2 {
                let p = sigmoid(spawn_logits[k]);
                let eps = sc::<S>(1e-12);
                spawn_loss = spawn_loss
                    - (targets[k] * (p + eps).ln()
                        + (S::one() - targets[k]) * (S::one() - p + eps).ln());
                dspawn[k] = p - targets[k];
            }
            let total = word_loss + spawn_loss;
            if !total.is_finite() {
                return Err(Error::Training("blank LM loss diverged".into()));
            }

            // backward
            let mut dh = vec![S::zero(); config.hidden];
            model.u_word.backward(&h, &dword_logits, &mut g_uw, Some(&mut dh));
            model.u_spawn.backward(&h, &dspawn, &mut g_us, Some(&mut dh));
            let da: Vec<S> = dh
                .iter()
                .zip(&h)
                .map(|(&d, &hv)| d * (S::one() - hv * hv))
                .collect();
            let mut de_left = vec![S::zero(); config.dim];
            let mut de_right = vec![S::zero(); config.dim];
            model
                .w_left
                .backward(&e_left, &da, &mut g_wl, Some(&mut de_left));
            model
                .w_right
                .backward(&e_right, &da, &mut g_wr, Some(&mut de_right));

            step += 1;
            opt_wl.step(step, &hp, &mut model.w_left, &mut g_wl);
            opt_wr.step(step, &hp, &mut model.w_right, &mut g_wr);
            opt_uw.step(step, &hp, &mut model.u_word, &mut g_uw);
            opt_us.step(step, &hp, &mut model.u_spawn, &mut g_us);
            for (e, d) in model.emb[gap.left].iter_mut().zip(&de_left) {
                *e = *e - emb_lr * *d;
            }
            for (e, d) in model.emb[gap.right].iter_mut().zip(&de_right) {
                *e = *e - emb_lr * *d;
            }
        }
    }

    // held-out reconstruction perplexity over every single-word gap,
    // against an add-one-smoothed unigram baseline fit on the train split
    let mut unigram = vec![1.0f64; model.vocab.len()];
    let mut unigram_total = model.vocab.len() as f64;
    for &si in train_idx {
        for &w in &tokenized[si] {
            unigram[w] += 1.0;
            unigram_total += 1.0;
        }
    }
    let mut ce_sum = 0.0f64;
    let mut uni_sum = 0.0f64;
    let mut count = 0usize;
    for &si in holdout_idx {
        let toks = &tokenized[si];
        for i in 0..toks.len() {
            let left = if i == 0 { BOS_ID } else { toks[i - 1] };
            let right = if i + 1 >= toks.len() { EOS_ID } else { toks[i + 1] };
            let h = {
                let mut a = model.w_left.forward(&model.emb[left]);
                let b = model.w_right.forward(&model.emb[right]);
                for (x, y) in a.iter_mut().zip(b) {
                    *x = (*x + y).tanh();
                }
                a
            };
            let probs = softmax(&model.u_word.forward(&h));
            ce_sum -= (probs[toks[i]].to_f64().unwrap() + 1e-12).ln();
            uni_sum -= (unigram[toks[i]] / unigram_total).ln();
            count += 1;
        }
    }
    let report = BlmReport {
        holdout_perplexity: (ce_sum / count.max(1) as f64).exp(),
        unigram_perplexity: (uni_sum / count.max(1) as f64).exp(),
        train_sentences: train_idx.len(),
        vocab_size: model.vocab.len(),
    };
    Ok((model, report))
}

/// Fraction of single-token gaps in `sentences` whose argmax reconstruction
/// is exact (used by overfit sanity checks).
pub fn reconstruction_accuracy<S: Scalar>(model: &BlankLm<S>, sentences: &[String]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in sentences {
        let toks = lower_tokens(s);
        for i in 0..toks.len() {
            let left = if i == 0 { None } else { Some(toks[i - 1].as_str()) };
            let right = if i + 1 >= toks.len() {
                None
            } else {
                Some(toks[i + 1].as_str())
            };
            let scored = model.score_blank(left, right, None);
            let best = scored
                .iter()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(w, _)| w.clone())
                .unwrap();
            if best == toks[i] {
                correct += 1;
            }
            total += 1;
        }
    }
    correct as f64 / total.max(1) as f64
}
