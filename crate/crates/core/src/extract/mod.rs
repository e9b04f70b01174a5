//! Rationale span extraction: for each (sentence, tuple), select the minimal
//! token subset that preserves relation predictability.
//!
//! The token scorer is a bidirectional recurrent encoder over word
//! embeddings plus entity-indicator features; the relation predictor is a
//! linear softmax over the mean embedding of the selected tokens. Training
//! minimizes the three-term loss (relation cross-entropy, sparsity +
//! coherence, anchor distance + entity coverage) with score-function
//! gradients over sampled binary masks and a moving-average baseline.

mod anchor;

pub use anchor::{anchor_token_range, verb_phrase_anchor, LexiconVerbTagger, VerbTagger};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, EntityType, Relation, RelationTuple, ScientificAbstract, Split};
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy_logits, sigmoid, AdamParams, BiRnn, BiRnnAdam, Linear, LinearAdam,
};
use crate::num::{sc, Scalar};
use crate::rng::Rng;
use crate::text::{tokenize, tokens_overlapping, Token};

// ── masks and loss weights ─────────────────────────────────────────────────

/// Binary rationale mask over sentence tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationaleMask {
    pub bits: Vec<bool>,
}

impl RationaleMask {
    pub fn empty(len: usize) -> Self {
        RationaleMask {
            bits: vec![false; len],
        }
    }

    pub fn full(len: usize) -> Self {
        RationaleMask {
            bits: vec![true; len],
        }
    }

    pub fn from_range(len: usize, range: Range<usize>) -> Self {
        let mut bits = vec![false; len];
        for b in &mut bits[range] {
            *b = true;
        }
        RationaleMask { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Sum of |z_t - z_{t-1}| with zero-padded boundaries; equals twice the
    /// number of contiguous selected blocks.
    pub fn discontinuities(&self) -> usize {
        let mut prev = false;
        let mut transitions = 0usize;
        for &b in &self.bits {
            if b != prev {
                transitions += 1;
            }
            prev = b;
        }
        if prev {
            transitions += 1;
        }
        transitions
    }

    /// Intersection-over-union with a token range.
    pub fn iou_with_range<S: Scalar>(&self, range: &Range<usize>) -> S {
        let inter = self
            .bits
            .iter()
            .enumerate()
            .filter(|(i, &b)| b && range.contains(i))
            .count();
        let union = self.count() + range.len() - inter;
        if union == 0 {
            S::zero()
        } else {
            sc::<S>(inter as f64) / sc::<S>(union as f64)
        }
    }

    pub fn covers_any(&self, indices: &[usize]) -> bool {
        indices.iter().any(|&i| self.bits.get(i).copied().unwrap_or(false))
    }
}

/// Weights of the three regularization pieces: sparsity (`len`), coherence
/// (`disc`), and anchor distance (`anchor`). The entity-coverage penalty of
/// 1.0 per fully unselected entity is fixed, not weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionLossWeights<S> {
    pub len: S,
    pub disc: S,
    pub anchor: S,
}

impl<S: Scalar> Default for ExtractionLossWeights<S> {
    fn default() -> Self {
        ExtractionLossWeights {
            len: sc(0.1),
            disc: sc(0.2),
            anchor: sc(1.0),
        }
    }
}

pub const ENTITY_COVERAGE_PENALTY: f64 = 1.0;

// ── text spans ─────────────────────────────────────────────────────────────

/// A rationale span distilled from one (sentence, tuple) pair. `token_indices`
/// are the selected token positions; the text is their concatenation in
/// source order (selected tokens need not be contiguous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSpan<S> {
    pub text: String,
    pub doc_id: String,
    pub sentence_index: usize,
    pub token_indices: Vec<usize>,
    pub tuple: RelationTuple,
    /// Filled by the selection module.
    pub embedding: Option<Vec<S>>,
    pub anchor_fallback: bool,
}

impl<S: Scalar> TextSpan<S> {
    /// Rebuild the span text from the source sentence; must equal `text`.
    pub fn reconstruct(&self, sentence: &str) -> String {
        let tokens = tokenize(sentence);
        self.token_indices
            .iter()
            .filter_map(|&i| tokens.get(i).map(|t| t.text.clone()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

// ── model ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub baseline_decay: f64,
    /// Entropy bonus on the per-token selection distribution; keeps the
    /// sampled masks off the saturation rails where the score-function
    /// gradient vanishes.
    pub entropy_weight: f64,
    /// Supervised warm-start epochs: the token scorer is first pushed
    /// toward the anchor-plus-entities mask (per-token BCE) so that
    /// score-function training starts inside the anchor basin instead of
    /// collapsing to the empty mask.
    pub warmup_epochs: usize,
    /// Examples per optimizer step. Batching tames the variance of the
    /// score-function estimator; per-example steps random-walk into
    /// saturated policies.
    pub batch_size: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            hidden: 200,
            lr: 0.02,
            epochs: 20,
            seed: 42,
            holdout_fraction: 0.2,
            baseline_decay: 0.95,
            entropy_weight: 0.02,
            warmup_epochs: 3,
            batch_size: 16,
        }
    }
}

/// Indicator features appended to each token embedding: inside-e_i,
/// inside-e_j.
const EXTRA_FEATURES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionModel<S> {
    pub rnn: BiRnn<S>,
    pub head: Linear<S>,
    pub predictor: Linear<S>,
    pub emb_dim: usize,
}

fn relation_index(r: Relation) -> usize {
    match r {
        Relation::Contain => 0,
        Relation::Increase => 1,
        Relation::Decrease => 2,
        Relation::Satisfy => 3,
        Relation::Control => 4,
    }
}

/// Entity token ranges for a tuple within a tokenized sentence.
fn entity_token_indices(tokens: &[Token], tuple: &RelationTuple) -> (Vec<usize>, Vec<usize>) {
    (
        tokens_overlapping(tokens, tuple.ei.start, tuple.ei.end),
        tokens_overlapping(tokens, tuple.ej.start, tuple.ej.end),
    )
}

/// The entity the anchor is built around: the condition side when present,
/// otherwise e_j.
fn anchor_entity(tuple: &RelationTuple) -> &crate::corpus::EntitySpan {
    if tuple.ej.etype == EntityType::Condition {
        &tuple.ej
    } else if tuple.ei.etype == EntityType::Condition {
        &tuple.ei
    } else {
        &tuple.ej
    }
}

fn anchor_range_for(
    tokens: &[Token],
    tuple: &RelationTuple,
    tagger: &dyn VerbTagger,
) -> Range<usize> {
    let ent = anchor_entity(tuple);
    let overlapping = tokens_overlapping(tokens, ent.start, ent.end);
    match (overlapping.first(), overlapping.last()) {
        (Some(&f), Some(&l)) => anchor_token_range(tokens, f..l + 1, tagger).0,
        _ => 0..0,
    }
}

impl<S: Scalar> ExtractionModel<S> {
    pub fn init(emb_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        ExtractionModel {
            rnn: BiRnn::init(emb_dim + EXTRA_FEATURES, hidden, rng),
            head: Linear::init(2 * hidden, 1, rng),
            predictor: Linear::init(emb_dim, Relation::ALL.len(), rng),
            emb_dim,
        }
    }

    fn token_inputs(
        &self,
        emb: &Embeddings<S>,
        tokens: &[Token],
        tuple: &RelationTuple,
    ) -> Vec<Vec<S>> {
        let (ei_idx, ej_idx) = entity_token_indices(tokens, tuple);
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut x = emb
                    .get(&t.text)
                    .map(|v| v.to_vec())
                    .unwrap_or_else(|| vec![S::zero(); self.emb_dim]);
                x.push(if ei_idx.contains(&i) { S::one() } else { S::zero() });
                x.push(if ej_idx.contains(&i) { S::one() } else { S::zero() });
                x
            })
            .collect()
    }

    /// Per-token selection probabilities for `(sentence, tuple)`.
    pub fn token_probs(
        &self,
        emb: &Embeddings<S>,
        tokens: &[Token],
        tuple: &RelationTuple,
    ) -> Vec<S> {
        let inputs = self.token_inputs(emb, tokens, tuple);
        let cache = self.rnn.forward(&inputs);
        (0..tokens.len())
            .map(|t| sigmoid(self.head.forward(&self.rnn.code(&cache, t))[0]))
            .collect()
    }

    /// Mean embedding of selected tokens (zero vector for an empty mask).
    fn masked_mean(&self, emb: &Embeddings<S>, tokens: &[Token], mask: &RationaleMask) -> Vec<S> {
        let rows: Vec<&[S]> = tokens
            .iter()
            .zip(&mask.bits)
            .filter(|(_, &b)| b)
            .filter_map(|(t, _)| emb.get(&t.text))
            .collect();
        crate::num::mean_of(&rows, self.emb_dim)
    }

    pub fn relation_logits(
        &self,
        emb: &Embeddings<S>,
        tokens: &[Token],
        mask: &RationaleMask,
    ) -> Vec<S> {
        self.predictor.forward(&self.masked_mean(emb, tokens, mask))
    }

    pub fn predict_relation(
        &self,
        emb: &Embeddings<S>,
        tokens: &[Token],
        mask: &RationaleMask,
    ) -> Relation {
        let logits = self.relation_logits(emb, tokens, mask);
        let best = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        Relation::ALL[best]
    }

    /// Greedy decode: tokens with probability > 0.5. Falls back (flag set)
    /// when the thresholded mask is empty or fails to cover both entities;
    /// the fallback mask is the verb-phrase anchor range plus both entity
    /// token ranges, so every decoded span carries its tuple's surfaces.
    pub fn decode_mask(
        &self,
        emb: &Embeddings<S>,
        tokens: &[Token],
        tuple: &RelationTuple,
        tagger: &dyn VerbTagger,
    ) -> (RationaleMask, bool) {
        let probs = self.token_probs(emb, tokens, tuple);
        let half = sc::<S>(0.5);
        let mask = RationaleMask {
            bits: probs.iter().map(|&p| p > half).collect(),
        };
        let (ei_idx, ej_idx) = entity_token_indices(tokens, tuple);
        let covered = mask.covers_any(&ei_idx) && mask.covers_any(&ej_idx);
        if mask.count() == 0 || !covered {
            let range = anchor_range_for(tokens, tuple, tagger);
            let mut fallback = RationaleMask::from_range(tokens.len(), range);
            for &i in ei_idx.iter().chain(ej_idx.iter()) {
                if i < fallback.bits.len() {
                    fallback.bits[i] = true;
                }
            }
            (fallback, true)
        } else {
            (mask, false)
        }
    }
}

// ── loss ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionLoss<S> {
    pub l_r: S,
    pub l_z: S,
    pub l_anchor: S,
    pub total: S,
}

/// Regularizer L(z): sparsity + coherence over the mask alone.
pub fn mask_regularizer<S: Scalar>(mask: &RationaleMask, weights: &ExtractionLossWeights<S>) -> S {
    weights.len * sc::<S>(mask.count() as f64)
        + weights.disc * sc::<S>(mask.discontinuities() as f64)
}

/// Anchor term L(z, e_i, e_j): weighted (1 - IoU with the verb-phrase
/// anchor) plus a fixed penalty of 1.0 per entity with no selected token.
pub fn anchor_term<S: Scalar>(
    mask: &RationaleMask,
    tokens: &[Token],
    tuple: &RelationTuple,
    weights: &ExtractionLossWeights<S>,
    tagger: &dyn VerbTagger,
) -> S {
    let range = anchor_range_for(tokens, tuple, tagger);
    let iou: S = mask.iou_with_range(&range);
    let mut loss = weights.anchor * (S::one() - iou);
    let (ei_idx, ej_idx) = entity_token_indices(tokens, tuple);
    if !mask.covers_any(&ei_idx) {
        loss = loss + sc(ENTITY_COVERAGE_PENALTY);
    }
    if !mask.covers_any(&ej_idx) {
        loss = loss + sc(ENTITY_COVERAGE_PENALTY);
    }
    loss
}

/// The full three-term loss for one masked sentence.
pub fn extraction_loss<S: Scalar>(
    model: &ExtractionModel<S>,
    emb: &Embeddings<S>,
    sentence: &str,
    tuple: &RelationTuple,
    mask: &RationaleMask,
    weights: &ExtractionLossWeights<S>,
    tagger: &dyn VerbTagger,
) -> Result<ExtractionLoss<S>> {
    let tokens = tokenize(sentence);
    if mask.len() != tokens.len() {
        return Err(Error::Precondition(format!(
            "mask length {} does not match token count {}",
            mask.len(),
            tokens.len()
        )));
    }
    let logits = model.relation_logits(emb, &tokens, mask);
    let (l_r, _) = cross_entropy_logits(&logits, relation_index(tuple.r));
    let l_z = mask_regularizer(mask, weights);
    let l_anchor = anchor_term(mask, &tokens, tuple, weights, tagger);
    Ok(ExtractionLoss {
        l_r,
        l_z,
        l_anchor,
        total: l_r + l_z + l_anchor,
    })
}

// ── training ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ExtractionExample {
    pub sentence: String,
    pub tuple: RelationTuple,
}

/// (sentence, tuple, r) examples from every annotated sentence in a split.
pub fn extraction_examples_from_dataset(dataset: &Dataset, split: Split) -> Vec<ExtractionExample> {
    dataset
        .split(split)
        .flat_map(|i| i.abstracts.iter())
        .flat_map(|a| a.sentences.iter())
        .flat_map(|s| {
            s.tuples.iter().map(|t| ExtractionExample {
                sentence: s.text.clone(),
                tuple: t.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorReport {
    pub holdout_relation_accuracy: f64,
    pub mean_mask_density: f64,
    /// IoU between the model's raw thresholded masks and the verb-phrase
    /// anchors (before the coverage fallback, which would mix constructed
    /// masks into a measurement of learned behavior).
    pub mean_anchor_iou: f64,
    pub mean_loss_per_epoch: Vec<f64>,
}

pub struct TrainedExtractor<S> {
    pub model: ExtractionModel<S>,
    pub report: ExtractorReport,
}

/// Train the extractor with score-function gradients over sampled masks and
/// a jointly trained relation predictor. Deterministic under the seed.
pub fn train_extractor<S: Scalar>(
    examples: &[ExtractionExample],
    weights: &ExtractionLossWeights<S>,
    config: &ExtractorConfig,
    emb: &Embeddings<S>,
    tagger: &dyn VerbTagger,
) -> Result<TrainedExtractor<S>> {
    let labels: std::collections::BTreeSet<Relation> =
        examples.iter().map(|e| e.tuple.r).collect();
    if labels.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 relation labels, found {}",
            labels.len()
        )));
    }

    let mut rng = Rng::seed_from_u64(config.seed);
    let mut model = ExtractionModel::<S>::init(emb.dim(), config.hidden, &mut rng);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    rng.shuffle(&mut order);
    let n_holdout = ((examples.len() as f64 * config.holdout_fraction) as usize)
        .max(1)
        .min(examples.len() - 1);
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    // pre-tokenize and pre-compute anchors
    struct Prepared {
        tokens: Vec<Token>,
        anchor: Range<usize>,
        ei_idx: Vec<usize>,
        ej_idx: Vec<usize>,
    }
    let prepared: Vec<Prepared> = examples
        .iter()
        .map(|ex| {
            let tokens = tokenize(&ex.sentence);
            let anchor = anchor_range_for(&tokens, &ex.tuple, tagger);
            let (ei_idx, ej_idx) = entity_token_indices(&tokens, &ex.tuple);
            Prepared {
                tokens,
                anchor,
                ei_idx,
                ej_idx,
            }
        })
        .collect();

    let hp = AdamParams::with_lr(config.lr);
    let mut rnn_grads = model.rnn.grad_shape();
    let mut head_grads = Linear::zeros(model.head.in_dim, model.head.out_dim);
    let mut pred_grads = Linear::zeros(model.predictor.in_dim, model.predictor.out_dim);
    let mut rnn_opt = BiRnnAdam::new(&model.rnn);
    let mut head_opt = LinearAdam::new(&model.head);
    let mut pred_opt = LinearAdam::new(&model.predictor);
    let mut step = 0u64;
    let mut baseline = 0.0f64;
    let mut baseline_ready = false;
    let decay = config.baseline_decay;
    let mut mean_loss_per_epoch = Vec::with_capacity(config.epochs);

    // warm start: per-token BCE toward the anchor-plus-entities indicator,
    // with the predictor trained on that same target mask
    let batch = config.batch_size.max(1);
    for _epoch in 0..config.warmup_epochs {
        let mut in_batch = 0usize;
        for &i in train_idx {
            let ex = &examples[i];
            let prep = &prepared[i];
            let n = prep.tokens.len();
            if n == 0 {
                continue;
            }
            let inputs = model.token_inputs(emb, &prep.tokens, &ex.tuple);
            let cache = model.rnn.forward(&inputs);
            let codes: Vec<Vec<S>> = (0..n).map(|t| model.rnn.code(&cache, t)).collect();
            let target_bits: Vec<bool> = (0..n)
                .map(|t| {
                    prep.anchor.contains(&t)
                        || prep.ei_idx.contains(&t)
                        || prep.ej_idx.contains(&t)
                })
                .collect();
            let mut dcodes: Vec<Vec<S>> = vec![vec![S::zero(); codes[0].len()]; n];
            for t in 0..n {
                let p = sigmoid(model.head.forward(&codes[t])[0]);
                let target = if target_bits[t] { S::one() } else { S::zero() };
                let dy = [p - target];
                model
                    .head
                    .backward(&codes[t], &dy, &mut head_grads, Some(&mut dcodes[t]));
            }
            model.rnn.backward(&inputs, &cache, &dcodes, &mut rnn_grads);

            let target_mask = RationaleMask { bits: target_bits };
            let mean_vec = model.masked_mean(emb, &prep.tokens, &target_mask);
            let logits = model.predictor.forward(&mean_vec);
            let (_, dlogits) = cross_entropy_logits(&logits, relation_index(ex.tuple.r));
            model
                .predictor
                .backward(&mean_vec, &dlogits, &mut pred_grads, None);

            in_batch += 1;
            if in_batch == batch {
                step += 1;
                rnn_opt.step(step, &hp, &mut model.rnn, &mut rnn_grads);
                head_opt.step(step, &hp, &mut model.head, &mut head_grads);
                pred_opt.step(step, &hp, &mut model.predictor, &mut pred_grads);
                in_batch = 0;
            }
        }
        if in_batch > 0 {
            step += 1;
            rnn_opt.step(step, &hp, &mut model.rnn, &mut rnn_grads);
            head_opt.step(step, &hp, &mut model.head, &mut head_grads);
            pred_opt.step(step, &hp, &mut model.predictor, &mut pred_grads);
        }
    }

    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0f64;
        let mut in_batch = 0usize;
        for &i in train_idx {
            let ex = &examples[i];
            let prep = &prepared[i];
            let n = prep.tokens.len();
            if n == 0 {
                continue;
            }
            let inputs = model.token_inputs(emb, &prep.tokens, &ex.tuple);
            let cache = model.rnn.forward(&inputs);
            let codes: Vec<Vec<S>> = (0..n).map(|t| model.rnn.code(&cache, t)).collect();
            let probs: Vec<S> = codes
                .iter()
                .map(|c| sigmoid(model.head.forward(c)[0]))
                .collect();

            // sample mask
            let bits: Vec<bool> = probs
                .iter()
                .map(|&p| rng.bernoulli(p.to_f64().unwrap()))
                .collect();
            let mask = RationaleMask { bits };

            // relation loss on the sampled mask + predictor gradient
            let mean_vec = model.masked_mean(emb, &prep.tokens, &mask);
            let logits = model.predictor.forward(&mean_vec);
            let (l_r, dlogits) = cross_entropy_logits(&logits, relation_index(ex.tuple.r));
            model
                .predictor
                .backward(&mean_vec, &dlogits, &mut pred_grads, None);

            // regularizers (constants w.r.t. parameters)
            let l_z = mask_regularizer(&mask, weights);
            let iou: S = mask.iou_with_range(&prep.anchor);
            let mut l_anchor = weights.anchor * (S::one() - iou);
            if !mask.covers_any(&prep.ei_idx) {
                l_anchor = l_anchor + sc(ENTITY_COVERAGE_PENALTY);
            }
            if !mask.covers_any(&prep.ej_idx) {
                l_anchor = l_anchor + sc(ENTITY_COVERAGE_PENALTY);
            }
            let total = (l_r + l_z + l_anchor).to_f64().unwrap();
            if !total.is_finite() {
                return Err(Error::Training(format!(
                    "extraction loss diverged (non-finite) on `{}`",
                    ex.sentence
                )));
            }
            epoch_loss += total;

            // score-function gradient through the mask distribution
            if !baseline_ready {
                baseline = total;
                baseline_ready = true;
            }
            let advantage = total - baseline;
            baseline = decay * baseline + (1.0 - decay) * total;
            let adv = sc::<S>(advantage);
            let beta = sc::<S>(config.entropy_weight);
            let eps = sc::<S>(1e-7);
            let mut dcodes: Vec<Vec<S>> = vec![vec![S::zero(); codes[0].len()]; n];
            for t in 0..n {
                let z = if mask.bits[t] { S::one() } else { S::zero() };
                // d/da of advantage * log P(z | p), a = pre-sigmoid logit
                let policy_term = adv * (z - probs[t]);
                // entropy bonus gradient: d(-beta H)/da = beta p (1-p) ln(p/(1-p))
                let p = probs[t].max(eps).min(S::one() - eps);
                let entropy_term = beta * p * (S::one() - p) * (p / (S::one() - p)).ln();
                let dy = [policy_term + entropy_term];
                model
                    .head
                    .backward(&codes[t], &dy, &mut head_grads, Some(&mut dcodes[t]));
            }
            model.rnn.backward(&inputs, &cache, &dcodes, &mut rnn_grads);

            in_batch += 1;
            if in_batch == batch {
                step += 1;
                rnn_opt.step(step, &hp, &mut model.rnn, &mut rnn_grads);
                head_opt.step(step, &hp, &mut model.head, &mut head_grads);
                pred_opt.step(step, &hp, &mut model.predictor, &mut pred_grads);
                in_batch = 0;
            }
        }
        if in_batch > 0 {
            step += 1;
            rnn_opt.step(step, &hp, &mut model.rnn, &mut rnn_grads);
            head_opt.step(step, &hp, &mut model.head, &mut head_grads);
            pred_opt.step(step, &hp, &mut model.predictor, &mut pred_grads);
        }
        mean_loss_per_epoch.push(epoch_loss / train_idx.len().max(1) as f64);
    }

    // held-out evaluation on decoded masks
    let mut correct = 0usize;
    let mut density_sum = 0.0f64;
    let mut iou_sum = 0.0f64;
    for &i in holdout_idx {
        let ex = &examples[i];
        let prep = &prepared[i];
        if prep.tokens.is_empty() {
            continue;
        }
        let (mask, _) = model.decode_mask(emb, &prep.tokens, &ex.tuple, tagger);
        if model.predict_relation(emb, &prep.tokens, &mask) == ex.tuple.r {
            correct += 1;
        }
        density_sum += mask.count() as f64 / prep.tokens.len() as f64;
        let probs = model.token_probs(emb, &prep.tokens, &ex.tuple);
        let raw = RationaleMask {
            bits: probs.iter().map(|&p| p > sc::<S>(0.5)).collect(),
        };
        iou_sum += raw.iou_with_range::<S>(&prep.anchor).to_f64().unwrap();
    }
    let n_holdout = holdout_idx.len().max(1) as f64;
    Ok(TrainedExtractor {
        model,
        report: ExtractorReport {
            holdout_relation_accuracy: correct as f64 / n_holdout,
            mean_mask_density: density_sum / n_holdout,
            mean_anchor_iou: iou_sum / n_holdout,
            mean_loss_per_epoch,
        },
    })
}

// ── distill ────────────────────────────────────────────────────────────────

/// Run the extraction model on every tuple of every sentence: one span per
/// tuple, independent of model quality.
pub fn distill<S: Scalar>(
    model: &ExtractionModel<S>,
    emb: &Embeddings<S>,
    abstract_: &ScientificAbstract,
    tagger: &dyn VerbTagger,
) -> Vec<TextSpan<S>> {
    let mut spans = Vec::new();
    for (si, sentence) in abstract_.sentences.iter().enumerate() {
        if sentence.tuples.is_empty() {
            continue;
        }
        let tokens = tokenize(&sentence.text);
        for tuple in &sentence.tuples {
            let (mask, fallback) = model.decode_mask(emb, &tokens, tuple, tagger);
            let token_indices = mask.selected_indices();
            let text = token_indices
                .iter()
                .map(|&i| tokens[i].text.clone())
                .collect::<Vec<_>>()
                .join(" ");
            spans.push(TextSpan {
                text,
                doc_id: abstract_.doc_id.clone(),
                sentence_index: si,
                token_indices,
                tuple: tuple.clone(),
                embedding: None,
                anchor_fallback: fallback,
            });
        }
    }
    spans
}
