//! Content selection: an episodic policy over the span pool.
//!
//! States are (step, selected, remaining); actions are the remaining spans
//! plus STOP. The policy scores each candidate with a feedforward network
//! over (normalized step index, candidate embedding, embedding of the
//! closest already-selected span) and samples from the softmax. STOP is a
//! learned pseudo-span so the same scoring applies to every action.

mod rewards;
mod supervised;
mod train;

pub use rewards::{
    episode_rewards, reward_d, reward_e, reward_e_pairs, reward_m, reward_s, total_reward,
    RewardComponents, RewardSetup, RewardWeights, RsSampling,
};
pub use supervised::{select_top2, train_supervised_selector, SupervisedSelector};
pub use train::{
    train_policy, BaselineMode, PolicyInstance, PolicyTrainConfig, PolicyTrainReport,
};

use serde::{Deserialize, Serialize};

use crate::embed::Embeddings;
use crate::extract::TextSpan;
use crate::nn::{softmax, Mlp};
use crate::num::{cosine, sc, Scalar};
use crate::rng::Rng;

// ── span encoding ──────────────────────────────────────────────────────────

/// Mean-pooled span embedding; `oov` flags a span with no in-vocabulary
/// token (zero vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanEmbedding<S> {
    pub vector: Vec<S>,
    pub oov: bool,
}

pub fn encode_text<S: Scalar>(text: &str, emb: &Embeddings<S>) -> SpanEmbedding<S> {
    SpanEmbedding {
        vector: emb.mean_embedding(text),
        oov: !emb.covers(text),
    }
}

/// Encode a span and fill its `embedding` field.
pub fn encode_span<S: Scalar>(span: &mut TextSpan<S>, emb: &Embeddings<S>) -> SpanEmbedding<S> {
    let enc = encode_text(&span.text, emb);
    span.embedding = Some(enc.vector.clone());
    enc
}

pub fn encode_pool<S: Scalar>(pool: &[TextSpan<S>], emb: &Embeddings<S>) -> Vec<SpanEmbedding<S>> {
    pool.iter()
        .map(|s| match &s.embedding {
            Some(v) => SpanEmbedding {
                vector: v.clone(),
                oov: v.iter().all(|x| *x == S::zero()),
            },
            None => encode_text(&s.text, emb),
        })
        .collect()
}

// ── policy ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub hidden_sizes: [usize; 2],
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden_sizes: [64, 32],
        }
    }
}

/// Three-layer feedforward scorer `f(t, z_hat, c_hat*) -> scalar` plus the
/// learned STOP pseudo-span embedding and a learned scalar offset on the
/// STOP score. The scorer input carries, besides the raw vectors, their
/// cosine -- a derived feature of the same arguments that makes redundancy
/// with the selected content directly visible. The offset starts
/// optimistic: training then anneals stopping downward state by state,
/// instead of having to resurrect a stop action that early episodes
/// suppressed everywhere at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters<S> {
    pub scorer: Mlp<S>,
    pub stop_embedding: Vec<S>,
    pub stop_bias: S,
    pub emb_dim: usize,
}

pub const STOP_BIAS_INIT: f64 = 2.0;

impl<S: Scalar> PolicyParameters<S> {
    pub fn init(emb_dim: usize, config: &PolicyConfig, rng: &mut Rng) -> Self {
        let dims = [
            2 + 2 * emb_dim,
            config.hidden_sizes[0],
            config.hidden_sizes[1],
            1,
        ];
        let scorer = Mlp::init(&dims, rng);
        let stop_embedding = (0..emb_dim)
            .map(|_| rng.normal::<S>() * sc(0.1))
            .collect();
        PolicyParameters {
            scorer,
            stop_embedding,
            stop_bias: sc(STOP_BIAS_INIT),
            emb_dim,
        }
    }
}

/// Episode state: step index, selected pool indices in selection order, and
/// the remaining pool indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionState {
    pub t: usize,
    pub selected: Vec<usize>,
    pub remaining: Vec<usize>,
}

impl SelectionState {
    pub fn initial(pool_len: usize) -> Self {
        SelectionState {
            t: 0,
            selected: Vec::new(),
            remaining: (0..pool_len).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Select(usize),
    Stop,
}

/// Embedding of the selected span closest (by cosine) to `candidate`; the
/// zero vector when nothing is selected yet.
fn closest_selected<S: Scalar>(
    candidate: &[S],
    selected: &[usize],
    pool: &[SpanEmbedding<S>],
) -> Vec<S> {
    let mut best: Option<(S, &Vec<S>)> = None;
    for &ci in selected {
        let c = cosine(candidate, &pool[ci].vector);
        match &best {
            Some((b, _)) if *b >= c => {}
            _ => best = Some((c, &pool[ci].vector)),
        }
    }
    match best {
        Some((_, v)) => v.clone(),
        None => vec![S::zero(); candidate.len()],
    }
}

/// Feature vector for one action candidate:
/// `[t / m, cos(z, c*), z, c*]`.
pub(crate) fn action_features<S: Scalar>(
    t: usize,
    pool_len: usize,
    candidate: &[S],
    selected: &[usize],
    pool: &[SpanEmbedding<S>],
) -> Vec<S> {
    let t_norm = if pool_len == 0 {
        S::zero()
    } else {
        sc::<S>(t as f64 / pool_len as f64)
    };
    let closest = closest_selected(candidate, selected, pool);
    let mut feats = Vec::with_capacity(2 + 2 * candidate.len());
    feats.push(t_norm);
    feats.push(cosine(candidate, &closest));
    feats.extend_from_slice(candidate);
    feats.extend(closest);
    feats
}

/// Probability vector over remaining actions followed by STOP; sums to 1.
pub fn policy_distribution<S: Scalar>(
    params: &PolicyParameters<S>,
    pool: &[SpanEmbedding<S>],
    state: &SelectionState,
) -> Vec<S> {
    let pool_len = pool.len();
    let mut scores = Vec::with_capacity(state.remaining.len() + 1);
    for &zi in &state.remaining {
        let feats = action_features(state.t, pool_len, &pool[zi].vector, &state.selected, pool);
        scores.push(params.scorer.forward(&feats).0[0]);
    }
    let stop_feats = action_features(
        state.t,
        pool_len,
        &params.stop_embedding,
        &state.selected,
        pool,
    );
    scores.push(params.scorer.forward(&stop_feats).0[0] + params.stop_bias);
    softmax(&scores)
}

// ── episodes ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep<S> {
    pub state: SelectionState,
    pub action: Action,
    pub log_prob: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEpisode<S> {
    pub steps: Vec<EpisodeStep<S>>,
    /// Pool indices in selection order: the content C.
    pub selected: Vec<usize>,
    pub rewards: Option<RewardComponents<S>>,
}

impl<S: Scalar> SelectionEpisode<S> {
    pub fn selected_spans<'a>(&self, pool: &'a [TextSpan<S>]) -> Vec<&'a TextSpan<S>> {
        self.selected.iter().map(|&i| &pool[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Sample,
    Greedy,
}

/// Roll out one episode. Greedy mode takes the argmax action each step with
/// ties broken toward the lowest span index; sample mode draws from the
/// policy under the seed. Episodes run at most |pool| selections before the
/// forced STOP.
pub fn run_episode<S: Scalar>(
    params: &PolicyParameters<S>,
    pool: &[TextSpan<S>],
    emb: &Embeddings<S>,
    mode: RolloutMode,
    seed: u64,
) -> SelectionEpisode<S> {
    let encoded = encode_pool(pool, emb);
    run_episode_encoded(params, &encoded, mode, seed)
}

/// Rollout over pre-encoded spans (the training loop uses this directly).
pub fn run_episode_encoded<S: Scalar>(
    params: &PolicyParameters<S>,
    pool: &[SpanEmbedding<S>],
    mode: RolloutMode,
    seed: u64,
) -> SelectionEpisode<S> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut state = SelectionState::initial(pool.len());
    let mut steps = Vec::new();
    loop {
        let dist = policy_distribution(params, pool, &state);
        let action_idx = match mode {
            RolloutMode::Greedy => {
                let mut best = 0usize;
                for (i, p) in dist.iter().enumerate() {
                    if *p > dist[best] {
                        best = i;
                    }
                }
                best
            }
            RolloutMode::Sample => {
                let x: S = rng.uniform();
                let mut acc = S::zero();
                let mut chosen = dist.len() - 1;
                for (i, &p) in dist.iter().enumerate() {
                    acc = acc + p;
                    if x < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        let (action, log_prob) = if action_idx == state.remaining.len() {
            (Action::Stop, dist[action_idx].ln())
        } else {
            (
                Action::Select(state.remaining[action_idx]),
                dist[action_idx].ln(),
            )
        };
        steps.push(EpisodeStep {
            state: state.clone(),
            action,
            log_prob,
        });
        match action {
            Action::Stop => break,
            Action::Select(zi) => {
                state.selected.push(zi);
                state.remaining.retain(|&r| r != zi);
                state.t += 1;
            }
        }
    }
    SelectionEpisode {
        selected: state.selected,
        steps,
        rewards: None,
    }
}
