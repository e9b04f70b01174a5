//! Policy-gradient training: score-function estimator with a moving-average
//! baseline over sampled episodes.

use serde::{Deserialize, Serialize};

use super::rewards::{episode_rewards, total_reward, RewardSetup};
use super::{
    action_features, encode_pool, policy_distribution, Action, EpisodeStep, PolicyParameters,
    RolloutMode, SelectionEpisode, SelectionState, SpanEmbedding,
};
use crate::corpus::RelationTuple;
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::extract::TextSpan;
use crate::nn::{softmax, AdamBlock, AdamParams, MlpAdam};
use crate::num::{sc, Scalar};
use crate::rng::Rng;

/// One training instance: the span pool plus the gold side of the rewards.
#[derive(Debug, Clone)]
pub struct PolicyInstance<S> {
    pub pool: Vec<TextSpan<S>>,
    pub gold_tuples: Vec<RelationTuple>,
    pub gold_summary: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolicyTrainConfig {
    pub episodes: usize,
    pub lr: f64,
    pub seed: u64,
    pub baseline_decay: f64,
    /// Entropy bonus on the per-step action distribution. Keeps STOP (and
    /// rarely-sampled actions generally) explorable; without it the policy
    /// can lock into never stopping before the sparse stop-reward signal
    /// has been observed.
    pub entropy_weight: f64,
    /// Episodes accumulated per optimizer step; single-episode steps make
    /// the score-function estimator too noisy to resolve small margins.
    pub episodes_per_step: usize,
    /// Exploration floor for training rollouts: actions are sampled from
    /// `(1 - eps) * pi + eps * uniform`. STOP competes in the softmax
    /// against every remaining span at once, so without a floor it stops
    /// being sampled long before its payoff has been observed.
    pub exploration: f64,
    /// Probability that a training rollout is truncated: the episode
    /// follows the policy but STOP is forced at a uniformly drawn step.
    /// Ending an episode is the one action whose payoff is only visible by
    /// taking it, and truncating the policy's own trajectories samples that
    /// payoff exactly in the states the policy actually reaches.
    pub stop_exploration: f64,
    /// Baseline estimator for the advantage.
    pub baseline: BaselineMode,
    /// Curriculum: for the first `warmup_episodes`, episodes are truncated
    /// at `warmup_length` selections with STOP forced (and excluded from
    /// the gradient). Span discrimination is learnable on fixed-length
    /// episodes immediately, and the later free-stopping phase then starts
    /// from pools it already ranks well instead of random prefixes.
    pub warmup_episodes: usize,
    pub warmup_length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// One exponential moving average of episode rewards per instance.
    MovingAverage,
    /// Reward of the policy's own greedy rollout on the instance
    /// (self-critical).
    SelfCritical,
    /// Rollout advantage: each sampled action is credited with
    /// `Q(s, a) - V(s)`, both estimated by greedily completing the episode
    /// under the current policy. Credit for ending or continuing is only
    /// correct relative to what the policy would actually have collected
    /// from that exact state; episode-level baselines mis-sign it whenever
    /// behavior has drifted.
    StateRollout,
}

impl Default for PolicyTrainConfig {
    fn default() -> Self {
        PolicyTrainConfig {
            episodes: 2000,
            lr: 0.01,
            seed: 42,
            baseline_decay: 0.95,
            entropy_weight: 0.01,
            episodes_per_step: 1,
            exploration: 0.1,
            stop_exploration: 0.2,
            baseline: BaselineMode::StateRollout,
            warmup_episodes: 600,
            warmup_length: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyTrainReport {
    /// Mean total reward over each consecutive window of episodes.
    pub reward_curve: Vec<f64>,
    pub episodes: usize,
}

/// Train the policy with REINFORCE: for each sampled episode, every step
/// contributes `(R - b) * grad log pi(a_t | s_t)` ascended via Adam.
/// Deterministic under the seed; zero episodes leave the parameters
/// untouched.
pub fn train_policy<S: Scalar>(
    mut params: PolicyParameters<S>,
    instances: &[PolicyInstance<S>],
    setup: &RewardSetup<S>,
    config: &PolicyTrainConfig,
    emb: &Embeddings<S>,
) -> Result<(PolicyParameters<S>, PolicyTrainReport)> {
    setup.weights.validate()?;
    if instances.is_empty() {
        return Err(Error::Training("no policy training instances".into()));
    }
    let encoded: Vec<Vec<SpanEmbedding<S>>> = instances
        .iter()
        .map(|inst| encode_pool(&inst.pool, emb))
        .collect();

    let hp = AdamParams::with_lr(config.lr);
    let mut scorer_grads = params.scorer.grad_shape();
    let mut stop_grads = vec![S::zero(); params.emb_dim];
    let mut stop_bias_grad = vec![S::zero(); 1];
    let mut scorer_opt = MlpAdam::new(&params.scorer);
    let mut stop_opt = AdamBlock::new(params.emb_dim);
    let mut stop_bias_opt = AdamBlock::new(1);
    let mut rng = Rng::seed_from_u64(config.seed);
    // one moving-average baseline per instance: advantages then reflect
    // within-pool choice quality rather than cross-pool reward levels
    let mut baselines: Vec<Option<f64>> = vec![None; instances.len()];
    let mut reward_curve = Vec::new();
    let mut window_sum = 0.0f64;
    let window = 50usize;
    let mut in_batch = 0usize;
    let mut opt_t = 0u64;

    for episode_idx in 0..config.episodes {
        let ii = episode_idx % instances.len();
        let inst = &instances[ii];
        let pool = &encoded[ii];

        let rollout_seed = rng.next_u64();
        let reward_seed = rng.next_u64();
        let warmup_phase = episode_idx < config.warmup_episodes;
        let episode = if warmup_phase {
            rollout_fixed_length(&params, pool, rollout_seed, config.warmup_length)
        } else {
            rollout_with_exploration(
                &params,
                pool,
                rollout_seed,
                config.exploration,
                config.stop_exploration,
            )
        };
        let selection = episode.selected_spans(&inst.pool);
        let selection_embs: Vec<Vec<S>> = episode
            .selected
            .iter()
            .map(|&i| pool[i].vector.clone())
            .collect();
        let components = episode_rewards(
            &selection,
            &selection_embs,
            &inst.gold_tuples,
            &inst.gold_summary,
            setup,
            emb,
            reward_seed,
        )?;
        let reward = total_reward(&components, &setup.weights).to_f64().unwrap();
        if !reward.is_finite() {
            return Err(Error::Training("policy reward diverged (non-finite)".into()));
        }
        window_sum += reward;
        if (episode_idx + 1) % window == 0 {
            reward_curve.push(window_sum / window as f64);
            window_sum = 0.0;
        }

        // value of completing a selection greedily from `state`
        let completion_value = |sel0: Vec<usize>, remaining0: Vec<usize>, t0: usize| -> Result<f64> {
            let mut sel = sel0;
            let mut remaining = remaining0;
            let mut t = t0;
            loop {
                let st = SelectionState {
                    t,
                    selected: sel.clone(),
                    remaining: remaining.clone(),
                };
                let dist = policy_distribution(&params, pool, &st);
                let mut best = 0usize;
                for (i, p) in dist.iter().enumerate() {
                    if *p > dist[best] {
                        best = i;
                    }
                }
                if best == remaining.len() {
                    break;
                }
                let zi = remaining[best];
                sel.push(zi);
                remaining.retain(|&r| r != zi);
                t += 1;
            }
            let spans: Vec<&crate::extract::TextSpan<S>> =
                sel.iter().map(|&i| &inst.pool[i]).collect();
            let embs: Vec<Vec<S>> = sel.iter().map(|&i| pool[i].vector.clone()).collect();
            let c = episode_rewards(
                &spans,
                &embs,
                &inst.gold_tuples,
                &inst.gold_summary,
                setup,
                emb,
                reward_seed,
            )?;
            Ok(total_reward(&c, &setup.weights).to_f64().unwrap())
        };
        // terminal reward of a finished selection
        let final_value = |sel: &[usize]| -> Result<f64> {
            let spans: Vec<&crate::extract::TextSpan<S>> =
                sel.iter().map(|&i| &inst.pool[i]).collect();
            let embs: Vec<Vec<S>> = sel.iter().map(|&i| pool[i].vector.clone()).collect();
            let c = episode_rewards(
                &spans,
                &embs,
                &inst.gold_tuples,
                &inst.gold_summary,
                setup,
                emb,
                reward_seed,
            )?;
            Ok(total_reward(&c, &setup.weights).to_f64().unwrap())
        };

        // fixed-length greedy value for the warmup phase's baseline
        let warmup_baseline = if warmup_phase {
            let mut sel = Vec::new();
            let mut remaining: Vec<usize> = (0..pool.len()).collect();
            for t in 0..config.warmup_length.min(pool.len()) {
                let st = SelectionState {
                    t,
                    selected: sel.clone(),
                    remaining: remaining.clone(),
                };
                let dist = policy_distribution(&params, pool, &st);
                // argmax over spans only
                let mut best = 0usize;
                for i in 1..remaining.len() {
                    if dist[i] > dist[best] {
                        best = i;
                    }
                }
                if remaining.is_empty() {
                    break;
                }
                let zi = remaining[best];
                sel.push(zi);
                remaining.retain(|&r| r != zi);
            }
            Some(final_value(&sel)?)
        } else {
            None
        };

        let episode_advantage = if let Some(b) = warmup_baseline {
            Some(reward - b)
        } else {
            match config.baseline {
            BaselineMode::MovingAverage => {
                let baseline = baselines[ii].get_or_insert(reward);
                let advantage = reward - *baseline;
                *baseline = config.baseline_decay * *baseline
                    + (1.0 - config.baseline_decay) * reward;
                Some(advantage)
            }
            BaselineMode::SelfCritical => {
                let greedy =
                    super::run_episode_encoded(&params, pool, RolloutMode::Greedy, 0);
                let greedy_sel = greedy.selected_spans(&inst.pool);
                let greedy_embs: Vec<Vec<S>> = greedy
                    .selected
                    .iter()
                    .map(|&i| pool[i].vector.clone())
                    .collect();
                let c = episode_rewards(
                    &greedy_sel,
                    &greedy_embs,
                    &inst.gold_tuples,
                    &inst.gold_summary,
                    setup,
                    emb,
                    reward_seed,
                )?;
                Some(reward - total_reward(&c, &setup.weights).to_f64().unwrap())
            }
            BaselineMode::StateRollout => None,
            }
        };

        // replay each step: recompute per-action scores with caches, then
        // push (1[a=j] - pi_j) * adv through the scorer (negated for Adam,
        // which minimizes)
        for step in &episode.steps {
            // a warmup episode's terminal STOP is forced, not a decision
            if warmup_phase && step.action == Action::Stop {
                continue;
            }
            let state: &SelectionState = &step.state;
            // warmup decisions are span-restricted: replay the same
            // restricted softmax (no STOP candidate) or the gradient is
            // inconsistent with the sampling distribution
            let include_stop = !warmup_phase;
            let advantage = match episode_advantage {
                Some(a) => a,
                None => {
                    let v_s = completion_value(
                        state.selected.clone(),
                        state.remaining.clone(),
                        state.t,
                    )?;
                    let q_sa = match step.action {
                        Action::Stop => final_value(&state.selected)?,
                        Action::Select(zi) => {
                            let mut sel = state.selected.clone();
                            sel.push(zi);
                            let remaining: Vec<usize> = state
                                .remaining
                                .iter()
                                .copied()
                                .filter(|&r| r != zi)
                                .collect();
                            completion_value(sel, remaining, state.t + 1)?
                        }
                    };
                    q_sa - v_s
                }
            };
            let adv = sc::<S>(advantage);
            let n_actions = if include_stop {
                state.remaining.len() + 1
            } else {
                state.remaining.len()
            };
            let mut feats = Vec::with_capacity(n_actions);
            for &zi in &state.remaining {
                feats.push(action_features(
                    state.t,
                    pool.len(),
                    &pool[zi].vector,
                    &state.selected,
                    pool,
                ));
            }
            if include_stop {
                feats.push(action_features(
                    state.t,
                    pool.len(),
                    &params.stop_embedding,
                    &state.selected,
                    pool,
                ));
            }
            let mut scores = Vec::with_capacity(n_actions);
            let mut caches = Vec::with_capacity(n_actions);
            for (fi, f) in feats.iter().enumerate() {
                let (out, cache) = params.scorer.forward(f);
                let score = if include_stop && fi == n_actions - 1 {
                    out[0] + params.stop_bias
                } else {
                    out[0]
                };
                scores.push(score);
                caches.push(cache);
            }
            let probs = softmax(&scores);
            let entropy: S = -probs
                .iter()
                .map(|&p| p * (p + sc::<S>(1e-12)).ln())
                .sum::<S>();
            let beta = sc::<S>(config.entropy_weight);
            let chosen = match step.action {
                Action::Stop => n_actions - 1,
                Action::Select(zi) => state.remaining.iter().position(|&r| r == zi).unwrap(),
            };
            debug_assert!(chosen < n_actions);
            for j in 0..n_actions {
                let indicator = if j == chosen { S::one() } else { S::zero() };
                let policy_coeff = adv * (indicator - probs[j]);
                // entropy ascent: dH/ds_j = pi_j (-ln pi_j - H)
                let entropy_coeff =
                    beta * probs[j] * (-(probs[j] + sc::<S>(1e-12)).ln() - entropy);
                let coeff = policy_coeff + entropy_coeff;
                if coeff == S::zero() {
                    continue;
                }
                // ascend => feed the negated gradient to Adam
                let dy = [-coeff];
                let dx = params.scorer.backward(&caches[j], &dy, &mut scorer_grads);
                if include_stop && j == n_actions - 1 {
                    // STOP candidate: the score offset sees the raw
                    // coefficient, and the pseudo-embedding gradient sits
                    // after the step-index and cosine features (the cosine
                    // path into the embedding is dropped; it only sharpens
                    // an already tiny term)
                    stop_bias_grad[0] = stop_bias_grad[0] - coeff;
                    for (g, d) in stop_grads.iter_mut().zip(&dx[2..2 + params.emb_dim]) {
                        *g = *g + *d;
                    }
                }
            }
        }

        in_batch += 1;
        if in_batch == config.episodes_per_step.max(1) || episode_idx + 1 == config.episodes {
            opt_t += 1;
            scorer_opt.step(opt_t, &hp, &mut params.scorer, &mut scorer_grads);
            stop_opt.step(opt_t, &hp, &mut params.stop_embedding, &mut stop_grads);
            let mut bias_param = [params.stop_bias];
            stop_bias_opt.step(opt_t, &hp, &mut bias_param, &mut stop_bias_grad);
            params.stop_bias = bias_param[0];
            in_batch = 0;
        }
    }

    Ok((
        params,
        PolicyTrainReport {
            reward_curve,
            episodes: config.episodes,
        },
    ))
}

/// Fixed-length training rollout: spans sampled from the policy restricted
/// to the remaining spans, STOP forced once `length` selections are made.
fn rollout_fixed_length<S: Scalar>(
    params: &PolicyParameters<S>,
    pool: &[SpanEmbedding<S>],
    seed: u64,
    length: usize,
) -> SelectionEpisode<S> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut state = SelectionState::initial(pool.len());
    let mut steps = Vec::new();
    while state.t < length && !state.remaining.is_empty() {
        let dist = policy_distribution(params, pool, &state);
        let span_mass: f64 = dist[..state.remaining.len()]
            .iter()
            .map(|p| p.to_f64().unwrap())
            .sum();
        let x = rng.next_f64() * span_mass.max(f64::MIN_POSITIVE);
        let mut acc = 0.0f64;
        let mut chosen = state.remaining.len() - 1;
        for (i, &p) in dist[..state.remaining.len()].iter().enumerate() {
            acc += p.to_f64().unwrap();
            if x < acc {
                chosen = i;
                break;
            }
        }
        let zi = state.remaining[chosen];
        steps.push(EpisodeStep {
            state: state.clone(),
            action: Action::Select(zi),
            log_prob: dist[chosen].ln(),
        });
        state.selected.push(zi);
        state.remaining.retain(|&r| r != zi);
        state.t += 1;
    }
    steps.push(EpisodeStep {
        state: state.clone(),
        action: Action::Stop,
        log_prob: S::zero(),
    });
    SelectionEpisode {
        selected: state.selected,
        steps,
        rewards: None,
    }
}

/// Training rollout with an epsilon-uniform exploration floor. The gradient
/// replay scores actions under the policy itself, so exploration only
/// changes which trajectories get visited.
fn rollout_with_exploration<S: Scalar>(
    params: &PolicyParameters<S>,
    pool: &[SpanEmbedding<S>],
    seed: u64,
    exploration: f64,
    stop_exploration: f64,
) -> SelectionEpisode<S> {
    let mut rng = Rng::seed_from_u64(seed);
    let truncate_at = if !pool.is_empty() && rng.next_f64() < stop_exploration {
        Some(rng.index(pool.len() + 1))
    } else {
        None
    };
    let mut state = SelectionState::initial(pool.len());
    let mut steps = Vec::new();
    loop {
        let dist = policy_distribution(params, pool, &state);
        let n = dist.len();
        let uniform = 1.0 / n as f64;
        let chosen = if truncate_at == Some(state.t) {
            n - 1
        } else {
            let x = rng.next_f64();
            let mut acc = 0.0f64;
            let mut chosen = n - 1;
            for (i, &p) in dist.iter().enumerate() {
                let mixed = (1.0 - exploration) * p.to_f64().unwrap() + exploration * uniform;
                acc += mixed;
                if x < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let (action, log_prob) = if chosen == state.remaining.len() {
            (Action::Stop, dist[chosen].ln())
        } else {
            (Action::Select(state.remaining[chosen]), dist[chosen].ln())
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
