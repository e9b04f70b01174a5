//! Multi-objective episode rewards: gold-structure similarity (R_e),
//! diversity (R_d), summary-likeness against a sampled abstract span (R_s),
//! Meteor against the gold summary (R_m), and the per-action penalty, all
//! combined as `R = w_e R_e + w_d R_d + w_s R_s + w_m R_m - |C| r_p`.

use serde::{Deserialize, Serialize};

use crate::corpus::RelationTuple;
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::extract::TextSpan;
use crate::metrics::meteor;
use crate::num::{cosine, sc, Scalar};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights<S> {
    pub w_e: S,
    pub w_d: S,
    pub w_s: S,
    pub w_m: S,
    pub r_p: S,
    pub delta: S,
}

impl<S: Scalar> Default for RewardWeights<S> {
    fn default() -> Self {
        RewardWeights {
            w_e: S::one(),
            w_d: S::one(),
            w_s: S::one(),
            w_m: sc(0.75),
            r_p: sc(0.02),
            delta: sc(0.99),
        }
    }
}

impl<S: Scalar> RewardWeights<S> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_e", self.w_e),
            ("w_d", self.w_d),
            ("w_s", self.w_s),
            ("w_m", self.w_m),
            ("r_p", self.r_p),
        ] {
            if v < S::zero() {
                return Err(Error::Config(format!("reward weight {name} must be >= 0")));
            }
        }
        if self.delta <= S::zero() || self.delta > S::one() {
            return Err(Error::Config("delta must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents<S> {
    pub r_e: S,
    pub r_d: S,
    pub r_s: S,
    pub r_m: S,
    /// |C|, the number of selected spans.
    pub selected: usize,
}

/// Exact weighted sum of the reward components.
pub fn total_reward<S: Scalar>(c: &RewardComponents<S>, w: &RewardWeights<S>) -> S {
    w.w_e * c.r_e + w.w_d * c.r_d + w.w_s * c.r_s + w.w_m * c.r_m
        - sc::<S>(c.selected as f64) * w.r_p
}

// ── R_e: gold structure similarity ─────────────────────────────────────────

/// Greedy one-to-one matching over (selected, gold) entity-embedding pairs:
/// repeatedly take the pair with the highest `cos(ei, ei') + cos(ej, ej')`
/// among unmatched entries and add its score. Unmatched selections add 0.
pub fn reward_e_pairs<S: Scalar>(
    selected: &[(Vec<S>, Vec<S>)],
    gold: &[(Vec<S>, Vec<S>)],
) -> S {
    let mut candidates: Vec<(S, usize, usize)> = Vec::new();
    for (ci, c) in selected.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            let score = cosine(&c.0, &g.0) + cosine(&c.1, &g.1);
            candidates.push((score, ci, gi));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut c_used = vec![false; selected.len()];
    let mut g_used = vec![false; gold.len()];
    let mut total = S::zero();
    for (score, ci, gi) in candidates {
        if !c_used[ci] && !g_used[gi] {
            c_used[ci] = true;
            g_used[gi] = true;
            total = total + score;
        }
    }
    total
}

fn tuple_entity_embeddings<S: Scalar>(
    tuple: &RelationTuple,
    emb: &Embeddings<S>,
) -> (Vec<S>, Vec<S>) {
    (
        emb.mean_embedding(&tuple.ei.text),
        emb.mean_embedding(&tuple.ej.text),
    )
}

/// R_e over selected spans (each carrying its tuple) and gold tuples.
pub fn reward_e<S: Scalar>(
    selection: &[&TextSpan<S>],
    gold_tuples: &[RelationTuple],
    emb: &Embeddings<S>,
) -> S {
    let selected: Vec<(Vec<S>, Vec<S>)> = selection
        .iter()
        .map(|s| tuple_entity_embeddings(&s.tuple, emb))
        .collect();
    let gold: Vec<(Vec<S>, Vec<S>)> = gold_tuples
        .iter()
        .map(|t| tuple_entity_embeddings(t, emb))
        .collect();
    reward_e_pairs(&selected, &gold)
}

// ── R_d: diversity indicator ───────────────────────────────────────────────

/// 1 when every pair of selected span embeddings stays below `delta` cosine
/// similarity; 1 by convention for |C| <= 1.
pub fn reward_d<S: Scalar>(selection_embs: &[Vec<S>], delta: S) -> S {
    if selection_embs.len() <= 1 {
        return S::one();
    }
    for i in 0..selection_embs.len() {
        for j in i + 1..selection_embs.len() {
            if cosine(&selection_embs[i], &selection_embs[j]) >= delta {
                return S::zero();
            }
        }
    }
    S::one()
}

// ── R_s: summary-likeness vs a random abstract span ────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsSampling {
    /// One fresh comparison span per selected span (the default).
    PerC,
    /// One comparison span per episode, shared across selections.
    PerEpisode,
}

/// Count of selected spans closer (in summed cosine against all gold
/// summaries) to a human summary than a randomly sampled abstract span.
pub fn reward_s<S: Scalar>(
    selection_embs: &[Vec<S>],
    summary_embs: &[Vec<S>],
    sampler_pool: &[Vec<S>],
    sampling: RsSampling,
    seed: u64,
) -> Result<S> {
    if summary_embs.is_empty() {
        return Err(Error::Precondition("reward_s: no gold summaries".into()));
    }
    if sampler_pool.is_empty() {
        return Err(Error::Precondition(
            "reward_s: empty abstract-span sampler pool".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let sum_against = |v: &[S]| -> S {
        summary_embs
            .iter()
            .map(|y| cosine(v, y))
            .fold(S::zero(), |a, b| a + b)
    };
    let shared = match sampling {
        RsSampling::PerEpisode => Some(&sampler_pool[rng.index(sampler_pool.len())]),
        RsSampling::PerC => None,
    };
    let mut count = 0usize;
    for c in selection_embs {
        let z_prime = match sampling {
            RsSampling::PerC => &sampler_pool[rng.index(sampler_pool.len())],
            RsSampling::PerEpisode => shared.unwrap(),
        };
        if sum_against(c) > sum_against(z_prime) {
            count += 1;
        }
    }
    Ok(sc(count as f64))
}

// ── R_m: Meteor of the ordered concatenation ───────────────────────────────

pub fn reward_m<S: Scalar>(selection_texts: &[&str], gold_summary: &str) -> S {
    meteor(&selection_texts.join(" "), gold_summary)
}

// ── episode-level assembly ─────────────────────────────────────────────────

/// Corpus-level reward inputs shared across episodes: embeddings of all gold
/// summaries, the abstract-span sampler pool, weights, and the R_s sampling
/// mode.
#[derive(Debug, Clone)]
pub struct RewardSetup<S> {
    pub summary_embs: Vec<Vec<S>>,
    pub sampler_pool: Vec<Vec<S>>,
    pub weights: RewardWeights<S>,
    pub rs_sampling: RsSampling,
}

/// Compute all components for a selection within one instance.
#[allow(clippy::too_many_arguments)]
pub fn episode_rewards<S: Scalar>(
    selection: &[&TextSpan<S>],
    selection_embs: &[Vec<S>],
    gold_tuples: &[RelationTuple],
    gold_summary: &str,
    setup: &RewardSetup<S>,
    emb: &Embeddings<S>,
    seed: u64,
) -> Result<RewardComponents<S>> {
    let texts: Vec<&str> = selection.iter().map(|s| s.text.as_str()).collect();
    Ok(RewardComponents {
        r_e: reward_e(selection, gold_tuples, emb),
        r_d: reward_d(selection_embs, setup.weights.delta),
        r_s: if selection.is_empty() {
            S::zero()
        } else {
            reward_s(
                selection_embs,
                &setup.summary_embs,
                &setup.sampler_pool,
                setup.rs_sampling,
                seed,
            )?
        },
        r_m: reward_m(&texts, gold_summary),
        selected: selection.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn default_weight_fixture_totals_4_355() {
        // (R_e=2, R_d=1, R_s=1, R_m=0.5, |C|=1) with default weights:
        // 2 + 1 + 1 + 0.375 - 0.02 = 4.355
        let c = RewardComponents {
            r_e: 2.0,
            r_d: 1.0,
            r_s: 1.0,
            r_m: 0.5,
            selected: 1,
        };
        let total: f64 = total_reward(&c, &RewardWeights::default());
        assert!((total - 4.355).abs() < 1e-12, "got {total}");
    }

    #[test]
    fn all_zero_components_pay_the_step_penalty() {
        let c = RewardComponents {
            r_e: 0.0,
            r_d: 0.0,
            r_s: 0.0,
            r_m: 0.0,
            selected: 3,
        };
        let total: f64 = total_reward(&c, &RewardWeights::default());
        assert!((total - (-0.06)).abs() < 1e-12, "got {total}");
    }

    #[test]
    fn immediate_stop_scores_the_diversity_convention() {
        // C = {}: R_d = 1 by convention, everything else 0
        let c = RewardComponents {
            r_e: 0.0,
            r_d: reward_d::<f64>(&[], 0.99),
            r_s: 0.0,
            r_m: 0.0,
            selected: 0,
        };
        let total: f64 = total_reward(&c, &RewardWeights::default());
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_reward_is_linear_in_each_component() {
        let w = RewardWeights::<f64>::default();
        let mut rng = Rng::seed_from_u64(4);
        for _ in 0..200 {
            let base = RewardComponents {
                r_e: rng.normal::<f64>(),
                r_d: rng.normal::<f64>(),
                r_s: rng.normal::<f64>(),
                r_m: rng.normal::<f64>(),
                selected: rng.index(5),
            };
            let direct = w.w_e * base.r_e + w.w_d * base.r_d + w.w_s * base.r_s + w.w_m * base.r_m
                - base.selected as f64 * w.r_p;
            assert!((total_reward(&base, &w) - direct).abs() < 1e-12);
            // doubling one component moves the total by exactly w * delta
            let mut bumped = base;
            bumped.r_e += 1.0;
            assert!(
                ((total_reward(&bumped, &w) - total_reward(&base, &w)) - w.w_e).abs() < 1e-12
            );
        }
    }

    #[test]
    fn reward_e_identical_entities_score_two() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let selected = vec![(e1.clone(), e2.clone())];
        let gold = vec![(e1, e2)];
        let r: f64 = reward_e_pairs(&selected, &gold);
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reward_e_empty_selection_is_zero() {
        let gold = vec![(vec![1.0, 0.0], vec![0.0, 1.0])];
        let r: f64 = reward_e_pairs(&[], &gold);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reward_e_one_to_one_blocks_duplicate_credit() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let dup = vec![(e1.clone(), e2.clone()), (e1.clone(), e2.clone())];
        let gold = vec![(e1, e2)];
        let r: f64 = reward_e_pairs(&dup, &gold);
        assert!((r - 2.0).abs() < 1e-12, "second duplicate unmatched: {r}");
    }

    #[test]
    fn reward_e_monotone_when_matching_unmatched_gold() {
        let g1 = (vec![1.0, 0.0], vec![0.0, 1.0]);
        let g2 = (vec![0.6, 0.8], vec![0.8, 0.6]);
        let gold = vec![g1.clone(), g2.clone()];
        let mut selected = vec![g1];
        let before: f64 = reward_e_pairs(&selected, &gold);
        selected.push(g2);
        let after: f64 = reward_e_pairs(&selected, &gold);
        assert!(after >= before);
        assert!((after - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reward_d_cases() {
        // distinct pair below delta
        let a = vec![1.0, 0.0];
        let b = vec![0.5, 0.86602540378]; // cos = 0.5
        assert_eq!(reward_d::<f64>(&[a.clone(), b], 0.99), 1.0);
        // duplicates: cos = 1 >= delta
        assert_eq!(reward_d::<f64>(&[a.clone(), a.clone()], 0.99), 0.0);
        // |C| <= 1 convention
        assert_eq!(reward_d::<f64>(&[a], 0.99), 1.0);
        assert_eq!(reward_d::<f64>(&[], 0.99), 1.0);
    }

    #[test]
    fn reward_s_summary_beats_oov_sample() {
        // c equal to a gold summary embedding, z' a zero vector
        let y = vec![1.0, 1.0];
        let r: f64 = reward_s(
            &[y.clone()],
            &[y],
            &[vec![0.0, 0.0]],
            RsSampling::PerC,
            7,
        )
        .unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn reward_s_empty_selection_is_zero() {
        let y = vec![1.0, 1.0];
        let r: f64 =
            reward_s(&[], &[y], &[vec![0.0, 0.0]], RsSampling::PerC, 7).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reward_s_is_deterministic_under_seed() {
        let mut rng = Rng::seed_from_u64(50);
        let dim = 6;
        let mk = |rng: &mut Rng| -> Vec<f64> { (0..dim).map(|_| rng.normal()).collect() };
        let selection: Vec<Vec<f64>> = (0..4).map(|_| mk(&mut rng)).collect();
        let summaries: Vec<Vec<f64>> = (0..3).map(|_| mk(&mut rng)).collect();
        let pool: Vec<Vec<f64>> = (0..10).map(|_| mk(&mut rng)).collect();
        let a: f64 =
            reward_s(&selection, &summaries, &pool, RsSampling::PerC, 123).unwrap();
        let b: f64 =
            reward_s(&selection, &summaries, &pool, RsSampling::PerC, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reward_s_rejects_empty_pool() {
        let y = vec![1.0, 1.0];
        assert!(reward_s::<f64>(&[y.clone()], &[y], &[], RsSampling::PerC, 7).is_err());
    }

    #[test]
    fn reward_m_identity_matches_meteor_identity() {
        let r: f64 = reward_m(&["bananas may lower", "cholesterol"], "bananas may lower cholesterol");
        assert!((r - 0.9921875).abs() < 1e-9);
    }

    #[test]
    fn reward_m_disjoint_and_empty_are_zero() {
        assert_eq!(reward_m::<f64>(&["alpha beta"], "gamma delta"), 0.0);
        assert_eq!(reward_m::<f64>(&[], "gamma delta"), 0.0);
    }

    #[test]
    fn weight_validation() {
        let mut w = RewardWeights::<f64>::default();
        assert!(w.validate().is_ok());
        w.delta = 0.0;
        assert!(w.validate().is_err());
        w.delta = 0.99;
        w.w_m = -0.1;
        assert!(w.validate().is_err());
    }
}
