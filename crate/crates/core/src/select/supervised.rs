//! Supervised selection baseline: a logistic-regression-style relevance
//! classifier over span embeddings, trained with gold-structure supervision,
//! that picks the top two spans per instance.

use serde::{Deserialize, Serialize};

use super::train::PolicyInstance;
use super::{encode_pool, SpanEmbedding};
use crate::embed::Embeddings;
use crate::error::Result;
use crate::knowledge::{train_linear_classifier, ClassifierConfig};
use crate::metrics::{tuple_matches, TupleMatchConfig};
use crate::nn::Linear;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSelector<S> {
    pub linear: Linear<S>,
    pub emb_dim: usize,
}

impl<S: Scalar> SupervisedSelector<S> {
    /// Relevance score: the positive-class logit margin.
    pub fn score(&self, span_emb: &SpanEmbedding<S>) -> S {
        let logits = self.linear.forward(&span_emb.vector);
        logits[1] - logits[0]
    }
}

/// A span is a positive example iff its tuple matches some gold tuple under
/// the metrics-module matching rule.
pub fn train_supervised_selector<S: Scalar>(
    instances: &[PolicyInstance<S>],
    emb: &Embeddings<S>,
    match_cfg: &TupleMatchConfig<S>,
    cfg: &ClassifierConfig,
) -> Result<(SupervisedSelector<S>, f64)> {
    let mut examples: Vec<(Vec<S>, usize)> = Vec::new();
    for inst in instances {
        let encoded = encode_pool(&inst.pool, emb);
        for (span, enc) in inst.pool.iter().zip(encoded) {
            let positive = inst
                .gold_tuples
                .iter()
                .any(|g| tuple_matches(g, &span.tuple, emb, match_cfg));
            examples.push((enc.vector, usize::from(positive)));
        }
    }
    let (linear, acc) = train_linear_classifier(&examples, 2, cfg)?;
    Ok((
        SupervisedSelector {
            linear,
            emb_dim: emb.dim(),
        },
        acc,
    ))
}

/// Pick the two highest-scoring spans (every span when the pool is smaller),
/// returned in source order (pool order).
pub fn select_top2<S: Scalar>(
    model: &SupervisedSelector<S>,
    pool: &[crate::extract::TextSpan<S>],
    emb: &Embeddings<S>,
) -> Vec<usize> {
    let encoded = encode_pool(pool, emb);
    let mut scored: Vec<(S, usize)> = encoded
        .iter()
        .enumerate()
        .map(|(i, e)| (model.score(e), i))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = scored.iter().take(2).map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::select::tests::dummy_span;

    #[test]
    fn pool_of_two_selects_both() {
        let emb = Embeddings::<f64>::seeded_from_vocab(["a", "b"], 4, 1);
        let model = SupervisedSelector {
            linear: Linear::init(4, 2, &mut Rng::seed_from_u64(2)),
            emb_dim: 4,
        };
        let pool = vec![dummy_span("a"), dummy_span("b")];
        assert_eq!(select_top2(&model, &pool, &emb), vec![0, 1]);
    }

    #[test]
    fn empty_pool_selects_nothing() {
        let emb = Embeddings::<f64>::new(4);
        let model = SupervisedSelector {
            linear: Linear::init(4, 2, &mut Rng::seed_from_u64(2)),
            emb_dim: 4,
        };
        assert!(select_top2::<f64>(&model, &[], &emb).is_empty());
    }

    #[test]
    fn selection_is_ordered_by_source_position() {
        let emb = Embeddings::<f64>::seeded_from_vocab(["a", "b", "c", "d"], 4, 1);
        let model = SupervisedSelector {
            linear: Linear::init(4, 2, &mut Rng::seed_from_u64(9)),
            emb_dim: 4,
        };
        let pool = vec![
            dummy_span("a"),
            dummy_span("b"),
            dummy_span("c"),
            dummy_span("d"),
        ];
        let chosen = select_top2(&model, &pool, &emb);
        assert_eq!(chosen.len(), 2);
        assert!(chosen[0] < chosen[1]);
    }
}
