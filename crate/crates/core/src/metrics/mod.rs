//! Automatic evaluation: Meteor, knowledge-tuple match rates against the
//! gold summary (KG(G)) and the input abstracts (KG(I)), trigram diversity,
//! and per-food sentiment contrastiveness.

mod meteor;

pub use meteor::{meteor, stem};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{RelationTuple, Sentiment, SummaryInstance};
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::knowledge::{classify_sentiment, extract_graph, KnowledgeModels};
use crate::num::{cosine, sc, Scalar};
use crate::text::lower_tokens;

// ── knowledge-tuple matching ───────────────────────────────────────────────

/// Matching configuration for KG rates: both entity cosines must reach
/// `tau`, and relations must agree when `require_relation_equality` is set
/// (the default; turn it off to match entity pairs only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleMatchConfig<S> {
    pub tau: S,
    pub require_relation_equality: bool,
}

impl<S: Scalar> Default for TupleMatchConfig<S> {
    fn default() -> Self {
        TupleMatchConfig {
            tau: sc(0.7),
            require_relation_equality: true,
        }
    }
}

impl<S: Scalar> TupleMatchConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= S::zero() || self.tau > S::one() {
            return Err(Error::Config(format!(
                "tuple match threshold tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// True when `out` can account for `target` under the config: both entity
/// cosines at or above `tau`, relations equal when required.
pub fn tuple_matches<S: Scalar>(
    target: &RelationTuple,
    out: &RelationTuple,
    emb: &Embeddings<S>,
    cfg: &TupleMatchConfig<S>,
) -> bool {
    tuple_pair_score(target, out, emb, cfg).is_some()
}

/// Can `out` account for `target` under the config?
fn tuple_pair_score<S: Scalar>(
    target: &RelationTuple,
    out: &RelationTuple,
    emb: &Embeddings<S>,
    cfg: &TupleMatchConfig<S>,
) -> Option<S> {
    if cfg.require_relation_equality && target.r != out.r {
        return None;
    }
    let ci = cosine(
        &emb.mean_embedding(&target.ei.text),
        &emb.mean_embedding(&out.ei.text),
    );
    let cj = cosine(
        &emb.mean_embedding(&target.ej.text),
        &emb.mean_embedding(&out.ej.text),
    );
    (ci >= cfg.tau && cj >= cfg.tau).then_some(ci + cj)
}

/// Percentage of target tuples accounted for by output tuples under greedy
/// one-to-one matching by descending summed entity cosine. `None` when
/// there are no target tuples (the rate is undefined, not zero).
pub fn kg_match_rate<S: Scalar>(
    output_tuples: &[RelationTuple],
    target_tuples: &[RelationTuple],
    emb: &Embeddings<S>,
    cfg: &TupleMatchConfig<S>,
) -> Option<S> {
    if target_tuples.is_empty() {
        return None;
    }
    let mut candidates: Vec<(S, usize, usize)> = Vec::new();
    for (ti, t) in target_tuples.iter().enumerate() {
        for (oi, o) in output_tuples.iter().enumerate() {
            if let Some(score) = tuple_pair_score(t, o, emb, cfg) {
                candidates.push((score, ti, oi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut target_used = vec![false; target_tuples.len()];
    let mut output_used = vec![false; output_tuples.len()];
    let mut matched = 0usize;
    for (_, ti, oi) in candidates {
        if !target_used[ti] && !output_used[oi] {
            target_used[ti] = true;
            output_used[oi] = true;
            matched += 1;
        }
    }
    Some(sc::<S>(100.0) * sc::<S>(matched as f64) / sc::<S>(target_tuples.len() as f64))
}

// ── diversity ──────────────────────────────────────────────────────────────

/// Percentage of distinct trigrams among all trigram occurrences pooled over
/// the outputs. Outputs shorter than three tokens contribute nothing; `None`
/// when there are no trigrams at all.
pub fn diversity<S: Scalar>(outputs: &[String]) -> Option<S> {
    let mut seen: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut total = 0usize;
    for out in outputs {
        let toks = lower_tokens(out);
        if toks.len() < 3 {
            continue;
        }
        for w in toks.windows(3) {
            *seen.entry(w.to_vec()).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(sc::<S>(100.0) * sc::<S>(seen.len() as f64) / sc::<S>(total as f64))
}

// ── contrastiveness ────────────────────────────────────────────────────────

/// Percentage of summary groups (one group per food) containing at least one
/// positive and at least one negative-or-neutral summary. Groups must be
/// non-empty; `None` when there are no groups.
pub fn contrastiveness<S: Scalar>(
    groups: &[Vec<String>],
    sentiment: &crate::knowledge::SentimentModel<S>,
    emb: &Embeddings<S>,
) -> Option<S> {
    if groups.is_empty() {
        return None;
    }
    let mut counting = 0usize;
    for group in groups {
        assert!(!group.is_empty(), "contrastiveness: empty group");
        let mut has_positive = false;
        let mut has_other = false;
        for text in group {
            let label = if text.trim().is_empty() {
                Sentiment::Neutral
            } else {
                classify_sentiment(sentiment, emb, text).unwrap_or(Sentiment::Neutral)
            };
            match label {
                Sentiment::Positive => has_positive = true,
                Sentiment::Negative | Sentiment::Neutral => has_other = true,
            }
        }
        if has_positive && has_other {
            counting += 1;
        }
    }
    Some(sc::<S>(100.0) * sc::<S>(counting as f64) / sc::<S>(groups.len() as f64))
}

// ── system-level report ────────────────────────────────────────────────────

/// One system output, keyed by the index of its instance within the
/// evaluated slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemOutput {
    pub instance: usize,
    pub output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerInstanceMetrics<S> {
    pub instance: usize,
    pub food: String,
    pub meteor: S,
    pub kg_gold: Option<S>,
    pub kg_input: Option<S>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport<S> {
    pub meteor: S,
    pub kg_gold: S,
    pub kg_input: S,
    pub diversity: Option<S>,
    pub contrastiveness: Option<S>,
    pub per_instance: Vec<PerInstanceMetrics<S>>,
    /// Meteor configuration note (stage list); synonym/paraphrase stages are
    /// not implemented.
    pub meteor_stages: String,
}

impl<S: Scalar> MetricsReport<S> {
    pub fn render_table(&self) -> String {
        let fmt_opt = |o: Option<S>| match o {
            Some(v) => format!("{:.2}", v.to_f64().unwrap_or(f64::NAN)),
            None => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "instances", "Me", "KG(G)", "KG(I)", "Di", "Co"
        ));
        out.push_str(&format!(
            "{:<12} {:>8.4} {:>8.2} {:>8.2} {:>8} {:>8}\n",
            self.per_instance.len(),
            self.meteor.to_f64().unwrap_or(f64::NAN),
            self.kg_gold.to_f64().unwrap_or(f64::NAN),
            self.kg_input.to_f64().unwrap_or(f64::NAN),
            fmt_opt(self.diversity),
            fmt_opt(self.contrastiveness),
        ));
        out
    }
}

fn mean_of_defined<S: Scalar>(values: impl Iterator<Item = Option<S>>) -> S {
    let defined: Vec<S> = values.flatten().collect();
    if defined.is_empty() {
        S::zero()
    } else {
        defined.iter().cloned().sum::<S>() / sc::<S>(defined.len() as f64)
    }
}

/// Evaluate system outputs against their instances: macro-averaged Meteor
/// and KG rates (output tuples come from [`extract_graph`]), pooled trigram
/// diversity, and per-food contrastiveness.
pub fn evaluate_system<S: Scalar>(
    instances: &[&SummaryInstance],
    outputs: &[SystemOutput],
    models: &KnowledgeModels<S>,
    emb: &Embeddings<S>,
    cfg: &TupleMatchConfig<S>,
) -> Result<MetricsReport<S>> {
    cfg.validate()?;
    let mut by_index: BTreeMap<usize, &str> = BTreeMap::new();
    for o in outputs {
        by_index.insert(o.instance, o.output.as_str());
    }
    let missing: Vec<String> = (0..instances.len())
        .filter(|i| !by_index.contains_key(i))
        .map(|i| format!("{i} ({})", instances[i].food))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation {
            instance: missing.join(", "),
            field: "outputs".into(),
            message: "missing system output for instance(s)".into(),
        });
    }

    let mut per_instance = Vec::with_capacity(instances.len());
    let mut texts = Vec::with_capacity(instances.len());
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let text = by_index[&i].to_string();
        let out_tuples = if text.trim().is_empty() {
            Vec::new()
        } else {
            extract_graph(models, emb, &text)
        };
        let input_tuples: Vec<RelationTuple> =
            inst.input_tuples().into_iter().cloned().collect();
        let m = meteor::<S>(&text, &inst.gold_summary);
        let kg_g = kg_match_rate(&out_tuples, &inst.gold_tuples, emb, cfg);
        let kg_i = kg_match_rate(&out_tuples, &input_tuples, emb, cfg);
        per_instance.push(PerInstanceMetrics {
            instance: i,
            food: inst.food.clone(),
            meteor: m,
            kg_gold: kg_g,
            kg_input: kg_i,
        });
        let group_key = inst
            .bullet_group_id
            .clone()
            .unwrap_or_else(|| inst.food.clone());
        groups.entry(group_key).or_default().push(text.clone());
        texts.push(text);
    }

    let meteor_mean = if per_instance.is_empty() {
        S::zero()
    } else {
        per_instance.iter().map(|p| p.meteor).sum::<S>()
            / sc::<S>(per_instance.len() as f64)
    };
    let group_list: Vec<Vec<String>> = groups.into_values().collect();
    Ok(MetricsReport {
        meteor: meteor_mean,
        kg_gold: mean_of_defined(per_instance.iter().map(|p| p.kg_gold)),
        kg_input: mean_of_defined(per_instance.iter().map(|p| p.kg_input)),
        diversity: diversity(&texts),
        contrastiveness: contrastiveness(&group_list, &models.sentiment, emb),
        per_instance,
        meteor_stages: "exact+stem (alpha=0.9, gamma=0.5, beta=3); no synonym/paraphrase stages"
            .into(),
    })
}
