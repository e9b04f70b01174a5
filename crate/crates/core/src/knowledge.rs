//! Entity tagging, relation classification, sentiment classification, and
//! tuple-graph extraction.
//!
//! The default implementations are a longest-match lexicon tagger and
//! bag-of-embeddings linear classifiers. Heavier taggers/classifiers can be
//! swapped in behind the same types: the tagger accepts an optional learned
//! span scorer, and the classifiers are plain parameter structs loadable
//! from checkpoints.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    pair_admits_relation, relation_is_legal, Dataset, EntitySpan, EntityType, Relation,
    RelationTuple, Sentiment, Split,
};
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::nn::{cross_entropy_logits, sigmoid, softmax, AdamParams, Linear, LinearAdam};
use crate::num::{sc, Scalar};
use crate::rng::Rng;
use crate::text::{split_sentences, tokenize};

// ── entity tagging ─────────────────────────────────────────────────────────

/// Lexicon-backed entity tagger. Surface forms are stored lowercase; tagging
/// is case-insensitive, left-to-right, longest match wins, spans never
/// overlap. The optional scorer gates candidate spans on simple features
/// (plug-in point for a learned sequence scorer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTaggerModel<S> {
    lexicon: BTreeMap<String, EntityType>,
    max_phrase_tokens: usize,
    pub scorer: Option<Linear<S>>,
}

/// Features for the optional span scorer: [token_count, onehot(etype)].
pub const TAG_SCORER_DIM: usize = 5;

impl<S: Scalar> EntityTaggerModel<S> {
    pub fn new(entries: impl IntoIterator<Item = (String, EntityType)>) -> Result<Self> {
        let mut lexicon = BTreeMap::new();
        for (surface, etype) in entries {
            let key = surface.trim().to_lowercase();
            if key.is_empty() {
                return Err(Error::validation(
                    "lexicon",
                    "surface",
                    "lexicon keys must be non-empty",
                ));
            }
            lexicon.insert(key, etype);
        }
        let max_phrase_tokens = lexicon
            .keys()
            .map(|k| k.split_whitespace().count())
            .max()
            .unwrap_or(1);
        Ok(EntityTaggerModel {
            lexicon,
            max_phrase_tokens,
            scorer: None,
        })
    }

    pub fn lexicon(&self) -> &BTreeMap<String, EntityType> {
        &self.lexicon
    }

    /// Collect every tuple entity in the dataset into a lexicon.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let mut entries = Vec::new();
        for inst in &dataset.instances {
            for t in inst.gold_tuples.iter().chain(
                inst.abstracts
                    .iter()
                    .flat_map(|a| a.sentences.iter())
                    .flat_map(|s| s.tuples.iter()),
            ) {
                entries.push((t.ei.text.clone(), t.ei.etype));
                entries.push((t.ej.text.clone(), t.ej.etype));
            }
        }
        EntityTaggerModel::new(entries)
    }

    /// Load a `surface\tetype` TSV lexicon.
    pub fn from_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let surface = parts.next().unwrap_or_default();
            let etype_str = parts.next().ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: "expected `surface\\tetype`".into(),
            })?;
            let etype = match etype_str.trim() {
                "food" => EntityType::Food,
                "nutrition" => EntityType::Nutrition,
                "condition" => EntityType::Condition,
                "population" => EntityType::Population,
                other => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message: format!("unknown etype `{other}`"),
                    })
                }
            };
            entries.push((surface.to_string(), etype));
        }
        EntityTaggerModel::new(entries)
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (surface, etype) in &self.lexicon {
            writeln!(file, "{surface}\t{etype}")?;
        }
        Ok(())
    }

    fn accepts(&self, token_count: usize, etype: EntityType) -> bool {
        match &self.scorer {
            None => true,
            Some(scorer) => {
                let mut feats = vec![S::zero(); TAG_SCORER_DIM];
                feats[0] = sc(token_count as f64);
                let idx = 1 + match etype {
                    EntityType::Food => 0,
                    EntityType::Nutrition => 1,
                    EntityType::Condition => 2,
                    EntityType::Population => 3,
                };
                feats[idx] = S::one();
                sigmoid(scorer.forward(&feats)[0]) >= sc(0.5)
            }
        }
    }
}

/// Tag entities in a sentence: non-overlapping spans, left-to-right, longest
/// lexicon match wins. Empty result is fine; an empty sentence violates the
/// precondition.
pub fn tag_entities<S: Scalar>(
    model: &EntityTaggerModel<S>,
    sentence: &str,
) -> Result<Vec<EntitySpan>> {
    if sentence.trim().is_empty() {
        return Err(Error::Precondition("tag_entities: empty sentence".into()));
    }
    let tokens = tokenize(sentence);
    let mut spans = Vec::new();
    let mut i = 0usize;
    while i < tokens.len() {
        let mut matched = None;
        let max_len = model.max_phrase_tokens.min(tokens.len() - i);
        for len in (1..=max_len).rev() {
            let surface = tokens[i..i + len]
                .iter()
                .map(|t| t.text.to_lowercase())
                .collect::<Vec<_>>()
                .join(" ");
            if let Some(&etype) = model.lexicon.get(&surface) {
                if model.accepts(len, etype) {
                    matched = Some((len, etype));
                    break;
                }
            }
        }
        if let Some((len, etype)) = matched {
            let start = tokens[i].start;
            let end = tokens[i + len - 1].end;
            spans.push(EntitySpan::new(
                crate::text::char_substring(sentence, start, end),
                start,
                end,
                etype,
            ));
            i += len;
        } else {
            i += 1;
        }
    }
    Ok(spans)
}

// ── relation / sentiment label spaces ──────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationLabel {
    Relation(Relation),
    NoRelation,
}

impl RelationLabel {
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        match self {
            RelationLabel::Relation(Relation::Contain) => 0,
            RelationLabel::Relation(Relation::Increase) => 1,
            RelationLabel::Relation(Relation::Decrease) => 2,
            RelationLabel::Relation(Relation::Satisfy) => 3,
            RelationLabel::Relation(Relation::Control) => 4,
            RelationLabel::NoRelation => 5,
        }
    }

    pub fn from_index(i: usize) -> RelationLabel {
        match i {
            0 => RelationLabel::Relation(Relation::Contain),
            1 => RelationLabel::Relation(Relation::Increase),
            2 => RelationLabel::Relation(Relation::Decrease),
            3 => RelationLabel::Relation(Relation::Satisfy),
            4 => RelationLabel::Relation(Relation::Control),
            _ => RelationLabel::NoRelation,
        }
    }
}

impl std::fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelationLabel::Relation(r) => write!(f, "{r}"),
            RelationLabel::NoRelation => write!(f, "no_relation"),
        }
    }
}

fn sentiment_index(s: Sentiment) -> usize {
    match s {
        Sentiment::Positive => 0,
        Sentiment::Negative => 1,
        Sentiment::Neutral => 2,
    }
}

fn sentiment_from_index(i: usize) -> Sentiment {
    match i {
        0 => Sentiment::Positive,
        1 => Sentiment::Negative,
        _ => Sentiment::Neutral,
    }
}

// ── relation classifier ────────────────────────────────────────────────────

/// Bag-of-embeddings text-pair classifier over
/// `[sentence_mean; between_mean; ei_mean; ej_mean; onehot(ei); onehot(ej)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationClassifierModel<S> {
    pub linear: Linear<S>,
    pub emb_dim: usize,
}

fn etype_onehot<S: Scalar>(etype: EntityType) -> [S; 4] {
    let mut v = [S::zero(); 4];
    let idx = match etype {
        EntityType::Food => 0,
        EntityType::Nutrition => 1,
        EntityType::Condition => 2,
        EntityType::Population => 3,
    };
    v[idx] = S::one();
    v
}

fn relation_features<S: Scalar>(
    emb: &Embeddings<S>,
    sentence: &str,
    ei: &EntitySpan,
    ej: &EntitySpan,
) -> Vec<S> {
    let d = emb.dim();
    let mut feats = Vec::with_capacity(4 * d + 8);
    feats.extend(emb.mean_embedding(sentence));
    // tokens strictly between the two entity spans
    let (lo, hi) = if ei.end <= ej.start {
        (ei.end, ej.start)
    } else if ej.end <= ei.start {
        (ej.end, ei.start)
    } else {
        (0, 0) // overlapping spans: no between-text
    };
    let between = crate::text::char_substring(sentence, lo, hi);
    feats.extend(emb.mean_embedding(&between));
    feats.extend(emb.mean_embedding(&ei.text));
    feats.extend(emb.mean_embedding(&ej.text));
    feats.extend(etype_onehot::<S>(ei.etype));
    feats.extend(etype_onehot::<S>(ej.etype));
    feats
}

impl<S: Scalar> RelationClassifierModel<S> {
    pub fn feature_dim(emb_dim: usize) -> usize {
        4 * emb_dim + 8
    }

    /// Distribution over [`RelationLabel`]s with relations that are illegal
    /// for this entity-type pair masked out; sums to 1.
    pub fn distribution(
        &self,
        emb: &Embeddings<S>,
        sentence: &str,
        ei: &EntitySpan,
        ej: &EntitySpan,
    ) -> Vec<S> {
        let feats = relation_features(emb, sentence, ei, ej);
        let mut logits = self.linear.forward(&feats);
        for r in Relation::ALL {
            if !relation_is_legal(ei.etype, ej.etype, r) {
                logits[RelationLabel::Relation(r).index()] = S::neg_infinity();
            }
        }
        softmax(&logits)
    }
}

/// Argmax relation label and its confidence. Errors when the entity-type
/// pair admits no relation at all, or when the spans do not sit in the
/// sentence.
pub fn classify_relation<S: Scalar>(
    model: &RelationClassifierModel<S>,
    emb: &Embeddings<S>,
    sentence: &str,
    ei: &EntitySpan,
    ej: &EntitySpan,
) -> Result<(RelationLabel, S)> {
    ei.validate_in(sentence)
        .and_then(|_| ej.validate_in(sentence))
        .map_err(|e| Error::Precondition(format!("classify_relation: {e}")))?;
    if !pair_admits_relation(ei.etype, ej.etype) {
        return Err(Error::Constraint(format!(
            "no relation is legal for entity pair ({}, {})",
            ei.etype, ej.etype
        )));
    }
    let dist = model.distribution(emb, sentence, ei, ej);
    let (best, conf) = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &p)| (i, p))
        .unwrap();
    Ok((RelationLabel::from_index(best), conf))
}

// ── sentiment classifier ───────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentModel<S> {
    pub linear: Linear<S>,
    pub emb_dim: usize,
}

impl<S: Scalar> SentimentModel<S> {
    pub fn distribution(&self, emb: &Embeddings<S>, text: &str) -> Vec<S> {
        softmax(&self.linear.forward(&emb.mean_embedding(text)))
    }
}

/// Argmax sentiment; text with no in-vocabulary tokens falls back to the
/// declared default, neutral.
pub fn classify_sentiment<S: Scalar>(
    model: &SentimentModel<S>,
    emb: &Embeddings<S>,
    text: &str,
) -> Result<Sentiment> {
    if text.trim().is_empty() {
        return Err(Error::Precondition("classify_sentiment: empty text".into()));
    }
    if !emb.covers(text) {
        return Ok(Sentiment::Neutral);
    }
    let dist = model.distribution(emb, text);
    let best = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(sentiment_from_index(best))
}

// ── shared linear-classifier training ──────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub holdout_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            seed: 42,
            epochs: 40,
            lr: 0.05,
            holdout_fraction: 0.2,
        }
    }
}

/// Seeded Adam training of a linear softmax classifier; returns the layer
/// and held-out accuracy.
pub(crate) fn train_linear_classifier<S: Scalar>(
    examples: &[(Vec<S>, usize)],
    n_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<(Linear<S>, f64)> {
    if examples.is_empty() {
        return Err(Error::Training("no training examples".into()));
    }
    let classes: std::collections::BTreeSet<usize> =
        examples.iter().map(|(_, y)| *y).collect();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }
    let dim = examples[0].0.len();
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    rng.shuffle(&mut order);
    let n_holdout = ((examples.len() as f64 * cfg.holdout_fraction) as usize)
        .max(1)
        .min(examples.len() - 1);
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    let mut layer = Linear::<S>::init(dim, n_classes, &mut rng);
    let mut grads = Linear::<S>::zeros(dim, n_classes);
    let mut opt = LinearAdam::new(&layer);
    let hp = AdamParams::with_lr(cfg.lr);
    let mut t = 0u64;
    for _epoch in 0..cfg.epochs {
        for &i in train_idx {
            let (x, y) = &examples[i];
            let logits = layer.forward(x);
            let (loss, dlogits) = cross_entropy_logits(&logits, *y);
            if !loss.is_finite() {
                return Err(Error::Training("loss diverged (non-finite)".into()));
            }
            layer.backward(x, &dlogits, &mut grads, None);
            t += 1;
            opt.step(t, &hp, &mut layer, &mut grads);
        }
    }
    let mut correct = 0usize;
    for &i in holdout_idx {
        let (x, y) = &examples[i];
        let logits = layer.forward(x);
        let pred = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if pred == *y {
            correct += 1;
        }
    }
    Ok((layer, correct as f64 / holdout_idx.len() as f64))
}

// ── trainers ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct RelationExample {
    pub sentence: String,
    pub ei: EntitySpan,
    pub ej: EntitySpan,
    pub label: RelationLabel,
}

pub fn train_relation_classifier<S: Scalar>(
    examples: &[RelationExample],
    emb: &Embeddings<S>,
    cfg: &ClassifierConfig,
) -> Result<(RelationClassifierModel<S>, f64)> {
    let feats: Vec<(Vec<S>, usize)> = examples
        .iter()
        .map(|ex| {
            (
                relation_features(emb, &ex.sentence, &ex.ei, &ex.ej),
                ex.label.index(),
            )
        })
        .collect();
    let (linear, acc) = train_linear_classifier(&feats, RelationLabel::COUNT, cfg)?;
    Ok((
        RelationClassifierModel {
            linear,
            emb_dim: emb.dim(),
        },
        acc,
    ))
}

pub fn train_sentiment<S: Scalar>(
    examples: &[(String, Sentiment)],
    emb: &Embeddings<S>,
    cfg: &ClassifierConfig,
) -> Result<(SentimentModel<S>, f64)> {
    let feats: Vec<(Vec<S>, usize)> = examples
        .iter()
        .map(|(text, s)| (emb.mean_embedding(text), sentiment_index(*s)))
        .collect();
    let (linear, acc) = train_linear_classifier(&feats, 3, cfg)?;
    Ok((
        SentimentModel {
            linear,
            emb_dim: emb.dim(),
        },
        acc,
    ))
}

/// Derive relation training examples from a dataset split: one positive per
/// annotated tuple, plus a NoRelation example for every legal-but-unannotated
/// entity pair the tagger would enumerate in the same sentences.
pub fn relation_examples_from_dataset<S: Scalar>(
    dataset: &Dataset,
    split: Split,
    tagger: &EntityTaggerModel<S>,
) -> Vec<RelationExample> {
    let mut out = Vec::new();
    for inst in dataset.split(split) {
        for abs in &inst.abstracts {
            for sent in &abs.sentences {
                for t in &sent.tuples {
                    out.push(RelationExample {
                        sentence: sent.text.clone(),
                        ei: t.ei.clone(),
                        ej: t.ej.clone(),
                        label: RelationLabel::Relation(t.r),
                    });
                }
                if sent.tuples.is_empty() {
                    continue;
                }
                let spans = tag_entities(tagger, &sent.text).unwrap_or_default();
                for a in &spans {
                    for b in &spans {
                        if a.same_span(b) || !pair_admits_relation(a.etype, b.etype) {
                            continue;
                        }
                        let annotated = sent
                            .tuples
                            .iter()
                            .any(|t| t.ei.same_span(a) && t.ej.same_span(b));
                        if !annotated {
                            out.push(RelationExample {
                                sentence: sent.text.clone(),
                                ei: a.clone(),
                                ej: b.clone(),
                                label: RelationLabel::NoRelation,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Sentences carrying a sentiment label, for sentiment training.
pub fn sentiment_examples_from_dataset(dataset: &Dataset, split: Split) -> Vec<(String, Sentiment)> {
    dataset
        .split(split)
        .flat_map(|i| i.abstracts.iter())
        .flat_map(|a| a.sentences.iter())
        .filter_map(|s| s.sentiment.map(|label| (s.text.clone(), label)))
        .collect()
}

// ── graph extraction ───────────────────────────────────────────────────────

/// The trained pieces needed to build a tuple graph over arbitrary text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeModels<S> {
    pub tagger: EntityTaggerModel<S>,
    pub relation: RelationClassifierModel<S>,
    pub sentiment: SentimentModel<S>,
    /// Confidence gate on predicted tuples.
    pub theta_rel: S,
}

/// Tag each sentence, enumerate legal ordered pairs, classify, and keep
/// predicted tuples with `r != NoRelation` and confidence >= theta_rel.
/// Tuple offsets are relative to their owning sentence.
pub fn extract_graph<S: Scalar>(
    models: &KnowledgeModels<S>,
    emb: &Embeddings<S>,
    text: &str,
) -> Vec<RelationTuple> {
    let mut tuples = Vec::new();
    for sentence in split_sentences(text) {
        let spans = match tag_entities(&models.tagger, &sentence) {
            Ok(s) => s,
            Err(_) => continue,
        };
        for a in &spans {
            for b in &spans {
                if a.same_span(b) || !pair_admits_relation(a.etype, b.etype) {
                    continue;
                }
                let (label, conf) =
                    match classify_relation(&models.relation, emb, &sentence, a, b) {
                        Ok(x) => x,
                        Err(_) => continue,
                    };
                if let RelationLabel::Relation(r) = label {
                    if conf >= models.theta_rel {
                        tuples.push(RelationTuple::new(a.clone(), b.clone(), r));
                    }
                }
            }
        }
    }
    tuples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_corpus;

    fn small_tagger() -> EntityTaggerModel<f64> {
        EntityTaggerModel::new([
            ("apple".to_string(), EntityType::Food),
            ("orange".to_string(), EntityType::Food),
            ("orange juice".to_string(), EntityType::Food),
            ("fiber".to_string(), EntityType::Nutrition),
            ("hydration".to_string(), EntityType::Condition),
        ])
        .unwrap()
    }

    #[test]
    fn tags_food_and_nutrition() {
        let spans = tag_entities(&small_tagger(), "apple contains fiber").unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].text, "apple");
        assert_eq!(spans[0].etype, EntityType::Food);
        assert_eq!(spans[1].text, "fiber");
        assert_eq!(spans[1].etype, EntityType::Nutrition);
    }

    #[test]
    fn longest_match_wins() {
        let spans = tag_entities(&small_tagger(), "orange juice improves hydration").unwrap();
        assert_eq!(spans[0].text, "orange juice");
        assert_eq!(spans.len(), 2);
    }

    #[test]
    fn no_lexicon_hits_is_empty() {
        let spans = tag_entities(&small_tagger(), "the the the").unwrap();
        assert!(spans.is_empty());
    }

    #[test]
    fn empty_sentence_is_precondition_error() {
        assert!(tag_entities(&small_tagger(), "  ").is_err());
    }

    #[test]
    fn spans_are_sorted_and_non_overlapping() {
        let d = synth_corpus(3, 10, 4);
        let tagger = EntityTaggerModel::<f64>::from_dataset(&d).unwrap();
        for inst in &d.instances {
            for abs in &inst.abstracts {
                for sent in &abs.sentences {
                    if sent.text.trim().is_empty() {
                        continue;
                    }
                    let spans = tag_entities(&tagger, &sent.text).unwrap();
                    for w in spans.windows(2) {
                        assert!(w[0].end <= w[1].start, "overlap in `{}`", sent.text);
                    }
                    for s in &spans {
                        s.validate_in(&sent.text).expect("tagged span invalid");
                    }
                }
            }
        }
    }

    #[test]
    fn longest_match_agrees_with_brute_force_enumeration() {
        // oracle: enumerate every lexicon-matching span, then greedily take
        // the leftmost-longest non-overlapping ones
        let tagger = small_tagger();
        let sentence = "orange juice and orange with fiber support hydration";
        let tokens = tokenize(sentence);
        let mut all: Vec<(usize, usize)> = Vec::new(); // (tok_start, tok_len)
        for i in 0..tokens.len() {
            for len in 1..=(tokens.len() - i) {
                let surface = tokens[i..i + len]
                    .iter()
                    .map(|t| t.text.to_lowercase())
                    .collect::<Vec<_>>()
                    .join(" ");
                if tagger.lexicon().contains_key(&surface) {
                    all.push((i, len));
                }
            }
        }
        let mut oracle = Vec::new();
        let mut pos = 0usize;
        while pos < tokens.len() {
            let best = all
                .iter()
                .filter(|(s, _)| *s == pos)
                .max_by_key(|(_, l)| *l)
                .copied();
            if let Some((s, l)) = best {
                oracle.push((s, l));
                pos = s + l;
            } else {
                pos += 1;
            }
        }
        let got = tag_entities(&tagger, sentence).unwrap();
        assert_eq!(got.len(), oracle.len());
        for (span, (s, l)) in got.iter().zip(oracle.iter()) {
            assert_eq!(span.start, tokens[*s].start);
            assert_eq!(span.end, tokens[s + l - 1].end);
        }
    }

    #[test]
    fn scorer_can_suppress_spans() {
        let mut tagger = small_tagger();
        // scorer that rejects everything
        let mut reject = Linear::<f64>::zeros(TAG_SCORER_DIM, 1);
        reject.b[0] = -10.0;
        tagger.scorer = Some(reject);
        let spans = tag_entities(&tagger, "apple contains fiber").unwrap();
        assert!(spans.is_empty());
    }

    fn synth_embeddings(d: &Dataset) -> Embeddings<f64> {
        let mut vocab = std::collections::BTreeSet::new();
        for inst in &d.instances {
            for w in inst.gold_summary.split_whitespace() {
                vocab.insert(w.to_lowercase());
            }
            for abs in &inst.abstracts {
                for s in &abs.sentences {
                    for w in s.text.split_whitespace() {
                        vocab.insert(w.to_lowercase());
                    }
                }
            }
        }
        Embeddings::seeded_from_vocab(vocab.iter().map(|s| s.as_str()), 32, 7)
    }

    fn trained_relation_setup() -> (
        Dataset,
        EntityTaggerModel<f64>,
        RelationClassifierModel<f64>,
        Embeddings<f64>,
        f64,
    ) {
        let d = synth_corpus(5, 40, 5);
        let tagger = EntityTaggerModel::from_dataset(&d).unwrap();
        let emb = synth_embeddings(&d);
        let examples = relation_examples_from_dataset(&d, Split::Train, &tagger);
        let (model, acc) =
            train_relation_classifier(&examples, &emb, &ClassifierConfig::default()).unwrap();
        (d, tagger, model, emb, acc)
    }

    #[test]
    fn relation_classifier_learns_keyword_templates() {
        let (_, _, model, emb, acc) = trained_relation_setup();
        assert!(acc >= 0.95, "held-out accuracy {acc} < 0.95");
        // spec fixture: keyword "lowers" maps to decrease
        let sentence = "a randomized trial involving adults found that apples lowers cholesterol , compared with the placebo group .";
        let toks = tokenize(sentence);
        let ei_tok = toks.iter().find(|t| t.text == "apples").unwrap();
        let ej_start = toks.iter().find(|t| t.text == "cholesterol").unwrap();
        let ei = EntitySpan::new("apples", ei_tok.start, ei_tok.end, EntityType::Food);
        let ej = EntitySpan::new(
            "cholesterol",
            ej_start.start,
            ej_start.end,
            EntityType::Condition,
        );
        let (label, _) = classify_relation(&model, &emb, sentence, &ei, &ej).unwrap();
        assert_eq!(label, RelationLabel::Relation(Relation::Decrease));
    }

    #[test]
    fn classifies_the_schema_examples_after_fixture_training() {
        // train a tiny classifier over the schema's own example surfaces
        let emb = Embeddings::<f64>::seeded_from_vocab(
            [
                "apple", "apples", "contains", "contain", "fiber", "orange", "juice",
                "improves", "hydration", "bananas", "metabolism", "increase", "increases",
                "lowers", "cholesterol", "helps", "control", "may",
            ],
            24,
            13,
        );
        let span = |text: &str, start: usize, etype| {
            EntitySpan::new(text, start, start + text.chars().count(), etype)
        };
        let mut examples = Vec::new();
        let mut push = |sentence: &str, ei: EntitySpan, ej: EntitySpan, r: Relation| {
            examples.push(RelationExample {
                sentence: sentence.to_string(),
                ei,
                ej,
                label: RelationLabel::Relation(r),
            });
        };
        for _ in 0..12 {
            push(
                "apple contains fiber",
                span("apple", 0, EntityType::Food),
                span("fiber", 15, EntityType::Nutrition),
                Relation::Contain,
            );
            push(
                "orange juice improves hydration",
                span("orange juice", 0, EntityType::Food),
                span("hydration", 22, EntityType::Condition),
                Relation::Satisfy,
            );
            push(
                "bananas may increase metabolism",
                span("bananas", 0, EntityType::Food),
                span("metabolism", 21, EntityType::Condition),
                Relation::Increase,
            );
            push(
                "apples lowers cholesterol",
                span("apples", 0, EntityType::Food),
                span("cholesterol", 14, EntityType::Condition),
                Relation::Decrease,
            );
            push(
                "fiber helps control cholesterol",
                span("fiber", 0, EntityType::Nutrition),
                span("cholesterol", 20, EntityType::Condition),
                Relation::Control,
            );
        }
        let (model, acc) =
            train_relation_classifier(&examples, &emb, &ClassifierConfig::default()).unwrap();
        assert!(acc >= 0.95);

        let (label, conf) = classify_relation(
            &model,
            &emb,
            "apple contains fiber",
            &span("apple", 0, EntityType::Food),
            &span("fiber", 15, EntityType::Nutrition),
        )
        .unwrap();
        assert_eq!(label, RelationLabel::Relation(Relation::Contain));
        assert!(conf > 0.5);

        let (label, _) = classify_relation(
            &model,
            &emb,
            "orange juice improves hydration",
            &span("orange juice", 0, EntityType::Food),
            &span("hydration", 22, EntityType::Condition),
        )
        .unwrap();
        assert_eq!(label, RelationLabel::Relation(Relation::Satisfy));

        // the whole graph path on the containing example
        let tagger = EntityTaggerModel::new([
            ("apple".to_string(), EntityType::Food),
            ("fiber".to_string(), EntityType::Nutrition),
        ])
        .unwrap();
        let sentiment = SentimentModel {
            linear: crate::nn::Linear::zeros(emb.dim(), 3),
            emb_dim: emb.dim(),
        };
        let models = KnowledgeModels {
            tagger,
            relation: model,
            sentiment,
            theta_rel: 0.5,
        };
        let graph = extract_graph(&models, &emb, "apple contains fiber");
        assert_eq!(graph.len(), 1);
        assert_eq!(graph[0].ei.text, "apple");
        assert_eq!(graph[0].ej.text, "fiber");
        assert_eq!(graph[0].r, Relation::Contain);
    }

    #[test]
    fn distribution_is_a_probability_vector() {
        let (_, _, model, emb, _) = trained_relation_setup();
        let sentence = "apples lowers cholesterol";
        let ei = EntitySpan::new("apples", 0, 6, EntityType::Food);
        let ej = EntitySpan::new("cholesterol", 14, 25, EntityType::Condition);
        let dist = model.distribution(&emb, sentence, &ei, &ej);
        let sum: f64 = dist.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(dist.iter().all(|&p| (0.0..=1.0).contains(&p)));
        // contain is illegal for (food, condition) and must be masked to 0
        assert_eq!(dist[RelationLabel::Relation(Relation::Contain).index()], 0.0);
    }

    #[test]
    fn illegal_pair_is_constraint_error() {
        let (_, _, model, emb, _) = trained_relation_setup();
        let sentence = "adults enjoy apples";
        let ei = EntitySpan::new("adults", 0, 6, EntityType::Population);
        let ej = EntitySpan::new("apples", 13, 19, EntityType::Food);
        match classify_relation(&model, &emb, sentence, &ei, &ej) {
            Err(Error::Constraint(_)) => {}
            other => panic!("expected constraint error, got {other:?}"),
        }
    }

    #[test]
    fn extract_graph_recovers_planted_tuples() {
        let (d, tagger, model, emb, _) = trained_relation_setup();
        let examples = sentiment_examples_from_dataset(&d, Split::Train);
        let (sentiment, _) = train_sentiment(&examples, &emb, &ClassifierConfig::default()).unwrap();
        let models = KnowledgeModels {
            tagger,
            relation: model,
            sentiment,
            theta_rel: 0.5,
        };
        let mut planted = 0usize;
        let mut recovered = 0usize;
        for inst in d.split(Split::Dev) {
            for abs in &inst.abstracts {
                for sent in &abs.sentences {
                    let got = extract_graph(&models, &emb, &sent.text);
                    for t in &sent.tuples {
                        planted += 1;
                        if got.iter().any(|g| g.signature() == t.signature()) {
                            recovered += 1;
                        }
                    }
                    // legality invariant on everything extracted
                    for g in &got {
                        assert!(relation_is_legal(g.ei.etype, g.ej.etype, g.r));
                    }
                }
            }
        }
        assert!(planted > 0);
        let rate = recovered as f64 / planted as f64;
        assert!(rate >= 0.9, "recovered {recovered}/{planted} = {rate}");
    }

    #[test]
    fn extract_graph_empty_text_yields_nothing() {
        let (_, tagger, model, emb, _) = trained_relation_setup();
        let d2 = synth_corpus(5, 4, 2);
        let sentiment_examples = sentiment_examples_from_dataset(&d2, Split::Train);
        let (sentiment, _) =
            train_sentiment(&sentiment_examples, &emb, &ClassifierConfig::default()).unwrap();
        let models = KnowledgeModels {
            tagger,
            relation: model,
            sentiment,
            theta_rel: 0.5,
        };
        assert!(extract_graph(&models, &emb, "nothing to see here .").is_empty());
        assert!(extract_graph(&models, &emb, "").is_empty());
    }

    #[test]
    fn sentiment_learns_template_polarity() {
        let d = synth_corpus(9, 60, 5);
        let emb = synth_embeddings(&d);
        let examples = sentiment_examples_from_dataset(&d, Split::Train);
        let (model, acc) = train_sentiment(&examples, &emb, &ClassifierConfig::default()).unwrap();
        assert!(acc >= 0.9, "sentiment held-out accuracy {acc}");
        // reduction reads positive, increase reads negative on the fixture
        let pos = classify_sentiment(&model, &emb, "apples lowers cholesterol").unwrap();
        assert_eq!(pos, Sentiment::Positive);
        let neg = classify_sentiment(&model, &emb, "apples may increase heart disease").unwrap();
        assert_eq!(neg, Sentiment::Negative);
    }

    #[test]
    fn oov_text_defaults_to_neutral() {
        let d = synth_corpus(9, 10, 3);
        let emb = synth_embeddings(&d);
        let examples = sentiment_examples_from_dataset(&d, Split::Train);
        let (model, _) = train_sentiment(&examples, &emb, &ClassifierConfig::default()).unwrap();
        let got = classify_sentiment(&model, &emb, "zzz qqq www").unwrap();
        assert_eq!(got, Sentiment::Neutral);
    }

    #[test]
    fn single_class_training_fails() {
        let emb = Embeddings::<f64>::seeded_from_vocab(["good"], 8, 1);
        let examples = vec![("good".to_string(), Sentiment::Positive); 10];
        assert!(train_sentiment(&examples, &emb, &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn separable_two_class_toy_set_is_perfect() {
        let emb = Embeddings::<f64>::seeded_from_vocab(["up", "down"], 8, 3);
        let mut examples = Vec::new();
        for _ in 0..20 {
            examples.push(("up up up".to_string(), Sentiment::Positive));
            examples.push(("down down down".to_string(), Sentiment::Negative));
        }
        let (_, acc) = train_sentiment(&examples, &emb, &ClassifierConfig::default()).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn permuted_labels_give_chance_level_accuracy() {
        // two balanced classes with informative features, labels shuffled
        let emb = Embeddings::<f64>::seeded_from_vocab(["up", "down"], 8, 3);
        let mut rng = Rng::seed_from_u64(99);
        let mut examples: Vec<(String, Sentiment)> = (0..200)
            .map(|i| {
                if i % 2 == 0 {
                    ("up up".to_string(), Sentiment::Positive)
                } else {
                    ("down down".to_string(), Sentiment::Negative)
                }
            })
            .collect();
        // permute the labels independently of the features
        let mut labels: Vec<Sentiment> = examples.iter().map(|(_, l)| *l).collect();
        rng.shuffle(&mut labels);
        for (ex, l) in examples.iter_mut().zip(labels) {
            ex.1 = l;
        }
        let (_, acc) = train_sentiment(&examples, &emb, &ClassifierConfig::default()).unwrap();
        assert!(
            (acc - 0.5).abs() <= 0.15,
            "permuted labels should be chance level, got {acc}"
        );
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let d = synth_corpus(5, 12, 3);
        let emb = synth_embeddings(&d);
        let tagger = EntityTaggerModel::<f64>::from_dataset(&d).unwrap();
        let examples = relation_examples_from_dataset(&d, Split::Train, &tagger);
        let cfg = ClassifierConfig::default();
        let (a, acc_a) = train_relation_classifier(&examples, &emb, &cfg).unwrap();
        let (b, acc_b) = train_relation_classifier(&examples, &emb, &cfg).unwrap();
        assert_eq!(acc_a, acc_b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn tsv_round_trip() {
        let tagger = small_tagger();
        let dir = std::env::temp_dir().join(format!("nb_lex_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("lexicon.tsv");
        tagger.save_tsv(&path).unwrap();
        let loaded = EntityTaggerModel::<f64>::from_tsv(&path).unwrap();
        assert_eq!(tagger.lexicon(), loaded.lexicon());
        std::fs::remove_dir_all(&dir).ok();
    }
}
