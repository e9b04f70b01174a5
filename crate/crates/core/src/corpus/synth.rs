//! Synthetic corpus generator.
//!
//! Builds deterministic (abstracts, summary) instances from sentence
//! templates over a closed lexicon. Each relation is verbalized with a
//! dedicated keyword verb, so the relation label of a sentence is fully
//! determined by one word — the property the extraction and classification
//! fixtures rely on. Gold summaries verbalize a known subset of the input
//! tuples, so content selection has a known optimum.

use super::{
    Dataset, EntitySpan, EntityType, Relation, RelationTuple, ScientificAbstract, Sentence,
    Sentiment, Split, SummaryInstance,
};
use crate::rng::Rng;

pub const FOODS: [&str; 16] = [
    "apples",
    "bananas",
    "oats",
    "spinach",
    "walnuts",
    "blueberries",
    "lentils",
    "salmon",
    "broccoli",
    "almonds",
    "oranges",
    "kale",
    "quinoa",
    "yogurt",
    "garlic",
    "tomatoes",
];

pub const NUTRITIONS: [&str; 10] = [
    "fiber",
    "potassium",
    "antioxidants",
    "protein",
    "magnesium",
    "folate",
    "polyphenols",
    "iron",
    "calcium",
    "zinc",
];

pub const CONDITIONS: [&str; 10] = [
    "cholesterol",
    "blood pressure",
    "inflammation",
    "blood sugar",
    "heart disease",
    "digestion",
    "hydration",
    "bone density",
    "fatigue",
    "anemia",
];

pub const POPULATIONS: [&str; 5] = ["adults", "older adults", "children", "women", "men"];

/// The single keyword verb that determines each relation in generated text.
pub fn relation_keyword(r: Relation) -> &'static str {
    match r {
        Relation::Contain => "contain",
        Relation::Increase => "increase",
        Relation::Decrease => "lowers",
        Relation::Satisfy => "improves",
        Relation::Control => "control",
    }
}

fn relation_sentiment(r: Relation) -> Sentiment {
    match r {
        Relation::Contain => Sentiment::Neutral,
        Relation::Increase => Sentiment::Negative,
        Relation::Decrease | Relation::Satisfy | Relation::Control => Sentiment::Positive,
    }
}

const PREFIXES: [&str; 5] = [
    "in a recent controlled study of {pop} , researchers reported that",
    "according to a longitudinal report on {pop} , it appears that",
    "a randomized trial involving {pop} found that",
    "clinical observations collected from {pop} indicate that",
    "survey data gathered across {pop} suggest that",
];

const SUFFIXES: [&str; 5] = [
    ", based on twelve weeks of follow up",
    ", compared with the placebo group",
    ", according to the published measurements",
    ", after adjusting for lifestyle factors",
    ", across repeated laboratory visits",
];

const FILLERS: [&str; 3] = [
    "the study protocol was reviewed by an independent board before enrollment began .",
    "participants recorded their meals in a standardized diary throughout the trial .",
    "funding sources had no role in the design or analysis of the experiment .",
];

/// String builder that tracks char offsets for entity spans.
struct SentenceBuilder {
    text: String,
    chars: usize,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder {
            text: String::new(),
            chars: 0,
        }
    }

    fn push(&mut self, s: &str) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn push_entity(&mut self, surface: &str, etype: EntityType) -> EntitySpan {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let start = self.chars;
        self.text.push_str(surface);
        self.chars += surface.chars().count();
        EntitySpan::new(surface, start, self.chars, etype)
    }
}

/// Verbalize a (subject, relation, object) fact as the middle clause of an
/// abstract sentence, returning (text, tuple).
fn abstract_sentence(
    ei_surface: &str,
    ei_type: EntityType,
    ej_surface: &str,
    ej_type: EntityType,
    r: Relation,
    rng: &mut Rng,
) -> (String, RelationTuple) {
    let mut b = SentenceBuilder::new();
    let prefix = PREFIXES[rng.index(PREFIXES.len())]
        .replace("{pop}", POPULATIONS[rng.index(POPULATIONS.len())]);
    b.push(&prefix);
    let ei = b.push_entity(ei_surface, ei_type);
    // single-token verbalization: the relation label is determined by
    // exactly one keyword
    b.push(relation_keyword(r));
    let ej = b.push_entity(ej_surface, ej_type);
    b.push(SUFFIXES[rng.index(SUFFIXES.len())]);
    b.push(".");
    (b.text, RelationTuple::new(ei, ej, r))
}

/// Verbalize one fact in summary style, returning (text, tuple).
fn summary_clause(
    ei_surface: &str,
    ei_type: EntityType,
    ej_surface: &str,
    ej_type: EntityType,
    r: Relation,
) -> (String, RelationTuple) {
    let mut b = SentenceBuilder::new();
    let ei = b.push_entity(ei_surface, ei_type);
    match r {
        Relation::Contain => b.push("contain plenty of"),
        Relation::Increase => b.push("may increase"),
        Relation::Decrease => b.push("may lower"),
        Relation::Satisfy => b.push("improves"),
        Relation::Control => b.push("help control"),
    }
    let ej = b.push_entity(ej_surface, ej_type);
    b.push(".");
    (b.text, RelationTuple::new(ei, ej, r))
}

/// Deterministic synthetic dataset: `n_foods` instances, each carrying
/// `tuples_per_food` input tuples spread over one to three abstracts, with a
/// gold summary verbalizing the first `min(2, tuples_per_food)` tuples.
pub fn synth_corpus(seed: u64, n_foods: usize, tuples_per_food: usize) -> Dataset {
    assert!(n_foods >= 1, "n_foods must be >= 1");
    let mut rng = Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n_foods);
    let relations = [
        Relation::Contain,
        Relation::Decrease,
        Relation::Increase,
        Relation::Satisfy,
        Relation::Control,
    ];

    for idx in 0..n_foods {
        // single-token surfaces so partial rationale masks cannot strand a
        // multi-word food name
        let food = if idx < FOODS.len() {
            FOODS[idx].to_string()
        } else {
            format!("{}{}", FOODS[idx % FOODS.len()], idx / FOODS.len())
        };

        // facts: (ei_surface, ei_type, ej_surface, ej_type, r)
        let mut facts = Vec::with_capacity(tuples_per_food.max(1));
        for k in 0..tuples_per_food.max(1) {
            let r = relations[k % relations.len()];
            match r {
                Relation::Contain => {
                    let nut = NUTRITIONS[rng.index(NUTRITIONS.len())];
                    facts.push((
                        food.clone(),
                        EntityType::Food,
                        nut.to_string(),
                        EntityType::Nutrition,
                        r,
                    ));
                }
                _ => {
                    let cond = CONDITIONS[rng.index(CONDITIONS.len())];
                    // occasionally a nutrition drives the condition instead of the food
                    if rng.bernoulli(0.2) {
                        let nut = NUTRITIONS[rng.index(NUTRITIONS.len())];
                        facts.push((
                            nut.to_string(),
                            EntityType::Nutrition,
                            cond.to_string(),
                            EntityType::Condition,
                            r,
                        ));
                    } else {
                        facts.push((
                            food.clone(),
                            EntityType::Food,
                            cond.to_string(),
                            EntityType::Condition,
                            r,
                        ));
                    }
                }
            }
        }

        // distribute facts round-robin over 1..=3 abstracts
        let n_abs = 1 + rng.index(3);
        let mut abstract_sentences: Vec<Vec<Sentence>> = vec![Vec::new(); n_abs];
        for (k, (eis, eit, ejs, ejt, r)) in facts.iter().enumerate() {
            let (text, tuple) = abstract_sentence(eis, *eit, ejs, *ejt, *r, &mut rng);
            abstract_sentences[k % n_abs].push(Sentence {
                text,
                tuples: vec![tuple],
                sentiment: Some(relation_sentiment(*r)),
            });
        }
        let abstracts: Vec<ScientificAbstract> = abstract_sentences
            .into_iter()
            .enumerate()
            .map(|(ai, mut sentences)| {
                // one tuple-free filler sentence per abstract
                sentences.push(Sentence {
                    text: FILLERS[rng.index(FILLERS.len())].to_string(),
                    tuples: Vec::new(),
                    sentiment: None,
                });
                ScientificAbstract {
                    doc_id: format!("synth-{idx}-{ai}"),
                    sentences,
                }
            })
            .collect();

        // gold summary: first min(2, n) facts, one clause each
        let n_gold = facts.len().min(2);
        let mut gold_summary = String::new();
        let mut gold_tuples = Vec::with_capacity(n_gold);
        for (eis, eit, ejs, ejt, r) in facts.iter().take(n_gold) {
            let (clause, mut tuple) = summary_clause(eis, *eit, ejs, *ejt, *r);
            let offset = gold_summary.chars().count() + if gold_summary.is_empty() { 0 } else { 1 };
            if !gold_summary.is_empty() {
                gold_summary.push(' ');
            }
            gold_summary.push_str(&clause);
            tuple.ei.start += offset;
            tuple.ei.end += offset;
            tuple.ej.start += offset;
            tuple.ej.end += offset;
            gold_tuples.push(tuple);
        }

        let split = match idx % 5 {
            3 => Split::Dev,
            4 => Split::Test,
            _ => Split::Train,
        };

        instances.push(SummaryInstance {
            food: food.clone(),
            split,
            bullet_group_id: Some(food),
            gold_summary,
            gold_tuples,
            abstracts,
        });
    }

    Dataset {
        name: format!("synth-{seed}-{n_foods}-{tuples_per_food}"),
        instances,
    }
}
