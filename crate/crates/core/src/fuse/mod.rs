//! Text fusion: compose the ordered selected spans into one sentence by
//! filling typed blanks between them.
//!
//! Between consecutive spans the template carries a categorical blank whose
//! fill vocabulary depends on the entity types adjoining the boundary;
//! food-food and food-nutrition boundaries are constrained to small closed
//! vocabularies, everything touching a condition is unconstrained. The blank
//! language model fills one blank per step and may spawn new unconstrained
//! blanks until the step budget runs out.

mod blm;

pub use blm::{reconstruction_accuracy, train_blank_lm, BlankLm, BlmConfig, BlmReport};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EntityType;
use crate::error::{Error, Result};
use crate::extract::TextSpan;
use crate::num::Scalar;

// ── categories and vocabularies ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlankCategory {
    FoodFood,
    FoodNutrition,
    General,
}

impl std::fmt::Display for BlankCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BlankCategory::FoodFood => "FoodFood",
            BlankCategory::FoodNutrition => "FoodNutrition",
            BlankCategory::General => "General",
        };
        f.write_str(s)
    }
}

/// Per-category fill vocabularies. An empty word list means the entire
/// model vocabulary (the General convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryVocab {
    map: BTreeMap<BlankCategory, Vec<String>>,
}

impl Default for CategoryVocab {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert(
            BlankCategory::FoodFood,
            vec!["like".to_string(), "and".to_string()],
        );
        map.insert(
            BlankCategory::FoodNutrition,
            ["contain", "contains", "include", "includes", "consist", "consists"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        map.insert(BlankCategory::General, Vec::new());
        map
            .into()
    }
}

impl From<BTreeMap<BlankCategory, Vec<String>>> for CategoryVocab {
    fn from(map: BTreeMap<BlankCategory, Vec<String>>) -> Self {
        CategoryVocab { map }
    }
}

impl CategoryVocab {
    /// Words allowed in a blank of this category; `None` means the entire
    /// model vocabulary.
    pub fn allowed(&self, category: BlankCategory) -> Option<&[String]> {
        match self.map.get(&category) {
            Some(words) if !words.is_empty() => Some(words),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!(
            "category vocabulary file {}: {e}",
            path.as_ref().display()
        )))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable"))?;
        Ok(())
    }
}

// ── templates ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TemplateItem {
    Span {
        /// Position within the selection order.
        index: usize,
        tokens: Vec<String>,
    },
    Blank {
        category: BlankCategory,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionTemplate {
    pub items: Vec<TemplateItem>,
    pub warnings: Vec<String>,
}

impl FusionTemplate {
    pub fn blank_count(&self) -> usize {
        self.items
            .iter()
            .filter(|i| matches!(i, TemplateItem::Blank { .. }))
            .count()
    }

    pub fn span_tokens_in_order(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter_map(|i| match i {
                TemplateItem::Span { tokens, .. } => Some(tokens.iter().map(|t| t.as_str())),
                TemplateItem::Blank { .. } => None,
            })
            .flatten()
            .collect()
    }
}

/// Entity types present in a span's own text, matched at word boundaries
/// (fallback: both tuple types when neither surface survived extraction).
fn span_types<S: Scalar>(span: &TextSpan<S>) -> Vec<EntityType> {
    let padded = format!(" {} ", span.text.to_lowercase());
    let mut types = Vec::new();
    for ent in [&span.tuple.ei, &span.tuple.ej] {
        let needle = format!(" {} ", ent.text.to_lowercase());
        if padded.contains(&needle) {
            types.push(ent.etype);
        }
    }
    if types.is_empty() {
        types.push(span.tuple.ei.etype);
        types.push(span.tuple.ej.etype);
    }
    types
}

/// Resolve multiple entity types on one side: condition > nutrition > food.
fn side_type(types: &[EntityType]) -> EntityType {
    for priority in [
        EntityType::Condition,
        EntityType::Nutrition,
        EntityType::Food,
    ] {
        if types.contains(&priority) {
            return priority;
        }
    }
    types.first().copied().unwrap_or(EntityType::Food)
}

fn boundary_category(left: EntityType, right: EntityType) -> (BlankCategory, Option<String>) {
    use EntityType::*;
    match (left, right) {
        (Condition, _) | (_, Condition) => (BlankCategory::General, None),
        (Food, Food) => (BlankCategory::FoodFood, None),
        (Food, Nutrition) | (Nutrition, Food) => (BlankCategory::FoodNutrition, None),
        (Nutrition, Nutrition) => (
            BlankCategory::General,
            Some("nutrition-nutrition boundary mapped to General".to_string()),
        ),
        _ => (BlankCategory::General, None),
    }
}

/// Interleave the ordered selection with typed blanks: k spans, k-1 blanks.
/// Span tokens are kept verbatim. Errors on an empty selection.
pub fn build_template<S: Scalar>(selection: &[&TextSpan<S>]) -> Result<FusionTemplate> {
    if selection.is_empty() {
        return Err(Error::Precondition(
            "build_template: empty selection".into(),
        ));
    }
    let mut items = Vec::with_capacity(2 * selection.len() - 1);
    let mut warnings = Vec::new();
    for (i, span) in selection.iter().enumerate() {
        if i > 0 {
            let left = side_type(&span_types(selection[i - 1]));
            let right = side_type(&span_types(span));
            let (category, warn) = boundary_category(left, right);
            if let Some(w) = warn {
                warnings.push(w);
            }
            items.push(TemplateItem::Blank { category });
        }
        items.push(TemplateItem::Span {
            index: i,
            tokens: span
                .text
                .split_whitespace()
                .map(|t| t.to_string())
                .collect(),
        });
    }
    Ok(FusionTemplate { items, warnings })
}

// ── canvas and decoding ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenOrigin {
    /// Token copied verbatim from the span at this selection index.
    Span(usize),
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CanvasItem {
    Word { text: String, origin: TokenOrigin },
    Blank { category: BlankCategory },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeStep {
    pub blank_index: usize,
    pub category: BlankCategory,
    pub word: String,
    pub spawn_left: bool,
    pub spawn_right: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub steps: Vec<DecodeStep>,
    /// Blanks deleted because the step budget ran out.
    pub deleted_blanks: usize,
    pub final_tokens: Vec<(String, TokenOrigin)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutput {
    pub text: String,
    pub trace: DecodeTrace,
}

/// Fraction of output tokens that originate from spans, computed from the
/// decoding trace. An output with no tokens counts as fully span-sourced.
pub fn span_provenance(output: &FusionOutput) -> f64 {
    let total = output.trace.final_tokens.len();
    if total == 0 {
        return 1.0;
    }
    let from_spans = output
        .trace
        .final_tokens
        .iter()
        .filter(|(_, origin)| matches!(origin, TokenOrigin::Span(_)))
        .count();
    from_spans as f64 / total as f64
}

/// Greedy iterative decoding. Each step fills the highest-scoring (blank,
/// word, spawn) action; constrained blanks draw words from their category
/// vocabulary but may spawn unconstrained blanks. Spawning is masked
/// whenever it could not be resolved within the remaining budget, so
/// decoding always terminates within `max_steps`; blanks still open at the
/// budget are deleted. Decoding is deterministic; the seed is accepted for
/// interface stability with sampling decoders.
pub fn fill_blanks<S: Scalar>(
    blm: &BlankLm<S>,
    template: &FusionTemplate,
    cats: &CategoryVocab,
    max_steps: usize,
    _seed: u64,
) -> Result<FusionOutput> {
    let blanks = template.blank_count();
    if max_steps < blanks {
        return Err(Error::Precondition(format!(
            "fill_blanks: max_steps {max_steps} below blank count {blanks}"
        )));
    }
    let mut canvas: Vec<CanvasItem> = Vec::new();
    for item in &template.items {
        match item {
            TemplateItem::Span { index, tokens } => {
                for t in tokens {
                    canvas.push(CanvasItem::Word {
                        text: t.clone(),
                        origin: TokenOrigin::Span(*index),
                    });
                }
            }
            TemplateItem::Blank { category } => canvas.push(CanvasItem::Blank {
                category: *category,
            }),
        }
    }

    let mut steps = Vec::new();
    let mut used_steps = 0usize;
    loop {
        let open: Vec<usize> = canvas
            .iter()
            .enumerate()
            .filter_map(|(i, it)| matches!(it, CanvasItem::Blank { .. }).then_some(i))
            .collect();
        if open.is_empty() || used_steps >= max_steps {
            break;
        }
        let remaining_after = max_steps - used_steps - 1;
        let open_count = open.len();

        let mut best: Option<(S, usize, String, bool, bool, BlankCategory)> = None;
        for &bi in &open {
            let category = match &canvas[bi] {
                CanvasItem::Blank { category } => *category,
                CanvasItem::Word { .. } => unreachable!(),
            };
            let left = canvas[..bi].iter().rev().find_map(|it| match it {
                CanvasItem::Word { text, .. } => Some(text.as_str()),
                CanvasItem::Blank { .. } => None,
            });
            let right = canvas[bi + 1..].iter().find_map(|it| match it {
                CanvasItem::Word { text, .. } => Some(text.as_str()),
                CanvasItem::Blank { .. } => None,
            });
            let allowed = cats.allowed(category);
            let scored = blm.score_blank(left, right, allowed);
            for (word, word_lp) in scored {
                let (p_sl, p_sr) = blm.spawn_probs(left, right);
                for (sl, sr) in [(false, false), (false, true), (true, false), (true, true)] {
                    // a spawned blank consumes a future step; mask spawns
                    // that cannot be resolved in the remaining budget
                    let open_after = open_count - 1 + usize::from(sl) + usize::from(sr);
                    if open_after > remaining_after {
                        continue;
                    }
                    let lp_sl = if sl { p_sl.ln() } else { (S::one() - p_sl).ln() };
                    let lp_sr = if sr { p_sr.ln() } else { (S::one() - p_sr).ln() };
                    let score = word_lp + lp_sl + lp_sr;
                    let better = match &best {
                        None => true,
                        Some((b, ..)) => score > *b,
                    };
                    if better {
                        best = Some((score, bi, word.clone(), sl, sr, category));
                    }
                }
            }
        }

        let Some((_, bi, word, sl, sr, category)) = best else {
            break;
        };
        let mut replacement = Vec::with_capacity(3);
        if sl {
            replacement.push(CanvasItem::Blank {
                category: BlankCategory::General,
            });
        }
        replacement.push(CanvasItem::Word {
            text: word.clone(),
            origin: TokenOrigin::Generated,
        });
        if sr {
            replacement.push(CanvasItem::Blank {
                category: BlankCategory::General,
            });
        }
        canvas.splice(bi..bi + 1, replacement);
        steps.push(DecodeStep {
            blank_index: bi,
            category,
            word,
            spawn_left: sl,
            spawn_right: sr,
        });
        used_steps += 1;
    }

    // delete any blanks left at the budget
    let deleted_blanks = canvas
        .iter()
        .filter(|it| matches!(it, CanvasItem::Blank { .. }))
        .count();
    let final_tokens: Vec<(String, TokenOrigin)> = canvas
        .into_iter()
        .filter_map(|it| match it {
            CanvasItem::Word { text, origin } => Some((text, origin)),
            CanvasItem::Blank { .. } => None,
        })
        .collect();
    let text = final_tokens
        .iter()
        .map(|(t, _)| t.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(FusionOutput {
        text,
        trace: DecodeTrace {
            steps,
            deleted_blanks,
            final_tokens,
        },
    })
}

/// Deterministic no-model fusion: constrained blanks take their category's
/// first vocabulary word, unconstrained blanks become a comma.
pub fn template_join_fallback(template: &FusionTemplate, cats: &CategoryVocab) -> String {
    let mut out: Vec<String> = Vec::new();
    for item in &template.items {
        match item {
            TemplateItem::Span { tokens, .. } => out.extend(tokens.iter().cloned()),
            TemplateItem::Blank { category } => match cats.allowed(*category) {
                Some(words) => out.push(words[0].clone()),
                None => out.push(",".to_string()),
            },
        }
    }
    out.join(" ")
}
