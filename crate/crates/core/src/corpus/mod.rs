//! Corpus data model and JSONL ingestion.
//!
//! One summary instance per line; field names are part of the on-disk
//! contract. Character offsets (Unicode scalar values) index entity spans
//! into their owning sentence or summary.

mod stats;
mod synth;

pub use stats::{dataset_stats, SplitStats, StatsReport};
pub use synth::{relation_keyword, synth_corpus, CONDITIONS, FOODS, NUTRITIONS, POPULATIONS};

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{char_len, char_substring};

// ── entity / relation schema ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Food,
    Nutrition,
    Condition,
    Population,
}

impl std::fmt::Display for EntityType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EntityType::Food => "food",
            EntityType::Nutrition => "nutrition",
            EntityType::Condition => "condition",
            EntityType::Population => "population",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Contain,
    Increase,
    Decrease,
    Satisfy,
    Control,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::Contain,
        Relation::Increase,
        Relation::Decrease,
        Relation::Satisfy,
        Relation::Control,
    ];
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Relation::Contain => "contain",
            Relation::Increase => "increase",
            Relation::Decrease => "decrease",
            Relation::Satisfy => "satisfy",
            Relation::Control => "control",
        };
        f.write_str(s)
    }
}

/// Legality matrix for entity-pair/relation combinations.
///
/// Containing: e_i in {food, nutrition}, e_j nutrition. Causing relations
/// (increase, decrease, satisfy, control): e_i in {food, nutrition,
/// condition}, e_j condition.
pub fn relation_is_legal(ei: EntityType, ej: EntityType, r: Relation) -> bool {
    use EntityType::*;
    match r {
        Relation::Contain => matches!(ei, Food | Nutrition) && ej == Nutrition,
        Relation::Increase | Relation::Decrease | Relation::Satisfy | Relation::Control => {
            matches!(ei, Food | Nutrition | Condition) && ej == Condition
        }
    }
}

/// True when at least one relation is legal for the pair.
pub fn pair_admits_relation(ei: EntityType, ej: EntityType) -> bool {
    Relation::ALL.iter().any(|&r| relation_is_legal(ei, ej, r))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub etype: EntityType,
}

impl EntitySpan {
    pub fn new(text: impl Into<String>, start: usize, end: usize, etype: EntityType) -> Self {
        EntitySpan {
            text: text.into(),
            start,
            end,
            etype,
        }
    }

    /// Check offsets and surface-text agreement against the owning text.
    pub fn validate_in(&self, owner: &str) -> std::result::Result<(), String> {
        if self.start >= self.end {
            return Err(format!(
                "char_start {} must be < char_end {}",
                self.start, self.end
            ));
        }
        let n = char_len(owner);
        if self.end > n {
            return Err(format!("char_end {} exceeds text length {}", self.end, n));
        }
        let actual = char_substring(owner, self.start, self.end);
        if actual != self.text {
            return Err(format!(
                "span text `{}` does not match substring `{actual}`",
                self.text
            ));
        }
        Ok(())
    }

    /// Spans are the same entity occurrence iff they cover the same range.
    pub fn same_span(&self, other: &EntitySpan) -> bool {
        self.start == other.start && self.end == other.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTuple {
    pub ei: EntitySpan,
    pub ej: EntitySpan,
    pub r: Relation,
}

impl RelationTuple {
    pub fn new(ei: EntitySpan, ej: EntitySpan, r: Relation) -> Self {
        RelationTuple { ei, ej, r }
    }

    pub fn validate_in(&self, owner: &str) -> std::result::Result<(), String> {
        self.ei.validate_in(owner).map_err(|e| format!("ei: {e}"))?;
        self.ej.validate_in(owner).map_err(|e| format!("ej: {e}"))?;
        if self.ei.same_span(&self.ej) {
            return Err("e_i and e_j must be different entities".into());
        }
        if !relation_is_legal(self.ei.etype, self.ej.etype, self.r) {
            return Err(format!(
                "illegal combination ({}, {}, {})",
                self.ei.etype, self.ej.etype, self.r
            ));
        }
        Ok(())
    }

    /// Content identity ignoring offsets: (surface, type) of both entities
    /// plus the relation. Used for matching tuples across texts.
    pub fn signature(&self) -> (String, EntityType, String, EntityType, Relation) {
        (
            self.ei.text.to_lowercase(),
            self.ei.etype,
            self.ej.text.to_lowercase(),
            self.ej.etype,
            self.r,
        )
    }
}

// ── documents and instances ────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    #[serde(default)]
    pub tuples: Vec<RelationTuple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<Sentiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScientificAbstract {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

impl ScientificAbstract {
    pub fn tuple_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tuples.len()).sum()
    }

    pub fn word_count(&self) -> usize {
        self.sentences
            .iter()
            .map(|s| s.text.split_whitespace().count())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryInstance {
    pub food: String,
    pub split: Split,
    pub bullet_group_id: Option<String>,
    pub gold_summary: String,
    pub gold_tuples: Vec<RelationTuple>,
    pub abstracts: Vec<ScientificAbstract>,
}

impl SummaryInstance {
    /// All input-side tuples across abstracts, in document order.
    pub fn input_tuples(&self) -> Vec<&RelationTuple> {
        self.abstracts
            .iter()
            .flat_map(|a| a.sentences.iter())
            .flat_map(|s| s.tuples.iter())
            .collect()
    }

    fn validate(&self, label: &str) -> Result<()> {
        if self.abstracts.is_empty() {
            return Err(Error::validation(label, "abstracts", "must be non-empty"));
        }
        if self.gold_summary.trim().is_empty() {
            return Err(Error::validation(
                label,
                "gold_summary",
                "must be non-empty",
            ));
        }
        for (i, t) in self.gold_tuples.iter().enumerate() {
            t.validate_in(&self.gold_summary).map_err(|e| {
                Error::validation(label, format!("gold_tuples[{i}]"), e)
            })?;
        }
        let mut seen = BTreeSet::new();
        for (ai, abs) in self.abstracts.iter().enumerate() {
            if !seen.insert(abs.doc_id.clone()) {
                return Err(Error::validation(
                    label,
                    format!("abstracts[{ai}].doc_id"),
                    format!("duplicate doc_id `{}`", abs.doc_id),
                ));
            }
            for (si, sent) in abs.sentences.iter().enumerate() {
                for (ti, t) in sent.tuples.iter().enumerate() {
                    t.validate_in(&sent.text).map_err(|e| {
                        Error::validation(
                            label,
                            format!("abstracts[{ai}].sentences[{si}].tuples[{ti}]"),
                            e,
                        )
                    })?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<SummaryInstance>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for (i, inst) in self.instances.iter().enumerate() {
            inst.validate(&format!("{}#{i} ({})", self.name, inst.food))?;
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SummaryInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }
}

// ── JSONL ingestion ────────────────────────────────────────────────────────

/// Load and validate a JSONL corpus, one `SummaryInstance` object per line.
/// Blank lines are ignored. An empty file yields an empty dataset.
pub fn load_dataset(path: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: SummaryInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        instances.push(inst);
    }
    let dataset = Dataset {
        name: name.to_string(),
        instances,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Write a dataset back out as JSONL (inverse of [`load_dataset`]).
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for inst in &dataset.instances {
        let line = serde_json::to_string(inst).expect("instance serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(text: &str, start: usize, end: usize, etype: EntityType) -> EntitySpan {
        EntitySpan::new(text, start, end, etype)
    }

    fn apple_fiber_instance() -> SummaryInstance {
        let sent = "apple contains fiber";
        SummaryInstance {
            food: "apple".into(),
            split: Split::Train,
            bullet_group_id: Some("apple".into()),
            gold_summary: "apple contains fiber".into(),
            gold_tuples: vec![RelationTuple::new(
                span("apple", 0, 5, EntityType::Food),
                span("fiber", 15, 20, EntityType::Nutrition),
                Relation::Contain,
            )],
            abstracts: vec![ScientificAbstract {
                doc_id: "d0".into(),
                sentences: vec![Sentence {
                    text: sent.into(),
                    tuples: vec![RelationTuple::new(
                        span("apple", 0, 5, EntityType::Food),
                        span("fiber", 15, 20, EntityType::Nutrition),
                        Relation::Contain,
                    )],
                    sentiment: None,
                }],
            }],
        }
    }

    #[test]
    fn legality_matrix_matches_schema() {
        use EntityType::*;
        use Relation::*;
        // Containing rows
        assert!(relation_is_legal(Food, Nutrition, Contain));
        assert!(relation_is_legal(Nutrition, Nutrition, Contain));
        assert!(!relation_is_legal(Condition, Nutrition, Contain));
        assert!(!relation_is_legal(Food, Condition, Contain));
        assert!(!relation_is_legal(Food, Food, Contain));
        // Causing rows
        for r in [Increase, Decrease, Satisfy, Control] {
            assert!(relation_is_legal(Food, Condition, r));
            assert!(relation_is_legal(Nutrition, Condition, r));
            assert!(relation_is_legal(Condition, Condition, r));
            assert!(!relation_is_legal(Food, Nutrition, r));
            assert!(!relation_is_legal(Population, Condition, r));
            assert!(!relation_is_legal(Food, Food, r));
        }
        // Population never participates
        assert!(!pair_admits_relation(Population, Condition));
        assert!(!pair_admits_relation(Food, Population));
        assert!(pair_admits_relation(Food, Nutrition));
        assert!(pair_admits_relation(Food, Condition));
    }

    #[test]
    fn entity_span_validation() {
        let s = "apple contains fiber";
        assert!(span("apple", 0, 5, EntityType::Food).validate_in(s).is_ok());
        // end beyond text
        assert!(span("fiber", 15, 99, EntityType::Nutrition)
            .validate_in(s)
            .is_err());
        // start >= end
        assert!(span("", 5, 5, EntityType::Food).validate_in(s).is_err());
        // text mismatch
        assert!(span("apples", 0, 5, EntityType::Food)
            .validate_in(s)
            .is_err());
    }

    #[test]
    fn load_rejects_bad_offsets_with_instance_name() {
        let mut inst = apple_fiber_instance();
        inst.abstracts[0].sentences[0].tuples[0].ej.end = 99;
        let dir = std::env::temp_dir().join(format!("nb_corpus_a_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.jsonl");
        std::fs::write(&path, serde_json::to_string(&inst).unwrap() + "\n").unwrap();
        let err = load_dataset(&path, "bad").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("apple"), "error should cite the instance: {msg}");
        assert!(msg.contains("tuples[0]"), "error should cite the field: {msg}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn load_reports_parse_error_line_number() {
        let dir = std::env::temp_dir().join(format!("nb_corpus_b_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("malformed.jsonl");
        let good = serde_json::to_string(&apple_fiber_instance()).unwrap();
        std::fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
        match load_dataset(&path, "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = std::env::temp_dir().join(format!("nb_corpus_c_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let d = load_dataset(&path, "empty").unwrap();
        assert_eq!(d.instances.len(), 0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        let mut inst = apple_fiber_instance();
        let dup = inst.abstracts[0].clone();
        inst.abstracts.push(dup);
        let d = Dataset {
            name: "t".into(),
            instances: vec![inst],
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn identical_entity_spans_rejected() {
        let s = "fiber helps fiber";
        let t = RelationTuple::new(
            span("fiber", 0, 5, EntityType::Nutrition),
            span("fiber", 0, 5, EntityType::Nutrition),
            Relation::Contain,
        );
        assert!(t.validate_in(s).is_err());
    }

    #[test]
    fn jsonl_field_names_are_exact() {
        let inst = apple_fiber_instance();
        let json = serde_json::to_string(&inst).unwrap();
        for key in [
            "\"food\"",
            "\"split\"",
            "\"bullet_group_id\"",
            "\"gold_summary\"",
            "\"gold_tuples\"",
            "\"abstracts\"",
            "\"doc_id\"",
            "\"sentences\"",
            "\"text\"",
            "\"tuples\"",
            "\"ei\"",
            "\"ej\"",
            "\"r\"",
            "\"start\"",
            "\"end\"",
            "\"etype\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }

    #[test]
    fn dataset_round_trip() {
        let d = Dataset {
            name: "rt".into(),
            instances: vec![apple_fiber_instance()],
        };
        let dir = std::env::temp_dir().join(format!("nb_corpus_d_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.jsonl");
        save_dataset(&d, &path).unwrap();
        let loaded = load_dataset(&path, "rt").unwrap();
        assert_eq!(d, loaded);
        std::fs::remove_dir_all(&dir).ok();
    }
}
