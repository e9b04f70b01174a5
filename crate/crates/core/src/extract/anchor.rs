//! Verb-phrase anchor heuristic.
//!
//! The anchor for a tuple is the smallest verb-headed phrase containing the
//! condition entity: expand left from the entity to the nearest verb-tagged
//! token, right to the next clause boundary (punctuation or conjunction).
//! Verb tagging is pluggable; the default is a lexicon of common verbs in
//! this domain. An external parser can implement [`VerbTagger`] instead.

use std::collections::BTreeSet;
use std::ops::Range;

use crate::corpus::EntitySpan;
use crate::error::{Error, Result};
use crate::text::{tokenize, tokens_overlapping, Token};

pub trait VerbTagger {
    fn is_verb(&self, word: &str) -> bool;
}

#[derive(Debug, Clone)]
pub struct LexiconVerbTagger {
    verbs: BTreeSet<String>,
}

const DEFAULT_VERBS: [&str; 46] = [
    "contain", "contains", "contained", "containing", "lower", "lowers", "lowered", "lowering",
    "improve", "improves", "improved", "improving", "increase", "increases", "increased",
    "increasing", "decrease", "decreases", "decreased", "decreasing", "help", "helps", "helped",
    "helping", "control", "controls", "controlled", "reduce", "reduces", "reduced", "reducing",
    "prevent", "prevents", "prevented", "support", "supports", "supported", "boost", "boosts",
    "found", "reported", "observed", "indicate", "suggest", "promote", "promotes",
];

impl Default for LexiconVerbTagger {
    fn default() -> Self {
        LexiconVerbTagger {
            verbs: DEFAULT_VERBS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LexiconVerbTagger {
    pub fn new(verbs: impl IntoIterator<Item = String>) -> Self {
        LexiconVerbTagger {
            verbs: verbs.into_iter().map(|v| v.to_lowercase()).collect(),
        }
    }
}

impl VerbTagger for LexiconVerbTagger {
    fn is_verb(&self, word: &str) -> bool {
        let clean: String = word
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        self.verbs.contains(&clean)
    }
}

fn is_clause_boundary(token: &str) -> bool {
    matches!(token, "," | ";" | "." | "!" | "?")
        || matches!(
            token.to_lowercase().as_str(),
            "and" | "or" | "but" | "while" | "whereas" | "although"
        )
}

/// Anchor over pre-tokenized input: returns the token range and whether a
/// verb head was found (false means the degenerate entity-only anchor).
pub fn anchor_token_range(
    tokens: &[Token],
    condition: Range<usize>,
    tagger: &dyn VerbTagger,
) -> (Range<usize>, bool) {
    debug_assert!(condition.start < condition.end && condition.end <= tokens.len());
    let mut verb_idx = None;
    for i in (0..condition.start).rev() {
        if is_clause_boundary(&tokens[i].text) {
            break;
        }
        if tagger.is_verb(&tokens[i].text) {
            verb_idx = Some(i);
            break;
        }
    }
    let Some(start) = verb_idx else {
        return (condition, false);
    };
    let mut end = condition.end;
    while end < tokens.len() && !is_clause_boundary(&tokens[end].text) {
        end += 1;
    }
    (start..end, true)
}

/// Token range of the smallest verb-headed phrase containing the condition
/// entity. The entity must be present in the sentence; with no verb to its
/// left the entity's own token range is returned.
pub fn verb_phrase_anchor(
    sentence: &str,
    condition: &EntitySpan,
    tagger: &dyn VerbTagger,
) -> Result<Range<usize>> {
    condition
        .validate_in(sentence)
        .map_err(|e| Error::Precondition(format!("verb_phrase_anchor: {e}")))?;
    let tokens = tokenize(sentence);
    let overlapping = tokens_overlapping(&tokens, condition.start, condition.end);
    let (first, last) = match (overlapping.first(), overlapping.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return Err(Error::Precondition(
                "verb_phrase_anchor: condition entity spans no tokens".into(),
            ))
        }
    };
    let (range, _) = anchor_token_range(&tokens, first..last + 1, tagger);
    Ok(range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityType;

    fn find_span(sentence: &str, surface: &str, etype: EntityType) -> EntitySpan {
        let chars: Vec<char> = sentence.chars().collect();
        let target: Vec<char> = surface.chars().collect();
        for start in 0..=chars.len().saturating_sub(target.len()) {
            if chars[start..start + target.len()] == target[..] {
                return EntitySpan::new(surface, start, start + target.len(), etype);
            }
        }
        panic!("surface `{surface}` not in `{sentence}`");
    }

    #[test]
    fn banana_fixture_anchor() {
        let sentence = "Bananas may improve heart health by lowering cholesterol";
        let condition = find_span(sentence, "heart health", EntityType::Condition);
        let tagger = LexiconVerbTagger::default();
        let range = verb_phrase_anchor(sentence, &condition, &tagger).unwrap();
        let tokens = tokenize(sentence);
        let words: Vec<&str> = tokens[range].iter().map(|t| t.text.as_str()).collect();
        assert_eq!(
            words,
            vec!["improve", "heart", "health", "by", "lowering", "cholesterol"]
        );
    }

    #[test]
    fn clause_boundary_stops_expansion() {
        let sentence = "a trial found that oats lowers cholesterol , compared with placebo";
        let condition = find_span(sentence, "cholesterol", EntityType::Condition);
        let tagger = LexiconVerbTagger::default();
        let range = verb_phrase_anchor(sentence, &condition, &tagger).unwrap();
        let tokens = tokenize(sentence);
        let words: Vec<&str> = tokens[range].iter().map(|t| t.text.as_str()).collect();
        assert_eq!(words, vec!["lowers", "cholesterol"]);
    }

    #[test]
    fn no_verb_degenerates_to_entity_range() {
        let sentence = "fiber in apples for digestion";
        let condition = find_span(sentence, "digestion", EntityType::Condition);
        let tagger = LexiconVerbTagger::default();
        let range = verb_phrase_anchor(sentence, &condition, &tagger).unwrap();
        assert_eq!(range, 4..5);
    }

    #[test]
    fn absent_condition_violates_precondition() {
        let sentence = "fiber in apples";
        let bogus = EntitySpan::new("digestion", 0, 9, EntityType::Condition);
        let tagger = LexiconVerbTagger::default();
        assert!(verb_phrase_anchor(sentence, &bogus, &tagger).is_err());
    }

    #[test]
    fn heuristic_overlaps_pos_oracle_on_fixture_sentences() {
        // 50 generated sentences with gold POS tags. The oracle enumerates
        // every range that starts at a gold verb, contains the condition,
        // and stops before a gold clause boundary, then takes the smallest.
        // A handful of sentences use verbs outside the default lexicon, so
        // the heuristic is allowed to miss on those.
        #[derive(Clone, Copy, PartialEq)]
        enum Pos {
            Verb,
            Boundary,
            Other,
        }
        let tagger = LexiconVerbTagger::default();
        let known_verbs = ["improves", "lowers", "reduces", "prevents", "supports"];
        let rare_verbs = ["mitigates", "alleviates"]; // not in the lexicon
        let conditions = ["inflammation", "fatigue", "hypertension", "insomnia"];
        let subjects = ["oats", "kale", "salmon", "garlic", "walnuts"];

        let mut hits = 0usize;
        for i in 0..50 {
            let verb = if i % 10 == 9 {
                rare_verbs[i / 10 % rare_verbs.len()]
            } else {
                known_verbs[i % known_verbs.len()]
            };
            let subject = subjects[i % subjects.len()];
            let condition = conditions[i % conditions.len()];
            let sentence =
                format!("researchers noted that {subject} {verb} {condition} in adults , per the report");
            let tokens = tokenize(&sentence);
            let pos: Vec<Pos> = tokens
                .iter()
                .map(|t| {
                    if t.text == verb || t.text == "noted" {
                        Pos::Verb
                    } else if is_clause_boundary(&t.text) {
                        Pos::Boundary
                    } else {
                        Pos::Other
                    }
                })
                .collect();
            let cond_idx = tokens.iter().position(|t| t.text == condition).unwrap();

            // oracle: enumerate every verb-headed phrase over the gold POS
            // tags (verb start, extending right to the next gold clause
            // boundary), keep the smallest one containing the condition
            let mut oracle: Option<Range<usize>> = None;
            for s in 0..tokens.len() {
                if pos[s] != Pos::Verb {
                    continue;
                }
                let mut e = s + 1;
                while e < tokens.len() && pos[e] != Pos::Boundary {
                    e += 1;
                }
                let range = s..e;
                if !range.contains(&cond_idx) {
                    continue;
                }
                if oracle.as_ref().map_or(true, |o| range.len() < o.len()) {
                    oracle = Some(range);
                }
            }
            let oracle = oracle.expect("fixture sentences always have a verb");

            let span = find_span(&sentence, condition, EntityType::Condition);
            let got = verb_phrase_anchor(&sentence, &span, &tagger).unwrap();
            let inter = got.start.max(oracle.start)..got.end.min(oracle.end);
            let inter_len = inter.end.saturating_sub(inter.start);
            let union_len = got.len() + oracle.len() - inter_len;
            let iou = inter_len as f64 / union_len as f64;
            if iou >= 0.7 {
                hits += 1;
            }
        }
        assert!(hits >= 40, "anchor/oracle IoU >= 0.7 on only {hits}/50 sentences");
    }
}
