//! Meteor-lite: exact + suffix-stemmed unigram matching with the classic
//! parameters (alpha = 0.9, gamma = 0.5, beta = 3). Synonym and paraphrase
//! stages are intentionally omitted; reports note the configuration.

use crate::num::{sc, Scalar};
use crate::text::lower_tokens;

/// Light suffix stemmer used by the second matching stage. One suffix strip
/// (longest first, keeping at least 3 stem chars), then a trailing `e` drop
/// so that `reduces`/`reduce` and `includes`/`include` collapse together.
pub fn stem(word: &str) -> String {
    let mut w = word.to_string();
    let suffixes: [(&str, &str); 8] = [
        ("ies", "y"),
        ("ied", "y"),
        ("ing", ""),
        ("edly", ""),
        ("ed", ""),
        ("es", ""),
        ("ly", ""),
        ("s", ""),
    ];
    for (suf, repl) in suffixes {
        if let Some(base) = w.strip_suffix(suf) {
            if base.chars().count() >= 3 {
                // keep double-s words like `stress` intact
                if suf == "s" && base.ends_with('s') {
                    continue;
                }
                w = format!("{base}{repl}");
                break;
            }
        }
    }
    if w.chars().count() >= 4 {
        if let Some(base) = w.strip_suffix('e') {
            w = base.to_string();
        }
    }
    w
}

/// A matched unigram pair (candidate index, reference index).
type Pair = (usize, usize);

/// Greedy two-stage alignment: exact matches first, then suffix-stem matches
/// among the leftovers. Within a stage, candidate positions are processed
/// left to right; each prefers the reference slot that continues the current
/// chunk, falling back to the leftmost available slot.
fn align(cand: &[String], refr: &[String]) -> Vec<Pair> {
    let cand_stem: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let ref_stem: Vec<String> = refr.iter().map(|w| stem(w)).collect();
    let mut cand_matched: Vec<Option<usize>> = vec![None; cand.len()];
    let mut ref_used = vec![false; refr.len()];

    for stage in 0..2 {
        for i in 0..cand.len() {
            if cand_matched[i].is_some() {
                continue;
            }
            let key_eq = |j: usize| -> bool {
                if stage == 0 {
                    cand[i] == refr[j]
                } else {
                    cand_stem[i] == ref_stem[j]
                }
            };
            // prefer continuing the chunk started by the previous candidate
            let preferred = if i > 0 {
                cand_matched[i - 1].and_then(|pj| {
                    let nj = pj + 1;
                    (nj < refr.len() && !ref_used[nj] && key_eq(nj)).then_some(nj)
                })
            } else {
                None
            };
            let chosen = preferred.or_else(|| (0..refr.len()).find(|&j| !ref_used[j] && key_eq(j)));
            if let Some(j) = chosen {
                cand_matched[i] = Some(j);
                ref_used[j] = true;
            }
        }
    }

    cand_matched
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect()
}

/// Number of chunks: maximal runs of pairs adjacent in both strings.
fn count_chunks(pairs: &[Pair]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    let mut chunks = 1usize;
    for w in pairs.windows(2) {
        let (ci, ri) = w[0];
        let (cj, rj) = w[1];
        if cj != ci + 1 || rj != ri + 1 {
            chunks += 1;
        }
    }
    chunks
}

/// Meteor score in [0, 1]. Tokens are lowercased whitespace tokens;
/// `m = 0` scores 0.
pub fn meteor<S: Scalar>(candidate: &str, reference: &str) -> S {
    let cand = lower_tokens(candidate);
    let refr = lower_tokens(reference);
    if cand.is_empty() || refr.is_empty() {
        return S::zero();
    }
    let pairs = align(&cand, &refr);
    let m = pairs.len();
    if m == 0 {
        return S::zero();
    }
    let m_s = sc::<S>(m as f64);
    let precision = m_s / sc::<S>(cand.len() as f64);
    let recall = m_s / sc::<S>(refr.len() as f64);
    let alpha = sc::<S>(0.9);
    let fmean = precision * recall / (alpha * precision + (S::one() - alpha) * recall);
    let chunks = count_chunks(&pairs);
    let ratio = sc::<S>(chunks as f64) / m_s;
    let penalty = sc::<S>(0.5) * ratio * ratio * ratio;
    fmean * (S::one() - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_four_token_strings() {
        // P = R = 1, Fmean = 1, chunks = 1, m = 4:
        // score = 1 - 0.5 * (1/4)^3 = 0.9921875
        let s: f64 = meteor("bananas may lower cholesterol", "bananas may lower cholesterol");
        assert!((s - 0.9921875).abs() < 1e-9, "got {s}");
    }

    #[test]
    fn identity_penalty_formula_holds_for_any_length() {
        for n in 1..=12 {
            let text = (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
            let s: f64 = meteor(&text, &text);
            let expect = 1.0 - 0.5 / (n as f64).powi(3);
            assert!((s - expect).abs() < 1e-9, "n={n}: got {s}, want {expect}");
        }
    }

    #[test]
    fn partial_overlap_hand_computed() {
        // m=2, chunks=2, P=2/3, R=1/2, Fmean=0.33333/0.65, penalty=0.5
        let s: f64 = meteor("fiber lowers cholesterol", "fiber reduces cholesterol levels");
        assert!((s - 0.25641025641025639).abs() < 1e-9, "got {s}");
    }

    #[test]
    fn disjoint_token_sets_score_zero() {
        let s: f64 = meteor("alpha beta", "gamma delta");
        assert_eq!(s, 0.0);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let s: f64 = meteor("", "anything here");
        assert_eq!(s, 0.0);
    }

    #[test]
    fn asymmetric_in_arguments() {
        // precision/recall asymmetry: a short candidate inside a long
        // reference scores differently than the reverse
        let a: f64 = meteor("fiber helps", "fiber helps digestion greatly");
        let b: f64 = meteor("fiber helps digestion greatly", "fiber helps");
        assert!((a - b).abs() > 1e-6, "expected asymmetry, got {a} vs {b}");
    }

    #[test]
    fn stem_stage_matches_inflected_forms() {
        // `lowering` vs `lowered` only match through the stem stage:
        // m=3, one chunk, score = 1 - 0.5 * (1/3)^3
        let s: f64 = meteor("bananas lowering cholesterol", "bananas lowered cholesterol");
        assert!((s - 0.9814814814814815).abs() < 1e-9, "got {s}");
        // sanity on the stemmer itself
        assert_eq!(stem("lowers"), "lower");
        assert_eq!(stem("lowering"), "lower");
        assert_eq!(stem("reduces"), stem("reduce"));
        assert_eq!(stem("includes"), stem("include"));
        assert_eq!(stem("studies"), stem("study"));
        assert_eq!(stem("stress"), "stress");
    }

    #[test]
    fn case_is_ignored() {
        let a: f64 = meteor("Fiber Helps", "fiber helps");
        let b: f64 = meteor("fiber helps", "fiber helps");
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn reordered_tokens_pay_fragmentation_penalty() {
        let in_order: f64 = meteor("a b c d", "a b c d");
        let scrambled: f64 = meteor("d c b a", "a b c d");
        assert!(scrambled < in_order);
    }
}
