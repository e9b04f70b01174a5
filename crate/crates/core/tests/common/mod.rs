//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nutribullets::corpus::{EntitySpan, EntityType, Relation, RelationTuple};
use nutribullets::embed::Embeddings;
use nutribullets::extract::TextSpan;
use nutribullets::rng::Rng;
use nutribullets::select::{PolicyInstance, RewardSetup, RewardWeights, RsSampling};

pub const EMB_DIM: usize = 50;

/// A span whose tuple entities are the given surface strings (offsets are
/// synthetic; only surfaces and types matter to selection fixtures).
pub fn span_for(text: &str, ei: &str, ej: &str) -> TextSpan<f64> {
    TextSpan {
        text: text.to_string(),
        doc_id: "fixture".into(),
        sentence_index: 0,
        token_indices: (0..text.split_whitespace().count()).collect(),
        tuple: RelationTuple::new(
            EntitySpan::new(ei, 0, ei.chars().count(), EntityType::Food),
            EntitySpan::new(
                ej,
                ei.chars().count() + 1,
                ei.chars().count() + 1 + ej.chars().count(),
                EntityType::Condition,
            ),
            Relation::Decrease,
        ),
        embedding: None,
        anchor_fallback: false,
    }
}

/// Selection fixture: pools of 10 spans in which a known subset uniquely
/// maximizes the default reward.
///
/// Geometry: a 20-word summary vocabulary shared by every gold summary, a
/// global "mixed" vocabulary for the R_s sampler, and fresh per-pool noise
/// words for junk spans.
///
/// - Gold spans (2 per pool) draw 4 summary words; their tuples equal the
///   instance's gold tuples, so R_e pays 2 apiece, and their embeddings sit
///   in the summary subspace, so R_s pays 1 apiece.
/// - Junk spans are 8 identical copies of a 12-word pool-specific noise
///   span: one copy already dilutes Meteor precision below its R_s gain,
///   and a second copy drives pairwise cosine to 1 and kills R_d.
/// - The sampler pool draws 1 summary + 3 mixed-vocabulary words, landing
///   between gold (summary-like) and junk (orthogonal) by construction.
///
/// With `duplicates`, pools are duplicate-heavy by construction: exactly
/// [gold, gold, dup, dup] where the dup pair is identical, relevant (its
/// tuple is a third gold tuple), and summary-like. One copy is clearly
/// profitable; the second trades R_s (+w_s) against R_d (-w_d), so zeroing
/// w_d deterministically flips the duplicate decision -- the regime the
/// diversity ablation measures.
pub struct PolicyFixture {
    pub instances: Vec<PolicyInstance<f64>>,
    /// Optimal pool-index set per instance (under the full default reward).
    pub optima: Vec<BTreeSet<usize>>,
    /// Pool indices of the duplicate pair per instance (duplicates mode).
    pub duplicate_pairs: Vec<(usize, usize)>,
    pub setup: RewardSetup<f64>,
    pub emb: Embeddings<f64>,
}

pub fn policy_fixture(seed: u64, n_pools: usize, duplicates: bool) -> PolicyFixture {
    let summary_vocab: Vec<String> = (0..20).map(|i| format!("sw{i}")).collect();
    let mixed_vocab: Vec<String> = (0..100).map(|i| format!("zn{i}")).collect();
    let pool_noise: Vec<Vec<String>> = (0..n_pools)
        .map(|p| (0..40).map(|k| format!("p{p}n{k}")).collect())
        .collect();
    // block-structured table: summary, sampler, and noise words occupy
    // disjoint coordinate blocks, so junk spans are exactly orthogonal to
    // every summary (their R_s indicator cannot fire by chance) while the
    // sampler spans keep a guaranteed summary component
    let mut emb = Embeddings::<f64>::new(EMB_DIM);
    let mut vec_rng = Rng::seed_from_u64(seed ^ 0x5eed);
    // per-word vector norms match the library's seeded tables (~0.5 at
    // 50 dims): cosine rewards are scale-invariant but the policy scorer's
    // inputs are not, and both saturated and vanishing input scales freeze
    // the softmax
    let block_vector = |lo: usize, hi: usize, target_norm: f64, rng: &mut Rng| -> Vec<f64> {
        let amp = target_norm * (3.0 / (hi - lo) as f64).sqrt();
        let mut v = vec![0.0; EMB_DIM];
        for x in v[lo..hi].iter_mut() {
            *x = rng.uniform_in::<f64>(-amp, amp);
        }
        v
    };
    for w in &summary_vocab {
        // shared positive axis in dim 0 guarantees every summary-bearing
        // text projects positively onto every gold summary
        let mut v = block_vector(1, 25, 0.35, &mut vec_rng);
        v[0] = 0.35;
        emb.insert(w.clone(), v);
    }
    for w in &mixed_vocab {
        let v = block_vector(25, 40, 0.5, &mut vec_rng);
        emb.insert(w.clone(), v);
    }
    for w in pool_noise.iter().flatten() {
        let v = block_vector(40, EMB_DIM, 0.5, &mut vec_rng);
        emb.insert(w.clone(), v);
    }

    let mut rng = Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n_pools);
    let mut optima = Vec::with_capacity(n_pools);
    let mut duplicate_pairs = Vec::with_capacity(n_pools);

    let pick = |rng: &mut Rng, vocab: &[String], n: usize| -> Vec<String> {
        (0..n).map(|_| vocab[rng.index(vocab.len())].clone()).collect()
    };

    for pool_idx in 0..n_pools {
        let g1_words = pick(&mut rng, &summary_vocab, 4);
        let g2_words = pick(&mut rng, &summary_vocab, 4);
        let g1_text = g1_words.join(" ");
        let g2_text = g2_words.join(" ");
        let g1 = span_for(&g1_text, &g1_words[0], &g1_words[3]);
        let g2 = span_for(&g2_text, &g2_words[0], &g2_words[3]);
        let mut gold_tuples = vec![g1.tuple.clone(), g2.tuple.clone()];
        let mut gold_summary = format!("{g1_text} {g2_text}");

        let mut spans = vec![g1, g2];
        if duplicates {
            // relevant duplicate pair on pool-noise text: R_e pays for one
            // copy (its tuple is a third gold tuple) and the gold summary
            // repeats its clause twice, so the second identical copy earns
            // a large deterministic Meteor recall gain that only w_d can
            // overrule -- zeroing w_d flips the duplicate decision
            let dup_words: Vec<String> = pool_noise[pool_idx][24..].to_vec();
            let dup_text = dup_words.join(" ");
            let dup = span_for(&dup_text, &dup_words[0], &dup_words[1]);
            gold_tuples.push(dup.tuple.clone());
            gold_summary = format!("{g1_text} {g2_text} {dup_text} {dup_text}");
            spans.push(dup.clone());
            spans.push(dup);
        }
        // identical junk copies on pool-specific noise words (kept out of
        // the dup text so the junk fence and the dup decision stay separate)
        let junk_words: Vec<String> = pool_noise[pool_idx][..24].to_vec();
        let junk_text = junk_words.join(" ");
        let junk = span_for(&junk_text, &junk_words[0], &junk_words[1]);
        while spans.len() < 10 {
            spans.push(junk.clone());
        }

        // shuffle pool order so the relevant spans sit at random indices
        let mut order: Vec<usize> = (0..spans.len()).collect();
        rng.shuffle(&mut order);
        let pool: Vec<TextSpan<f64>> = order.iter().map(|&i| spans[i].clone()).collect();
        let g1_at = order.iter().position(|&i| i == 0).unwrap();
        let g2_at = order.iter().position(|&i| i == 1).unwrap();
        let mut optimum: BTreeSet<usize> = [g1_at, g2_at].into_iter().collect();
        if duplicates {
            let d1_at = order.iter().position(|&i| i == 2).unwrap();
            let d2_at = order.iter().position(|&i| i == 3).unwrap();
            duplicate_pairs.push((d1_at.min(d2_at), d1_at.max(d2_at)));
            // one duplicate copy belongs to the optimum under the full reward
            optimum.insert(d1_at.min(d2_at));
        } else {
            duplicate_pairs.push((usize::MAX, usize::MAX));
        }
        optima.push(optimum);
        instances.push(PolicyInstance {
            pool,
            gold_tuples,
            gold_summary,
        });
    }

    // shared reward context: all gold summaries, moderately summary-like
    // sampler spans
    let summary_embs: Vec<Vec<f64>> = instances
        .iter()
        .map(|i| emb.mean_embedding(&i.gold_summary))
        .collect();
    let sampler_pool: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let mut words = pick(&mut rng, &summary_vocab, 1);
            words.extend(pick(&mut rng, &mixed_vocab, 3));
            emb.mean_embedding(&words.join(" "))
        })
        .collect();

    PolicyFixture {
        instances,
        optima,
        duplicate_pairs,
        setup: RewardSetup {
            summary_embs,
            sampler_pool,
            weights: RewardWeights::default(),
            rs_sampling: RsSampling::PerC,
        },
        emb,
    }
}
