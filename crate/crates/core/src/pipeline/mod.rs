//! End-to-end orchestration: staged training, checkpoint persistence,
//! summarization, and evaluation. The CLI in `main.rs` is a thin wrapper
//! over these functions.

mod config;
mod manifest;

pub use config::{
    EmbedSection, ExtractSection, FuseSection, KnowledgeSection, MetricsSection, PathsSection,
    PipelineConfig, PolicySection, RewardSection, TrainSection, SEED_ENV_VAR,
};
pub use manifest::{RunManifest, MANIFEST_FILE};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::corpus::{load_dataset, Dataset, Split, SummaryInstance};
use crate::embed::Embeddings;
use crate::error::{Error, Result};
use crate::extract::{
    distill, extraction_examples_from_dataset, train_extractor, ExtractionModel, ExtractorReport,
    LexiconVerbTagger, TextSpan,
};
use crate::fuse::{
    build_template, fill_blanks, train_blank_lm, BlankLm, BlmReport, CategoryVocab, DecodeTrace,
    FusionTemplate,
};
use crate::knowledge::{
    relation_examples_from_dataset, sentiment_examples_from_dataset, train_relation_classifier,
    train_sentiment, EntityTaggerModel, KnowledgeModels,
};
use crate::metrics::{evaluate_system, MetricsReport, SystemOutput};
use crate::num::{sc, Scalar};
use crate::rng::Rng;
use crate::select::{
    encode_pool, run_episode_encoded, train_policy, PolicyInstance, PolicyParameters,
    PolicyTrainReport, RewardSetup, RolloutMode,
};

// ── checkpoints ────────────────────────────────────────────────────────────

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint<T> {
    format_version: u32,
    kind: String,
    payload: T,
}

pub fn save_checkpoint<T: Serialize>(path: impl AsRef<Path>, kind: &str, payload: &T) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        std::fs::create_dir_all(parent)?;
    }
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        payload,
    };
    std::fs::write(
        path,
        serde_json::to_string(&ck).expect("checkpoint serializes"),
    )?;
    Ok(())
}

pub fn load_checkpoint<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|_| {
        Error::Config(format!(
            "missing checkpoint `{}` ({kind}); run the corresponding training stage first",
            path.display()
        ))
    })?;
    let ck: Checkpoint<T> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("checkpoint {}: {e}", path.display())))?;
    if ck.kind != kind {
        return Err(Error::Config(format!(
            "checkpoint {} holds `{}`, expected `{kind}`",
            path.display(),
            ck.kind
        )));
    }
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!(
            "checkpoint {} has format_version {}, expected {CHECKPOINT_VERSION}",
            path.display(),
            ck.format_version
        )));
    }
    Ok(ck.payload)
}

// ── shared loading ─────────────────────────────────────────────────────────

pub fn load_corpus(cfg: &PipelineConfig) -> Result<Dataset> {
    let name = Path::new(&cfg.paths.corpus)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    load_dataset(&cfg.paths.corpus, &name)
}

fn corpus_vocab(dataset: &Dataset) -> std::collections::BTreeSet<String> {
    let mut vocab = std::collections::BTreeSet::new();
    for inst in &dataset.instances {
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
    vocab
}

const EMBEDDINGS_FILE: &str = "embeddings.txt";

/// Load embeddings from the configured file, or derive a seeded table over
/// the corpus vocabulary (persisted next to the checkpoints so later stages
/// reuse the identical table).
pub fn load_or_derive_embeddings<S: Scalar>(
    cfg: &PipelineConfig,
    dataset: &Dataset,
) -> Result<Embeddings<S>> {
    if let Some(path) = &cfg.paths.embeddings {
        return Embeddings::load(path);
    }
    let derived_path = cfg.checkpoint_path(EMBEDDINGS_FILE);
    if derived_path.exists() {
        return Embeddings::load(&derived_path);
    }
    let vocab = corpus_vocab(dataset);
    let emb = Embeddings::seeded_from_vocab(
        vocab.iter().map(|s| s.as_str()),
        cfg.embed.dim,
        cfg.train.seed,
    );
    std::fs::create_dir_all(&cfg.paths.checkpoints)?;
    emb.save(&derived_path)?;
    Ok(emb)
}

pub fn load_category_vocab(cfg: &PipelineConfig) -> Result<CategoryVocab> {
    match &cfg.paths.category_vocab {
        Some(path) => CategoryVocab::load(path),
        None => Ok(CategoryVocab::default()),
    }
}

fn finish_stage(cfg: &PipelineConfig, stage: &str, started: Instant, checkpoints: &[&str]) -> Result<()> {
    let mut manifest = RunManifest::load_or_default(&cfg.paths.checkpoints);
    manifest.config_hash = cfg.hash();
    for name in checkpoints {
        manifest.checkpoints.insert((*name).to_string(), CHECKPOINT_VERSION);
    }
    manifest
        .timings_ms
        .insert(stage.to_string(), started.elapsed().as_millis() as u64);
    manifest.write_atomic(&cfg.paths.checkpoints)
}

// ── training stages ────────────────────────────────────────────────────────

pub const KNOWLEDGE_CHECKPOINT: &str = "knowledge.json";
pub const EXTRACTOR_CHECKPOINT: &str = "extractor.json";
pub const POLICY_CHECKPOINT: &str = "policy.json";
pub const BLM_CHECKPOINT: &str = "blm.json";

#[derive(Debug, Serialize)]
pub struct KnowledgeStageReport {
    pub relation_holdout_accuracy: f64,
    pub sentiment_holdout_accuracy: f64,
    pub lexicon_entries: usize,
}

pub fn stage_train_knowledge<S: Scalar>(cfg: &PipelineConfig) -> Result<KnowledgeStageReport> {
    let started = Instant::now();
    let dataset = load_corpus(cfg)?;
    let emb: Embeddings<S> = load_or_derive_embeddings(cfg, &dataset)?;
    let tagger: EntityTaggerModel<S> = match &cfg.paths.lexicon {
        Some(path) => EntityTaggerModel::from_tsv(path)?,
        None => EntityTaggerModel::from_dataset(&dataset)?,
    };
    let relation_examples = relation_examples_from_dataset(&dataset, Split::Train, &tagger);
    let (relation, relation_acc) =
        train_relation_classifier(&relation_examples, &emb, &cfg.classifier_config())?;
    let sentiment_examples = sentiment_examples_from_dataset(&dataset, Split::Train);
    let (sentiment, sentiment_acc) =
        train_sentiment(&sentiment_examples, &emb, &cfg.classifier_config())?;
    let lexicon_entries = tagger.lexicon().len();
    let models = KnowledgeModels {
        tagger,
        relation,
        sentiment,
        theta_rel: sc::<S>(cfg.knowledge.theta_rel),
    };
    save_checkpoint(
        cfg.checkpoint_path(KNOWLEDGE_CHECKPOINT),
        "knowledge",
        &models,
    )?;
    finish_stage(cfg, "train-knowledge", started, &[KNOWLEDGE_CHECKPOINT])?;
    Ok(KnowledgeStageReport {
        relation_holdout_accuracy: relation_acc,
        sentiment_holdout_accuracy: sentiment_acc,
        lexicon_entries,
    })
}

pub fn stage_train_extractor<S: Scalar>(cfg: &PipelineConfig) -> Result<ExtractorReport> {
    let started = Instant::now();
    let dataset = load_corpus(cfg)?;
    let emb: Embeddings<S> = load_or_derive_embeddings(cfg, &dataset)?;
    let examples = extraction_examples_from_dataset(&dataset, Split::Train);
    let trained = train_extractor(
        &examples,
        &cfg.loss_weights::<S>(),
        &cfg.extractor_config(),
        &emb,
        &LexiconVerbTagger::default(),
    )?;
    save_checkpoint(
        cfg.checkpoint_path(EXTRACTOR_CHECKPOINT),
        "extractor",
        &trained.model,
    )?;
    finish_stage(cfg, "train-extractor", started, &[EXTRACTOR_CHECKPOINT])?;
    Ok(trained.report)
}

/// Reward components that can be ablated from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardAblation {
    Re,
    Rd,
    Rs,
    Rm,
}

impl RewardAblation {
    pub fn parse_list(spec: &str) -> Result<Vec<RewardAblation>> {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|tok| match tok.trim().to_lowercase().as_str() {
                "re" => Ok(RewardAblation::Re),
                "rd" => Ok(RewardAblation::Rd),
                "rs" => Ok(RewardAblation::Rs),
                "rm" => Ok(RewardAblation::Rm),
                other => Err(Error::Config(format!(
                    "unknown reward ablation `{other}` (expected re, rd, rs, rm)"
                ))),
            })
            .collect()
    }
}

/// Zero out the weights named by the ablation list.
pub fn apply_ablations(cfg: &mut PipelineConfig, ablations: &[RewardAblation]) {
    for a in ablations {
        match a {
            RewardAblation::Re => cfg.reward.w_e = 0.0,
            RewardAblation::Rd => cfg.reward.w_d = 0.0,
            RewardAblation::Rs => cfg.reward.w_s = 0.0,
            RewardAblation::Rm => cfg.reward.w_m = 0.0,
        }
    }
}

/// Build policy-training instances (distilled pools plus gold targets) and
/// the shared reward setup from a split.
pub fn build_policy_inputs<S: Scalar>(
    cfg: &PipelineConfig,
    dataset: &Dataset,
    emb: &Embeddings<S>,
    extractor: &ExtractionModel<S>,
    split: Split,
) -> (Vec<PolicyInstance<S>>, RewardSetup<S>) {
    let tagger = LexiconVerbTagger::default();
    let instances: Vec<PolicyInstance<S>> = dataset
        .split(split)
        .map(|inst| PolicyInstance {
            pool: instance_pool(extractor, emb, inst, &tagger),
            gold_tuples: inst.gold_tuples.clone(),
            gold_summary: inst.gold_summary.clone(),
        })
        .collect();
    let summary_embs: Vec<Vec<S>> = dataset
        .split(split)
        .map(|i| emb.mean_embedding(&i.gold_summary))
        .collect();
    let sampler_pool: Vec<Vec<S>> = dataset
        .split(split)
        .flat_map(|i| i.abstracts.iter())
        .flat_map(|a| a.sentences.iter())
        .map(|s| emb.mean_embedding(&s.text))
        .collect();
    let setup = RewardSetup {
        summary_embs,
        sampler_pool,
        weights: cfg.reward_weights::<S>(),
        rs_sampling: cfg.reward.rs_sampling,
    };
    (instances, setup)
}

pub fn stage_train_policy<S: Scalar>(
    cfg: &PipelineConfig,
    ablations: &[RewardAblation],
) -> Result<PolicyTrainReport> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    apply_ablations(&mut cfg, ablations);
    let dataset = load_corpus(&cfg)?;
    let emb: Embeddings<S> = load_or_derive_embeddings(&cfg, &dataset)?;
    let extractor: ExtractionModel<S> =
        load_checkpoint(cfg.checkpoint_path(EXTRACTOR_CHECKPOINT), "extractor")?;
    let (instances, setup) = build_policy_inputs(&cfg, &dataset, &emb, &extractor, Split::Train);
    let params = PolicyParameters::<S>::init(
        emb.dim(),
        &cfg.policy_config()?,
        &mut Rng::seed_from_u64(cfg.train.seed),
    );
    let (trained, report) = train_policy(params, &instances, &setup, &cfg.policy_train_config(), &emb)?;
    save_checkpoint(cfg.checkpoint_path(POLICY_CHECKPOINT), "policy", &trained)?;
    finish_stage(&cfg, "train-policy", started, &[POLICY_CHECKPOINT])?;
    Ok(report)
}

pub fn stage_train_blm<S: Scalar>(cfg: &PipelineConfig) -> Result<BlmReport> {
    let started = Instant::now();
    let dataset = load_corpus(cfg)?;
    let sentences: Vec<String> = dataset
        .split(Split::Train)
        .flat_map(|i| crate::text::split_sentences(&i.gold_summary))
        .collect();
    let (model, report) = train_blank_lm::<S>(&sentences, &cfg.blm_config())?;
    save_checkpoint(cfg.checkpoint_path(BLM_CHECKPOINT), "blm", &model)?;
    finish_stage(cfg, "train-blm", started, &[BLM_CHECKPOINT])?;
    Ok(report)
}

// ── summarize ──────────────────────────────────────────────────────────────

/// All trained pieces needed to summarize.
pub struct PipelineArtifacts<S> {
    pub embeddings: Embeddings<S>,
    pub extractor: ExtractionModel<S>,
    pub policy: PolicyParameters<S>,
    pub blm: BlankLm<S>,
    pub category_vocab: CategoryVocab,
}

impl<S: Scalar> PipelineArtifacts<S> {
    pub fn load(cfg: &PipelineConfig, dataset: &Dataset) -> Result<Self> {
        Ok(PipelineArtifacts {
            embeddings: load_or_derive_embeddings(cfg, dataset)?,
            extractor: load_checkpoint(cfg.checkpoint_path(EXTRACTOR_CHECKPOINT), "extractor")?,
            policy: load_checkpoint(cfg.checkpoint_path(POLICY_CHECKPOINT), "policy")?,
            blm: load_checkpoint(cfg.checkpoint_path(BLM_CHECKPOINT), "blm")?,
            category_vocab: load_category_vocab(cfg)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolSpanTrace {
    pub text: String,
    pub doc_id: String,
    pub sentence_index: usize,
    pub anchor_fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryTrace {
    /// The distilled span pool Z.
    pub pool: Vec<PoolSpanTrace>,
    /// Selected pool indices, in selection order (the content C).
    pub selected: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<FusionTemplate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode: Option<DecodeTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

fn instance_pool<S: Scalar>(
    extractor: &ExtractionModel<S>,
    emb: &Embeddings<S>,
    instance: &SummaryInstance,
    tagger: &LexiconVerbTagger,
) -> Vec<TextSpan<S>> {
    instance
        .abstracts
        .iter()
        .flat_map(|a| distill(extractor, emb, a, tagger))
        .collect()
}

/// Distill -> greedy selection -> template -> blank filling, with a full
/// trace. Empty pools and empty selections produce an empty output with the
/// reason recorded.
pub fn summarize<S: Scalar>(
    cfg: &PipelineConfig,
    artifacts: &PipelineArtifacts<S>,
    instance: &SummaryInstance,
) -> Result<(String, SummaryTrace)> {
    let tagger = LexiconVerbTagger::default();
    let pool = instance_pool(&artifacts.extractor, &artifacts.embeddings, instance, &tagger);
    let pool_trace: Vec<PoolSpanTrace> = pool
        .iter()
        .map(|s| PoolSpanTrace {
            text: s.text.clone(),
            doc_id: s.doc_id.clone(),
            sentence_index: s.sentence_index,
            anchor_fallback: s.anchor_fallback,
        })
        .collect();
    if pool.is_empty() {
        return Ok((
            String::new(),
            SummaryTrace {
                pool: pool_trace,
                selected: vec![],
                template: None,
                decode: None,
                reason: Some("empty span pool".into()),
            },
        ));
    }
    let encoded = encode_pool(&pool, &artifacts.embeddings);
    let episode = run_episode_encoded(
        &artifacts.policy,
        &encoded,
        RolloutMode::Greedy,
        cfg.train.seed,
    );
    if episode.selected.is_empty() {
        return Ok((
            String::new(),
            SummaryTrace {
                pool: pool_trace,
                selected: vec![],
                template: None,
                decode: None,
                reason: Some("policy selected no spans".into()),
            },
        ));
    }
    let selection = episode.selected_spans(&pool);
    let template = build_template(&selection)?;
    let max_steps = template.blank_count() * cfg.fuse.max_steps_per_blank;
    let output = fill_blanks(
        &artifacts.blm,
        &template,
        &artifacts.category_vocab,
        max_steps,
        cfg.train.seed,
    )?;
    Ok((
        output.text.clone(),
        SummaryTrace {
            pool: pool_trace,
            selected: episode.selected,
            template: Some(template),
            decode: Some(output.trace),
            reason: None,
        },
    ))
}

// ── output files and evaluation ────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryOutputLine {
    pub instance: usize,
    pub food: String,
    pub bullet_group_id: Option<String>,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<SummaryTrace>,
}

/// Summarize every instance of a split, one JSONL line per instance.
pub fn run_summarize<S: Scalar>(
    cfg: &PipelineConfig,
    split: Split,
    out_path: impl AsRef<Path>,
    with_trace: bool,
) -> Result<usize> {
    let started = Instant::now();
    let dataset = load_corpus(cfg)?;
    let artifacts = PipelineArtifacts::<S>::load(cfg, &dataset)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out_path.as_ref())?);
    let mut count = 0usize;
    for (idx, instance) in dataset.split(split).enumerate() {
        let (output, trace) = summarize(cfg, &artifacts, instance)?;
        let line = SummaryOutputLine {
            instance: idx,
            food: instance.food.clone(),
            bullet_group_id: instance.bullet_group_id.clone(),
            output,
            trace: with_trace.then_some(trace),
        };
        writeln!(file, "{}", serde_json::to_string(&line).expect("serializable"))?;
        count += 1;
    }
    file.flush()?;
    let mut manifest = RunManifest::load_or_default(&cfg.paths.checkpoints);
    manifest.config_hash = cfg.hash();
    manifest
        .timings_ms
        .insert("summarize".into(), started.elapsed().as_millis() as u64);
    let out_str = out_path.as_ref().display().to_string();
    if !manifest.outputs.contains(&out_str) {
        manifest.outputs.push(out_str);
    }
    manifest.write_atomic(&cfg.paths.checkpoints)?;
    Ok(count)
}

pub fn read_outputs(path: impl AsRef<Path>) -> Result<Vec<SummaryOutputLine>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SummaryOutputLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.as_ref().display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

/// Score system outputs against the gold side of a split.
pub fn run_evaluate<S: Scalar>(
    cfg: &PipelineConfig,
    gold_path: impl AsRef<Path>,
    outputs_path: impl AsRef<Path>,
    split: Split,
) -> Result<MetricsReport<S>> {
    let dataset = load_dataset(&gold_path, "gold")?;
    let models: KnowledgeModels<S> =
        load_checkpoint(cfg.checkpoint_path(KNOWLEDGE_CHECKPOINT), "knowledge")?;
    let emb: Embeddings<S> = load_or_derive_embeddings(cfg, &dataset)?;
    let outputs = read_outputs(outputs_path)?;
    let instances: Vec<&SummaryInstance> = dataset.split(split).collect();
    let system_outputs: Vec<SystemOutput> = outputs
        .iter()
        .map(|o| SystemOutput {
            instance: o.instance,
            output: o.output.clone(),
        })
        .collect();
    evaluate_system(
        &instances,
        &system_outputs,
        &models,
        &emb,
        &cfg.tuple_match_config::<S>(),
    )
}
