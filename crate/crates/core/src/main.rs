//! Command-line surface over the pipeline stages.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nutribullets::corpus::{dataset_stats, load_dataset, save_dataset, synth_corpus, Split};
use nutribullets::pipeline::{
    run_evaluate, run_summarize, stage_train_blm, stage_train_extractor, stage_train_knowledge,
    stage_train_policy, PipelineConfig, RewardAblation,
};
use nutribullets::F;

#[derive(Parser)]
#[command(
    name = "nutribullets",
    version,
    about = "Extract-compose summarization for health and nutrition text"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the entity tagger lexicon plus relation and sentiment classifiers
    TrainKnowledge {
        #[arg(long)]
        config: String,
    },
    /// Train the rationale span extractor
    TrainExtractor {
        #[arg(long)]
        config: String,
    },
    /// Train the content-selection policy network
    TrainPolicy {
        #[arg(long)]
        config: String,
        /// Zero out reward components, e.g. `--ablate rm,rd`
        #[arg(long)]
        ablate: Option<String>,
    },
    /// Train the blank language model used for fusion
    TrainBlm {
        #[arg(long)]
        config: String,
    },
    /// Summarize a split, one JSONL output line per instance
    Summarize {
        #[arg(long)]
        config: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: String,
        /// Include the full pipeline trace in each output line
        #[arg(long)]
        trace: bool,
    },
    /// Score system outputs against gold summaries; report JSON on stdout
    Evaluate {
        #[arg(long)]
        config: String,
        #[arg(long)]
        gold: String,
        #[arg(long)]
        outputs: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Per-split corpus statistics
    Stats {
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "dataset")]
        name: String,
        /// Emit the report as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Generate a deterministic synthetic corpus
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        foods: usize,
        #[arg(long, default_value_t = 4)]
        tuples: usize,
        #[arg(long)]
        out: String,
    },
}

fn run(command: Command) -> nutribullets::Result<()> {
    match command {
        Command::TrainKnowledge { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = stage_train_knowledge::<F>(&cfg)?;
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::TrainExtractor { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = stage_train_extractor::<F>(&cfg)?;
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::TrainPolicy { config, ablate } => {
            let cfg = PipelineConfig::load(&config)?;
            let ablations = match ablate {
                Some(spec) => RewardAblation::parse_list(&spec)?,
                None => Vec::new(),
            };
            let mut effective = cfg.clone();
            nutribullets::pipeline::apply_ablations(&mut effective, &ablations);
            eprintln!(
                "effective reward weights: {}",
                serde_json::to_string(&effective.reward).expect("serializable")
            );
            let report = stage_train_policy::<F>(&cfg, &ablations)?;
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::TrainBlm { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = stage_train_blm::<F>(&cfg)?;
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::Summarize {
            config,
            split,
            out,
            trace,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let count = run_summarize::<F>(&cfg, split.into(), &out, trace)?;
            eprintln!("wrote {count} summaries to {out}");
        }
        Command::Evaluate {
            config,
            gold,
            outputs,
            split,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = run_evaluate::<F>(&cfg, &gold, &outputs, split.into())?;
            eprintln!("{}", report.render_table());
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::Stats { data, name, json } => {
            let dataset = load_dataset(&data, &name)?;
            let report = dataset_stats(&dataset);
            if json {
                println!("{}", serde_json::to_string(&report).expect("serializable"));
            } else {
                print!("{}", report.render());
            }
        }
        Command::Synth {
            seed,
            foods,
            tuples,
            out,
        } => {
            let dataset = synth_corpus(seed, foods, tuples);
            save_dataset(&dataset, &out)?;
            eprintln!("wrote {} instances to {out}", dataset.instances.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
