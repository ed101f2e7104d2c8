use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use morale_core::experiment::AblationAxis;
use morale_core::model::LossType;

#[derive(Debug, Parser)]
#[command(name = "morale", version, about = "Listwise scalar preference alignment toolkit")]
pub struct Cli {
    /// Run data-parallel loops on one thread. Outputs are identical.
    #[arg(long, global = true)]
    pub sequential: bool,

    /// More log output (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic annotated corpus (JSONL).
    GenSynth(GenSynthArgs),
    /// Train a scorer on the training split and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate checkpoints on the test split of a corpus.
    Eval(EvalArgs),
    /// Train and evaluate over a grid of list sizes or training fractions.
    Ablate(AblateArgs),
    /// Annotator agreement, screening, canary, shift and modality report.
    Agree(AgreeArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Rerun a command from its manifest into a new output location.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// TOML config; the [synth] section is used.
    #[arg(long, env = "MORALE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Generator seed (overrides the config file).
    #[arg(long, env = "MORALE_SEED")]
    pub seed: Option<u64>,
    /// Corpus file to write; the manifest goes beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default, Clone)]
pub struct TrainFlags {
    /// Training objective.
    #[arg(long, env = "MORALE_LOSS", value_name = "lipo|bpo|bce")]
    pub loss: Option<LossType>,
    /// Seed for the split, subsampling, initialisation and shuffling.
    #[arg(long, env = "MORALE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "MORALE_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "MORALE_LR")]
    pub lr: Option<f64>,
    /// Maximum scenarios per training list (1-5).
    #[arg(long, env = "MORALE_LIST_SIZE")]
    pub list_size: Option<usize>,
    /// Fraction of training lists kept, in (0, 1].
    #[arg(long, env = "MORALE_FRACTION")]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Annotated corpus (JSONL).
    #[arg(long, env = "MORALE_CORPUS")]
    pub corpus: PathBuf,
    /// Cut images with more than five scenarios down to five instead of
    /// rejecting the corpus.
    #[arg(long)]
    pub truncate_oversized: bool,
    /// Output directory; a manifest.json is written inside.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// TOML config; the [train] section is used.
    #[arg(long, env = "MORALE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Checkpoint to evaluate; repeat for one row per checkpoint.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Include per-list metrics in the JSON output.
    #[arg(long)]
    pub per_group: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// TOML config; the [train] and [ablate] sections are used.
    #[arg(long, env = "MORALE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Axis to vary: list-size or fraction.
    #[arg(long)]
    pub axis: Option<AblationAxis>,
    /// Comma-separated axis values (default: the full grid of the axis).
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Comma-separated seeds (default 0,1,2,3,4).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// TOML config; the [agree] section is used.
    #[arg(long, env = "MORALE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Adds model-vs-annotator rows for the checkpoint's test split.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Items with a rating stdev above this are screened out.
    #[arg(long)]
    pub stdev_max: Option<f64>,
    /// Annotators whose mean absolute deviation exceeds this are flagged.
    #[arg(long)]
    pub mad_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service TOML config; MORALE_* variables override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Address to bind (overrides config and MORALE_BIND).
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Where the rerun writes its outputs.
    #[arg(long)]
    pub out: PathBuf,
}
