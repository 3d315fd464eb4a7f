//! `foodpair`: runs one pipeline stage per subcommand.
//!
//! Every stage that writes files also records its fully resolved arguments in
//! `manifest.json` next to its output, and `foodpair replay` reruns them.

mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use foodpair_core::corpus::{DEFAULT_MIN_COOCCURRENCE, DEFAULT_MIN_OCCURRENCE};
use foodpair_core::embedding::DEFAULT_DIM;
use foodpair_core::pairscore::{Split, SplitRatios};
use foodpair_core::recommend::RankFilter;

#[derive(Parser, Debug)]
#[command(name = "foodpair", version, about = "Ingredient pairing pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Count ingredient occurrences and co-occurrences in a JSON-lines corpus.
    Ingest(IngestArgs),
    /// Score known pairs and assign train/val/test splits.
    Score(ScoreArgs),
    /// Train PPMI+SVD ingredient vectors, or validate a pretrained file.
    Embed(EmbedArgs),
    /// Fit the pairing model and write checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a baseline on one split.
    Eval(EvalArgs),
    /// Print the top partners of one ingredient as CSV.
    Rank(RankArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
    /// Rerun the stages recorded in a manifest.
    Replay(ReplayArgs),
    /// Write a seeded synthetic corpus with planted pairing groups.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct IngestArgs {
    #[arg(long)]
    pub recipes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_OCCURRENCE)]
    pub min_occurrence: u64,
    #[arg(long, default_value_t = DEFAULT_MIN_COOCCURRENCE)]
    pub min_cooccurrence: u64,
    /// Worker threads for counting.
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ScoreArgs {
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `stats.json` beside `--out`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: SplitRatios,
}

#[derive(Args, Debug, Clone)]
pub struct EmbedArgs {
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    /// Required unless `--load` is given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PPMI shift k (log k is subtracted before clipping).
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Validate a pretrained vector file instead of training.
    #[arg(long, conflicts_with_all = ["dim", "shift"])]
    pub load: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Encoder width i and deep-layer width j.
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub no_wide: bool,
    /// Train on seeded random vectors of the same width instead of the file's.
    #[arg(long)]
    pub random_embeddings: bool,
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Required unless `--baseline` is given.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    /// Evaluate a registered baseline (cosine, oracle) instead of the checkpoint.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Label threshold for ROC-AUC; defaults to the dataset's mean + 2 std.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Append a comparison row to this CSV, writing the header if it is new.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RankArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Filtered counts; the candidate partners are its vocabulary.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub ingredient: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value = "all")]
    pub filter: RankFilter,
    #[arg(long, default_value = "siamese")]
    pub predictor: String,
}

#[derive(Args, Debug, Clone)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured bind address.
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long, default_value = "siamese")]
    pub predictor: String,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub recipes: usize,
    #[arg(long, default_value_t = 8)]
    pub groups: usize,
    #[arg(long, default_value_t = 10)]
    pub group_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match stages::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(foodpair_core::Error::UnknownIngredient { suggestions, .. }) =
                e.downcast_ref::<foodpair_core::Error>()
            {
                if !suggestions.is_empty() {
                    eprintln!("did you mean: {}", suggestions.join(", "));
                }
            }
            ExitCode::FAILURE
        }
    }
}
