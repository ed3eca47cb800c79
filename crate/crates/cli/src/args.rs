use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glitchscope_core::daf;
use glitchscope_core::datastore::CaptionPolicy;
use glitchscope_core::scorer::ScorerBinding;
use glitchscope_core::simindex::SimilarityMetric;
use glitchscope_core::tcac::{self, PoolScope};

#[derive(Debug, Parser)]
#[command(name = "glitchscope", version, about = "Audit image-embedding models for systematic failures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset manifest and cache decoded images as PNG.
    Ingest(IngestArgs),
    /// Embed images or captions with a scorer and write an embedding file.
    Embed(EmbedArgs),
    /// Neighbor-ranking discrepancies between two embedding models.
    #[command(subcommand)]
    Daf(DafCommand),
    /// Caption-ranking churn under image transforms.
    #[command(subcommand)]
    Tcac(TcacCommand),
    /// Serve the triage API (and a UI bundle, if given).
    Serve(ServeArgs),
    /// Aggregate a label log against case files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Receives `manifest.jsonl` and `images/<id>.png`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Modality {
    Image,
    Text,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// `toy:seed=N,dim=D`, `remote:<url>`, or `file:<path>[,<path>...]`.
    #[arg(long)]
    pub scorer: ScorerBinding,
    #[arg(long, value_enum)]
    pub modality: Modality,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DafCommand {
    /// Compare two image embedding stores and write flagged cases.
    Run(DafRunArgs),
    /// Write analysis prompt files for flagged cases.
    Prompt(DafPromptArgs),
}

#[derive(Debug, Args)]
pub struct DafRunArgs {
    #[arg(long)]
    pub emb_a: PathBuf,
    #[arg(long)]
    pub emb_b: PathBuf,
    #[arg(long, default_value_t = daf::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value = "cosine")]
    pub metric: SimilarityMetric,
    /// Minimum `1 - jaccard@k` for a case to be flagged.
    #[arg(long, default_value_t = daf::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = daf::DEFAULT_RBO_P)]
    pub rbo_p: f64,
    /// Attach captions from this manifest so prompts can be emitted later.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DafPromptArgs {
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long, default_value_t = daf::DEFAULT_BATCH_SIZE)]
    pub batch: usize,
    #[arg(long, default_value = "longest")]
    pub caption_policy: CaptionPolicy,
    /// Caption source for cases written without `--manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TcacCommand {
    /// Build per-image caption pools from caption embeddings.
    Pool(TcacPoolArgs),
    /// Rank pools before and after each transform and select the most-changed cases.
    Run(TcacRunArgs),
}

#[derive(Debug, Args)]
pub struct TcacPoolArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub text_emb: PathBuf,
    #[arg(long, default_value_t = tcac::DEFAULT_PER_CAPTION)]
    pub per_caption: usize,
    /// `per-image` (neighbors of the image's captions) or `global` (every caption).
    #[arg(long, default_value = "per-image")]
    pub pool_scope: PoolScope,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TcacRunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pools: PathBuf,
    #[arg(long)]
    pub scorer: ScorerBinding,
    /// TOML transform config; the six standard transforms when omitted.
    #[arg(long)]
    pub transforms: Option<PathBuf>,
    /// Add the elastic transform to the suite.
    #[arg(long)]
    pub elastic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = tcac::DEFAULT_K)]
    pub k: usize,
    /// Cases kept per transform.
    #[arg(long, default_value_t = tcac::DEFAULT_PER_TRANSFORM)]
    pub select: usize,
    #[arg(long, default_value_t = tcac::DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// Annotate each case with the matching DAF finding.
    #[arg(long)]
    pub daf_cases: Option<PathBuf>,
    /// Write transformed copies to `<dir>/<transform>/<id>.png`.
    #[arg(long)]
    pub images_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub daf_cases: Option<PathBuf>,
    #[arg(long)]
    pub tcac_cases: Option<PathBuf>,
    /// Append-only label log; created if missing.
    #[arg(long)]
    pub labels: PathBuf,
    /// Original images as `<id>.png`.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Transformed images as `<transform>/<id>.png`.
    #[arg(long)]
    pub transformed: Option<PathBuf>,
    /// Built UI bundle served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub cases: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
