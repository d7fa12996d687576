use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tpca::GuidanceConfig;

#[derive(Debug, Parser)]
#[command(name = "tpca", version, about = "Describe image sets with principal phrases")]
pub struct Cli {
    /// Re-run the command recorded in a run.json manifest.
    #[arg(long, global = true, value_name = "RUN_JSON")]
    pub from_manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Decode the average phrase of an image set.
    Average(GenerateArgs),
    /// Decode the average phrase and the principal phrases.
    Principal(GenerateArgs),
    /// Extract comparison directions or words.
    Baseline(BaselineArgs),
    /// Variance score of a phrase set over an image set.
    Score(ScoreArgs),
    /// Per-image projections onto every principal phrase.
    Project(ProjectArgs),
    /// Radar plot of one image's centered projections.
    Radar(RadarArgs),
    /// Attribute probe trained on the projection table.
    Probe(ProbeArgs),
    /// Agglomerative clustering into K groups.
    Cluster(ClusterArgs),
    /// Seeded uniform subsample of an embedding file.
    Subsample(SubsampleArgs),
    /// Write the standard toy backend, images and lexical graph.
    ToyFixture(FixtureArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// `toy:<spec.json>` or `remote:<url>`.
    #[arg(long)]
    pub backend: String,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// LEXG hypernym graph; without it no aggregation is applied.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// JSON guidance config; individual flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda_v: Option<f64>,
    #[arg(long)]
    pub lambda_o: Option<f64>,
    /// Number of principal phrases.
    #[arg(long = "phrases")]
    pub num_phrases: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Fully resolved config; only ever set when replaying a manifest.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<GuidanceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Pca,
    Kmeans,
    Freq,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Number of directions or words.
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Captioning backend, required by `freq`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long, default_value = "image of a")]
    pub prompt: String,
    #[arg(long, default_value_t = 5)]
    pub max_tokens: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// phrases.json written by `principal`.
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Report raw projections instead of subtracting each phrase's mean.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RadarArgs {
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub image_id: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// JSON `{"attributes": [..], "labels": {"<image id>": [bool, ..]}}`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SubsampleArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
}
