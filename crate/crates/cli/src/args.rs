use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "aep", version, about = "Graph-based nearest neighbor search with adaptive entry points")]
pub struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate a synthetic dataset with queries and ground truth.
    Gen(GenArgs),
    /// Generate an adversarial island instance.
    GenHard(GenHardArgs),
    /// Entry-point candidate indexes.
    #[command(subcommand)]
    Eps(EpsCommand),
    /// Build a proximity graph.
    Build(BuildArgs),
    /// Search a graph and write the result ids.
    Search(SearchArgs),
    /// Sweep queue lengths and candidate counts; write a CSV.
    Bench(BenchArgs),
    /// Analyses of built graphs.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Gauss,
    DeepLike,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = Preset::Gauss)]
    pub preset: Preset,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000)]
    pub queries: usize,
    /// Override the preset's dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Ground-truth depth.
    #[arg(long, default_value_t = 100)]
    pub gt_k: usize,
    /// Directory or file-name prefix for base.fvecs, query.fvecs, gt.ivecs.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Args, Serialize)]
pub struct GenHardArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub queries: usize,
    /// Directory or file-name prefix for base.fvecs, query.fvecs, gt.ivecs,
    /// spec.json.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum EpsCommand {
    /// Run k-means and snap the centers to database points.
    Build(EpsBuildArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EpsBuildArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    /// Candidate counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    pub iters: usize,
    /// Train on a sample of at most K times this many rows.
    #[arg(long)]
    pub max_points_per_centroid: Option<usize>,
    /// Output file; only with a single K.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Output directory receiving eps_k<K>.meps per K.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Nsg,
    Vamana,
    Knn,
    Brute,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Nsg)]
    pub algo: Algo,
    /// Out-degree cap; the preset's value by default.
    #[arg(long)]
    pub r: Option<usize>,
    /// Construction queue length.
    #[arg(long)]
    pub l: Option<usize>,
    /// Candidate pool cap.
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Neighbors per node of the NN-Descent graph.
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    /// Entry-point index, or `none` for the graph's fixed entry.
    #[arg(long, default_value = "none")]
    pub eps: String,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    #[arg(short = 'L', long = "L", default_value_t = 64)]
    pub queue_len: usize,
    /// Ground truth; prints recall@k when given.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Writes one JSON line per query with the expanded nodes.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Result ids as ivecs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    /// Directory of eps_k<K>.meps files; without it only the fixed entry runs.
    #[arg(long)]
    pub eps_dir: Option<PathBuf>,
    /// Restrict to these K; 1 is the fixed entry.
    #[arg(long = "K", value_delimiter = ',')]
    pub candidates: Vec<usize>,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    #[arg(
        short = 'L',
        long = "L",
        value_delimiter = ',',
        default_value = "16,24,32,48,64,96,128,256,512"
    )]
    pub queue_lens: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Query threads during timing; defaults to --threads.
    #[arg(long)]
    pub query_threads: Option<usize>,
    /// Dataset label written to every row.
    #[arg(long, default_value = "unnamed")]
    pub dataset: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum AnalyzeCommand {
    /// Certify the smallest B for which the graph is a B-MSNET.
    Bmsnet(BmsnetArgs),
    /// Evaluate the hop bounds of the adaptive and fixed entries.
    Theorem(TheoremArgs),
    /// Report the Voronoi cells of queries and their ground truth.
    Overlay(OverlayArgs),
    /// Size of entry-point indexes relative to the graph.
    Overhead(OverheadArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BmsnetArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    /// Examine every ordered pair regardless of size.
    #[arg(long, conflicts_with = "sample")]
    pub exact: bool,
    /// Ordered pairs to sample on large graphs.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TheoremArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub eps: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverlayArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub eps: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Ground truth; the union of its ids is reported.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverheadArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub eps_dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
