//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use sip_core::target::Method;

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {:?} (le|arope|grarep|netmf)", s))
}

#[derive(Parser)]
#[command(
    name = "sip",
    about = "Streaming network embedding with space-invariant projection",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Fit an embedding on the first n nodes and persist the projection basis.
    Fit(FitArgs),
    /// Generate embeddings for an arrival batch against a saved basis.
    Generate(GenerateArgs),
    /// Scan arrivals for the restart threshold m0.
    Threshold(ThresholdArgs),
    /// Eigenvector prefix-correlation grid around m0.
    Heatmap(HeatmapArgs),
    /// Three-mode classification benchmark over an n sweep.
    Bench(BenchArgs),
    /// Generate a synthetic labeled benchmark graph.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Edge list: `src dst [weight]`, '#' comments.
    #[arg(long)]
    pub input: PathBuf,

    /// Embedding method.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,

    /// Embedding dimension.
    #[arg(long, default_value_t = 128)]
    pub dim: usize,

    /// Arrival order: `file`, `shuffle`, or `connected` (seeded).
    #[arg(long, default_value = "file")]
    pub order: String,

    /// Seed for every random choice (solvers, shuffles, classifiers).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Input carries a third weight column.
    #[arg(long, default_value_t = false)]
    pub weighted: bool,

    /// Permit self-loops in the input.
    #[arg(long, default_value_t = false)]
    pub allow_self_loops: bool,

    /// Skip giant-component filtering.
    #[arg(long, default_value_t = false)]
    pub no_giant: bool,

    /// AROPE polynomial weights, comma separated.
    #[arg(long, default_value = "1,0.01,0.0001")]
    pub arope_weights: String,

    /// GraRep maximum order k (dim must divide evenly).
    #[arg(long, default_value_t = 4)]
    pub grarep_k: usize,

    /// GraRep log shift; defaults to 1/n.
    #[arg(long)]
    pub grarep_beta: Option<f64>,

    /// NetMF first-stage rank h.
    #[arg(long, default_value_t = 256)]
    pub netmf_h: usize,

    /// NetMF window T.
    #[arg(long, default_value_t = 10)]
    pub netmf_t: usize,

    /// NetMF negative-sample count b.
    #[arg(long, default_value_t = 1.0)]
    pub netmf_b: f64,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Initial node count (defaults to the whole graph).
    #[arg(long)]
    pub n: Option<usize>,

    /// Where to persist the basis.
    #[arg(long)]
    pub state: PathBuf,

    /// Embedding CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Saved basis from `fit` (rewritten if a checked batch forces retrain).
    /// Carries the method, parameters, and the fitted subgraph.
    #[arg(long)]
    pub state: PathBuf,

    /// Seed for the drift-check norm estimators.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Arrival batch edge list; unknown tokens become new nodes.
    #[arg(long)]
    pub batch: PathBuf,

    /// Run the space-drift judgement before projecting.
    #[arg(long, default_value_t = false)]
    pub check: bool,

    /// Embedding CSV for the new nodes.
    #[arg(long)]
    pub out: PathBuf,

    /// Verdict JSON output.
    #[arg(long)]
    pub verdict: Option<PathBuf>,
}

#[derive(Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Initial node count.
    #[arg(long)]
    pub n: usize,

    /// Scan cap.
    #[arg(long, default_value_t = 1024)]
    pub m_max: usize,

    /// Report JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Initial node count.
    #[arg(long)]
    pub n: usize,

    /// Comma-separated arrival counts, or `auto` for {0, m0, 5 m0}.
    #[arg(long, default_value = "auto")]
    pub m_grid: String,

    /// Leading spectral directions to correlate.
    #[arg(long, default_value_t = 128)]
    pub eig_count: usize,

    /// Threshold scan cap (for the m0 marker).
    #[arg(long, default_value_t = 1024)]
    pub m_max: usize,

    /// Heatmap CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Label file: `node label` per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    /// Single sweep point.
    #[arg(long)]
    pub n: Option<usize>,

    /// Sweep `start:stop:step`.
    #[arg(long)]
    pub n_range: Option<String>,

    /// Threshold scan cap per sweep point.
    #[arg(long, default_value_t = 1024)]
    pub m_max: usize,

    /// Parallel sweep workers.
    #[arg(long, default_value_t = 2)]
    pub jobs: usize,

    /// Output prefix; writes `<out>.runs.csv`, `<out>.table.csv`, `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Edge list output.
    #[arg(long)]
    pub out_edges: PathBuf,

    /// Label file output.
    #[arg(long)]
    pub out_labels: PathBuf,

    /// Connected-core size.
    #[arg(long, default_value_t = 2591)]
    pub nodes: usize,

    /// Disconnected 3-cliques appended after the core.
    #[arg(long, default_value_t = 40)]
    pub extra_triangles: usize,

    #[arg(long, default_value_t = 50)]
    pub communities: usize,

    #[arg(long, default_value_t = 14.0)]
    pub mean_degree: f64,

    #[arg(long, default_value_t = 0.35)]
    pub mixing: f64,

    #[arg(long, default_value_t = 2.0)]
    pub hub_exponent: f64,

    #[arg(long, default_value_t = 60.0)]
    pub hub_cap: f64,

    #[arg(long, default_value_t = 0.3)]
    pub second_label_prob: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}
