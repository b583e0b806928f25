//! Flag definitions. Every subcommand's flags can also come from a JSON
//! config file (`--config`), keyed by the snake_case field name; flags given
//! on the command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use l2v_core::steering::{FilterMode, InjectionPositions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "l2v", version, about = "Low-pass latent steering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a steering vector from positive and negative hidden-state dumps.
    Extract(ExtractArgs),
    /// PCA projection and covariance trace of a direction set.
    Analyze(AnalyzeArgs),
    /// Per-band spectral energy comparison of two tensors.
    Bands(BandsArgs),
    /// Inject a steering vector into every row of a hidden-state tensor.
    Steer(SteerArgs),
    /// Run a toy network with and without a steering hook.
    ToyRun(ToyRunArgs),
    /// Dump contrastive hidden states from a toy network.
    ToyDump(ToyDumpArgs),
    /// Covariance trace of synthetic direction sets before and after filtering.
    Drift(DriftArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extract(_) => "extract",
            Command::Analyze(_) => "analyze",
            Command::Bands(_) => "bands",
            Command::Steer(_) => "steer",
            Command::ToyRun(_) => "toy-run",
            Command::ToyDump(_) => "toy-dump",
            Command::Drift(_) => "drift",
        }
    }
}

/// Options that are never read from the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunOpts {
    /// JSON object supplying values for any flag of this subcommand.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Manifest path [default: first output with extension .manifest.json]
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetName {
    Source,
    Target,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Positive-role hidden states (n x d_source).
    #[arg(long)]
    pub pos: Option<PathBuf>,
    /// Negative-role hidden states, same shape and layer.
    #[arg(long)]
    pub neg: Option<PathBuf>,
    /// Output steering vector.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Low-pass cutoff; required unless --bypass-filter.
    #[arg(long)]
    pub k: Option<usize>,
    /// Source width [default: taken from the inputs]
    #[arg(long)]
    pub d_source: Option<usize>,
    /// Target width [default: d_source]
    #[arg(long)]
    pub d_target: Option<usize>,
    /// Source layer [default: the inputs' layer tag]
    #[arg(long)]
    pub layer_source: Option<u32>,
    /// Target layer [default: layer_source]
    #[arg(long)]
    pub layer_target: Option<u32>,
    /// Injection strength stored with the vector [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Skip the low-pass mask (keeps every bin, Nyquist included).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub bypass_filter: Option<bool>,
    /// last | all
    #[arg(long, value_parser = parse_enum::<InjectionPositions>)]
    pub positions: Option<InjectionPositions>,
    /// aggregate | per-sample
    #[arg(long, value_parser = parse_enum::<FilterMode>)]
    pub filter_mode: Option<FilterMode>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Direction set (n x d).
    #[arg(long)]
    pub dirs: Option<PathBuf>,
    /// Number of principal components [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
    /// Projection CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG scatter of the first two components.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Compared tensor. Mutually exclusive with --k.
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Reference tensor.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Compare b against its own low-pass at this cutoff instead of --a.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of frequency bands [default: 8]
    #[arg(long)]
    pub n_bands: Option<usize>,
    /// Per-band CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG bar chart of the relative error.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Hidden states to steer (n x d_target).
    #[arg(long)]
    pub hidden: Option<PathBuf>,
    /// Steering vector written by `extract`.
    #[arg(long)]
    pub vector: Option<PathBuf>,
    /// Injection strength [default: the vector's stored alpha]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Steered output tensor.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyRunArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Canonical network: source (d=64) | target (d=48).
    #[arg(long, value_parser = parse_enum::<NetName>)]
    pub net: Option<NetName>,
    /// Toy network config JSON, instead of --net.
    #[arg(long)]
    pub toy_config: Option<PathBuf>,
    /// JSON array of token ids.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Steering vector written by `extract`.
    #[arg(long)]
    pub vector: Option<PathBuf>,
    /// Injection strength [default: the vector's stored alpha]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hooked layer [default: the vector's layer_target]
    #[arg(long)]
    pub layer: Option<u32>,
    /// last | all [default: the vector's setting]
    #[arg(long, value_parser = parse_enum::<InjectionPositions>)]
    pub positions: Option<InjectionPositions>,
    /// Logits CSV (baseline and steered rows).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDumpArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    #[arg(long, value_parser = parse_enum::<NetName>)]
    pub net: Option<NetName>,
    #[arg(long)]
    pub toy_config: Option<PathBuf>,
    /// Layer whose final-position states are dumped.
    #[arg(long)]
    pub layer: Option<u32>,
    /// Number of prompt pairs [default: 32]
    #[arg(long)]
    pub n: Option<usize>,
    /// Random question length before the suffix [default: 6]
    #[arg(long)]
    pub question_len: Option<usize>,
    /// Prompt seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_pos: Option<PathBuf>,
    #[arg(long)]
    pub out_neg: Option<PathBuf>,
    /// Also write the direction set pos - neg.
    #[arg(long)]
    pub out_dirs: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub run: RunOpts,
    /// Synthetic spec JSON for the clean set.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Synthetic spec JSON for the noisy set.
    #[arg(long)]
    pub noisy: Option<PathBuf>,
    /// Filter cutoff [default: the larger k_signal]
    #[arg(long)]
    pub k: Option<usize>,
    /// Trace CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG bar chart of the four traces.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Also write the noisy direction set.
    #[arg(long)]
    pub out_dirs: Option<PathBuf>,
}
