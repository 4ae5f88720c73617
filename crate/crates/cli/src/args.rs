use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use ugrm_core::denoise::{unit_grid, Objective, Variant};
use ugrm_core::graph::MatrixKind;
use ugrm_core::io::Bandwidth;

/// Graph Fourier transforms from the unified representation matrix.
#[derive(Debug, Parser)]
#[command(name = "ugrm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Export the transform coefficients of a signal.
    Spectrum(SpectrumArgs),
    /// Grid-search bandlimited denoising over (alpha, k, M).
    Denoise(DenoiseArgs),
    /// Singular values along an alpha grid, with ordering violations.
    Monotonicity(MonotonicityArgs),
    /// Write the adjacency matrix of a station or line graph.
    BuildGraph(BuildGraphArgs),
    /// Write a seeded synthetic bandlimited dataset.
    Synth(SynthArgs),
    /// Re-run the command recorded in a manifest or report.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn out_dir_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Spectrum(a) => Some(&mut a.out_dir),
            Command::Denoise(a) => Some(&mut a.out_dir),
            Command::Monotonicity(a) => Some(&mut a.out_dir),
            Command::BuildGraph(a) => Some(&mut a.out_dir),
            Command::Synth(a) => Some(&mut a.out_dir),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum VariantArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::I => Variant::I,
            VariantArg::II => Variant::II,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Snr,
    Bae,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Snr => Objective::MaximizeSnr,
            ObjectiveArg::Bae => Objective::MinimizeBae,
        }
    }
}

/// Fixed comparison matrices: Laplacian, adjacency, in-degree, signless Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum BaselineArg {
    #[value(name = "L", alias = "lap")]
    L,
    #[value(name = "A", alias = "adj")]
    A,
    #[value(name = "D", alias = "id")]
    D,
    #[value(name = "Q", alias = "slap")]
    Q,
}

impl From<BaselineArg> for MatrixKind {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::L => MatrixKind::Laplacian,
            BaselineArg::A => MatrixKind::Adjacency,
            BaselineArg::D => MatrixKind::InDegree,
            BaselineArg::Q => MatrixKind::SignlessLaplacian,
        }
    }
}

impl std::fmt::Display for BaselineArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(MatrixKind::from(*self).symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthArg {
    Auto,
    Fixed(f64),
}

impl From<BandwidthArg> for Bandwidth {
    fn from(b: BandwidthArg) -> Self {
        match b {
            BandwidthArg::Auto => Bandwidth::Auto,
            BandwidthArg::Fixed(v) => Bandwidth::Fixed(v),
        }
    }
}

fn parse_bandwidth(s: &str) -> Result<BandwidthArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BandwidthArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(BandwidthArg::Fixed(v)),
        _ => Err(format!("expected 'auto' or a positive number, got {s:?}")),
    }
}

/// The spatial factor: a kNN graph over stations or an explicit adjacency matrix.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpatialArgs {
    /// Stations CSV (label,longitude,latitude).
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    pub stations: Option<PathBuf>,
    /// Adjacency CSV; entry (i, j) is the weight of edge j -> i.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub neighbors: usize,
    /// Kernel width of the kNN weights, or "auto" for the mean neighbor distance.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub bandwidth: BandwidthArg,
    /// Point kNN edges from each station to its neighbors.
    #[arg(long)]
    pub reverse_knn: bool,
}

/// Signal rows are stations; columns are time steps on a directed line
/// graph unless `--time-graph` is given.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProductArgs {
    /// Signal CSV, one row per station and one column per time step.
    #[arg(long)]
    pub signal: PathBuf,
    #[command(flatten)]
    pub spatial: SpatialArgs,
    /// Adjacency CSV of the temporal factor.
    #[arg(long)]
    pub time_graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: ProductArgs,
    #[arg(long, value_enum, default_value = "I")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Z-score the signal before transforming.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub input: ProductArgs,
    #[arg(long, value_enum, default_value = "I")]
    pub variant: VariantArg,
    #[arg(long, value_delimiter = ',', default_values_t = unit_grid())]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = unit_grid())]
    pub k_grid: Vec<f64>,
    /// Bandwidths to evaluate; defaults to 0, 5, 10, ... up to the graph order.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Noise standard deviations, in units of the normalized signal.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4])]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "snr")]
    pub objective: ObjectiveArg,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [BaselineArg::L, BaselineArg::A, BaselineArg::D, BaselineArg::Q])]
    pub baselines: Vec<BaselineArg>,
    #[arg(long, conflicts_with = "baselines")]
    pub no_baselines: bool,
    /// Use the signal as given instead of z-scoring it first.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MonotonicityArgs {
    #[command(flatten)]
    pub spatial: SpatialArgs,
    /// Analyze the product with a directed line graph of this many steps.
    #[arg(long)]
    pub time_steps: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = unit_grid())]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
    pub k_grid: Vec<f64>,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BuildGraphArgs {
    /// Stations CSV (label,longitude,latitude).
    #[arg(long, required_unless_present = "line")]
    pub stations: Option<PathBuf>,
    /// Emit a directed line graph with this many vertices instead.
    #[arg(long, conflicts_with = "stations")]
    pub line: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub neighbors: usize,
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub bandwidth: BandwidthArg,
    #[arg(long)]
    pub reverse_knn: bool,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of stations.
    #[arg(long, default_value_t = 20)]
    pub stations_count: usize,
    #[arg(long, default_value_t = 20)]
    pub time_steps: usize,
    /// Number of lowest frequencies carrying the signal.
    #[arg(long, default_value_t = 60)]
    pub band: usize,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A manifest.json or report JSON written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}
