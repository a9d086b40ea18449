// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::str::FromStr;

use bayescpd::{Hyperparams, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bayescpd",
    version,
    about = "Exact Bayesian multiple-changepoint inference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evidence, segment-count posterior, MAP, samples and marginals.
    Segment(SegmentArgs),
    /// Sampled against exact changepoint marginals.
    Marginals(SegmentArgs),
    /// Fit hyperparameters to training files by Monte Carlo EM.
    Mcem(McemArgs),
    /// Write a simulated sequence in the ingest format.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Iid,
    Ar1,
}

impl From<Model> for Variant {
    fn from(m: Model) -> Self {
        match m {
            Model::Iid => Variant::IidNormal,
            Model::Ar1 => Variant::Ar1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaSource {
    Explicit(Hyperparams),
    Auto,
    Mcem,
}

fn parse_four(s: &str) -> Result<Hyperparams, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [mu0, k0, nu0, s0] = parts[..] else {
        return Err(format!(
            "expected mu0,k0,nu0,sigma0sq; got {} values",
            parts.len()
        ));
    };
    Hyperparams::new(mu0, k0, nu0, s0).map_err(|e| e.to_string())
}

impl FromStr for ThetaSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "mcem" => Ok(Self::Mcem),
            other => parse_four(other).map(Self::Explicit),
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct ModelArgs {
    /// Maximum number of segments [default: min(20, n)].
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Shortest allowed segment.
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Longest allowed segment.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, value_enum, default_value_t = Model::Iid)]
    pub model: Model,
    /// Subtract each track's observed mean before analysis.
    #[arg(long)]
    pub center: bool,
    /// Join several --data (or --train) files end to end instead of
    /// treating them as replicas.
    #[arg(long)]
    pub concat: bool,
    /// Posterior samples (or samples per training sequence for MCEM).
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct OutputArgs {
    /// Written atomically; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Args)]
pub struct SegmentArgs {
    /// Input CSV. Repeat for replicas.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// `mu0,k0,nu0,sigma0sq`, `auto` or `mcem`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub theta: ThetaSource,
    /// Training CSV for `--theta mcem`. Each file is one sequence.
    #[arg(long)]
    pub train: Vec<PathBuf>,
    /// MCEM iterations for `--theta mcem`.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args)]
pub struct McemArgs {
    /// Training CSV. Each file is one sequence.
    #[arg(long, required = true)]
    pub train: Vec<PathBuf>,
    /// Starting point [default: the data-dependent prior of the pooled data].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_four)]
    pub theta: Option<Hyperparams>,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Stop once the relative change in total log evidence falls below this.
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Hierarchical,
    SingleCp,
    GapStudy,
}

fn parse_gap(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("expected A-B, got {s:?}"))?;
    let a = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Hierarchical)]
    pub scenario: ScenarioArg,
    /// Sequence length [default: 400; fixed by the scenario for gap-study].
    #[arg(long)]
    pub n: Option<usize>,
    /// Fixed number of segments (hierarchical).
    #[arg(long, conflicts_with = "kmax")]
    pub segments: Option<usize>,
    /// Number of segments uniform on 1..=KMAX (hierarchical).
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Segment prior for hierarchical draws.
    #[arg(long, default_value = "0,0.5,5,0.1", allow_hyphen_values = true, value_parser = parse_four)]
    pub theta: Hyperparams,
    /// Mean of the second half (single-cp).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mu: f64,
    /// Noise standard deviation (single-cp).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Missing stretch length (gap-study).
    #[arg(long, default_value_t = 0)]
    pub gap_len: usize,
    /// Extra 1-based inclusive range to mark missing, as A-B. Repeatable.
    #[arg(long, value_parser = parse_gap)]
    pub gap: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON sidecar with the true changepoints and segment parameters.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}
