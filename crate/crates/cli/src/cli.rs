use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "multimarker",
    version,
    about = "Infer food intake from dietary biomarker panels"
)]
pub struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for cross-validation folds, replicates and prediction.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to intervention data and save the posterior chain.
    Fit(FitArgs),
    /// Infer intake for new biomarker panels.
    Predict(PredictArgs),
    /// Generate simulation-study datasets with their ground truth.
    Simulate(SimulateArgs),
    /// Leave-one-out cross-validation on intervention data.
    Loocv(LoocvArgs),
    /// Score MM, BLR and PLS on simulated replicates.
    Bench(BenchArgs),
    /// ESS, parameter summaries and traces for a saved chain.
    Diag(DiagArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    /// Total MCMC iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Burn-in iterations, discarded.
    #[arg(long)]
    pub burn: Option<usize>,
    /// Keep every k-th post-burn-in draw.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Prior variance scale of the ordinal intercepts (at most 2).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Draw allocations from their conditional instead of taking the argmax.
    #[arg(long)]
    pub stochastic_allocation: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScaleArgs {
    /// Standardize biomarkers before fitting.
    #[arg(long, overrides_with = "no_scale")]
    pub scale: bool,
    /// Use biomarkers on their original scale.
    #[arg(long)]
    pub no_scale: bool,
}

impl ScaleArgs {
    pub fn explicit(&self) -> Option<bool> {
        match (self.scale, self.no_scale) {
            (true, _) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Simulation study: I, II, III, varyingX, uniform or unbalanced.
    #[arg(long)]
    pub study: Option<String>,
    /// Biomarker variability scenario: S1, S2 or S3.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Training sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of food quantities.
    #[arg(long = "components")]
    pub d: Option<usize>,
    /// Number of biomarkers.
    #[arg(long = "biomarkers")]
    pub p: Option<usize>,
    /// Biomarker range: small, medium or large.
    #[arg(long)]
    pub range: Option<String>,
    /// Food-quantity spacing: stable, increasing or decreasing.
    #[arg(long)]
    pub increments: Option<String>,
    /// Component spread: low or high.
    #[arg(long)]
    pub theta: Option<String>,
    /// Number of test food quantities in the varyingX study.
    #[arg(long)]
    pub d_star: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV with columns y1..yP and dose.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated food-quantity levels (default: distinct doses).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Where to write the posterior chain.
    #[arg(long)]
    pub chain: PathBuf,
    /// Optional tidy trace CSV (iteration,parameter,value).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Biomarker-only CSV (y1..yP) of new observations.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Chain written by `fit` (multimarker method).
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Training CSV: required for the baselines and for joint mode.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// multimarker, blr or pls.
    #[arg(long)]
    pub method: Option<String>,
    /// Resample the parameters with the new rows appended instead of
    /// replaying the stored chain.
    #[arg(long)]
    pub joint: bool,
    /// Optional long-format dump of every predictive draw.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Draw allocations instead of taking the argmax.
    #[arg(long)]
    pub stochastic_allocation: bool,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory for the replicate CSVs and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct LoocvArgs {
    /// Intervention CSV with columns y1..yP and dose.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// multimarker, blr or pls.
    #[arg(long)]
    pub method: Option<String>,
    /// Skip the full-data parameter table.
    #[arg(long)]
    pub no_params: bool,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated methods (default: all three).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Error-table CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aligned-text rendering of the table.
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// ESS summary CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Posterior median and 95% width per parameter dimension.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Tidy trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}
