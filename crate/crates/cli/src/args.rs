use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "zeroleak", version, about = "Zero-leakage count queries over sequence datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset from a Markov chain or the copy-with-switching generator.
    Generate(GenerateArgs),
    /// Release one randomized bit per user with M1 or M2 and print the noisy count.
    AnswerLocal(AnswerLocalArgs),
    /// Release the count through the trusted-server mechanism.
    AnswerCentral(AnswerCentralArgs),
    /// Print the closed-form error report for both local mechanisms.
    Error(QueryModelArgs),
    /// Print the entropy lower bound on any perfectly private mechanism.
    LowerBound(QueryModelArgs),
    /// Check that a mechanism's output is independent of the sensitive loci.
    Audit(AuditArgs),
    /// Run an experiment plan and write results.csv and audit.csv.
    RunPlan(RunPlanArgs),
    /// Find the DP budget that matches a target error.
    DpMatch(DpMatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Markov,
    Hmm,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "markov")]
    pub model: GeneratorKind,
    /// Symbols of the alphabet, in index order.
    #[arg(long, default_value = "ATGC")]
    pub alphabet: String,
    /// Sequence length N.
    #[arg(long, default_value_t = 10)]
    pub length: usize,
    /// Number of sequences to write.
    #[arg(long)]
    pub users: usize,
    /// Markov stay probability.
    #[arg(long)]
    pub phi: Option<f64>,
    /// `uniform` or a comma list of initial probabilities.
    #[arg(long, default_value = "uniform")]
    pub initial: String,
    /// Reference dataset for the HMM generator.
    #[arg(long, conflicts_with = "reference_rows")]
    pub reference: Option<PathBuf>,
    /// Draw this many uniform reference rows instead of reading a file.
    #[arg(long)]
    pub reference_rows: Option<usize>,
    /// Probability of staying on the current reference row.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Substitution probability.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

/// Where the prior comes from: a symmetric Markov chain or the empirical
/// frequencies of a dataset.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "ATGC")]
    pub alphabet: String,
    /// Markov stay probability.
    #[arg(long, conflicts_with = "data")]
    pub phi: Option<f64>,
    #[arg(long, default_value = "uniform")]
    pub initial: String,
    /// Sequence length of the Markov model.
    #[arg(long, default_value_t = 10)]
    pub length: usize,
    /// Fit the prior to this dataset's frequencies over the queried and
    /// sensitive loci.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Add one pseudo-count per tuple when fitting to --data.
    #[arg(long)]
    pub smoothing: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Queried loci, 1-based (`5,6` or `5-6`).
    #[arg(long)]
    pub loci: String,
    /// Reference symbols at the queried loci (`A,T` or `AT`).
    #[arg(long)]
    pub values: String,
    /// Sensitive loci, 1-based.
    #[arg(long, default_value = "")]
    pub sensitive: String,
}

#[derive(Debug, Args)]
pub struct QueryModelArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub query: QueryArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LocalKind {
    M1,
    M2,
}

#[derive(Debug, Args)]
pub struct AnswerLocalArgs {
    #[command(flatten)]
    pub spec: QueryModelArgs,
    #[arg(long, value_enum)]
    pub mechanism: LocalKind,
    /// Dataset of the users answering the query.
    #[arg(long)]
    pub input: PathBuf,
    /// Write the released bits, one per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnswerCentralArgs {
    #[command(flatten)]
    pub spec: QueryModelArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditTarget {
    M1,
    M2,
    Central,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub spec: QueryModelArgs,
    #[arg(long, value_enum, default_value = "m1")]
    pub mechanism: AuditTarget,
    /// Number of users for the central mechanism.
    #[arg(long, default_value_t = 1)]
    pub users: usize,
    /// Audit a release table read from this CSV instead of a built-in mechanism.
    #[arg(long, conflicts_with = "export_table")]
    pub table: Option<PathBuf>,
    /// Write the built-in mechanism's release table to this CSV.
    #[arg(long)]
    pub export_table: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    /// Monte Carlo audit instead of exact enumeration.
    #[arg(long)]
    pub empirical: bool,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the full report as JSON instead of a CSV row.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RunPlanArgs {
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Override the plan's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the plan's user count.
    #[arg(long)]
    pub users: Option<usize>,
    /// Override the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchMetric {
    /// Per-user error probability of randomized response.
    Pe,
    /// Expected absolute error of the Laplace count.
    Eae,
    /// Mean squared error of the LDP count.
    Mse,
}

#[derive(Debug, Args)]
pub struct DpMatchArgs {
    #[arg(long, value_enum)]
    pub metric: MatchMetric,
    #[arg(long)]
    pub target: f64,
    /// Number of users (MSE only).
    #[arg(long, default_value_t = 1)]
    pub users: usize,
}
