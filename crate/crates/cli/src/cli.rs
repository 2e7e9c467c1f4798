use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hiliter", version, about = "Highlight extraction, tagging and recommendation for Stack Overflow answers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse answers (Posts.xml or JSON Lines) into plain text and highlight spans.
    Parse(ParseArgs),
    /// Corpus highlighting statistics.
    Stats(StatsArgs),
    /// Build a cleaned, BIOE-labeled train/test split for one format.
    BuildDataset(BuildArgs),
    /// Train a tagger for one format.
    Train(TrainArgs),
    /// Partial-match precision, recall and F1 on a test set.
    Evaluate(EvaluateArgs),
    /// Failure taxonomy and highlighted-word frequency analysis.
    AnalyzeFailures(FailureArgs),
    /// Suggest highlights for a draft.
    Suggest(SuggestArgs),
    /// Apply accepted suggestion ids to a draft.
    Render(RenderArgs),
    /// Serve the JSON API and, optionally, a static UI.
    Serve(ServeArgs),
    /// Write the synthetic Code corpus used for smoke tests.
    Synthetic(SyntheticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TypeArg {
    Code,
    Bold,
    Italic,
    Heading,
}

impl From<TypeArg> for hiliter_core::FormatType {
    fn from(t: TypeArg) -> Self {
        use hiliter_core::FormatType as F;
        match t {
            TypeArg::Code => F::Code,
            TypeArg::Bold => F::Bold,
            TypeArg::Italic => F::Italic,
            TypeArg::Heading => F::Heading,
        }
    }
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// `.xml` dump or JSON Lines of {"post_id", "body"}.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Directory for distribution CSVs.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long = "type", value_enum)]
    pub format: TypeArg,
    #[arg(long)]
    pub input: PathBuf,
    /// One tag per line; enables the software/terminology rule for code.
    #[arg(long)]
    pub tags_dict: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = hiliter_core::dataset::DEFAULT_FUZZY_THRESHOLD)]
    pub fuzzy_threshold: f64,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: PathBuf,
    #[arg(long)]
    pub clean_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "type", value_enum)]
    pub format: TypeArg,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FailureArgs {
    #[arg(long, value_enum)]
    pub target: TypeArg,
    #[arg(long, env = "HILITER_MODEL_DIR")]
    pub models: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Training set of the target model; needed for the frequency analysis.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub freq_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuggestMode {
    Apply,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Highest,
    All,
}

impl PolicyArg {
    pub fn name(self) -> &'static str {
        match self {
            PolicyArg::Highest => "highest",
            PolicyArg::All => "all",
        }
    }
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long, env = "HILITER_MODEL_DIR")]
    pub models: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SuggestMode::Json)]
    pub mode: SuggestMode,
    #[arg(long, value_enum, default_value_t = PolicyArg::Highest)]
    pub policy: PolicyArg,
    /// Restrict to these formats.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub types: Option<Vec<TypeArg>>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, env = "HILITER_MODEL_DIR")]
    pub models: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Suggestion ids to apply, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub accept: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "HILITER_MODEL_DIR")]
    pub models: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of static files served under `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = hiliter_core::service::DEFAULT_MAX_BODY_BYTES)]
    pub max_body_bytes: usize,
    #[arg(long, default_value_t = 32)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 10)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
