use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use forgescore_core::labels::ConfidenceOrientation;
use forgescore_core::warp::Perturbation;

#[derive(Debug, Parser)]
#[command(
    name = "forgescore",
    version,
    about = "Anomaly scoring, pseudo-labeling and fusion training for forged human videos"
)]
pub struct Cli {
    /// JSON config file; flags override it, it overrides built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random stream is derived from it by name.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-video scoring.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with planted anomaly labels.
    Synth(SynthArgs),
    /// Compute spatial, appearance and motion anomaly scores.
    Score(ScoreArgs),
    /// Rank the cohort and assign pseudo-labels with confidence weights.
    Label(LabelArgs),
    /// Split labeled videos into train / val / pending review.
    Split(SplitArgs),
    /// Train the fusion classifier on a finalized split.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a predictions file.
    Eval(EvalArgs),
    /// Serve the review queue over HTTP until interrupted.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Synth(_) => "synth",
            Self::Score(_) => "score",
            Self::Label(_) => "label",
            Self::Split(_) => "split",
            Self::Train(_) => "train",
            Self::Eval(_) => "eval",
            Self::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Videos per class (spatial, appearance, motion, real).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Anomaly strength applied to all three fake classes.
    #[arg(long)]
    pub strength: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pixels cropped from each border before averaging warping errors.
    #[arg(long)]
    pub border: Option<usize>,
    /// Consistency window length in frames.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Orientation {
    Verbatim,
    Inverted,
}

impl From<Orientation> for ConfidenceOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Verbatim => ConfidenceOrientation::Verbatim,
            Orientation::Inverted => ConfidenceOrientation::Inverted,
        }
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// `scores.json` written by `score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cohort directory; when given, agreement with planted labels is reported.
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub confidence_orientation: Option<Orientation>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// `labels.json` written by `label`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Review journal whose verdicts are applied.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Accept every review candidate that has no verdict.
    #[arg(long)]
    pub auto_accept: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Finalized `split.json`.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON array of `{label, pred}` or `{label, probs}` records.
    #[arg(long, conflicts_with_all = ["cohort", "checkpoint"])]
    pub predictions: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    pub cohort: Option<PathBuf>,
    #[arg(long, requires = "cohort")]
    pub checkpoint: Option<PathBuf>,
    /// Take ground truth and membership from this split instead of planted labels.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "val")]
    pub subset: Subset,
    /// `blur:SIGMA`, `resize:RATIO` or `mixed`.
    #[arg(long)]
    pub perturb: Option<Perturbation>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Cohort directory, for thumbnails.
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub journal: PathBuf,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Directory for finalized split manifests and `run.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Static files for the review UI, served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}
