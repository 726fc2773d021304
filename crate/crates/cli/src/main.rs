//! `meshff` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed input, invalid
//! mesh), 3 runtime error (training divergence, unreachable pooling target, I/O while writing).
//! The first stdout line of every command is `config <hash> seed <seed>`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "meshff", version, about = "Mesh learning with fundamental-form edge features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenData(GenDataArgs),
    /// Extract per-edge features from a mesh.
    Features(FeaturesArgs),
    /// Pool a mesh through decreasing edge targets and export every stage.
    PoolTrace(PoolTraceArgs),
    /// Train a model from a config file and a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split of a dataset directory.
    Eval(EvalArgs),
    /// Run a de-noising checkpoint on one mesh.
    Denoise(DenoiseArgs),
    /// Train and test the pooling-policy by feature-kind grid.
    Ablate(AblateArgs),
    /// Check a mesh for manifoldness defects.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// primitive-zoo, engraved-cube or articulated-limbs.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub edge_min: Option<usize>,
    #[arg(long)]
    pub edge_max: Option<usize>,
    /// Training samples per class; defaults to four fifths.
    #[arg(long)]
    pub train: Option<usize>,
    /// Test samples per class; defaults to the rest.
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// ff, meshcnn5, xyz, xyz-inv or laplacian.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the mesh here, with a `.edges` sidecar of standardized feature norms.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Scale the mesh into the unit box first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct PoolTraceArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// A feature kind, or a feature file whose rows follow the mesh's edge order.
    #[arg(long)]
    pub features: String,
    /// Strictly decreasing edge counts, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<usize>,
    #[arg(long, default_value = "enhanced")]
    pub policy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Line-delimited JSON metrics.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Rotate every test mesh by its own rotation drawn from this seed.
    #[arg(long)]
    pub rotate_seed: Option<u64>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Feature file of the predicted clean-mesh features.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub mesh: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Features(a) => commands::features(a),
        Command::PoolTrace(a) => commands::pool_trace(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
