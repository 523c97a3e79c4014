use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use lymphnet::model::{ArchitectureSpec, Precision};

use crate::CliError;

/// Lymph node patch classifier: corpus tooling, training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "lymphnet", version, args_override_self = true)]
pub struct Cli {
    /// Base seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Arithmetic for training and inference: f32 or f64.
    #[arg(long, global = true, default_value = "f32")]
    pub precision: Precision,
    /// key=value file supplying defaults; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus (cases x 4 sets x 5 patches).
    Synth(SynthArgs),
    /// Cut labeled patches from a PGM/PPM image into a corpus.
    Extract(ExtractArgs),
    /// Assign every corpus record to train, val or test.
    Split(SplitArgs),
    /// Train a network and write the model and per-epoch history.
    Train(TrainArgs),
    /// Compare analytic and finite-difference gradients in f64.
    Gradcheck(GradcheckArgs),
    /// Score the test split image by image and set by set.
    Eval(EvalArgs),
    /// Classify a single patch record.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of cases; must be a multiple of 4.
    #[arg(long, default_value_t = 128)]
    pub cases: usize,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Source image (PGM or PPM, maxval 255).
    #[arg(long)]
    pub image: PathBuf,
    /// Number of patches to cut.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Class code: 0 benign, 1 DLBCL, 2 BL, 3 SLL.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub label: u8,
    /// Corpus directory; records and manifest rows are appended.
    #[arg(long)]
    pub out: PathBuf,
    /// Case identifier; defaults to the image file stem.
    #[arg(long)]
    pub case: Option<String>,
    /// Set index of the first patch; later patches fill following sets.
    #[arg(long, default_value_t = 0)]
    pub set: u8,
    /// Redraw candidate patches that look like bright slide background.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub reject_background: bool,
    /// Mean intensity above which a candidate counts as background.
    #[arg(long, default_value_t = lymphnet::dataset::DEFAULT_BACKGROUND_THRESHOLD)]
    pub background_threshold: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Corpus directory holding manifest.tsv.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Split file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training images; defaults scale with the corpus.
    #[arg(long)]
    pub train: Option<usize>,
    /// Validation images.
    #[arg(long)]
    pub val: Option<usize>,
    /// Whole test sets, a multiple of 4.
    #[arg(long)]
    pub test_sets: Option<usize>,
    /// Keep every case entirely inside one split.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub case_disjoint: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Output directory for model.lymf, history.tsv and run.cfg.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = ArchitectureSpec::default())]
    pub arch: ArchitectureSpec,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Learning-rate multiplier applied every `lr-decay-every` epochs.
    #[arg(long, default_value_t = 0.5)]
    pub lr_decay_factor: f64,
    /// Decay period in epochs; 0 keeps the rate constant.
    #[arg(long, default_value_t = 10)]
    pub lr_decay_every: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Network to check; the default is a small network with the same layer types.
    #[arg(long, default_value_t = ArchitectureSpec::toy())]
    pub arch: ArchitectureSpec,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Directory for gradcheck.tsv and run.cfg.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for the confusion matrices, set listing and run.cfg.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Patch record file (1601 entries).
    #[arg(long)]
    pub record: PathBuf,
    /// Also write the prediction line and run.cfg here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A parsed command line plus the resolved `key=value` listing of every
/// option in effect.
pub struct Invocation {
    pub cli: Cli,
    pub resolved: String,
}

/// Parse `argv`, filling options the user did not give from `--config`.
pub fn parse(argv: Vec<OsString>) -> Result<Invocation, CliError> {
    // Required options may come from the config file, so the first pass only
    // finds the subcommand and which options were given explicitly.
    let lenient = Cli::command().mut_subcommands(|s| s.mut_args(|a| a.required(false)));
    let first = lenient.try_get_matches_from(&argv)?;
    let mut argv = argv;
    if let Some(path) = first.get_one::<PathBuf>("config") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let (name, sub) = first.subcommand().expect("subcommand is required");
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected key=value", path.display(), line_no + 1))
            })?;
            let key = key.trim().replace('-', "_");
            let (key, value) = (key.as_str(), value.trim());
            if key == "command" {
                if value != name {
                    return Err(CliError::Config(format!(
                        "{}: written for `{value}`, not `{name}`",
                        path.display()
                    )));
                }
                continue;
            }
            if key == "config" || !known_arg(name, key) {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown option {key:?} for `{name}`",
                    path.display(),
                    line_no + 1
                )));
            }
            if sub.value_source(key) != Some(ValueSource::CommandLine) {
                argv.push(format!("--{}={value}", key.replace('_', "-")).into());
            }
        }
    }
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let resolved = resolve(&matches);
    Ok(Invocation { cli, resolved })
}

fn known_arg(sub: &str, key: &str) -> bool {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(sub).expect("known subcommand");
    let found = sub.get_arguments().chain(cmd.get_arguments()).any(|a| a.get_id() == key);
    found
}

/// Every option in effect, one `key=value` per line, in declaration order.
fn resolve(matches: &ArgMatches) -> String {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut out = format!("command={name}\n");
    let cmd = Cli::command();
    let args = cmd.get_arguments().chain(cmd.find_subcommand(name).expect("known").get_arguments());
    for arg in args {
        let id = arg.get_id().as_str();
        if matches!(id, "config" | "help" | "version") {
            continue;
        }
        if let Some(mut raw) = sub.get_raw(id) {
            if let Some(v) = raw.next() {
                out += &format!("{id}={}\n", v.to_string_lossy());
            }
        }
    }
    out
}
