//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::basis::isotropic_basis;
use crate::error::{Error, Result};
use crate::experiments::audit::{audit_suite, format_audit};
use crate::experiments::{
    eval_baseline, eval_experiment, generate_dataset, summary_table, train_experiment, Dataset, ExperimentConfig,
    MetricsLog, ModelChoice, Split,
};
use crate::models::checkpoint::{decode_checkpoint, encode_checkpoint};
use crate::tensor::{MetricSignature, Parity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "eqtensor", version, about = "Group-equivariant tensor functions and experiment pipelines")]
pub struct Cli {
    /// Seed for every random stream; overrides the config's seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment config file (key = value lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file, or output directory for `train`
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate an isotropic tensor basis
    Basis(BasisArgs),
    /// Run the equivariance audit suite
    Verify(VerifyArgs),
    /// Generate a dataset file from a config
    Gen(GenArgs),
    /// Train a model and write a checkpoint and metrics CSV
    Train(TrainArgs),
    /// Evaluate a checkpoint or a fixed estimator on a dataset
    Eval(EvalArgs),
    /// Summarize metrics CSV files
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Tensor order k
    #[arg(long)]
    pub order: usize,
    /// Parity: + or -
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    pub parity: String,
    /// Metric: euclidean:D, minkowski:P,Q, symplectic:D, or o3/lorentz/sp4
    #[arg(long, default_value = "euclidean:3")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Group to audit; repeat for several (o3, lorentz, sp4, euclidean:2, ...)
    #[arg(long = "group", default_values_t = vec!["o3".to_string()])]
    pub groups: Vec<String>,
    /// Random group elements per model
    #[arg(long, default_value_t = 32)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Override a config key, as KEY=VALUE; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file; generated from the config when omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Override a config key, as KEY=VALUE; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// Fixed estimator instead of a checkpoint: discrete, sos-hopkins, sos-mao
    #[arg(long)]
    pub baseline: Option<String>,
    /// Split to evaluate: train, val or test
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics CSV files written by `train`
    #[arg(required = true)]
    pub metrics: Vec<PathBuf>,
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn load_config(cli: &Cli, overrides: &[String]) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_bytes(&fs::read(path).map_err(|e| io_at(path, e))?)
}

fn parse_split(s: &str) -> Result<Split> {
    Split::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown split '{s}'")))
}

/// Writes `text` to stdout and, if `--out` is set, to that file.
fn emit(cli: &Cli, out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    if let Some(path) = &cli.out {
        fs::write(path, text).map_err(|e| io_at(path, e))?;
    }
    Ok(())
}

fn cmd_basis(cli: &Cli, a: &BasisArgs, out: &mut dyn Write) -> Result<()> {
    let parity: Parity = a.parity.parse()?;
    let metric: MetricSignature = a.metric.parse()?;
    let basis = isotropic_basis(a.order, parity, &metric)?;
    let mut text = format!("{} elements (order {}, parity {}, {})\n", basis.len(), a.order, parity, metric);
    text.push_str(&format!("span dimension {}\n", basis.span_dimension()));
    for e in &basis.elements {
        text.push_str(&format!("{}\n", e.sigma));
    }
    emit(cli, out, &text)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be positive".into()));
    }
    let mut records = Vec::new();
    for g in &a.groups {
        records.extend(audit_suite(&g.parse()?, a.trials, cli.seed.unwrap_or(0))?);
    }
    emit(cli, out, &format_audit(&records))?;
    match records.iter().find(|r| !r.passed()) {
        Some(r) => Err(Error::AuditFailed(format!("{} on {}: defect {:e}", r.model, r.group, r.defect))),
        None => Ok(()),
    }
}

fn cmd_gen(cli: &Cli, a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli, &a.overrides)?;
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.eqd", cfg.experiment)));
    let data = generate_dataset(&cfg)?;
    fs::write(&path, data.to_bytes()?).map_err(|e| io_at(&path, e))?;
    let counts: Vec<usize> = Split::ALL.iter().map(|s| data.split(*s).len()).collect();
    writeln!(out, "wrote {} ({} train, {} val, {} test)", path.display(), counts[0], counts[1], counts[2])?;
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli, &a.overrides)?;
    let data = match &a.data {
        Some(p) => read_dataset(p)?,
        None => generate_dataset(&cfg)?,
    };
    let result = train_experiment(&cfg, &data)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    fs::create_dir_all(&dir).map_err(|e| io_at(&dir, e))?;
    let ckpt_path = dir.join("model.eqm");
    fs::write(&ckpt_path, encode_checkpoint(&result.checkpoint)?).map_err(|e| io_at(&ckpt_path, e))?;
    let csv_path = dir.join("metrics.csv");
    let file = fs::File::create(&csv_path).map_err(|e| io_at(&csv_path, e))?;
    result.metrics.write_csv(file)?;
    fs::write(dir.join("config.txt"), cfg.to_text()).map_err(|e| io_at(&dir, e))?;
    writeln!(out, "test {} {:.6e}", result.metric_name, result.test_metric)?;
    writeln!(out, "wrote {} and {}", ckpt_path.display(), csv_path.display())?;
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_dataset(&a.data)?;
    let split = parse_split(&a.split)?;
    let (metric, _) = crate::experiments::train::experiment_metric(data.header.experiment);
    let value = match (&a.checkpoint, &a.baseline) {
        (Some(p), _) => eval_experiment(&decode_checkpoint(&fs::read(p).map_err(|e| io_at(p, e))?)?, &data, split)?,
        (None, Some(b)) => eval_baseline(b.parse::<ModelChoice>()?, &data, split)?,
        (None, None) => return Err(Error::InvalidArgument("need --checkpoint or --baseline".into())),
    };
    emit(cli, out, &format!("{} {} {:.6e}\n", split.name(), metric, value))
}

fn cmd_report(cli: &Cli, a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let mut runs = Vec::new();
    for p in &a.metrics {
        let file = fs::File::open(p).map_err(|e| io_at(p, e))?;
        let name = match p.parent().and_then(|d| d.file_name()) {
            Some(dir) if p.file_name().is_some_and(|f| f == "metrics.csv") => dir.to_string_lossy().into_owned(),
            _ => p.display().to_string(),
        };
        runs.push((name, MetricsLog::read_csv(file)?));
    }
    emit(cli, out, &summary_table(&runs))
}

/// Executes a parsed command.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Basis(a) => cmd_basis(cli, a, out),
        Command::Verify(a) => cmd_verify(cli, a, out),
        Command::Gen(a) => cmd_gen(cli, a, out),
        Command::Train(a) => cmd_train(cli, a, out),
        Command::Eval(a) => cmd_eval(cli, a, out),
        Command::Report(a) => cmd_report(cli, a, out),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
