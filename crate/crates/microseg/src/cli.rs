//! Command-line interface. Each subcommand wraps one pipeline stage, writes
//! its outputs atomically and leaves a manifest beside its main output.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use microseg_core::models::{ArchKind, TargetMode, TrainHyper};
use microseg_core::nn::AdamConfig;
use microseg_core::personality::CoefficientTable;
use microseg_core::segment::MAX_TREE_DEPTH;
use microseg_core::synthgen::{generate_population, GenConfig, SpendingModel};
use microseg_core::transfer::{TransferConfig, TransferTask};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::RunManifest;
use crate::pipeline::{self, Parallel, TargetSource, TrainSpec};

pub const SEED_ENV: &str = "MICROSEG_SEED";

#[derive(Debug, Parser)]
#[command(name = "microseg", version, about = "Spending-personality micro-segmentation pipeline")]
pub struct Cli {
    /// Worker threads for parallel stages (0 = one per core). Outputs do not
    /// depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic spending dataset.
    Gen(GenArgs),
    /// Score annual and overall personality of every customer.
    Score(ScoreArgs),
    /// Train one of the four architectures.
    Train(TrainArgs),
    /// Elbow sweep over recurrent-predictor hidden sizes.
    Sweep(SweepArgs),
    /// Extract hidden-state trajectories with a recurrent model.
    Extract(ExtractArgs),
    /// Build the dominance segment tree and score its separation.
    Segment(SegmentArgs),
    /// Draw trajectories as a three-panel SVG.
    Plot(PlotArgs),
    /// Frozen-body transfer benchmark against a random-init baseline.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoeffsArg {
    /// Coefficient CSV; the built-in synthetic table when omitted.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
}

impl CoeffsArg {
    fn load(&self, manifest: &mut RunManifest) -> CliResult<CoefficientTable> {
        match &self.coeffs {
            Some(p) => {
                let table = io::load_coefficients(p)?;
                manifest.input(p)?;
                Ok(table)
            }
            None => Ok(CoefficientTable::default_synthetic()),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub customers: usize,
    #[arg(long, default_value_t = 6)]
    pub years: usize,
    /// Must match the coefficient table (12 for the built-in one).
    #[arg(long)]
    pub categories: Option<usize>,
    /// Personality strength.
    #[arg(long, default_value_t = microseg_core::synthgen::DEFAULT_PERSONALITY_STRENGTH)]
    pub alpha: f64,
    /// Standard deviation of per-year logit noise.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Probability of a life-event spike per customer-year.
    #[arg(long, default_value_t = 0.1)]
    pub event_prob: f64,
    #[arg(long, default_value_t = 2.0)]
    pub event_magnitude: f64,
    /// Keep only this many leading trait directions of the table.
    #[arg(long)]
    pub latent_directions: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    /// Also write the coefficient table actually used.
    #[arg(long)]
    pub write_coeffs: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchArg {
    FfAe,
    FfPred,
    RnnAe,
    RnnPred,
}

impl From<ArchArg> for ArchKind {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::FfAe => ArchKind::FfAutoencoder,
            ArchArg::FfPred => ArchKind::FfPredictor,
            ArchArg::RnnAe => ArchKind::RnnAutoencoder,
            ArchArg::RnnPred => ArchKind::RnnPredictor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    Scored,
    Truth,
}

impl From<TargetArg> for TargetSource {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Scored => TargetSource::Scored,
            TargetArg::Truth => TargetSource::Truth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    TraitVector,
    DominantClass,
}

impl From<ModeArg> for TargetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::TraitVector => TargetMode::TraitVector,
            ModeArg::DominantClass => TargetMode::DominantClass,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
}

impl HyperArgs {
    fn hyper(&self) -> TrainHyper {
        TrainHyper {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    /// Bottleneck width; 5 for feed-forward and 3 for recurrent models by
    /// default.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_enum, default_value = "scored")]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value = "trait-vector")]
    pub target_mode: ModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    /// Model JSON; the training report goes to the same name with
    /// `.report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    /// Hidden sizes as `a..b` (inclusive) or a comma list.
    #[arg(long = "h", default_value = "1..6", value_parser = parse_sizes)]
    pub sizes: Sizes,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, value_enum, default_value = "scored")]
    pub target: TargetArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Label permutations for the separation baseline.
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Draw only the first N trajectories.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    Liquidity,
    DefaultRate,
}

impl From<TaskArg> for TransferTask {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Liquidity => TransferTask::Liquidity,
            TaskArg::DefaultRate => TransferTask::DefaultRate,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Pretrained predictor. Without it a recurrent predictor is trained on
    /// the dataset first with default settings.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeffs: CoeffsArg,
    #[arg(long, default_value_t = 100)]
    pub train_size: usize,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 1000)]
    pub validation_size: usize,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Ascending hidden sizes for a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Sizes(pub Vec<usize>);

/// Parses `a..b` (inclusive) or `a,b,c`.
pub fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("{t:?} is not a size"));
    let sizes: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
        (a..=b).collect()
    } else {
        s.split(',').map(parse).collect::<Result<_, _>>()?
    };
    if sizes.len() < 2 || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{s:?} must give at least two ascending positive sizes"));
    }
    Ok(Sizes(sizes))
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("serialisable arguments")
}

fn finish(mut manifest: RunManifest, outputs: &[&Path]) -> CliResult<()> {
    for p in outputs {
        manifest.output(p)?;
    }
    manifest.write_beside(outputs[0])?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    let par = Parallel::new(cli.threads)?;
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Score(a) => score(&a),
        Command::Train(a) => train(&a),
        Command::Sweep(a) => sweep(&a, &par),
        Command::Extract(a) => extract(&a, &par),
        Command::Segment(a) => segment(&a, &par),
        Command::Plot(a) => plot(&a),
        Command::Benchmark(a) => benchmark(&a, &par),
    }
}

fn gen(a: &GenArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("gen", a.seed.seed, config_json(a));
    let mut model = match &a.coeffs.coeffs {
        Some(_) => SpendingModel::uniform(a.coeffs.load(&mut manifest)?),
        None => SpendingModel::default_synthetic(),
    };
    if let Some(k) = a.latent_directions {
        model = model.truncated(k)?;
    }
    let config = GenConfig {
        n_customers: a.customers,
        n_years: a.years,
        n_categories: a.categories.unwrap_or(model.n_categories()),
        personality_strength: a.alpha,
        noise_sd: a.sigma,
        event_prob: a.event_prob,
        event_magnitude: a.event_magnitude,
        master_seed: a.seed.seed,
    };
    let cube = generate_population(&config, &model)?;
    io::save_dataset(&cube, &a.out)?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(p) = &a.write_coeffs {
        io::write_atomic(p, io::coefficients_to_csv(&model.table).as_bytes())?;
        outputs.push(p);
    }
    finish(manifest, &outputs)
}

fn score(a: &ScoreArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("score", 0, config_json(a));
    let table = a.coeffs.load(&mut manifest)?;
    let cube = io::load_dataset(&a.data)?;
    manifest.input(&a.data)?;
    let records = pipeline::score_records(&cube, &table)?;
    io::write_atomic(&a.out, io::to_jsonl(&records).as_bytes())?;
    finish(manifest, &[&a.out])
}

pub fn report_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("report.json")
}

fn train(a: &TrainArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("train", a.seed.seed, config_json(a));
    let table = a.coeffs.load(&mut manifest)?;
    let cube = io::load_dataset(&a.data)?;
    manifest.input(&a.data)?;
    let kind = ArchKind::from(a.arch);
    let labels = pipeline::labels(&cube, &table, a.target.into())?;
    let spec = TrainSpec {
        kind,
        hidden: a.hidden.unwrap_or(kind.default_hidden()),
        mode: a.target_mode.into(),
        hyper: a.hyper.hyper(),
        seed: a.seed.seed,
    };
    let (model, report) = pipeline::train_model(&cube, &labels, &spec)?;
    io::save_model(&model, &a.out)?;
    let report_out = report_path(&a.out);
    io::write_atomic(&report_out, io::to_json(&report).as_bytes())?;
    finish(manifest, &[&a.out, &report_out])
}

fn sweep(a: &SweepArgs, par: &Parallel) -> CliResult<()> {
    let mut manifest = RunManifest::new("sweep", a.seed.seed, config_json(a));
    let table = a.coeffs.load(&mut manifest)?;
    let cube = io::load_dataset(&a.data)?;
    manifest.input(&a.data)?;
    let labels = pipeline::labels(&cube, &table, a.target.into())?;
    let result = pipeline::sweep(&cube, &labels, &a.sizes.0, a.runs, a.hyper.hyper(), a.seed.seed, par)?;
    io::write_atomic(&a.out, io::to_json(&result).as_bytes())?;
    finish(manifest, &[&a.out])
}

fn extract(a: &ExtractArgs, par: &Parallel) -> CliResult<()> {
    let mut manifest = RunManifest::new("extract", 0, config_json(a));
    let table = a.coeffs.load(&mut manifest)?;
    let model = io::load_model(&a.model)?;
    manifest.input(&a.model)?;
    let cube = io::load_dataset(&a.data)?;
    manifest.input(&a.data)?;
    let records = pipeline::extract(&model, &cube, &table, par)?;
    io::write_atomic(&a.out, io::to_jsonl(&records).as_bytes())?;
    finish(manifest, &[&a.out])
}

fn segment(a: &SegmentArgs, par: &Parallel) -> CliResult<()> {
    if !(1..=MAX_TREE_DEPTH).contains(&a.depth) {
        return Err(CliError::Usage(format!("--depth must lie in 1..={MAX_TREE_DEPTH}")));
    }
    let mut manifest = RunManifest::new("segment", a.seed.seed, config_json(a));
    let records = io::load_trajectories(&a.trajectories)?;
    manifest.input(&a.trajectories)?;
    let trajectories = pipeline::to_trajectories(&records)?;
    let report = pipeline::segment(&trajectories, a.depth, a.permutations, a.seed.seed, par)?;
    io::write_atomic(&a.out, io::to_json(&report).as_bytes())?;
    finish(manifest, &[&a.out])
}

fn plot(a: &PlotArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("plot", 0, config_json(a));
    let mut records = io::load_trajectories(&a.trajectories)?;
    manifest.input(&a.trajectories)?;
    if let Some(n) = a.limit {
        records.truncate(n);
    }
    let svg = pipeline::plot(&pipeline::to_trajectories(&records)?)?;
    io::write_atomic(&a.out, svg.as_bytes())?;
    finish(manifest, &[&a.out])
}

fn benchmark(a: &BenchmarkArgs, par: &Parallel) -> CliResult<()> {
    let mut manifest = RunManifest::new("benchmark", a.seed.seed, config_json(a));
    let cube = io::load_dataset(&a.data)?;
    manifest.input(&a.data)?;
    let pretrained = match &a.model {
        Some(p) => {
            let model = io::load_model(p)?;
            manifest.input(p)?;
            model
        }
        None => {
            let table = a.coeffs.load(&mut manifest)?;
            let labels = pipeline::labels(&cube, &table, TargetSource::Scored)?;
            let spec = TrainSpec {
                kind: ArchKind::RnnPredictor,
                hidden: ArchKind::RnnPredictor.default_hidden(),
                mode: TargetMode::TraitVector,
                hyper: TrainHyper::default(),
                seed: a.seed.seed,
            };
            pipeline::train_model(&cube, &labels, &spec)?.0
        }
    };
    let mut config = TransferConfig::new(a.task.into(), a.seed.seed);
    config.train_size = a.train_size;
    config.runs = a.runs;
    config.validation_size = a.validation_size;
    config.hyper.epochs = a.epochs;
    let report = pipeline::benchmark(&pretrained, &cube, &config, par)?;
    io::write_atomic(&a.out, io::to_json(&report).as_bytes())?;
    finish(manifest, &[&a.out])
}
