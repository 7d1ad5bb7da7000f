use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use earid::core::augment::AugmentConfig;
use earid::core::edge::{canny, CannyParams};
use earid::core::geometry::{zoom_crop, ZoomSpec};
use earid::core::nn::TrainConfig;
use earid::dataset::{read_manifest, scan_dataset, split_manifest, write_manifest, DatasetProfile, Layout};
use earid::expand::expand_dataset;
use earid::harness::{run_experiment, ExperimentConfig};
use earid::io::{load_image, save_image};
use earid::preprocess::{canny_manifest, zoom_manifest};
use earid::report::{ExperimentReport, ReportFormat};
use earid::synth::{write_ami_fixture, write_earvn_fixture, write_glyph_dataset, GlyphSpec};
use earid::training::{default_arch, evaluate, train, Classifier};
use earid::{Error, Result};
use serde::de::DeserializeOwned;
use serde_json::json;

/// Ear identification pipeline: dataset scanning, Canny preprocessing,
/// zoom, augmentation, training and experiments.
///
/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#[derive(Parser)]
#[command(name = "earid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file with the command's settings (see README).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true, env = "EARID_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for batch image work and experiment cells. Results do
    /// not depend on it.
    #[arg(long, global = true, env = "EARID_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Scan an image tree into a manifest.
    Scan(ScanArgs),
    /// Stratified train/test split of a manifest.
    Split(SplitArgs),
    /// Canny edge map of one image or of every image in a manifest.
    Canny(CannyArgs),
    /// Center zoom-crop of one image or of every image in a manifest.
    Zoom(ZoomArgs),
    /// Expand the TRAIN split with augmented copies.
    Augment(AugmentArgs),
    /// Train the compact classifier on a manifest's TRAIN split.
    Train(TrainArgs),
    /// Accuracy of a checkpoint on a manifest's TEST split.
    Evaluate(EvaluateArgs),
    /// Run all conditions and repeats described by --config.
    Experiment(ExperimentArgs),
    /// Render a JSON report as CSV, JSON or markdown.
    Report(ReportArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Print {
    /// How results are printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Ami,
    Earvn,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    root: PathBuf,
    /// Start from a dataset preset; explicit flags override it.
    #[arg(long, value_enum)]
    profile: Option<Preset>,
    #[arg(long, value_enum)]
    layout: Option<Layout>,
    /// Regex with one capture group giving the label (filename-pattern layout).
    #[arg(long)]
    pattern: Option<String>,
    /// Expected WIDTHxHEIGHT; other sizes produce warnings.
    #[arg(long, value_parser = parse_size)]
    expected_resolution: Option<(usize, usize)>,
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct CannyArgs {
    /// Single input image.
    #[arg(long = "in", conflicts_with = "manifest", required_unless_present = "manifest")]
    input: Option<PathBuf>,
    /// Process every record; --out is then a directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Gaussian radius, default ceil(3 sigma).
    #[arg(long)]
    radius: Option<usize>,
    /// Low threshold as a fraction of the maximum gradient.
    #[arg(long)]
    low: Option<f64>,
    /// High threshold as a fraction of the maximum gradient.
    #[arg(long)]
    high: Option<f64>,
}

#[derive(Args)]
struct ZoomArgs {
    #[arg(long = "in", conflicts_with = "manifest", required_unless_present = "manifest")]
    input: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    margin_x: Option<f64>,
    #[arg(long)]
    margin_y: Option<f64>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Augmented copies per TRAIN image.
    #[arg(long)]
    chains: Option<usize>,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    input_size: Option<usize>,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Override the config's master seed with --seed.
    #[arg(long)]
    use_seed: bool,
    #[command(flatten)]
    print: Print,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json written by `experiment`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    format: ReportFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Procedural ear-glyph identification set.
    Glyph,
    /// 100 subjects x 7 images at 492x702.
    Ami,
    /// 164 subjects with 107 to 300 small images each.
    Earvn,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(w)?, parse(h)?))
}

/// A failure that is the caller's fault rather than the data's.
struct Usage(String);

enum Failure {
    Usage(Usage),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

type Outcome = std::result::Result<ExitCode, Failure>;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Config(format!("{}: {e}", path.display())),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn settings<T: DeserializeOwned + Default>(config: &Option<PathBuf>) -> Result<T> {
    config.as_deref().map(read_json).unwrap_or_else(|| Ok(T::default()))
}

fn need_out(cli: &Cli) -> std::result::Result<&Path, Usage> {
    cli.out
        .as_deref()
        .ok_or_else(|| Usage("--out is required for this command".into()))
}

fn no_config(cli: &Cli, command: &str) -> std::result::Result<(), Usage> {
    match cli.config {
        Some(_) => Err(Usage(format!("`{command}` takes no --config file"))),
        None => Ok(()),
    }
}

fn emit(format: Format, text: String, value: serde_json::Value) {
    match format {
        Format::Text => println!("{text}"),
        Format::Json => println!("{value}"),
    }
}

fn run(cli: &Cli) -> Outcome {
    let jobs = cli.jobs.max(1);
    match &cli.command {
        Command::Scan(a) => {
            let mut profile: DatasetProfile = match (&cli.config, a.profile) {
                (Some(p), _) => read_json(p)?,
                (None, Some(Preset::Ami)) => DatasetProfile::ami(),
                (None, Some(Preset::Earvn)) | (None, None) => DatasetProfile::earvn(),
            };
            if let Some(l) = a.layout {
                profile.layout = l;
            }
            if a.pattern.is_some() {
                profile.label_pattern = a.pattern.clone();
            }
            if a.expected_resolution.is_some() {
                profile.expected_resolution = a.expected_resolution;
            }
            let out = need_out(cli)?;
            let (mut m, warnings) = scan_dataset(&a.root, &profile)?;
            if let Some(n) = &a.name {
                m.dataset_name = n.clone();
            }
            write_manifest(&m, out)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            emit(
                a.print.format,
                format!(
                    "{} records, {} classes, {} warnings -> {}",
                    m.records.len(),
                    m.class_count,
                    warnings.len(),
                    out.display()
                ),
                json!({"records": m.records.len(), "class_count": m.class_count, "warnings": warnings}),
            );
        }
        Command::Split(a) => {
            no_config(cli, "split")?;
            let out = need_out(cli)?;
            let m = split_manifest(&read_manifest(&a.manifest)?, a.test_fraction, cli.seed)?;
            write_manifest(&m, out)?;
            let (train, test) = (m.count(earid::dataset::Split::Train), m.count(earid::dataset::Split::Test));
            emit(
                a.print.format,
                format!("{train} train, {test} test -> {}", out.display()),
                json!({"train": train, "test": test}),
            );
        }
        Command::Canny(a) => {
            let mut p: CannyParams = settings(&cli.config)?;
            p.sigma = a.sigma.unwrap_or(p.sigma);
            p.kernel_radius = a.radius.or(p.kernel_radius);
            p.low_threshold = a.low.unwrap_or(p.low_threshold);
            p.high_threshold = a.high.unwrap_or(p.high_threshold);
            let out = need_out(cli)?;
            match (&a.input, &a.manifest) {
                (Some(input), _) => {
                    let edges = canny(&load_image(input)?, &p).map_err(|e| Error::from(e).at(input))?;
                    save_image(&edges, out)?;
                }
                (None, Some(manifest)) => {
                    let m = canny_manifest(&read_manifest(manifest)?, &p, out, jobs)?;
                    write_manifest(&m, &out.join("manifest.json"))?;
                }
                (None, None) => unreachable!("clap requires one input"),
            }
        }
        Command::Zoom(a) => {
            let mut z: ZoomSpec = settings(&cli.config)?;
            z.target_w = a.width.unwrap_or(z.target_w);
            z.target_h = a.height.unwrap_or(z.target_h);
            z.margin_x = a.margin_x.unwrap_or(z.margin_x);
            z.margin_y = a.margin_y.unwrap_or(z.margin_y);
            let out = need_out(cli)?;
            match (&a.input, &a.manifest) {
                (Some(input), _) => {
                    let img = zoom_crop(&load_image(input)?, &z).map_err(|e| Error::from(e).at(input))?;
                    save_image(&img, out)?;
                }
                (None, Some(manifest)) => {
                    let m = zoom_manifest(&read_manifest(manifest)?, &z, out, jobs)?;
                    write_manifest(&m, &out.join("manifest.json"))?;
                }
                (None, None) => unreachable!("clap requires one input"),
            }
        }
        Command::Augment(a) => {
            let mut cfg: AugmentConfig = settings(&cli.config)?;
            cfg.chains_per_image = a.chains.unwrap_or(cfg.chains_per_image);
            let out = need_out(cli)?;
            let m = expand_dataset(&read_manifest(&a.manifest)?, &cfg, cli.seed, out, jobs)?;
            let path = out.join("manifest.json");
            write_manifest(&m, &path)?;
            emit(
                a.print.format,
                format!("{} records -> {}", m.records.len(), path.display()),
                json!({"records": m.records.len()}),
            );
        }
        Command::Train(a) => {
            let mut cfg: TrainConfig = settings(&cli.config)?;
            cfg.seed = cli.seed;
            cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
            cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
            cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
            cfg.momentum = a.momentum.unwrap_or(cfg.momentum);
            cfg.input_size = a.input_size.unwrap_or(cfg.input_size);
            let out = need_out(cli)?;
            let m = read_manifest(&a.manifest)?;
            let (classifier, history) = train(&m, &cfg, &default_arch(&m, &cfg), jobs)?;
            classifier.save(out)?;
            let text = history
                .iter()
                .map(|e| format!("epoch {}: loss {:.6} train accuracy {:.4}", e.epoch, e.loss, e.train_accuracy))
                .collect::<Vec<_>>()
                .join("\n");
            emit(a.print.format, text, json!({"epochs": history}));
        }
        Command::Evaluate(a) => {
            no_config(cli, "evaluate")?;
            let c = Classifier::load(&a.checkpoint)?;
            let acc = evaluate(&c, &read_manifest(&a.manifest)?, a.batch_size, jobs)?;
            emit(a.print.format, format!("test accuracy {acc}"), json!({"test_accuracy": acc}));
        }
        Command::Experiment(a) => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| Usage("`experiment` needs --config".into()))?;
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(out) = &cli.out {
                cfg.output_dir = out.clone();
            }
            if a.use_seed {
                cfg.master_seed = cli.seed;
            }
            let report = run_experiment(&cfg, jobs)?;
            emit(
                a.print.format,
                report.to_markdown(),
                serde_json::from_str(&report.to_json()).expect("report json parses"),
            );
            if report.failed() > 0 {
                eprintln!("{} of {} cells failed", report.failed(), report.rows.len());
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report(a) => {
            no_config(cli, "report")?;
            let report = ExperimentReport::read(&a.input)?;
            match &cli.out {
                Some(out) => report.write(a.format, out)?,
                None => print!("{}", report.render(a.format)),
            }
        }
        Command::Synth(a) => {
            let out = need_out(cli)?;
            let n = match a.kind {
                SynthKind::Glyph => {
                    let mut spec: GlyphSpec = settings(&cli.config)?;
                    if cli.config.is_none() {
                        spec.seed = cli.seed;
                    }
                    write_glyph_dataset(out, &spec)?
                }
                SynthKind::Ami => write_ami_fixture(out, cli.seed)?.len(),
                SynthKind::Earvn => write_earvn_fixture(out, cli.seed)?.len(),
            };
            println!("{n} images -> {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(Usage(msg))) => {
            eprintln!("error: {msg}\n\nRun `earid --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
