//! `wxdepth`: dataset generation, evaluation, range statistics and teacher
//! alignment from the command line.
//!
//! Exit codes: 0 success, 1 configuration or layout error, 2 when any
//! per-frame item failed (the rest of the run still completes).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wxdepth::align::{
    distill_losses, teacher_prior_from_disparity, teacher_prior_from_metric, total_loss, AffineFit, DistillReport,
    PyramidLevels, DEFAULT_LAMBDA_D, DEFAULT_LAMBDA_G, DEFAULT_NUM_LEVELS, DEFAULT_PRIOR_MAX_DEPTH,
};
use wxdepth::io::{self, TeacherKind};
use wxdepth::metrics::{default_range_edges, evaluate, range_histogram, MetricReport, RangeHistogram};
use wxdepth::pipeline::{run_dataset, FrameSelection, GenerationConfig};
use wxdepth::{Lens, TimeOfDay, Weather};

#[derive(Parser)]
#[command(
    name = "wxdepth",
    version,
    about = "Weather corruption toolkit for RGB-LiDAR depth completion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a weather-corrupted dataset from a clean input tree.
    Gen(GenArgs),
    /// Score predicted depth maps against ground truth.
    Eval(EvalArgs),
    /// Range histograms of point-cloud files.
    Stats(StatsArgs),
    /// Align a teacher prediction to ground truth and evaluate distillation losses.
    Align(AlignArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated: clear, fog, rain, snow.
    #[arg(long, value_delimiter = ',', default_value = "fog,rain,snow")]
    weather: Vec<Weather>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    levels: Vec<u8>,
    /// Comma-separated: day, night.
    #[arg(long, value_delimiter = ',', default_value = "day")]
    time: Vec<TimeOfDay>,
    /// Comma-separated: none, raindrop, snowflake.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    lens: Vec<Lens>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// `all`, a comma-separated id list, or a fraction such as `0.25`.
    #[arg(long, default_value = "all")]
    frames: FrameSelection,
    /// Also emit the clean reference for every frame.
    #[arg(long)]
    paired_clean: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    cloud_dir: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    /// Teacher prediction file (`WXTEACHER` header + f32 values).
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    teacher_kind: TeacherKind,
    /// Ground-truth depth PNG.
    #[arg(long)]
    gt: PathBuf,
    /// Student depth prediction PNG.
    #[arg(long)]
    student: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NUM_LEVELS)]
    levels: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_D)]
    lambda_d: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_G)]
    lambda_g: f64,
    /// Supervised loss term to include in the total.
    #[arg(long, default_value_t = 0.0)]
    l_sup: f64,
    #[arg(long, default_value_t = DEFAULT_PRIOR_MAX_DEPTH)]
    max_depth: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Outcome of a subcommand that completed; `partial` means some items failed.
struct Outcome {
    partial: bool,
}

fn emit(value: &impl Serialize, output: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(path) => io::write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn files_with_extension(dir: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn gen(args: GenArgs) -> anyhow::Result<Outcome> {
    let mut config = GenerationConfig::new(&args.input, &args.output);
    config.weathers = args.weather;
    config.levels = args.levels;
    config.times = args.time;
    config.lenses = args.lens;
    config.global_seed = args.seed;
    config.frames = args.frames;
    config.emit_paired_clean = args.paired_clean;
    config.jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = run_dataset(&config)?;
    log::info!(
        "{} records, {} failures, written to {}",
        summary.manifest.records.len(),
        summary.manifest.failures.len(),
        args.output.display()
    );
    Ok(Outcome {
        partial: summary.has_failures(),
    })
}

#[derive(Serialize)]
struct FrameMetrics {
    frame: String,
    metrics: MetricReport,
    pred_invalid_pixels: usize,
}

#[derive(Serialize)]
struct ItemFailure {
    item: String,
    error: String,
}

#[derive(Serialize)]
struct EvalReport {
    per_frame: Vec<FrameMetrics>,
    /// Unweighted mean over frames; `valid_pixels` is the total.
    mean: Option<MetricReport>,
    failures: Vec<ItemFailure>,
}

fn eval(args: EvalArgs) -> anyhow::Result<Outcome> {
    let gt_files = files_with_extension(&args.gt_dir, "png")?;
    if !args.pred_dir.is_dir() {
        bail!("prediction directory {} does not exist", args.pred_dir.display());
    }
    let mut report = EvalReport {
        per_frame: Vec::new(),
        mean: None,
        failures: Vec::new(),
    };
    for gt_path in gt_files {
        let frame = stem(&gt_path);
        let pred_path = args.pred_dir.join(gt_path.file_name().expect("listed file"));
        let result = (|| -> wxdepth::Result<_> {
            let gt = io::decode_depth_png(&io::read_file(&gt_path)?)?;
            let pred = io::decode_depth_png(&io::read_file(&pred_path)?)?;
            evaluate(&pred, &gt)
        })();
        match result {
            Ok(e) => report.per_frame.push(FrameMetrics {
                frame,
                metrics: e.report,
                pred_invalid_pixels: e.pred_invalid_pixels,
            }),
            Err(e) => {
                log::warn!("{frame}: {e}");
                report.failures.push(ItemFailure {
                    item: frame,
                    error: e.to_string(),
                });
            }
        }
    }
    if !report.per_frame.is_empty() {
        let n = report.per_frame.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| report.per_frame.iter().map(|m| f(&m.metrics)).sum::<f64>() / n;
        report.mean = Some(MetricReport {
            rmse: avg(|m| m.rmse),
            mae: avg(|m| m.mae),
            irmse: avg(|m| m.irmse),
            imae: avg(|m| m.imae),
            valid_pixel_count: report.per_frame.iter().map(|m| m.metrics.valid_pixel_count).sum(),
        });
    }
    emit(&report, args.output.as_deref())?;
    Ok(Outcome {
        partial: !report.failures.is_empty(),
    })
}

#[derive(Serialize)]
struct StatsOutput {
    files: BTreeMap<String, RangeHistogram>,
    aggregate: RangeHistogram,
    failures: Vec<ItemFailure>,
}

fn stats(args: StatsArgs) -> anyhow::Result<Outcome> {
    let edges = default_range_edges();
    let mut out = StatsOutput {
        files: BTreeMap::new(),
        aggregate: RangeHistogram::empty(edges.clone())?,
        failures: Vec::new(),
    };
    for path in files_with_extension(&args.cloud_dir, "bin")? {
        let name = stem(&path);
        let result = io::read_file(&path)
            .and_then(|b| io::decode_cloud(&b))
            .and_then(|c| range_histogram(&c, &edges));
        match result {
            Ok(h) => {
                out.aggregate.merge(&h)?;
                out.files.insert(name, h);
            }
            Err(e) => {
                log::warn!("{name}: {e}");
                out.failures.push(ItemFailure {
                    item: name,
                    error: e.to_string(),
                });
            }
        }
    }
    emit(&out, args.output.as_deref())?;
    Ok(Outcome {
        partial: !out.failures.is_empty(),
    })
}

#[derive(Serialize)]
struct AlignOutput {
    teacher_kind: TeacherKind,
    prior_fit: AffineFit,
    #[serde(flatten)]
    losses: DistillReport,
    l_sup: f64,
    total_loss: f64,
}

fn align(args: AlignArgs) -> anyhow::Result<Outcome> {
    let (teacher, kind) = io::decode_teacher(&io::read_file(&args.teacher)?)?;
    if kind != args.teacher_kind {
        bail!(
            "teacher file holds a {} prediction but --teacher-kind is {}",
            kind.as_str(),
            args.teacher_kind.as_str()
        );
    }
    let gt = io::decode_depth_png(&io::read_file(&args.gt)?)?;
    let student = io::decode_depth_png(&io::read_file(&args.student)?)?;
    let valid = gt.validity_mask();
    let (prior, prior_fit) = match kind {
        TeacherKind::Disparity => teacher_prior_from_disparity(&teacher, &gt, &valid, args.max_depth)?,
        TeacherKind::Metric => teacher_prior_from_metric(&teacher, &gt, &valid, args.max_depth)?,
    };
    let levels = PyramidLevels::from_prediction(student.grid(), Some(&valid), args.levels)?;
    let losses = distill_losses(&levels, &prior)?;
    let total = total_loss(
        args.l_sup,
        losses.ssi_loss,
        losses.grad_loss,
        args.lambda_d,
        args.lambda_g,
    )?;
    emit(
        &AlignOutput {
            teacher_kind: kind,
            prior_fit,
            losses,
            l_sup: args.l_sup,
            total_loss: total,
        },
        args.output.as_deref(),
    )?;
    Ok(Outcome { partial: false })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; here 2 means partial failure
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
        Command::Align(a) => align(a),
    };
    match result {
        Ok(Outcome { partial: false }) => ExitCode::SUCCESS,
        Ok(Outcome { partial: true }) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
