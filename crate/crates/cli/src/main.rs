use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use enscore::ensemble::{ensemble_dataset, ensemble_dataset_with_stats, CornerMode, EnsembleConfig};
use enscore::io::{
    parse_ground_truth_csv, parse_predictions_csv, write_ground_truth_csv, write_predictions_csv,
    write_report, ReportFormat,
};
use enscore::metric::{dataset_score, MetricConfig};
use enscore::stats;
use enscore::synth::{generate, SynthConfig};
use enscore::{GroundTruthSet, PredictionSet};

#[derive(Parser)]
#[command(name = "enscore", about = "Ensemble and score bounding-box detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse per-model prediction files into one prediction file.
    Ensemble(EnsembleCmd),
    /// Score a prediction file against ground truth.
    Score(ScoreCmd),
    /// Score each model and their ensemble side by side.
    Compare(CompareCmd),
    /// Write a seeded synthetic dataset.
    Generate(GenerateCmd),
}

#[derive(Args)]
struct FusionOpts {
    /// Per-model predictions CSV; repeat once per model.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Agreement scale: clusters of this many detections keep their mean
    /// confidence.
    #[arg(long, default_value_t = 4.0)]
    n_scale: f64,
    /// Spread penalty weight on fused corners.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Detections below this confidence are dropped before clustering.
    #[arg(long, default_value_t = 0.5)]
    pre_threshold: f64,
    /// Minimum IoU against a cluster seed for membership.
    #[arg(long, default_value_t = 0.25)]
    cluster_iou: f64,
    /// Fused detections below this score are dropped.
    #[arg(long, default_value_t = 0.25)]
    post_threshold: f64,
    /// How the spread penalty is applied to box corners.
    #[arg(long, value_enum, default_value_t = CornerModeArg::Literal)]
    corner_mode: CornerModeArg,
}

impl FusionOpts {
    fn config(&self) -> EnsembleConfig {
        EnsembleConfig {
            pre_threshold: self.pre_threshold,
            cluster_iou: self.cluster_iou,
            n_scale: self.n_scale,
            alpha: self.alpha,
            post_threshold: self.post_threshold,
            corner_mode: self.corner_mode.into(),
        }
    }

    /// One prediction set per input path, tagged by the path itself.
    fn load_inputs(&self) -> Result<Vec<PredictionSet>> {
        self.inputs
            .iter()
            .map(|path| {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_predictions_csv(&text, path.display().to_string())
                    .with_context(|| format!("parsing {}", path.display()))
            })
            .collect()
    }
}

#[derive(Args)]
struct EnsembleCmd {
    #[command(flatten)]
    fusion: FusionOpts,
    /// Where to write the fused predictions CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScoreCmd {
    /// Predictions CSV.
    #[arg(long)]
    predictions: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    ground_truth: PathBuf,
    /// IoU threshold ladder as start:stop:step, both ends inclusive.
    #[arg(long, default_value = "0.40:0.75:0.05")]
    thresholds: String,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Summary)]
    format: ReportFormatArg,
}

#[derive(Args)]
struct CompareCmd {
    #[command(flatten)]
    fusion: FusionOpts,
    /// Ground-truth CSV.
    #[arg(long)]
    ground_truth: PathBuf,
    /// IoU threshold ladder as start:stop:step, both ends inclusive.
    #[arg(long, default_value = "0.40:0.75:0.05")]
    thresholds: String,
    #[arg(long, value_enum, default_value_t = CompareFormatArg::Table)]
    format: CompareFormatArg,
}

#[derive(Args)]
struct GenerateCmd {
    /// Number of images.
    #[arg(long, default_value_t = 100)]
    images: usize,
    /// Fraction of images that carry true boxes.
    #[arg(long, default_value_t = 0.6)]
    positives_fraction: f64,
    /// Number of simulated models.
    #[arg(long, default_value_t = 4)]
    models: usize,
    /// RNG seed; the same seed writes identical files.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Maximum per-coordinate perturbation of each model's boxes.
    #[arg(long, default_value_t = 8.0)]
    jitter: f64,
    /// Chance that a model misses a true box.
    #[arg(long, default_value_t = 0.15)]
    drop_prob: f64,
    /// Chance that a model adds an unrelated box per image.
    #[arg(long, default_value_t = 0.1)]
    spurious_prob: f64,
    /// Directory for ground_truth.csv and one CSV per model.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CornerModeArg {
    Literal,
    Signed,
}

impl From<CornerModeArg> for CornerMode {
    fn from(arg: CornerModeArg) -> Self {
        match arg {
            CornerModeArg::Literal => CornerMode::Literal,
            CornerModeArg::Signed => CornerMode::Signed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Summary,
    Json,
    Csv,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(arg: ReportFormatArg) -> Self {
        match arg {
            ReportFormatArg::Summary => ReportFormat::SummaryText,
            ReportFormatArg::Json => ReportFormat::JsonLines,
            ReportFormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareFormatArg {
    Table,
    Json,
}

/// Expands start:stop:step into a threshold ladder. Each value is snapped
/// to ten decimals so the defaults land on the exact literals the step
/// sequence names.
fn metric_config(spec: &str) -> Result<MetricConfig> {
    let parts: Vec<&str> = spec.split(':').collect();
    ensure!(parts.len() == 3, "thresholds must be start:stop:step, got {spec:?}");
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .with_context(|| format!("bad threshold component {s:?}"))
    };
    let start = parse(parts[0])?;
    let stop = parse(parts[1])?;
    let step = parse(parts[2])?;
    ensure!(step > 0.0, "threshold step must be positive");
    ensure!(stop >= start, "threshold stop must not precede start");

    let mut thresholds = Vec::new();
    let mut i = 0u32;
    loop {
        let raw = start + f64::from(i) * step;
        if raw > stop + step * 1e-9 {
            break;
        }
        let snapped: f64 = format!("{raw:.10}").parse().expect("formatted float");
        thresholds.push(snapped);
        i += 1;
    }
    MetricConfig::new(thresholds).context("invalid threshold ladder")
}

fn load_ground_truth(path: &PathBuf) -> Result<GroundTruthSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_ground_truth_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes report output, treating a consumer that closed the pipe early
/// (`... | head`) as success rather than a panic.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        result => result.context("writing to stdout"),
    }
}

fn cmd_ensemble(cmd: &EnsembleCmd) -> Result<()> {
    let sets = cmd.fusion.load_inputs()?;
    let (fused, counts) = ensemble_dataset_with_stats(&sets, &cmd.fusion.config())?;
    for (tag, count) in &counts.per_model_inputs {
        println!("{tag}: {count} detections");
    }
    println!("clusters: {}", counts.clusters);
    println!("survivors: {}", counts.survivors);
    fs::write(&cmd.output, write_predictions_csv(&fused))
        .with_context(|| format!("writing {}", cmd.output.display()))?;
    println!("wrote {}", cmd.output.display());
    Ok(())
}

fn cmd_score(cmd: &ScoreCmd) -> Result<()> {
    let text = fs::read_to_string(&cmd.predictions)
        .with_context(|| format!("reading {}", cmd.predictions.display()))?;
    let preds = parse_predictions_csv(&text, cmd.predictions.display().to_string())
        .with_context(|| format!("parsing {}", cmd.predictions.display()))?;
    let gts = load_ground_truth(&cmd.ground_truth)?;
    let report = dataset_score(&preds, &gts, &metric_config(&cmd.thresholds)?)?;
    emit(&write_report(&report, cmd.format.into()))
}

fn cmd_compare(cmd: &CompareCmd) -> Result<()> {
    let sets = cmd.fusion.load_inputs()?;
    let gts = load_ground_truth(&cmd.ground_truth)?;
    let metric = metric_config(&cmd.thresholds)?;

    let mut per_model = Vec::with_capacity(sets.len());
    for set in &sets {
        let report = dataset_score(set, &gts, &metric)?;
        per_model.push((set.model_id.clone(), report.mc_dataset));
    }
    let model_scores: Vec<f64> = per_model.iter().map(|(_, mc)| *mc).collect();
    let model_average = stats::mean(&model_scores);

    let fused = ensemble_dataset(&sets, &cmd.fusion.config())?;
    let ensemble_score = dataset_score(&fused, &gts, &metric)?.mc_dataset;

    match cmd.format {
        CompareFormatArg::Table => {
            let mut table = String::new();
            for (tag, mc) in &per_model {
                table.push_str(&format!("{tag}: {mc:.4}\n"));
            }
            table.push('\n');
            table.push_str(&format!("Model Average  {model_average:.4}\n"));
            table.push_str(&format!("Ensemble       {ensemble_score:.4}\n"));
            emit(&table)?;
        }
        CompareFormatArg::Json => {
            let record = serde_json::json!({
                "per_model": per_model
                    .iter()
                    .map(|(tag, mc)| serde_json::json!({"model": tag, "mc": mc}))
                    .collect::<Vec<_>>(),
                "model_average": model_average,
                "ensemble_score": ensemble_score,
            });
            emit(&format!("{record}\n"))?;
        }
    }
    Ok(())
}

fn cmd_generate(cmd: &GenerateCmd) -> Result<()> {
    ensure!(cmd.images > 0, "--images must be positive");
    ensure!(cmd.models > 0, "--models must be positive");
    ensure!(
        (0.0..=1.0).contains(&cmd.positives_fraction),
        "--positives-fraction must lie in [0, 1]"
    );
    ensure!(
        cmd.jitter >= 0.0 && cmd.jitter.is_finite(),
        "--jitter must be a finite non-negative number"
    );
    ensure!(
        (0.0..=1.0).contains(&cmd.drop_prob),
        "--drop-prob must lie in [0, 1]"
    );
    ensure!(
        (0.0..=1.0).contains(&cmd.spurious_prob),
        "--spurious-prob must lie in [0, 1]"
    );

    let data = generate(&SynthConfig {
        images: cmd.images,
        positives_fraction: cmd.positives_fraction,
        models: cmd.models,
        seed: cmd.seed,
        jitter: cmd.jitter,
        drop_prob: cmd.drop_prob,
        spurious_prob: cmd.spurious_prob,
    });

    fs::create_dir_all(&cmd.output_dir)
        .with_context(|| format!("creating {}", cmd.output_dir.display()))?;
    let gt_path = cmd.output_dir.join("ground_truth.csv");
    fs::write(&gt_path, write_ground_truth_csv(&data.ground_truth))
        .with_context(|| format!("writing {}", gt_path.display()))?;
    println!("wrote {}", gt_path.display());
    for set in &data.predictions {
        let path = cmd.output_dir.join(format!("{}.csv", set.model_id));
        fs::write(&path, write_predictions_csv(set))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ensemble(cmd) => cmd_ensemble(&cmd),
        Command::Score(cmd) => cmd_score(&cmd),
        Command::Compare(cmd) => cmd_compare(&cmd),
        Command::Generate(cmd) => cmd_generate(&cmd),
    }
}
