use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seepline_core::data::{ingest_csv_auto, write_csv, MonitoringSeries};
use seepline_core::metrics::{default_grid, sweep, EvalReport};
use seepline_core::nn::Checkpoint;
use seepline_core::pipeline::{
    denoise_cells, emit_plot_data, evaluate_predictions, file_stem, impute_stage, predict_with, predictions_csv,
    prepare_station, resolve_stations, run_pipeline, sidecar_path, synth, train_station, write_atomic,
    NetworkChoice, PipelineConfig, PlotKind, PlotOptions, SyntheticSpec, TruthMode, WaveletStage,
};
use seepline_core::wavelet::{Boundary, DenoiseConfig, ShrinkMode, Wavelet};
use seepline_core::{Error, Result};

/// Saturation-line forecasting: imputation, wavelet denoising and CNN-LSTM models.
#[derive(Parser)]
#[command(name = "seepline", version)]
struct Cli {
    /// Directory every output is written under.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic monitoring CSV and its ground-truth sidecar.
    Synth(SynthArgs),
    /// Flag abnormal values and fill gaps by numerical inversion.
    Impute(StageArgs),
    /// Wavelet-denoise channels of a monitoring CSV.
    Denoise(DenoiseArgs),
    /// Train one network per station and score it on the test split.
    Train(StageArgs),
    /// Forecast with a saved checkpoint.
    Predict(PredictArgs),
    /// Score a predictions file or directory.
    Evaluate(EvaluateArgs),
    /// Train the hyperparameter grid on one station.
    Sweep(SweepArgs),
    /// The full pipeline.
    Run(StageArgs),
    /// Export the data behind a figure as CSV.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthetic spec; defaults otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    missing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file name.
    #[arg(long, default_value = "data.csv")]
    file: PathBuf,
}

/// Shared by impute, train and run. Flags override the config file.
#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated station channels.
    #[arg(long, value_delimiter = ',')]
    stations: Vec<String>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    no_wavelet: bool,
    #[arg(long)]
    no_ni: bool,
    /// Also write correlation screening, importances and Sobol indices.
    #[arg(long)]
    analyze: bool,
    #[arg(long)]
    truth: Option<TruthArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TruthArg {
    Raw,
    Denoised,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Channels to denoise; all when empty.
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    #[arg(long, default_value = "db4")]
    wavelet: Wavelet,
    #[arg(long, default_value_t = 4)]
    level: usize,
    #[arg(long, default_value = "soft")]
    mode: ShrinkMode,
    #[arg(long, default_value = "symmetric")]
    boundary: Boundary,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series in the form the network was trained on (denoised if it was).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    station: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// A predictions CSV or a directory of them.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value = "model")]
    model: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long)]
    station: String,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    kind: PlotKind,
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, default_value = "db4")]
    wavelet: Wavelet,
    #[arg(long, default_value_t = 4)]
    level: usize,
    #[arg(long, default_value = "symmetric")]
    boundary: Boundary,
    /// Output file name; `plot-<kind>.csv` by default.
    #[arg(long)]
    file: Option<PathBuf>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("SEEPLINE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("SEEPLINE_SEED `{v}` is not an integer"))),
        Err(_) => Ok(None),
    }
}

/// Reads a JSON document, reporting whether it sets `seed`.
fn read_json(path: &Path) -> Result<(String, bool)> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::NotFound(path.to_path_buf()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let has_seed = value.get("seed").is_some();
    Ok((text, has_seed))
}

/// Seed precedence: flag, then the file, then SEEPLINE_SEED.
fn pick_seed(flag: Option<u64>, file_has_seed: bool, current: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if file_has_seed {
        return Ok(current);
    }
    Ok(env_seed()?.unwrap_or(current))
}

/// Flags override the config file, which overrides defaults.
fn load_config(args: &StageArgs) -> Result<PipelineConfig> {
    let (mut cfg, file_has_seed) = match &args.config {
        Some(path) => {
            let (text, has_seed) = read_json(path)?;
            (PipelineConfig::from_json(&text)?, has_seed)
        }
        None => (PipelineConfig::default(), false),
    };
    cfg.seed = pick_seed(args.seed, file_has_seed, cfg.seed)?;
    if let Some(p) = &args.input {
        cfg.input = p.clone();
    }
    if !args.stations.is_empty() {
        cfg.stations = args.stations.clone();
    }
    if let Some(p) = &args.preset {
        cfg.network = NetworkChoice::Preset(p.clone());
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if args.no_wavelet {
        cfg.wavelet.enabled = false;
    }
    if args.no_ni {
        cfg.ni.enabled = false;
    }
    if args.analyze {
        cfg.ni.analyze = true;
    }
    if let Some(t) = args.truth {
        cfg.truth = match t {
            TruthArg::Raw => TruthMode::Raw,
            TruthArg::Denoised => TruthMode::Denoised,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn csv_bytes(series: &MonitoringSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    Ok(buf)
}

fn write_report(out: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(&out.join("report.csv"), report.to_csv()?.as_bytes())?;
    write_atomic(&out.join("report.json"), report.to_json()?.as_bytes())?;
    print!("{}", report.to_markdown());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Synth(a) => {
            let (mut spec, file_has_seed) = match &a.spec {
                Some(p) => {
                    let (text, has_seed) = read_json(p)?;
                    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                    (spec, has_seed)
                }
                None => (SyntheticSpec::default(), false),
            };
            spec.seed = pick_seed(a.seed, file_has_seed, spec.seed)?;
            if let Some(n) = a.n {
                spec.n = n;
            }
            if let Some(m) = a.missing {
                spec.missing_fraction = m;
            }
            let path = out.join(&a.file);
            synth(&spec, &path)?;
            println!("{}\n{}", path.display(), sidecar_path(&path).display());
        }
        Command::Impute(a) => {
            let cfg = load_config(&a)?;
            let series = ingest_csv_auto(&cfg.input)?;
            let stations = resolve_stations(&series, &cfg)?;
            let imputed = impute_stage(&series, &stations, &cfg)?;
            write_atomic(&out.join("imputed.csv"), &csv_bytes(&imputed)?)?;
            println!("{}", out.join("imputed.csv").display());
        }
        Command::Denoise(a) => {
            let series = ingest_csv_auto(&a.input)?;
            let stage = WaveletStage {
                enabled: true,
                denoise: DenoiseConfig { wavelet: a.wavelet, level: a.level, mode: a.mode, boundary: a.boundary, ..Default::default() },
                ..Default::default()
            };
            let channels: Vec<String> =
                if a.channels.is_empty() { series.channels().to_vec() } else { a.channels.clone() };
            let mut den = series.clone();
            for ch in &channels {
                let idx = series.channel_index(ch)?;
                let mut cells = series.column(idx);
                let n = cells.len();
                denoise_cells(&mut cells, 0..n, &stage)?;
                den = den.with_column(idx, &cells)?;
            }
            write_atomic(&out.join("denoised.csv"), &csv_bytes(&den)?)?;
            println!("{}", out.join("denoised.csv").display());
        }
        Command::Train(a) => {
            let cfg = load_config(&a)?;
            let spec = cfg.network_spec()?;
            let series = ingest_csv_auto(&cfg.input)?;
            let stations = resolve_stations(&series, &cfg)?;
            let mut rows = Vec::new();
            for st in &stations {
                let run = train_station(prepare_station(&series, st, &cfg)?, &cfg, &spec)?;
                let stem = file_stem(st);
                write_atomic(&out.join(format!("checkpoints/{stem}.json")), run.checkpoint.to_json()?.as_bytes())?;
                write_atomic(&out.join(format!("predictions/{stem}.csv")), &predictions_csv(st, &run.predictions)?)?;
                rows.push(run.row);
            }
            write_report(&out, &EvalReport { rows })?;
        }
        Command::Predict(a) => {
            let text = std::fs::read_to_string(&a.checkpoint).map_err(|_| Error::NotFound(a.checkpoint.clone()))?;
            let ck = Checkpoint::from_json(&text)?;
            let series = ingest_csv_auto(&a.input)?;
            let pred = predict_with(&ck, &series, &a.station)?;
            let mut csv = String::from("timestamp,prediction\n");
            for (t, p) in pred {
                csv.push_str(&format!("{t},{p:?}\n"));
            }
            let path = out.join(format!("forecast-{}.csv", file_stem(&a.station)));
            write_atomic(&path, csv.as_bytes())?;
            println!("{}", path.display());
        }
        Command::Evaluate(a) => {
            write_report(&out, &evaluate_predictions(&a.predictions, &a.model)?)?;
        }
        Command::Sweep(a) => {
            let cfg = load_config(&a.stage)?;
            let series = ingest_csv_auto(&cfg.input)?;
            let prepared = prepare_station(&series, &a.station, &cfg)?;
            let report = sweep(&default_grid(), &prepared.dataset, &cfg.train, cfg.seed);
            write_atomic(&out.join("sweep.csv"), report.to_csv()?.as_bytes())?;
            print!("{}", report.to_markdown());
        }
        Command::Run(a) => {
            let mut cfg = load_config(&a)?;
            if let Some(dir) = &cli.out {
                cfg.output_dir = dir.clone();
            }
            let outcome = run_pipeline(&cfg)?;
            print!("{}", outcome.report.to_markdown());
        }
        Command::PlotData(a) => {
            let opts = PlotOptions { channel: a.channel, wavelet: a.wavelet, level: a.level, boundary: a.boundary };
            let file = a.file.unwrap_or_else(|| PathBuf::from(format!("plot-{}.csv", a.kind)));
            let path = out.join(file);
            emit_plot_data(&a.artifact, a.kind, &opts, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
