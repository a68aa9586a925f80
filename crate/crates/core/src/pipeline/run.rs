use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DenoiseScope, PipelineConfig, TruthMode, WaveletStage};
use super::io::write_atomic;
use crate::data::{
    flag_abnormal_channels, ingest_csv_auto, make_windows, make_windows_scaled, write_csv, zscore_apply, zscore_fit,
    Cell, ChannelScale, DatasetManifest, ForecastDataset, MonitoringSeries, NormalizationStats,
};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::impute::{analyze_inversion, complete_rows, ni_impute, CorrelationMatrix, ForestParams};
use crate::metrics::{EvalReport, EvalRow};
use crate::nn::{forecast, train, Checkpoint, Network, NetworkSpec};
use crate::wavelet::{denoise, max_level};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub artifacts: Vec<ArtifactDigest>,
}

/// Digests of every deterministic artifact of a run. Timings live in the
/// report, which is left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    pub config_digest: String,
    pub input_digest: String,
    pub seed: u64,
    pub stations: Vec<String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: EvalReport,
    pub output_dir: PathBuf,
}

/// File-name-safe form of a channel id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

struct Writer<'a> {
    root: &'a Path,
    stages: Vec<StageRecord>,
}

impl Writer<'_> {
    fn begin(&mut self, stage: &str) {
        self.stages.push(StageRecord { stage: stage.into(), artifacts: Vec::new() });
    }

    /// Writes and records the digest.
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        let stage = self.stages.last_mut().expect("stage begun");
        stage.artifacts.push(ArtifactDigest { path: rel.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes without recording: content that varies between identical runs.
    fn put_volatile(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)
    }
}

fn csv_bytes(series: &MonitoringSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    Ok(buf)
}

/// `cfg.stations`, or every channel that is not an NI predictor.
pub fn resolve_stations(series: &MonitoringSeries, cfg: &PipelineConfig) -> Result<Vec<String>> {
    let stations: Vec<String> = if cfg.stations.is_empty() {
        series.channels().iter().filter(|c| !cfg.ni.predictors.contains(c)).cloned().collect()
    } else {
        cfg.stations.clone()
    };
    if stations.is_empty() {
        return Err(Error::Config("no station channels to forecast".into()));
    }
    for s in &stations {
        series.channel_index(s)?;
    }
    Ok(stations)
}

/// Abnormal-value flags on the stations, then NI imputation of each station's
/// missing and abnormal cells from the predictors.
pub fn impute_stage(series: &MonitoringSeries, stations: &[String], cfg: &PipelineConfig) -> Result<MonitoringSeries> {
    let refs: Vec<&str> = stations.iter().map(String::as_str).collect();
    let mut out = flag_abnormal_channels(series, cfg.abnormal_k, &refs)?;
    if cfg.ni.enabled {
        let predictors: Vec<&str> = cfg.ni.predictors.iter().map(String::as_str).collect();
        let params = forest_params(cfg);
        for st in &refs {
            out = ni_impute(&out, st, &predictors, &params)?;
        }
    }
    Ok(out)
}

fn forest_params(cfg: &PipelineConfig) -> ForestParams {
    ForestParams { seed: cfg.seed, ..cfg.ni.forest.clone() }
}

/// Frame boundaries `[0, a)`, `[a, b)`, `[b, n)` at the first validation and
/// first test target.
pub fn split_frames(ds: &ForecastDataset, n: usize) -> [Range<usize>; 3] {
    let target = |i: usize| ds.starts[i] + ds.window;
    let b = if ds.split.test.is_empty() { n } else { target(ds.split.test.start) };
    let a = if ds.split.validation.is_empty() { b } else { target(ds.split.validation.start) };
    [0..a, a..b, b..n]
}

/// Denoises every clean run of `cells` inside `range`. Runs too short for the
/// configured level get the deepest level they allow; runs that allow none are
/// left alone, as are missing and abnormal cells.
pub fn denoise_cells(cells: &mut [Cell], range: Range<usize>, stage: &WaveletStage) -> Result<()> {
    let cfg = &stage.denoise;
    let mut i = range.start;
    while i < range.end {
        if cells[i].clean_value().is_none() {
            i += 1;
            continue;
        }
        let start = i;
        while i < range.end && cells[i].clean_value().is_some() {
            i += 1;
        }
        let run: Vec<f64> = cells[start..i].iter().map(|c| c.clean_value().unwrap()).collect();
        let level = cfg.level.min(max_level(run.len(), cfg.wavelet, cfg.boundary));
        if level == 0 {
            continue;
        }
        let smooth = denoise(&run, &crate::wavelet::DenoiseConfig { level, ..*cfg })?;
        for (cell, v) in cells[start..i].iter_mut().zip(smooth) {
            *cell = cell.map(|_| v);
        }
    }
    Ok(())
}

/// One station's series after normalization and, if enabled, denoising.
#[derive(Debug, Clone)]
pub struct PreparedStation {
    pub station: String,
    /// Imputed values in physical units.
    pub raw: MonitoringSeries,
    pub stats: NormalizationStats,
    pub scale: ChannelScale,
    /// Denoised values in physical units, when the wavelet stage ran.
    pub denoised: Option<Vec<Cell>>,
    pub dataset: ForecastDataset,
}

/// Everything trained and scored for one station.
#[derive(Debug, Clone)]
pub struct StationRun {
    pub prepared: PreparedStation,
    pub checkpoint: Checkpoint,
    /// (target timestamp, truth, prediction) over the test split.
    pub predictions: Vec<(i64, f64, f64)>,
    pub row: EvalRow,
}

/// normalize → denoise → window for one station. Statistics are fitted on
/// the frames spanned by the training windows.
pub fn prepare_station(imputed: &MonitoringSeries, station: &str, cfg: &PipelineConfig) -> Result<PreparedStation> {
    let raw = imputed.select(&[station])?;
    let n = raw.len();
    let probe = make_windows(&raw, cfg.seq_len, station).map_err(|e| e.in_stage("normalize"))?;
    let stats = zscore_fit(&raw, probe.train_frame_range()).map_err(|e| e.in_stage("normalize"))?;
    let scale = stats.channel(station)?;
    let normalized = zscore_apply(&raw, &stats)?;

    let (series, denoised) = if cfg.wavelet.enabled {
        let mut cells = normalized.column(0);
        let ranges = match cfg.wavelet.scope {
            DenoiseScope::Split => split_frames(&probe, n).to_vec(),
            DenoiseScope::Full => std::iter::once(0..n).collect(),
        };
        for r in ranges {
            denoise_cells(&mut cells, r, &cfg.wavelet).map_err(|e| e.in_stage("denoise"))?;
        }
        let physical: Vec<Cell> = cells.iter().map(|c| c.map(|v| scale.denormalize(v))).collect();
        (normalized.with_column(0, &cells)?, Some(physical))
    } else {
        (normalized, None)
    };
    let dataset = make_windows_scaled(&series, cfg.seq_len, station, scale).map_err(|e| e.in_stage("window"))?;
    Ok(PreparedStation { station: station.into(), raw, stats, scale, denoised, dataset })
}

/// train → evaluate on the test split.
pub fn train_station(prepared: PreparedStation, cfg: &PipelineConfig, spec: &NetworkSpec) -> Result<StationRun> {
    let p = &prepared;
    let started = Instant::now();
    let outcome = train(spec, &p.dataset, &cfg.train).map_err(|e| e.in_stage("train"))?;
    let runtime = started.elapsed().as_secs_f64();
    let stats_json = serde_json::to_string(&p.stats)?;
    let checkpoint = Checkpoint::new(&outcome.network, p.scale, sha256_hex(stats_json.as_bytes()), outcome.history);

    let test = p.dataset.split.test.clone();
    let pred = forecast(&outcome.network, &p.dataset, test.clone()).map_err(|e| e.in_stage("evaluate"))?;
    let raw_col = p.raw.column(0);
    let timestamps = p.raw.timestamps();
    let mut predictions = Vec::with_capacity(test.len());
    for (i, y) in test.zip(&pred) {
        let frame = p.dataset.starts[i] + p.dataset.window;
        let truth = match cfg.truth {
            TruthMode::Raw => raw_col[frame].clean_value().expect("window targets are clean"),
            TruthMode::Denoised => p.scale.denormalize(p.dataset.targets[i]),
        };
        predictions.push((timestamps[frame], truth, *y));
    }
    let truth: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    let row = EvalRow::score(&p.station, &cfg.model_label(), &truth, &pred, runtime);
    Ok(StationRun { prepared, checkpoint, predictions, row })
}

pub fn predictions_csv(station: &str, rows: &[(i64, f64, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["station", "timestamp", "truth", "prediction"])?;
    for (t, y, p) in rows {
        w.write_record([station.to_string(), t.to_string(), format!("{y:?}"), format!("{p:?}")])?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Correlation matrix over all channels, on rows where every channel is clean.
pub fn correlation_of(series: &MonitoringSeries) -> Result<CorrelationMatrix> {
    let all: Vec<usize> = (0..series.channels().len()).collect();
    CorrelationMatrix::compute(series.channels().to_vec(), &complete_rows(series, &all))
}

/// impute → normalize → denoise → window → train → evaluate, writing every
/// intermediate under `cfg.output_dir` and a manifest of their digests.
/// Stations run in parallel once the shared impute stage is done. A failing
/// stage aborts the run; files already written stay.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let spec = cfg.network_spec()?;
    let input_bytes = std::fs::read(&cfg.input).map_err(|_| Error::NotFound(cfg.input.clone()))?;
    let input_digest = sha256_hex(&input_bytes);
    let series = ingest_csv_auto(&cfg.input).map_err(|e| e.in_stage("ingest"))?;
    let stations = resolve_stations(&series, cfg)?;
    let root = cfg.output_dir.as_path();
    let mut w = Writer { root, stages: Vec::new() };
    w.put_volatile("config.json", cfg.to_json()?.as_bytes())?;

    w.begin("impute");
    let imputed = impute_stage(&series, &stations, cfg).map_err(|e| e.in_stage("impute"))?;
    w.put("imputed.csv", &csv_bytes(&imputed)?)?;
    if cfg.ni.analyze {
        let analyses = analysis(&series, &stations, cfg).map_err(|e| e.in_stage("impute"))?;
        w.put("correlation.csv", correlation_of(&imputed)?.to_csv().as_bytes())?;
        w.put("ni_analysis.json", serde_json::to_string_pretty(&analyses)?.as_bytes())?;
    }

    let runs: Vec<StationRun> = stations
        .par_iter()
        .map(|st| prepare_station(&imputed, st, cfg).and_then(|p| train_station(p, cfg, &spec)))
        .collect::<Result<_>>()?;

    w.begin("normalize");
    let stats = NormalizationStats {
        channels: stations.clone(),
        mean: runs.iter().map(|r| r.prepared.scale.mean).collect(),
        std: runs.iter().map(|r| r.prepared.scale.std).collect(),
    };
    w.put("normalization.json", serde_json::to_string_pretty(&stats)?.as_bytes())?;

    if cfg.wavelet.enabled {
        w.begin("denoise");
        let refs: Vec<&str> = stations.iter().map(String::as_str).collect();
        let mut den = imputed.select(&refs)?;
        for (k, r) in runs.iter().enumerate() {
            den = den.with_column(k, r.prepared.denoised.as_ref().expect("denoise enabled"))?;
        }
        w.put("denoised.csv", &csv_bytes(&den)?)?;
    }

    w.begin("window");
    for r in &runs {
        let m = DatasetManifest::describe(&r.prepared.dataset, input_digest.clone());
        w.put(&format!("datasets/{}.json", file_stem(&r.prepared.station)), serde_json::to_string_pretty(&m)?.as_bytes())?;
    }

    w.begin("train");
    for r in &runs {
        w.put(&format!("checkpoints/{}.json", file_stem(&r.prepared.station)), r.checkpoint.to_json()?.as_bytes())?;
    }

    w.begin("evaluate");
    for r in &runs {
        let rel = format!("predictions/{}.csv", file_stem(&r.prepared.station));
        w.put(&rel, &predictions_csv(&r.prepared.station, &r.predictions)?)?;
    }
    let report = EvalReport { rows: runs.into_iter().map(|r| r.row).collect() };
    w.put_volatile("report.csv", report.to_csv()?.as_bytes())?;
    w.put_volatile("report.json", report.to_json()?.as_bytes())?;
    w.put_volatile("report.md", report.to_markdown().as_bytes())?;

    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        config_digest: sha256_hex(cfg.canonical_json()?.as_bytes()),
        input_digest,
        seed: cfg.seed,
        stations,
        stages: w.stages,
    };
    write_atomic(&root.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(RunOutcome { manifest, report, output_dir: root.to_path_buf() })
}

/// Screening, importances and Sobol indices per station, fitted on the rows
/// that were observed before imputation.
fn analysis(
    original: &MonitoringSeries,
    stations: &[String],
    cfg: &PipelineConfig,
) -> Result<Vec<crate::impute::InversionAnalysis>> {
    let candidates: Vec<&str> = cfg.ni.predictors.iter().map(String::as_str).collect();
    let params = forest_params(cfg);
    stations
        .iter()
        .map(|st| {
            analyze_inversion(original, st, &candidates, cfg.ni.correlation_threshold, &params, cfg.ni.sobol_samples)
        })
        .collect()
}

/// One-step forecasts over every window of `station` in `series`, using the
/// checkpoint's scale. The series must already be in the form the network was
/// trained on (denoised, if it was). Returns (target timestamp, prediction).
pub fn predict_with(checkpoint: &Checkpoint, series: &MonitoringSeries, station: &str) -> Result<Vec<(i64, f64)>> {
    let net: Network = checkpoint.network()?;
    let raw = series.select(&[station])?;
    let stats = NormalizationStats {
        channels: vec![station.into()],
        mean: vec![checkpoint.scale.mean],
        std: vec![checkpoint.scale.std],
    };
    let z = zscore_apply(&raw, &stats)?;
    let ds = make_windows_scaled(&z, checkpoint.spec.input_len, station, checkpoint.scale)?;
    let pred = forecast(&net, &ds, 0..ds.len())?;
    let ts = raw.timestamps();
    Ok(ds.starts.iter().zip(pred).map(|(s, p)| (ts[s + ds.window], p)).collect())
}
