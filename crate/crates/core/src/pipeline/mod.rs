//! Configuration, synthetic data, the end-to-end run and plot-data export.

mod config;
mod io;
mod plot;
mod run;
mod synth;

pub use config::{DenoiseScope, NetworkChoice, NiConfig, PipelineConfig, TruthMode, WaveletStage};
pub use io::write_atomic;
pub use plot::{decomposition_csv, evaluate_predictions, emit_plot_data, plot_data, PlotKind, PlotOptions};
pub use run::{
    correlation_of, denoise_cells, file_stem, impute_stage, predict_with, resolve_stations, run_pipeline,
    split_frames, prepare_station, train_station, predictions_csv, PreparedStation, StationRun, ArtifactDigest, RunManifest, RunOutcome, StageRecord, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use synth::{
    sidecar_path, synth, StationSpec, SyntheticData, SyntheticSpec, MIN_SYNTH_LEN, RAINFALL, START_TIMESTAMP,
    STEP_SECONDS, WATER_LEVEL,
};
