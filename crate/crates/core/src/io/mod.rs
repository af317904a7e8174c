//! File formats: raw and feature CSVs, reports, model files and configuration.

mod config;
mod csv;
mod model;

pub use self::config::{EvalSettings, PipelineConfig};
pub use self::csv::{
    fmt_f64, read_features_csv, read_predictions_csv, read_raw_csv, write_features_csv,
    write_metrics_csv, write_plot_csv, write_predictions_csv, write_profile_csv,
    write_raw_csv, write_slip_bins_csv, write_study_csv, PredictionRecord,
    DEFAULT_SAMPLE_RATE_HZ, FEATURE_LABEL_COLUMNS, PREDICTION_COLUMNS, RAW_COLUMNS,
};
pub use self::model::{
    hyperparameter_checksum, load_model, save_model, MODEL_MAGIC, MODEL_VERSION,
};
