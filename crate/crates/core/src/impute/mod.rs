//! Numerical-inversion imputation: correlation screening, regression forest,
//! Sobol sensitivity and forest-based reconstruction of missing values.

mod correlation;
mod forest;
mod ni;
mod sobol;

pub use correlation::{complete_rows, correlation_screen, pearson, CorrelationMatrix, DEFAULT_CORRELATION_THRESHOLD};
pub use forest::{
    rf_fit, rf_predict, ForestCheckpoint, ForestParams, Node, RandomForest, RegressionTree,
    FOREST_CHECKPOINT_VERSION,
};
pub use ni::{analyze_inversion, fit_inversion, ni_impute, InversionAnalysis, DEFAULT_PREDICTORS, MIN_FIT_ROWS};
pub use sobol::{sobol_indices, FnModel, ScalarModel, SobolResult, MIN_SOBOL_SAMPLES};
