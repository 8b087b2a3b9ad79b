//! Wavelet-network NARX identification, validation and linearization.

mod dataset;
mod fit;
mod layout;
mod linearize;
mod model_file;
mod validate;
mod wavelet;

pub use dataset::{Dataset, TRAIN_FRACTION};
pub use fit::{fit_narx, fit_regression, FitConfig, RegressionData};
pub use layout::RegressorLayout;
pub use linearize::{linearize, shift_matrices, LinearizedPlant};
pub use model_file::{load_model, read_model, save_model, write_model};
pub use validate::{
    fit_percent, fit_table, input_residual_crosscorrelation, n_step_ahead, one_step_residuals, predict_n_step,
    residual_autocorrelation, whiteness, Correlogram, Whiteness, Z_99,
};
pub use wavelet::{NarxModel, Normalization, Unit, UnitKind, WaveletChannel};
