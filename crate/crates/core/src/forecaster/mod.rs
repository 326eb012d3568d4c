//! LSTM forecaster: 50 normalized days in, 10 days out.

mod adam;
mod io;
mod loss;
mod model;
mod train;

pub use adam::Adam;
pub use io::{ModelFile, Tensor, MODEL_FORMAT};
pub use loss::{
    adaptive_loss, batch_loss, target_weights, weight_for_count, weighted_sample_grad, weighted_sample_loss,
    DensityHistogram, LossKind, COUNT_FLOOR, DEFAULT_DENSITY_BINS,
};
pub use model::{LstmModel, Matrix, GATE_NAMES};
pub use train::{gradient_check, predict, train, TrainConfig, TrainOutcome};
