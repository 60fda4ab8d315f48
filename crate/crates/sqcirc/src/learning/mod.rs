//! Maximum-likelihood training of tensorized circuits.

pub mod data;
pub mod grad;
pub mod optim;
pub mod params;
pub mod train;

pub use grad::{backward, log_partition, loss_and_grad, nll, LossValue};
pub use params::{flatten, params_of, set_params, stiefel_groups, unflatten, Param, StiefelGroup};
pub use optim::{landing_pc_step, landing_step, LandingHyper, Optimizer, OptimizerSpec, OptimizerState};
pub use data::{synth_data, synth_digits, Dataset, Split, SynthKind};
pub use train::{bpd, train, train_circuit, DataSpec, MetricRecord, TrainConfig, TrainOutcome};
