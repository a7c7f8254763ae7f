//! Class-weighted cross-entropy training with ADAM, seeded mini-batching and
//! best-validation-AUC model selection.

mod sample;
mod train;
mod weights;

pub use sample::{collate, label_counts, samples_from_records, Sample};
pub use train::{train, Divergence, EvalRecord, StepRecord, TrainConfig, TrainHistory, TrainOutcome};
pub use weights::{class_weights, ClassWeightMode};
