//! Multimodal hate speech classification over tweet text, image text and
//! images: unimodal encoders, three fusion heads (feature concatenation,
//! spatial concatenation and textual kernels), corpus construction,
//! training, evaluation and a synthetic crossmodal benchmark.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod layers;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
