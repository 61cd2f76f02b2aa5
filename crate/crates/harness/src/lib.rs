//! Experiment driver: datasets, batch registration, evaluation, search and
//! reports for the tag-fading registration benchmark.

pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod inputs;
pub mod registration;
pub mod report;
pub mod search;
pub mod tmri;

pub use config::{ExperimentConfig, InputRepr};
