//! Learning applications running on emulated cores.
//!
//! Every model owns its core and translates input-space spike sets (feature
//! indices plus the bias flag) into the core addresses of its nodes.

mod anomaly;
mod classifier;
mod cluster;
mod stats;

pub use anomaly::{AnomalyModel, ANOMALY_THRESHOLD, SIGMA_FLOOR};
pub use classifier::{ClassifierConfig, ClassifierModel, Prediction};
pub use cluster::ClusterModel;
pub use stats::RunningStats;

use crate::keyvalue::KvError;
use crate::ktcore::{CoreError, PersistError, SpikeSet};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnError {
    #[error("spike set is empty")]
    EmptySpikes,
    #[error("input index {index} outside the model's {dim} inputs")]
    InputOutOfRange { index: usize, dim: usize },
    #[error("model input dimension must be >= 1")]
    NoInputs,
    #[error("label capacity of {0} exhausted")]
    CapacityExceeded(usize),
    #[error("model has no labels yet")]
    NoLabels,
    #[error("anomaly score needs at least 2 fitted samples, have {0}")]
    NotCalibrated(u64),
    #[error("invalid model settings: {0}")]
    InvalidSettings(String),
    #[error("model header: {0}")]
    Header(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

impl From<KvError> for LearnError {
    fn from(e: KvError) -> Self {
        LearnError::Header(e.to_string())
    }
}

/// Checks that every spiked input exists and the set is non-empty.
fn check_inputs(spikes: &SpikeSet, dim: usize) -> Result<(), LearnError> {
    if spikes.is_empty() {
        return Err(LearnError::EmptySpikes);
    }
    match spikes.addresses().iter().find(|&&i| i >= dim) {
        Some(&index) => Err(LearnError::InputOutOfRange { index, dim }),
        None => Ok(()),
    }
}
