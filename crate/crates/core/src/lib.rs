//! Emulator for a neuromemristive co-processor built from differential
//! memristor pairs.
//!
//! The crate is layered bottom-up:
//!
//! * [`device`]: metastable-switch memristor model (mean-field and stochastic)
//! * [`synapse`]: two devices in series forming a signed weight
//! * [`ktcore`]: a 2-D synapse array with nodes, an instruction set and a
//!   bit-exact state image
//! * [`learners`]: classifier, anomaly detector and clustering on top of cores
//! * [`bench`]: dataset loaders, spike encoding and evaluation metrics
//!
//! [`keyvalue`] is the small text format used for presets, configs and model
//! headers.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod device;
pub mod keyvalue;
pub mod ktcore;
pub mod learners;
pub mod synapse;

pub use device::{DeviceParams, DeviceState, Mode, Pulse, Variant};
pub use ktcore::{Core, CoreConfig, CoreError, Instruction, NodeId, SpikeSet};
pub use synapse::{Direction, Polarity, Synapse};
