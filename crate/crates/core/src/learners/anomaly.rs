use crate::keyvalue::Document;
use crate::ktcore::{load_state, save_state, Core, CoreConfig, Instruction, NodeId, SpikeSet};

use super::{check_inputs, LearnError, RunningStats};

/// Scores above this are flagged as anomalous.
pub const ANOMALY_THRESHOLD: f64 = 3.0;
/// Lower bound on the standard deviation used for scoring.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Single FU-trained node whose activation deficit, in standard deviations
/// of the training activations, is the anomaly score.
///
/// The node settles into one of two attractors, so the deficit is measured
/// toward zero from the side the training mean sits on.
#[derive(Debug, Clone)]
pub struct AnomalyModel {
    core: Core,
    node: NodeId,
    input_dim: usize,
    stats: RunningStats,
}

impl AnomalyModel {
    pub fn new(input_dim: usize, core: CoreConfig) -> Result<Self, LearnError> {
        if input_dim == 0 {
            return Err(LearnError::NoInputs);
        }
        let mut cfg = core;
        cfg.rows = 1;
        cfg.cols = (input_dim + usize::from(cfg.bias)) as u32;
        let mut core = Core::new(cfg)?;
        let node = core.alloc_node(0..cfg.size())?;
        Ok(AnomalyModel {
            core,
            node,
            input_dim,
            stats: RunningStats::new(),
        })
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    fn node_spikes(&self, spikes: &SpikeSet) -> SpikeSet {
        let off = usize::from(self.core.config().bias);
        SpikeSet::new(spikes.addresses().iter().map(|&i| i + off)).with_bias(spikes.bias)
    }

    /// Runs FU on the node and folds the activation into the statistics.
    pub fn fit(&mut self, spikes: &SpikeSet) -> Result<f64, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        let y = self
            .core
            .execute(self.node, &self.node_spikes(spikes), Instruction::FU)?;
        self.stats.push(y);
        Ok(y)
    }

    /// Non-mutating activation for `spikes`.
    pub fn activation(&self, spikes: &SpikeSet) -> Result<f64, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        Ok(self.core.activation(self.node, &self.node_spikes(spikes))?)
    }

    /// `max(0, s (mu - y) / max(sigma, SIGMA_FLOOR))` with `s` the sign of
    /// the training mean (positive when the mean is zero).
    pub fn score(&self, spikes: &SpikeSet) -> Result<f64, LearnError> {
        if self.stats.count() < 2 {
            return Err(LearnError::NotCalibrated(self.stats.count()));
        }
        let y = self.activation(spikes)?;
        let mu = self.stats.mean();
        let sigma = self.stats.std().max(SIGMA_FLOOR);
        let s = if mu < 0.0 { -1.0 } else { 1.0 };
        Ok((s * (mu - y) / sigma).max(0.0))
    }

    pub fn is_anomaly(&self, spikes: &SpikeSet) -> Result<bool, LearnError> {
        Ok(self.score(spikes)? > ANOMALY_THRESHOLD)
    }

    pub fn save(&self) -> (Vec<u8>, String) {
        let mut doc = Document::new();
        let s = doc.section_mut("anomaly");
        s.set("input_dim", self.input_dim);
        s.set("node", self.node.0);
        s.set("count", self.stats.count());
        s.set("mean", self.stats.mean());
        s.set("m2", self.stats.m2());
        (save_state(&self.core), doc.to_string())
    }

    pub fn load(state: &[u8], header: &str) -> Result<Self, LearnError> {
        let core = load_state(state)?;
        let doc: Document = header.parse()?;
        let s = doc.require_section("anomaly")?;
        let input_dim: usize = s.parse("input_dim")?;
        let node = NodeId(s.parse("node")?);
        if core.node(node).is_none() {
            return Err(LearnError::Header(format!("unknown node {node}")));
        }
        if core.config().cols as usize != input_dim + usize::from(core.config().bias) {
            return Err(LearnError::Header(
                "core geometry does not match input_dim".into(),
            ));
        }
        Ok(AnomalyModel {
            core,
            node,
            input_dim,
            stats: RunningStats::from_parts(s.parse("count")?, s.parse("mean")?, s.parse("m2")?),
        })
    }
}
