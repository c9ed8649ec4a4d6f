use crate::keyvalue::Document;
use crate::ktcore::{load_state, save_state, Core, CoreConfig, Instruction, NodeId, SpikeSet};

use super::{check_inputs, LearnError, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub input_dim: usize,
    /// Maximum number of labels; one core row is reserved per label.
    pub capacity: usize,
    /// Skip the write for nodes already on the correct side of zero.
    pub only_on_error: bool,
    /// Distance past zero an activation must reach before its write is
    /// skipped under `only_on_error`. Zero gives the plain sign rule.
    pub margin: f64,
    /// Template for the owned core. Rows and columns are derived from
    /// `capacity` and `input_dim`.
    pub core: CoreConfig,
}

impl ClassifierConfig {
    pub fn new(input_dim: usize, capacity: usize, core: CoreConfig) -> Self {
        ClassifierConfig {
            input_dim,
            capacity,
            only_on_error: true,
            margin: 0.0,
            core,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub confidence: f64,
}

/// One-node-per-label supervised classifier.
///
/// Node `k` owns core row `k`; with a bias synapse the row starts with it
/// and input `i` sits at column `i + 1`.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    core: Core,
    input_dim: usize,
    capacity: usize,
    only_on_error: bool,
    margin: f64,
    labels: Vec<String>,
    nodes: Vec<NodeId>,
    stats: Vec<RunningStats>,
}

impl ClassifierModel {
    pub fn new(config: ClassifierConfig) -> Result<Self, LearnError> {
        if config.input_dim == 0 {
            return Err(LearnError::NoInputs);
        }
        if !(config.margin >= 0.0 && config.margin.is_finite()) {
            return Err(LearnError::InvalidSettings(format!(
                "margin must be finite and >= 0, got {}",
                config.margin
            )));
        }
        if config.capacity == 0 {
            return Err(LearnError::InvalidSettings("capacity must be >= 1".into()));
        }
        let mut core_cfg = config.core;
        core_cfg.rows = config.capacity as u32;
        core_cfg.cols = (config.input_dim + usize::from(core_cfg.bias)) as u32;
        Ok(ClassifierModel {
            core: Core::new(core_cfg)?,
            input_dim: config.input_dim,
            capacity: config.capacity,
            only_on_error: config.only_on_error,
            margin: config.margin,
            labels: Vec::new(),
            nodes: Vec::new(),
            stats: Vec::new(),
        })
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    /// Mutable core access, e.g. to stage synapse states directly.
    pub fn core_mut(&mut self) -> &mut Core {
        &mut self.core
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn only_on_error(&self) -> bool {
        self.only_on_error
    }

    pub fn set_only_on_error(&mut self, on: bool) {
        self.only_on_error = on;
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Labels in registration order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_of(&self, label: &str) -> Option<NodeId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.nodes[i])
    }

    /// Activation statistics gathered while fitting.
    pub fn train_stats(&self, label: &str) -> Option<&RunningStats> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.stats[i])
    }

    fn cols(&self) -> usize {
        self.core.config().cols as usize
    }

    fn offset(&self) -> usize {
        usize::from(self.core.config().bias)
    }

    /// Core address of input `input` on label slot `slot`.
    pub fn address(&self, slot: usize, input: usize) -> usize {
        slot * self.cols() + self.offset() + input
    }

    fn node_spikes(&self, slot: usize, spikes: &SpikeSet) -> SpikeSet {
        SpikeSet::new(spikes.addresses().iter().map(|&i| self.address(slot, i)))
            .with_bias(spikes.bias)
    }

    /// Returns the slot of `label`, allocating a node for it when new.
    pub fn register(&mut self, label: &str) -> Result<usize, LearnError> {
        if let Some(slot) = self.labels.iter().position(|l| l == label) {
            return Ok(slot);
        }
        let slot = self.labels.len();
        if slot >= self.capacity {
            return Err(LearnError::CapacityExceeded(self.capacity));
        }
        let row = slot * self.cols();
        let node = self.core.alloc_node(row..row + self.cols())?;
        self.labels.push(label.to_string());
        self.nodes.push(node);
        self.stats.push(RunningStats::new());
        Ok(slot)
    }

    /// One supervised step: nodes of `true_labels` are written up, every
    /// other node down. With `only_on_error`, nodes whose activation is
    /// already on the right side of zero (zero counts as positive), by at
    /// least the margin, only receive the read. Returns each node's
    /// activation in label order.
    pub fn fit_step<S: AsRef<str>>(
        &mut self,
        spikes: &SpikeSet,
        true_labels: &[S],
    ) -> Result<Vec<f64>, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        for label in true_labels {
            self.register(label.as_ref())?;
        }
        let mut out = Vec::with_capacity(self.labels.len());
        for slot in 0..self.labels.len() {
            let positive = true_labels.iter().any(|l| l.as_ref() == self.labels[slot]);
            let node_spikes = self.node_spikes(slot, spikes);
            let node = self.nodes[slot];
            let instr = if self.only_on_error {
                let y = self.core.activation(node, &node_spikes)?;
                let m = self.margin;
                let correct = if positive { y >= m } else { y < -m };
                match (correct, positive) {
                    (true, _) => Instruction::FZ,
                    (false, true) => Instruction::FH,
                    (false, false) => Instruction::FL,
                }
            } else if positive {
                Instruction::FH
            } else {
                Instruction::FL
            };
            let y = self.core.execute(node, &node_spikes, instr)?;
            self.stats[slot].push(y);
            out.push(y);
        }
        Ok(out)
    }

    fn ranked(&self, mut scored: Vec<Prediction>) -> Vec<Prediction> {
        scored.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then_with(|| a.label.cmp(&b.label))
        });
        scored
    }

    /// Labels ranked by descending confidence (weight sum over the spiked
    /// synapses), ties broken lexicographically. Does not touch the core.
    pub fn predict(&self, spikes: &SpikeSet) -> Result<Vec<Prediction>, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        if self.labels.is_empty() {
            return Err(LearnError::NoLabels);
        }
        let scored = (0..self.labels.len())
            .map(|slot| {
                let confidence = self
                    .core
                    .activation(self.nodes[slot], &self.node_spikes(slot, spikes))?;
                Ok(Prediction {
                    label: self.labels[slot].clone(),
                    confidence,
                })
            })
            .collect::<Result<Vec<_>, LearnError>>()?;
        Ok(self.ranked(scored))
    }

    /// Like [`predict`](Self::predict) but reads each node with `FZ`, as
    /// the physical chip would, so the read disturbance lands in the core.
    pub fn predict_with_reads(&mut self, spikes: &SpikeSet) -> Result<Vec<Prediction>, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        if self.labels.is_empty() {
            return Err(LearnError::NoLabels);
        }
        let mut scored = Vec::with_capacity(self.labels.len());
        for slot in 0..self.labels.len() {
            let node_spikes = self.node_spikes(slot, spikes);
            let confidence = self
                .core
                .execute(self.nodes[slot], &node_spikes, Instruction::FZ)?;
            scored.push(Prediction {
                label: self.labels[slot].clone(),
                confidence,
            });
        }
        Ok(self.ranked(scored))
    }

    /// Serializes the model as a core state image plus a key=value header.
    pub fn save(&self) -> (Vec<u8>, String) {
        let mut doc = Document::new();
        let root = doc.section_mut("classifier");
        root.set("input_dim", self.input_dim);
        root.set("capacity", self.capacity);
        root.set("only_on_error", self.only_on_error);
        root.set("margin", self.margin);
        root.set("labels", self.labels.len());
        for (slot, label) in self.labels.iter().enumerate() {
            let s = doc.section_mut(&format!("label.{slot}"));
            s.set("name", label);
            s.set("node", self.nodes[slot].0);
            s.set("count", self.stats[slot].count());
            s.set("mean", self.stats[slot].mean());
            s.set("m2", self.stats[slot].m2());
        }
        (save_state(&self.core), doc.to_string())
    }

    pub fn load(state: &[u8], header: &str) -> Result<Self, LearnError> {
        let core = load_state(state)?;
        let doc: Document = header.parse()?;
        let root = doc.require_section("classifier")?;
        let input_dim: usize = root.parse("input_dim")?;
        let capacity: usize = root.parse("capacity")?;
        let count: usize = root.parse("labels")?;
        let expected_cols = input_dim + usize::from(core.config().bias);
        if core.config().cols as usize != expected_cols || core.config().rows as usize != capacity {
            return Err(LearnError::Header(
                "core geometry does not match input_dim and capacity".into(),
            ));
        }
        let mut model = ClassifierModel {
            core,
            input_dim,
            capacity,
            only_on_error: root.parse("only_on_error")?,
            margin: root.parse_opt("margin")?.unwrap_or(0.0),
            labels: Vec::with_capacity(count),
            nodes: Vec::with_capacity(count),
            stats: Vec::with_capacity(count),
        };
        for slot in 0..count {
            let s = doc.require_section(&format!("label.{slot}"))?;
            let node = NodeId(s.parse("node")?);
            if model.core.node(node).is_none() {
                return Err(LearnError::Header(format!(
                    "label.{slot}: unknown node {node}"
                )));
            }
            model.labels.push(s.require("name")?.to_string());
            model.nodes.push(node);
            model.stats.push(RunningStats::from_parts(
                s.parse("count")?,
                s.parse("mean")?,
                s.parse("m2")?,
            ));
        }
        Ok(model)
    }
}
