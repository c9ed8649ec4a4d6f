use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::keyvalue::Document;
use crate::ktcore::{load_state, save_state, Core, CoreConfig, Instruction, NodeId, SpikeSet};

use super::{check_inputs, LearnError};

/// Stream of the allocation RNG, kept apart from the core's stream 0.
const SUBSET_STREAM: u64 = 1;

/// Ensemble of FU-trained nodes, each wired to its own random subset of the
/// inputs; the sign pattern of their activations is the cluster signature.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    core: Core,
    input_dim: usize,
    nodes: Vec<NodeId>,
    /// Sorted input indices seen by each node.
    subsets: Vec<Vec<usize>>,
}

impl ClusterModel {
    /// `ensemble` nodes over `subset_size` inputs each. Subsets are drawn
    /// uniformly without replacement from a stream seeded by `core.seed`.
    pub fn new(
        input_dim: usize,
        ensemble: usize,
        subset_size: usize,
        core: CoreConfig,
    ) -> Result<Self, LearnError> {
        if input_dim == 0 {
            return Err(LearnError::NoInputs);
        }
        if ensemble == 0 {
            return Err(LearnError::InvalidSettings(
                "ensemble size must be >= 1".into(),
            ));
        }
        if subset_size == 0 || subset_size > input_dim {
            return Err(LearnError::InvalidSettings(format!(
                "subset size {subset_size} not in 1..={input_dim}"
            )));
        }
        let mut cfg = core;
        cfg.rows = ensemble as u32;
        cfg.cols = (subset_size + usize::from(cfg.bias)) as u32;
        let mut core = Core::new(cfg)?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(SUBSET_STREAM);
        let cols = cfg.cols as usize;
        let mut nodes = Vec::with_capacity(ensemble);
        let mut subsets = Vec::with_capacity(ensemble);
        for k in 0..ensemble {
            let mut subset = sample(&mut rng, input_dim, subset_size).into_vec();
            subset.sort_unstable();
            subsets.push(subset);
            nodes.push(core.alloc_node(k * cols..(k + 1) * cols)?);
        }
        Ok(ClusterModel {
            core,
            input_dim,
            nodes,
            subsets,
        })
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// The spikes node `k` sees, or `None` when it sees none and has no bias.
    fn node_spikes(&self, k: usize, spikes: &SpikeSet) -> Option<SpikeSet> {
        let cols = self.core.config().cols as usize;
        let off = usize::from(self.core.config().bias);
        let subset = &self.subsets[k];
        let local = spikes
            .addresses()
            .iter()
            .filter_map(|i| subset.binary_search(i).ok())
            .map(|j| k * cols + off + j);
        let set = SpikeSet::new(local).with_bias(spikes.bias && off == 1);
        if set.is_empty() {
            (off == 1).then(SpikeSet::bias_only)
        } else {
            Some(set)
        }
    }

    /// Runs FU on every node. Nodes that see none of the spiked inputs are
    /// driven by their bias synapse alone, or skipped without one.
    pub fn fit(&mut self, spikes: &SpikeSet) -> Result<(), LearnError> {
        check_inputs(spikes, self.input_dim)?;
        for k in 0..self.nodes.len() {
            if let Some(local) = self.node_spikes(k, spikes) {
                self.core.execute(self.nodes[k], &local, Instruction::FU)?;
            }
        }
        Ok(())
    }

    /// Non-mutating activations, one per node (0 for a node with no input).
    pub fn activations(&self, spikes: &SpikeSet) -> Result<Vec<f64>, LearnError> {
        check_inputs(spikes, self.input_dim)?;
        (0..self.nodes.len())
            .map(|k| match self.node_spikes(k, spikes) {
                Some(local) => Ok(self.core.activation(self.nodes[k], &local)?),
                None => Ok(0.0),
            })
            .collect()
    }

    /// Sign bits of the activations, `y >= 0` mapping to `true`.
    pub fn signature(&self, spikes: &SpikeSet) -> Result<Vec<bool>, LearnError> {
        Ok(self
            .activations(spikes)?
            .into_iter()
            .map(|y| y >= 0.0)
            .collect())
    }

    pub fn save(&self) -> (Vec<u8>, String) {
        let mut doc = Document::new();
        let s = doc.section_mut("cluster");
        s.set("input_dim", self.input_dim);
        s.set("ensemble", self.nodes.len());
        for (k, subset) in self.subsets.iter().enumerate() {
            let list: Vec<String> = subset.iter().map(|i| i.to_string()).collect();
            let s = doc.section_mut(&format!("node.{k}"));
            s.set("id", self.nodes[k].0);
            s.set("inputs", list.join(" "));
        }
        (save_state(&self.core), doc.to_string())
    }

    pub fn load(state: &[u8], header: &str) -> Result<Self, LearnError> {
        let core = load_state(state)?;
        let doc: Document = header.parse()?;
        let s = doc.require_section("cluster")?;
        let input_dim: usize = s.parse("input_dim")?;
        let ensemble: usize = s.parse("ensemble")?;
        let width = core.config().cols as usize - usize::from(core.config().bias);
        let mut nodes = Vec::with_capacity(ensemble);
        let mut subsets = Vec::with_capacity(ensemble);
        for k in 0..ensemble {
            let s = doc.require_section(&format!("node.{k}"))?;
            let id = NodeId(s.parse("id")?);
            if core.node(id).is_none() {
                return Err(LearnError::Header(format!("node.{k}: unknown node {id}")));
            }
            let subset = s
                .require("inputs")?
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| LearnError::Header(format!("node.{k}: {e}")))?;
            if subset.len() != width
                || subset.windows(2).any(|w| w[0] >= w[1])
                || subset.iter().any(|&i| i >= input_dim)
            {
                return Err(LearnError::Header(format!("node.{k}: bad input list")));
            }
            nodes.push(id);
            subsets.push(subset);
        }
        Ok(ClusterModel {
            core,
            input_dim,
            nodes,
            subsets,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{preset_params, Variant};

    fn cfg(seed: u64) -> CoreConfig {
        CoreConfig::new(1, 1, preset_params(Variant::W)).with_seed(seed)
    }

    #[test]
    fn single_node_signature() {
        let m = ClusterModel::new(8, 1, 4, cfg(1)).unwrap();
        assert_eq!(m.signature(&SpikeSet::new([0, 7])).unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(ClusterModel::new(8, 0, 4, cfg(1)).is_err());
        assert!(ClusterModel::new(8, 2, 9, cfg(1)).is_err());
        assert!(ClusterModel::new(0, 2, 1, cfg(1)).is_err());
    }

    #[test]
    fn subsets_are_seeded_and_in_range() {
        let a = ClusterModel::new(20, 6, 5, cfg(9)).unwrap();
        let b = ClusterModel::new(20, 6, 5, cfg(9)).unwrap();
        assert_eq!(a.subsets(), b.subsets());
        for s in a.subsets() {
            assert_eq!(s.len(), 5);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 20));
        }
        let c = ClusterModel::new(20, 6, 5, cfg(10)).unwrap();
        assert_ne!(a.subsets(), c.subsets());
    }

    #[test]
    fn signature_is_read_only() {
        let mut m = ClusterModel::new(10, 4, 5, cfg(2)).unwrap();
        for i in 0..10 {
            m.fit(&SpikeSet::new([i % 10, (i + 3) % 10])).unwrap();
        }
        let before = save_state(m.core());
        let x = SpikeSet::new([1, 4, 8]);
        assert_eq!(m.signature(&x).unwrap(), m.signature(&x).unwrap());
        assert_eq!(save_state(m.core()), before);
    }

    #[test]
    fn round_trip() {
        let mut m = ClusterModel::new(12, 3, 4, cfg(5)).unwrap();
        m.fit(&SpikeSet::new([0, 1, 2, 3, 4, 5])).unwrap();
        let (state, header) = m.save();
        let back = ClusterModel::load(&state, &header).unwrap();
        assert_eq!(back.subsets(), m.subsets());
        let x = SpikeSet::new([2, 9, 11]);
        assert_eq!(back.activations(&x), m.activations(&x));
    }
}
