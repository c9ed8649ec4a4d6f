//! Emulated co-processor core: a row-major array of differential synapses,
//! nodes built by coupling disjoint sets of synapse addresses, and the
//! two-phase (read, then feedback) instruction cycle.

mod isa;
mod persist;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::device::{DeviceError, DeviceParams, DeviceState, Mode, PulseLimits};
use crate::synapse::{Direction, Polarity, Synapse};

pub use isa::{Feedback, Instruction, ParseInstructionError};
pub use persist::{load_state, save_state, PersistError, FORMAT_VERSION, MAGIC};

/// Half-width of the uniform spread around 0.5 used to initialize every
/// device's ON fraction.
pub const INIT_SPREAD: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoreError {
    #[error("invalid core config: {0}")]
    InvalidConfig(String),
    #[error("address {address} out of range for a core of {size} synapses")]
    AddressOutOfRange { address: usize, size: usize },
    #[error("address {address} already belongs to node {owner}")]
    AddressOwned { address: usize, owner: NodeId },
    #[error("node allocation must contain at least one address")]
    EmptyAllocation,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("spike set is empty")]
    EmptySpikes,
    #[error("address {address} is not allocated to node {node}")]
    ForeignAddress { address: usize, node: NodeId },
    #[error("spike set requests the bias line but node {0} has no bias synapse")]
    NoBias(NodeId),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreConfig {
    pub rows: u32,
    pub cols: u32,
    pub params: DeviceParams,
    /// Read pulse amplitude, volts.
    pub v_read: f64,
    /// Write pulse amplitude, volts.
    pub v_write: f64,
    /// Pulse width for reads and writes, seconds.
    pub t_pulse: f64,
    /// Node operations between reverse-read renormalizations.
    pub renorm_interval: u32,
    pub mode: Mode,
    pub seed: u64,
    /// Reserve each node's lowest address as an always-active bias synapse.
    pub bias: bool,
}

impl CoreConfig {
    pub const DEFAULT_V_READ: f64 = 0.2;
    pub const DEFAULT_V_WRITE: f64 = 0.8;
    pub const DEFAULT_T_PULSE: f64 = 50e-9;
    pub const DEFAULT_RENORM_INTERVAL: u32 = 100;
    pub const DEFAULT_SEED: u64 = 42;

    pub fn new(rows: u32, cols: u32, params: DeviceParams) -> Self {
        CoreConfig {
            rows,
            cols,
            params,
            v_read: Self::DEFAULT_V_READ,
            v_write: Self::DEFAULT_V_WRITE,
            t_pulse: Self::DEFAULT_T_PULSE,
            renorm_interval: Self::DEFAULT_RENORM_INTERVAL,
            mode: Mode::MeanField,
            seed: Self::DEFAULT_SEED,
            bias: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn size(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |msg: String| Err(CoreError::InvalidConfig(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!(
                "rows * cols must be >= 1, got {} x {}",
                self.rows, self.cols
            ));
        }
        if (self.rows as u64) * (self.cols as u64) > u32::MAX as u64 {
            return bad("rows * cols must fit in 32-bit addresses".into());
        }
        self.params
            .validate()
            .map_err(|e| CoreError::InvalidConfig(e.to_string()))?;
        if !(self.v_read > 0.0) {
            return bad(format!("v_read must be > 0, got {}", self.v_read));
        }
        if !(self.v_read < self.v_write) {
            return bad(format!(
                "v_read must be below v_write, got v_read = {} and v_write = {}",
                self.v_read, self.v_write
            ));
        }
        let limits = PulseLimits::default();
        for v in [self.v_read, self.v_write] {
            limits
                .check(v, self.t_pulse)
                .map_err(|e| CoreError::InvalidConfig(e.to_string()))?;
        }
        if self.renorm_interval == 0 {
            return bad("renorm_interval must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Active synapse addresses presented to a node in one operation.
///
/// `bias` marks a set that asks for the bias line. A node with a bias
/// synapse includes it in every operation regardless; the flag matters for
/// sets with no other addresses, which are accepted only when it is set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SpikeSet {
    addresses: Vec<usize>,
    pub bias: bool,
}

impl SpikeSet {
    pub fn new(addresses: impl IntoIterator<Item = usize>) -> Self {
        let mut addresses: Vec<usize> = addresses.into_iter().collect();
        addresses.sort_unstable();
        addresses.dedup();
        SpikeSet {
            addresses,
            bias: false,
        }
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn bias_only() -> Self {
        SpikeSet {
            addresses: Vec::new(),
            bias: true,
        }
    }

    /// Sorted, de-duplicated addresses (bias not included).
    pub fn addresses(&self) -> &[usize] {
        &self.addresses
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty() && !self.bias
    }

    pub fn len(&self) -> usize {
        self.addresses.len() + usize::from(self.bias)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AhahNode {
    pub id: NodeId,
    allocation: Vec<usize>,
    bias: Option<usize>,
    op_counter: u32,
}

impl AhahNode {
    /// Sorted synapse addresses owned by this node, bias included.
    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn bias_address(&self) -> Option<usize> {
        self.bias
    }

    pub fn op_counter(&self) -> u32 {
        self.op_counter
    }

    fn owns(&self, address: usize) -> bool {
        self.allocation.binary_search(&address).is_ok()
    }
}

#[derive(Debug, Clone)]
pub struct Core {
    config: CoreConfig,
    synapses: Vec<Synapse>,
    owner: Vec<Option<NodeId>>,
    nodes: BTreeMap<NodeId, AhahNode>,
    next_node: u32,
    rng: ChaCha8Rng,
}

impl Core {
    /// Builds a core with every device at ON fraction `0.5 + u`,
    /// `u ~ U(-INIT_SPREAD, INIT_SPREAD)` drawn in address order from the
    /// seeded stream (device A before device B).
    pub fn new(config: CoreConfig) -> Result<Core, CoreError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = config.params;
        let draw = |rng: &mut ChaCha8Rng| {
            let n = 0.5 + rng.random_range(-INIT_SPREAD..INIT_SPREAD);
            DeviceState::with_fraction(config.mode, n, &params)
        };
        let synapses = (0..config.size())
            .map(|_| {
                let a = draw(&mut rng);
                let b = draw(&mut rng);
                Synapse::new(a, b)
            })
            .collect();
        Ok(Core {
            config,
            synapses,
            owner: vec![None; config.size()],
            nodes: BTreeMap::new(),
            next_node: 0,
            rng,
        })
    }

    pub fn config(&self) -> &CoreConfig {
        &self.config
    }

    pub fn params(&self) -> &DeviceParams {
        &self.config.params
    }

    /// Changes the pulse width used by subsequent reads and writes.
    pub fn set_pulse_width(&mut self, t_pulse: f64) -> Result<(), CoreError> {
        let mut next = self.config;
        next.t_pulse = t_pulse;
        next.validate()?;
        self.config = next;
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.synapses.len()
    }

    pub fn synapse(&self, address: usize) -> Option<&Synapse> {
        self.synapses.get(address)
    }

    /// Overwrites one synapse, e.g. to stage a known weight pattern.
    pub fn set_synapse(&mut self, address: usize, synapse: Synapse) -> Result<(), CoreError> {
        let size = self.size();
        let slot = self
            .synapses
            .get_mut(address)
            .ok_or(CoreError::AddressOutOfRange { address, size })?;
        *slot = synapse;
        Ok(())
    }

    pub fn weight(&self, address: usize) -> Option<f64> {
        self.synapses
            .get(address)
            .map(|s| s.weight(&self.config.params))
    }

    pub fn node(&self, id: NodeId) -> Option<&AhahNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AhahNode> {
        self.nodes.values()
    }

    pub fn owner_of(&self, address: usize) -> Option<NodeId> {
        self.owner.get(address).copied().flatten()
    }

    /// Word position of the core's random stream.
    pub fn rng_position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Couples the given addresses into a new node. With `config.bias` set,
    /// the lowest requested address becomes the node's bias synapse.
    pub fn alloc_node(
        &mut self,
        addresses: impl IntoIterator<Item = usize>,
    ) -> Result<NodeId, CoreError> {
        let mut allocation: Vec<usize> = addresses.into_iter().collect();
        allocation.sort_unstable();
        allocation.dedup();
        if allocation.is_empty() {
            return Err(CoreError::EmptyAllocation);
        }
        let size = self.size();
        for &address in &allocation {
            match self.owner.get(address) {
                None => return Err(CoreError::AddressOutOfRange { address, size }),
                Some(Some(owner)) => {
                    return Err(CoreError::AddressOwned {
                        address,
                        owner: *owner,
                    })
                }
                Some(None) => {}
            }
        }
        let id = NodeId(self.next_node);
        self.next_node += 1;
        for &address in &allocation {
            self.owner[address] = Some(id);
        }
        let bias = self.config.bias.then(|| allocation[0]);
        self.nodes.insert(
            id,
            AhahNode {
                id,
                allocation,
                bias,
                op_counter: 0,
            },
        );
        Ok(id)
    }

    /// Releases a node's addresses. Synapse states are left as they are.
    pub fn free_node(&mut self, id: NodeId) -> Result<(), CoreError> {
        let node = self.nodes.remove(&id).ok_or(CoreError::UnknownNode(id))?;
        for address in node.allocation {
            self.owner[address] = None;
        }
        Ok(())
    }

    fn effective_spikes(&self, id: NodeId, spikes: &SpikeSet) -> Result<Vec<usize>, CoreError> {
        let node = self.nodes.get(&id).ok_or(CoreError::UnknownNode(id))?;
        if spikes.is_empty() {
            return Err(CoreError::EmptySpikes);
        }
        if let Some(&address) = spikes.addresses().iter().find(|&&a| !node.owns(a)) {
            return Err(CoreError::ForeignAddress { address, node: id });
        }
        if spikes.bias && node.bias.is_none() {
            return Err(CoreError::NoBias(id));
        }
        let mut active = spikes.addresses().to_vec();
        if let Some(bias) = node.bias {
            if let Err(pos) = active.binary_search(&bias) {
                active.insert(pos, bias);
            }
        }
        Ok(active)
    }

    /// Forward-read activation computed without disturbing any synapse.
    pub fn activation(&self, id: NodeId, spikes: &SpikeSet) -> Result<f64, CoreError> {
        let active = self.effective_spikes(id, spikes)?;
        let params = &self.config.params;
        Ok(active
            .iter()
            .map(|&a| self.synapses[a].weight(params))
            .sum())
    }

    /// Current weight of every synapse in the node's allocation.
    pub fn node_weights(&self, id: NodeId) -> Result<BTreeMap<usize, f64>, CoreError> {
        let node = self.nodes.get(&id).ok_or(CoreError::UnknownNode(id))?;
        let params = &self.config.params;
        Ok(node
            .allocation
            .iter()
            .map(|&a| (a, self.synapses[a].weight(params)))
            .collect())
    }

    /// Runs one instruction on a node and returns its activation.
    ///
    /// The activation is the sum of pre-read weights over the spiked
    /// synapses (bias included), negated for a reverse read. Every spiked
    /// synapse is then read with the instruction's polarity and written
    /// according to the feedback mode. After `renorm_interval` operations
    /// the node's whole allocation receives one reverse read.
    pub fn execute(
        &mut self,
        id: NodeId,
        spikes: &SpikeSet,
        instr: Instruction,
    ) -> Result<f64, CoreError> {
        let active = self.effective_spikes(id, spikes)?;
        let CoreConfig {
            params,
            v_read,
            v_write,
            t_pulse,
            renorm_interval,
            ..
        } = self.config;

        let sum: f64 = active
            .iter()
            .map(|&a| self.synapses[a].weight(&params))
            .sum();
        let y = match instr.read {
            Polarity::F => sum,
            Polarity::R => -sum,
        };

        for &a in &active {
            let (_, next) =
                self.synapses[a].read(&params, instr.read, v_read, t_pulse, &mut self.rng)?;
            self.synapses[a] = next;
        }

        let hebbian = if y >= 0.0 {
            Direction::Up
        } else {
            Direction::Down
        };
        let direction = match instr.feedback {
            Feedback::H => Some(Direction::Up),
            Feedback::L => Some(Direction::Down),
            Feedback::U => Some(hebbian),
            Feedback::A => Some(match hebbian {
                Direction::Up => Direction::Down,
                Direction::Down => Direction::Up,
            }),
            Feedback::Z => None,
        };
        if let Some(direction) = direction {
            for &a in &active {
                self.synapses[a] =
                    self.synapses[a].write(&params, direction, v_write, t_pulse, &mut self.rng)?;
            }
        }

        let node = self.nodes.get_mut(&id).expect("node checked above");
        node.op_counter += 1;
        if node.op_counter >= renorm_interval {
            node.op_counter = 0;
            for &a in &node.allocation {
                let (_, next) =
                    self.synapses[a].read(&params, Polarity::R, v_read, t_pulse, &mut self.rng)?;
                self.synapses[a] = next;
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{preset_params, Variant};

    fn config(rows: u32, cols: u32) -> CoreConfig {
        CoreConfig::new(rows, cols, preset_params(Variant::W))
    }

    fn fresh(rows: u32, cols: u32) -> Core {
        Core::new(config(rows, cols)).unwrap()
    }

    /// Largest |w| reachable from the init distribution: one device at the
    /// top of the spread, the other at the bottom.
    fn init_weight_bound() -> f64 {
        let p = preset_params(Variant::W);
        let lo = Synapse::from_fractions(Mode::MeanField, 0.5 - INIT_SPREAD, 0.5 + INIT_SPREAD, &p);
        let hi = Synapse::from_fractions(Mode::MeanField, 0.5 + INIT_SPREAD, 0.5 - INIT_SPREAD, &p);
        lo.weight(&p).abs().max(hi.weight(&p).abs())
    }

    #[test]
    fn init_bound_is_below_a_tenth() {
        let bound = init_weight_bound();
        assert!(bound < 0.1, "{bound}");
        let core = fresh(1, 1);
        assert_eq!(core.size(), 1);
        assert!(core.weight(0).unwrap().abs() < bound);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            Core::new(config(0, 4)),
            Err(CoreError::InvalidConfig(_))
        ));
        let mut c = config(2, 2);
        c.v_read = 0.9;
        assert!(Core::new(c).is_err());
        let mut c = config(2, 2);
        c.renorm_interval = 0;
        assert!(Core::new(c).is_err());
        let mut c = config(2, 2);
        c.t_pulse = 5e-3;
        assert!(Core::new(c)
            .unwrap_err()
            .to_string()
            .contains("operating regime"));
    }

    #[test]
    fn same_seed_same_initial_state() {
        let a = fresh(4, 8);
        let b = fresh(4, 8);
        assert!((0..32).all(|i| a.synapse(i) == b.synapse(i)));
        let c = Core::new(config(4, 8).with_seed(7)).unwrap();
        assert!((0..32).any(|i| a.synapse(i) != c.synapse(i)));
    }

    #[test]
    fn allocation_exclusivity() {
        let mut core = fresh(2, 4);
        let a = core.alloc_node([0, 1, 2]).unwrap();
        let b = core.alloc_node([3, 4]).unwrap();
        assert_ne!(a, b);
        assert_eq!(
            core.alloc_node([4, 5]),
            Err(CoreError::AddressOwned {
                address: 4,
                owner: b
            })
        );
        assert_eq!(
            core.alloc_node([8]),
            Err(CoreError::AddressOutOfRange {
                address: 8,
                size: 8
            })
        );
        assert_eq!(core.alloc_node([]), Err(CoreError::EmptyAllocation));
        core.free_node(a).unwrap();
        core.alloc_node([0, 1, 2, 5]).unwrap();
    }

    #[test]
    fn full_coupling_is_legal() {
        let mut core = fresh(3, 3);
        let id = core.alloc_node(0..9).unwrap();
        assert_eq!(core.node(id).unwrap().allocation().len(), 9);
        assert_eq!(core.node(id).unwrap().bias_address(), Some(0));
    }

    #[test]
    fn execute_rejects_bad_spikes() {
        let mut core = fresh(2, 4);
        let id = core.alloc_node(0..4).unwrap();
        let other = core.alloc_node(4..8).unwrap();
        assert_eq!(
            core.execute(id, &SpikeSet::default(), Instruction::FZ),
            Err(CoreError::EmptySpikes)
        );
        assert_eq!(
            core.execute(id, &SpikeSet::new([5]), Instruction::FZ),
            Err(CoreError::ForeignAddress {
                address: 5,
                node: id
            })
        );
        assert_eq!(
            core.execute(NodeId(99), &SpikeSet::new([1]), Instruction::FZ),
            Err(CoreError::UnknownNode(NodeId(99)))
        );
        core.free_node(other).unwrap();
        let mut nobias = config(1, 4);
        nobias.bias = false;
        let mut core = Core::new(nobias).unwrap();
        let id = core.alloc_node(0..4).unwrap();
        assert_eq!(
            core.execute(id, &SpikeSet::bias_only(), Instruction::FZ),
            Err(CoreError::NoBias(id))
        );
        assert!(core
            .execute(id, &SpikeSet::new([2]), Instruction::FZ)
            .is_ok());
    }

    #[test]
    fn bias_only_spikes_hit_the_bias_synapse() {
        let mut core = fresh(1, 4);
        let id = core.alloc_node(0..4).unwrap();
        let w0 = core.weight(0).unwrap();
        let y = core
            .execute(id, &SpikeSet::bias_only(), Instruction::FH)
            .unwrap();
        assert_eq!(y, w0);
        assert!(core.weight(0).unwrap() > w0);
    }

    #[test]
    fn fresh_sixteen_synapse_node_fz_is_small() {
        let mut core = fresh(1, 17);
        let id = core.alloc_node(0..17).unwrap();
        let y = core
            .execute(id, &SpikeSet::new(1..17), Instruction::FZ)
            .unwrap();
        assert!(17.0 * init_weight_bound() < 1.6);
        assert!(y.abs() < 1.6);
    }

    #[test]
    fn activation_matches_node_weight_sum() {
        let mut core = fresh(2, 8);
        let id = core.alloc_node(0..8).unwrap();
        let spikes = SpikeSet::new([2, 3, 7]);
        for instr in Instruction::ALL {
            let weights = core.node_weights(id).unwrap();
            let expected: f64 = [0, 2, 3, 7].iter().map(|a| weights[a]).sum();
            let y = core.execute(id, &spikes, instr).unwrap();
            let expected = if instr.read == Polarity::R {
                -expected
            } else {
                expected
            };
            assert!((y - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn node_weights_cover_allocation_and_do_not_mutate() {
        let mut core = fresh(2, 8);
        let id = core.alloc_node([3, 9, 12]).unwrap();
        let before = core.node_weights(id).unwrap();
        assert_eq!(before.keys().copied().collect::<Vec<_>>(), vec![3, 9, 12]);
        assert!(before.values().all(|w| w.abs() < 0.1));
        assert_eq!(core.node_weights(id).unwrap(), before);
        core.execute(id, &SpikeSet::new([9]), Instruction::FH)
            .unwrap();
        assert!(core.node_weights(id).unwrap()[&9] > before[&9]);
    }

    #[test]
    fn fz_twice_does_not_grow_activation() {
        let mut core = fresh(1, 16);
        let id = core.alloc_node(0..16).unwrap();
        let spikes = SpikeSet::new(1..16);
        for _ in 0..5 {
            core.execute(id, &spikes, Instruction::FH).unwrap();
        }
        let y1 = core.execute(id, &spikes, Instruction::FZ).unwrap();
        let y2 = core.execute(id, &spikes, Instruction::FZ).unwrap();
        assert!(y2.abs() <= y1.abs());
    }

    #[test]
    fn repeated_fh_is_monotone_and_bounded() {
        let mut core = fresh(1, 17);
        let id = core.alloc_node(0..17).unwrap();
        let spikes = SpikeSet::new(1..17);
        let mut prev = f64::NEG_INFINITY;
        for rep in 0..100 {
            let y = core.execute(id, &spikes, Instruction::FH).unwrap();
            assert!(y >= prev, "rep {rep}: {y} < {prev}");
            assert!(y <= (spikes.len() + 1) as f64);
            prev = y;
        }
    }

    #[test]
    fn feedback_modes_move_weights() {
        let spikes = SpikeSet::new([1, 2]);
        let run = |instr: Instruction| {
            let mut core = fresh(1, 4);
            let id = core.alloc_node(0..4).unwrap();
            let before = core.activation(id, &spikes).unwrap();
            let y = core.execute(id, &spikes, instr).unwrap();
            (before, y, core.activation(id, &spikes).unwrap())
        };
        let (before, _, after) = run(Instruction::FH);
        assert!(after > before);
        let (before, _, after) = run(Instruction::FL);
        assert!(after < before);
        let (_, y, after) = run(Instruction::FU);
        let (_, _, anti) = run(Instruction::FA);
        if y >= 0.0 {
            assert!(after > y && anti < y);
        } else {
            assert!(after < y && anti > y);
        }
    }

    #[test]
    fn renormalization_fires_on_interval() {
        let mut c = config(1, 8);
        c.renorm_interval = 3;
        let mut core = Core::new(c).unwrap();
        let id = core.alloc_node(0..8).unwrap();
        let spikes = SpikeSet::new([1]);
        core.execute(id, &spikes, Instruction::FZ).unwrap();
        core.execute(id, &spikes, Instruction::FZ).unwrap();
        assert_eq!(core.node(id).unwrap().op_counter(), 2);
        // address 5 is never spiked, so only the renormalization touches it
        let untouched = *core.synapse(5).unwrap();
        core.execute(id, &spikes, Instruction::FZ).unwrap();
        assert_eq!(core.node(id).unwrap().op_counter(), 0);
        let p = core.params();
        let (ga, gb) = untouched.conductances(p);
        let (ga2, gb2) = core.synapse(5).unwrap().conductances(p);
        assert!(ga2 + gb2 < ga + gb);
    }

    #[test]
    fn stochastic_core_is_seed_deterministic() {
        let run = || {
            let mut core = Core::new(config(1, 10).with_mode(Mode::Stochastic)).unwrap();
            let id = core.alloc_node(0..10).unwrap();
            let spikes = SpikeSet::new([2, 4, 6]);
            (0..20)
                .map(|_| core.execute(id, &spikes, Instruction::FU).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|y| y.is_finite()));
    }
}
