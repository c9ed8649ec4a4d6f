//! Bit-exact core state image.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic            6 bytes  "KTRAM1"
//! version          u16
//! rows, cols       u32, u32
//! params           n_switches u32, w_on w_off v_on v_off tau beta f64
//! v_read v_write t_pulse   f64
//! renorm_interval  u32
//! mode             u8   (0 = mean-field, 1 = stochastic)
//! seed             u64
//! bias             u8
//! synapses         rows*cols x (n_a f64, n_b f64)  mean-field
//!                  rows*cols x (on_a u32, on_b u32) stochastic
//! next_node        u32
//! node_count       u32
//! per node         id u32, op_counter u32, has_bias u8, len u32, len x address u32
//! rng_position     u64  (word position of the core's ChaCha8 stream)
//! crc32            u32  over every preceding byte
//! ```

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AhahNode, Core, CoreConfig, NodeId};
use crate::device::{DeviceParams, DeviceState, Mode};
use crate::synapse::Synapse;

pub const MAGIC: &[u8; 6] = b"KTRAM1";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PersistError {
    #[error("not a core state image (bad magic {0:02x?})")]
    BadMagic(Vec<u8>),
    #[error("unsupported state format version {found} (this build reads {supported})")]
    Version { found: u16, supported: u16 },
    #[error("state image truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("state image checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("state image has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("state image is inconsistent: {0}")]
    Corrupt(String),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_state(core: &Core) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(64 + core.size() * 16));
    w.0.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);

    let c = &core.config;
    w.u32(c.rows);
    w.u32(c.cols);
    let p = &c.params;
    w.u32(p.n_switches);
    for v in [p.w_on, p.w_off, p.v_on, p.v_off, p.tau, p.beta] {
        w.f64(v);
    }
    w.f64(c.v_read);
    w.f64(c.v_write);
    w.f64(c.t_pulse);
    w.u32(c.renorm_interval);
    w.u8(match c.mode {
        Mode::MeanField => 0,
        Mode::Stochastic => 1,
    });
    w.u64(c.seed);
    w.u8(u8::from(c.bias));

    for syn in &core.synapses {
        for dev in [syn.a, syn.b] {
            match dev {
                DeviceState::MeanField { on_fraction } => w.f64(on_fraction),
                DeviceState::Stochastic { on_count } => w.u32(on_count),
            }
        }
    }

    w.u32(core.next_node);
    w.u32(core.nodes.len() as u32);
    for node in core.nodes.values() {
        w.u32(node.id.0);
        w.u32(node.op_counter);
        w.u8(u8::from(node.bias.is_some()));
        w.u32(node.allocation.len() as u32);
        for &a in &node.allocation {
            w.u32(a as u32);
        }
    }

    w.u64(core.rng.get_word_pos() as u64);
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(PersistError::Truncated {
                offset: self.bytes.len(),
                needed: n - remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        Ok(self.take(N)?.try_into().unwrap())
    }
    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, PersistError> {
        self.array().map(u16::from_le_bytes)
    }
    fn u32(&mut self) -> Result<u32, PersistError> {
        self.array().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64, PersistError> {
        self.array().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, PersistError> {
        self.array().map(f64::from_le_bytes)
    }
    /// Fails early when `count` records of `width` bytes cannot fit.
    fn expect_records(&self, count: usize, width: usize) -> Result<(), PersistError> {
        let remaining = self.bytes.len() - self.pos;
        let needed = count.saturating_mul(width);
        if needed > remaining {
            return Err(PersistError::Truncated {
                offset: self.bytes.len(),
                needed: needed - remaining,
            });
        }
        Ok(())
    }
}

fn corrupt(msg: impl Into<String>) -> PersistError {
    PersistError::Corrupt(msg.into())
}

pub fn load_state(bytes: &[u8]) -> Result<Core, PersistError> {
    let head = &bytes[..bytes.len().min(MAGIC.len())];
    if head != &MAGIC[..head.len()] {
        return Err(PersistError::BadMagic(head.to_vec()));
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(MAGIC.len())?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(PersistError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    let rows = r.u32()?;
    let cols = r.u32()?;
    let params = DeviceParams {
        n_switches: r.u32()?,
        w_on: r.f64()?,
        w_off: r.f64()?,
        v_on: r.f64()?,
        v_off: r.f64()?,
        tau: r.f64()?,
        beta: r.f64()?,
    };
    let v_read = r.f64()?;
    let v_write = r.f64()?;
    let t_pulse = r.f64()?;
    let renorm_interval = r.u32()?;
    let mode = match r.u8()? {
        0 => Mode::MeanField,
        1 => Mode::Stochastic,
        other => return Err(corrupt(format!("unknown mode tag {other}"))),
    };
    let seed = r.u64()?;
    let bias = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(corrupt(format!("bad bias flag {other}"))),
    };
    let config = CoreConfig {
        rows,
        cols,
        params,
        v_read,
        v_write,
        t_pulse,
        renorm_interval,
        mode,
        seed,
        bias,
    };

    let size = rows as usize * cols as usize;
    let width = match mode {
        Mode::MeanField => 16,
        Mode::Stochastic => 8,
    };
    r.expect_records(size, width)?;
    let mut synapses = Vec::with_capacity(size);
    for _ in 0..size {
        let syn = match mode {
            Mode::MeanField => Synapse::new(
                DeviceState::MeanField {
                    on_fraction: r.f64()?,
                },
                DeviceState::MeanField {
                    on_fraction: r.f64()?,
                },
            ),
            Mode::Stochastic => Synapse::new(
                DeviceState::Stochastic { on_count: r.u32()? },
                DeviceState::Stochastic { on_count: r.u32()? },
            ),
        };
        synapses.push(syn);
    }

    let next_node = r.u32()?;
    let node_count = r.u32()? as usize;
    r.expect_records(node_count, 13)?;
    let mut raw_nodes = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let id = r.u32()?;
        let op_counter = r.u32()?;
        let has_bias = r.u8()?;
        let len = r.u32()? as usize;
        r.expect_records(len, 4)?;
        let allocation = (0..len)
            .map(|_| r.u32().map(|a| a as usize))
            .collect::<Result<Vec<_>, _>>()?;
        raw_nodes.push((id, op_counter, has_bias, allocation));
    }
    let rng_position = r.u64()?;
    let body_end = r.pos;
    let stored = r.u32()?;
    if r.pos != bytes.len() {
        return Err(PersistError::TrailingBytes(bytes.len() - r.pos));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(PersistError::Checksum { stored, computed });
    }

    // checksum passed; remaining failures are semantic
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    for syn in &synapses {
        for dev in [syn.a, syn.b] {
            let ok = match dev {
                DeviceState::MeanField { on_fraction } => (0.0..=1.0).contains(&on_fraction),
                DeviceState::Stochastic { on_count } => on_count <= params.n_switches,
            };
            if !ok {
                return Err(corrupt(format!("device state {dev:?} out of range")));
            }
        }
    }

    let mut owner = vec![None; size];
    let mut nodes = BTreeMap::new();
    for (id, op_counter, has_bias, allocation) in raw_nodes {
        let id = NodeId(id);
        if id.0 >= next_node || nodes.contains_key(&id) {
            return Err(corrupt(format!("bad node id {id}")));
        }
        if allocation.is_empty() || allocation.windows(2).any(|w| w[0] >= w[1]) {
            return Err(corrupt(format!(
                "node {id} allocation is not sorted and non-empty"
            )));
        }
        for &a in &allocation {
            match owner.get_mut(a) {
                Some(slot @ None) => *slot = Some(id),
                Some(Some(_)) => return Err(corrupt(format!("address {a} owned twice"))),
                None => return Err(corrupt(format!("address {a} out of range"))),
            }
        }
        let bias = match has_bias {
            0 => None,
            1 => Some(allocation[0]),
            other => return Err(corrupt(format!("bad node bias flag {other}"))),
        };
        if op_counter >= renorm_interval {
            return Err(corrupt(format!(
                "node {id} op counter past renorm interval"
            )));
        }
        nodes.insert(
            id,
            AhahNode {
                id,
                allocation,
                bias,
                op_counter,
            },
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(rng_position as u128);

    Ok(Core {
        config,
        synapses,
        owner,
        nodes,
        next_node,
        rng,
    })
}
