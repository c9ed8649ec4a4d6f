//! Differential synapse: two memristors in series used as a voltage divider.
//!
//! The weight is the normalized conductance imbalance
//! `w = (G_a - G_b) / (G_a + G_b)`, which lies strictly inside (-1, 1)
//! because every device keeps a non-zero OFF conductance.

use rand::Rng;

use crate::device::{DeviceError, DeviceParams, DeviceState, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Forward read: both devices pushed towards ON.
    F,
    /// Reverse read: both devices pushed towards OFF.
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadResult {
    /// Weight before the read pulse disturbed the pair.
    pub weight: f64,
    /// Voltage dropped across device A.
    pub v_a: f64,
    /// Voltage dropped across device B.
    pub v_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub a: DeviceState,
    pub b: DeviceState,
}

impl Synapse {
    pub fn new(a: DeviceState, b: DeviceState) -> Self {
        Synapse { a, b }
    }

    pub fn from_fractions(mode: Mode, n_a: f64, n_b: f64, params: &DeviceParams) -> Self {
        Synapse {
            a: DeviceState::with_fraction(mode, n_a, params),
            b: DeviceState::with_fraction(mode, n_b, params),
        }
    }

    pub fn conductances(&self, params: &DeviceParams) -> (f64, f64) {
        (self.a.conductance(params), self.b.conductance(params))
    }

    pub fn weight(&self, params: &DeviceParams) -> f64 {
        let (ga, gb) = self.conductances(params);
        (ga - gb) / (ga + gb)
    }

    /// Divider shares `(v_a, v_b)` of a voltage applied across the pair.
    /// The lower-conductance device drops the larger share.
    pub fn divider(&self, params: &DeviceParams, volts: f64) -> (f64, f64) {
        let (ga, gb) = self.conductances(params);
        let total = ga + gb;
        (volts * gb / total, volts * ga / total)
    }

    /// Read pulse across the pair. The reported weight is taken before the
    /// pulse; the returned synapse carries the read disturbance.
    ///
    /// A forward read drives each device towards ON by its divider share,
    /// so the weaker device moves more and the pair drifts towards `w = 0`.
    /// A reverse read applies the same shares towards OFF.
    pub fn read<R: Rng + ?Sized>(
        self,
        params: &DeviceParams,
        polarity: Polarity,
        v_read: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<(ReadResult, Synapse), DeviceError> {
        let weight = self.weight(params);
        let (v_a, v_b) = self.divider(params, v_read);
        let sign = match polarity {
            Polarity::F => 1.0,
            Polarity::R => -1.0,
        };
        let a = self.a.apply_pulse(params, sign * v_a, dt, rng)?;
        let b = self.b.apply_pulse(params, sign * v_b, dt, rng)?;
        Ok((ReadResult { weight, v_a, v_b }, Synapse { a, b }))
    }

    /// Write pulse across a single device: `Up` drives A towards ON, `Down`
    /// drives B towards ON.
    pub fn write<R: Rng + ?Sized>(
        self,
        params: &DeviceParams,
        direction: Direction,
        v_write: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Synapse, DeviceError> {
        Ok(match direction {
            Direction::Up => Synapse {
                a: self.a.apply_pulse(params, v_write, dt, rng)?,
                ..self
            },
            Direction::Down => Synapse {
                b: self.b.apply_pulse(params, v_write, dt, rng)?,
                ..self
            },
        })
    }
}
