//! Metastable-switch memristor model.
//!
//! A memristor is modelled as an ensemble of `n_switches` two-state switches.
//! Each switch is either OFF (conductance `w_off`) or ON (`w_on`). During a
//! pulse of `v` volts lasting `dt` seconds an OFF switch turns ON with
//! probability
//!
//! ```text
//! p_on  = r * sigmoid(beta * (v - v_on))
//! p_off = r * sigmoid(beta * (-v - v_off))      r = clamp(dt / tau, 0, 1)
//! ```
//!
//! and an ON switch turns OFF with probability `p_off`. Positive voltage moves
//! the ensemble towards ON, negative voltage towards OFF.
//!
//! The ensemble is tracked either as a continuous ON fraction (mean-field) or
//! as an integer ON count updated with binomial draws (stochastic).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::keyvalue::{Document, KvError, Section};

pub const DEFAULT_N_SWITCHES: u32 = 1000;
/// Siemens per switch.
pub const DEFAULT_W_ON: f64 = 500e-9;
/// Siemens per switch.
pub const DEFAULT_W_OFF: f64 = 50e-9;

/// Preset records for the three device variants, produced by the
/// `calibrate_presets` example and frozen here.
pub const PRESET_FILE: &str = include_str!("../presets/devices.kv");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DeviceError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite pulse input (volts = {volts}, seconds = {seconds})")]
    NonFinite { volts: f64, seconds: f64 },
    #[error(
        "pulse of {volts} V for {seconds} s is outside the emulated operating regime \
         (|v| <= {max_volts} V, 0 < dt <= {max_seconds} s)"
    )]
    PulseOutOfRange {
        volts: f64,
        seconds: f64,
        max_volts: f64,
        max_seconds: f64,
    },
    #[error("unknown device variant `{0}` (valid: W, Sn, Cr)")]
    UnknownVariant(String),
    #[error("unknown device mode `{0}` (valid: meanfield, stochastic)")]
    UnknownMode(String),
    #[error("preset file: {0}")]
    PresetFile(#[from] KvError),
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub n_switches: u32,
    /// Siemens per switch in the ON state.
    pub w_on: f64,
    /// Siemens per switch in the OFF state. Strictly positive.
    pub w_off: f64,
    /// Forward switching threshold, volts.
    pub v_on: f64,
    /// Reverse switching threshold, volts (magnitude).
    pub v_off: f64,
    /// Characteristic switching time, seconds.
    pub tau: f64,
    /// Logistic steepness, 1/volts.
    pub beta: f64,
}

impl DeviceParams {
    pub const FIELD_NAMES: [&'static str; 7] = [
        "n_switches",
        "w_on",
        "w_off",
        "v_on",
        "v_off",
        "tau",
        "beta",
    ];

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |msg: String| Err(DeviceError::InvalidParams(msg));
        let finite = [
            self.w_on, self.w_off, self.v_on, self.v_off, self.tau, self.beta,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return bad("all parameters must be finite".into());
        }
        if self.n_switches == 0 {
            return bad("n_switches must be >= 1".into());
        }
        if !(self.w_off > 0.0) {
            return bad(format!("w_off must be > 0, got {}", self.w_off));
        }
        if !(self.w_on > self.w_off) {
            return bad(format!(
                "w_on must exceed w_off, got w_on = {} and w_off = {}",
                self.w_on, self.w_off
            ));
        }
        if !(self.v_on > 0.0 && self.v_on < 1.0) {
            return bad(format!("v_on must lie in (0, 1) V, got {}", self.v_on));
        }
        if !(self.v_off > 0.0 && self.v_off < 1.0) {
            return bad(format!("v_off must lie in (0, 1) V, got {}", self.v_off));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.beta > 0.0) {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        Ok(())
    }

    pub fn min_conductance(&self) -> f64 {
        self.n_switches as f64 * self.w_off
    }

    pub fn max_conductance(&self) -> f64 {
        self.n_switches as f64 * self.w_on
    }

    pub fn from_section(section: &Section) -> Result<Self, DeviceError> {
        let params = DeviceParams {
            n_switches: section.parse("n_switches")?,
            w_on: section.parse("w_on")?,
            w_off: section.parse("w_off")?,
            v_on: section.parse("v_on")?,
            v_off: section.parse("v_off")?,
            tau: section.parse("tau")?,
            beta: section.parse("beta")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn write_section(&self, section: &mut Section) {
        section.set("n_switches", self.n_switches);
        section.set("w_on", self.w_on);
        section.set("w_off", self.w_off);
        section.set("v_on", self.v_on);
        section.set("v_off", self.v_off);
        section.set("tau", self.tau);
        section.set("beta", self.beta);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    W,
    Sn,
    Cr,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::W, Variant::Sn, Variant::Cr];

    pub fn name(self) -> &'static str {
        match self {
            Variant::W => "W",
            Variant::Sn => "Sn",
            Variant::Cr => "Cr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, DeviceError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| DeviceError::UnknownVariant(s.to_string()))
    }
}

/// Parses a preset file holding one `[W]`, `[Sn]` and `[Cr]` section each.
pub fn parse_presets(text: &str) -> Result<[DeviceParams; 3], DeviceError> {
    let doc: Document = text.parse()?;
    let load = |v: Variant| DeviceParams::from_section(doc.require_section(v.name())?);
    Ok([load(Variant::W)?, load(Variant::Sn)?, load(Variant::Cr)?])
}

/// Returns the frozen parameter record for a device variant.
pub fn preset_params(variant: Variant) -> DeviceParams {
    static PRESETS: OnceLock<[DeviceParams; 3]> = OnceLock::new();
    let presets =
        PRESETS.get_or_init(|| parse_presets(PRESET_FILE).expect("bundled preset file is valid"));
    presets[variant as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    MeanField,
    Stochastic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::MeanField => "meanfield",
            Mode::Stochastic => "stochastic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, DeviceError> {
        match s {
            "meanfield" => Ok(Mode::MeanField),
            "stochastic" => Ok(Mode::Stochastic),
            other => Err(DeviceError::UnknownMode(other.to_string())),
        }
    }
}

/// Admissible pulse envelope. Pulses outside it almost always indicate a
/// unit mistake (ms vs ns) rather than an intended experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseLimits {
    pub max_volts: f64,
    pub max_seconds: f64,
}

impl Default for PulseLimits {
    fn default() -> Self {
        PulseLimits {
            max_volts: 1.5,
            max_seconds: 1.0e-6,
        }
    }
}

impl PulseLimits {
    pub fn check(&self, volts: f64, seconds: f64) -> Result<(), DeviceError> {
        if !volts.is_finite() || !seconds.is_finite() {
            return Err(DeviceError::NonFinite { volts, seconds });
        }
        if volts.abs() > self.max_volts || !(seconds > 0.0) || seconds > self.max_seconds {
            return Err(DeviceError::PulseOutOfRange {
                volts,
                seconds,
                max_volts: self.max_volts,
                max_seconds: self.max_seconds,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub volts: f64,
    pub seconds: f64,
}

impl Pulse {
    pub const fn new(volts: f64, seconds: f64) -> Self {
        Pulse { volts, seconds }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-switch OFF->ON and ON->OFF probabilities for one pulse.
pub fn transition_probabilities(
    params: &DeviceParams,
    volts: f64,
    seconds: f64,
) -> Result<(f64, f64), DeviceError> {
    if !volts.is_finite() || !seconds.is_finite() {
        return Err(DeviceError::NonFinite { volts, seconds });
    }
    if !(seconds > 0.0) {
        return Err(DeviceError::PulseOutOfRange {
            volts,
            seconds,
            max_volts: f64::INFINITY,
            max_seconds: f64::INFINITY,
        });
    }
    let r = (seconds / params.tau).clamp(0.0, 1.0);
    let p_on = r * sigmoid(params.beta * (volts - params.v_on));
    let p_off = r * sigmoid(params.beta * (-volts - params.v_off));
    Ok((p_on.clamp(0.0, 1.0), p_off.clamp(0.0, 1.0)))
}

/// ON-state of one memristor. The random stream used by stochastic updates
/// belongs to the owner of the state (a [`Device`] or a core), so states
/// stay small, `Copy` and free of shared mutability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceState {
    MeanField { on_fraction: f64 },
    Stochastic { on_count: u32 },
}

impl DeviceState {
    /// A state holding `on_fraction` of the ensemble ON, in the given mode.
    /// Stochastic states round to the nearest switch count.
    pub fn with_fraction(mode: Mode, on_fraction: f64, params: &DeviceParams) -> Self {
        let n = on_fraction.clamp(0.0, 1.0);
        match mode {
            Mode::MeanField => DeviceState::MeanField { on_fraction: n },
            Mode::Stochastic => DeviceState::Stochastic {
                on_count: (n * params.n_switches as f64).round() as u32,
            },
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            DeviceState::MeanField { .. } => Mode::MeanField,
            DeviceState::Stochastic { .. } => Mode::Stochastic,
        }
    }

    pub fn on_fraction(&self, params: &DeviceParams) -> f64 {
        match *self {
            DeviceState::MeanField { on_fraction } => on_fraction,
            DeviceState::Stochastic { on_count } => on_count as f64 / params.n_switches as f64,
        }
    }

    /// Total conductance in siemens.
    pub fn conductance(&self, params: &DeviceParams) -> f64 {
        conductance(self, params)
    }

    /// Applies one pulse inside the default [`PulseLimits`].
    pub fn apply_pulse<R: Rng + ?Sized>(
        self,
        params: &DeviceParams,
        volts: f64,
        seconds: f64,
        rng: &mut R,
    ) -> Result<Self, DeviceError> {
        self.apply_pulse_within(params, volts, seconds, &PulseLimits::default(), rng)
    }

    pub fn apply_pulse_within<R: Rng + ?Sized>(
        self,
        params: &DeviceParams,
        volts: f64,
        seconds: f64,
        limits: &PulseLimits,
        rng: &mut R,
    ) -> Result<Self, DeviceError> {
        limits.check(volts, seconds)?;
        let (p_on, p_off) = transition_probabilities(params, volts, seconds)?;
        Ok(match self {
            DeviceState::MeanField { on_fraction: n } => DeviceState::MeanField {
                on_fraction: (n + (1.0 - n) * p_on - n * p_off).clamp(0.0, 1.0),
            },
            DeviceState::Stochastic { on_count } => {
                let on_count = on_count.min(params.n_switches);
                let off_count = params.n_switches - on_count;
                let turned_on = binomial(off_count, p_on, rng);
                let turned_off = binomial(on_count, p_off, rng);
                DeviceState::Stochastic {
                    on_count: on_count + turned_on - turned_off,
                }
            }
        })
    }
}

fn binomial<R: Rng + ?Sized>(trials: u32, p: f64, rng: &mut R) -> u32 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    let dist = Binomial::new(trials as u64, p).expect("p lies in (0, 1)");
    dist.sample(rng) as u32
}

/// `G = n*N*w_on + (1-n)*N*w_off` for ON fraction `n` and `N` switches.
pub fn conductance(state: &DeviceState, params: &DeviceParams) -> f64 {
    let n = state.on_fraction(params);
    let count = params.n_switches as f64;
    n * count * params.w_on + (1.0 - n) * count * params.w_off
}

/// A memristor that owns its random stream, for standalone device studies.
#[derive(Debug, Clone)]
pub struct Device {
    pub params: DeviceParams,
    pub state: DeviceState,
    pub limits: PulseLimits,
    rng: ChaCha8Rng,
}

impl Device {
    pub fn new(params: DeviceParams, mode: Mode, on_fraction: f64, seed: u64) -> Self {
        Device {
            params,
            state: DeviceState::with_fraction(mode, on_fraction, &params),
            limits: PulseLimits::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_limits(mut self, limits: PulseLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn pulse(&mut self, volts: f64, seconds: f64) -> Result<DeviceState, DeviceError> {
        self.state = self.state.apply_pulse_within(
            &self.params,
            volts,
            seconds,
            &self.limits,
            &mut self.rng,
        )?;
        Ok(self.state)
    }

    pub fn on_fraction(&self) -> f64 {
        self.state.on_fraction(&self.params)
    }

    pub fn conductance(&self) -> f64 {
        self.state.conductance(&self.params)
    }
}

/// Bidirectional training train: `count` forward pulses at `+v_write` then
/// `count` reverse pulses at `-v_write`, each followed by a `v_read` pulse,
/// all `seconds` long.
pub fn sweep_pulses(count: usize, v_write: f64, v_read: f64, seconds: f64) -> Vec<Pulse> {
    [v_write, -v_write]
        .into_iter()
        .flat_map(|v| std::iter::repeat_n(v, count))
        .flat_map(|v| [Pulse::new(v, seconds), Pulse::new(v_read, seconds)])
        .collect()
}

/// The standard sweep: 20 + 20 activation pulses at 0.8 V, 0.2 V reads,
/// 50 ns throughout.
pub fn default_sweep() -> Vec<Pulse> {
    sweep_pulses(20, 0.8, 0.2, 50e-9)
}

/// Mean-field ON fraction after each pulse, starting from `start`.
pub fn mean_field_trace(
    params: &DeviceParams,
    pulses: &[Pulse],
    start: f64,
) -> Result<Vec<f64>, DeviceError> {
    let mut device = Device::new(*params, Mode::MeanField, start, 0);
    pulses
        .iter()
        .map(|p| {
            device
                .pulse(p.volts, p.seconds)
                .map(|s| s.on_fraction(params))
        })
        .collect()
}

/// Monte Carlo reference for the mean-field update.
///
/// Runs `trials` independent switch-count trajectories from half the
/// ensemble ON and returns the trial-mean ON fraction after each pulse.
/// Trial `t` draws from stream `t` of a ChaCha generator keyed by `seed`.
pub fn mc_trace_oracle(
    params: &DeviceParams,
    pulses: &[Pulse],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, DeviceError> {
    if trials == 0 {
        return Err(DeviceError::NoTrials);
    }
    let limits = PulseLimits::default();
    let probabilities = pulses
        .iter()
        .map(|p| {
            limits.check(p.volts, p.seconds)?;
            transition_probabilities(params, p.volts, p.seconds)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let total = params.n_switches as u64;
    let mut sums = vec![0.0f64; pulses.len()];
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut on = total / 2;
        for (step, &(p_on, p_off)) in probabilities.iter().enumerate() {
            let up = if on < total {
                Binomial::new(total - on, p_on).unwrap().sample(&mut rng)
            } else {
                0
            };
            let down = if on > 0 {
                Binomial::new(on, p_off).unwrap().sample(&mut rng)
            } else {
                0
            };
            on = on + up - down;
            sums[step] += on as f64 / total as f64;
        }
    }
    Ok(sums.into_iter().map(|s| s / trials as f64).collect())
}
