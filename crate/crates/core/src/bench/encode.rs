use std::fmt;
use std::str::FromStr;

use crate::ktcore::SpikeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderKind {
    #[default]
    Threshold,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("threshold")
    }
}

impl FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threshold" => Ok(EncoderKind::Threshold),
            other => Err(format!("unknown encoder {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub theta: f64,
    pub include_bias: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Threshold,
            theta: 0.5,
            include_bias: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if (0.0..=1.0).contains(&self.theta) {
            Ok(())
        } else {
            Err(format!("theta {} outside [0, 1]", self.theta))
        }
    }

    pub fn encode(&self, sample: &[f64]) -> SpikeSet {
        match self.kind {
            EncoderKind::Threshold => encode_threshold(sample, self),
        }
    }
}

/// Spikes every feature strictly above `theta`, plus the bias line when
/// requested. An empty result without bias cannot be executed; it is
/// returned as is and logged.
pub fn encode_threshold(sample: &[f64], cfg: &EncoderConfig) -> SpikeSet {
    let spikes = SpikeSet::new(
        sample
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > cfg.theta)
            .map(|(i, _)| i),
    )
    .with_bias(cfg.include_bias);
    if spikes.is_empty() {
        log::warn!(
            "sample produced no spikes at theta {} and bias is off",
            cfg.theta
        );
    }
    spikes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(theta: f64, include_bias: bool) -> EncoderConfig {
        EncoderConfig {
            theta,
            include_bias,
            ..Default::default()
        }
    }

    #[test]
    fn threshold_examples() {
        let s = encode_threshold(&[0.0, 0.6, 0.2], &cfg(0.5, true));
        assert_eq!(s.addresses(), [1]);
        assert!(s.bias);
        let s = encode_threshold(&[0.0; 4], &cfg(0.5, true));
        assert_eq!(s, SpikeSet::bias_only());
        let s = encode_threshold(&[0.1, 0.9, 0.01], &cfg(0.0, false));
        assert_eq!(s.addresses(), [0, 1, 2]);
        assert!(encode_threshold(&[0.0, 0.2], &cfg(0.5, false)).is_empty());
    }

    #[test]
    fn theta_bounds() {
        assert!(cfg(0.0, true).validate().is_ok());
        assert!(cfg(1.0, true).validate().is_ok());
        assert!(cfg(1.01, true).validate().is_err());
        assert!(cfg(f64::NAN, true).validate().is_err());
    }
}
