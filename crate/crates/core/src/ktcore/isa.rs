//! Instruction set: a read polarity followed by a feedback mode.
//!
//! Mnemonics are two letters, e.g. `FH` (forward read, write up) or `RZ`
//! (reverse read, no write).

use std::fmt;
use std::str::FromStr;

use crate::synapse::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feedback {
    /// Write every spiked synapse up.
    H,
    /// Write every spiked synapse down.
    L,
    /// Write in the direction of the activation sign (Hebbian).
    U,
    /// Write against the activation sign (anti-Hebbian).
    A,
    /// No write.
    Z,
}

impl Feedback {
    pub const ALL: [Feedback; 5] = [
        Feedback::H,
        Feedback::L,
        Feedback::U,
        Feedback::A,
        Feedback::Z,
    ];

    fn letter(self) -> char {
        match self {
            Feedback::H => 'H',
            Feedback::L => 'L',
            Feedback::U => 'U',
            Feedback::A => 'A',
            Feedback::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub read: Polarity,
    pub feedback: Feedback,
}

impl Instruction {
    pub const FH: Instruction = Instruction::new(Polarity::F, Feedback::H);
    pub const FL: Instruction = Instruction::new(Polarity::F, Feedback::L);
    pub const FU: Instruction = Instruction::new(Polarity::F, Feedback::U);
    pub const FA: Instruction = Instruction::new(Polarity::F, Feedback::A);
    pub const FZ: Instruction = Instruction::new(Polarity::F, Feedback::Z);
    pub const RH: Instruction = Instruction::new(Polarity::R, Feedback::H);
    pub const RL: Instruction = Instruction::new(Polarity::R, Feedback::L);
    pub const RU: Instruction = Instruction::new(Polarity::R, Feedback::U);
    pub const RA: Instruction = Instruction::new(Polarity::R, Feedback::A);
    pub const RZ: Instruction = Instruction::new(Polarity::R, Feedback::Z);

    pub const ALL: [Instruction; 10] = [
        Self::FH,
        Self::FL,
        Self::FU,
        Self::FA,
        Self::FZ,
        Self::RH,
        Self::RL,
        Self::RU,
        Self::RA,
        Self::RZ,
    ];

    pub const fn new(read: Polarity, feedback: Feedback) -> Self {
        Instruction { read, feedback }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let read = match self.read {
            Polarity::F => 'F',
            Polarity::R => 'R',
        };
        write!(f, "{read}{}", self.feedback.letter())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("unknown instruction `{0}` (expected one of F/R followed by H/L/U/A/Z)")]
pub struct ParseInstructionError(pub String);

impl FromStr for Instruction {
    type Err = ParseInstructionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instruction::ALL
            .into_iter()
            .find(|i| i.to_string() == s)
            .ok_or_else(|| ParseInstructionError(s.to_string()))
    }
}
