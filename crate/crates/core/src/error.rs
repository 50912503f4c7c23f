use thiserror::Error;

use crate::link::{FrameError, TransferStats};
use crate::units::Micros;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid turbo policy: {0}")]
    InvalidPolicy(String),
    #[error("active core count {active} exceeds core count {cores}")]
    ActiveCountOutOfRange { active: usize, cores: usize },
    #[error("core count mismatch: expected {expected}, got {actual}")]
    CoreCountMismatch { expected: usize, actual: usize },
    #[error("horizon mismatch: expected {expected} us, got {actual} us")]
    HorizonMismatch { expected: Micros, actual: Micros },
    #[error("invalid activity trace: {0}")]
    InvalidTrace(String),
    #[error("invalid noise profile: {0}")]
    InvalidNoise(String),
    #[error("span [{start}, {end}) us lies outside the simulated horizon")]
    OutsideHorizon { start: Micros, end: Micros },
    #[error("endpoint has the wrong role for this operation")]
    WrongRole,
    #[error("invalid modem configuration: {0}")]
    InvalidModem(String),
    #[error("threshold needs two distinct frequency levels, got level {0} twice")]
    IdenticalLevels(usize),
    #[error("frequency level {0} does not exist in the policy")]
    LevelOutOfRange(usize),
    #[error("invalid payload length {0}")]
    PayloadLength(usize),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("invalid link configuration: {0}")]
    InvalidLink(String),
    #[error("transfer failed: packet {seq} exceeded the retry limit")]
    TransferFailed {
        seq: u8,
        stats: Box<TransferStats>,
        received: Vec<u8>,
    },
    #[error("packet outcome list is empty")]
    EmptyOutcomes,
    #[error("byte sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
