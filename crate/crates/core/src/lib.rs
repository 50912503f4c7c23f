//! A laboratory for the turbo-frequency covert channel.
//!
//! The crate is organised bottom-up:
//!
//! * [`turbo`] models a multi-core CPU whose shared turbo ceiling depends on
//!   how many cores are awake, plus seeded background-noise generators.
//! * [`phy`] turns transmit schedules into core activity and produces the
//!   receiver's counting-loop samples.
//! * [`modem`] is the on-off keyed modem: thresholding, glitch rejection,
//!   edge/run-length decoding and sync-word search.
//! * [`link`] frames bits with a sync word, sequence number and CRC-16 and
//!   runs stop-and-wait ARQ over any [`link::BitChannel`].
//! * [`fec`] is the offline Reed-Solomon trade-off analysis.
//! * [`harness`] composes everything into named scenarios and writes CSV.

pub mod bits;
pub mod error;
pub mod fec;
pub mod harness;
pub mod link;
pub mod modem;
pub mod phy;
pub mod turbo;
pub mod units;

pub use bits::Bits;
pub use error::{Error, Result};
pub use units::{Hertz, Micros};

pub use harness::{Countermeasure, NoiseSpec, Scenario, ScenarioReport};
pub use link::{LinkConfig, TransferStats};
pub use modem::ModemConfig;
pub use phy::{ChannelEndpoint, CoreLayout, Party, Role, SampleSeries, SimConfig, SimulatedPhy, TxSchedule};
pub use turbo::{ActivityTrace, FrequencyTrace, NoiseKind, NoiseProfile, TurboPolicy};
