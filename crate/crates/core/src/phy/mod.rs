//! Physical layer: core activity in, counting-loop samples out.
//!
//! [`PhyBackend`] is the boundary a hardware backend (busy loops and
//! cycle-counter reads) would implement; [`SimulatedPhy`] is the only
//! backend here.

mod sim;

pub use sim::{SimConfig, SimulatedPhy};

use crate::error::{Error, Result};
use crate::turbo::{ActivityTrace, Interval};
use crate::units::Micros;

/// The two processes of a covert link. `A` sends data, `B` receives it and
/// sends acknowledgements back.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn index(self) -> usize {
        match self {
            Party::A => 0,
            Party::B => 1,
        }
    }

    pub fn peer(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Sender,
    Receiver,
}

/// A party acting in one role. Parties swap roles for acknowledgements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChannelEndpoint {
    pub party: Party,
    pub role: Role,
}

impl ChannelEndpoint {
    pub fn sender(party: Party) -> Self {
        ChannelEndpoint {
            party,
            role: Role::Sender,
        }
    }

    pub fn receiver(party: Party) -> Self {
        ChannelEndpoint {
            party,
            role: Role::Receiver,
        }
    }

    /// Cores this endpoint occupies under `layout`.
    pub fn cores<'a>(&self, layout: &'a CoreLayout) -> &'a [usize] {
        match self.role {
            Role::Sender => &layout.transmit,
            Role::Receiver => std::slice::from_ref(&layout.listener),
        }
    }
}

/// Core assignment: core 0 runs whichever party is listening, the next
/// `tx_cores` cores belong to whichever party is transmitting, and the rest
/// are left to background noise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreLayout {
    pub core_count: usize,
    pub listener: usize,
    pub transmit: Vec<usize>,
    pub noise: Vec<usize>,
}

impl CoreLayout {
    pub fn new(core_count: usize, tx_cores: usize) -> Result<Self> {
        if tx_cores == 0 || tx_cores + 1 > core_count {
            return Err(Error::Config(format!(
                "{tx_cores} transmitter cores plus a receiver do not fit in {core_count} cores"
            )));
        }
        Ok(CoreLayout {
            core_count,
            listener: 0,
            transmit: (1..=tx_cores).collect(),
            noise: (tx_cores + 1..core_count).collect(),
        })
    }

    pub fn tx_cores(&self) -> usize {
        self.transmit.len()
    }
}

/// On-off keyed transmit plan over `[start, end)`: all `tx_cores` cores are
/// active during each entry and asleep otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxSchedule {
    pub start: Micros,
    pub end: Micros,
    pub tx_cores: usize,
    pub entries: Vec<Interval>,
}

impl TxSchedule {
    pub fn new(start: Micros, end: Micros, tx_cores: usize, entries: Vec<Interval>) -> Result<Self> {
        if tx_cores == 0 {
            return Err(Error::Config("tx_cores must be at least 1".into()));
        }
        let mut prev = start;
        for e in &entries {
            if e.is_empty() || e.start < prev || e.end > end {
                return Err(Error::InvalidTrace("schedule entries must be sorted, disjoint and inside the span".into()));
            }
            prev = e.end;
        }
        Ok(TxSchedule {
            start,
            end,
            tx_cores,
            entries,
        })
    }

    pub fn empty(start: Micros, end: Micros, tx_cores: usize) -> Self {
        TxSchedule {
            start,
            end,
            tx_cores,
            entries: Vec::new(),
        }
    }

    pub fn shifted(&self, by: Micros) -> Self {
        TxSchedule {
            start: self.start + by,
            end: self.end + by,
            tx_cores: self.tx_cores,
            entries: self
                .entries
                .iter()
                .map(|e| Interval::new(e.start + by, e.end + by))
                .collect(),
        }
    }
}

/// What a sender actually did: its core activity and when its last bit
/// ended (later than scheduled if it was preempted).
#[derive(Clone, Debug)]
pub struct Transmission {
    pub activity: ActivityTrace,
    pub end: Micros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub timestamp: Micros,
    /// `None` when the receiver was preempted for the whole window.
    pub count: Option<u64>,
}

/// Counting-loop output: one entry per `window` starting at `timestamp`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSeries {
    pub window: Micros,
    pub samples: Vec<Sample>,
}

impl SampleSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn counts(&self) -> impl Iterator<Item = Option<u64>> + '_ {
        self.samples.iter().map(|s| s.count)
    }
}

pub const MIN_SAMPLE_WINDOW: Micros = 100;

pub trait PhyBackend {
    fn layout(&self) -> &CoreLayout;

    /// Executes `schedule` on the sender's cores.
    fn transmit(&mut self, endpoint: ChannelEndpoint, schedule: &TxSchedule) -> Result<Transmission>;

    /// Runs the counting loop on the receiver's core for each `window` in
    /// `[start, end)`.
    fn sample_frequency(
        &mut self,
        endpoint: ChannelEndpoint,
        window: Micros,
        start: Micros,
        end: Micros,
    ) -> Result<SampleSeries>;
}
