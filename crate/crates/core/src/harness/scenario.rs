use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::histogram::{count_frequency_changes, Histogram};
use crate::error::{Error, Result};
use crate::fec::{OutcomeTrace, PacketOutcome};
use crate::link::{self, LinkConfig, SimChannel, TransferStats, ACK_BITS, FRAME_BITS, PAYLOAD_BYTES};
use crate::modem::{default_threshold, ModemConfig};
use crate::phy::{CoreLayout, Party, SimConfig, SimulatedPhy};
use crate::turbo::{NoiseKind, NoiseProfile, TurboPolicy};
use crate::units::{ms, Micros};

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    IdleBackground,
    ConstantLoad(usize),
    VmInterrupts { target: Party, rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Countermeasure {
    None,
    /// Frequency pinned to the base clock.
    TurboOff,
    /// Cores never sleep deeply, so the all-core level is always in force.
    CstateRestricted,
    /// `k` random noise cores are woken at random intervals.
    ArtificialNoise(usize),
}

/// Mean on and off times of the artificial-noise bursts.
pub const ARTIFICIAL_NOISE_ON: Micros = ms(4);
pub const ARTIFICIAL_NOISE_OFF: Micros = ms(5);

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub policy: TurboPolicy,
    pub noise: Vec<NoiseSpec>,
    pub tx_cores: usize,
    pub bit_times: Vec<Micros>,
    pub payload_bytes: usize,
    pub seeds: Vec<u64>,
    pub countermeasure: Countermeasure,
    pub oversampling: usize,
    pub glitch_max: usize,
    pub max_retries: Option<u32>,
    pub jitter: f64,
    pub threshold: Option<u64>,
    pub ops_per_cycle: f64,
    /// When non-zero, also send this many unacknowledged frames and record
    /// what arrived, for offline FEC analysis.
    pub record_outcomes: usize,
}

pub const DEFAULT_JITTER: f64 = 0.005;

impl Scenario {
    pub fn new(name: impl Into<String>, policy: TurboPolicy) -> Self {
        Scenario {
            name: name.into(),
            policy,
            noise: vec![NoiseSpec::IdleBackground],
            tx_cores: 2,
            bit_times: vec![ms(7)],
            payload_bytes: 80,
            seeds: (1..=10).collect(),
            countermeasure: Countermeasure::None,
            oversampling: 8,
            glitch_max: 2,
            max_retries: Some(10),
            jitter: DEFAULT_JITTER,
            threshold: None,
            ops_per_cycle: 1.0,
            record_outcomes: 0,
        }
    }

    /// Transmitter cores used when the config does not say: two on a quiet
    /// machine, three once any core is permanently busy.
    pub fn default_tx_cores(constant_cores: usize) -> usize {
        if constant_cores == 0 {
            2
        } else {
            3
        }
    }

    pub fn constant_cores(&self) -> usize {
        self.noise
            .iter()
            .map(|n| match n {
                NoiseSpec::ConstantLoad(k) => *k,
                _ => 0,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.tx_cores == 0 {
            return cfg("tx_cores must be at least 1".into());
        }
        let needed = 1 + self.tx_cores + self.constant_cores();
        if needed > self.policy.core_count() {
            return cfg(format!(
                "receiver, {} transmitter cores and {} constant cores need {needed} cores, the policy has {}",
                self.tx_cores,
                self.constant_cores(),
                self.policy.core_count()
            ));
        }
        if let Countermeasure::ArtificialNoise(k) = self.countermeasure {
            let free = self.policy.core_count() - needed;
            if k == 0 || k > free {
                return cfg(format!("artificial noise wants {k} cores but {free} are free"));
            }
        }
        if self.bit_times.is_empty() {
            return cfg("no bit time given".into());
        }
        if self.seeds.is_empty() {
            return cfg("no seeds given".into());
        }
        if self.payload_bytes == 0 {
            return Err(Error::PayloadLength(0));
        }
        for &bt in &self.bit_times {
            self.modem_config(bt)?;
        }
        Ok(())
    }

    fn levels(&self) -> Result<(usize, usize)> {
        let idle_active = 1 + self.constant_cores();
        let idle = self.policy.level_index(idle_active)?;
        let signal = self.policy.level_index(idle_active + self.tx_cores)?;
        if idle != signal {
            return Ok((idle, signal));
        }
        // no margin left: compare against a neighbouring level so the
        // threshold is still well defined
        let other = if idle + 1 < self.policy.levels().len() { idle + 1 } else { idle.saturating_sub(1) };
        Ok((idle, other))
    }

    pub fn modem_config(&self, bit_time: Micros) -> Result<ModemConfig> {
        let probe = ModemConfig::new(bit_time, 1)?.with_oversampling(self.oversampling, self.glitch_max)?;
        let threshold = match self.threshold {
            Some(t) => t,
            None => {
                let (idle, signal) = self.levels()?;
                default_threshold(&self.policy, probe.window(), idle, signal, self.ops_per_cycle)?
            }
        };
        let mut modem = probe;
        modem.threshold = threshold;
        modem.validate()?;
        Ok(modem)
    }

    pub fn link_config(&self, bit_time: Micros) -> LinkConfig {
        LinkConfig::new(bit_time).with_max_retries(self.max_retries)
    }

    /// Noise generators for one seed. Constant loads take the lowest noise
    /// cores; transient generators share whatever is left.
    pub fn noise_profiles(&self, layout: &CoreLayout, seed: u64) -> Vec<NoiseProfile> {
        let n = layout.core_count;
        let constant = self.constant_cores();
        let (busy, free) = layout.noise.split_at(constant.min(layout.noise.len()));
        let mut out = Vec::new();
        if constant > 0 {
            out.push(NoiseProfile::constant_load(n, busy.to_vec(), constant));
        }
        for (i, spec) in self.noise.iter().enumerate() {
            let s = derive_seed(seed, 1 + i as u64);
            match *spec {
                NoiseSpec::IdleBackground if !free.is_empty() => {
                    out.push(NoiseProfile::idle_background(n, free.to_vec(), s))
                }
                NoiseSpec::VmInterrupts { target, rate } => {
                    out.push(NoiseProfile::vm_interrupts(n, layout.listener, target, rate, s))
                }
                _ => {}
            }
        }
        if let Countermeasure::ArtificialNoise(k) = self.countermeasure {
            out.push(NoiseProfile {
                kind: NoiseKind::Custom {
                    burst_cores: k,
                    mean_on: ARTIFICIAL_NOISE_ON,
                    mean_off: ARTIFICIAL_NOISE_OFF,
                },
                seed: derive_seed(seed, 0xA11),
                core_count: n,
                cores: free.to_vec(),
            });
        }
        out
    }

    pub fn sim_config(&self, seed: u64) -> Result<SimConfig> {
        let layout = CoreLayout::new(self.policy.core_count(), self.tx_cores)?;
        let mut cfg = SimConfig::new(self.policy.clone(), layout);
        cfg.noise = self.noise_profiles(&cfg.layout, seed);
        cfg.pinned = match self.countermeasure {
            Countermeasure::TurboOff => Some(self.policy.base_frequency()),
            Countermeasure::CstateRestricted => Some(self.policy.all_core_frequency()),
            _ => None,
        };
        cfg.jitter = self.jitter;
        cfg.ops_per_cycle = self.ops_per_cycle;
        cfg.seed = derive_seed(seed, 0);
        Ok(cfg)
    }

    pub fn payload(&self, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xDA7A));
        let mut v = vec![0; self.payload_bytes];
        rng.fill_bytes(&mut v);
        v
    }
}

/// SplitMix64 finaliser over a seed and a stream label.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub bit_time: Micros,
    pub seed: u64,
    pub success: bool,
    /// Zero for failed transfers.
    pub goodput_bps: f64,
    pub retransmissions_per_packet: f64,
    pub stats: TransferStats,
    /// Every dip below the top frequency during the run, deliberate ones
    /// included.
    pub frequency_changes: Histogram,
    pub outcomes: Vec<PacketOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub bit_time: Micros,
    pub runs: usize,
    pub mean_goodput: f64,
    pub min_goodput: f64,
    pub max_goodput: f64,
    pub mean_retransmissions: f64,
    pub success_rate: f64,
}

impl Aggregate {
    pub fn of(bit_time: Micros, runs: &[&RunResult]) -> Self {
        let n = runs.len().max(1) as f64;
        let goodputs = runs.iter().map(|r| r.goodput_bps);
        Aggregate {
            bit_time,
            runs: runs.len(),
            mean_goodput: goodputs.clone().sum::<f64>() / n,
            min_goodput: goodputs.clone().fold(f64::INFINITY, f64::min),
            max_goodput: goodputs.fold(f64::NEG_INFINITY, f64::max),
            mean_retransmissions: runs.iter().map(|r| r.retransmissions_per_packet).sum::<f64>() / n,
            success_rate: runs.iter().filter(|r| r.success).count() as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    /// Ordered by bit time, then by seed as listed in the scenario.
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<Aggregate>,
}

impl ScenarioReport {
    pub fn aggregate(&self, bit_time: Micros) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.bit_time == bit_time)
    }

    /// Aggregate with the highest mean goodput.
    pub fn best(&self) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .max_by(|a, b| a.mean_goodput.total_cmp(&b.mean_goodput))
    }

    /// Outcome trace of the first run that recorded any.
    pub fn outcome_trace(&self) -> Option<OutcomeTrace> {
        let run = self.runs.iter().find(|r| !r.outcomes.is_empty())?;
        Some(OutcomeTrace {
            bit_time: run.bit_time,
            frame_bits: FRAME_BITS,
            ack_bits: ACK_BITS,
            outcomes: run.outcomes.clone(),
        })
    }
}

/// One transfer of the scenario payload at `bit_time` with `seed`.
pub fn run_once(s: &Scenario, bit_time: Micros, seed: u64) -> Result<RunResult> {
    let modem = s.modem_config(bit_time)?;
    let link_cfg = s.link_config(bit_time);
    let phy = SimulatedPhy::new(s.sim_config(seed)?)?;
    let mut channel = SimChannel::new(phy, modem);
    let payload = s.payload(seed);
    let (stats, success) = match link::transfer(&mut channel, &payload, &link_cfg) {
        Ok(t) => {
            let ok = t.received == payload;
            (t.stats, ok)
        }
        Err(Error::TransferFailed { stats, .. }) => (*stats, false),
        Err(e) => return Err(e),
    };
    let mut outcomes = Vec::with_capacity(s.record_outcomes);
    for k in 0..s.record_outcomes {
        let at = (k * PAYLOAD_BYTES) % payload.len();
        let chunk: Vec<u8> = payload.iter().cycle().skip(at).take(PAYLOAD_BYTES).copied().collect();
        let (sent, heard) = link::send_once(&mut channel, k as u8, &chunk)?;
        outcomes.push(PacketOutcome::from_bits(&sent, &heard)?);
    }
    Ok(RunResult {
        bit_time,
        seed,
        success,
        goodput_bps: if success { stats.effective_goodput } else { 0.0 },
        retransmissions_per_packet: stats.retransmissions_per_packet(),
        frequency_changes: count_frequency_changes(channel.phy().frequency_trace()),
        stats,
        outcomes,
    })
}

/// Every (bit time, seed) pair of the scenario, in parallel.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    s.validate()?;
    let jobs: Vec<(Micros, u64)> = s
        .bit_times
        .iter()
        .flat_map(|&bt| s.seeds.iter().map(move |&seed| (bt, seed)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(bt, seed)| run_once(s, bt, seed))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = s
        .bit_times
        .iter()
        .map(|&bt| {
            let group: Vec<&RunResult> = runs.iter().filter(|r| r.bit_time == bt).collect();
            Aggregate::of(bt, &group)
        })
        .collect();
    Ok(ScenarioReport {
        scenario: s.name.clone(),
        runs,
        aggregates,
    })
}

/// [`run_scenario`] over an explicit list of bit times.
pub fn sweep(s: &Scenario, bit_times: &[Micros]) -> Result<ScenarioReport> {
    if bit_times.is_empty() {
        return Err(Error::Config("sweep needs at least one bit time".into()));
    }
    let mut s = s.clone();
    s.bit_times = bit_times.to_vec();
    run_scenario(&s)
}
