use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ChannelEndpoint, CoreLayout, PhyBackend, Role, Sample, SampleSeries, Transmission, TxSchedule, MIN_SAMPLE_WINDOW};
use crate::error::{Error, Result};
use crate::turbo::{ActivityTrace, FrequencyTrace, Interval, NoiseKind, NoiseProfile, NoiseStream, PcuRunner, TurboPolicy};
use crate::units::{Hertz, Micros, MICROS_PER_SEC};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub policy: TurboPolicy,
    pub layout: CoreLayout,
    /// Activity generators and preemption generators alike.
    pub noise: Vec<NoiseProfile>,
    /// When set, the frequency is held here regardless of activity.
    pub pinned: Option<Hertz>,
    pub ops_per_cycle: f64,
    /// Standard deviation of the multiplicative Gaussian count jitter.
    pub jitter: f64,
    pub seed: u64,
    pub horizon: Micros,
}

impl SimConfig {
    pub fn new(policy: TurboPolicy, layout: CoreLayout) -> Self {
        SimConfig {
            policy,
            layout,
            noise: Vec::new(),
            pinned: None,
            ops_per_cycle: 1.0,
            jitter: 0.0,
            seed: 0,
            horizon: 100_000 * MICROS_PER_SEC,
        }
    }
}

/// Sorted union of intervals, extended in start order.
#[derive(Clone, Debug, Default)]
struct IntervalSet(Vec<Interval>);

impl IntervalSet {
    fn push(&mut self, iv: Interval) {
        match self.0.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => self.0.push(iv),
        }
    }

    fn containing(&self, t: Micros) -> Option<Interval> {
        let idx = self.0.partition_point(|iv| iv.start <= t);
        (idx > 0 && self.0[idx - 1].contains(t)).then(|| self.0[idx - 1])
    }

    fn overlapping(&self, start: Micros, end: Micros) -> impl Iterator<Item = &Interval> {
        let idx = self.0.partition_point(|iv| iv.end <= start);
        self.0[idx..].iter().take_while(move |iv| iv.start < end)
    }
}

/// Single-threaded simulation of one machine hosting both link parties.
///
/// Time only moves forward: transmissions may not start before the latest
/// sampled instant, and noise is generated lazily as sampling advances.
pub struct SimulatedPhy {
    policy: TurboPolicy,
    layout: CoreLayout,
    pinned: Option<Hertz>,
    ops_per_cycle: f64,
    horizon: Micros,
    activity: ActivityTrace,
    activity_noise: Vec<NoiseStream>,
    preempt_noise: [Vec<NoiseStream>; 2],
    preemptions: [IntervalSet; 2],
    pcu: PcuRunner,
    freq: FrequencyTrace,
    evaluated: Micros,
    jitter: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SimulatedPhy {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        if cfg.layout.core_count != cfg.policy.core_count() {
            return Err(Error::CoreCountMismatch {
                expected: cfg.policy.core_count(),
                actual: cfg.layout.core_count,
            });
        }
        if !(cfg.jitter >= 0.0) || !(cfg.ops_per_cycle > 0.0) {
            return Err(Error::Config("jitter must be >= 0 and ops_per_cycle > 0".into()));
        }
        let mut activity = ActivityTrace::empty(cfg.layout.core_count, cfg.horizon);
        // the listening core spins for the whole run
        activity.push(cfg.layout.listener, 0, cfg.horizon)?;
        let mut activity_noise = Vec::new();
        let mut preempt_noise: [Vec<NoiseStream>; 2] = [Vec::new(), Vec::new()];
        for p in &cfg.noise {
            if p.core_count != cfg.layout.core_count {
                return Err(Error::CoreCountMismatch {
                    expected: cfg.layout.core_count,
                    actual: p.core_count,
                });
            }
            match &p.kind {
                NoiseKind::VmInterrupts { target, .. } => preempt_noise[target.index()].push(p.stream()?),
                _ => {
                    let reserved = [cfg.layout.listener]
                        .iter()
                        .chain(&cfg.layout.transmit)
                        .any(|c| p.cores.contains(c));
                    if reserved {
                        return Err(Error::InvalidNoise(
                            "noise may not occupy the receiver or transmitter cores".into(),
                        ));
                    }
                    activity_noise.push(p.stream()?)
                }
            }
        }
        let jitter = (cfg.jitter > 0.0)
            .then(|| Normal::new(0.0, cfg.jitter).expect("finite sigma"));
        let freq = match cfg.pinned {
            Some(f) => FrequencyTrace::constant(f, cfg.horizon),
            None => FrequencyTrace::empty(),
        };
        Ok(SimulatedPhy {
            pcu: PcuRunner::new(cfg.policy.clone()),
            policy: cfg.policy,
            layout: cfg.layout,
            pinned: cfg.pinned,
            ops_per_cycle: cfg.ops_per_cycle,
            horizon: cfg.horizon,
            activity,
            activity_noise,
            preempt_noise,
            preemptions: [IntervalSet::default(), IntervalSet::default()],
            freq,
            evaluated: 0,
            jitter,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn policy(&self) -> &TurboPolicy {
        &self.policy
    }

    /// All activity so far: listener, transmitters and noise.
    pub fn activity(&self) -> &ActivityTrace {
        &self.activity
    }

    /// Frequency trace up to the latest sampled instant. This is the hook a
    /// frequency logger (e.g. a detector) would read.
    pub fn frequency_trace(&self) -> &FrequencyTrace {
        &self.freq
    }

    /// Latest instant whose frequency is final.
    pub fn now(&self) -> Micros {
        self.evaluated
    }

    fn pull_activity(&mut self, until: Micros) -> Result<()> {
        loop {
            let next = self
                .activity_noise
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.peek_start().map(|t| (t, i)))
                .min();
            match next {
                Some((t, i)) if t < until => {
                    let ev = self.activity_noise[i].next().expect("peeked");
                    let end = ev.end.min(self.horizon);
                    for c in ev.cores {
                        self.activity.push(c, ev.start, end)?;
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn pull_preemptions(&mut self, party: usize, until: Micros) {
        loop {
            let next = self.preempt_noise[party]
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.peek_start().map(|t| (t, i)))
                .min();
            match next {
                Some((t, i)) if t <= until => {
                    let ev = self.preempt_noise[party][i].next().expect("peeked");
                    self.preemptions[party].push(Interval::new(ev.start, ev.end));
                }
                _ => return,
            }
        }
    }

    fn advance(&mut self, until: Micros) -> Result<()> {
        if until <= self.evaluated {
            return Ok(());
        }
        self.pull_activity(until)?;
        if self.pinned.is_none() {
            self.pcu.advance(until, &self.activity, &mut self.freq)?;
        }
        self.evaluated = until;
        Ok(())
    }

    fn preempted_until(&mut self, party: usize, t: Micros) -> Option<Micros> {
        self.pull_preemptions(party, t);
        self.preemptions[party].containing(t).map(|iv| iv.end)
    }
}

impl PhyBackend for SimulatedPhy {
    fn layout(&self) -> &CoreLayout {
        &self.layout
    }

    /// The sender keeps time against an absolute clock: a transition that
    /// falls inside one of its preemptions happens when the preemption ends,
    /// and later transitions are unaffected.
    fn transmit(&mut self, endpoint: ChannelEndpoint, schedule: &TxSchedule) -> Result<Transmission> {
        if endpoint.role != Role::Sender {
            return Err(Error::WrongRole);
        }
        if schedule.tx_cores != self.layout.tx_cores() {
            return Err(Error::Config(format!(
                "schedule drives {} cores but the layout has {}",
                schedule.tx_cores,
                self.layout.tx_cores()
            )));
        }
        if schedule.start < self.evaluated || schedule.end > self.horizon {
            return Err(Error::OutsideHorizon {
                start: schedule.start,
                end: schedule.end,
            });
        }
        let party = endpoint.party.index();
        let mut actual: Vec<Interval> = Vec::with_capacity(schedule.entries.len());
        for e in &schedule.entries {
            let on = self.preempted_until(party, e.start).unwrap_or(e.start);
            let off = self.preempted_until(party, e.end).unwrap_or(e.end);
            if off > on {
                actual.push(Interval::new(on, off));
            }
        }
        let end = schedule.end.max(actual.last().map_or(0, |iv| iv.end));
        if end > self.horizon {
            return Err(Error::OutsideHorizon {
                start: schedule.start,
                end,
            });
        }
        let mut contribution = ActivityTrace::empty(self.layout.core_count, self.horizon);
        for iv in &actual {
            for &c in &self.layout.transmit {
                self.activity.push(c, iv.start, iv.end)?;
                contribution.push(c, iv.start, iv.end)?;
            }
        }
        Ok(Transmission {
            activity: contribution,
            end,
        })
    }

    /// Each count is `ops_per_cycle` times the cycles elapsed in the window,
    /// with optional multiplicative jitter. Windows overlapping a preemption
    /// of the receiver are missing.
    fn sample_frequency(
        &mut self,
        endpoint: ChannelEndpoint,
        window: Micros,
        start: Micros,
        end: Micros,
    ) -> Result<SampleSeries> {
        if endpoint.role != Role::Receiver {
            return Err(Error::WrongRole);
        }
        if window < MIN_SAMPLE_WINDOW {
            return Err(Error::InvalidModem(format!(
                "sampling window {window} us is below {MIN_SAMPLE_WINDOW} us"
            )));
        }
        if end > self.horizon || start > end {
            return Err(Error::OutsideHorizon { start, end });
        }
        self.advance(end)?;
        let party = endpoint.party.index();
        self.pull_preemptions(party, end);
        let n = ((end - start) / window) as usize;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n as u64 {
            let w0 = start + k * window;
            let w1 = w0 + window;
            // The loop sees the timestamp counter jump when it is
            // descheduled and discards the window.
            let preempted = self.preemptions[party].overlapping(w0, w1).next().is_some();
            let count = if preempted {
                None
            } else {
                let mut ops = self.ops_per_cycle * self.freq.cycles(w0, w1);
                if let Some(j) = &self.jitter {
                    ops *= 1.0 + j.sample(&mut self.rng);
                }
                Some(ops.max(0.0).round() as u64)
            };
            samples.push(Sample { timestamp: w0, count });
        }
        Ok(SampleSeries { window, samples })
    }
}
