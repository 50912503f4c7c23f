use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, WeightedIndex};

use super::activity::ActivityTrace;
use crate::error::{Error, Result};
use crate::phy::Party;
use crate::units::{ms, Micros, MICROS_PER_SEC};

/// One row of an event-rate table: wakeups lasting `duration`, arriving at
/// `per_second` on average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEntry {
    pub duration: Micros,
    pub per_second: f64,
}

/// Involuntary frequency changes per second on an idle machine, by duration
/// in milliseconds.
pub const IDLE_BACKGROUND_RATES: [(u64, f64); 5] =
    [(1, 109.0), (2, 5.0), (3, 2.0), (4, 1.0), (6, 1.0)];

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    /// Short wakeups of otherwise idle cores. Durations follow the table's
    /// categorical distribution. With `min_gap`, an event never starts
    /// within `min_gap` of the previous one ending (the total rate is kept);
    /// without it arrivals are plain Poisson and may overlap.
    IdleBackground {
        rates: Vec<RateEntry>,
        cores_per_event: usize,
        min_gap: Option<Micros>,
    },
    /// `cores` cores held active for the whole horizon.
    ConstantLoad { cores: usize },
    /// Poisson preemptions of one endpoint's process. These are not core
    /// activity; the phy layer consumes them.
    VmInterrupts {
        target: Party,
        rate: f64,
        preemption_min: Micros,
        preemption_max: Micros,
    },
    /// Random on/off bursts that wake `burst_cores` randomly chosen cores
    /// together. Exponential on and off times.
    Custom {
        burst_cores: usize,
        mean_on: Micros,
        mean_off: Micros,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseProfile {
    pub kind: NoiseKind,
    pub seed: u64,
    pub core_count: usize,
    /// Cores this generator may occupy. For `VmInterrupts` the first entry
    /// is the core the preempted process runs on.
    pub cores: Vec<usize>,
}

impl NoiseProfile {
    pub fn idle_background(core_count: usize, cores: Vec<usize>, seed: u64) -> Self {
        NoiseProfile {
            kind: NoiseKind::IdleBackground {
                rates: IDLE_BACKGROUND_RATES
                    .iter()
                    .map(|&(d, r)| RateEntry {
                        duration: ms(d),
                        per_second: r,
                    })
                    .collect(),
                cores_per_event: 1,
                min_gap: Some(ms(1)),
            },
            seed,
            core_count,
            cores,
        }
    }

    pub fn constant_load(core_count: usize, cores: Vec<usize>, n: usize) -> Self {
        NoiseProfile {
            kind: NoiseKind::ConstantLoad { cores: n },
            seed: 0,
            core_count,
            cores,
        }
    }

    /// Preemptions of `target`, uniform 1-10 ms long.
    pub fn vm_interrupts(core_count: usize, core: usize, target: Party, rate: f64, seed: u64) -> Self {
        NoiseProfile {
            kind: NoiseKind::VmInterrupts {
                target,
                rate,
                preemption_min: ms(1),
                preemption_max: ms(10),
            },
            seed,
            core_count,
            cores: vec![core],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidNoise(m.to_string()));
        if let Some(&c) = self.cores.iter().find(|&&c| c >= self.core_count) {
            return Err(Error::InvalidNoise(format!("core {c} out of range")));
        }
        match &self.kind {
            NoiseKind::IdleBackground {
                rates,
                cores_per_event,
                ..
            } => {
                if rates.iter().any(|r| !(r.per_second >= 0.0) || !r.per_second.is_finite()) {
                    return bad("rates must be finite and non-negative");
                }
                if rates.iter().any(|r| r.duration == 0) {
                    return bad("event durations must be positive");
                }
                let total: f64 = rates.iter().map(|r| r.per_second).sum();
                if total > 0.0 && (*cores_per_event == 0 || *cores_per_event > self.cores.len()) {
                    return bad("cores_per_event must be between 1 and the number of eligible cores");
                }
            }
            NoiseKind::ConstantLoad { cores } => {
                if *cores >= self.core_count {
                    return bad("constant_cores must be below core_count");
                }
                if *cores > self.cores.len() {
                    return bad("not enough eligible cores for the constant load");
                }
            }
            NoiseKind::VmInterrupts {
                rate,
                preemption_min,
                preemption_max,
                ..
            } => {
                if !(*rate >= 0.0) || !rate.is_finite() {
                    return bad("interrupt rate must be finite and non-negative");
                }
                if *preemption_min == 0 || preemption_min > preemption_max {
                    return bad("preemption range must satisfy 0 < min <= max");
                }
            }
            NoiseKind::Custom {
                burst_cores,
                mean_on,
                mean_off,
            } => {
                if *burst_cores > self.cores.len() {
                    return bad("burst_cores exceeds eligible cores");
                }
                if *mean_on == 0 || *mean_off == 0 {
                    return bad("on/off means must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn stream(&self) -> Result<NoiseStream> {
        self.validate()?;
        NoiseStream::new(self)
    }
}

/// One burst of activity (or one preemption) produced by a generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoiseEvent {
    pub start: Micros,
    /// May exceed the consumer's horizon; callers clip.
    pub end: Micros,
    pub cores: Vec<usize>,
}

enum StreamState {
    Idle {
        durations: Vec<Micros>,
        pick: WeightedIndex<f64>,
        gap: Exp<f64>,
        min_gap: Option<Micros>,
        per_event: usize,
        next_core: usize,
        busy_until: Vec<Micros>,
    },
    Constant {
        done: bool,
        n: usize,
    },
    Preempt {
        gap: Exp<f64>,
        lo: Micros,
        hi: Micros,
    },
    Bursts {
        on: Exp<f64>,
        off: Exp<f64>,
        k: usize,
    },
    Empty,
}

/// Lazily generated events in non-decreasing start order. The sequence is a
/// pure function of the profile, so any prefix matches a longer run.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    cursor: Micros,
    cores: Vec<usize>,
    state: StreamState,
}

fn exp_mean(mean_us: f64) -> Exp<f64> {
    Exp::new(1.0 / mean_us.max(1.0)).expect("positive rate")
}

fn draw(rng: &mut ChaCha8Rng, d: &Exp<f64>) -> Micros {
    d.sample(rng).round() as Micros
}

impl NoiseStream {
    fn new(profile: &NoiseProfile) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let cores = profile.cores.clone();
        let mut cursor = 0;
        let state = match &profile.kind {
            NoiseKind::IdleBackground {
                rates,
                cores_per_event,
                min_gap,
            } => {
                let total: f64 = rates.iter().map(|r| r.per_second).sum();
                if total <= 0.0 || cores.is_empty() {
                    StreamState::Empty
                } else {
                    let mean_ia = MICROS_PER_SEC as f64 / total;
                    let mean_dur =
                        rates.iter().map(|r| r.duration as f64 * r.per_second).sum::<f64>() / total;
                    let gap_mean = match min_gap {
                        Some(g) => mean_ia - mean_dur - *g as f64,
                        None => mean_ia,
                    };
                    let gap = exp_mean(gap_mean);
                    cursor = draw(&mut rng, &gap);
                    StreamState::Idle {
                        durations: rates.iter().map(|r| r.duration).collect(),
                        pick: WeightedIndex::new(rates.iter().map(|r| r.per_second))
                            .map_err(|e| Error::InvalidNoise(e.to_string()))?,
                        gap,
                        min_gap: *min_gap,
                        per_event: *cores_per_event,
                        next_core: 0,
                        busy_until: vec![0; profile.core_count],
                    }
                }
            }
            NoiseKind::ConstantLoad { cores: n } => StreamState::Constant {
                done: *n == 0,
                n: *n,
            },
            NoiseKind::VmInterrupts {
                rate,
                preemption_min,
                preemption_max,
                ..
            } => {
                if *rate <= 0.0 {
                    StreamState::Empty
                } else {
                    let gap = exp_mean(MICROS_PER_SEC as f64 / rate);
                    cursor = draw(&mut rng, &gap);
                    StreamState::Preempt {
                        gap,
                        lo: *preemption_min,
                        hi: *preemption_max,
                    }
                }
            }
            NoiseKind::Custom {
                burst_cores,
                mean_on,
                mean_off,
            } => {
                if *burst_cores == 0 {
                    StreamState::Empty
                } else {
                    let off = exp_mean(*mean_off as f64);
                    cursor = draw(&mut rng, &off);
                    StreamState::Bursts {
                        on: exp_mean(*mean_on as f64),
                        off,
                        k: *burst_cores,
                    }
                }
            }
        };
        Ok(NoiseStream {
            rng,
            cursor,
            cores,
            state,
        })
    }

    /// Start time of the next event, if any.
    pub fn peek_start(&self) -> Option<Micros> {
        match self.state {
            StreamState::Empty | StreamState::Constant { done: true, .. } => None,
            StreamState::Constant { .. } => Some(0),
            _ => Some(self.cursor),
        }
    }
}

impl Iterator for NoiseStream {
    type Item = NoiseEvent;

    fn next(&mut self) -> Option<NoiseEvent> {
        let rng = &mut self.rng;
        match &mut self.state {
            StreamState::Empty => None,
            StreamState::Constant { done, n } => {
                if *done {
                    return None;
                }
                *done = true;
                Some(NoiseEvent {
                    start: 0,
                    end: Micros::MAX,
                    cores: self.cores[..*n].to_vec(),
                })
            }
            StreamState::Idle {
                durations,
                pick,
                gap,
                min_gap,
                per_event,
                next_core,
                busy_until,
            } => {
                let start = self.cursor;
                let dur = durations[pick.sample(rng)];
                let end = start + dur;
                // round-robin, preferring cores that are idle at `start`
                let n = self.cores.len();
                let mut chosen = Vec::with_capacity(*per_event);
                for pass in 0..2 {
                    for i in 0..n {
                        if chosen.len() == *per_event {
                            break;
                        }
                        let c = self.cores[(*next_core + i) % n];
                        if chosen.contains(&c) || (pass == 0 && busy_until[c] > start) {
                            continue;
                        }
                        chosen.push(c);
                    }
                }
                if let Some(&last) = chosen.last() {
                    let pos = self.cores.iter().position(|&c| c == last).unwrap();
                    *next_core = (pos + 1) % n;
                }
                for &c in &chosen {
                    busy_until[c] = busy_until[c].max(end);
                }
                self.cursor = match min_gap {
                    Some(g) => end + *g + draw(rng, gap),
                    None => start + draw(rng, gap),
                };
                Some(NoiseEvent {
                    start,
                    end,
                    cores: chosen,
                })
            }
            StreamState::Preempt { gap, lo, hi } => {
                let start = self.cursor;
                let dur = rng.gen_range(*lo..=*hi);
                self.cursor = start + draw(rng, gap);
                Some(NoiseEvent {
                    start,
                    end: start + dur,
                    cores: self.cores.first().copied().into_iter().collect(),
                })
            }
            StreamState::Bursts { on, off, k } => {
                let start = self.cursor;
                let dur = draw(rng, on).max(1);
                let mut cores: Vec<usize> = sample(rng, self.cores.len(), *k)
                    .into_iter()
                    .map(|i| self.cores[i])
                    .collect();
                cores.sort_unstable();
                self.cursor = start + dur + draw(rng, off).max(1);
                Some(NoiseEvent {
                    start,
                    end: start + dur,
                    cores,
                })
            }
        }
    }
}

/// Materialises a generator over `[0, horizon)`.
pub fn generate_noise(profile: &NoiseProfile, horizon: Micros) -> Result<ActivityTrace> {
    if horizon == 0 {
        return Err(Error::InvalidNoise("horizon must be positive".into()));
    }
    let mut trace = ActivityTrace::empty(profile.core_count, horizon);
    let mut events: Vec<NoiseEvent> = profile
        .stream()?
        .take_while(|e| e.start < horizon)
        .collect();
    // Per-core pushes must be in start order; events already are.
    events.sort_by_key(|e| e.start);
    for e in events {
        for &c in &e.cores {
            trace.push(c, e.start, e.end.min(horizon))?;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ms;

    fn idle(seed: u64) -> NoiseProfile {
        NoiseProfile::idle_background(8, (2..8).collect(), seed)
    }

    #[test]
    fn idle_event_count_matches_rate() {
        let t = generate_noise(&idle(7), ms(10_000)).unwrap();
        let n = t.interval_count() as f64;
        let sigma = 1180f64.sqrt();
        assert!((n - 1180.0).abs() < 3.0 * sigma, "got {n} events");
    }

    #[test]
    fn same_seed_same_trace() {
        assert_eq!(
            generate_noise(&idle(3), ms(2000)).unwrap(),
            generate_noise(&idle(3), ms(2000)).unwrap()
        );
        assert_ne!(
            generate_noise(&idle(3), ms(2000)).unwrap(),
            generate_noise(&idle(4), ms(2000)).unwrap()
        );
    }

    #[test]
    fn prefix_consistent() {
        let long = generate_noise(&idle(9), ms(2000)).unwrap();
        let short = generate_noise(&idle(9), ms(1000)).unwrap();
        for c in 0..8 {
            let want: Vec<_> = long.intervals(c).iter().filter(|iv| iv.start < ms(1000)).collect();
            assert_eq!(want.len(), short.intervals(c).len());
        }
    }

    #[test]
    fn constant_load_holds_cores() {
        let p = NoiseProfile::constant_load(8, vec![3, 4, 5], 2);
        let t = generate_noise(&p, ms(1000)).unwrap();
        for time in (0..ms(1000)).step_by(997) {
            assert_eq!(t.active_count(time), 2);
        }
    }

    #[test]
    fn zero_rate_is_empty() {
        let mut p = idle(1);
        if let NoiseKind::IdleBackground { rates, .. } = &mut p.kind {
            rates.iter_mut().for_each(|r| r.per_second = 0.0);
        }
        assert!(generate_noise(&p, ms(1000)).unwrap().is_empty());
        let vm = NoiseProfile::vm_interrupts(8, 0, Party::B, 0.0, 1);
        assert!(generate_noise(&vm, ms(1000)).unwrap().is_empty());
    }

    #[test]
    fn idle_events_do_not_overlap_with_gap() {
        let mut starts: Vec<(Micros, Micros)> = idle(11)
            .stream()
            .unwrap()
            .take(2000)
            .map(|e| (e.start, e.end))
            .collect();
        starts.sort_unstable();
        for w in starts.windows(2) {
            assert!(w[1].0 >= w[0].1 + ms(1));
        }
    }

    #[test]
    fn validation() {
        assert!(NoiseProfile::constant_load(8, (0..8).collect(), 8).validate().is_err());
        let mut p = idle(1);
        p.cores.push(9);
        assert!(p.validate().is_err());
        assert!(generate_noise(&idle(1), 0).is_err());
    }

    #[test]
    fn vm_preemption_rate_and_lengths() {
        let p = NoiseProfile::vm_interrupts(8, 1, Party::A, 4.26, 5);
        let events: Vec<_> = p.stream().unwrap().take_while(|e| e.start < ms(100_000)).collect();
        let n = events.len() as f64;
        assert!((n - 426.0).abs() < 3.0 * 426f64.sqrt(), "{n}");
        assert!(events.iter().all(|e| (ms(1)..=ms(10)).contains(&(e.end - e.start))));
    }
}
