use super::activity::ActivityTrace;
use super::policy::TurboPolicy;
use crate::error::{Error, Result};
use crate::units::{Hertz, Micros};

/// Piecewise-constant turbo frequency over `[0, horizon)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTrace {
    segments: Vec<(Micros, Hertz)>,
    horizon: Micros,
}

impl FrequencyTrace {
    pub fn constant(frequency: Hertz, horizon: Micros) -> Self {
        FrequencyTrace {
            segments: vec![(0, frequency)],
            horizon,
        }
    }

    pub(crate) fn empty() -> Self {
        FrequencyTrace {
            segments: Vec::new(),
            horizon: 0,
        }
    }

    /// `(start, frequency)` pairs; each segment lasts until the next start
    /// (or the horizon).
    pub fn segments(&self) -> &[(Micros, Hertz)] {
        &self.segments
    }

    pub fn horizon(&self) -> Micros {
        self.horizon
    }

    pub(crate) fn set_horizon(&mut self, horizon: Micros) {
        self.horizon = self.horizon.max(horizon);
    }

    pub(crate) fn push(&mut self, start: Micros, frequency: Hertz) {
        match self.segments.last() {
            Some(&(_, f)) if f == frequency => {}
            _ => self.segments.push((start, frequency)),
        }
    }

    pub fn frequency_at(&self, t: Micros) -> Option<Hertz> {
        if t >= self.horizon {
            return None;
        }
        let idx = self.segments.partition_point(|&(s, _)| s <= t);
        (idx > 0).then(|| self.segments[idx - 1].1)
    }

    pub fn max_frequency(&self) -> Option<Hertz> {
        self.segments.iter().map(|&(_, f)| f).max()
    }

    /// Maximal `(start, end, frequency)` runs clipped to the horizon.
    pub fn runs(&self) -> impl Iterator<Item = (Micros, Micros, Hertz)> + '_ {
        self.segments.iter().enumerate().filter_map(move |(i, &(s, f))| {
            let e = self
                .segments
                .get(i + 1)
                .map_or(self.horizon, |&(n, _)| n)
                .min(self.horizon);
            (s < e).then_some((s, e, f))
        })
    }

    /// Cycles elapsed over `[start, end)`.
    pub fn cycles(&self, start: Micros, end: Micros) -> f64 {
        if end <= start {
            return 0.0;
        }
        let mut idx = self.segments.partition_point(|&(s, _)| s <= start).saturating_sub(1);
        let mut total = 0.0;
        while idx < self.segments.len() {
            let (s, f) = self.segments[idx];
            if s >= end {
                break;
            }
            let seg_end = self.segments.get(idx + 1).map_or(self.horizon, |&(n, _)| n);
            let lo = s.max(start);
            let hi = seg_end.min(end);
            if hi > lo {
                total += f.cycles_over(hi - lo);
            }
            idx += 1;
        }
        total
    }
}

/// Incremental power-control-unit state machine.
///
/// At each tick `k * pcu_period` it samples the active-core count and
/// selects the policy frequency. Drops apply at the tick; a rise applies
/// only once it has been requested at every tick for `recovery_delay`.
#[derive(Clone, Debug)]
pub struct PcuRunner {
    policy: TurboPolicy,
    next_tick: Micros,
    current: Option<Hertz>,
    rise_since: Option<Micros>,
}

impl PcuRunner {
    pub fn new(policy: TurboPolicy) -> Self {
        PcuRunner {
            policy,
            next_tick: 0,
            current: None,
            rise_since: None,
        }
    }

    pub fn policy(&self) -> &TurboPolicy {
        &self.policy
    }

    /// First tick not yet evaluated.
    pub fn next_tick(&self) -> Micros {
        self.next_tick
    }

    fn step(&mut self, tick: Micros, active: usize) -> Result<Hertz> {
        let desired = self.policy.turbo_frequency(active)?;
        let next = match self.current {
            None => desired,
            Some(cur) if desired < cur => {
                self.rise_since = None;
                desired
            }
            Some(cur) if desired == cur => {
                self.rise_since = None;
                cur
            }
            Some(cur) => {
                let since = *self.rise_since.get_or_insert(tick);
                if tick - since >= self.policy.recovery_delay() {
                    self.rise_since = None;
                    desired
                } else {
                    cur
                }
            }
        };
        self.current = Some(next);
        Ok(next)
    }

    /// Evaluates every tick before `until`, appending changes to `out`.
    /// `activity` must be final for all of those ticks.
    pub fn advance(
        &mut self,
        until: Micros,
        activity: &ActivityTrace,
        out: &mut FrequencyTrace,
    ) -> Result<()> {
        let period = self.policy.pcu_period();
        while self.next_tick < until {
            let tick = self.next_tick;
            let f = self.step(tick, activity.active_count(tick))?;
            out.push(tick, f);
            self.next_tick += period;
        }
        out.set_horizon(until);
        Ok(())
    }
}

/// Frequency trace produced by running the PCU over the whole `activity`.
pub fn apply_policy(policy: &TurboPolicy, activity: &ActivityTrace) -> Result<FrequencyTrace> {
    if activity.core_count() != policy.core_count() {
        return Err(Error::CoreCountMismatch {
            expected: policy.core_count(),
            actual: activity.core_count(),
        });
    }
    let mut out = FrequencyTrace::empty();
    PcuRunner::new(policy.clone()).advance(activity.horizon(), activity, &mut out)?;
    Ok(out)
}
