use crate::error::{Error, Result};
use crate::units::Micros;

/// Half-open `[start, end)` span of simulation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start: Micros,
    pub end: Micros,
}

impl Interval {
    pub const fn new(start: Micros, end: Micros) -> Self {
        Interval { start, end }
    }

    pub fn len(&self) -> Micros {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: Micros) -> bool {
        self.start <= t && t < self.end
    }

    /// Length of the overlap with `[start, end)`.
    pub fn overlap(&self, start: Micros, end: Micros) -> Micros {
        self.end.min(end).saturating_sub(self.start.max(start))
    }
}

/// Per-core activity: when each core is awake (not in a deep sleep state).
///
/// Intervals on each core are kept sorted, disjoint and non-touching, so two
/// traces describing the same activity compare equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityTrace {
    cores: Vec<Vec<Interval>>,
    horizon: Micros,
}

impl ActivityTrace {
    pub fn empty(core_count: usize, horizon: Micros) -> Self {
        ActivityTrace {
            cores: vec![Vec::new(); core_count],
            horizon,
        }
    }

    /// Builds a trace from per-core interval lists, which must be sorted,
    /// disjoint and inside `[0, horizon)`. Touching intervals are coalesced.
    pub fn from_intervals(horizon: Micros, cores: Vec<Vec<Interval>>) -> Result<Self> {
        let mut trace = ActivityTrace::empty(cores.len(), horizon);
        for (core, list) in cores.into_iter().enumerate() {
            let mut prev_end = 0;
            for (i, iv) in list.into_iter().enumerate() {
                if iv.is_empty() {
                    return Err(Error::InvalidTrace(format!("empty interval on core {core}")));
                }
                if i > 0 && iv.start < prev_end {
                    return Err(Error::InvalidTrace(format!(
                        "intervals on core {core} overlap or are unsorted"
                    )));
                }
                prev_end = iv.end;
                trace.push(core, iv.start, iv.end)?;
            }
        }
        Ok(trace)
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }

    pub fn horizon(&self) -> Micros {
        self.horizon
    }

    pub fn intervals(&self, core: usize) -> &[Interval] {
        &self.cores[core]
    }

    /// Total number of stored intervals across all cores.
    pub fn interval_count(&self) -> usize {
        self.cores.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.iter().all(Vec::is_empty)
    }

    /// Marks `core` active on `[start, end)`. `start` must not precede the
    /// start of the core's last interval; overlapping or touching activity
    /// is unioned.
    pub fn push(&mut self, core: usize, start: Micros, end: Micros) -> Result<()> {
        if core >= self.cores.len() {
            return Err(Error::InvalidTrace(format!("core {core} out of range")));
        }
        if end > self.horizon {
            return Err(Error::OutsideHorizon { start, end });
        }
        if end <= start {
            return Ok(());
        }
        let list = &mut self.cores[core];
        match list.last_mut() {
            Some(last) if start < last.start => {
                return Err(Error::InvalidTrace(format!(
                    "out-of-order activity on core {core}: {start} < {}",
                    last.start
                )))
            }
            Some(last) if start <= last.end => last.end = last.end.max(end),
            _ => list.push(Interval::new(start, end)),
        }
        Ok(())
    }

    pub fn is_active(&self, core: usize, t: Micros) -> bool {
        let list = &self.cores[core];
        let idx = list.partition_point(|iv| iv.start <= t);
        idx > 0 && list[idx - 1].contains(t)
    }

    pub fn active_count(&self, t: Micros) -> usize {
        (0..self.cores.len()).filter(|&c| self.is_active(c, t)).count()
    }

    /// Sorted, deduplicated instants at which any core changes state.
    pub fn transitions(&self) -> Vec<Micros> {
        let mut ts: Vec<_> = self
            .cores
            .iter()
            .flatten()
            .flat_map(|iv| [iv.start, iv.end])
            .collect();
        ts.sort_unstable();
        ts.dedup();
        ts
    }
}

/// Per-core union of several traces over the same cores and horizon.
pub fn merge(traces: &[ActivityTrace]) -> Result<ActivityTrace> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidTrace("merge of zero traces".into()));
    };
    for t in &traces[1..] {
        if t.core_count() != first.core_count() {
            return Err(Error::CoreCountMismatch {
                expected: first.core_count(),
                actual: t.core_count(),
            });
        }
        if t.horizon != first.horizon {
            return Err(Error::HorizonMismatch {
                expected: first.horizon,
                actual: t.horizon,
            });
        }
    }
    let mut out = ActivityTrace::empty(first.core_count(), first.horizon);
    for core in 0..first.core_count() {
        let mut all: Vec<Interval> = traces
            .iter()
            .flat_map(|t| t.cores[core].iter().copied())
            .collect();
        all.sort_unstable();
        for iv in all {
            out.push(core, iv.start, iv.end)?;
        }
    }
    Ok(out)
}
