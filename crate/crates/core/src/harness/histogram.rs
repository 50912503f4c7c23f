use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::turbo::{apply_policy, generate_noise, merge, ActivityTrace, FrequencyTrace, NoiseProfile, TurboPolicy};
use crate::units::{Micros, MICROS_PER_MS, MICROS_PER_SEC};

use super::scenario::{NoiseSpec, Scenario};

/// Dip counts keyed by duration in whole milliseconds.
pub type Histogram = BTreeMap<u64, usize>;

/// Each maximal stretch below the trace's highest frequency, bucketed by
/// its length rounded to the nearest millisecond (at least 1).
pub fn count_frequency_changes(trace: &FrequencyTrace) -> Histogram {
    let mut hist = Histogram::new();
    let Some(top) = trace.max_frequency() else {
        return hist;
    };
    let mut dip_start: Option<Micros> = None;
    let close = |start: Micros, end: Micros, hist: &mut Histogram| {
        let bucket = ((end - start + MICROS_PER_MS / 2) / MICROS_PER_MS).max(1);
        *hist.entry(bucket).or_default() += 1;
    };
    for (start, end, f) in trace.runs() {
        match (f < top, dip_start) {
            (true, None) => dip_start = Some(start),
            (false, Some(s)) => {
                close(s, start, &mut hist);
                dip_start = None;
            }
            _ => {}
        }
        if f < top && end == trace.horizon() {
            close(dip_start.take().expect("open dip"), end, &mut hist);
        }
    }
    hist
}

/// Mean histogram over seeds, per second of observation.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseHistogram {
    pub seeds: usize,
    pub horizon: Micros,
    pub per_second: BTreeMap<u64, f64>,
}

impl NoiseHistogram {
    pub fn total_per_second(&self) -> f64 {
        self.per_second.values().sum()
    }

    pub fn bucket(&self, ms: u64) -> f64 {
        self.per_second.get(&ms).copied().unwrap_or(0.0)
    }
}

/// Background noise of the scenario, seen by an observer that keeps the
/// top level's full core allowance busy. Every extra awake core then drops
/// the frequency, so each noise event is visible as one dip.
pub fn observer_trace(policy: &TurboPolicy, profiles: &[NoiseProfile], observers: usize, horizon: Micros) -> Result<FrequencyTrace> {
    let mut base = ActivityTrace::empty(policy.core_count(), horizon);
    for c in 0..observers {
        base.push(c, 0, horizon)?;
    }
    let mut traces = vec![base];
    for p in profiles {
        traces.push(generate_noise(p, horizon)?);
    }
    apply_policy(policy, &merge(&traces)?)
}

pub fn noise_histogram(s: &Scenario, horizon: Micros) -> Result<NoiseHistogram> {
    if horizon == 0 {
        return Err(Error::Config("histogram horizon must be positive".into()));
    }
    let policy = &s.policy;
    let observers = policy.levels()[0].max_active_cores;
    let n = policy.core_count();
    if observers + s.constant_cores() >= n {
        return Err(Error::Config("no cores left for background noise".into()));
    }
    let free: Vec<usize> = (observers + s.constant_cores()..n).collect();
    let busy: Vec<usize> = (observers..observers + s.constant_cores()).collect();
    let hists = s
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut profiles = Vec::new();
            if !busy.is_empty() {
                profiles.push(NoiseProfile::constant_load(n, busy.clone(), busy.len()));
            }
            for (i, spec) in s.noise.iter().enumerate() {
                if *spec == NoiseSpec::IdleBackground {
                    profiles.push(NoiseProfile::idle_background(n, free.clone(), seed.wrapping_mul(31).wrapping_add(i as u64)));
                }
            }
            Ok(count_frequency_changes(&observer_trace(policy, &profiles, observers, horizon)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = s.seeds.len() as f64 * horizon as f64 / MICROS_PER_SEC as f64;
    let mut per_second = BTreeMap::new();
    for h in &hists {
        for (&k, &v) in h {
            *per_second.entry(k).or_insert(0.0) += v as f64 / scale;
        }
    }
    Ok(NoiseHistogram {
        seeds: s.seeds.len(),
        horizon,
        per_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ms, Hertz};

    fn policy() -> TurboPolicy {
        TurboPolicy::xeon_silver_4108()
    }

    #[test]
    fn constant_trace_has_no_changes() {
        let t = FrequencyTrace::constant(Hertz::mhz(3000), ms(100));
        assert!(count_frequency_changes(&t).is_empty());
    }

    #[test]
    fn single_dip() {
        let mut a = ActivityTrace::empty(8, ms(100));
        a.push(0, 0, ms(100)).unwrap();
        for c in 1..4 {
            a.push(c, ms(20), ms(30)).unwrap();
        }
        let t = apply_policy(&policy(), &a).unwrap();
        let h = count_frequency_changes(&t);
        assert_eq!(h, Histogram::from([(10, 1)]));
    }

    #[test]
    fn dip_at_end_is_counted() {
        let mut a = ActivityTrace::empty(8, ms(50));
        for c in 0..3 {
            a.push(c, ms(45), ms(50)).unwrap();
        }
        let t = apply_policy(&policy(), &a).unwrap();
        assert_eq!(count_frequency_changes(&t), Histogram::from([(5, 1)]));
    }

    #[test]
    fn histogram_needs_free_cores() {
        let mut s = Scenario::new("h", policy());
        s.noise.push(NoiseSpec::ConstantLoad(6));
        assert!(noise_histogram(&s, ms(1000)).is_err());
    }

    #[test]
    fn idle_histogram_shape() {
        let mut s = Scenario::new("h", policy());
        s.seeds = (0..20).collect();
        let h = noise_histogram(&s, ms(1000)).unwrap();
        assert!((h.total_per_second() - 118.0).abs() < 15.0, "{h:?}");
        assert!((h.bucket(1) - 109.0).abs() < 15.0, "{h:?}");
    }
}
