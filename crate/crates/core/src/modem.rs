//! On-off keyed modem.
//!
//! A 1-bit keeps the transmitter cores awake for one bit time and a 0-bit
//! lets them sleep. At the receiver the polarity is inverted: awake cores pull
//! the shared turbo ceiling down, so 1-bits show up as *low* counts.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::phy::{SampleSeries, TxSchedule};
use crate::turbo::{Interval, TurboPolicy};
use crate::units::Micros;

pub const DEFAULT_SYNC_WORD: u8 = 0b1010_1100;

#[derive(Clone, Debug, PartialEq)]
pub struct ModemConfig {
    pub bit_time: Micros,
    pub oversampling: usize,
    pub threshold: u64,
    pub glitch_max: usize,
    pub sync_word: Bits,
}

impl ModemConfig {
    pub fn new(bit_time: Micros, threshold: u64) -> Result<Self> {
        let cfg = ModemConfig {
            bit_time,
            oversampling: 8,
            threshold,
            glitch_max: 2,
            sync_word: Bits::from_bytes(&[DEFAULT_SYNC_WORD]),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_oversampling(mut self, oversampling: usize, glitch_max: usize) -> Result<Self> {
        self.oversampling = oversampling;
        self.glitch_max = glitch_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModem(m));
        if self.oversampling < 3 {
            return bad(format!("oversampling {} is below 3", self.oversampling));
        }
        if self.glitch_max == 0 || 2 * self.glitch_max >= self.oversampling {
            return bad(format!(
                "glitch_max {} must be positive and below half the oversampling ({})",
                self.glitch_max, self.oversampling
            ));
        }
        if self.bit_time == 0 || self.bit_time % self.oversampling as Micros != 0 {
            return bad(format!(
                "bit time {} us is not a multiple of the oversampling {}",
                self.bit_time, self.oversampling
            ));
        }
        if self.window() < crate::phy::MIN_SAMPLE_WINDOW {
            return bad(format!("sampling window {} us is too short", self.window()));
        }
        if self.threshold == 0 {
            return bad("threshold must be positive".into());
        }
        if self.sync_word.is_empty() {
            return bad("sync word is empty".into());
        }
        Ok(())
    }

    /// Length of one counting-loop window.
    pub fn window(&self) -> Micros {
        self.bit_time / self.oversampling as Micros
    }

    /// Air time of `n` bits.
    pub fn duration(&self, n: usize) -> Micros {
        self.bit_time * n as Micros
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    High,
    Low,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinarySampleStream {
    pub timestamps: Vec<Micros>,
    pub values: Vec<Level>,
}

impl BinarySampleStream {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Builds a stream with synthetic timestamps, mostly for tests.
    pub fn from_levels(values: Vec<Level>, window: Micros) -> Self {
        let timestamps = (0..values.len() as Micros).map(|k| k * window).collect();
        BinarySampleStream { timestamps, values }
    }

    /// Maximal runs of equal values as `(value, length)`.
    pub fn runs(&self) -> Vec<(Level, usize)> {
        runs(&self.values)
    }
}

fn runs(values: &[Level]) -> Vec<(Level, usize)> {
    let mut out: Vec<(Level, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Schedule for `bits` starting at time zero. Runs of 1-bits become one
/// active entry each.
pub fn modulate(bits: &[bool], cfg: &ModemConfig, tx_cores: usize) -> TxSchedule {
    let mut entries = Vec::new();
    let mut k = 0;
    while k < bits.len() {
        let run = bits[k..].iter().take_while(|&&b| b == bits[k]).count();
        if bits[k] {
            entries.push(Interval::new(cfg.duration(k), cfg.duration(k + run)));
        }
        k += run;
    }
    TxSchedule {
        start: 0,
        end: cfg.duration(bits.len()),
        tx_cores,
        entries,
    }
}

pub fn classify(samples: &SampleSeries, threshold: u64) -> BinarySampleStream {
    let values = samples
        .samples
        .iter()
        .map(|s| match s.count {
            Some(c) if c > threshold => Level::High,
            Some(_) => Level::Low,
            None => Level::Missing,
        })
        .collect();
    let timestamps = samples.samples.iter().map(|s| s.timestamp).collect();
    BinarySampleStream { timestamps, values }
}

/// Midpoint between the counts one window yields at two policy levels.
pub fn default_threshold(
    policy: &TurboPolicy,
    window: Micros,
    idle_level: usize,
    signal_level: usize,
    ops_per_cycle: f64,
) -> Result<u64> {
    if idle_level == signal_level {
        return Err(Error::IdenticalLevels(idle_level));
    }
    let count = |lvl| -> Result<f64> { Ok(policy.level_frequency(lvl)?.cycles_over(window) * ops_per_cycle) };
    let (a, b) = (count(idle_level)?, count(signal_level)?);
    Ok(((a + b) / 2.0).round() as u64)
}

/// Fills missing samples from their left neighbour (a leading gap becomes
/// high, the idle state) and then merges short runs into what precedes them.
///
/// The pass is a single sweep over runs. An interior run no longer than
/// `glitch_max` whose left neighbour in the output has the opposite value is
/// absorbed into that neighbour.
pub fn reject_glitches(stream: &BinarySampleStream, glitch_max: usize) -> BinarySampleStream {
    let mut prev = Level::High;
    let filled: Vec<Level> = stream
        .values
        .iter()
        .map(|&v| {
            if v != Level::Missing {
                prev = v;
            }
            prev
        })
        .collect();
    let input = runs(&filled);
    let mut out: Vec<(Level, usize)> = Vec::with_capacity(input.len());
    for (i, &(v, n)) in input.iter().enumerate() {
        let interior = i > 0 && i + 1 < input.len();
        match out.last_mut() {
            Some((last, m)) if *last == v || (interior && n <= glitch_max) => *m += n,
            _ => out.push((v, n)),
        }
    }
    let values = out.into_iter().flat_map(|(v, n)| std::iter::repeat(v).take(n)).collect();
    BinarySampleStream {
        timestamps: stream.timestamps.clone(),
        values,
    }
}

/// Run-length decoding: each run yields `round(len / oversampling)` bits
/// (half rounds up, at least one), 1-bits for low runs and 0-bits for high.
pub fn demodulate(stream: &BinarySampleStream, cfg: &ModemConfig) -> Bits {
    let os = cfg.oversampling;
    let mut out = Bits::new();
    for (v, n) in stream.runs() {
        let bit = match v {
            Level::Low => true,
            Level::High => false,
            // Only reachable on streams that skipped glitch rejection.
            Level::Missing => continue,
        };
        let count = ((2 * n + os) / (2 * os)).max(1);
        for _ in 0..count {
            out.push(bit);
        }
    }
    out
}

/// Index just past the first occurrence of `sync_word` at or after `from`.
pub fn find_sync(bits: &[bool], sync_word: &[bool], from: usize) -> Option<usize> {
    if sync_word.is_empty() || bits.len() < sync_word.len() {
        return None;
    }
    (from..=bits.len() - sync_word.len())
        .find(|&i| &bits[i..i + sync_word.len()] == sync_word)
        .map(|i| i + sync_word.len())
}

/// classify, reject_glitches and demodulate in one go.
pub fn receive(samples: &SampleSeries, cfg: &ModemConfig) -> Bits {
    let classified = classify(samples, cfg.threshold);
    demodulate(&reject_glitches(&classified, cfg.glitch_max), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::Sample;
    use crate::units::ms;
    use proptest::prelude::*;
    use Level::{High as H, Low as L, Missing as M};

    fn cfg(os: usize) -> ModemConfig {
        ModemConfig::new(ms(12), 2_850_000)
            .unwrap()
            .with_oversampling(os, (os - 1) / 2)
            .unwrap()
    }

    fn levels(s: &str) -> BinarySampleStream {
        let v = s
            .chars()
            .map(|c| match c {
                'H' => H,
                'L' => L,
                _ => M,
            })
            .collect();
        BinarySampleStream::from_levels(v, 1000)
    }

    fn show(s: &BinarySampleStream) -> String {
        s.values
            .iter()
            .map(|v| match v {
                H => 'H',
                L => 'L',
                M => '?',
            })
            .collect()
    }

    #[test]
    fn config_invariants() {
        assert!(ModemConfig::new(7_001, 1).is_err());
        assert!(ModemConfig::new(ms(7), 1).is_ok());
        assert!(ModemConfig::new(ms(8), 1).is_ok());
        assert!(ModemConfig::new(ms(8), 0).is_err());
        let c = ModemConfig::new(ms(8), 1).unwrap();
        assert!(c.clone().with_oversampling(2, 1).is_err());
        assert!(c.clone().with_oversampling(4, 2).is_err());
        assert!(c.clone().with_oversampling(8, 3).is_ok());
        assert!(c.with_oversampling(8, 4).is_err());
    }

    #[test]
    fn modulate_examples() {
        let c = ModemConfig::new(ms(8), 1).unwrap();
        let s = modulate(&"1".parse::<Bits>().unwrap(), &c, 2);
        assert_eq!(s.entries, vec![Interval::new(0, ms(8))]);
        let s = modulate(&"1100".parse::<Bits>().unwrap(), &c, 2);
        assert_eq!(s.entries, vec![Interval::new(0, ms(16))]);
        assert_eq!(s.end, ms(32));

        let c7 = ModemConfig::new(ms(7), 1).unwrap().with_oversampling(7, 2).unwrap();
        let s = modulate(&"10101100".parse::<Bits>().unwrap(), &c7, 2);
        assert_eq!(
            s.entries,
            vec![
                Interval::new(0, ms(7)),
                Interval::new(ms(14), ms(21)),
                Interval::new(ms(28), ms(42)),
            ]
        );
    }

    #[test]
    fn classify_tie_is_low() {
        let series = SampleSeries {
            window: 1000,
            samples: [5, 10, 11, 3]
                .iter()
                .enumerate()
                .map(|(k, &c)| Sample {
                    timestamp: k as Micros * 1000,
                    count: Some(c),
                })
                .chain(std::iter::once(Sample {
                    timestamp: 4000,
                    count: None,
                }))
                .collect(),
        };
        assert_eq!(show(&classify(&series, 10)), "LLHL?");
    }

    #[test]
    fn threshold_examples() {
        let p = TurboPolicy::xeon_silver_4108();
        assert_eq!(default_threshold(&p, ms(1), 0, 1, 1.0).unwrap(), 2_850_000);
        assert_eq!(default_threshold(&p, ms(1), 1, 2, 1.0).unwrap(), 2_400_000);
        assert!(matches!(
            default_threshold(&p, ms(1), 1, 1, 1.0),
            Err(Error::IdenticalLevels(1))
        ));
        assert!(default_threshold(&p, ms(1), 0, 9, 1.0).is_err());
    }

    #[test]
    fn glitch_examples() {
        assert_eq!(show(&reject_glitches(&levels("HHHLHHH"), 2)), "HHHHHHH");
        assert_eq!(show(&reject_glitches(&levels("HHLLLHH"), 2)), "HHLLLHH");
        assert_eq!(show(&reject_glitches(&levels("HHHHH"), 2)), "HHHHH");
        assert_eq!(show(&reject_glitches(&levels("HHLHLHH"), 1)), "HHHHHHH");
        // missing samples inherit, a leading gap counts as high
        assert_eq!(show(&reject_glitches(&levels("??LLLL?LL"), 1)), "HHLLLLLLL");
        // runs at the edges are never glitches
        assert_eq!(show(&reject_glitches(&levels("LHHHHL"), 2)), "LHHHHL");
    }

    #[test]
    fn demodulate_examples() {
        let c = cfg(8);
        let s = levels(&format!("{}{}", "L".repeat(8), "H".repeat(8)));
        assert_eq!(demodulate(&s, &c).to_string(), "10");
        let c6 = ModemConfig::new(ms(12), 1).unwrap().with_oversampling(6, 2).unwrap();
        let s = levels(&format!("{}{}", "L".repeat(6), "H".repeat(12)));
        assert_eq!(demodulate(&s, &c6).to_string(), "100");
        // half rounds up, short runs still give one bit
        let s = levels(&format!("{}{}", "L".repeat(12), "H".repeat(2)));
        assert_eq!(demodulate(&s, &c).to_string(), "110");
        assert!(demodulate(&levels(""), &c).is_empty());
    }

    #[test]
    fn sync_search() {
        let sync = Bits::from_bytes(&[DEFAULT_SYNC_WORD]);
        let b: Bits = "10101100 111".parse().unwrap();
        assert_eq!(find_sync(&b, &sync, 0), Some(8));
        let b: Bits = "11 10101100 0".parse().unwrap();
        assert_eq!(find_sync(&b, &sync, 0), Some(10));
        let b: Bits = "1010110".parse().unwrap();
        assert_eq!(find_sync(&b, &sync, 0), None);
        let b: Bits = "10101100 10101100".parse().unwrap();
        assert_eq!(find_sync(&b, &sync, 1), Some(16));
    }

    fn arb_levels() -> impl Strategy<Value = Vec<Level>> {
        prop::collection::vec(prop_oneof![4 => Just(H), 4 => Just(L), 1 => Just(M)], 0..200)
    }

    proptest! {
        #[test]
        fn glitch_rejection_is_idempotent(v in arb_levels(), g in 1usize..4) {
            let s = BinarySampleStream::from_levels(v, 1000);
            let once = reject_glitches(&s, g);
            let twice = reject_glitches(&once, g);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn glitch_rejection_keeps_length(v in arb_levels(), g in 1usize..4) {
            let s = BinarySampleStream::from_levels(v, 1000);
            let out = reject_glitches(&s, g);
            prop_assert_eq!(out.len(), s.len());
            prop_assert!(!out.values.contains(&M));
        }

        #[test]
        fn demodulated_length_on_exact_runs(bits in prop::collection::vec(any::<bool>(), 1..100), os in 3usize..17) {
            let v: Vec<Level> = bits
                .iter()
                .flat_map(|&b| std::iter::repeat(if b { L } else { H }).take(os))
                .collect();
            let c = ModemConfig::new(1000 * os as Micros, 1).unwrap().with_oversampling(os, (os - 1) / 2).unwrap();
            let out = demodulate(&BinarySampleStream::from_levels(v, 1000), &c);
            prop_assert_eq!(out.as_slice(), &bits[..]);
        }
    }
}
