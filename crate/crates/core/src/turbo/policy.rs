use crate::error::{Error, Result};
use crate::units::{ms, Hertz, Micros};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TurboLevel {
    /// Highest active-core count that still gets this frequency.
    pub max_active_cores: usize,
    pub frequency: Hertz,
}

impl TurboLevel {
    pub const fn new(max_active_cores: usize, frequency: Hertz) -> Self {
        TurboLevel {
            max_active_cores,
            frequency,
        }
    }
}

/// Active-core-count to turbo-frequency table of one CPU model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurboPolicy {
    name: String,
    core_count: usize,
    levels: Vec<TurboLevel>,
    base_frequency: Hertz,
    pcu_period: Micros,
    recovery_delay: Micros,
}

impl TurboPolicy {
    pub fn new(
        name: impl Into<String>,
        core_count: usize,
        levels: Vec<TurboLevel>,
        base_frequency: Hertz,
        pcu_period: Micros,
        recovery_delay: Micros,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidPolicy(m));
        if core_count == 0 {
            return bad("core_count must be positive".into());
        }
        if levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if pcu_period == 0 {
            return bad("pcu_period must be positive".into());
        }
        for w in levels.windows(2) {
            if w[1].max_active_cores <= w[0].max_active_cores {
                return bad("levels must be strictly ascending by max_active_cores".into());
            }
            if w[1].frequency >= w[0].frequency {
                return bad("level frequencies must be strictly decreasing".into());
            }
        }
        if levels[0].max_active_cores == 0 {
            return bad("the first level must admit at least one active core".into());
        }
        if levels.last().unwrap().max_active_cores != core_count {
            return bad("the last level must cover core_count".into());
        }
        if levels.iter().any(|l| l.frequency < base_frequency) {
            return bad("every level frequency must be at least the base frequency".into());
        }
        Ok(TurboPolicy {
            name: name.into(),
            core_count,
            levels,
            base_frequency,
            pcu_period,
            recovery_delay,
        })
    }

    /// Intel Xeon Silver 4108: 8 cores, 1.8 GHz base, 3.0/2.7/2.1 GHz turbo.
    pub fn xeon_silver_4108() -> Self {
        TurboPolicy::new(
            "xeon-silver-4108",
            8,
            vec![
                TurboLevel::new(2, Hertz::mhz(3000)),
                TurboLevel::new(4, Hertz::mhz(2700)),
                TurboLevel::new(8, Hertz::mhz(2100)),
            ],
            Hertz::mhz(1800),
            ms(1),
            0,
        )
        .expect("built-in policy is valid")
    }

    /// An AMD Zen+ style profile: full boost with at most two active cores,
    /// a lower all-core boost otherwise, and a 400 ms delay before the
    /// frequency climbs back after cores go to sleep.
    pub fn ryzen_2700x_like() -> Self {
        TurboPolicy::new(
            "ryzen-2700x-like",
            8,
            vec![
                TurboLevel::new(2, Hertz::mhz(4300)),
                TurboLevel::new(8, Hertz::mhz(4000)),
            ],
            Hertz::mhz(3700),
            ms(1),
            ms(400),
        )
        .expect("built-in policy is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "xeon-silver-4108" => Some(Self::xeon_silver_4108()),
            "ryzen-2700x-like" => Some(Self::ryzen_2700x_like()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 2] = ["xeon-silver-4108", "ryzen-2700x-like"];

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn core_count(&self) -> usize {
        self.core_count
    }

    pub fn levels(&self) -> &[TurboLevel] {
        &self.levels
    }

    pub fn base_frequency(&self) -> Hertz {
        self.base_frequency
    }

    pub fn pcu_period(&self) -> Micros {
        self.pcu_period
    }

    pub fn recovery_delay(&self) -> Micros {
        self.recovery_delay
    }

    pub fn with_recovery_delay(mut self, delay: Micros) -> Self {
        self.recovery_delay = delay;
        self
    }

    pub fn top_frequency(&self) -> Hertz {
        self.levels[0].frequency
    }

    /// The lowest ("all-core") turbo frequency.
    pub fn all_core_frequency(&self) -> Hertz {
        self.levels.last().unwrap().frequency
    }

    /// Index of the level selected for `active_count` cores. Zero active
    /// cores select the top level.
    pub fn level_index(&self, active_count: usize) -> Result<usize> {
        if active_count > self.core_count {
            return Err(Error::ActiveCountOutOfRange {
                active: active_count,
                cores: self.core_count,
            });
        }
        Ok(self
            .levels
            .iter()
            .position(|l| l.max_active_cores >= active_count)
            .expect("last level covers core_count"))
    }

    pub fn level_frequency(&self, index: usize) -> Result<Hertz> {
        self.levels
            .get(index)
            .map(|l| l.frequency)
            .ok_or(Error::LevelOutOfRange(index))
    }

    pub fn turbo_frequency(&self, active_count: usize) -> Result<Hertz> {
        Ok(self.levels[self.level_index(active_count)?].frequency)
    }
}

pub fn turbo_frequency(policy: &TurboPolicy, active_count: usize) -> Result<Hertz> {
    policy.turbo_frequency(active_count)
}
