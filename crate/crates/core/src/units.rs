//! Time and frequency units.

use std::fmt;

/// Simulation time and durations, in integer microseconds.
pub type Micros = u64;

pub const MICROS_PER_MS: Micros = 1_000;
pub const MICROS_PER_SEC: Micros = 1_000_000;

/// Milliseconds to [`Micros`].
pub const fn ms(v: u64) -> Micros {
    v * MICROS_PER_MS
}

/// Fractional milliseconds to [`Micros`], rounded to the nearest microsecond.
pub fn ms_f64(v: f64) -> Micros {
    (v * MICROS_PER_MS as f64).round() as Micros
}

pub fn as_secs(t: Micros) -> f64 {
    t as f64 / MICROS_PER_SEC as f64
}

pub fn as_ms(t: Micros) -> f64 {
    t as f64 / MICROS_PER_MS as f64
}

/// A clock frequency in hertz.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hertz(pub u64);

impl Hertz {
    pub const fn mhz(v: u64) -> Self {
        Hertz(v * 1_000_000)
    }

    pub fn ghz(v: f64) -> Self {
        Hertz((v * 1e9).round() as u64)
    }

    pub fn as_ghz(self) -> f64 {
        self.0 as f64 / 1e9
    }

    /// Cycles elapsed while running at this frequency for `dur`.
    pub fn cycles_over(self, dur: Micros) -> f64 {
        self.0 as f64 * dur as f64 * 1e-6
    }
}

impl fmt::Display for Hertz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} GHz", self.as_ghz())
    }
}
