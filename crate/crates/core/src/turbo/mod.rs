//! Discrete-event model of a shared turbo frequency ceiling.
//!
//! Time is integer microseconds throughout. A [`TurboPolicy`] maps the number
//! of awake cores to a frequency; the power control unit re-evaluates it once
//! per `pcu_period` by sampling the instantaneous active-core count at each
//! tick (see [`PcuRunner`]).

mod activity;
mod frequency;
mod noise;
mod policy;

pub use activity::{merge, ActivityTrace, Interval};
pub use frequency::{apply_policy, FrequencyTrace, PcuRunner};
pub use noise::{
    generate_noise, NoiseEvent, NoiseKind, NoiseProfile, NoiseStream, RateEntry,
    IDLE_BACKGROUND_RATES,
};
pub use policy::{turbo_frequency, TurboLevel, TurboPolicy};
