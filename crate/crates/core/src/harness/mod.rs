//! Experiment runner: scenarios, sweeps, noise histograms and CSV output.

mod config;
mod histogram;
mod report;
mod scenario;

pub use config::{parse_countermeasure, parse_noise, ScenarioConfig};
pub use histogram::{count_frequency_changes, noise_histogram, observer_trace, Histogram, NoiseHistogram};
pub use report::{emit_csv, emit_histogram_csv, parse_csv, CsvRow, AGGREGATE_SEED, CSV_HEADER};
pub use scenario::{
    run_once, run_scenario, sweep, Aggregate, Countermeasure, NoiseSpec, RunResult, Scenario, ScenarioReport,
    ARTIFICIAL_NOISE_OFF, ARTIFICIAL_NOISE_ON, DEFAULT_JITTER,
};
