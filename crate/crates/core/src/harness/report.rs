use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::units::{as_ms, Micros};

use super::histogram::NoiseHistogram;
use super::scenario::ScenarioReport;

pub const CSV_HEADER: [&str; 6] = [
    "scenario",
    "bit_time_ms",
    "seed",
    "goodput_bps",
    "retransmissions_per_packet",
    "success",
];

/// Marker in the `seed` column of per-bit-time aggregate rows.
pub const AGGREGATE_SEED: &str = "mean";

fn fmt_ms(t: Micros) -> String {
    format!("{}", as_ms(t))
}

/// Per-run rows, then one aggregate row, for each bit time in order. In
/// aggregate rows `success` is the fraction of successful runs.
pub fn emit_csv(report: &ScenarioReport, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_HEADER)?;
    for agg in &report.aggregates {
        for r in report.runs.iter().filter(|r| r.bit_time == agg.bit_time) {
            csv.write_record([
                report.scenario.clone(),
                fmt_ms(r.bit_time),
                r.seed.to_string(),
                format!("{:.4}", r.goodput_bps),
                format!("{:.4}", r.retransmissions_per_packet),
                u8::from(r.success).to_string(),
            ])?;
        }
        csv.write_record([
            report.scenario.clone(),
            fmt_ms(agg.bit_time),
            AGGREGATE_SEED.to_string(),
            format!("{:.4}", agg.mean_goodput),
            format!("{:.4}", agg.mean_retransmissions),
            format!("{:.4}", agg.success_rate),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// One parsed CSV line. `seed` is `None` on aggregate rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub bit_time_ms: f64,
    pub seed: Option<u64>,
    pub goodput_bps: f64,
    pub retransmissions_per_packet: f64,
    pub success: f64,
}

pub fn parse_csv(r: impl Read) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let bad = |what: &str, v: &str| Error::Config(format!("bad {what} {v:?} in report"));
    let num = |what: &str, v: &str| v.parse::<f64>().map_err(|_| bad(what, v));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Config(format!("report row has {} columns", rec.len())));
        }
        rows.push(CsvRow {
            scenario: rec[0].to_string(),
            bit_time_ms: num("bit time", &rec[1])?,
            seed: match &rec[2] {
                AGGREGATE_SEED => None,
                s => Some(s.parse().map_err(|_| bad("seed", s))?),
            },
            goodput_bps: num("goodput", &rec[3])?,
            retransmissions_per_packet: num("retransmissions", &rec[4])?,
            success: num("success", &rec[5])?,
        });
    }
    Ok(rows)
}

pub fn emit_histogram_csv(name: &str, h: &NoiseHistogram, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["scenario", "duration_ms", "events_per_second"])?;
    for (ms, rate) in &h.per_second {
        csv.write_record([name.to_string(), ms.to_string(), format!("{rate:.3}")])?;
    }
    csv.write_record([name.to_string(), "total".into(), format!("{:.3}", h.total_per_second())])?;
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{Aggregate, RunResult};
    use crate::link::TransferStats;
    use crate::units::ms;

    fn run(bt: Micros, seed: u64, g: f64, ok: bool) -> RunResult {
        RunResult {
            bit_time: bt,
            seed,
            success: ok,
            goodput_bps: g,
            retransmissions_per_packet: 0.25,
            stats: TransferStats::default(),
            frequency_changes: Default::default(),
            outcomes: vec![],
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let rep = ScenarioReport {
            scenario: "x".into(),
            runs: vec![],
            aggregates: vec![],
        };
        let mut buf = Vec::new();
        emit_csv(&rep, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scenario,bit_time_ms,seed,goodput_bps,retransmissions_per_packet,success\n"
        );
    }

    #[test]
    fn round_trip() {
        let runs = vec![run(ms(7), 1, 61.5, true), run(ms(7), 2, 0.0, false), run(7_500, 1, 50.0, true)];
        let aggregates = vec![
            Aggregate::of(ms(7), &[&runs[0], &runs[1]]),
            Aggregate::of(7_500, &[&runs[2]]),
        ];
        let rep = ScenarioReport {
            scenario: "idle".into(),
            runs,
            aggregates,
        };
        let mut buf = Vec::new();
        emit_csv(&rep, &mut buf).unwrap();
        let rows = parse_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].seed, Some(1));
        assert_eq!(rows[0].goodput_bps, 61.5);
        assert_eq!(rows[1].success, 0.0);
        assert_eq!(rows[2].seed, None);
        assert_eq!(rows[2].goodput_bps, 30.75);
        assert_eq!(rows[2].success, 0.5);
        assert_eq!(rows[3].bit_time_ms, 7.5);
        assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
