//! Offline Reed-Solomon trade-off analysis over recorded packet outcomes.
//!
//! No decoder is run. A packet counts as repairable when its byte-error
//! count is within the code's correction capability.
//!
//! Outcome traces are tab-separated text:
//!
//! ```text
//! # bit_time_us=7000
//! # frame_bits=96
//! # ack_bits=32
//! packet	sent_hex	received_hex
//! 0	00414243...	00414243...
//! 1	01444546...	lost
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::link::{FRAME_BITS, SYNC_BITS};
use crate::modem::find_sync;
use crate::units::{as_secs, Micros};

/// Bytes after the sync word: sequence number, payload and CRC.
pub const OUTCOME_BYTES: usize = (FRAME_BITS - SYNC_BITS) / 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketOutcome {
    pub sent: Vec<u8>,
    /// `None` when no frame start was found.
    pub received: Option<Vec<u8>>,
    pub corrupted_byte_count: usize,
}

impl PacketOutcome {
    pub fn new(sent: Vec<u8>, received: Option<Vec<u8>>) -> Result<Self> {
        let corrupted_byte_count = match &received {
            Some(r) => byte_errors(&sent, r)?,
            None => sent.len(),
        };
        Ok(PacketOutcome {
            sent,
            received,
            corrupted_byte_count,
        })
    }

    /// Compares an encoded frame with the bits demodulated at the receiver,
    /// aligned on the first sync word.
    pub fn from_bits(sent_frame: &[bool], received: &[bool]) -> Result<Self> {
        let sync = &sent_frame[..SYNC_BITS];
        let sent = crate::bits::pack_bytes(&sent_frame[SYNC_BITS..]);
        let body = find_sync(received, sync, 0)
            .filter(|&at| received.len() >= at + 8 * sent.len())
            .map(|at| crate::bits::pack_bytes(&received[at..at + 8 * sent.len()]));
        Self::new(sent, body)
    }

    pub fn is_lost(&self) -> bool {
        self.received.is_none()
    }

    pub fn is_clean(&self) -> bool {
        !self.is_lost() && self.corrupted_byte_count == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FecModel {
    pub parity_bytes: usize,
    pub correctable_bytes: usize,
}

impl FecModel {
    pub fn new(parity_bytes: usize) -> Result<Self> {
        if parity_bytes < 2 || parity_bytes % 2 != 0 {
            return Err(Error::Config(format!(
                "parity bytes must be even and at least 2, got {parity_bytes}"
            )));
        }
        Ok(FecModel {
            parity_bytes,
            correctable_bytes: parity_bytes / 2,
        })
    }
}

impl Default for FecModel {
    fn default() -> Self {
        FecModel::new(4).expect("valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoodputMode {
    RetransmitOnly,
    RsPlusRetransmit,
}

impl GoodputMode {
    pub fn name(self) -> &'static str {
        match self {
            GoodputMode::RetransmitOnly => "retransmit-only",
            GoodputMode::RsPlusRetransmit => "rs-plus-retransmit",
        }
    }
}

pub fn byte_errors(sent: &[u8], received: &[u8]) -> Result<usize> {
    if sent.len() != received.len() {
        return Err(Error::LengthMismatch(sent.len(), received.len()));
    }
    Ok(sent.iter().zip(received).filter(|(a, b)| a != b).count())
}

pub fn rs_correctable(outcome: &PacketOutcome, fec: &FecModel) -> bool {
    !outcome.is_lost() && outcome.corrupted_byte_count <= fec.correctable_bytes
}

fn delivered_first_try(o: &PacketOutcome, mode: GoodputMode, fec: &FecModel) -> bool {
    match mode {
        GoodputMode::RetransmitOnly => o.is_clean(),
        GoodputMode::RsPlusRetransmit => rs_correctable(o, fec),
    }
}

/// Transmissions needed when every retransmission arrives intact.
pub fn attempts(outcomes: &[PacketOutcome], mode: GoodputMode, fec: &FecModel) -> usize {
    outcomes.len() + outcomes.iter().filter(|o| !delivered_first_try(o, mode, fec)).count()
}

/// `64 N / (attempts * (frame_bits [+ 8 * parity] + ack_bits) * bit_time)`.
pub fn estimate_goodput(
    outcomes: &[PacketOutcome],
    frame_bits: usize,
    ack_bits: usize,
    bit_time: Micros,
    mode: GoodputMode,
    fec: &FecModel,
) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let parity_bits = match mode {
        GoodputMode::RetransmitOnly => 0,
        GoodputMode::RsPlusRetransmit => 8 * fec.parity_bytes,
    };
    let per_attempt = (frame_bits + parity_bits + ack_bits) as f64;
    let n = attempts(outcomes, mode, fec) as f64;
    Ok(64.0 * outcomes.len() as f64 / (n * per_attempt * as_secs(bit_time)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTrace {
    pub bit_time: Micros,
    pub frame_bits: usize,
    pub ack_bits: usize,
    pub outcomes: Vec<PacketOutcome>,
}

mod hex {
    pub fn encode(bytes: &[u8]) -> String {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn decode(s: &str) -> Option<Vec<u8>> {
        if s.len() % 2 != 0 {
            return None;
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
            .collect()
    }
}

impl OutcomeTrace {
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "# bit_time_us={}", self.bit_time);
        let _ = writeln!(out, "# frame_bits={}", self.frame_bits);
        let _ = writeln!(out, "# ack_bits={}", self.ack_bits);
        out.push_str("packet\tsent_hex\treceived_hex\n");
        for (k, o) in self.outcomes.iter().enumerate() {
            let rx = o.received.as_deref().map_or_else(|| "lost".to_string(), hex::encode);
            let _ = writeln!(out, "{k}\t{}\t{rx}", hex::encode(&o.sent));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Config(format!("trace line {line}: {msg}"));
        let (mut bit_time, mut frame_bits, mut ack_bits) = (None, None, None);
        let mut outcomes = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let n = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let v: u64 = v.trim().parse().map_err(|_| bad(n, "bad header value"))?;
                    match k.trim() {
                        "bit_time_us" => bit_time = Some(v),
                        "frame_bits" => frame_bits = Some(v as usize),
                        "ack_bits" => ack_bits = Some(v as usize),
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with("packet") {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(n, "expected 3 tab-separated columns"));
            }
            let sent = hex::decode(cols[1]).ok_or_else(|| bad(n, "bad sent hex"))?;
            let received = match cols[2] {
                "lost" => None,
                h => Some(hex::decode(h).ok_or_else(|| bad(n, "bad received hex"))?),
            };
            outcomes.push(PacketOutcome::new(sent, received).map_err(|e| bad(n, &e.to_string()))?);
        }
        let missing = |k: &str| Error::Config(format!("trace header {k} missing"));
        Ok(OutcomeTrace {
            bit_time: bit_time.ok_or_else(|| missing("bit_time_us"))?,
            frame_bits: frame_bits.ok_or_else(|| missing("frame_bits"))?,
            ack_bits: ack_bits.ok_or_else(|| missing("ack_bits"))?,
            outcomes,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub mode: GoodputMode,
    pub packets: usize,
    pub broken: usize,
    pub rs_fixable: usize,
    pub attempts: usize,
    pub goodput_bps: f64,
}

pub fn compare(trace: &OutcomeTrace, fec: &FecModel) -> Result<Vec<ComparisonRow>> {
    let broken = trace.outcomes.iter().filter(|o| !o.is_clean()).count();
    let rs_fixable = trace
        .outcomes
        .iter()
        .filter(|o| !o.is_clean() && rs_correctable(o, fec))
        .count();
    [GoodputMode::RetransmitOnly, GoodputMode::RsPlusRetransmit]
        .into_iter()
        .map(|mode| {
            Ok(ComparisonRow {
                mode,
                packets: trace.outcomes.len(),
                broken,
                rs_fixable,
                attempts: attempts(&trace.outcomes, mode, fec),
                goodput_bps: estimate_goodput(
                    &trace.outcomes,
                    trace.frame_bits,
                    trace.ack_bits,
                    trace.bit_time,
                    mode,
                    fec,
                )?,
            })
        })
        .collect()
}

pub fn write_comparison(rows: &[ComparisonRow], w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["mode", "packets", "broken", "rs_fixable", "attempts", "goodput_bps"])?;
    for r in rows {
        csv.write_record([
            r.mode.name().to_string(),
            r.packets.to_string(),
            r.broken.to_string(),
            r.rs_fixable.to_string(),
            r.attempts.to_string(),
            format!("{:.3}", r.goodput_bps),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{encode_frame, ACK_BITS};
    use crate::units::ms;
    use proptest::prelude::*;

    fn outcome(corrupt: usize, lost: bool) -> PacketOutcome {
        let sent = vec![0u8; OUTCOME_BYTES];
        if lost {
            return PacketOutcome::new(sent, None).unwrap();
        }
        let mut rx = sent.clone();
        for b in rx.iter_mut().take(corrupt) {
            *b = 0xFF;
        }
        PacketOutcome::new(sent, Some(rx)).unwrap()
    }

    /// 40 packets: 29 clean, 7 with at most two bad bytes, 4 beyond repair.
    pub(crate) fn reference_scenario() -> Vec<PacketOutcome> {
        let mut v: Vec<_> = (0..29).map(|_| outcome(0, false)).collect();
        v.extend((0..7).map(|k| outcome(1 + k % 2, false)));
        v.extend([outcome(3, false), outcome(5, false), outcome(0, true), outcome(0, true)]);
        v
    }

    #[test]
    fn byte_error_examples() {
        assert_eq!(byte_errors(b"abc", b"abc").unwrap(), 0);
        assert_eq!(byte_errors(b"abc", b"abd").unwrap(), 1);
        assert!(matches!(byte_errors(b"ab", b"abc"), Err(Error::LengthMismatch(2, 3))));
    }

    #[test]
    fn correctability() {
        let fec = FecModel::default();
        assert_eq!(fec.correctable_bytes, 2);
        assert!(rs_correctable(&outcome(2, false), &fec));
        assert!(!rs_correctable(&outcome(3, false), &fec));
        assert!(rs_correctable(&outcome(0, false), &fec));
        assert!(!rs_correctable(&outcome(0, true), &fec));
        assert_eq!(outcome(0, true).corrupted_byte_count, OUTCOME_BYTES);
        assert!(FecModel::new(3).is_err());
        assert!(FecModel::new(0).is_err());
    }

    #[test]
    fn reference_attempts_and_ordering() {
        let v = reference_scenario();
        let fec = FecModel::default();
        assert_eq!(attempts(&v, GoodputMode::RsPlusRetransmit, &fec), 44);
        assert_eq!(attempts(&v, GoodputMode::RetransmitOnly, &fec), 51);
        let g = |m| estimate_goodput(&v, FRAME_BITS, ACK_BITS, ms(5), m, &fec).unwrap();
        let (plain, rs) = (g(GoodputMode::RetransmitOnly), g(GoodputMode::RsPlusRetransmit));
        assert!((plain - 2560.0 / (51.0 * 128.0 * 0.005)).abs() < 1e-9);
        assert!(plain > rs);
    }

    #[test]
    fn closed_form_without_errors() {
        let v: Vec<_> = (0..40).map(|_| outcome(0, false)).collect();
        let fec = FecModel::default();
        let g = estimate_goodput(&v, 96, 32, ms(5), GoodputMode::RetransmitOnly, &fec).unwrap();
        assert!((g - 100.0).abs() < 1e-9);
        let rs = estimate_goodput(&v, 96, 32, ms(5), GoodputMode::RsPlusRetransmit, &fec).unwrap();
        assert!(rs < g);
        assert!(matches!(
            estimate_goodput(&[], 96, 32, ms(5), GoodputMode::RetransmitOnly, &fec),
            Err(Error::EmptyOutcomes)
        ));
        assert_eq!(attempts(&[outcome(0, true)], GoodputMode::RetransmitOnly, &fec), 2);
    }

    #[test]
    fn outcome_from_bits() {
        let frame = encode_frame(4, b"ABCDEFGH").unwrap();
        let mut rx: Vec<bool> = vec![false, false, false];
        rx.extend_from_slice(&frame);
        let o = PacketOutcome::from_bits(&frame, &rx).unwrap();
        assert!(o.is_clean());
        assert_eq!(o.sent.len(), OUTCOME_BYTES);
        rx[3 + 20] = !rx[3 + 20];
        rx[3 + 60] = !rx[3 + 60];
        assert_eq!(PacketOutcome::from_bits(&frame, &rx).unwrap().corrupted_byte_count, 2);
        assert!(PacketOutcome::from_bits(&frame, &rx[..50]).unwrap().is_lost());
    }

    #[test]
    fn trace_round_trip_and_compare() {
        let trace = OutcomeTrace {
            bit_time: ms(5),
            frame_bits: 96,
            ack_bits: 32,
            outcomes: reference_scenario(),
        };
        let mut buf = Vec::new();
        trace.write(&mut buf).unwrap();
        let back = OutcomeTrace::read(&buf[..]).unwrap();
        assert_eq!(back, trace);
        let rows = compare(&back, &FecModel::default()).unwrap();
        assert_eq!(rows[0].attempts, 51);
        assert_eq!(rows[1].attempts, 44);
        assert_eq!((rows[0].broken, rows[0].rs_fixable), (11, 7));
        let mut csv = Vec::new();
        write_comparison(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("mode,packets,broken,rs_fixable,attempts,goodput_bps\n"));
        assert!(OutcomeTrace::read("0\tzz\tlost\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn rs_never_needs_more_attempts(cases in prop::collection::vec((0usize..6, any::<bool>()), 1..60)) {
            let v: Vec<_> = cases.iter().map(|&(c, lost)| outcome(c, lost)).collect();
            let fec = FecModel::default();
            prop_assert!(attempts(&v, GoodputMode::RsPlusRetransmit, &fec) <= attempts(&v, GoodputMode::RetransmitOnly, &fec));
        }

        #[test]
        fn goodput_falls_with_bit_time(cases in prop::collection::vec((0usize..6, any::<bool>()), 1..30), bt in 1u64..50) {
            let v: Vec<_> = cases.iter().map(|&(c, lost)| outcome(c, lost)).collect();
            let fec = FecModel::default();
            for mode in [GoodputMode::RetransmitOnly, GoodputMode::RsPlusRetransmit] {
                let a = estimate_goodput(&v, 96, 32, ms(bt), mode, &fec).unwrap();
                let b = estimate_goodput(&v, 96, 32, ms(bt + 1), mode, &fec).unwrap();
                prop_assert!(b < a);
            }
        }
    }
}
