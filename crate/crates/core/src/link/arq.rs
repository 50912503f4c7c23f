use super::channel::BitChannel;
use super::frame::{decode_ack, decode_frame, encode_ack, encode_frame, scan, ACK_BITS, FRAME_BITS, PAYLOAD_BYTES};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::phy::Party;
use crate::units::{as_secs, Micros};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkConfig {
    pub bit_time: Micros,
    /// Measured from the start of each frame transmission.
    pub ack_timeout: Micros,
    /// Retries allowed per packet; `None` retries forever.
    pub max_retries: Option<u32>,
    pub padding: u8,
}

impl LinkConfig {
    pub fn new(bit_time: Micros) -> Self {
        LinkConfig {
            bit_time,
            ack_timeout: 2 * (FRAME_BITS + ACK_BITS) as Micros * bit_time,
            max_retries: None,
            padding: 0,
        }
    }

    pub fn with_max_retries(mut self, max_retries: Option<u32>) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let exchange = (FRAME_BITS + ACK_BITS) as Micros * self.bit_time;
        if self.bit_time == 0 || self.ack_timeout <= exchange {
            return Err(Error::InvalidLink(format!(
                "ack timeout {} us must exceed one frame plus ack ({exchange} us)",
                self.ack_timeout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransferStats {
    pub packets: usize,
    pub packets_sent: usize,
    pub packets_delivered: usize,
    pub retransmissions: usize,
    pub acks_corrupted: usize,
    pub bytes_delivered: usize,
    pub wall_time: Micros,
    pub effective_goodput: f64,
}

impl TransferStats {
    fn finish(&mut self, wall_time: Micros) {
        self.retransmissions = self.packets_sent - self.packets_delivered;
        self.wall_time = wall_time;
        self.effective_goodput = if wall_time == 0 {
            0.0
        } else {
            8.0 * self.bytes_delivered as f64 / as_secs(wall_time)
        };
    }

    pub fn retransmissions_per_packet(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.retransmissions as f64 / self.packets as f64
        }
    }
}

/// Receiving half of stop-and-wait: delivers each sequence number once, in
/// order, and acknowledges new frames and duplicates alike.
#[derive(Clone, Debug, Default)]
pub struct ReliableReceiver {
    expected: u8,
    delivered: Vec<u8>,
}

impl ReliableReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handles one reception; returns the sequence number to acknowledge.
    pub fn on_bits(&mut self, bits: &[bool]) -> Option<u8> {
        let frame = scan(bits, decode_frame)?;
        if frame.seq == self.expected {
            self.delivered.extend_from_slice(&frame.payload);
            self.expected = self.expected.wrapping_add(1);
            Some(frame.seq)
        } else if !self.delivered.is_empty() && frame.seq == self.expected.wrapping_sub(1) {
            Some(frame.seq)
        } else {
            None
        }
    }

    pub fn delivered(&self) -> &[u8] {
        &self.delivered
    }

    pub fn into_delivered(self) -> Vec<u8> {
        self.delivered
    }
}

/// Result of a completed transfer.
#[derive(Clone, Debug)]
pub struct Transfer {
    pub stats: TransferStats,
    pub received: Vec<u8>,
}

pub fn pad(payload: &[u8], padding: u8) -> Vec<u8> {
    let mut v = payload.to_vec();
    let rem = v.len() % PAYLOAD_BYTES;
    if rem != 0 || v.is_empty() {
        v.resize(v.len() + PAYLOAD_BYTES - rem, padding);
    }
    v
}

/// Sends `payload` from A to B with stop-and-wait ARQ, running B's receiver
/// in lockstep. The payload is padded to whole frames first.
pub fn transfer(channel: &mut impl BitChannel, payload: &[u8], cfg: &LinkConfig) -> Result<Transfer> {
    cfg.validate()?;
    let data = pad(payload, cfg.padding);
    let begin = channel.now();
    let mut now = begin;
    let mut rx = ReliableReceiver::new();
    let mut stats = TransferStats {
        packets: data.len() / PAYLOAD_BYTES,
        ..TransferStats::default()
    };
    let delivered_bytes = |rx: &ReliableReceiver| rx.delivered().len().min(payload.len());

    for (k, chunk) in data.chunks(PAYLOAD_BYTES).enumerate() {
        let seq = k as u8;
        let frame = encode_frame(seq, chunk)?;
        let mut attempts = 0u32;
        loop {
            if cfg.max_retries.is_some_and(|m| attempts > m) {
                stats.bytes_delivered = delivered_bytes(&rx);
                stats.finish(now - begin);
                return Err(Error::TransferFailed {
                    seq,
                    stats: Box::new(stats),
                    received: rx.into_delivered(),
                });
            }
            attempts += 1;
            stats.packets_sent += 1;
            let deadline = now + cfg.ack_timeout;
            let heard = channel.transmit(Party::A, &frame, now)?;
            let Some(ack_seq) = rx.on_bits(&heard.bits) else {
                now = deadline.max(heard.heard_at);
                continue;
            };
            let back = channel.transmit(Party::B, &encode_ack(ack_seq), heard.heard_at)?;
            let ack = scan(&back.bits, decode_ack);
            if ack.is_some_and(|a| a.seq == seq) && back.heard_at <= deadline {
                now = back.heard_at;
                stats.packets_delivered += 1;
                break;
            }
            if ack.is_none() {
                stats.acks_corrupted += 1;
            }
            now = deadline.max(back.heard_at);
        }
    }
    stats.bytes_delivered = delivered_bytes(&rx);
    stats.finish(now - begin);
    let mut received = rx.into_delivered();
    received.truncate(payload.len());
    Ok(Transfer { stats, received })
}

/// [`transfer`] without the receiver's copy of the data.
pub fn send_reliable(channel: &mut impl BitChannel, payload: &[u8], cfg: &LinkConfig) -> Result<TransferStats> {
    transfer(channel, payload, cfg).map(|t| t.stats)
}

/// Transmits one data frame without any acknowledgement and returns the raw
/// reception alongside the encoded frame.
pub fn send_once(channel: &mut impl BitChannel, seq: u8, chunk: &[u8]) -> Result<(Bits, Bits)> {
    let frame = encode_frame(seq, chunk)?;
    let rx = channel.transmit(Party::A, &frame, channel.now())?;
    Ok((frame, rx.bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::channel::{IdealChannel, LossyChannel, Reception};
    use crate::units::ms;
    use proptest::prelude::*;

    /// Corrupts the first transmission of every data frame.
    struct FirstAttemptKiller {
        inner: IdealChannel,
        last: Option<Bits>,
    }

    impl BitChannel for FirstAttemptKiller {
        fn now(&self) -> Micros {
            self.inner.now()
        }
        fn bit_time(&self) -> Micros {
            self.inner.bit_time()
        }
        fn transmit(&mut self, from: Party, bits: &Bits, start: Micros) -> Result<Reception> {
            let mut rx = self.inner.transmit(from, bits, start)?;
            if from == Party::A && self.last.as_ref() != Some(bits) {
                self.last = Some(bits.clone());
                let mut v = rx.bits.into_inner();
                v[40] = !v[40];
                rx.bits = v.into();
            }
            Ok(rx)
        }
    }

    #[test]
    fn noiseless_closed_form() {
        let bt = ms(7);
        let payload: Vec<u8> = (0..80).collect();
        let mut ch = IdealChannel::new(bt);
        let t = transfer(&mut ch, &payload, &LinkConfig::new(bt)).unwrap();
        assert_eq!(t.received, payload);
        assert_eq!(t.stats.packets_sent, 10);
        assert_eq!(t.stats.retransmissions, 0);
        assert_eq!(t.stats.wall_time, 10 * 130 * bt);
        let expected = 640.0 / (10.0 * 130.0 * 0.007);
        assert!((t.stats.effective_goodput - expected).abs() < 1e-9);
    }

    #[test]
    fn first_attempts_always_lost() {
        let mut ch = FirstAttemptKiller {
            inner: IdealChannel::new(ms(1)),
            last: None,
        };
        let payload = vec![0xAB; 40];
        let t = transfer(&mut ch, &payload, &LinkConfig::new(ms(1))).unwrap();
        assert_eq!(t.received, payload);
        assert_eq!(t.stats.retransmissions, 5);
        assert_eq!(t.stats.packets_sent, 10);
    }

    #[test]
    fn retry_limit_fails_with_partial_stats() {
        let mut ch = FirstAttemptKiller {
            inner: IdealChannel::new(ms(1)),
            last: None,
        };
        let cfg = LinkConfig::new(ms(1)).with_max_retries(Some(0));
        match transfer(&mut ch, &[1; 16], &cfg) {
            Err(Error::TransferFailed { seq, stats, received }) => {
                assert_eq!(seq, 0);
                assert_eq!(stats.packets_sent, 1);
                assert_eq!(stats.retransmissions, 1);
                assert!(received.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_is_reacked_not_reappended() {
        let mut rx = ReliableReceiver::new();
        let f0 = encode_frame(0, b"aaaaaaaa").unwrap();
        let f1 = encode_frame(1, b"bbbbbbbb").unwrap();
        assert_eq!(rx.on_bits(&f0), Some(0));
        assert_eq!(rx.on_bits(&f0), Some(0));
        assert_eq!(rx.on_bits(&f1), Some(1));
        assert_eq!(rx.delivered(), b"aaaaaaaabbbbbbbb");
        let f5 = encode_frame(5, b"cccccccc").unwrap();
        assert_eq!(rx.on_bits(&f5), None);
    }

    #[test]
    fn sequence_numbers_wrap() {
        let payload: Vec<u8> = (0..300 * 8).map(|i| (i * 7 % 251) as u8).collect();
        let mut ch = IdealChannel::new(ms(1));
        let t = transfer(&mut ch, &payload, &LinkConfig::new(ms(1))).unwrap();
        assert_eq!(t.received, payload);
    }

    #[test]
    fn padding_and_validation() {
        assert_eq!(pad(&[1, 2, 3], 0).len(), 8);
        assert_eq!(pad(&[0; 16], 0).len(), 16);
        let mut cfg = LinkConfig::new(ms(1));
        cfg.ack_timeout = ms(128);
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn exactly_once_over_lossy_channel(
            payload in prop::collection::vec(any::<u8>(), 1..64),
            seed in any::<u64>(),
        ) {
            let mut ch = LossyChannel::new(IdealChannel::new(ms(1)), 0.3, seed);
            let t = transfer(&mut ch, &payload, &LinkConfig::new(ms(1))).unwrap();
            prop_assert_eq!(t.received, payload);
            prop_assert_eq!(t.stats.retransmissions, t.stats.packets_sent - t.stats.packets);
        }
    }
}
