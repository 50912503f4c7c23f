//! Wire format, most significant bit first throughout.
//!
//! ```text
//! data frame (96 bits): sync(8) | seq(8) | payload(64) | crc16(seq ++ payload)
//! ack frame  (32 bits): sync(8) | seq(8) | crc16(seq)
//! ```

use thiserror::Error;

use super::crc::crc16;
use crate::bits::{pack_bytes, Bits};
use crate::modem::{find_sync, DEFAULT_SYNC_WORD};

pub const PAYLOAD_BYTES: usize = 8;
pub const FRAME_BITS: usize = 96;
pub const ACK_BITS: usize = 32;
pub const SYNC_BITS: usize = 8;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame payload must be exactly {PAYLOAD_BYTES} bytes, got {0}")]
    PayloadLength(usize),
    #[error("truncated frame: need {needed} bits, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("sync word not found at frame start")]
    BadSync,
    #[error("crc mismatch: frame carries {carried:#06x}, computed {computed:#06x}")]
    Crc { carried: u16, computed: u16 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub seq: u8,
    pub payload: [u8; PAYLOAD_BYTES],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AckFrame {
    pub seq: u8,
}

fn sync_bits() -> Bits {
    Bits::from_bytes(&[DEFAULT_SYNC_WORD])
}

pub fn encode_frame(seq: u8, payload: &[u8]) -> Result<Bits, FrameError> {
    if payload.len() != PAYLOAD_BYTES {
        return Err(FrameError::PayloadLength(payload.len()));
    }
    let mut body = Vec::with_capacity(1 + PAYLOAD_BYTES);
    body.push(seq);
    body.extend_from_slice(payload);
    let crc = crc16(&body);
    let mut bits = Bits::with_capacity(FRAME_BITS);
    bits.push_byte(DEFAULT_SYNC_WORD);
    for b in body.into_iter().chain(crc.to_be_bytes()) {
        bits.push_byte(b);
    }
    Ok(bits)
}

pub fn encode_ack(seq: u8) -> Bits {
    let mut bits = Bits::with_capacity(ACK_BITS);
    bits.push_byte(DEFAULT_SYNC_WORD);
    bits.push_byte(seq);
    for b in crc16(&[seq]).to_be_bytes() {
        bits.push_byte(b);
    }
    bits
}

/// Unpacks `len` bits starting at a sync word into bytes after the sync and
/// checks the trailing CRC. Returns the bytes covered by the CRC.
fn checked_body(bits: &[bool], len: usize) -> Result<Vec<u8>, FrameError> {
    if bits.len() < len {
        return Err(FrameError::Truncated {
            needed: len,
            got: bits.len(),
        });
    }
    if bits[..SYNC_BITS] != *sync_bits() {
        return Err(FrameError::BadSync);
    }
    let bytes = pack_bytes(&bits[SYNC_BITS..len]);
    let (body, tail) = bytes.split_at(bytes.len() - 2);
    let carried = u16::from_be_bytes([tail[0], tail[1]]);
    let computed = crc16(body);
    if carried != computed {
        return Err(FrameError::Crc { carried, computed });
    }
    Ok(body.to_vec())
}

pub fn decode_frame(bits: &[bool]) -> Result<Frame, FrameError> {
    let body = checked_body(bits, FRAME_BITS)?;
    let mut payload = [0u8; PAYLOAD_BYTES];
    payload.copy_from_slice(&body[1..]);
    Ok(Frame { seq: body[0], payload })
}

pub fn decode_ack(bits: &[bool]) -> Result<AckFrame, FrameError> {
    let body = checked_body(bits, ACK_BITS)?;
    Ok(AckFrame { seq: body[0] })
}

/// First frame in `bits` that decodes cleanly, trying every sync occurrence
/// in order.
pub fn scan<T>(bits: &[bool], decode: impl Fn(&[bool]) -> Result<T, FrameError>) -> Option<T> {
    let sync = sync_bits();
    let mut from = 0;
    while let Some(after) = find_sync(bits, &sync, from) {
        let start = after - SYNC_BITS;
        if let Ok(v) = decode(&bits[start..]) {
            return Some(v);
        }
        from = start + 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::crc::reference::crc16_bitwise;
    use proptest::prelude::*;

    #[test]
    fn zero_frame_layout() {
        let bits = encode_frame(0, &[0; 8]).unwrap();
        assert_eq!(bits.len(), FRAME_BITS);
        assert_eq!(bits.to_string()[..16], *"1010110000000000");
        let crc = crc16_bitwise(&[0; 9]);
        assert_eq!(pack_bytes(&bits[80..]), crc.to_be_bytes());
    }

    #[test]
    fn ack_layout() {
        let bits = encode_ack(0x5A);
        assert_eq!(bits.len(), ACK_BITS);
        assert_eq!(decode_ack(&bits).unwrap(), AckFrame { seq: 0x5A });
        assert_eq!(pack_bytes(&bits[16..]), crc16_bitwise(&[0x5A]).to_be_bytes());
    }

    #[test]
    fn wrong_payload_length() {
        assert_eq!(encode_frame(1, &[0; 7]), Err(FrameError::PayloadLength(7)));
    }

    #[test]
    fn truncated_and_bad_sync() {
        let bits = encode_frame(3, b"abcdefgh").unwrap();
        assert!(matches!(decode_frame(&bits[..95]), Err(FrameError::Truncated { needed: 96, got: 95 })));
        let mut v = bits.into_inner();
        v[2] = !v[2];
        assert_eq!(decode_frame(&v), Err(FrameError::BadSync));
    }

    #[test]
    fn scan_skips_spurious_sync() {
        let mut stream: Bits = "0010101100 1110".parse().unwrap();
        stream.extend_from(&encode_frame(7, b"payload!").unwrap());
        stream.extend_from(&"0000".parse::<Bits>().unwrap());
        let f = scan(&stream, decode_frame).unwrap();
        assert_eq!(f.seq, 7);
        assert_eq!(&f.payload, b"payload!");
        let garbage: Bits = "10101100 1111000011110000".parse().unwrap();
        assert_eq!(scan(&garbage, decode_frame), None);
    }

    proptest! {
        #[test]
        fn frame_round_trip(seq in any::<u8>(), payload in any::<[u8; 8]>()) {
            let bits = encode_frame(seq, &payload).unwrap();
            prop_assert_eq!(bits.len(), FRAME_BITS);
            prop_assert_eq!(decode_frame(&bits).unwrap(), Frame { seq, payload });
        }

        #[test]
        fn any_flip_after_sync_is_rejected(seq in any::<u8>(), payload in any::<[u8; 8]>(), pos in SYNC_BITS..FRAME_BITS) {
            let mut v = encode_frame(seq, &payload).unwrap().into_inner();
            v[pos] = !v[pos];
            let is_crc_error = matches!(decode_frame(&v), Err(FrameError::Crc { .. }));
            prop_assert!(is_crc_error);
        }

        #[test]
        fn bursts_up_to_16_are_detected(
            seq in any::<u8>(),
            payload in any::<[u8; 8]>(),
            len in 1usize..=16,
            start in SYNC_BITS..FRAME_BITS,
            pattern in any::<u16>(),
        ) {
            let start = start.min(FRAME_BITS - len);
            let mut v = encode_frame(seq, &payload).unwrap().into_inner();
            // a burst of length `len` flips its first and last bit
            let mask = (pattern as u32 | 1 | (1 << (len - 1))) & ((1u32 << len) - 1);
            for i in 0..len {
                if mask >> i & 1 == 1 {
                    v[start + i] = !v[start + i];
                }
            }
            prop_assert!(decode_frame(&v).is_err());
        }
    }
}
