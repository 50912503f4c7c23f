//! Framing and stop-and-wait ARQ.

mod arq;
mod channel;
mod crc;
mod frame;

pub use arq::{pad, send_once, send_reliable, transfer, LinkConfig, ReliableReceiver, Transfer, TransferStats};
pub use channel::{flip_burst, BitChannel, IdealChannel, LossyChannel, Reception, SimChannel};
pub use crc::crc16;
pub use frame::{
    decode_ack, decode_frame, encode_ack, encode_frame, scan, AckFrame, Frame, FrameError, ACK_BITS, FRAME_BITS,
    PAYLOAD_BYTES, SYNC_BITS,
};
