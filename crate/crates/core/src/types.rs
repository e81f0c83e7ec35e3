// SPDX-License-Identifier: Apache-2.0

//! Shared domain vocabulary: simulated time, bit rates, sequence-number
//! arithmetic and the packet/report types exchanged by the endpoints.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// RTP-style fixed header accounted on every media packet.
pub const MEDIA_HEADER_SIZE: usize = 12;
/// Fixed header accounted on every parity packet.
pub const FEC_HEADER_SIZE: usize = 16;
/// Link MTU; media packets never exceed it.
pub const MTU: usize = 1500;
/// Largest media payload that fits in one MTU-sized packet.
pub const MAX_MEDIA_PAYLOAD: usize = MTU - MEDIA_HEADER_SIZE;

/// Integer microseconds since the start of the simulation. Also used for
/// durations.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Scales a duration by `num / den`, rounding down.
    pub fn mul_ratio(self, num: u64, den: u64) -> SimTime {
        SimTime((self.0 as u128 * num as u128 / den as u128) as u64)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_millis_f64())
    }
}

/// Bits per second.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct BitRate(pub u64);

impl BitRate {
    pub const ZERO: BitRate = BitRate(0);
    /// Lowest media rate the controller will ever target.
    pub const FLOOR: BitRate = BitRate(32_000);

    pub const fn from_bps(bps: u64) -> Self {
        BitRate(bps)
    }

    pub const fn from_kbps(kbps: u64) -> Self {
        BitRate(kbps * 1_000)
    }

    pub const fn bps(self) -> u64 {
        self.0
    }

    pub fn kbps_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    /// Rate that moves `bits` in `duration`. Zero-length durations give zero.
    pub fn from_bits_over(bits: u64, duration: SimTime) -> Self {
        if duration.0 == 0 {
            return BitRate::ZERO;
        }
        BitRate((bits as u128 * 1_000_000 / duration.0 as u128) as u64)
    }

    /// Time to serialize `bytes` at this rate, rounded up to a whole microsecond.
    pub fn serialization_time(self, bytes: usize) -> SimTime {
        assert!(self.0 > 0, "serialization over a zero-capacity link");
        let bits = bytes as u128 * 8 * 1_000_000;
        SimTime(bits.div_ceil(self.0 as u128) as u64)
    }

    /// `self * num / den`, rounding down.
    pub fn mul_ratio(self, num: u64, den: u64) -> BitRate {
        BitRate((self.0 as u128 * num as u128 / den as u128) as u64)
    }

    /// Applies the controller floor.
    pub fn floored(self) -> BitRate {
        self.max(BitRate::FLOOR)
    }
}

impl Add for BitRate {
    type Output = BitRate;
    fn add(self, rhs: BitRate) -> BitRate {
        BitRate(self.0 + rhs.0)
    }
}

impl fmt::Display for BitRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}kbps", self.kbps_f64())
    }
}

/// 16-bit RTP sequence number.
pub type Seq = u16;

/// True iff `a` follows `b` under 16-bit wraparound ordering.
pub fn seq_after(a: Seq, b: Seq) -> bool {
    let d = a.wrapping_sub(b);
    d != 0 && d < 0x8000
}

/// Distance from `b` forward to `a`, modulo 2^16.
pub fn seq_distance(a: Seq, b: Seq) -> u16 {
    a.wrapping_sub(b)
}

/// Extends 16-bit sequence numbers to a monotonic 64-bit space.
#[derive(Debug, Clone, Default)]
pub struct SeqUnwrapper {
    last: Option<u64>,
}

impl SeqUnwrapper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps `seq` to the extended value closest to the last one seen.
    pub fn unwrap(&mut self, seq: Seq) -> u64 {
        let ext = match self.last {
            None => seq as u64,
            Some(last) => {
                let last16 = last as u16;
                let delta = seq.wrapping_sub(last16) as i16 as i64;
                let ext = last as i64 + delta;
                if ext < 0 {
                    seq as u64
                } else {
                    ext as u64
                }
            }
        };
        if self.last.is_none_or(|l| ext > l) {
            self.last = Some(ext);
        }
        ext
    }
}

/// Receive bitmap over a window of sequence numbers starting at `base`.
#[derive(Debug, Clone)]
pub struct SeqWindow {
    base: Seq,
    received: Vec<bool>,
}

impl SeqWindow {
    pub fn new(base: Seq, len: usize) -> Self {
        Self {
            base,
            received: vec![false; len],
        }
    }

    pub fn base(&self) -> Seq {
        self.base
    }

    pub fn len(&self) -> usize {
        self.received.len()
    }

    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }

    fn index(&self, seq: Seq) -> Option<usize> {
        let off = seq_distance(seq, self.base) as usize;
        (off < self.received.len()).then_some(off)
    }

    pub fn contains(&self, seq: Seq) -> bool {
        self.index(seq).is_some()
    }

    /// Marks `seq` received; returns false if it lies outside the window.
    pub fn mark(&mut self, seq: Seq) -> bool {
        match self.index(seq) {
            Some(i) => {
                self.received[i] = true;
                true
            }
            None => false,
        }
    }

    pub fn is_received(&self, seq: Seq) -> bool {
        self.index(seq).is_some_and(|i| self.received[i])
    }

    /// Sequence numbers in the window that have not been marked.
    pub fn missing(&self) -> impl Iterator<Item = Seq> + '_ {
        self.received
            .iter()
            .enumerate()
            .filter(|(_, r)| !**r)
            .map(|(i, _)| self.base.wrapping_add(i as u16))
    }
}

/// One media packet: a whole frame or a fragment of one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaPacket {
    pub ssrc: u32,
    pub seq: Seq,
    pub frame_id: u32,
    /// Capture time of the frame.
    pub frame_ts: SimTime,
    pub send_ts: SimTime,
    pub payload: Vec<u8>,
    pub is_fragment: bool,
    pub fragment_index: u16,
    pub fragment_count: u16,
}

impl MediaPacket {
    pub fn payload_size(&self) -> usize {
        self.payload.len()
    }

    pub fn header_size(&self) -> usize {
        MEDIA_HEADER_SIZE
    }

    /// Bytes accounted on the wire.
    pub fn wire_size(&self) -> usize {
        MEDIA_HEADER_SIZE + self.payload.len()
    }
}

/// Parity packet protecting `block_len` consecutive media packets starting at
/// `base_seq`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FecPacket {
    pub ssrc: u32,
    pub base_seq: Seq,
    pub block_len: u8,
    /// Byte-wise XOR of the covered payloads, zero padded to the longest.
    pub parity_payload: Vec<u8>,
    /// XOR of the covered payload lengths.
    pub length_field: u16,
    /// XOR of the covered packets' per-packet header fields.
    pub header_recovery: [u8; HEADER_RECOVERY_LEN],
    pub send_ts: SimTime,
}

/// Size of the protected per-packet header fields (frame id, timestamps,
/// fragment info).
pub const HEADER_RECOVERY_LEN: usize = 25;

impl FecPacket {
    pub fn wire_size(&self) -> usize {
        FEC_HEADER_SIZE + self.parity_payload.len()
    }

    /// Last sequence number covered by this packet.
    pub fn last_seq(&self) -> Seq {
        self.base_seq.wrapping_add(self.block_len as u16 - 1)
    }

    pub fn covers(&self, seq: Seq) -> bool {
        (seq_distance(seq, self.base_seq) as usize) < self.block_len as usize
    }
}

/// A loss or discard observation carried by a feedback report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqEvent {
    pub seq: Seq,
    /// Receiver time of the event.
    pub at: SimTime,
}

/// Receiver report: standard RR fields plus loss and discard event lists and
/// a one-way-delay sample.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeedbackReport {
    /// Media source this report describes.
    pub ssrc: u32,
    pub report_ts: SimTime,
    pub highest_seq: Seq,
    pub cumulative_lost: u32,
    /// Packets expected during the interval this report closes.
    pub interval_sent: u32,
    pub loss_events: Vec<SeqEvent>,
    pub discard_events: Vec<SeqEvent>,
    pub owd_sample: SimTime,
    /// Interarrival jitter, microseconds.
    pub jitter: u32,
    /// Send timestamp of the last media packet received.
    pub lsr: SimTime,
    /// Delay between receiving that packet and sending this report.
    pub dlsr: SimTime,
    pub is_early: bool,
}

impl FeedbackReport {
    pub fn is_clean(&self) -> bool {
        self.loss_events.is_empty() && self.discard_events.is_empty()
    }
}
