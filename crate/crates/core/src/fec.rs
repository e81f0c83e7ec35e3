// SPDX-License-Identifier: Apache-2.0

//! Per-packet XOR parity FEC.
//!
//! One parity packet covers a block of 2 to 14 consecutive media packets and
//! can rebuild any single missing member. Payload lengths and per-packet
//! header fields are protected alongside the payload bytes so the rebuilt
//! packet is identical to the original.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{
    seq_distance, BitRate, FecPacket, MediaPacket, Seq, SimTime, FEC_HEADER_SIZE,
    HEADER_RECOVERY_LEN,
};
use crate::wire::{media_header_fields, parse_header_fields};

pub const MIN_BLOCK_LEN: usize = 2;
pub const MAX_BLOCK_LEN: usize = 14;

fn xor_into(acc: &mut Vec<u8>, bytes: &[u8]) {
    if acc.len() < bytes.len() {
        acc.resize(bytes.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(bytes) {
        *a ^= b;
    }
}

/// Builds the parity packet for `packets`, which must carry consecutive
/// sequence numbers.
pub fn encode_block(packets: &[MediaPacket], send_ts: SimTime) -> Result<FecPacket> {
    if !(MIN_BLOCK_LEN..=MAX_BLOCK_LEN).contains(&packets.len()) {
        return Err(Error::BlockLengthOutOfRange(packets.len()));
    }
    for (i, w) in packets.windows(2).enumerate() {
        if w[1].seq != w[0].seq.wrapping_add(1) {
            return Err(Error::NonConsecutiveSequence(i + 1));
        }
    }

    let mut parity = Vec::new();
    let mut length_field = 0u16;
    let mut header_recovery = [0u8; HEADER_RECOVERY_LEN];
    for p in packets {
        xor_into(&mut parity, &p.payload);
        length_field ^= p.payload.len() as u16;
        for (h, b) in header_recovery.iter_mut().zip(media_header_fields(p)) {
            *h ^= b;
        }
    }

    Ok(FecPacket {
        ssrc: packets[0].ssrc,
        base_seq: packets[0].seq,
        block_len: packets.len() as u8,
        parity_payload: parity,
        length_field,
        header_recovery,
        send_ts,
    })
}

/// Receiver-side view of one protected block.
#[derive(Debug, Clone)]
pub struct FecBlockState {
    pub expected: usize,
    pub base_seq: Seq,
    pub received_packets: BTreeMap<u16, MediaPacket>,
    pub fec: Option<FecPacket>,
    /// Recovery is useless after this time (playout cutoff of the missing
    /// packet).
    pub deadline: SimTime,
}

impl FecBlockState {
    pub fn new(fec: FecPacket, deadline: SimTime) -> Self {
        Self {
            expected: fec.block_len as usize,
            base_seq: fec.base_seq,
            received_packets: BTreeMap::new(),
            fec: Some(fec),
            deadline,
        }
    }

    /// Adds a covered packet; packets outside the block are ignored.
    pub fn insert(&mut self, p: MediaPacket) -> bool {
        let off = seq_distance(p.seq, self.base_seq) as usize;
        if off >= self.expected {
            return false;
        }
        self.received_packets.insert(off as u16, p);
        true
    }

    /// Covered sequence numbers not yet received.
    pub fn missing(&self) -> Vec<Seq> {
        (0..self.expected as u16)
            .filter(|off| !self.received_packets.contains_key(off))
            .map(|off| self.base_seq.wrapping_add(off))
            .collect()
    }
}

/// Rebuilds the single missing packet of the block, if exactly one is missing,
/// the parity packet is present and `now` has not passed the deadline.
pub fn try_recover(state: &FecBlockState, now: SimTime) -> Option<MediaPacket> {
    let fec = state.fec.as_ref()?;
    if now > state.deadline {
        return None;
    }
    let missing = state.missing();
    if missing.len() != 1 {
        return None;
    }

    let mut payload = fec.parity_payload.clone();
    let mut len = fec.length_field;
    let mut header = fec.header_recovery;
    for p in state.received_packets.values() {
        xor_into(&mut payload, &p.payload);
        len ^= p.payload.len() as u16;
        for (h, b) in header.iter_mut().zip(media_header_fields(p)) {
            *h ^= b;
        }
    }
    let len = len as usize;
    if len > payload.len() {
        return None;
    }
    payload.truncate(len);
    let fields = parse_header_fields(&header);

    Some(MediaPacket {
        ssrc: fec.ssrc,
        seq: missing[0],
        frame_id: fields.frame_id,
        frame_ts: fields.frame_ts,
        send_ts: fields.send_ts,
        payload,
        is_fragment: fields.is_fragment,
        fragment_index: fields.fragment_index,
        fragment_count: fields.fragment_count,
    })
}

/// Nominal parity bit rate when one parity packet follows every
/// `fec_interval` media packets of `avg_packet_size` bytes.
pub fn fec_bitrate(media_rate: BitRate, fec_interval: u32, avg_packet_size: usize) -> Result<BitRate> {
    if !(MIN_BLOCK_LEN as u32..=MAX_BLOCK_LEN as u32).contains(&fec_interval) {
        return Err(Error::IntervalOutOfRange(fec_interval));
    }
    if avg_packet_size == 0 {
        return Ok(BitRate::ZERO);
    }
    let num = media_rate.bps() as u128 * (avg_packet_size + FEC_HEADER_SIZE) as u128;
    let den = fec_interval as u128 * avg_packet_size as u128;
    Ok(BitRate((num / den) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::collection::vec;
    use proptest::prelude::*;

    fn pkt(seq: Seq, payload: Vec<u8>) -> MediaPacket {
        MediaPacket {
            ssrc: 7,
            seq,
            frame_id: seq as u32 / 2,
            frame_ts: SimTime(1_000 * seq as u64),
            send_ts: SimTime(1_000 * seq as u64 + 3),
            payload,
            is_fragment: seq % 2 == 1,
            fragment_index: seq % 2,
            fragment_count: 2,
        }
    }

    #[test]
    fn identical_payloads_cancel() {
        let fec = encode_block(&[pkt(1, vec![0xAB; 20]), pkt(2, vec![0xAB; 20])], SimTime::ZERO)
            .unwrap();
        assert!(fec.parity_payload.iter().all(|b| *b == 0));
        assert_eq!(fec.length_field, 0);
    }

    #[test]
    fn short_payloads_are_zero_padded() {
        let fec = encode_block(&[pkt(1, vec![0x01]), pkt(2, vec![0x02, 0x03])], SimTime::ZERO)
            .unwrap();
        assert_eq!(fec.parity_payload, vec![0x03, 0x03]);
        assert_eq!(fec.length_field, 3);
        assert_eq!(fec.base_seq, 1);
        assert_eq!(fec.block_len, 2);
    }

    #[test]
    fn block_length_bounds() {
        let mk = |n: u16| (0..n).map(|s| pkt(s, vec![1])).collect::<Vec<_>>();
        assert_eq!(
            encode_block(&mk(15), SimTime::ZERO),
            Err(Error::BlockLengthOutOfRange(15))
        );
        assert_eq!(
            encode_block(&mk(1), SimTime::ZERO),
            Err(Error::BlockLengthOutOfRange(1))
        );
        assert!(encode_block(&mk(14), SimTime::ZERO).is_ok());
    }

    #[test]
    fn gap_in_block_is_rejected() {
        let r = encode_block(&[pkt(1, vec![1]), pkt(3, vec![1])], SimTime::ZERO);
        assert_eq!(r, Err(Error::NonConsecutiveSequence(1)));
    }

    #[test]
    fn block_may_span_wraparound() {
        let block = [pkt(65535, vec![9, 9]), pkt(0, vec![4])];
        let fec = encode_block(&block, SimTime::ZERO).unwrap();
        let mut st = FecBlockState::new(fec, SimTime::from_secs(1));
        st.insert(block[1].clone());
        assert_eq!(try_recover(&st, SimTime::ZERO), Some(block[0].clone()));
    }

    fn block_of_three() -> [MediaPacket; 3] {
        [pkt(10, vec![1, 2, 3]), pkt(11, vec![4; 40]), pkt(12, vec![9, 8])]
    }

    #[test]
    fn recovers_single_loss_before_deadline() {
        let block = block_of_three();
        let fec = encode_block(&block, SimTime(50)).unwrap();
        let mut st = FecBlockState::new(fec, SimTime::from_millis(400));
        st.insert(block[0].clone());
        st.insert(block[2].clone());
        assert_eq!(try_recover(&st, SimTime::from_millis(350)), Some(block[1].clone()));
        assert_eq!(try_recover(&st, SimTime::from_millis(401)), None);
    }

    #[test]
    fn two_erasures_are_not_recoverable() {
        let block = block_of_three();
        let fec = encode_block(&block, SimTime::ZERO).unwrap();
        let mut st = FecBlockState::new(fec, SimTime::from_secs(1));
        st.insert(block[0].clone());
        assert_eq!(try_recover(&st, SimTime::ZERO), None);
    }

    #[test]
    fn complete_block_yields_nothing() {
        let block = block_of_three();
        let fec = encode_block(&block, SimTime::ZERO).unwrap();
        let mut st = FecBlockState::new(fec, SimTime::from_secs(1));
        for p in block {
            st.insert(p);
        }
        assert_eq!(try_recover(&st, SimTime::ZERO), None);
    }

    #[test]
    fn no_parity_no_recovery() {
        let block = block_of_three();
        let fec = encode_block(&block, SimTime::ZERO).unwrap();
        let mut st = FecBlockState::new(fec, SimTime::from_secs(1));
        st.fec = None;
        st.insert(block[0].clone());
        st.insert(block[1].clone());
        assert_eq!(try_recover(&st, SimTime::ZERO), None);
    }

    #[test]
    fn fec_bitrate_examples() {
        assert_eq!(
            fec_bitrate(BitRate::from_kbps(140), 14, 1000).unwrap(),
            BitRate(10_160)
        );
        // Interval 2 is roughly half the media rate.
        let r = fec_bitrate(BitRate::from_kbps(200), 2, 500).unwrap();
        assert_eq!(r, BitRate(200_000 * 516 / 1000));
        assert_eq!(fec_bitrate(BitRate::ZERO, 7, 500).unwrap(), BitRate::ZERO);
        assert_eq!(
            fec_bitrate(BitRate::from_kbps(1), 15, 500),
            Err(Error::IntervalOutOfRange(15))
        );
    }

    proptest! {
        #[test]
        fn parity_matches_fold_left_oracle(payloads in vec(vec(any::<u8>(), 1..64), 2..=14)) {
            let block: Vec<_> = payloads
                .iter()
                .enumerate()
                .map(|(i, p)| pkt(100 + i as u16, p.clone()))
                .collect();
            let fec = encode_block(&block, SimTime::ZERO).unwrap();
            let width = payloads.iter().map(Vec::len).max().unwrap();
            let expect: Vec<u8> = (0..width)
                .map(|i| payloads.iter().fold(0u8, |acc, p| acc ^ p.get(i).copied().unwrap_or(0)))
                .collect();
            prop_assert_eq!(fec.parity_payload, expect);
        }

        #[test]
        fn any_single_erasure_round_trips(
            base: u16,
            lens in vec(1usize..=1472, 2..=14),
            fill: u8,
            drop_pick: usize,
        ) {
            let block: Vec<_> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let bytes = (0..n).map(|k| fill.wrapping_mul(31).wrapping_add((k * 7 + i) as u8)).collect();
                    pkt(base.wrapping_add(i as u16), bytes)
                })
                .collect();
            let fec = encode_block(&block, SimTime::ZERO).unwrap();
            let drop = drop_pick % block.len();
            let mut st = FecBlockState::new(fec, SimTime::from_secs(1));
            for (i, p) in block.iter().enumerate() {
                if i != drop {
                    st.insert(p.clone());
                }
            }
            prop_assert_eq!(try_recover(&st, SimTime::ZERO), Some(block[drop].clone()));
        }
    }
}
