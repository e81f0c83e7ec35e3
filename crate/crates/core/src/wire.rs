// SPDX-License-Identifier: Apache-2.0

//! Binary encoding of packets and reports.
//!
//! All integers are big-endian. Loss and discard event lists are run-length
//! encoded here and only here: consecutive sequence numbers collapse into a
//! `(start, run_len)` pair followed by one timestamp per event.
//!
//! ```text
//! media  : 'M' ssrc:u32 seq:u16 frame_id:u32 frame_ts:u64 send_ts:u64
//!          flags:u8 frag_idx:u16 frag_cnt:u16 len:u16 payload[len]
//! fec    : 'F' ssrc:u32 base:u16 block:u8 length_field:u16 send_ts:u64
//!          hdr_recovery[25] len:u16 parity[len]
//! report : 'R' ssrc:u32 report_ts:u64 highest:u16 cum_lost:u32 sent:u32
//!          owd:u64 jitter:u32 lsr:u64 dlsr:u64 flags:u8
//!          loss_rle discard_rle
//! rle    : runs:u16 { start:u16 len:u16 at:u64[len] }*
//! ```

use crate::error::{Error, Result};
use crate::types::{
    FecPacket, FeedbackReport, MediaPacket, SeqEvent, SimTime, HEADER_RECOVERY_LEN,
};

const TAG_MEDIA: u8 = b'M';
const TAG_FEC: u8 = b'F';
const TAG_REPORT: u8 = b'R';

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Decode(format!(
                "truncated: need {n} bytes at offset {}",
                self.pos
            ))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn expect_tag(&mut self, tag: u8) -> Result<()> {
        let got = self.u8()?;
        if got != tag {
            return Err(Error::Decode(format!(
                "expected tag {:?}, got {:?}",
                tag as char, got as char
            )));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Decode(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Fixed-size per-packet header fields protected by parity packets.
pub(crate) fn media_header_fields(p: &MediaPacket) -> [u8; HEADER_RECOVERY_LEN] {
    let mut out = [0u8; HEADER_RECOVERY_LEN];
    out[0..4].copy_from_slice(&p.frame_id.to_be_bytes());
    out[4..12].copy_from_slice(&p.frame_ts.0.to_be_bytes());
    out[12..20].copy_from_slice(&p.send_ts.0.to_be_bytes());
    out[20..22].copy_from_slice(&p.fragment_index.to_be_bytes());
    out[22..24].copy_from_slice(&p.fragment_count.to_be_bytes());
    out[24] = p.is_fragment as u8;
    out
}

pub(crate) struct HeaderFields {
    pub frame_id: u32,
    pub frame_ts: SimTime,
    pub send_ts: SimTime,
    pub fragment_index: u16,
    pub fragment_count: u16,
    pub is_fragment: bool,
}

pub(crate) fn parse_header_fields(b: &[u8; HEADER_RECOVERY_LEN]) -> HeaderFields {
    HeaderFields {
        frame_id: u32::from_be_bytes(b[0..4].try_into().unwrap()),
        frame_ts: SimTime(u64::from_be_bytes(b[4..12].try_into().unwrap())),
        send_ts: SimTime(u64::from_be_bytes(b[12..20].try_into().unwrap())),
        fragment_index: u16::from_be_bytes(b[20..22].try_into().unwrap()),
        fragment_count: u16::from_be_bytes(b[22..24].try_into().unwrap()),
        is_fragment: b[24] != 0,
    }
}

pub fn encode_media(p: &MediaPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(36 + p.payload.len());
    out.push(TAG_MEDIA);
    out.extend_from_slice(&p.ssrc.to_be_bytes());
    out.extend_from_slice(&p.seq.to_be_bytes());
    out.extend_from_slice(&p.frame_id.to_be_bytes());
    out.extend_from_slice(&p.frame_ts.0.to_be_bytes());
    out.extend_from_slice(&p.send_ts.0.to_be_bytes());
    out.push(p.is_fragment as u8);
    out.extend_from_slice(&p.fragment_index.to_be_bytes());
    out.extend_from_slice(&p.fragment_count.to_be_bytes());
    out.extend_from_slice(&(p.payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&p.payload);
    out
}

pub fn decode_media(buf: &[u8]) -> Result<MediaPacket> {
    let mut r = Reader::new(buf);
    r.expect_tag(TAG_MEDIA)?;
    let ssrc = r.u32()?;
    let seq = r.u16()?;
    let frame_id = r.u32()?;
    let frame_ts = SimTime(r.u64()?);
    let send_ts = SimTime(r.u64()?);
    let flags = r.u8()?;
    if flags > 1 {
        return Err(Error::Decode(format!("bad media flags {flags:#x}")));
    }
    let fragment_index = r.u16()?;
    let fragment_count = r.u16()?;
    let len = r.u16()? as usize;
    let payload = r.take(len)?.to_vec();
    r.finish()?;
    Ok(MediaPacket {
        ssrc,
        seq,
        frame_id,
        frame_ts,
        send_ts,
        payload,
        is_fragment: flags == 1,
        fragment_index,
        fragment_count,
    })
}

pub fn encode_fec(p: &FecPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + p.parity_payload.len());
    out.push(TAG_FEC);
    out.extend_from_slice(&p.ssrc.to_be_bytes());
    out.extend_from_slice(&p.base_seq.to_be_bytes());
    out.push(p.block_len);
    out.extend_from_slice(&p.length_field.to_be_bytes());
    out.extend_from_slice(&p.send_ts.0.to_be_bytes());
    out.extend_from_slice(&p.header_recovery);
    out.extend_from_slice(&(p.parity_payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&p.parity_payload);
    out
}

pub fn decode_fec(buf: &[u8]) -> Result<FecPacket> {
    let mut r = Reader::new(buf);
    r.expect_tag(TAG_FEC)?;
    let ssrc = r.u32()?;
    let base_seq = r.u16()?;
    let block_len = r.u8()?;
    let length_field = r.u16()?;
    let send_ts = SimTime(r.u64()?);
    let header_recovery: [u8; HEADER_RECOVERY_LEN] =
        r.take(HEADER_RECOVERY_LEN)?.try_into().unwrap();
    let len = r.u16()? as usize;
    let parity_payload = r.take(len)?.to_vec();
    r.finish()?;
    Ok(FecPacket {
        ssrc,
        base_seq,
        block_len,
        parity_payload,
        length_field,
        header_recovery,
        send_ts,
    })
}

/// Groups events into runs of consecutive sequence numbers, preserving list
/// order.
fn encode_rle(events: &[SeqEvent], out: &mut Vec<u8>) {
    let mut runs: Vec<&[SeqEvent]> = Vec::new();
    let mut start = 0;
    for i in 1..=events.len() {
        let breaks = i == events.len()
            || events[i].seq != events[i - 1].seq.wrapping_add(1)
            || i - start == u16::MAX as usize;
        if breaks {
            runs.push(&events[start..i]);
            start = i;
        }
    }
    out.extend_from_slice(&(runs.len() as u16).to_be_bytes());
    for run in runs {
        out.extend_from_slice(&run[0].seq.to_be_bytes());
        out.extend_from_slice(&(run.len() as u16).to_be_bytes());
        for e in run {
            out.extend_from_slice(&e.at.0.to_be_bytes());
        }
    }
}

fn decode_rle(r: &mut Reader<'_>) -> Result<Vec<SeqEvent>> {
    let runs = r.u16()?;
    let mut events = Vec::new();
    for _ in 0..runs {
        let start = r.u16()?;
        let len = r.u16()?;
        if len == 0 {
            return Err(Error::Decode("empty RLE run".into()));
        }
        for k in 0..len {
            events.push(SeqEvent {
                seq: start.wrapping_add(k),
                at: SimTime(r.u64()?),
            });
        }
    }
    Ok(events)
}

pub fn encode_report(rep: &FeedbackReport) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * (rep.loss_events.len() + rep.discard_events.len()));
    out.push(TAG_REPORT);
    out.extend_from_slice(&rep.ssrc.to_be_bytes());
    out.extend_from_slice(&rep.report_ts.0.to_be_bytes());
    out.extend_from_slice(&rep.highest_seq.to_be_bytes());
    out.extend_from_slice(&rep.cumulative_lost.to_be_bytes());
    out.extend_from_slice(&rep.interval_sent.to_be_bytes());
    out.extend_from_slice(&rep.owd_sample.0.to_be_bytes());
    out.extend_from_slice(&rep.jitter.to_be_bytes());
    out.extend_from_slice(&rep.lsr.0.to_be_bytes());
    out.extend_from_slice(&rep.dlsr.0.to_be_bytes());
    out.push(rep.is_early as u8);
    encode_rle(&rep.loss_events, &mut out);
    encode_rle(&rep.discard_events, &mut out);
    out
}

pub fn decode_report(buf: &[u8]) -> Result<FeedbackReport> {
    let mut r = Reader::new(buf);
    r.expect_tag(TAG_REPORT)?;
    let ssrc = r.u32()?;
    let report_ts = SimTime(r.u64()?);
    let highest_seq = r.u16()?;
    let cumulative_lost = r.u32()?;
    let interval_sent = r.u32()?;
    let owd_sample = SimTime(r.u64()?);
    let jitter = r.u32()?;
    let lsr = SimTime(r.u64()?);
    let dlsr = SimTime(r.u64()?);
    let flags = r.u8()?;
    if flags > 1 {
        return Err(Error::Decode(format!("bad report flags {flags:#x}")));
    }
    let loss_events = decode_rle(&mut r)?;
    let discard_events = decode_rle(&mut r)?;
    r.finish()?;
    Ok(FeedbackReport {
        ssrc,
        report_ts,
        highest_seq,
        cumulative_lost,
        interval_sent,
        loss_events,
        discard_events,
        owd_sample,
        jitter,
        lsr,
        dlsr,
        is_early: flags == 1,
    })
}

/// On-the-wire size of a report, used for link accounting.
pub fn report_wire_size(rep: &FeedbackReport) -> usize {
    encode_report(rep).len()
}
