// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use crate::controller::{
    ControllerConfig, ControllerDecision, ControllerState, FbraController, ReportMeasurement,
    ReportOutcome,
};
use crate::fec::encode_block;
use crate::trace::{EventKind, Extra, FlowIdx, TraceEvent, TraceSink};
use crate::types::{
    seq_distance, BitRate, FecPacket, FeedbackReport, MediaPacket, Seq, SeqUnwrapper, SimTime,
    MAX_MEDIA_PAYLOAD, MEDIA_HEADER_SIZE, MTU,
};
use crate::wire::report_wire_size;

use super::Outgoing;

#[derive(Debug, Clone, PartialEq)]
pub struct SenderConfig {
    pub fps: u32,
    pub start_rate: BitRate,
    pub min_rate: BitRate,
    pub mtu: usize,
}

impl Default for SenderConfig {
    fn default() -> Self {
        Self {
            fps: 30,
            start_rate: BitRate::from_kbps(128),
            min_rate: BitRate::FLOOR,
            mtu: MTU,
        }
    }
}

impl SenderConfig {
    pub fn payload_budget(&self) -> usize {
        self.mtu.saturating_sub(MEDIA_HEADER_SIZE).clamp(1, MAX_MEDIA_PAYLOAD)
    }

    /// Capture time of frame `index`.
    pub fn frame_time(&self, index: u64) -> SimTime {
        SimTime(index * 1_000_000 / self.fps as u64)
    }
}

/// Bytes of one frame at `rate`.
pub fn frame_size(rate: BitRate, fps: u32) -> usize {
    (rate.bps() / (8 * fps as u64)).max(1) as usize
}

/// Splits `size` bytes into the fewest fragments of at most `budget` bytes,
/// sizes differing by at most one.
pub fn fragment_sizes(size: usize, budget: usize) -> Vec<usize> {
    let n = size.div_ceil(budget).max(1);
    let base = size / n;
    let extra = size % n;
    (0..n).map(|i| base + usize::from(i < extra)).collect()
}

/// Cheap deterministic filler so parity arithmetic works on real bytes.
pub fn payload_pattern(ext_seq: u64, len: usize) -> Vec<u8> {
    let seed = ext_seq.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (0..len)
        .map(|i| (seed >> ((i % 8) * 8)) as u8 ^ (i as u8).wrapping_mul(31))
        .collect()
}

/// Groups outgoing media into parity blocks. A block's length is fixed when
/// its first packet arrives; turning FEC off drops the partial block.
#[derive(Debug, Clone, Default)]
pub struct FecScheduler {
    block: Vec<MediaPacket>,
    base_ext: u64,
    block_len: usize,
}

impl FecScheduler {
    /// Feeds one media packet; returns the parity packet when it completes a
    /// block. `interval` is read only at block boundaries.
    pub fn push(
        &mut self,
        pkt: &MediaPacket,
        ext_seq: u64,
        enabled: bool,
        interval: usize,
        now: SimTime,
    ) -> Option<(u64, FecPacket)> {
        if !enabled {
            self.block.clear();
            return None;
        }
        if self.block.is_empty() {
            self.base_ext = ext_seq;
            self.block_len = interval;
        }
        self.block.push(pkt.clone());
        if self.block.len() < self.block_len {
            return None;
        }
        let fec = encode_block(&self.block, now).expect("block holds 2..=14 packets");
        self.block.clear();
        Some((self.base_ext, fec))
    }

    pub fn abandon(&mut self) {
        self.block.clear();
    }

    pub fn pending(&self) -> usize {
        self.block.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct SentMedia {
    ext_seq: u64,
    bits: u64,
    send_ts: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct ProbePeriod {
    started: SimTime,
    fec_bits: u64,
}

/// Media source with an FBRA controller attached.
#[derive(Debug)]
pub struct Sender {
    cfg: SenderConfig,
    flow: FlowIdx,
    ssrc: u32,
    ctrl: FbraController,
    next_ext_seq: u64,
    next_frame: u64,
    sent: VecDeque<SentMedia>,
    fec: FecScheduler,
    report_seq: SeqUnwrapper,
    prev_highest: Option<u64>,
    prev_report_ts: Option<SimTime>,
    fec_bits_since_report: u64,
    probe: Option<ProbePeriod>,
}

impl Sender {
    pub fn new(cfg: SenderConfig, ctrl_cfg: ControllerConfig, flow: FlowIdx, ssrc: u32) -> Self {
        let ctrl_cfg = ControllerConfig {
            start_rate: cfg.start_rate,
            min_rate: cfg.min_rate,
            ..ctrl_cfg
        };
        Self {
            cfg,
            flow,
            ssrc,
            ctrl: FbraController::new(ctrl_cfg),
            next_ext_seq: 0,
            next_frame: 0,
            sent: VecDeque::new(),
            fec: FecScheduler::default(),
            report_seq: SeqUnwrapper::new(),
            prev_highest: None,
            prev_report_ts: None,
            fec_bits_since_report: 0,
            probe: None,
        }
    }

    pub fn controller(&self) -> &FbraController {
        &self.ctrl
    }

    pub fn config(&self) -> &SenderConfig {
        &self.cfg
    }

    /// When the next frame is due.
    pub fn next_frame_time(&self) -> SimTime {
        self.cfg.frame_time(self.next_frame)
    }

    pub fn media_packets_sent(&self) -> u64 {
        self.next_ext_seq
    }

    /// Builds the packets of the next frame at `target_rate` without FEC.
    pub fn generate_frame(&mut self, now: SimTime, target_rate: BitRate) -> Vec<MediaPacket> {
        let frame_id = self.next_frame as u32;
        let frame_ts = self.cfg.frame_time(self.next_frame);
        self.next_frame += 1;
        let sizes = fragment_sizes(
            frame_size(target_rate, self.cfg.fps),
            self.cfg.payload_budget(),
        );
        let count = sizes.len() as u16;
        sizes
            .into_iter()
            .enumerate()
            .map(|(i, len)| {
                let ext = self.next_ext_seq;
                self.next_ext_seq += 1;
                MediaPacket {
                    ssrc: self.ssrc,
                    seq: ext as Seq,
                    frame_id,
                    frame_ts,
                    send_ts: now,
                    payload: payload_pattern(ext, len),
                    is_fragment: count > 1,
                    fragment_index: i as u16,
                    fragment_count: count,
                }
            })
            .collect()
    }

    /// Parity packets must be frequent enough that a probe lasting one
    /// report interval carries at least one of them.
    fn effective_fec_interval(&self, packets_per_frame: usize) -> usize {
        let interval = self.ctrl.report_interval();
        let frames = interval.as_micros() * self.cfg.fps as u64 / 1_000_000;
        let per_interval = (frames as usize * packets_per_frame).max(2);
        (self.ctrl.fec_interval() as usize).min(per_interval)
    }

    /// Emits the frame due at `now`, with parity packets when probing.
    pub fn on_frame(&mut self, now: SimTime, sink: &mut impl TraceSink) -> Vec<Outgoing> {
        if let Some(d) = self.ctrl.on_tick(now) {
            self.after_decision(now, &d, sink);
        }
        let frame = self.generate_frame(now, self.ctrl.target_rate());
        let per_frame = frame.len();
        let fec_on = self.ctrl.fec_enabled();
        let mut out = Vec::with_capacity(frame.len() + 1);
        for pkt in frame {
            let ext = self.next_ext_seq - (per_frame - pkt.fragment_index as usize) as u64;
            let bits = pkt.wire_size() as u64 * 8;
            sink.record(TraceEvent {
                time: now,
                kind: EventKind::SendRtp,
                flow: self.flow,
                seq: Some(ext),
                size: pkt.wire_size() as u32,
                extra: Extra::Int(pkt.frame_id as i64),
            });
            self.sent.push_back(SentMedia {
                ext_seq: ext,
                bits,
                send_ts: now,
            });
            let interval = self.effective_fec_interval(per_frame);
            let parity = self.fec.push(&pkt, ext, fec_on, interval, now);
            out.push(Outgoing::Media(pkt));
            if let Some((base, fec)) = parity {
                let bits = fec.wire_size() as u64 * 8;
                self.fec_bits_since_report += bits;
                if let Some(p) = self.probe.as_mut() {
                    p.fec_bits += bits;
                }
                sink.record(TraceEvent {
                    time: now,
                    kind: EventKind::SendFec,
                    flow: self.flow,
                    seq: Some(base),
                    size: fec.wire_size() as u32,
                    extra: Extra::Int(fec.block_len as i64),
                });
                out.push(Outgoing::Fec(fec));
            }
        }
        self.prune_log(now);
        out
    }

    fn prune_log(&mut self, now: SimTime) {
        let horizon = now.saturating_sub(SimTime::from_secs(10));
        while self.sent.front().is_some_and(|s| s.send_ts < horizon) {
            self.sent.pop_front();
        }
    }

    fn ext_near(&self, seq: Seq, highest: u64) -> Option<u64> {
        let back = seq_distance(highest as Seq, seq) as u64;
        if back < 0x8000 {
            highest.checked_sub(back)
        } else {
            Some(highest + (0x1_0000 - back))
        }
    }

    fn bits_of(&self, ext: u64) -> u64 {
        let Some(first) = self.sent.front() else {
            return 0;
        };
        ext.checked_sub(first.ext_seq)
            .and_then(|i| self.sent.get(i as usize))
            .filter(|s| s.ext_seq == ext)
            .map_or(0, |s| s.bits)
    }

    fn measure(&mut self, now: SimTime, report: &FeedbackReport) -> ReportMeasurement {
        let highest = self.report_seq.unwrap(report.highest_seq);
        let lo = self.prev_highest.map_or(0, |h| h + 1);
        let start = self
            .prev_report_ts
            .or_else(|| self.sent.front().map(|s| s.send_ts))
            .unwrap_or(SimTime::ZERO);
        let span = report
            .report_ts
            .saturating_sub(start)
            .max(SimTime::from_millis(1));

        let sent_bits: u64 = (lo..=highest).map(|e| self.bits_of(e)).sum();
        let bad_bits: u64 = report
            .loss_events
            .iter()
            .chain(&report.discard_events)
            .filter_map(|e| self.ext_near(e.seq, highest))
            .map(|e| self.bits_of(e))
            .sum();
        let good_bits = sent_bits.saturating_sub(bad_bits);

        let probe_fec_rate = self.probe.map_or(BitRate::ZERO, |p| {
            BitRate::from_bits_over(p.fec_bits, now.saturating_sub(p.started))
        });
        let m = ReportMeasurement {
            sending_rate: BitRate::from_bits_over(sent_bits, span),
            goodput: BitRate::from_bits_over(good_bits, span),
            fec_rate: BitRate::from_bits_over(self.fec_bits_since_report, span),
            probe_fec_rate,
        };
        self.prev_highest = Some(highest.max(self.prev_highest.unwrap_or(0)));
        self.prev_report_ts = Some(report.report_ts);
        self.fec_bits_since_report = 0;
        m
    }

    /// Consumes a receiver report.
    pub fn on_report(&mut self, now: SimTime, report: &FeedbackReport, sink: &mut impl TraceSink) {
        sink.record(TraceEvent {
            time: now,
            kind: EventKind::RtcpRecv,
            flow: self.flow,
            seq: None,
            size: report_wire_size(report) as u32,
            extra: Extra::label(if report.is_early { "early" } else { "regular" }),
        });
        let meas = self.measure(now, report);
        if let ReportOutcome::Decision(d) = self.ctrl.on_report(now, report, meas) {
            self.after_decision(now, &d, sink);
        }
    }

    fn after_decision(&mut self, now: SimTime, d: &ControllerDecision, sink: &mut impl TraceSink) {
        let probing = d.new_state == ControllerState::Probe;
        match (probing, self.probe.is_some()) {
            (true, false) => {
                self.probe = Some(ProbePeriod {
                    started: now,
                    fec_bits: 0,
                })
            }
            (false, _) => {
                self.probe = None;
                self.fec.abandon();
            }
            _ => {}
        }
        sink.record(TraceEvent {
            time: now,
            kind: EventKind::State,
            flow: self.flow,
            seq: None,
            size: 0,
            extra: Extra::label(d.new_state.as_str()),
        });
        sink.record(TraceEvent {
            time: now,
            kind: EventKind::Rate,
            flow: self.flow,
            seq: None,
            size: 0,
            extra: Extra::Int(d.target_media_rate.bps() as i64),
        });
    }
}
