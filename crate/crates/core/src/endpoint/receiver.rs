// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::fec::{try_recover, FecBlockState};
use crate::trace::{EventKind, Extra, FlowIdx, TraceEvent, TraceSink};
use crate::types::{
    seq_distance, FecPacket, FeedbackReport, MediaPacket, Seq, SeqEvent, SeqUnwrapper, SimTime,
};
use crate::wire::report_wire_size;

use super::Outbox;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    /// Playout cutoff measured from the send timestamp.
    pub delay_max: SimTime,
    /// Regular report spacing as a multiple of the smoothed RTT.
    pub rtcp_interval_factor: u64,
    pub min_report_interval: SimTime,
    /// Regular reports required between two early ones.
    pub early_spacing: u32,
    /// Newly detected consecutive gaps that fire an early report.
    pub loss_burst: u64,
    /// A gap is final once a packet this far past it has arrived.
    pub reorder_threshold: u64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            delay_max: SimTime::from_millis(400),
            rtcp_interval_factor: 2,
            min_report_interval: SimTime::from_millis(50),
            early_spacing: 2,
            loss_burst: 3,
            reorder_threshold: 3,
        }
    }
}

impl ReceiverConfig {
    /// OWD beyond which the playout buffer is about to run dry.
    pub fn early_owd_threshold(&self) -> SimTime {
        self.delay_max.mul_ratio(9, 10)
    }
}

/// Final fate of a media packet at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Played,
    DiscardedLate,
    Lost,
    Recovered,
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    first_seen: SimTime,
    deadline: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct LastMedia {
    send_ts: SimTime,
    arrival: SimTime,
    owd: SimTime,
}

/// How many packets behind the highest one the receiver keeps state for.
const HISTORY: u64 = 256;

/// Playout, loss detection, FEC recovery and report generation for one flow.
#[derive(Debug)]
pub struct Receiver {
    cfg: ReceiverConfig,
    flow: FlowIdx,
    ssrc: u32,
    unwrap: SeqUnwrapper,
    highest: Option<u64>,
    highest_at_report: Option<u64>,
    store: BTreeMap<u64, MediaPacket>,
    dispositions: BTreeMap<u64, Disposition>,
    gaps: BTreeMap<u64, Gap>,
    blocks: BTreeMap<u64, FecBlockState>,
    loss_events: Vec<SeqEvent>,
    discard_events: Vec<SeqEvent>,
    interval_start: SimTime,
    cumulative_lost: u32,
    jitter: u64,
    last_transit: Option<i64>,
    srtt: Option<SimTime>,
    /// Smallest one-way delay seen, taken as the unqueued return path.
    base_owd: Option<SimTime>,
    last_media: Option<LastMedia>,
    next_report_at: Option<SimTime>,
    regular_since_early: u32,
    counts: DispositionCounts,
}

/// Running totals of final dispositions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DispositionCounts {
    pub played: u64,
    pub discarded_late: u64,
    /// Lost and never rebuilt.
    pub lost: u64,
    pub recovered: u64,
}

impl Receiver {
    pub fn new(cfg: ReceiverConfig, flow: FlowIdx, ssrc: u32) -> Self {
        Self {
            regular_since_early: cfg.early_spacing,
            cfg,
            flow,
            ssrc,
            unwrap: SeqUnwrapper::new(),
            highest: None,
            highest_at_report: None,
            store: BTreeMap::new(),
            dispositions: BTreeMap::new(),
            gaps: BTreeMap::new(),
            blocks: BTreeMap::new(),
            loss_events: Vec::new(),
            discard_events: Vec::new(),
            interval_start: SimTime::ZERO,
            cumulative_lost: 0,
            jitter: 0,
            last_transit: None,
            srtt: None,
            base_owd: None,
            last_media: None,
            next_report_at: None,
            counts: DispositionCounts::default(),
        }
    }

    pub fn counts(&self) -> DispositionCounts {
        self.counts
    }

    /// Interarrival jitter, microseconds.
    pub fn jitter(&self) -> u64 {
        self.jitter
    }

    pub fn smoothed_rtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn highest_seq(&self) -> Option<u64> {
        self.highest
    }

    pub fn disposition(&self, ext_seq: u64) -> Option<Disposition> {
        self.dispositions.get(&ext_seq).copied()
    }

    /// Current regular report spacing.
    pub fn report_interval(&self) -> SimTime {
        let rtt = self.srtt.unwrap_or(SimTime::ZERO);
        SimTime(rtt.0 * self.cfg.rtcp_interval_factor).max(self.cfg.min_report_interval)
    }

    fn ext_near(&self, seq: Seq) -> u64 {
        let Some(h) = self.highest else {
            return seq as u64;
        };
        let back = seq_distance(h as Seq, seq) as u64;
        if back < 0x8000 {
            h.saturating_sub(back)
        } else {
            h + (0x1_0000 - back)
        }
    }

    fn emit(&self, sink: &mut impl TraceSink, now: SimTime, kind: EventKind, seq: u64, size: usize, extra: Extra) {
        sink.record(TraceEvent {
            time: now,
            kind,
            flow: self.flow,
            seq: Some(seq),
            size: size as u32,
            extra,
        });
    }

    fn update_timing(&mut self, now: SimTime, pkt: &MediaPacket) {
        let owd = now.saturating_sub(pkt.send_ts);
        let transit = owd.as_micros() as i64;
        if let Some(prev) = self.last_transit {
            let d = (transit - prev).unsigned_abs();
            let j = self.jitter as i64;
            self.jitter = (j + (d as i64 - j) / 16) as u64;
        }
        self.last_transit = Some(transit);
        let base = self.base_owd.map_or(owd, |b| b.min(owd));
        self.base_owd = Some(base);
        let sample = owd + base;
        self.srtt = Some(match self.srtt {
            None => sample,
            Some(s) => SimTime((s.0 * 9 + sample.0) / 10),
        });
        self.last_media = Some(LastMedia {
            send_ts: pkt.send_ts,
            arrival: now,
            owd,
        });
    }

    /// Handles an arriving media packet.
    pub fn on_media(
        &mut self,
        now: SimTime,
        pkt: MediaPacket,
        sink: &mut impl TraceSink,
        out: &mut Outbox,
    ) {
        let ext = self.unwrap.unwrap(pkt.seq);
        if self.dispositions.contains_key(&ext) {
            return;
        }
        self.update_timing(now, &pkt);
        if self.next_report_at.is_none() {
            self.interval_start = now;
            self.schedule_report(now, out);
        }

        let mut new_gaps = 0;
        match self.highest {
            Some(h) if ext > h => {
                for s in h + 1..ext {
                    self.gaps.insert(
                        s,
                        Gap {
                            first_seen: now,
                            deadline: pkt.send_ts + self.cfg.delay_max,
                        },
                    );
                    new_gaps += 1;
                }
                if new_gaps > 0 {
                    out.wakeups.push(pkt.send_ts + self.cfg.delay_max);
                }
                self.highest = Some(ext);
            }
            Some(_) => {
                self.gaps.remove(&ext);
            }
            None => self.highest = Some(ext),
        }

        let owd = now.saturating_sub(pkt.send_ts);
        if owd > self.cfg.delay_max {
            self.set_disposition(ext, Disposition::DiscardedLate);
            self.discard_events.push(SeqEvent { seq: pkt.seq, at: now });
            self.emit(sink, now, EventKind::Discard, ext, pkt.wire_size(), Extra::Int(owd.0 as i64));
        } else {
            self.set_disposition(ext, Disposition::Played);
            self.emit(sink, now, EventKind::Recv, ext, pkt.wire_size(), Extra::Int(owd.0 as i64));
        }
        self.add_to_blocks(ext, &pkt);
        self.store.insert(ext, pkt);

        let threshold = self.cfg.reorder_threshold;
        self.finalize_gaps(now, sink, |s, _, h| h >= s + threshold);
        self.try_blocks(now, sink);
        self.prune();

        let owd_trigger = owd > self.cfg.early_owd_threshold();
        let burst_trigger = new_gaps >= self.cfg.loss_burst;
        if (owd_trigger || burst_trigger) && self.regular_since_early >= self.cfg.early_spacing {
            self.send_report(now, true, sink, out);
        }
    }

    /// Handles an arriving parity packet.
    pub fn on_fec(&mut self, now: SimTime, fec: FecPacket, sink: &mut impl TraceSink) {
        let base = self.ext_near(fec.base_seq);
        if self.blocks.contains_key(&base) {
            return;
        }
        let mut state = FecBlockState::new(fec, now + self.cfg.delay_max);
        for ext in base..base + state.expected as u64 {
            if let Some(p) = self.store.get(&ext) {
                state.insert(p.clone());
            }
        }
        self.blocks.insert(base, state);
        self.try_blocks(now, sink);
    }

    fn add_to_blocks(&mut self, ext: u64, pkt: &MediaPacket) {
        let lo = ext.saturating_sub(crate::fec::MAX_BLOCK_LEN as u64);
        for (_, b) in self.blocks.range_mut(lo..=ext) {
            b.insert(pkt.clone());
        }
    }

    fn set_disposition(&mut self, ext: u64, d: Disposition) {
        let prev = self.dispositions.insert(ext, d);
        if prev == Some(Disposition::Lost) {
            self.counts.lost -= 1;
        }
        match d {
            Disposition::Played => self.counts.played += 1,
            Disposition::DiscardedLate => self.counts.discarded_late += 1,
            Disposition::Lost => self.counts.lost += 1,
            Disposition::Recovered => self.counts.recovered += 1,
        }
    }

    fn declare_lost(&mut self, now: SimTime, ext: u64, first_seen: SimTime, sink: &mut impl TraceSink) {
        self.set_disposition(ext, Disposition::Lost);
        self.cumulative_lost += 1;
        self.loss_events.push(SeqEvent {
            seq: ext as Seq,
            at: first_seen.max(self.interval_start),
        });
        self.emit(sink, now, EventKind::Loss, ext, 0, Extra::None);
    }

    fn finalize_gaps(
        &mut self,
        now: SimTime,
        sink: &mut impl TraceSink,
        done: impl Fn(u64, &Gap, u64) -> bool,
    ) {
        let h = self.highest.unwrap_or(0);
        let ready: Vec<(u64, Gap)> = self
            .gaps
            .iter()
            .filter(|(s, g)| done(**s, g, h))
            .map(|(s, g)| (*s, *g))
            .collect();
        for (s, g) in ready {
            self.gaps.remove(&s);
            self.declare_lost(now, s, g.first_seen, sink);
        }
    }

    /// Rebuilds any packet that is the only one missing from its block.
    fn try_blocks(&mut self, now: SimTime, sink: &mut impl TraceSink) {
        let mut rebuilt = Vec::new();
        for (base, b) in &self.blocks {
            if let Some(p) = try_recover(b, now) {
                let ext = base + seq_distance(p.seq, b.base_seq) as u64;
                rebuilt.push((*base, ext, p));
            }
        }
        for (base, ext, pkt) in rebuilt {
            self.blocks.remove(&base);
            if pkt.send_ts + self.cfg.delay_max < now {
                continue;
            }
            match self.dispositions.get(&ext) {
                Some(Disposition::Lost) => {}
                Some(_) => continue,
                None => {
                    let first_seen = self.gaps.remove(&ext).map_or(now, |g| g.first_seen);
                    if self.highest.is_none_or(|h| ext > h) {
                        self.highest = Some(ext);
                        self.unwrap.unwrap(pkt.seq);
                    }
                    self.declare_lost(now, ext, first_seen, sink);
                }
            }
            self.set_disposition(ext, Disposition::Recovered);
            self.emit(sink, now, EventKind::Recovered, ext, pkt.wire_size(), Extra::Int((now - pkt.send_ts).0 as i64));
            self.store.insert(ext, pkt);
        }
    }

    fn prune(&mut self) {
        let Some(h) = self.highest else { return };
        let floor = h.saturating_sub(HISTORY);
        self.store = self.store.split_off(&floor);
        self.blocks = self.blocks.split_off(&floor);
        self.dispositions = self.dispositions.split_off(&floor);
    }

    fn schedule_report(&mut self, now: SimTime, out: &mut Outbox) {
        let at = now + self.report_interval();
        self.next_report_at = Some(at);
        out.wakeups.push(at);
    }

    /// Timer callback: finalizes overdue gaps and sends a due regular report.
    pub fn on_wakeup(&mut self, now: SimTime, sink: &mut impl TraceSink, out: &mut Outbox) {
        self.finalize_gaps(now, sink, |_, g, _| g.deadline <= now);
        if self.next_report_at.is_some_and(|t| t <= now) {
            self.send_report(now, false, sink, out);
        }
    }

    /// Builds the report closing the current interval and restarts the
    /// regular timer.
    pub fn build_report(&mut self, now: SimTime, is_early: bool) -> FeedbackReport {
        let highest = self.highest.unwrap_or(0);
        let interval_sent = match self.highest_at_report {
            Some(prev) => highest.saturating_sub(prev),
            None => self.highest.map_or(0, |h| h + 1),
        };
        let last = self.last_media;
        let report = FeedbackReport {
            ssrc: self.ssrc,
            report_ts: now,
            highest_seq: highest as Seq,
            cumulative_lost: self.cumulative_lost,
            interval_sent: interval_sent as u32,
            loss_events: std::mem::take(&mut self.loss_events),
            discard_events: std::mem::take(&mut self.discard_events),
            owd_sample: last.map_or(SimTime::ZERO, |m| m.owd),
            jitter: self.jitter.min(u32::MAX as u64) as u32,
            lsr: last.map_or(SimTime::ZERO, |m| m.send_ts),
            dlsr: last.map_or(SimTime::ZERO, |m| now.saturating_sub(m.arrival)),
            is_early,
        };
        self.highest_at_report = self.highest;
        self.interval_start = now;
        if is_early {
            self.regular_since_early = 0;
        } else {
            self.regular_since_early = self.regular_since_early.saturating_add(1);
        }
        report
    }

    fn send_report(&mut self, now: SimTime, is_early: bool, sink: &mut impl TraceSink, out: &mut Outbox) {
        let report = self.build_report(now, is_early);
        sink.record(TraceEvent {
            time: now,
            kind: EventKind::RtcpSent,
            flow: self.flow,
            seq: None,
            size: report_wire_size(&report) as u32,
            extra: Extra::label(if is_early { "early" } else { "regular" }),
        });
        out.reports.push(report);
        self.schedule_report(now, out);
    }
}
