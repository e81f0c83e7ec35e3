// SPDX-License-Identifier: Apache-2.0

//! Evaluation metrics computed from a [`SimTrace`] alone.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};

use serde::Serialize;

use crate::controller::ControllerState;
use crate::error::{Error, Result};
use crate::trace::{EventKind, FlowIdx, FlowKind, SimTrace};
use crate::types::SimTime;

pub const SUMMARY_SCHEMA: &str = "fbra-summary v1";
pub const AGGREGATE_SCHEMA: &str = "fbra-aggregate v1";
pub const TIMESERIES_SCHEMA: &str = "fbra-timeseries v1";

/// Per media flow results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub flow_id: String,
    /// Played plus recovered media bits over the run duration.
    pub goodput_bps: f64,
    pub sending_rate_bps: f64,
    pub fec_rate_bps: f64,
    /// Unrecovered losses plus late discards over media packets sent.
    pub loss_rate: f64,
    pub lost_frames: u64,
    pub frcc: Option<f64>,
    pub ffre: Option<f64>,
    /// Media plus parity rate over mean bottleneck capacity.
    pub abu: f64,
    pub packets_sent: u64,
    pub packets_lost: u64,
    pub packets_recovered: u64,
    pub packets_discarded: u64,
    pub fec_packets_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TcpSummary {
    pub flow_id: String,
    pub throughput_bps: f64,
    pub transfers_started: u64,
    pub transfers_completed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub duration_s: f64,
    pub mean_capacity_bps: u64,
    pub rtp: Vec<FlowSummary>,
    pub tcp: Vec<TcpSummary>,
    pub tfs: Option<f64>,
}

fn rate(bits: u64, duration: SimTime) -> f64 {
    if duration == SimTime::ZERO {
        0.0
    } else {
        bits as f64 / duration.as_secs_f64()
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// How a probing episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeOutcome {
    Raised,
    Kept,
    Incorrect,
}

/// Classifies probing episodes in a state sequence. An episode opens on
/// each STAY to PROBE transition; the controller starts in STAY.
pub fn probe_episodes(states: &[ControllerState]) -> Vec<EpisodeOutcome> {
    use ControllerState::*;
    let mut out = Vec::new();
    let mut prev = Stay;
    let mut open = false;
    for &s in states {
        if open {
            match s {
                Up => {
                    out.push(EpisodeOutcome::Raised);
                    open = false;
                }
                Stay => {
                    out.push(EpisodeOutcome::Kept);
                    open = false;
                }
                Down => {
                    out.push(EpisodeOutcome::Incorrect);
                    open = false;
                }
                Probe => {}
            }
        }
        if prev == Stay && s == Probe {
            open = true;
        }
        prev = s;
    }
    if open {
        out.push(EpisodeOutcome::Kept);
    }
    out
}

/// Fraction of probing episodes that raised or kept the rate.
pub fn frcc_of_states(states: &[ControllerState]) -> Option<f64> {
    let eps = probe_episodes(states);
    let good = eps
        .iter()
        .filter(|e| **e != EpisodeOutcome::Incorrect)
        .count();
    ratio(good as u64, eps.len() as u64)
}

fn states_of(trace: &SimTrace, flow: FlowIdx) -> Vec<ControllerState> {
    trace
        .events_of(flow)
        .filter(|e| e.kind == EventKind::State)
        .filter_map(|e| e.extra.as_label()?.parse().ok())
        .collect()
}

pub fn frcc(trace: &SimTrace, flow: FlowIdx) -> Option<f64> {
    frcc_of_states(&states_of(trace, flow))
}

/// Per-frame loss bookkeeping for one media flow.
#[derive(Debug, Default)]
struct FrameLedger {
    frame_of: HashMap<u64, i64>,
    covered: BTreeSet<u64>,
    lost: BTreeSet<u64>,
    recovered: BTreeSet<u64>,
    discarded: BTreeSet<u64>,
}

impl FrameLedger {
    fn build(trace: &SimTrace, flow: FlowIdx) -> Self {
        let mut l = FrameLedger::default();
        for e in trace.events_of(flow) {
            let Some(seq) = e.seq else { continue };
            match e.kind {
                EventKind::SendRtp => {
                    l.frame_of.insert(seq, e.extra.as_int().unwrap_or(-1));
                }
                EventKind::SendFec => {
                    let len = e.extra.as_int().unwrap_or(0).max(0) as u64;
                    l.covered.extend(seq..seq + len);
                }
                EventKind::Loss => {
                    l.lost.insert(seq);
                }
                EventKind::Recovered => {
                    l.recovered.insert(seq);
                }
                EventKind::Discard => {
                    l.discarded.insert(seq);
                }
                _ => {}
            }
        }
        l
    }

    fn frame(&self, seq: u64) -> Option<i64> {
        self.frame_of.get(&seq).copied()
    }

    /// Frames with an unrecovered loss or a late discard.
    fn lost_frames(&self) -> u64 {
        let bad: BTreeSet<i64> = self
            .lost
            .difference(&self.recovered)
            .chain(&self.discarded)
            .filter_map(|s| self.frame(*s))
            .collect();
        bad.len() as u64
    }

    /// (frames fully recovered, frames protected but still lost).
    fn recovery_counts(&self) -> (u64, u64) {
        let mut frames: BTreeMap<i64, (bool, bool)> = BTreeMap::new();
        for s in &self.lost {
            let Some(f) = self.frame(*s) else { continue };
            let entry = frames.entry(f).or_insert((false, true));
            if self.covered.contains(s) {
                entry.0 = true;
            }
            if !self.recovered.contains(s) {
                entry.1 = false;
            }
        }
        let mut recovered = 0;
        let mut protected_lost = 0;
        for (protected, all_recovered) in frames.values() {
            if *all_recovered {
                recovered += 1;
            } else if *protected {
                protected_lost += 1;
            }
        }
        (recovered, protected_lost)
    }
}

/// Frames rebuilt by FEC over frames that FEC protected and that lost data.
pub fn ffre(trace: &SimTrace, flow: FlowIdx) -> Option<f64> {
    let (rec, lost) = FrameLedger::build(trace, flow).recovery_counts();
    ratio(rec, rec + lost)
}

/// TCP fair share from per-flow throughputs.
pub fn tfs_from(tcp: &[f64], others: &[f64]) -> Result<f64> {
    if tcp.is_empty() {
        return Err(Error::NoTcpFlows);
    }
    let tcp_total: f64 = tcp.iter().sum();
    let total = tcp_total + others.iter().sum::<f64>();
    let n = (tcp.len() + others.len()) as f64;
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok((tcp_total / tcp.len() as f64) / (total / n))
}

fn delivered_bits(trace: &SimTrace, flow: FlowIdx) -> u64 {
    trace
        .events_of(flow)
        .filter(|e| matches!(e.kind, EventKind::Recv | EventKind::Recovered))
        .map(|e| e.size as u64 * 8)
        .sum()
}

pub fn tfs(trace: &SimTrace) -> Result<f64> {
    let by_kind = |kind| -> Vec<f64> {
        trace
            .flows_of(kind)
            .map(|(i, _)| rate(delivered_bits(trace, i), trace.duration))
            .collect()
    };
    tfs_from(&by_kind(FlowKind::Tcp), &by_kind(FlowKind::Rtp))
}

/// Summary of one media flow. `capacity_bps` defaults to the trace's mean
/// bottleneck capacity.
pub fn flow_summary(trace: &SimTrace, flow_id: &str, capacity_bps: Option<u64>) -> Result<FlowSummary> {
    let flow = trace.flow_index(flow_id)?;
    let mut bits: HashMap<EventKind, u64> = HashMap::new();
    let mut counts: HashMap<EventKind, u64> = HashMap::new();
    for e in trace.events_of(flow) {
        *bits.entry(e.kind).or_default() += e.size as u64 * 8;
        *counts.entry(e.kind).or_default() += 1;
    }
    let b = |k| bits.get(&k).copied().unwrap_or(0);
    let c = |k| counts.get(&k).copied().unwrap_or(0);
    let d = trace.duration;
    let ledger = FrameLedger::build(trace, flow);
    let recovered = ledger.recovered.len() as u64;
    let unrecovered = ledger.lost.difference(&ledger.recovered).count() as u64;
    let late = trace
        .events_of(flow)
        .filter(|e| e.kind == EventKind::Discard)
        .filter_map(|e| e.seq)
        .filter(|s| !ledger.lost.contains(s))
        .collect::<std::collections::HashSet<_>>()
        .len() as u64;
    let (rec_frames, protected_lost) = ledger.recovery_counts();
    let cap = capacity_bps.unwrap_or(trace.mean_capacity_bps);
    let combined = rate(b(EventKind::SendRtp) + b(EventKind::SendFec), d);
    Ok(FlowSummary {
        flow_id: flow_id.to_owned(),
        goodput_bps: rate(b(EventKind::Recv) + b(EventKind::Recovered), d),
        sending_rate_bps: rate(b(EventKind::SendRtp), d),
        fec_rate_bps: rate(b(EventKind::SendFec), d),
        loss_rate: ratio(unrecovered + late, c(EventKind::SendRtp)).unwrap_or(0.0),
        lost_frames: ledger.lost_frames(),
        frcc: frcc(trace, flow),
        ffre: ratio(rec_frames, rec_frames + protected_lost),
        abu: if cap == 0 { 0.0 } else { combined / cap as f64 },
        packets_sent: c(EventKind::SendRtp),
        packets_lost: unrecovered,
        packets_recovered: recovered,
        packets_discarded: c(EventKind::Discard),
        fec_packets_sent: c(EventKind::SendFec),
    })
}

pub fn tcp_summary(trace: &SimTrace, flow: FlowIdx) -> TcpSummary {
    let mut started = 0;
    let mut completed = 0;
    for e in trace.events_of(flow).filter(|e| e.kind == EventKind::State) {
        match e.extra.as_label() {
            Some("TRANSFER") => started += 1,
            Some("IDLE") => completed += 1,
            _ => {}
        }
    }
    TcpSummary {
        flow_id: trace.flows[flow as usize].id.clone(),
        throughput_bps: rate(delivered_bits(trace, flow), trace.duration),
        transfers_started: started,
        transfers_completed: completed,
    }
}

pub fn summarize(trace: &SimTrace) -> RunSummary {
    let rtp = trace
        .flows_of(FlowKind::Rtp)
        .map(|(_, f)| flow_summary(trace, &f.id, None).expect("flow listed in trace"))
        .collect();
    let tcp = trace
        .flows_of(FlowKind::Tcp)
        .map(|(i, _)| tcp_summary(trace, i))
        .collect();
    RunSummary {
        schema: SUMMARY_SCHEMA,
        duration_s: trace.duration.as_secs_f64(),
        mean_capacity_bps: trace.mean_capacity_bps,
        rtp,
        tcp,
        tfs: tfs(trace).ok(),
    }
}

/// One-second bucket of one flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeseriesRow {
    pub second: u64,
    pub flow_id: String,
    pub sending_rate_bps: u64,
    pub fec_rate_bps: u64,
    pub goodput_bps: u64,
    pub mean_owd_ms: Option<f64>,
}

pub fn timeseries(trace: &SimTrace) -> Vec<TimeseriesRow> {
    #[derive(Default, Clone)]
    struct Bucket {
        send: u64,
        fec: u64,
        good: u64,
        owd_sum: u64,
        owd_n: u64,
    }
    let secs = trace.duration.as_micros().div_ceil(1_000_000) as usize;
    let mut buckets = vec![vec![Bucket::default(); secs]; trace.flows.len()];
    for e in &trace.events {
        let Some(b) = buckets[e.flow as usize].get_mut((e.time.as_micros() / 1_000_000) as usize) else {
            continue;
        };
        let bits = e.size as u64 * 8;
        let media = trace.flows[e.flow as usize].kind == FlowKind::Rtp;
        match e.kind {
            EventKind::SendRtp => b.send += bits,
            EventKind::SendFec => b.fec += bits,
            EventKind::Recovered => b.good += bits,
            EventKind::Recv => {
                b.good += bits;
                if media {
                    if let Some(owd) = e.extra.as_int() {
                        b.owd_sum += owd as u64;
                        b.owd_n += 1;
                    }
                }
            }
            _ => {}
        }
    }
    let mut rows = Vec::with_capacity(secs * trace.flows.len());
    for (f, flow) in trace.flows.iter().enumerate() {
        for (s, b) in buckets[f].iter().enumerate() {
            rows.push(TimeseriesRow {
                second: s as u64,
                flow_id: flow.id.clone(),
                sending_rate_bps: b.send,
                fec_rate_bps: b.fec,
                goodput_bps: b.good,
                mean_owd_ms: (b.owd_n > 0).then(|| b.owd_sum as f64 / b.owd_n as f64 / 1000.0),
            });
        }
    }
    rows
}

pub fn write_timeseries_csv<W: Write>(rows: &[TimeseriesRow], mut w: W) -> io::Result<()> {
    writeln!(w, "# {TIMESERIES_SCHEMA}")?;
    writeln!(w, "second,flow_id,sending_rate_bps,fec_rate_bps,goodput_bps,mean_owd_ms")?;
    for r in rows {
        let owd = r.mean_owd_ms.map(|v| format!("{v:.3}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.second, r.flow_id, r.sending_rate_bps, r.fec_rate_bps, r.goodput_bps, owd
        )?;
    }
    w.flush()
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    /// Runs in which the metric was defined.
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Stat { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub schema: &'static str,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Stat>,
}

/// Mean and σ per metric; media flows are keyed by id, TCP flows pooled.
pub fn aggregate(runs: &[(u64, RunSummary)]) -> Aggregate {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut put = |k: String, v: Option<f64>| {
        let e = values.entry(k).or_default();
        if let Some(v) = v {
            e.push(v);
        }
    };
    for (_, s) in runs {
        for f in &s.rtp {
            let id = &f.flow_id;
            put(format!("{id}.goodput_bps"), Some(f.goodput_bps));
            put(format!("{id}.sending_rate_bps"), Some(f.sending_rate_bps));
            put(format!("{id}.fec_rate_bps"), Some(f.fec_rate_bps));
            put(format!("{id}.loss_rate"), Some(f.loss_rate));
            put(format!("{id}.lost_frames"), Some(f.lost_frames as f64));
            put(format!("{id}.frcc"), f.frcc);
            put(format!("{id}.ffre"), f.ffre);
            put(format!("{id}.abu"), Some(f.abu));
        }
        if !s.tcp.is_empty() {
            let mean_tp = s.tcp.iter().map(|t| t.throughput_bps).sum::<f64>() / s.tcp.len() as f64;
            put("tcp.throughput_bps".into(), Some(mean_tp));
        }
        put("tfs".into(), s.tfs);
    }
    Aggregate {
        schema: AGGREGATE_SCHEMA,
        runs: runs.len(),
        seeds: runs.iter().map(|(seed, _)| *seed).collect(),
        metrics: values
            .into_iter()
            .filter_map(|(k, v)| Stat::of(&v).map(|s| (k, s)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Extra, FlowInfo, TraceEvent, TraceSink};
    use ControllerState::*;

    fn flows(n_rtp: usize, n_tcp: usize) -> Vec<FlowInfo> {
        (0..n_rtp)
            .map(|i| FlowInfo {
                id: format!("rtp{i}"),
                kind: FlowKind::Rtp,
            })
            .chain((0..n_tcp).map(|i| FlowInfo {
                id: format!("tcp{i}"),
                kind: FlowKind::Tcp,
            }))
            .collect()
    }

    fn ev(t: &mut SimTrace, us: u64, kind: EventKind, flow: FlowIdx, seq: Option<u64>, size: u32, extra: Extra) {
        t.record(TraceEvent {
            time: SimTime(us),
            kind,
            flow,
            seq,
            size,
            extra,
        });
    }

    #[test]
    fn frcc_examples() {
        let states = [Probe, Up, Stay, Probe, Stay, Probe, Down, Stay];
        assert_eq!(
            probe_episodes(&states),
            vec![
                EpisodeOutcome::Raised,
                EpisodeOutcome::Kept,
                EpisodeOutcome::Incorrect
            ]
        );
        assert_eq!(frcc_of_states(&states), Some(2.0 / 3.0));
        assert_eq!(frcc_of_states(&[Probe, Probe, Up, Stay, Probe, Up]), Some(1.0));
        assert_eq!(frcc_of_states(&[Stay, Stay, Down, Stay]), None);
        // Truncated episode counts as kept; DOWN->PROBE cannot open one.
        assert_eq!(frcc_of_states(&[Probe]), Some(1.0));
        assert_eq!(frcc_of_states(&[Down, Probe, Down]), None);
    }

    #[test]
    fn ffre_examples() {
        let mut t = SimTrace::new(SimTime::from_secs(1), flows(1, 0), 100_000);
        // 10 single-packet frames, all covered by parity, all lost; 2 rebuilt.
        for s in 0..10 {
            ev(&mut t, s, EventKind::SendRtp, 0, Some(s), 100, Extra::Int(s as i64));
        }
        ev(&mut t, 10, EventKind::SendFec, 0, Some(0), 116, Extra::Int(10));
        for s in 0..10 {
            ev(&mut t, 100 + s, EventKind::Loss, 0, Some(s), 0, Extra::None);
        }
        for s in 0..2 {
            ev(&mut t, 200 + s, EventKind::Recovered, 0, Some(s), 100, Extra::Int(0));
        }
        assert_eq!(ffre(&t, 0), Some(0.2));

        let mut none = SimTrace::new(SimTime::from_secs(1), flows(1, 0), 100_000);
        ev(&mut none, 0, EventKind::SendRtp, 0, Some(0), 100, Extra::Int(0));
        ev(&mut none, 5, EventKind::Loss, 0, Some(0), 0, Extra::None);
        assert_eq!(ffre(&none, 0), None);
    }

    #[test]
    fn ffre_frame_needs_every_fragment_back() {
        let mut t = SimTrace::new(SimTime::from_secs(1), flows(1, 0), 100_000);
        for s in 0..4 {
            ev(&mut t, s, EventKind::SendRtp, 0, Some(s), 100, Extra::Int(0));
        }
        ev(&mut t, 4, EventKind::SendFec, 0, Some(0), 116, Extra::Int(2));
        ev(&mut t, 4, EventKind::SendFec, 0, Some(2), 116, Extra::Int(2));
        ev(&mut t, 5, EventKind::Loss, 0, Some(1), 0, Extra::None);
        ev(&mut t, 5, EventKind::Loss, 0, Some(3), 0, Extra::None);
        ev(&mut t, 6, EventKind::Recovered, 0, Some(1), 100, Extra::Int(0));
        assert_eq!(ffre(&t, 0), Some(0.0));
        ev(&mut t, 7, EventKind::Recovered, 0, Some(3), 100, Extra::Int(0));
        assert_eq!(ffre(&t, 0), Some(1.0));
    }

    #[test]
    fn tfs_examples() {
        let tcp = vec![500.0; 10];
        let got = tfs_from(&tcp, &[1000.0]).unwrap();
        // (5000 / 10) / (6000 / 11)
        assert!((got - 11.0 / 12.0).abs() < 1e-12);
        assert_eq!(tfs_from(&[300.0, 300.0], &[300.0]).unwrap(), 1.0);
        assert_eq!(tfs_from(&[0.0, 0.0], &[300.0]).unwrap(), 0.0);
        assert!(matches!(tfs_from(&[], &[1.0]), Err(Error::NoTcpFlows)));
    }

    #[test]
    fn loss_rate_counts_unrecovered_losses() {
        let mut t = SimTrace::new(SimTime::from_secs(10), flows(1, 0), 200_000);
        for s in 0..1000 {
            ev(&mut t, s, EventKind::SendRtp, 0, Some(s), 500, Extra::Int(s as i64));
        }
        for s in 0..20 {
            ev(&mut t, 2000 + s, EventKind::Loss, 0, Some(s * 10), 0, Extra::None);
        }
        for s in 0..5 {
            ev(&mut t, 3000 + s, EventKind::Recovered, 0, Some(s * 10), 500, Extra::Int(0));
        }
        let f = flow_summary(&t, "rtp0", None).unwrap();
        assert!((f.loss_rate - 0.015).abs() < 1e-12);
        assert_eq!(f.lost_frames, 15);
        assert_eq!(f.packets_recovered, 5);
        assert!(matches!(flow_summary(&t, "rtp9", None), Err(Error::UnknownFlow(_))));

        // late packets count as lost to the application
        for s in 0..10 {
            ev(&mut t, 4000 + s, EventKind::Discard, 0, Some(s * 10 + 1), 500, Extra::Int(450_000));
        }
        let f = flow_summary(&t, "rtp0", None).unwrap();
        assert!((f.loss_rate - 0.025).abs() < 1e-12);
        assert_eq!(f.packets_discarded, 10);
    }

    #[test]
    fn lossless_goodput_equals_sending_rate() {
        let mut t = SimTrace::new(SimTime::from_secs(2), flows(1, 0), 200_000);
        for s in 0..100 {
            ev(&mut t, s * 1000, EventKind::SendRtp, 0, Some(s), 500, Extra::Int(s as i64));
            ev(&mut t, s * 1000 + 50_000, EventKind::Recv, 0, Some(s), 500, Extra::Int(50_000));
        }
        let f = flow_summary(&t, "rtp0", None).unwrap();
        assert_eq!(f.loss_rate, 0.0);
        assert_eq!(f.goodput_bps, f.sending_rate_bps);
        assert_eq!(f.goodput_bps, 100.0 * 500.0 * 8.0 / 2.0);
        assert_eq!(f.abu, 1.0);
        assert_eq!(f.frcc, None);
    }

    #[test]
    fn timeseries_buckets() {
        let mut t = SimTrace::new(SimTime::from_millis(1_500), flows(1, 1), 0);
        ev(&mut t, 100, EventKind::SendRtp, 0, Some(0), 100, Extra::Int(0));
        ev(&mut t, 200, EventKind::SendFec, 0, Some(0), 50, Extra::Int(2));
        ev(&mut t, 300, EventKind::Recv, 0, Some(0), 100, Extra::Int(40_000));
        ev(&mut t, 1_100_000, EventKind::Recv, 0, Some(1), 100, Extra::Int(60_000));
        ev(&mut t, 1_200_000, EventKind::Recv, 1, Some(0), 1500, Extra::Int(1));
        let rows = timeseries(&t);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].sending_rate_bps, 800);
        assert_eq!(rows[0].fec_rate_bps, 400);
        assert_eq!(rows[0].mean_owd_ms, Some(40.0));
        assert_eq!(rows[1].mean_owd_ms, Some(60.0));
        assert_eq!(rows[3].goodput_bps, 12_000);
        assert_eq!(rows[3].mean_owd_ms, None);
        let mut buf = Vec::new();
        write_timeseries_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# fbra-timeseries v1\n"));
        assert!(text.contains("\n0,rtp0,800,400,800,40.000\n"));
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let s = Stat::of(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.std, 2.0);
        assert_eq!(Stat::of(&[5.0]).unwrap().std, 0.0);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn single_run_aggregate_has_zero_sigma() {
        let mut t = SimTrace::new(SimTime::from_secs(1), flows(1, 1), 100_000);
        ev(&mut t, 0, EventKind::SendRtp, 0, Some(0), 100, Extra::Int(0));
        ev(&mut t, 10, EventKind::Recv, 0, Some(0), 100, Extra::Int(10));
        ev(&mut t, 20, EventKind::Recv, 1, Some(0), 1500, Extra::Int(1));
        let agg = aggregate(&[(1, summarize(&t))]);
        assert_eq!(agg.runs, 1);
        assert!(agg.metrics.values().all(|s| s.std == 0.0));
        assert!(agg.metrics.contains_key("rtp0.goodput_bps"));
        assert!(agg.metrics.contains_key("tfs"));
        assert!(!agg.metrics.contains_key("rtp0.frcc"));
    }
}
