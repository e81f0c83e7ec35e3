// SPDX-License-Identifier: Apache-2.0

//! Simulation event trace and its CSV form.
//!
//! A trace starts with `#`-prefixed metadata lines followed by a column
//! header and one line per event:
//!
//! ```text
//! # fbra-trace v1
//! # duration_us=300000000
//! # flows=rtp0:rtp,tcp0:tcp
//! # mean_capacity_bps=177000
//! time_us,event_kind,flow_id,seq,size_bytes,extra
//! 33333,SEND_RTP,rtp0,0,545,0
//! ```
//!
//! `seq` is the unwrapped (64-bit) sequence number, empty where it does not
//! apply. The meaning of `extra` depends on the event kind:
//!
//! | kind        | extra                                     |
//! |-------------|-------------------------------------------|
//! | SEND_RTP    | frame id                                  |
//! | SEND_FEC    | block length (`seq` is the block base)    |
//! | RECV        | end-to-end delay, µs                      |
//! | DISCARD     | end-to-end delay, µs                      |
//! | RTCP_*      | `early` or `regular`                      |
//! | STATE       | state name (`TRANSFER`/`IDLE` for TCP)    |
//! | RATE        | target media rate, bps                    |

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::SimTime;

pub const TRACE_SCHEMA: &str = "fbra-trace v1";
pub const COLUMNS: &str = "time_us,event_kind,flow_id,seq,size_bytes,extra";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    SendRtp,
    SendFec,
    Recv,
    Loss,
    Discard,
    Recovered,
    RtcpSent,
    RtcpRecv,
    State,
    Rate,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::SendRtp,
        EventKind::SendFec,
        EventKind::Recv,
        EventKind::Loss,
        EventKind::Discard,
        EventKind::Recovered,
        EventKind::RtcpSent,
        EventKind::RtcpRecv,
        EventKind::State,
        EventKind::Rate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SendRtp => "SEND_RTP",
            EventKind::SendFec => "SEND_FEC",
            EventKind::Recv => "RECV",
            EventKind::Loss => "LOSS",
            EventKind::Discard => "DISCARD",
            EventKind::Recovered => "RECOVERED",
            EventKind::RtcpSent => "RTCP_SENT",
            EventKind::RtcpRecv => "RTCP_RECV",
            EventKind::State => "STATE",
            EventKind::Rate => "RATE",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Extra {
    None,
    Int(i64),
    Label(String),
}

impl Extra {
    pub fn label(s: &str) -> Self {
        Extra::Label(s.to_owned())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Extra::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Extra::Label(s) => Some(s),
            _ => None,
        }
    }

    fn parse(s: &str) -> Self {
        if s.is_empty() {
            Extra::None
        } else if let Ok(v) = s.parse() {
            Extra::Int(v)
        } else {
            Extra::Label(s.to_owned())
        }
    }
}

impl fmt::Display for Extra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extra::None => Ok(()),
            Extra::Int(v) => write!(f, "{v}"),
            Extra::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Rtp,
    Tcp,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Rtp => "rtp",
            FlowKind::Tcp => "tcp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowInfo {
    pub id: String,
    pub kind: FlowKind,
}

/// Index into [`SimTrace::flows`].
pub type FlowIdx = u16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: SimTime,
    pub kind: EventKind,
    pub flow: FlowIdx,
    pub seq: Option<u64>,
    pub size: u32,
    pub extra: Extra,
}

/// Anything that accepts trace events.
pub trait TraceSink {
    fn record(&mut self, ev: TraceEvent);
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, ev: TraceEvent) {
        self.push(ev);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub duration: SimTime,
    pub flows: Vec<FlowInfo>,
    /// Time-averaged bottleneck capacity over the run.
    pub mean_capacity_bps: u64,
    pub events: Vec<TraceEvent>,
}

impl TraceSink for SimTrace {
    fn record(&mut self, ev: TraceEvent) {
        self.events.push(ev);
    }
}

impl SimTrace {
    pub fn new(duration: SimTime, flows: Vec<FlowInfo>, mean_capacity_bps: u64) -> Self {
        Self {
            duration,
            flows,
            mean_capacity_bps,
            events: Vec::new(),
        }
    }

    pub fn flow_index(&self, id: &str) -> Result<FlowIdx> {
        self.flows
            .iter()
            .position(|f| f.id == id)
            .map(|i| i as FlowIdx)
            .ok_or_else(|| Error::UnknownFlow(id.to_owned()))
    }

    pub fn flows_of(&self, kind: FlowKind) -> impl Iterator<Item = (FlowIdx, &FlowInfo)> {
        self.flows
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.kind == kind)
            .map(|(i, f)| (i as FlowIdx, f))
    }

    pub fn events_of(&self, flow: FlowIdx) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.flow == flow)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {TRACE_SCHEMA}")?;
        writeln!(w, "# duration_us={}", self.duration.as_micros())?;
        let flows: Vec<String> = self
            .flows
            .iter()
            .map(|f| format!("{}:{}", f.id, f.kind.as_str()))
            .collect();
        writeln!(w, "# flows={}", flows.join(","))?;
        writeln!(w, "# mean_capacity_bps={}", self.mean_capacity_bps)?;
        writeln!(w, "{COLUMNS}")?;
        for e in &self.events {
            let seq = e.seq.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.time.as_micros(),
                e.kind,
                self.flows[e.flow as usize].id,
                seq,
                e.size,
                e.extra
            )?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut trace = SimTrace::default();
        let mut saw_schema = false;
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if meta == TRACE_SCHEMA {
                    saw_schema = true;
                } else if let Some((k, v)) = meta.split_once('=') {
                    trace.apply_meta(k, v).map_err(|m| parse_err(lineno, m))?;
                }
                continue;
            }
            if line == COLUMNS || line.is_empty() {
                continue;
            }
            let ev = trace.parse_event(&line).map_err(|m| parse_err(lineno, m))?;
            trace.events.push(ev);
        }
        if !saw_schema {
            return Err(parse_err(1, format!("missing '# {TRACE_SCHEMA}' header")));
        }
        Ok(trace)
    }

    fn apply_meta(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = |v: &str| v.parse::<u64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "duration_us" => self.duration = SimTime(num(value)?),
            "mean_capacity_bps" => self.mean_capacity_bps = num(value)?,
            "flows" => {
                self.flows.clear();
                for item in value.split(',').filter(|s| !s.is_empty()) {
                    let (id, kind) = item
                        .split_once(':')
                        .ok_or_else(|| format!("bad flow entry {item:?}"))?;
                    let kind = match kind {
                        "rtp" => FlowKind::Rtp,
                        "tcp" => FlowKind::Tcp,
                        other => return Err(format!("unknown flow kind {other:?}")),
                    };
                    self.flows.push(FlowInfo {
                        id: id.to_owned(),
                        kind,
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn parse_event(&self, line: &str) -> Result<TraceEvent, String> {
        let cols: Vec<&str> = line.splitn(6, ',').collect();
        let [time, kind, flow, seq, size, extra] = cols[..] else {
            return Err(format!("expected 6 columns, got {}", cols.len()));
        };
        let flow = self
            .flows
            .iter()
            .position(|f| f.id == flow)
            .ok_or_else(|| format!("unknown flow {flow:?}"))?;
        Ok(TraceEvent {
            time: SimTime(time.parse().map_err(|e| format!("time: {e}"))?),
            kind: kind.parse()?,
            flow: flow as FlowIdx,
            seq: if seq.is_empty() {
                None
            } else {
                Some(seq.parse().map_err(|e| format!("seq: {e}"))?)
            },
            size: size.parse().map_err(|e| format!("size: {e}"))?,
            extra: Extra::parse(extra),
        })
    }
}

fn parse_err(line: usize, msg: String) -> Error {
    Error::TraceParse { line, msg }
}
