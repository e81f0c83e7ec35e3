// SPDX-License-Identifier: Apache-2.0

use log::{debug, info};
use rand::Rng;

use crate::endpoint::{DispositionCounts, Outbox, Outgoing, Receiver, Sender};
use crate::error::Result;
use crate::trace::{EventKind, Extra, FlowIdx, FlowInfo, FlowKind, SimTrace, TraceEvent, TraceSink};
use crate::types::{FecPacket, FeedbackReport, MediaPacket, SimTime};
use crate::wire::report_wire_size;

use super::event::EventQueue;
use super::link::{Capacity, Link, LinkStats, Offer};
use super::scenario::Scenario;
use super::tcp::{stream_rng, Segment, TcpSender, TcpSink, TcpStats};

#[derive(Debug, Clone)]
enum Body {
    Media(MediaPacket),
    Fec(FecPacket),
    Report(FeedbackReport),
    Data(Segment),
    Ack { transfer: u32, ack: u32 },
}

#[derive(Debug, Clone)]
struct Packet {
    flow: usize,
    route: usize,
    hop: usize,
    size: usize,
    body: Body,
}

#[derive(Debug)]
enum Event {
    Hop(Packet),
    ServiceDone(usize),
    Frame(usize),
    Wake(usize),
    TcpStart(usize),
    TcpRto(usize, u64),
}

const BOTTLENECK_FWD: usize = 0;
const BOTTLENECK_REV: usize = 1;

/// Per-link counters at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkReport {
    pub stats: LinkStats,
    /// Packets still queued or in service.
    pub backlog: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RtpFlowReport {
    pub media_sent: u64,
    pub dispositions: DispositionCounts,
}

/// Trace plus internal counters useful for invariant checks.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    /// Index 0 and 1 are the forward and reverse bottleneck.
    pub links: Vec<LinkReport>,
    pub rtp: Vec<RtpFlowReport>,
    pub tcp: Vec<TcpStats>,
}

struct Sim {
    duration: SimTime,
    queue: EventQueue<Event>,
    links: Vec<Link<Packet>>,
    /// Forward route of flow f is `2f`, its reverse route `2f + 1`.
    routes: Vec<[usize; 3]>,
    rtp_offsets: Vec<SimTime>,
    senders: Vec<Sender>,
    receivers: Vec<Receiver>,
    tcp: Vec<TcpSender>,
    sinks: Vec<TcpSink>,
    trace: SimTrace,
}

impl Sim {
    fn new(s: &Scenario) -> Self {
        let n_flows = s.rtp_flows + s.tcp_flows;
        let mut links = vec![
            Link::new(s.capacity.clone(), s.bottleneck_delay, s.queue_limit),
            Link::new(s.capacity.clone(), s.bottleneck_delay, s.queue_limit),
        ];
        let mut routes = Vec::with_capacity(2 * n_flows);
        for _ in 0..n_flows {
            let base = links.len();
            for _ in 0..4 {
                links.push(Link::new(
                    Capacity::Fixed(s.access_capacity),
                    s.access_delay,
                    s.queue_limit,
                ));
            }
            routes.push([base, BOTTLENECK_FWD, base + 1]);
            routes.push([base + 2, BOTTLENECK_REV, base + 3]);
        }

        let mut flows = Vec::with_capacity(n_flows);
        let mut senders = Vec::new();
        let mut receivers = Vec::new();
        for i in 0..s.rtp_flows {
            let ssrc = 0x1000 + i as u32;
            flows.push(FlowInfo {
                id: format!("rtp{i}"),
                kind: FlowKind::Rtp,
            });
            senders.push(Sender::new(
                s.sender.clone(),
                s.controller.clone(),
                i as FlowIdx,
                ssrc,
            ));
            receivers.push(Receiver::new(s.receiver.clone(), i as FlowIdx, ssrc));
        }
        let mut tcp = Vec::new();
        for j in 0..s.tcp_flows {
            flows.push(FlowInfo {
                id: format!("tcp{j}"),
                kind: FlowKind::Tcp,
            });
            tcp.push(TcpSender::new(s.tcp.clone(), s.seed, j as u64));
        }

        let mean_cap = s.capacity.mean_over(s.duration).bps();
        Self {
            duration: s.duration,
            queue: EventQueue::new(),
            links,
            routes,
            rtp_offsets: (0..s.rtp_flows)
                .map(|i| {
                    let spread = if s.rtp_start_spread.0 == 0 {
                        0
                    } else {
                        stream_rng(s.seed, i as u64, *b"rtp0").random_range(0..s.rtp_start_spread.0)
                    };
                    SimTime(s.rtp_stagger.0 * i as u64 + spread)
                })
                .collect(),
            senders,
            receivers,
            sinks: vec![TcpSink::default(); s.tcp_flows],
            tcp,
            trace: SimTrace::new(s.duration, flows, mean_cap),
        }
    }

    fn tcp_flow(&self, j: usize) -> usize {
        self.senders.len() + j
    }

    fn send(&mut self, now: SimTime, flow: usize, forward: bool, size: usize, body: Body) {
        let pkt = Packet {
            flow,
            route: 2 * flow + usize::from(!forward),
            hop: 0,
            size,
            body,
        };
        self.advance(now, pkt);
    }

    fn advance(&mut self, now: SimTime, mut pkt: Packet) {
        let route = self.routes[pkt.route];
        if pkt.hop == route.len() {
            self.deliver(now, pkt);
            return;
        }
        let link = route[pkt.hop];
        pkt.hop += 1;
        let size = pkt.size;
        if let Offer::Started { service_done } = self.links[link].offer(now, pkt, size) {
            self.queue.push(service_done, Event::ServiceDone(link));
        }
    }

    fn flush_outbox(&mut self, now: SimTime, rtp: usize, out: Outbox) {
        for at in out.wakeups {
            self.queue.push(at.max(now), Event::Wake(rtp));
        }
        for rep in out.reports {
            let size = report_wire_size(&rep);
            self.send(now, rtp, false, size, Body::Report(rep));
        }
    }

    fn deliver(&mut self, now: SimTime, pkt: Packet) {
        let flow = pkt.flow;
        match pkt.body {
            Body::Media(m) => {
                let mut out = Outbox::default();
                self.receivers[flow].on_media(now, m, &mut self.trace, &mut out);
                self.flush_outbox(now, flow, out);
            }
            Body::Fec(f) => self.receivers[flow].on_fec(now, f, &mut self.trace),
            Body::Report(r) => self.senders[flow].on_report(now, &r, &mut self.trace),
            Body::Data(seg) => {
                let j = flow - self.senders.len();
                let Some((ack, fresh)) = self.sinks[j].on_segment(&seg) else {
                    return;
                };
                if fresh {
                    let size = self.tcp[j].segment_wire_size(&seg);
                    self.trace.record(TraceEvent {
                        time: now,
                        kind: EventKind::Recv,
                        flow: flow as FlowIdx,
                        seq: Some(seg.index as u64),
                        size,
                        extra: Extra::Int(seg.transfer as i64),
                    });
                }
                let ack_size = self.tcp[j].config().ack_size as usize;
                self.send(
                    now,
                    flow,
                    false,
                    ack_size,
                    Body::Ack {
                        transfer: seg.transfer,
                        ack,
                    },
                );
            }
            Body::Ack { transfer, ack } => {
                let j = flow - self.senders.len();
                let out = self.tcp[j].on_ack(now, transfer, ack);
                self.apply_tcp(now, j, out);
            }
        }
    }

    fn tcp_state(&mut self, now: SimTime, j: usize, label: &str) {
        let flow = self.tcp_flow(j) as FlowIdx;
        self.trace.record(TraceEvent {
            time: now,
            kind: EventKind::State,
            flow,
            seq: None,
            size: 0,
            extra: Extra::label(label),
        });
    }

    fn apply_tcp(&mut self, now: SimTime, j: usize, out: super::tcp::TcpOutput) {
        let flow = self.tcp_flow(j);
        for seg in out.segments {
            let size = self.tcp[j].segment_wire_size(&seg) as usize;
            self.send(now, flow, true, size, Body::Data(seg));
        }
        if let Some((at, generation)) = out.rto {
            self.queue.push(at, Event::TcpRto(j, generation));
        }
        if let Some(at) = out.next_start {
            self.tcp_state(now, j, "IDLE");
            self.queue.push(at, Event::TcpStart(j));
        }
    }

    fn handle(&mut self, now: SimTime, ev: Event) {
        match ev {
            Event::Hop(pkt) => self.advance(now, pkt),
            Event::ServiceDone(link) => {
                let (pkt, arrive, next) = self.links[link].finish(now);
                if let Some(t) = next {
                    self.queue.push(t, Event::ServiceDone(link));
                }
                self.queue.push(arrive, Event::Hop(pkt));
            }
            Event::Frame(i) => {
                let outs = self.senders[i].on_frame(now, &mut self.trace);
                for o in outs {
                    match o {
                        Outgoing::Media(m) => self.send(now, i, true, m.wire_size(), Body::Media(m)),
                        Outgoing::Fec(f) => self.send(now, i, true, f.wire_size(), Body::Fec(f)),
                    }
                }
                let next = self.rtp_offsets[i] + self.senders[i].next_frame_time();
                self.queue.push(next, Event::Frame(i));
            }
            Event::Wake(i) => {
                let mut out = Outbox::default();
                self.receivers[i].on_wakeup(now, &mut self.trace, &mut out);
                self.flush_outbox(now, i, out);
            }
            Event::TcpStart(j) => {
                self.tcp_state(now, j, "TRANSFER");
                let out = self.tcp[j].start_transfer(now);
                self.apply_tcp(now, j, out);
            }
            Event::TcpRto(j, generation) => {
                let out = self.tcp[j].on_rto(now, generation);
                self.apply_tcp(now, j, out);
            }
        }
    }

    fn run(mut self) -> SimOutput {
        for i in 0..self.senders.len() {
            self.queue.push(self.rtp_offsets[i], Event::Frame(i));
        }
        for j in 0..self.tcp.len() {
            let first = self.tcp[j].sample_idle();
            self.queue.push(first, Event::TcpStart(j));
        }
        let mut processed = 0u64;
        while let Some(t) = self.queue.peek_time() {
            if t >= self.duration {
                break;
            }
            let (now, ev) = self.queue.pop().expect("peeked");
            self.handle(now, ev);
            processed += 1;
        }
        debug!("processed {processed} events, {} pending", self.queue.len());

        let links = self
            .links
            .iter()
            .map(|l| LinkReport {
                stats: l.stats(),
                backlog: l.queued() as u64 + u64::from(l.busy()),
            })
            .collect();
        let rtp = self
            .senders
            .iter()
            .zip(&self.receivers)
            .map(|(s, r)| RtpFlowReport {
                media_sent: s.media_packets_sent(),
                dispositions: r.counts(),
            })
            .collect();
        SimOutput {
            trace: self.trace,
            links,
            rtp,
            tcp: self.tcp.iter().map(TcpSender::stats).collect(),
        }
    }
}

/// Runs a scenario and returns the trace with internal counters.
pub fn run_detailed(scenario: &Scenario) -> Result<SimOutput> {
    scenario.validate()?;
    info!(
        "running {} delay={} rtp={} tcp={} duration={} seed={}",
        scenario.topology,
        scenario.bottleneck_delay,
        scenario.rtp_flows,
        scenario.tcp_flows,
        scenario.duration,
        scenario.seed
    );
    Ok(Sim::new(scenario).run())
}

/// Runs a scenario; identical scenarios give identical traces.
pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    run_detailed(scenario).map(|o| o.trace)
}
