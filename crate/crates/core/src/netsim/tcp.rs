// SPDX-License-Identifier: Apache-2.0

//! On-off TCP-like cross traffic.
//!
//! Each flow alternates between downloading a file and idling. Congestion
//! control is slow start plus additive increase; three duplicate ACKs or a
//! retransmission timeout halve `ssthresh`, drop the window to one segment
//! and go back to the first unacknowledged segment. The receiver keeps no
//! out-of-order data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::types::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct TcpConfig {
    pub mss: u32,
    pub header: u32,
    pub ack_size: u32,
    pub initial_ssthresh: f64,
    pub max_window: u32,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    pub dupack_threshold: u32,
    /// Inclusive file size range, bytes.
    pub file_size: (u64, u64),
    pub mean_idle: SimTime,
}

impl Default for TcpConfig {
    fn default() -> Self {
        Self {
            mss: 1460,
            header: 40,
            ack_size: 40,
            initial_ssthresh: 64.0,
            max_window: 64,
            initial_rto: SimTime::from_secs(1),
            min_rto: SimTime::from_millis(200),
            max_rto: SimTime::from_secs(60),
            dupack_threshold: 3,
            file_size: (100_000, 1_500_000),
            mean_idle: SimTime::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcpState {
    Idle,
    Transferring,
}

/// Data segment handed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub transfer: u32,
    pub index: u32,
    /// Payload bytes.
    pub bytes: u32,
}

/// What the sender wants done after a callback.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TcpOutput {
    pub segments: Vec<Segment>,
    /// Arm the retransmission timer: (expiry, generation).
    pub rto: Option<(SimTime, u64)>,
    /// The transfer finished; start the next one at this time.
    pub next_start: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TcpStats {
    pub transfers_started: u32,
    pub transfers_completed: u32,
    pub segments_sent: u64,
    pub retransmit_events: u32,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    cfg: TcpConfig,
    rng: ChaCha8Rng,
    state: TcpState,
    transfer: u32,
    total: u32,
    last_bytes: u32,
    snd_una: u32,
    snd_nxt: u32,
    max_sent: u32,
    cwnd: f64,
    ssthresh: f64,
    dupacks: u32,
    recover: u32,
    srtt: Option<(SimTime, SimTime)>,
    rto: SimTime,
    rto_gen: u64,
    timed: Option<(u32, SimTime)>,
    stats: TcpStats,
}

/// Independent random stream keyed by run seed, flow index and a tag.
pub(crate) fn stream_rng(seed: u64, index: u64, tag: [u8; 4]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..20].copy_from_slice(&tag);
    ChaCha8Rng::from_seed(key)
}

impl TcpSender {
    /// The RNG stream depends only on `(seed, index)`.
    pub fn new(cfg: TcpConfig, seed: u64, index: u64) -> Self {
        Self {
            rng: stream_rng(seed, index, *b"tcp0"),
            state: TcpState::Idle,
            transfer: 0,
            total: 0,
            last_bytes: 0,
            snd_una: 0,
            snd_nxt: 0,
            max_sent: 0,
            cwnd: 1.0,
            ssthresh: cfg.initial_ssthresh,
            dupacks: 0,
            recover: 0,
            srtt: None,
            rto: cfg.initial_rto,
            rto_gen: 0,
            timed: None,
            stats: TcpStats::default(),
            cfg,
        }
    }

    pub fn state(&self) -> TcpState {
        self.state
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn stats(&self) -> TcpStats {
        self.stats
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    pub fn transfer_id(&self) -> u32 {
        self.transfer
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn segment_wire_size(&self, seg: &Segment) -> u32 {
        seg.bytes + self.cfg.header
    }

    /// Exponentially distributed idle period.
    pub fn sample_idle(&mut self) -> SimTime {
        let exp = Exp::new(1.0 / self.cfg.mean_idle.as_secs_f64()).expect("positive mean");
        SimTime::from_micros((exp.sample(&mut self.rng) * 1e6).round() as u64)
    }

    fn sample_file_size(&mut self) -> u64 {
        let (lo, hi) = self.cfg.file_size;
        self.rng.random_range(lo..=hi)
    }

    /// Begins a transfer of a random file size.
    pub fn start_transfer(&mut self, now: SimTime) -> TcpOutput {
        let size = self.sample_file_size();
        self.start_transfer_of(now, size)
    }

    /// Begins a transfer of exactly `size` bytes.
    pub fn start_transfer_of(&mut self, now: SimTime, size: u64) -> TcpOutput {
        let mss = self.cfg.mss as u64;
        self.transfer += 1;
        self.total = size.div_ceil(mss).max(1) as u32;
        self.last_bytes = (size - (self.total as u64 - 1) * mss).max(1) as u32;
        self.snd_una = 0;
        self.snd_nxt = 0;
        self.max_sent = 0;
        self.cwnd = 1.0;
        self.ssthresh = self.cfg.initial_ssthresh;
        self.dupacks = 0;
        self.recover = 0;
        self.timed = None;
        self.state = TcpState::Transferring;
        self.stats.transfers_started += 1;
        let mut out = TcpOutput::default();
        self.fill_window(now, &mut out);
        self.arm(now, &mut out);
        out
    }

    fn window(&self) -> u32 {
        (self.cwnd.floor() as u32).clamp(1, self.cfg.max_window)
    }

    fn fill_window(&mut self, now: SimTime, out: &mut TcpOutput) {
        let limit = self.total.min(self.snd_una + self.window());
        while self.snd_nxt < limit {
            let index = self.snd_nxt;
            if index >= self.max_sent && self.timed.is_none() {
                self.timed = Some((index, now));
            }
            out.segments.push(Segment {
                transfer: self.transfer,
                index,
                bytes: if index + 1 == self.total {
                    self.last_bytes
                } else {
                    self.cfg.mss
                },
            });
            self.snd_nxt += 1;
            self.max_sent = self.max_sent.max(self.snd_nxt);
            self.stats.segments_sent += 1;
        }
    }

    fn arm(&mut self, now: SimTime, out: &mut TcpOutput) {
        self.rto_gen += 1;
        out.rto = Some((now + self.rto, self.rto_gen));
    }

    fn sample_rtt(&mut self, rtt: SimTime) {
        let (srtt, rttvar) = match self.srtt {
            None => (rtt, SimTime(rtt.0 / 2)),
            Some((s, v)) => {
                let err = s.0.abs_diff(rtt.0);
                (SimTime((7 * s.0 + rtt.0) / 8), SimTime((3 * v.0 + err) / 4))
            }
        };
        self.srtt = Some((srtt, rttvar));
        self.rto = SimTime(srtt.0 + 4 * rttvar.0).clamp(self.cfg.min_rto, self.cfg.max_rto);
    }

    fn back_off(&mut self) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = 1.0;
        self.recover = self.max_sent;
        self.snd_nxt = self.snd_una;
        self.dupacks = 0;
        self.timed = None;
        self.stats.retransmit_events += 1;
    }

    /// Cumulative ACK: `ack` is the next segment the receiver expects.
    pub fn on_ack(&mut self, now: SimTime, transfer: u32, ack: u32) -> TcpOutput {
        let mut out = TcpOutput::default();
        if self.state != TcpState::Transferring || transfer != self.transfer {
            return out;
        }
        if ack > self.snd_una {
            let acked = ack - self.snd_una;
            if let Some((seg, sent)) = self.timed {
                if ack > seg {
                    self.sample_rtt(now - sent);
                    self.timed = None;
                }
            }
            self.snd_una = ack;
            self.snd_nxt = self.snd_nxt.max(ack);
            self.dupacks = 0;
            for _ in 0..acked {
                if self.cwnd < self.ssthresh {
                    self.cwnd += 1.0;
                } else {
                    self.cwnd += 1.0 / self.cwnd;
                }
            }
            self.cwnd = self.cwnd.min(self.cfg.max_window as f64);
            if self.snd_una >= self.total {
                self.state = TcpState::Idle;
                self.rto_gen += 1;
                self.stats.transfers_completed += 1;
                out.next_start = Some(now + self.sample_idle());
                return out;
            }
            self.fill_window(now, &mut out);
            self.arm(now, &mut out);
        } else if ack == self.snd_una && self.snd_nxt > self.snd_una {
            self.dupacks += 1;
            if self.dupacks >= self.cfg.dupack_threshold && self.snd_una >= self.recover {
                self.back_off();
                self.fill_window(now, &mut out);
                self.arm(now, &mut out);
            }
        }
        out
    }

    /// Retransmission timer expiry; stale generations are ignored.
    pub fn on_rto(&mut self, now: SimTime, generation: u64) -> TcpOutput {
        let mut out = TcpOutput::default();
        if self.state != TcpState::Transferring || generation != self.rto_gen {
            return out;
        }
        self.back_off();
        self.rto = SimTime(self.rto.0 * 2).min(self.cfg.max_rto);
        self.fill_window(now, &mut out);
        self.arm(now, &mut out);
        out
    }
}

/// Receiving end: accepts only the next expected segment.
#[derive(Debug, Clone, Default)]
pub struct TcpSink {
    transfer: u32,
    expected: u32,
}

impl TcpSink {
    /// Returns the cumulative ACK to send and whether the segment was new
    /// in-order data. Segments of older transfers are ignored.
    pub fn on_segment(&mut self, seg: &Segment) -> Option<(u32, bool)> {
        if seg.transfer < self.transfer {
            return None;
        }
        if seg.transfer > self.transfer {
            self.transfer = seg.transfer;
            self.expected = 0;
        }
        let fresh = seg.index == self.expected;
        if fresh {
            self.expected += 1;
        }
        Some((self.expected, fresh))
    }
}
