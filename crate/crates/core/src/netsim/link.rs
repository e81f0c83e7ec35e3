// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::{BitRate, SimTime};

/// Piecewise-constant capacity that repeats after its last segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacitySchedule {
    segments: Vec<(SimTime, BitRate)>,
    period: SimTime,
}

impl CapacitySchedule {
    /// `segments` are (length, capacity) pairs.
    pub fn new(segments: Vec<(SimTime, BitRate)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("capacity schedule is empty".into()));
        }
        if let Some((len, rate)) = segments
            .iter()
            .find(|(len, rate)| *len == SimTime::ZERO || *rate == BitRate::ZERO)
        {
            return Err(Error::Config(format!(
                "capacity schedule segment {len} at {rate} must be non-zero"
            )));
        }
        let period = SimTime(segments.iter().map(|(len, _)| len.0).sum());
        Ok(Self { segments, period })
    }

    /// 256, 160, 100, 192 kbps in 40 s steps.
    pub fn default_variable() -> Self {
        let seg = SimTime::from_secs(40);
        Self::new(
            [256, 160, 100, 192]
                .into_iter()
                .map(|k| (seg, BitRate::from_kbps(k)))
                .collect(),
        )
        .expect("static schedule is valid")
    }

    /// Parses lines of `<segment seconds> <kbps>`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("schedule line {}: expected '<seconds> <kbps>'", i + 1));
            let mut it = line.split_whitespace();
            let secs: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let kbps: u64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() || secs.is_nan() || secs <= 0.0 {
                return Err(bad());
            }
            segments.push((
                SimTime((secs * 1e6).round() as u64),
                BitRate::from_kbps(kbps),
            ));
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[(SimTime, BitRate)] {
        &self.segments
    }

    pub fn at(&self, t: SimTime) -> BitRate {
        let mut off = t.0 % self.period.0;
        for (len, rate) in &self.segments {
            if off < len.0 {
                return *rate;
            }
            off -= len.0;
        }
        unreachable!("offset is below the period")
    }

    pub fn min(&self) -> BitRate {
        self.segments.iter().map(|s| s.1).min().expect("non-empty")
    }

    pub fn max(&self) -> BitRate {
        self.segments.iter().map(|s| s.1).max().expect("non-empty")
    }

    /// Capacity averaged over `[0, duration)`, rounded down.
    pub fn mean_over(&self, duration: SimTime) -> BitRate {
        if duration == SimTime::ZERO {
            return self.at(SimTime::ZERO);
        }
        let mut t = 0u64;
        let mut bit_us: u128 = 0;
        'outer: loop {
            for (len, rate) in &self.segments {
                let step = len.0.min(duration.0 - t);
                bit_us += step as u128 * rate.bps() as u128;
                t += step;
                if t >= duration.0 {
                    break 'outer;
                }
            }
        }
        BitRate((bit_us / duration.0 as u128) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Capacity {
    Fixed(BitRate),
    Schedule(CapacitySchedule),
}

impl Capacity {
    pub fn at(&self, t: SimTime) -> BitRate {
        match self {
            Capacity::Fixed(r) => *r,
            Capacity::Schedule(s) => s.at(t),
        }
    }

    pub fn mean_over(&self, duration: SimTime) -> BitRate {
        match self {
            Capacity::Fixed(r) => *r,
            Capacity::Schedule(s) => s.mean_over(duration),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub enqueued: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Result of handing a packet to a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    /// Queue full; the packet is gone.
    Dropped,
    /// Waiting behind other packets.
    Queued,
    /// The link was idle; service ends at the given time.
    Started { service_done: SimTime },
}

/// One direction of a link: a drop-tail FIFO feeding a serializer, followed
/// by a fixed propagation delay.
#[derive(Debug, Clone)]
pub struct Link<P> {
    capacity: Capacity,
    propagation: SimTime,
    queue_limit: usize,
    queue: VecDeque<(P, usize)>,
    in_service: Option<P>,
    stats: LinkStats,
}

impl<P> Link<P> {
    pub fn new(capacity: Capacity, propagation: SimTime, queue_limit: usize) -> Self {
        Self {
            capacity,
            propagation,
            queue_limit,
            queue: VecDeque::new(),
            in_service: None,
            stats: LinkStats::default(),
        }
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn propagation(&self) -> SimTime {
        self.propagation
    }

    pub fn capacity(&self) -> &Capacity {
        &self.capacity
    }

    /// Packets waiting, excluding the one being serialized.
    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn busy(&self) -> bool {
        self.in_service.is_some()
    }

    fn start(&mut self, now: SimTime, pkt: P, size: usize) -> SimTime {
        self.in_service = Some(pkt);
        now + self.capacity.at(now).serialization_time(size)
    }

    /// Accepts a packet of `size` bytes at `now`.
    pub fn offer(&mut self, now: SimTime, pkt: P, size: usize) -> Offer {
        if self.in_service.is_none() {
            self.stats.enqueued += 1;
            return Offer::Started {
                service_done: self.start(now, pkt, size),
            };
        }
        if self.queue.len() >= self.queue_limit {
            self.stats.dropped += 1;
            return Offer::Dropped;
        }
        self.stats.enqueued += 1;
        self.queue.push_back((pkt, size));
        Offer::Queued
    }

    /// Ends the current service at `now`. Returns the packet, the time it
    /// reaches the far end, and when the next service (if any) ends.
    pub fn finish(&mut self, now: SimTime) -> (P, SimTime, Option<SimTime>) {
        let pkt = self.in_service.take().expect("finish on an idle link");
        self.stats.delivered += 1;
        let next = self
            .queue
            .pop_front()
            .map(|(p, size)| self.start(now, p, size));
        (pkt, now + self.propagation, next)
    }
}
