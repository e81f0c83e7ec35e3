// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::controller::ControllerConfig;
use crate::endpoint::{ReceiverConfig, SenderConfig};
use crate::error::{Error, Result};
use crate::types::{BitRate, SimTime};

use super::link::{Capacity, CapacitySchedule};
use super::tcp::TcpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    /// One media flow over a bottleneck whose capacity follows a schedule.
    SingleVarLink,
    /// One media flow against on-off TCP flows on a fixed bottleneck.
    RtpVsTcp,
    /// Two media flows against on-off TCP flows.
    MultiRtpVsTcp,
}

impl Topology {
    pub const ALL: [Topology; 3] = [
        Topology::SingleVarLink,
        Topology::RtpVsTcp,
        Topology::MultiRtpVsTcp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::SingleVarLink => "single_var_link",
            Topology::RtpVsTcp => "rtp_vs_tcp",
            Topology::MultiRtpVsTcp => "multi_rtp_vs_tcp",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Topology::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown topology {s:?}")))
    }
}

/// Everything a simulation run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub bottleneck_delay: SimTime,
    pub capacity: Capacity,
    pub rtp_flows: usize,
    pub tcp_flows: usize,
    pub duration: SimTime,
    pub seed: u64,
    pub access_capacity: BitRate,
    pub access_delay: SimTime,
    pub queue_limit: usize,
    /// Start offset between consecutive media flows.
    pub rtp_stagger: SimTime,
    /// Each media flow also starts after a seeded delay drawn from
    /// `[0, rtp_start_spread)`.
    pub rtp_start_spread: SimTime,
    pub sender: SenderConfig,
    pub receiver: ReceiverConfig,
    pub controller: ControllerConfig,
    pub tcp: TcpConfig,
}

/// Bounds of the variable link.
pub const VAR_LINK_MIN: BitRate = BitRate::from_kbps(100);
pub const VAR_LINK_MAX: BitRate = BitRate::from_kbps(256);

impl Scenario {
    pub fn preset(topology: Topology, bottleneck_delay_ms: u64) -> Self {
        let (capacity, rtp, tcp) = match topology {
            Topology::SingleVarLink => (
                Capacity::Schedule(CapacitySchedule::default_variable()),
                1,
                0,
            ),
            Topology::RtpVsTcp => (Capacity::Fixed(BitRate::from_kbps(5_000)), 1, 10),
            Topology::MultiRtpVsTcp => (Capacity::Fixed(BitRate::from_kbps(5_000)), 2, 10),
        };
        Self {
            topology,
            bottleneck_delay: SimTime::from_millis(bottleneck_delay_ms),
            capacity,
            rtp_flows: rtp,
            tcp_flows: tcp,
            duration: SimTime::from_secs(300),
            seed: 1,
            access_capacity: BitRate::from_kbps(100_000),
            access_delay: SimTime::from_millis(1),
            queue_limit: 50,
            rtp_stagger: SimTime::from_millis(7),
            rtp_start_spread: SimTime::from_secs(1),
            sender: SenderConfig::default(),
            receiver: ReceiverConfig::default(),
            controller: ControllerConfig::default(),
            tcp: TcpConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration: SimTime) -> Self {
        self.duration = duration;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let (lo, hi) = (
            self.controller.fec_interval_min,
            self.controller.fec_interval_max,
        );
        if !(2 <= lo && lo <= hi && hi <= 14) {
            return fail(format!(
                "FEC interval bounds {lo}..{hi} must satisfy 2 <= min <= max <= 14"
            ));
        }
        if self.rtp_flows + self.tcp_flows == 0 {
            return fail("scenario has no flows".into());
        }
        if self.rtp_flows + self.tcp_flows > 1000 {
            return fail("too many flows".into());
        }
        if self.queue_limit == 0 {
            return fail("queue limit must be positive".into());
        }
        if self.access_capacity == BitRate::ZERO {
            return fail("access capacity must be positive".into());
        }
        if self.sender.fps == 0 || self.sender.start_rate < self.sender.min_rate {
            return fail("sender needs fps > 0 and start rate >= min rate".into());
        }
        if !self.controller.thresholds.is_valid() {
            return fail("controller thresholds must lie in [1, 2]".into());
        }
        match &self.capacity {
            Capacity::Fixed(r) if *r == BitRate::ZERO => {
                return fail("bottleneck capacity must be positive".into())
            }
            Capacity::Schedule(s) if self.topology == Topology::SingleVarLink => {
                if s.min() < VAR_LINK_MIN || s.max() > VAR_LINK_MAX {
                    return fail(format!(
                        "variable link schedule must stay within [{VAR_LINK_MIN}, {VAR_LINK_MAX}]"
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Parses a `key = value` scenario file. Relative schedule paths are
    /// resolved against `base_dir`.
    pub fn parse_config(text: &str, base_dir: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            pairs.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let topology: Topology = get("topology")
            .ok_or_else(|| Error::Config("missing required key `topology`".into()))?
            .parse()?;

        const KNOWN: [&str; 11] = [
            "topology",
            "bottleneck_delay_ms",
            "bottleneck_capacity_kbps",
            "bottleneck_schedule",
            "rtp_flows",
            "tcp_flows",
            "duration_s",
            "seed",
            "fec_interval_min",
            "fec_interval_max",
            "queue_limit",
        ];
        if let Some((k, _)) = pairs.iter().find(|(k, _)| !KNOWN.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }

        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}` has invalid value {v:?}")))
        }

        let delay = match get("bottleneck_delay_ms") {
            Some(v) => num("bottleneck_delay_ms", v)?,
            None => 50,
        };
        let mut s = Scenario::preset(topology, delay);
        match (get("bottleneck_capacity_kbps"), get("bottleneck_schedule")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set either `bottleneck_capacity_kbps` or `bottleneck_schedule`, not both".into(),
                ))
            }
            (Some(v), None) => {
                s.capacity = Capacity::Fixed(BitRate::from_kbps(num("bottleneck_capacity_kbps", v)?))
            }
            (None, Some(path)) => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read schedule {}: {e}", path.display()))
                })?;
                s.capacity = Capacity::Schedule(CapacitySchedule::parse(&text)?);
            }
            (None, None) => {}
        }
        if let Some(v) = get("rtp_flows") {
            s.rtp_flows = num("rtp_flows", v)?;
        }
        if let Some(v) = get("tcp_flows") {
            s.tcp_flows = num("tcp_flows", v)?;
        }
        if let Some(v) = get("duration_s") {
            let secs: f64 = num("duration_s", v)?;
            if !(secs >= 0.0 && secs.is_finite()) {
                return Err(Error::Config("`duration_s` must be non-negative".into()));
            }
            s.duration = SimTime((secs * 1e6).round() as u64);
        }
        if let Some(v) = get("seed") {
            s.seed = num("seed", v)?;
        }
        if let Some(v) = get("fec_interval_min") {
            s.controller.fec_interval_min = num("fec_interval_min", v)?;
        }
        if let Some(v) = get("fec_interval_max") {
            s.controller.fec_interval_max = num("fec_interval_max", v)?;
        }
        if let Some(v) = get("queue_limit") {
            s.queue_limit = num("queue_limit", v)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_config(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
