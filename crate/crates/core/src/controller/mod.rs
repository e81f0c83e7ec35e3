// SPDX-License-Identifier: Apache-2.0

//! FEC-based rate adaptation.
//!
//! The controller is a four-state machine (STAY, PROBE, UP, DOWN) driven by
//! receiver reports. In PROBE the sender adds a parity stream on top of the
//! media; if the path absorbs it without loss, discard or delay growth, the
//! media rate is raised by the parity rate in UP. Congestion triggers an
//! undershoot below the measured goodput, optionally followed by a short
//! pause in rate control and a bounce-back to 90% of that goodput.
//!
//! [`transition`] is the pure decision table, [`step`] applies its rate and
//! FEC arithmetic, and [`FbraController`] wraps both with the per-flow state:
//! OWD history, rate history, RTT samples, disable windows and feedback
//! timeouts.

mod procedures;
mod rates;
mod rules;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::owd::OwdCorrelation;
use crate::types::{BitRate, SimTime};

pub use procedures::{
    bounce_back, on_feedback_timeout, on_report_timing, select_fec_interval, undershoot,
    ReportTiming, FEEDBACK_TIMEOUT,
};
pub use rates::{RateHistory, RateSample};
pub use rules::{classify_cues, probe_blocked, step, transition, StepInput, Transition};
pub use session::{FbraController, ReportMeasurement, ReportOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ControllerState {
    Stay,
    Probe,
    Up,
    Down,
}

impl ControllerState {
    pub const ALL: [ControllerState; 4] = [
        ControllerState::Stay,
        ControllerState::Probe,
        ControllerState::Up,
        ControllerState::Down,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerState::Stay => "STAY",
            ControllerState::Probe => "PROBE",
            ControllerState::Up => "UP",
            ControllerState::Down => "DOWN",
        }
    }
}

impl fmt::Display for ControllerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "STAY" => Ok(ControllerState::Stay),
            "PROBE" => Ok(ControllerState::Probe),
            "UP" => Ok(ControllerState::Up),
            "DOWN" => Ok(ControllerState::Down),
            other => Err(format!("unknown controller state {other:?}")),
        }
    }
}

/// OWD correlation thresholds. All lie in [1, 2]. `*_high` values compare
/// against the high-watermark ratio, `probe_low` against the low one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Above this STAY does not probe and PROBE falls back to STAY.
    pub hold_high: f64,
    /// DOWN threshold while probing.
    pub probe_cut_high: f64,
    /// DOWN threshold right after a rate increase.
    pub up_cut_high: f64,
    /// DOWN keeps undershooting above this.
    pub down_keep_high: f64,
    /// PROBE continues with a longer FEC interval above this.
    pub probe_low: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            hold_high: 1.1,
            probe_cut_high: 1.6,
            up_cut_high: 1.4,
            down_keep_high: 2.0,
            probe_low: 1.2,
        }
    }
}

impl Thresholds {
    pub fn is_valid(&self) -> bool {
        [
            self.hold_high,
            self.probe_cut_high,
            self.up_cut_high,
            self.down_keep_high,
            self.probe_low,
        ]
        .iter()
        .all(|v| (1.0..=2.0).contains(v))
    }
}

/// Congestion signals extracted from one report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CongestionCues {
    pub losses: bool,
    pub recent_losses: bool,
    pub discards: bool,
    pub recent_discards: bool,
    pub corr: OwdCorrelation,
}

impl CongestionCues {
    pub fn clean(corr: OwdCorrelation) -> Self {
        Self {
            losses: false,
            recent_losses: false,
            discards: false,
            recent_discards: false,
            corr,
        }
    }
}

/// What the state function asked for besides the state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Action {
    /// Keep rate; FEC off.
    Hold,
    /// Switch the parity stream on (STAY to PROBE).
    EnableFec,
    /// Keep probing with less redundancy.
    IncrementFecInterval,
    /// Replace the parity rate with media rate.
    RaiseRate,
    /// Cut the rate below goodput, optionally pausing rate control.
    Undershoot { disable: bool },
    /// Restore 90% of the goodput stored at the last undershoot.
    BounceBack,
    /// No feedback for too long: halve the rate.
    FeedbackTimeout,
}

/// Output of one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerDecision {
    pub new_state: ControllerState,
    pub target_media_rate: BitRate,
    pub fec_enabled: bool,
    pub fec_interval: u8,
    pub rate_control_disabled_until: Option<SimTime>,
    pub action: Action,
}

/// Static controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerConfig {
    pub thresholds: Thresholds,
    pub start_rate: BitRate,
    pub min_rate: BitRate,
    pub fec_interval_min: u8,
    pub fec_interval_max: u8,
    /// Disable window length as a multiple (num/den) of the report interval.
    pub disable_factor: (u64, u64),
    pub owd_history_len: usize,
    pub rtt_window: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            start_rate: BitRate::from_kbps(128),
            min_rate: BitRate::FLOOR,
            fec_interval_min: 2,
            fec_interval_max: 14,
            disable_factor: (5, 4),
            owd_history_len: crate::owd::DEFAULT_CAPACITY,
            rtt_window: 10,
        }
    }
}
