// SPDX-License-Identifier: Apache-2.0

use super::procedures::{select_fec_interval, undershoot};
use super::{
    Action, CongestionCues, ControllerConfig, ControllerDecision, ControllerState, RateHistory,
    Thresholds,
};
use crate::owd::OwdHistory;
use crate::types::{BitRate, FeedbackReport, SimTime};

use ControllerState::*;

/// Splits a report's events into earlier and more recent halves of the
/// interval and correlates its OWD sample against `history`. Events strictly
/// after the midpoint are recent.
pub fn classify_cues(
    report: &FeedbackReport,
    interval_start: SimTime,
    interval_end: SimTime,
    history: &OwdHistory,
) -> CongestionCues {
    let mid = interval_start + interval_end.saturating_sub(interval_start).mul_ratio(1, 2);
    let recent = |events: &[crate::types::SeqEvent]| events.iter().any(|e| e.at > mid);
    CongestionCues {
        losses: !report.loss_events.is_empty(),
        recent_losses: recent(&report.loss_events),
        discards: !report.discard_events.is_empty(),
        recent_discards: recent(&report.discard_events),
        corr: history.correlate_or_neutral(report.owd_sample),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub next: ControllerState,
    pub action: Action,
}

const fn to(next: ControllerState, action: Action) -> Transition {
    Transition { next, action }
}

const UNDERSHOOT_DISABLE: Action = Action::Undershoot { disable: true };
const UNDERSHOOT_ONLY: Action = Action::Undershoot { disable: false };

/// The state functions. `probe_blocked` holds STAY for one more interval when
/// the rate is already close to the recent maximum (see [`probe_blocked`]).
pub fn transition(
    state: ControllerState,
    prev_state: ControllerState,
    cues: &CongestionCues,
    th: &Thresholds,
    probe_blocked: bool,
) -> Transition {
    let corr_high = cues.corr.corr_high;
    let corr_low = cues.corr.corr_low;
    match state {
        Down => {
            if cues.recent_losses || cues.discards {
                if prev_state == Down {
                    to(Stay, Action::Hold)
                } else if cues.discards && !cues.losses {
                    to(Down, UNDERSHOOT_ONLY)
                } else {
                    to(Down, UNDERSHOOT_DISABLE)
                }
            } else if corr_high > th.down_keep_high {
                to(Down, UNDERSHOOT_DISABLE)
            } else {
                to(Stay, Action::Hold)
            }
        }
        Stay => {
            if cues.losses {
                if cues.recent_losses {
                    to(Down, UNDERSHOOT_DISABLE)
                } else {
                    to(Stay, Action::Hold)
                }
            } else if cues.recent_discards {
                to(Down, UNDERSHOOT_DISABLE)
            } else if corr_high > th.hold_high {
                if prev_state == Stay {
                    to(Down, UNDERSHOOT_DISABLE)
                } else {
                    to(Stay, Action::Hold)
                }
            } else if probe_blocked {
                to(Stay, Action::Hold)
            } else {
                to(Probe, Action::EnableFec)
            }
        }
        Probe => {
            if cues.recent_losses || cues.recent_discards {
                to(Down, UNDERSHOOT_DISABLE)
            } else if cues.losses || cues.discards {
                to(Stay, Action::Hold)
            } else if corr_high > th.probe_cut_high {
                to(Down, UNDERSHOOT_DISABLE)
            } else if corr_high > th.hold_high {
                to(Stay, Action::Hold)
            } else if corr_low > th.probe_low {
                to(Probe, Action::IncrementFecInterval)
            } else {
                to(Up, Action::RaiseRate)
            }
        }
        Up => {
            if cues.recent_losses || cues.discards || corr_high > th.up_cut_high {
                to(Down, UNDERSHOOT_DISABLE)
            } else {
                to(Stay, Action::Hold)
            }
        }
    }
}

/// STAY may not go straight to PROBE when it was just entered and the current
/// rate exceeds 90% of the highest rate seen in the window.
pub fn probe_blocked(
    prev_state: ControllerState,
    current_rate: BitRate,
    rates: &RateHistory,
) -> bool {
    if prev_state == Stay {
        return false;
    }
    match rates.max_rate() {
        Some(max) => current_rate.bps() as u128 * 10 > max.bps() as u128 * 9,
        None => false,
    }
}

/// Everything one step needs besides configuration.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub state: ControllerState,
    pub prev_state: ControllerState,
    pub cues: CongestionCues,
    pub rates: &'a RateHistory,
    /// Target media rate currently configured at the encoder.
    pub current_rate: BitRate,
    /// Parity rate measured over the probing period.
    pub current_fec_rate: BitRate,
    /// Media rate and goodput measured over the last interval.
    pub sending_rate: BitRate,
    pub goodput: BitRate,
    pub fec_interval: u8,
    pub now: SimTime,
    /// Length of the rate-control pause after an undershoot.
    pub disable_window: SimTime,
}

/// Runs the state function and applies its rate and FEC consequences.
pub fn step(input: &StepInput<'_>, cfg: &ControllerConfig) -> ControllerDecision {
    let blocked = probe_blocked(input.prev_state, input.current_rate, input.rates);
    let t = transition(
        input.state,
        input.prev_state,
        &input.cues,
        &cfg.thresholds,
        blocked,
    );

    let mut rate = input.current_rate;
    let mut fec_interval = input
        .fec_interval
        .clamp(cfg.fec_interval_min, cfg.fec_interval_max);
    let mut disabled_until = None;
    match t.action {
        Action::Hold | Action::BounceBack | Action::FeedbackTimeout => {}
        Action::EnableFec => {
            fec_interval = select_fec_interval(
                input.rates,
                input.current_rate,
                cfg.fec_interval_min,
                cfg.fec_interval_max,
            );
        }
        Action::IncrementFecInterval => {
            fec_interval = (fec_interval + 1).min(cfg.fec_interval_max);
        }
        Action::RaiseRate => {
            rate = input.current_rate + input.current_fec_rate;
        }
        Action::Undershoot { disable } => {
            rate = undershoot(input.sending_rate, input.goodput).min(input.current_rate);
            if disable {
                disabled_until = Some(input.now + input.disable_window);
            }
        }
    }

    ControllerDecision {
        new_state: t.next,
        target_media_rate: rate.max(cfg.min_rate),
        fec_enabled: t.next == Probe,
        fec_interval,
        rate_control_disabled_until: disabled_until,
        action: t.action,
    }
}
