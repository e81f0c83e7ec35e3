// SPDX-License-Identifier: Apache-2.0

use super::{Action, ControllerDecision, ControllerState, RateHistory};
use crate::types::{BitRate, SimTime};

/// Silence after which the sender halves its rate.
pub const FEEDBACK_TIMEOUT: SimTime = SimTime::from_secs(2);

/// New rate after congestion: 90% of `sending_rate` minus twice its excess
/// over `goodput`, kept within [floor, sending_rate].
pub fn undershoot(sending_rate: BitRate, goodput: BitRate) -> BitRate {
    let sr = sending_rate.bps() as i128;
    let excess = sending_rate.bps().saturating_sub(goodput.bps()) as i128;
    let reduced = (9 * (sr - 2 * excess)).div_euclid(10);
    let capped = reduced.min(sr).max(0) as u64;
    BitRate(capped).floored()
}

/// Rate restored after a disable window whose following report showed no
/// congestion. `None` means the caller must undershoot again.
pub fn bounce_back(stored_goodput: BitRate, post_window_report_clean: bool) -> Option<BitRate> {
    post_window_report_clean.then(|| stored_goodput.mul_ratio(9, 10).floored())
}

/// FEC interval for entering PROBE: small when the rate is low relative to
/// the recent ceiling (more redundancy, faster ramp), large near it.
pub fn select_fec_interval(rates: &RateHistory, current_rate: BitRate, min: u8, max: u8) -> u8 {
    let ceiling = rates.ceiling();
    let rho = if ceiling.bps() == 0 {
        1.0
    } else {
        (current_rate.bps() as f64 / ceiling.bps() as f64).min(1.0)
    };
    let span = (max - min) as f64;
    let v = (min as f64 + span * rho).round() as i64;
    v.clamp(min as i64, max as i64) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportTiming {
    Regular,
    Early,
}

/// A report arriving less than 1.5 RTT after the previous one is early.
pub fn on_report_timing(arrival_gap: SimTime, rtt_median: SimTime) -> ReportTiming {
    if 2 * arrival_gap.0 < 3 * rtt_median.0 {
        ReportTiming::Early
    } else {
        ReportTiming::Regular
    }
}

/// Halve the rate and enter DOWN once feedback has been missing for
/// [`FEEDBACK_TIMEOUT`]; `None` before that.
pub fn on_feedback_timeout(
    elapsed_since_last_report: SimTime,
    current_rate: BitRate,
    fec_interval: u8,
) -> Option<ControllerDecision> {
    if elapsed_since_last_report < FEEDBACK_TIMEOUT {
        return None;
    }
    Some(ControllerDecision {
        new_state: ControllerState::Down,
        target_media_rate: current_rate.mul_ratio(1, 2).floored(),
        fec_enabled: false,
        fec_interval,
        rate_control_disabled_until: None,
        action: Action::FeedbackTimeout,
    })
}
