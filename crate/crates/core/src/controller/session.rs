// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use log::debug;

use super::procedures::{bounce_back, on_feedback_timeout, on_report_timing, undershoot};
use super::rules::{classify_cues, step, StepInput};
use super::{
    Action, ControllerConfig, ControllerDecision, ControllerState, RateHistory, RateSample,
    ReportTiming,
};
use crate::owd::OwdHistory;
use crate::types::{BitRate, FeedbackReport, SimTime};

/// Sender-side measurements for the interval a report closes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportMeasurement {
    /// Media bits sent in the interval over its duration.
    pub sending_rate: BitRate,
    /// Media bits neither reported lost nor discarded, over the same duration.
    pub goodput: BitRate,
    /// Parity bits sent in the interval over its duration.
    pub fec_rate: BitRate,
    /// Parity rate measured since PROBE was entered.
    pub probe_fec_rate: BitRate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReportOutcome {
    /// Report arrived while rate control was paused.
    Ignored,
    Decision(ControllerDecision),
}

#[derive(Debug, Clone, Copy)]
struct DisableWindow {
    until: SimTime,
    ignored_one: bool,
}

/// Per-flow controller: feeds reports through the state machine and keeps
/// the histories and timers around it.
#[derive(Debug, Clone)]
pub struct FbraController {
    cfg: ControllerConfig,
    state: ControllerState,
    prev_state: ControllerState,
    target_rate: BitRate,
    fec_interval: u8,
    owd: OwdHistory,
    rates: RateHistory,
    rtts: VecDeque<SimTime>,
    last_report_arrival: Option<SimTime>,
    last_report_ts: Option<SimTime>,
    last_regular_gap: Option<SimTime>,
    /// Start of the current feedback-timeout period.
    feedback_mark: SimTime,
    disable: Option<DisableWindow>,
    stored_goodput: Option<BitRate>,
}

impl FbraController {
    pub fn new(cfg: ControllerConfig) -> Self {
        let start = cfg.start_rate.max(cfg.min_rate);
        Self {
            state: ControllerState::Stay,
            prev_state: ControllerState::Stay,
            target_rate: start,
            fec_interval: cfg.fec_interval_max,
            owd: OwdHistory::with_capacity(cfg.owd_history_len),
            rates: RateHistory::new(cfg.start_rate),
            rtts: VecDeque::with_capacity(cfg.rtt_window),
            last_report_arrival: None,
            last_report_ts: None,
            last_regular_gap: None,
            feedback_mark: SimTime::ZERO,
            disable: None,
            stored_goodput: None,
            cfg,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> ControllerState {
        self.state
    }

    pub fn prev_state(&self) -> ControllerState {
        self.prev_state
    }

    pub fn target_rate(&self) -> BitRate {
        self.target_rate
    }

    pub fn fec_enabled(&self) -> bool {
        self.state == ControllerState::Probe
    }

    pub fn fec_interval(&self) -> u8 {
        self.fec_interval
    }

    pub fn owd_history(&self) -> &OwdHistory {
        &self.owd
    }

    pub fn rate_history(&self) -> &RateHistory {
        &self.rates
    }

    pub fn rate_control_disabled(&self) -> bool {
        self.disable.is_some()
    }

    /// Median of the recent RTT samples.
    pub fn rtt_median(&self) -> Option<SimTime> {
        if self.rtts.is_empty() {
            return None;
        }
        let mut v: Vec<SimTime> = self.rtts.iter().copied().collect();
        v.sort_unstable();
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            SimTime((v[n / 2 - 1].0 + v[n / 2].0) / 2)
        })
    }

    /// Best estimate of the regular report spacing.
    pub fn report_interval(&self) -> SimTime {
        self.last_regular_gap
            .or_else(|| self.rtt_median().map(|r| r.mul_ratio(2, 1)))
            .unwrap_or(SimTime::from_millis(500))
    }

    fn record_rtt(&mut self, now: SimTime, report: &FeedbackReport) {
        if report.lsr == SimTime::ZERO && report.dlsr == SimTime::ZERO {
            return;
        }
        let echoed = report.lsr + report.dlsr;
        if now < echoed {
            return;
        }
        if self.rtts.len() == self.cfg.rtt_window {
            self.rtts.pop_front();
        }
        self.rtts.push_back(now - echoed);
    }

    fn apply(&mut self, d: &ControllerDecision) {
        self.prev_state = self.state;
        self.state = d.new_state;
        self.target_rate = d.target_media_rate;
        self.fec_interval = d.fec_interval;
    }

    fn undershoot_decision(
        &mut self,
        now: SimTime,
        meas: &ReportMeasurement,
        disable: bool,
    ) -> ControllerDecision {
        let rate = undershoot(meas.sending_rate, meas.goodput)
            .min(self.target_rate)
            .max(self.cfg.min_rate);
        let until = disable.then(|| now + self.disable_window());
        ControllerDecision {
            new_state: ControllerState::Down,
            target_media_rate: rate,
            fec_enabled: false,
            fec_interval: self.fec_interval,
            rate_control_disabled_until: until,
            action: Action::Undershoot { disable },
        }
    }

    fn disable_window(&self) -> SimTime {
        let (num, den) = self.cfg.disable_factor;
        self.report_interval().mul_ratio(num, den)
    }

    /// Processes one receiver report.
    pub fn on_report(
        &mut self,
        now: SimTime,
        report: &FeedbackReport,
        meas: ReportMeasurement,
    ) -> ReportOutcome {
        self.record_rtt(now, report);
        let gap = self.last_report_arrival.map(|t| now.saturating_sub(t));
        let timed_early = match (gap, self.rtt_median()) {
            (Some(gap), Some(rtt)) if rtt > SimTime::ZERO => {
                on_report_timing(gap, rtt) == ReportTiming::Early
            }
            _ => false,
        };
        let early = report.is_early || timed_early;
        if let (Some(gap), false) = (gap, early) {
            self.last_regular_gap = Some(gap);
        }
        let interval_start = self.last_report_ts.unwrap_or(SimTime::ZERO);
        self.last_report_arrival = Some(now);
        self.last_report_ts = Some(report.report_ts);
        self.feedback_mark = now;

        self.rates.record(RateSample {
            at: now,
            goodput: meas.goodput,
            sending_rate: meas.sending_rate,
            combined: meas.sending_rate + meas.fec_rate,
        });

        let mut bounce_due = false;
        if let Some(w) = self.disable.as_mut() {
            if !w.ignored_one {
                if !early {
                    w.ignored_one = true;
                }
                debug!("t={now} ignoring report (rate control paused until {})", w.until);
                return ReportOutcome::Ignored;
            }
            self.disable = None;
            bounce_due = true;
        }

        let cues = classify_cues(
            report,
            interval_start,
            report.report_ts.max(interval_start),
            &self.owd,
        );
        self.owd.admit_sample(report);

        let decision = if bounce_due {
            let clean = !cues.losses
                && !cues.discards
                && !early
                && cues.corr.corr_high <= self.cfg.thresholds.down_keep_high;
            let stored = self.stored_goodput.unwrap_or(self.target_rate);
            match bounce_back(stored, clean) {
                Some(rate) => ControllerDecision {
                    new_state: ControllerState::Stay,
                    target_media_rate: rate.max(self.cfg.min_rate),
                    fec_enabled: false,
                    fec_interval: self.fec_interval,
                    rate_control_disabled_until: None,
                    action: Action::BounceBack,
                },
                None => self.undershoot_decision(now, &meas, false),
            }
        } else if early {
            self.undershoot_decision(now, &meas, true)
        } else {
            let input = StepInput {
                state: self.state,
                prev_state: self.prev_state,
                cues,
                rates: &self.rates,
                current_rate: self.target_rate,
                current_fec_rate: meas.probe_fec_rate,
                sending_rate: meas.sending_rate,
                goodput: meas.goodput,
                fec_interval: self.fec_interval,
                now,
                disable_window: self.disable_window(),
            };
            step(&input, &self.cfg)
        };

        if let Action::Undershoot { disable } = decision.action {
            self.stored_goodput = Some(meas.goodput);
            if disable {
                self.disable = Some(DisableWindow {
                    until: decision.rate_control_disabled_until.unwrap_or(now),
                    ignored_one: false,
                });
            }
        }
        debug!(
            "t={now} {} -> {} {:?} rate={} corr_high={:.3} corr_low={:.3}",
            self.state,
            decision.new_state,
            decision.action,
            decision.target_media_rate,
            cues.corr.corr_high,
            cues.corr.corr_low
        );
        self.apply(&decision);
        ReportOutcome::Decision(decision)
    }

    /// Periodic check for missing feedback. Fires at most once per
    /// [`super::FEEDBACK_TIMEOUT`] of silence.
    pub fn on_tick(&mut self, now: SimTime) -> Option<ControllerDecision> {
        let d = on_feedback_timeout(
            now.saturating_sub(self.feedback_mark),
            self.target_rate,
            self.fec_interval,
        )?;
        self.feedback_mark = now;
        self.apply(&d);
        Some(d)
    }
}
