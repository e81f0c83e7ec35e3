// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use crate::types::{BitRate, SimTime};

/// Rates measured for one reporting interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateSample {
    pub at: SimTime,
    pub goodput: BitRate,
    pub sending_rate: BitRate,
    /// Media plus parity.
    pub combined: BitRate,
}

impl RateSample {
    pub fn highest(&self) -> BitRate {
        self.goodput.max(self.sending_rate).max(self.combined)
    }
}

/// Sliding window of recent rate measurements.
#[derive(Debug, Clone)]
pub struct RateHistory {
    entries: VecDeque<RateSample>,
    window: SimTime,
    initial_goodput: BitRate,
}

impl RateHistory {
    pub const DEFAULT_WINDOW: SimTime = SimTime::from_secs(2);

    pub fn new(initial_goodput: BitRate) -> Self {
        Self::with_window(initial_goodput, Self::DEFAULT_WINDOW)
    }

    pub fn with_window(initial_goodput: BitRate, window: SimTime) -> Self {
        Self {
            entries: VecDeque::new(),
            window,
            initial_goodput,
        }
    }

    pub fn initial_goodput(&self) -> BitRate {
        self.initial_goodput
    }

    /// Appends a sample and evicts everything older than the window relative
    /// to it. Samples must arrive in time order.
    pub fn record(&mut self, sample: RateSample) {
        debug_assert!(self.entries.back().is_none_or(|b| b.at <= sample.at));
        self.entries.push_back(sample);
        self.evict(sample.at);
    }

    pub fn evict(&mut self, now: SimTime) {
        let horizon = now.saturating_sub(self.window);
        while self.entries.front().is_some_and(|e| e.at < horizon) {
            self.entries.pop_front();
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &RateSample> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest rate of any kind in the window.
    pub fn max_rate(&self) -> Option<BitRate> {
        self.entries.iter().map(RateSample::highest).max()
    }

    /// Reference rate for deciding whether the current rate is "high".
    pub fn ceiling(&self) -> BitRate {
        self.max_rate()
            .unwrap_or(BitRate::ZERO)
            .max(self.initial_goodput)
    }
}
