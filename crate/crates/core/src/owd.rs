// SPDX-License-Identifier: Apache-2.0

//! One-way-delay history and low/high watermark correlation.
//!
//! Only samples from reports without losses or discards enter the history,
//! so the watermarks describe the uncongested path. The low watermark is the
//! 40th percentile and the high watermark the 80th (nearest rank).

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{FeedbackReport, SimTime};

pub const DEFAULT_CAPACITY: usize = 20;
pub const LOW_PERCENTILE: f64 = 0.40;
pub const HIGH_PERCENTILE: f64 = 0.80;

#[derive(Debug, Clone)]
pub struct OwdHistory {
    samples: VecDeque<SimTime>,
    capacity: usize,
}

impl Default for OwdHistory {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_CAPACITY)
    }
}

impl OwdHistory {
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn from_samples(samples: impl IntoIterator<Item = SimTime>, capacity: usize) -> Self {
        let mut h = Self::with_capacity(capacity);
        for s in samples {
            h.push(s);
        }
        h
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn samples(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.samples.iter().copied()
    }

    fn push(&mut self, owd: SimTime) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(owd);
    }

    /// Records the report's OWD sample if the report is free of losses and
    /// discards. Returns whether the sample was admitted.
    pub fn admit_sample(&mut self, report: &FeedbackReport) -> bool {
        if !report.is_clean() {
            return false;
        }
        self.push(report.owd_sample);
        true
    }

    /// Nearest-rank percentile: the value at 1-based rank `ceil(p * n)`.
    pub fn percentile(&self, p: f64) -> Result<SimTime> {
        if self.samples.is_empty() {
            return Err(Error::EmptyHistory);
        }
        let mut sorted: Vec<SimTime> = self.samples.iter().copied().collect();
        sorted.sort_unstable();
        let n = sorted.len();
        // Guard against representation error in p * n (0.4 * 5 = 2.0000000000000004).
        let rank = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        Ok(sorted[rank - 1])
    }

    /// Current OWD relative to the low and high watermarks.
    pub fn correlate(&self, current: SimTime) -> Result<OwdCorrelation> {
        let p40 = self.percentile(LOW_PERCENTILE)?;
        let p80 = self.percentile(HIGH_PERCENTILE)?;
        if p40.0 == 0 || p80.0 == 0 {
            return Err(Error::ZeroPercentile);
        }
        Ok(OwdCorrelation {
            corr_low: current.0 as f64 / p40.0 as f64,
            corr_high: current.0 as f64 / p80.0 as f64,
            p40,
            p80,
        })
    }

    /// Like [`OwdHistory::correlate`], but neutral (both ratios 1.0) while the
    /// history cannot provide watermarks yet.
    pub fn correlate_or_neutral(&self, current: SimTime) -> OwdCorrelation {
        self.correlate(current).unwrap_or(OwdCorrelation {
            corr_low: 1.0,
            corr_high: 1.0,
            p40: current,
            p80: current,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OwdCorrelation {
    pub corr_low: f64,
    pub corr_high: f64,
    pub p40: SimTime,
    pub p80: SimTime,
}

impl OwdCorrelation {
    /// Correlation fixed at given ratios; for driving the state machine
    /// directly.
    pub fn ratios(corr_low: f64, corr_high: f64) -> Self {
        Self {
            corr_low,
            corr_high,
            p40: SimTime::ZERO,
            p80: SimTime::ZERO,
        }
    }
}
