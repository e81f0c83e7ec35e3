// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("FEC block length {0} outside [2, 14]")]
    BlockLengthOutOfRange(usize),
    #[error("FEC block sequence numbers are not consecutive at index {0}")]
    NonConsecutiveSequence(usize),
    #[error("FEC interval {0} outside [2, 14]")]
    IntervalOutOfRange(u32),
    #[error("OWD history is empty")]
    EmptyHistory,
    #[error("OWD percentile is zero")]
    ZeroPercentile,
    #[error("wire decode failed: {0}")]
    Decode(String),
    #[error("trace parse failed at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error("trace has no TCP flows")]
    NoTcpFlows,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
