// SPDX-License-Identifier: Apache-2.0

//! Media sender and receiver models around the controller.

mod receiver;
mod sender;

pub use receiver::{Disposition, DispositionCounts, Receiver, ReceiverConfig};
pub use sender::{
    fragment_sizes, frame_size, payload_pattern, FecScheduler, Sender, SenderConfig,
};

use crate::types::{FecPacket, FeedbackReport, MediaPacket, SimTime};

/// Packets a sender hands to the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outgoing {
    Media(MediaPacket),
    Fec(FecPacket),
}

/// Side effects of a receiver callback: reports to send and times at which
/// the receiver wants to be woken.
#[derive(Debug, Clone, Default)]
pub struct Outbox {
    pub reports: Vec<FeedbackReport>,
    pub wakeups: Vec<SimTime>,
}
