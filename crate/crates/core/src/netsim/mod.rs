// SPDX-License-Identifier: Apache-2.0

//! Discrete-event network simulator.
//!
//! Every flow has its own 100 Mbps access links on both ends and shares one
//! bottleneck per direction. Media and TCP data travel forward; receiver
//! reports and ACKs travel the reverse bottleneck.

mod event;
mod link;
mod scenario;
mod sim;
mod tcp;

pub use event::EventQueue;
pub use link::{Capacity, CapacitySchedule, Link, LinkStats, Offer};
pub use scenario::{Scenario, Topology, VAR_LINK_MAX, VAR_LINK_MIN};
pub use sim::{run, run_detailed, LinkReport, RtpFlowReport, SimOutput};
pub use tcp::{Segment, TcpConfig, TcpOutput, TcpSender, TcpSink, TcpState, TcpStats};
