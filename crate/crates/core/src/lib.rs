// SPDX-License-Identifier: Apache-2.0

//! FEC-based rate adaptation for conversational media, with sender and
//! receiver models, a discrete-event network simulator and metrics.

pub mod cli;
pub mod controller;
pub mod endpoint;
pub mod error;
pub mod fec;
pub mod metrics;
pub mod netsim;
pub mod owd;
pub mod trace;
pub mod types;
pub mod wire;

pub use error::{Error, Result};
