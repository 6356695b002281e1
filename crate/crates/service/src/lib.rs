//! Service front end for the wrapped haptic display simulator.
//!
//! Teaching sessions and psychophysics experiments live behind a
//! [`service::Service`] that persists every event to an append-only JSONL log
//! per session or experiment. [`http`] exposes it over HTTP with a WebSocket
//! for live frames, and [`cli`] wraps everything in the `wrapsim` command.

pub mod cli;
pub mod clock;
pub mod error;
pub mod experiments;
pub mod http;
pub mod log;
pub mod service;
pub mod sessions;

pub use error::{Result, ServiceError};
pub use service::Service;
