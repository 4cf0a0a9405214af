//! Simulated optical bench built on `zpltune`.
//!
//! A [`Session`] owns a set of emitters, a shift backend (phenomenological
//! kinetics or the charge Monte Carlo), one seeded random stream and an
//! append-only log. Sessions are driven by [`Command`]s from the CLI, the
//! HTTP service or scripts, and any session can be rebuilt from its config
//! and log with [`replay`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod log;
pub mod map;
pub mod replay;
pub mod request;
pub mod server;
pub mod session;

pub use config::{parse_config, SchemaError, SessionConfig};
pub use error::{BenchError, ErrorBody, ReplayError};
pub use log::{LogEntry, Record};
pub use map::FluorescenceMap;
pub use replay::replay;
pub use request::{Aim, AutotuneRequest, BurstRequest, Command, MapRequest, ScanRequest, WaitRequest};
pub use session::{CommandOutput, Phase, Session, SessionState};
