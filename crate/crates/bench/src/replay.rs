//! Rebuilds a session from its config and log.
//!
//! Only commands are re-executed; everything they logged is regenerated and
//! must match the recorded entries exactly, draw counts included. The
//! random stream is never stored, so agreement proves determinism.

use crate::config::SessionConfig;
use crate::error::{BenchError, ReplayError, Result};
use crate::log::{LogEntry, Record};
use crate::session::Session;

pub fn replay(config: SessionConfig, log: &[LogEntry]) -> Result<Session> {
    let mut session = Session::new(config)?;
    if log.is_empty() {
        return Ok(session);
    }
    for (k, e) in log.iter().enumerate() {
        if e.seq != k as u64 {
            return Err(ReplayError::SequenceGap { expected: k as u64, found: e.seq }.into());
        }
    }
    let Record::Snapshot(snap) = &log[0].record else {
        return Err(ReplayError::MissingSnapshot.into());
    };
    if snap.config_hash != session.config_hash() {
        return Err(ReplayError::HashMismatch {
            expected: session.config_hash().to_owned(),
            logged: snap.config_hash.clone(),
        }
        .into());
    }
    if session.log()[0] != log[0] {
        return Err(ReplayError::Divergence { seq: 0 }.into());
    }
    let mut k = 1;
    while k < log.len() {
        let cmd = log[k].record.command().ok_or(ReplayError::UnexpectedRecord { seq: k as u64 })?;
        let start = session.log().len();
        // A command that failed part-way logged what it did before failing;
        // replay fails the same way and the comparison below still holds.
        let _ = session.execute(&cmd);
        let produced = &session.log()[start..];
        if produced.is_empty() || log.len() < k + produced.len() || produced != &log[k..k + produced.len()] {
            let at =
                produced.iter().zip(&log[k..]).position(|(a, b)| a != b).unwrap_or(produced.len().min(log.len() - k));
            return Err(ReplayError::Divergence { seq: (k + at) as u64 }.into());
        }
        k += produced.len();
    }
    Ok(session)
}

/// Replay from JSONL text.
pub fn replay_jsonl(config: SessionConfig, text: &str) -> Result<Session> {
    let log = crate::log::read_jsonl(text.as_bytes()).map_err(BenchError::Replay)?;
    replay(config, &log)
}
