//! Report and trace serialization.
//!
//! Summaries are pretty-printed JSON. Traces are CSV with the header
//! `slot,event,session_id,sender,receiver,outcome,detail`, one row per
//! logged event. Files are written to a temporary sibling and renamed
//! into place so a reader never sees a partial file.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::engine::SlotLog;
use crate::model::NodeId;
use crate::protocol::SessionId;

pub const TRACE_HEADER: [&str; 7] = ["slot", "event", "session_id", "sender", "receiver", "outcome", "detail"];

#[derive(Debug, Serialize)]
struct TraceRow {
    slot: u64,
    event: &'static str,
    session_id: Option<SessionId>,
    sender: Option<NodeId>,
    receiver: Option<NodeId>,
    outcome: String,
    detail: String,
}

impl TraceRow {
    fn new(slot: u64, event: &'static str) -> Self {
        TraceRow {
            slot,
            event,
            session_id: None,
            sender: None,
            receiver: None,
            outcome: String::new(),
            detail: String::new(),
        }
    }
}

fn rows(log: &SlotLog) -> Vec<TraceRow> {
    let slot = log.slot;
    let mut out = Vec::with_capacity(log.event_count());
    for t in &log.intents {
        out.push(TraceRow {
            session_id: Some(t.session_id),
            sender: Some(t.sender),
            receiver: Some(t.receiver),
            ..TraceRow::new(slot, "intent")
        });
    }
    for r in &log.recoveries {
        let mut detail = format!("counter={}", r.counter);
        if let Some(x) = r.excluded {
            detail.push_str(&format!(";excluded={x}"));
        }
        if let Some(p) = r.backtracked_to {
            detail.push_str(&format!(";backtracked_to={p}"));
        }
        out.push(TraceRow {
            session_id: Some(r.session_id),
            sender: Some(r.from),
            receiver: r.result,
            outcome: r.label().to_string(),
            detail,
            ..TraceRow::new(slot, "recovery")
        });
    }
    for r in &log.resolutions {
        out.push(TraceRow {
            session_id: Some(r.winner.session_id),
            sender: Some(r.winner.sender),
            receiver: Some(r.receiver),
            outcome: if r.resolved() { "resolved" } else { "unresolved" }.to_string(),
            detail: format!("contenders={}", r.deferred.len() + 1),
            ..TraceRow::new(slot, "resolution")
        });
        for d in &r.deferred {
            out.push(TraceRow {
                session_id: Some(d.session_id),
                sender: Some(d.sender),
                receiver: Some(d.receiver),
                outcome: "deferred".to_string(),
                detail: format!("winner={}", r.winner.sender),
                ..TraceRow::new(slot, "deferral")
            });
        }
    }
    for t in &log.transfers {
        out.push(TraceRow {
            session_id: Some(t.session_id),
            sender: Some(t.sender),
            receiver: Some(t.receiver),
            outcome: t.outcome.label().to_string(),
            ..TraceRow::new(slot, "transfer")
        });
    }
    for b in &log.broadcasts {
        out.push(TraceRow {
            session_id: Some(b.session_id),
            sender: Some(b.sender),
            detail: format!("heard_by={}", b.heard_by.len()),
            ..TraceRow::new(slot, "broadcast")
        });
    }
    for s in &log.status_changes {
        out.push(TraceRow {
            session_id: Some(s.session_id),
            outcome: s.status.label().to_string(),
            ..TraceRow::new(slot, "status")
        });
    }
    out
}

/// Renders a slot trace as CSV text.
pub fn trace_csv(logs: &[SlotLog]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for log in logs {
        for row in rows(log) {
            w.serialize(row).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
