//! Execution traces: the observable record an attack run leaves behind and
//! the input the feature extractor consumes.
//!
//! Text format (UTF-8, one event per line):
//!
//! ```text
//! # trace v1 scenario=<id>
//! <seq>\t<KIND>\t<key=value;key=value>
//! ```
//!
//! The attribute field is `-` when an event has no attributes. Keys and
//! values percent-escape `%`, `=`, `;`, tab, CR and LF, so arbitrary paths
//! and commands round-trip byte-exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace parse error at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Malformed { line, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceKind {
    KeyGen,
    EmbeddedKeyRead,
    NetFetchKey,
    FileRead,
    FileWrite,
    FileDelete,
    ShadowDelete,
    NetExfil,
    ProcExec,
    NoteWrite,
}

impl TraceKind {
    pub const ALL: [TraceKind; 10] = [
        TraceKind::KeyGen,
        TraceKind::EmbeddedKeyRead,
        TraceKind::NetFetchKey,
        TraceKind::FileRead,
        TraceKind::FileWrite,
        TraceKind::FileDelete,
        TraceKind::ShadowDelete,
        TraceKind::NetExfil,
        TraceKind::ProcExec,
        TraceKind::NoteWrite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::KeyGen => "KEYGEN",
            TraceKind::EmbeddedKeyRead => "EMBEDDED_KEY_READ",
            TraceKind::NetFetchKey => "NET_FETCH_KEY",
            TraceKind::FileRead => "FILE_READ",
            TraceKind::FileWrite => "FILE_WRITE",
            TraceKind::FileDelete => "FILE_DELETE",
            TraceKind::ShadowDelete => "SHADOW_DELETE",
            TraceKind::NetExfil => "NET_EXFIL",
            TraceKind::ProcExec => "PROC_EXEC",
            TraceKind::NoteWrite => "NOTE_WRITE",
        }
    }

    pub fn parse(s: &str) -> Option<TraceKind> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for TraceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: TraceKind,
    /// Kind-specific attributes (path, key_id, key_kind, delete_mode, cmd,
    /// blob_id, ...). Sorted map so emission is canonical.
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceLog {
    pub scenario_id: String,
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new(scenario_id: &str) -> Self {
        TraceLog { scenario_id: scenario_id.to_string(), events: Vec::new() }
    }

    /// Append an event with the next sequence number.
    pub fn push(&mut self, kind: TraceKind, attrs: BTreeMap<String, String>) {
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        self.events.push(TraceEvent { seq, kind, attrs });
    }
}

/// Build an attribute map from literal pairs.
pub fn attrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

// ==== text encoding =========================================================

const HEADER_PREFIX: &str = "# trace v1 scenario=";

fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '%' => out.push_str("%25"),
            '=' => out.push_str("%3d"),
            ';' => out.push_str("%3b"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0a"),
            '\r' => out.push_str("%0d"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(escaped: &str, line: usize) -> Result<String, TraceError> {
    let bytes = escaped.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 3 > bytes.len() {
                return Err(malformed(line, "truncated escape sequence"));
            }
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3])
                .map_err(|_| malformed(line, "non-ASCII escape sequence"))?;
            let value = u8::from_str_radix(hex, 16)
                .map_err(|_| malformed(line, format!("bad escape %{hex}")))?;
            out.push(value);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| malformed(line, "escape decodes to invalid UTF-8"))
}

/// Serialize a log to the trace text format.
pub fn emit_trace(log: &TraceLog) -> String {
    let mut out = String::new();
    out.push_str(HEADER_PREFIX);
    out.push_str(&escape(&log.scenario_id));
    out.push('\n');
    for event in &log.events {
        out.push_str(&event.seq.to_string());
        out.push('\t');
        out.push_str(event.kind.as_str());
        out.push('\t');
        if event.attrs.is_empty() {
            out.push('-');
        } else {
            let mut first = true;
            for (k, v) in &event.attrs {
                if !first {
                    out.push(';');
                }
                first = false;
                out.push_str(&escape(k));
                out.push('=');
                out.push_str(&escape(v));
            }
        }
        out.push('\n');
    }
    out
}

/// Parse trace text. Any malformation is reported with its line number; the
/// parser never panics on arbitrary input.
pub fn parse_trace(text: &str) -> Result<TraceLog, TraceError> {
    let mut lines = text.split('\n').enumerate();
    let (_, header) = lines.next().ok_or_else(|| malformed(1, "empty input"))?;
    let scenario_escaped = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| malformed(1, format!("missing header {HEADER_PREFIX:?}")))?;
    let scenario_id = unescape(scenario_escaped, 1)?;

    let mut log = TraceLog { scenario_id, events: Vec::new() };
    let mut last_seq = 0u64;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            // Only legal as the trailing newline; anything after is junk.
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let seq_field = fields.next().unwrap();
        let kind_field = fields.next().ok_or_else(|| malformed(line_no, "missing kind field"))?;
        let attr_field = fields.next().ok_or_else(|| malformed(line_no, "missing attribute field"))?;

        let seq: u64 = seq_field
            .parse()
            .map_err(|_| malformed(line_no, format!("bad sequence number {seq_field:?}")))?;
        if seq <= last_seq {
            return Err(malformed(
                line_no,
                format!("sequence {seq} does not increase past {last_seq}"),
            ));
        }
        last_seq = seq;

        let kind = TraceKind::parse(kind_field)
            .ok_or_else(|| malformed(line_no, format!("unknown event kind {kind_field:?}")))?;

        let mut attrs = BTreeMap::new();
        if attr_field != "-" {
            for pair in attr_field.split(';') {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| malformed(line_no, format!("attribute {pair:?} lacks '='")))?;
                let key = unescape(k, line_no)?;
                let value = unescape(v, line_no)?;
                if key.is_empty() {
                    return Err(malformed(line_no, "empty attribute key"));
                }
                if attrs.insert(key.clone(), value).is_some() {
                    return Err(malformed(line_no, format!("duplicate attribute key {key:?}")));
                }
            }
        }
        log.events.push(TraceEvent { seq, kind, attrs });
    }
    Ok(log)
}
