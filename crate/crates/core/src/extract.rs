//! Feature extraction: turns an execution trace back into the attack's
//! structural feature vector.
//!
//! The rules work purely on observable events, so hand-authored traces (the
//! analog of writing one up from a third-party incident report) extract the
//! same way as executor-produced ones:
//!
//! - key acquisition events (KEYGEN / EMBEDDED_KEY_READ / NET_FETCH_KEY)
//!   establish each key's provenance and kind;
//! - a hybrid structure is recognized by key-wrap evidence (`wrap_of` /
//!   `wrap_by` attributes) whose wrapping key is asymmetric; its provenance
//!   flags are the union over the wrap-chain keys;
//! - a single-key structure is recognized by exactly one governing
//!   encryption key, which determines the `sk_*` flag and `sk_kind`;
//! - shadow-copy deletion is either the SHADOW_DELETE event itself or a
//!   PROC_EXEC whose command line invokes vssadmin;
//! - overwrite deletion counts only when it destroys a previously encrypted
//!   original (a plain wiper pass over never-encrypted files is destruction,
//!   not encryption remnant removal);
//! - key residue is a key-material write that still exists in readable form
//!   at the end of the trace (never overwrite-deleted afterwards).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::features::{FeatureVector, SkKind};
use crate::trace::{TraceKind, TraceLog};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    /// The trace's key evidence contradicts itself (unknown key references,
    /// wraps by non-asymmetric keys, several governing keys with no wrap
    /// structure, conflicting acquisition records).
    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),
}

fn bad(reason: impl Into<String>) -> ExtractError {
    ExtractError::InconsistentTrace(reason.into())
}

/// Provenance of one acquired key, straight from its acquisition event kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Acquired {
    C2,
    PayloadEmbedded,
    LocalGeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AcquiredKind {
    Symmetric,
    Asymmetric,
}

pub fn extract_features(trace: &TraceLog) -> Result<FeatureVector, ExtractError> {
    // key_id -> (provenance, kind)
    let mut keys: BTreeMap<&str, (Acquired, AcquiredKind)> = BTreeMap::new();
    // (enc_key_id, optional src) per encryption write
    let mut enc_events: Vec<(&str, Option<&str>)> = Vec::new();
    // (wrap_of, wrap_by) pairs, deduplicated
    let mut wrap_edges: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut del_shadow = false;
    // path -> seq of the key-material write
    let mut residue_writes: BTreeMap<&str, u64> = BTreeMap::new();
    // (path, seq) of every overwrite-mode delete
    let mut overwrite_deletes: Vec<(&str, u64)> = Vec::new();

    for event in &trace.events {
        match event.kind {
            TraceKind::KeyGen | TraceKind::EmbeddedKeyRead | TraceKind::NetFetchKey => {
                let key_id = event
                    .attrs
                    .get("key_id")
                    .ok_or_else(|| bad(format!("{} event without key_id (seq {})", event.kind, event.seq)))?;
                let kind = match event.attrs.get("key_kind").map(String::as_str) {
                    Some("symmetric") => AcquiredKind::Symmetric,
                    Some("asymmetric") => AcquiredKind::Asymmetric,
                    other => {
                        return Err(bad(format!(
                            "key {key_id} acquired with unusable kind {other:?} (seq {})",
                            event.seq
                        )))
                    }
                };
                let source = match event.kind {
                    TraceKind::KeyGen => Acquired::LocalGeneration,
                    TraceKind::EmbeddedKeyRead => Acquired::PayloadEmbedded,
                    TraceKind::NetFetchKey => Acquired::C2,
                    _ => unreachable!(),
                };
                if let Some(existing) = keys.get(key_id.as_str()) {
                    if *existing != (source, kind) {
                        return Err(bad(format!(
                            "key {key_id} acquired twice with conflicting records"
                        )));
                    }
                } else {
                    keys.insert(key_id, (source, kind));
                }
            }
            TraceKind::FileWrite => {
                if let Some(enc_key) = event.attrs.get("enc_key_id") {
                    enc_events.push((enc_key, event.attrs.get("src").map(String::as_str)));
                }
                if let (Some(of), Some(by)) = (event.attrs.get("wrap_of"), event.attrs.get("wrap_by")) {
                    wrap_edges.insert((of, by));
                }
                if event.attrs.contains_key("key_material") {
                    if let Some(path) = event.attrs.get("path") {
                        residue_writes.insert(path, event.seq);
                    }
                }
            }
            TraceKind::NetExfil => {
                if let (Some(of), Some(by)) = (event.attrs.get("wrap_of"), event.attrs.get("wrap_by")) {
                    wrap_edges.insert((of, by));
                }
            }
            TraceKind::FileDelete => {
                if event.attrs.get("delete_mode").map(String::as_str) == Some("overwrite_random") {
                    if let Some(path) = event.attrs.get("path") {
                        overwrite_deletes.push((path, event.seq));
                    }
                }
            }
            TraceKind::ShadowDelete => del_shadow = true,
            TraceKind::ProcExec => {
                if event.attrs.get("cmd").is_some_and(|cmd| cmd.contains("vssadmin")) {
                    del_shadow = true;
                }
            }
            TraceKind::FileRead | TraceKind::NoteWrite => {}
        }
    }

    let mut v = FeatureVector { del_shadow_copies: del_shadow, ..FeatureVector::default() };

    // Overwrite deletion only counts against previously encrypted originals.
    let encrypted_srcs: BTreeSet<&str> = enc_events.iter().filter_map(|(_, src)| *src).collect();
    v.overwrite_delete =
        overwrite_deletes.iter().any(|(path, _)| encrypted_srcs.contains(path));

    // Residue survives if some key-material write is never overwrite-deleted
    // later (a metadata-only delete leaves the octets recoverable).
    v.key_residue_on_victim = residue_writes.iter().any(|(path, written_at)| {
        !overwrite_deletes.iter().any(|(del_path, del_at)| del_path == path && del_at > written_at)
    });

    // Key structure.
    let enc_key_ids: BTreeSet<&str> = enc_events.iter().map(|(id, _)| *id).collect();
    if !wrap_edges.is_empty() {
        // Hybrid: validate the chain, then union provenance over its keys.
        let mut chain: BTreeSet<&str> = enc_key_ids.clone();
        for (of, by) in &wrap_edges {
            let by_rec = keys
                .get(by)
                .ok_or_else(|| bad(format!("wrap by unknown key {by}")))?;
            if by_rec.1 != AcquiredKind::Asymmetric {
                return Err(bad(format!("wrap by non-asymmetric key {by}")));
            }
            if !keys.contains_key(of) {
                return Err(bad(format!("wrap of unknown key {of}")));
            }
            chain.insert(of);
            chain.insert(by);
        }
        for id in &enc_key_ids {
            if !keys.contains_key(id) {
                return Err(bad(format!("encryption by unknown key {id}")));
            }
        }
        for id in &chain {
            match keys[id].0 {
                Acquired::C2 => v.hk_c2 = true,
                Acquired::PayloadEmbedded => v.hk_pemb = true,
                Acquired::LocalGeneration => v.hk_localgen = true,
            }
        }
    } else if enc_key_ids.len() == 1 {
        // Single key: the one encryption key governs the structure.
        let id = enc_key_ids.iter().next().unwrap();
        let (source, kind) = keys
            .get(id)
            .ok_or_else(|| bad(format!("encryption by unknown key {id}")))?;
        match source {
            Acquired::C2 => v.sk_c2 = true,
            Acquired::PayloadEmbedded => v.sk_pemb = true,
            Acquired::LocalGeneration => v.sk_localgen = true,
        }
        v.sk_kind = match kind {
            AcquiredKind::Symmetric => SkKind::Symmetric,
            AcquiredKind::Asymmetric => SkKind::Asymmetric,
        };
    } else if enc_key_ids.len() >= 2 {
        return Err(bad(format!(
            "{} distinct encryption keys but no wrap structure",
            enc_key_ids.len()
        )));
    }
    // No encryption evidence at all: key flags stay false. Stray acquisition
    // events without use (an aborted run) are benign, not a key structure.

    Ok(v)
}
