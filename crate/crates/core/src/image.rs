//! On-disk attack images.
//!
//! A simulation run is persisted as a directory so the pipeline stages can be
//! composed as separate processes: the post-attack filesystem under `fs/`,
//! shadow snapshots under `shadow/<id>/`, the pre-attack baseline under
//! `baseline/`, plus the trace, artifact bundle, attacker key escrow, and the
//! raw payload image. [`store_image`]/[`load_image`] round-trip the whole
//! structure losslessly.

use std::collections::BTreeMap;
use std::fs as stdfs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    execute_attack, AttackArtifacts, AttackError, AttackOutcome, AttackerKeySet, PayloadKeyOffset,
};
use crate::c2::InProcC2;
use crate::scenario::ScenarioDoc;
use crate::trace::{emit_trace, parse_trace, TraceError, TraceLog};
use crate::vfs::{
    validate_path, FileEntry, FileMetadata, FileState, ShadowSnapshot, VfsError, VirtualFS,
};

// ==== layout =================================================================

pub const IMAGE_VERSION: u32 = 1;
pub const FS_DIR: &str = "fs";
pub const SHADOW_DIR: &str = "shadow";
pub const BASELINE_DIR: &str = "baseline";
pub const INDEX_FILE: &str = "fsindex.json";
pub const TRACE_FILE: &str = "trace.trace";
pub const ARTIFACTS_FILE: &str = "artifacts.json";
pub const ATTACKER_KEYS_FILE: &str = "attacker_keys.json";
pub const PAYLOAD_FILE: &str = "payload.bin";
pub const PAYLOAD_INDEX_FILE: &str = "payload_index.json";

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("image metadata error in {file}: {source}")]
    Json {
        file: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("image corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Vfs(#[from] VfsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ImageError + '_ {
    move |source| ImageError::Io { path: path.to_path_buf(), source }
}

// ==== index schema ===========================================================

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    path: String,
    state: FileState,
    size: u64,
    created_at: u64,
    modified_at: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexSnapshot {
    snapshot_id: u32,
    taken_at: u64,
    files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FsIndex {
    version: u32,
    clock: u64,
    snapshot_counter: u32,
    entries: Vec<IndexEntry>,
    snapshots: Vec<IndexSnapshot>,
    baseline: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PayloadIndex {
    offsets: Vec<PayloadKeyOffset>,
}

// ==== image ==================================================================

/// Everything a stored simulation run contains.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackImage {
    /// Post-attack filesystem, including deleted entries and snapshots.
    pub fs: VirtualFS,
    /// Pre-attack content of every then-Live file, for recovery verification.
    pub baseline: BTreeMap<String, Vec<u8>>,
    pub trace: TraceLog,
    pub artifacts: AttackArtifacts,
    pub attacker_keys: AttackerKeySet,
}

impl AttackImage {
    /// Assemble an image from a finished run. `baseline` must be captured
    /// before [`crate::attack::execute_attack`] mutates the filesystem.
    pub fn from_outcome(
        baseline: BTreeMap<String, Vec<u8>>,
        fs: VirtualFS,
        outcome: AttackOutcome,
    ) -> Self {
        AttackImage {
            fs,
            baseline,
            trace: outcome.trace,
            artifacts: outcome.artifacts,
            attacker_keys: outcome.attacker_keys,
        }
    }
}

/// Snapshot the Live content of a filesystem (the pre-attack baseline).
pub fn capture_baseline(fs: &VirtualFS) -> BTreeMap<String, Vec<u8>> {
    fs.all_entries()
        .filter(|e| e.state == FileState::Live)
        .map(|e| (e.path.clone(), e.content.clone()))
        .collect()
}

/// Run a scenario document end to end against an in-process C2 endpoint and
/// assemble the resulting image. The endpoint's key escrow is merged into the
/// attacker key set, modeling the operator side of key custody.
pub fn run_scenario_doc(doc: &ScenarioDoc) -> Result<AttackImage, AttackError> {
    let mut fs = doc.build_fs().map_err(|e| AttackError::Config(e.to_string()))?;
    if doc.take_snapshot() {
        fs.take_shadow_snapshot();
    }
    let baseline = capture_baseline(&fs);
    let mut c2 = InProcC2::new(doc.c2_seed());
    let outcome = execute_attack(&doc.scenario, &mut fs, Some(&mut c2))?;
    let mut image = AttackImage::from_outcome(baseline, fs, outcome);
    image.attacker_keys.merge_material(&c2.state().escrow());
    Ok(image)
}

// ==== store ==================================================================

fn write_bytes(root: &Path, rel: &str, bytes: &[u8]) -> Result<(), ImageError> {
    let full = root.join(rel);
    if let Some(parent) = full.parent() {
        stdfs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    stdfs::write(&full, bytes).map_err(io_err(&full))
}

fn write_json<T: Serialize>(root: &Path, rel: &str, value: &T) -> Result<(), ImageError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| ImageError::Json { file: rel.to_string(), source })?;
    write_bytes(root, rel, text.as_bytes())
}

/// Persist an image into `dir` (created if absent).
pub fn store_image(image: &AttackImage, dir: &Path) -> Result<(), ImageError> {
    stdfs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut entries = Vec::new();
    for entry in image.fs.all_entries() {
        write_bytes(dir, &format!("{FS_DIR}/{}", entry.path), &entry.content)?;
        entries.push(IndexEntry {
            path: entry.path.clone(),
            state: entry.state,
            size: entry.metadata.size,
            created_at: entry.metadata.created_at,
            modified_at: entry.metadata.modified_at,
        });
    }

    let mut snapshots = Vec::new();
    for snap in image.fs.snapshots() {
        for (path, content) in &snap.files {
            write_bytes(dir, &format!("{SHADOW_DIR}/{}/{path}", snap.snapshot_id), content)?;
        }
        snapshots.push(IndexSnapshot {
            snapshot_id: snap.snapshot_id,
            taken_at: snap.taken_at,
            files: snap.files.keys().cloned().collect(),
        });
    }

    for (path, content) in &image.baseline {
        write_bytes(dir, &format!("{BASELINE_DIR}/{path}"), content)?;
    }

    let index = FsIndex {
        version: IMAGE_VERSION,
        clock: image.fs.clock(),
        snapshot_counter: image.fs.snapshot_counter(),
        entries,
        snapshots,
        baseline: image.baseline.keys().cloned().collect(),
    };
    write_json(dir, INDEX_FILE, &index)?;
    write_bytes(dir, TRACE_FILE, emit_trace(&image.trace).as_bytes())?;
    write_json(dir, ARTIFACTS_FILE, &image.artifacts)?;
    write_json(dir, ATTACKER_KEYS_FILE, &image.attacker_keys)?;
    write_bytes(dir, PAYLOAD_FILE, &image.artifacts.payload_image)?;
    write_json(
        dir,
        PAYLOAD_INDEX_FILE,
        &PayloadIndex { offsets: image.artifacts.payload_key_offsets.clone() },
    )?;
    Ok(())
}

// ==== load ===================================================================

fn read_bytes(root: &Path, rel: &str) -> Result<Vec<u8>, ImageError> {
    let full = root.join(rel);
    stdfs::read(&full).map_err(io_err(&full))
}

fn read_json<T: for<'de> Deserialize<'de>>(root: &Path, rel: &str) -> Result<T, ImageError> {
    let bytes = read_bytes(root, rel)?;
    serde_json::from_slice(&bytes)
        .map_err(|source| ImageError::Json { file: rel.to_string(), source })
}

/// Validate an index-supplied path before joining it under the image root, so
/// a tampered index cannot read outside the image directory.
fn checked(path: &str) -> Result<&str, ImageError> {
    validate_path(path)?;
    Ok(path)
}

/// Load a stored image back into memory.
pub fn load_image(dir: &Path) -> Result<AttackImage, ImageError> {
    let index: FsIndex = read_json(dir, INDEX_FILE)?;
    if index.version != IMAGE_VERSION {
        return Err(ImageError::Corrupt(format!(
            "unsupported image version {} (expected {IMAGE_VERSION})",
            index.version
        )));
    }

    let mut entries = Vec::with_capacity(index.entries.len());
    for ie in &index.entries {
        let content = read_bytes(dir, &format!("{FS_DIR}/{}", checked(&ie.path)?))?;
        if content.len() as u64 != ie.size {
            return Err(ImageError::Corrupt(format!(
                "{}: indexed size {} but stored {} bytes",
                ie.path,
                ie.size,
                content.len()
            )));
        }
        entries.push(FileEntry {
            path: ie.path.clone(),
            content,
            metadata: FileMetadata {
                size: ie.size,
                created_at: ie.created_at,
                modified_at: ie.modified_at,
            },
            state: ie.state,
        });
    }

    let mut snapshots = Vec::with_capacity(index.snapshots.len());
    for is in &index.snapshots {
        let mut files = BTreeMap::new();
        for path in &is.files {
            let content =
                read_bytes(dir, &format!("{SHADOW_DIR}/{}/{}", is.snapshot_id, checked(path)?))?;
            files.insert(path.clone(), content);
        }
        snapshots.push(ShadowSnapshot {
            snapshot_id: is.snapshot_id,
            taken_at: is.taken_at,
            files,
        });
    }

    let fs = VirtualFS::from_parts(entries, snapshots, index.clock, index.snapshot_counter)?;

    let mut baseline = BTreeMap::new();
    for path in &index.baseline {
        let content = read_bytes(dir, &format!("{BASELINE_DIR}/{}", checked(path)?))?;
        baseline.insert(path.clone(), content);
    }

    let trace_text = read_bytes(dir, TRACE_FILE)?;
    let trace = parse_trace(
        std::str::from_utf8(&trace_text)
            .map_err(|e| ImageError::Corrupt(format!("{TRACE_FILE}: {e}")))?,
    )?;
    let artifacts: AttackArtifacts = read_json(dir, ARTIFACTS_FILE)?;
    let attacker_keys: AttackerKeySet = read_json(dir, ATTACKER_KEYS_FILE)?;

    let payload = read_bytes(dir, PAYLOAD_FILE)?;
    if payload != artifacts.payload_image {
        return Err(ImageError::Corrupt(format!(
            "{PAYLOAD_FILE} does not match the artifact bundle's payload image"
        )));
    }

    Ok(AttackImage { fs, baseline, trace, artifacts, attacker_keys })
}
