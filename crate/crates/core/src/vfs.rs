//! Virtual filesystem the attacks run against.
//!
//! Deliberately file-grained: an entry is Live, MetadataDeleted (directory
//! information erased, content bytes still on "disk" and recoverable), or
//! Overwritten (content replaced by random octets of equal length, gone for
//! good). Shadow snapshots model restore points: immutable copies of the Live
//! tree that only `delete_shadow_copies` can remove. Timestamps are logical
//! monotone counters, so runs are deterministic.

use std::collections::BTreeMap;

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::hex_bytes;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VfsError {
    #[error("no such live file: {0}")]
    NotFound(String),
    #[error("file is not deleted: {0}")]
    NotDeleted(String),
    #[error("content unrecoverable (overwritten): {0}")]
    UnrecoverableContent(String),
    #[error("invalid path {path:?}: {reason}")]
    InvalidPath { path: String, reason: String },
    #[error("no such snapshot: {0}")]
    NoSuchSnapshot(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileState {
    Live,
    MetadataDeleted,
    Overwritten,
}

/// How a file is deleted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeleteMode {
    /// Erase directory structures and metadata only; bytes stay recoverable.
    MetadataOnly,
    /// Overwrite content with random octets of equal length, then delete.
    OverwriteRandom,
}

impl std::fmt::Display for DeleteMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeleteMode::MetadataOnly => "metadata_only",
            DeleteMode::OverwriteRandom => "overwrite_random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileMetadata {
    pub size: u64,
    pub created_at: u64,
    pub modified_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    #[serde(with = "hex_bytes")]
    pub content: Vec<u8>,
    pub metadata: FileMetadata,
    pub state: FileState,
}

/// Immutable capture of every Live file at a point in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowSnapshot {
    pub snapshot_id: u32,
    pub taken_at: u64,
    pub files: BTreeMap<String, Vec<u8>>,
}

/// Initial file for `create_fs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSpec {
    pub path: String,
    #[serde(with = "hex_bytes")]
    pub content: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VirtualFS {
    entries: BTreeMap<String, FileEntry>,
    snapshots: Vec<ShadowSnapshot>,
    clock: u64,
    next_snapshot: u32,
}

/// Paths are normalized relative POSIX-style strings. Anything that could
/// escape an on-disk image directory is rejected up front.
pub fn validate_path(path: &str) -> Result<(), VfsError> {
    let bad = |reason: &str| {
        Err(VfsError::InvalidPath { path: path.to_string(), reason: reason.to_string() })
    };
    if path.is_empty() {
        return bad("empty");
    }
    if path.starts_with('/') || path.ends_with('/') {
        return bad("must be relative without trailing slash");
    }
    if path.contains('\\') {
        return bad("backslash separators not supported");
    }
    if path.chars().any(|c| c.is_control()) {
        return bad("control characters not allowed");
    }
    for segment in path.split('/') {
        if segment.is_empty() {
            return bad("empty path segment");
        }
        if segment == "." || segment == ".." {
            return bad("relative traversal segments not allowed");
        }
    }
    Ok(())
}

impl VirtualFS {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a filesystem from an initial file list.
    pub fn create(files: &[FileSpec]) -> Result<Self, VfsError> {
        let mut fs = Self::new();
        for spec in files {
            fs.write_file(&spec.path, &spec.content)?;
        }
        Ok(fs)
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Create or replace a Live file. Writing over a deleted entry revives
    /// the path with the new content (the old bytes' sectors are reused).
    pub fn write_file(&mut self, path: &str, content: &[u8]) -> Result<(), VfsError> {
        validate_path(path)?;
        let now = self.tick();
        match self.entries.get_mut(path) {
            Some(entry) => {
                entry.content = content.to_vec();
                entry.metadata.size = content.len() as u64;
                entry.metadata.modified_at = now;
                entry.state = FileState::Live;
            }
            None => {
                self.entries.insert(
                    path.to_string(),
                    FileEntry {
                        path: path.to_string(),
                        content: content.to_vec(),
                        metadata: FileMetadata { size: content.len() as u64, created_at: now, modified_at: now },
                        state: FileState::Live,
                    },
                );
            }
        }
        Ok(())
    }

    /// Read a Live file's content. Deleted entries are invisible here.
    pub fn read_file(&self, path: &str) -> Result<&[u8], VfsError> {
        match self.entries.get(path) {
            Some(e) if e.state == FileState::Live => Ok(&e.content),
            _ => Err(VfsError::NotFound(path.to_string())),
        }
    }

    /// Delete a Live file in the given mode. Overwrite randomness comes from
    /// the caller's seeded stream so runs stay reproducible.
    pub fn delete_file(
        &mut self,
        path: &str,
        mode: DeleteMode,
        rng: &mut dyn RngCore,
    ) -> Result<(), VfsError> {
        let now = self.tick();
        let entry = match self.entries.get_mut(path) {
            Some(e) if e.state == FileState::Live => e,
            _ => return Err(VfsError::NotFound(path.to_string())),
        };
        match mode {
            DeleteMode::MetadataOnly => entry.state = FileState::MetadataDeleted,
            DeleteMode::OverwriteRandom => {
                let mut noise = vec![0u8; entry.content.len()];
                rng.fill_bytes(&mut noise);
                entry.content = noise;
                entry.state = FileState::Overwritten;
            }
        }
        entry.metadata.modified_at = now;
        Ok(())
    }

    /// Recover a MetadataDeleted file: restores it Live and returns the
    /// original content.
    pub fn undelete(&mut self, path: &str) -> Result<Vec<u8>, VfsError> {
        let now = self.tick();
        let entry = self
            .entries
            .get_mut(path)
            .ok_or_else(|| VfsError::NotFound(path.to_string()))?;
        match entry.state {
            FileState::Live => Err(VfsError::NotDeleted(path.to_string())),
            FileState::Overwritten => Err(VfsError::UnrecoverableContent(path.to_string())),
            FileState::MetadataDeleted => {
                entry.state = FileState::Live;
                entry.metadata.modified_at = now;
                Ok(entry.content.clone())
            }
        }
    }

    /// Capture every Live file into a new immutable snapshot.
    pub fn take_shadow_snapshot(&mut self) -> u32 {
        let taken_at = self.tick();
        let id = self.next_snapshot;
        self.next_snapshot += 1;
        let files = self
            .entries
            .values()
            .filter(|e| e.state == FileState::Live)
            .map(|e| (e.path.clone(), e.content.clone()))
            .collect();
        self.snapshots.push(ShadowSnapshot { snapshot_id: id, taken_at, files });
        id
    }

    /// Remove every snapshot; returns how many were deleted.
    pub fn delete_shadow_copies(&mut self) -> usize {
        self.tick();
        let n = self.snapshots.len();
        self.snapshots.clear();
        n
    }

    /// Restore every path in a snapshot to its snapshot content as Live.
    /// Returns the number of files restored.
    pub fn restore_from_shadow(&mut self, snapshot_id: u32) -> Result<usize, VfsError> {
        let snapshot = self
            .snapshots
            .iter()
            .find(|s| s.snapshot_id == snapshot_id)
            .ok_or(VfsError::NoSuchSnapshot(snapshot_id))?
            .clone();
        for (path, content) in &snapshot.files {
            self.write_file(path, content)?;
        }
        Ok(snapshot.files.len())
    }

    /// Sorted Live paths.
    pub fn list_files(&self) -> Vec<&str> {
        self.entries
            .values()
            .filter(|e| e.state == FileState::Live)
            .map(|e| e.path.as_str())
            .collect()
    }

    /// Every entry regardless of state, in path order. Recovery tooling uses
    /// this as its "disk surface" view.
    pub fn all_entries(&self) -> impl Iterator<Item = &FileEntry> {
        self.entries.values()
    }

    pub fn entry(&self, path: &str) -> Option<&FileEntry> {
        self.entries.get(path)
    }

    pub fn snapshots(&self) -> &[ShadowSnapshot] {
        &self.snapshots
    }

    /// Next snapshot id to be allocated. Persisted so a filesystem whose
    /// snapshots were deleted round-trips exactly.
    pub fn snapshot_counter(&self) -> u32 {
        self.next_snapshot
    }

    /// Rebuild a filesystem from raw parts (image loading). The snapshot
    /// counter is clamped so existing ids are never reissued.
    pub fn from_parts(
        entries: Vec<FileEntry>,
        snapshots: Vec<ShadowSnapshot>,
        clock: u64,
        snapshot_counter: u32,
    ) -> Result<Self, VfsError> {
        let mut map = BTreeMap::new();
        for e in entries {
            validate_path(&e.path)?;
            map.insert(e.path.clone(), e);
        }
        let floor = snapshots.iter().map(|s| s.snapshot_id + 1).max().unwrap_or(0);
        let next_snapshot = snapshot_counter.max(floor);
        Ok(VirtualFS { entries: map, snapshots, clock, next_snapshot })
    }
}
