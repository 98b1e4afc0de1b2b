//! Recovery prediction and empirical recovery validation.
//!
//! Each virulence category carries a claim about how much data a victim can
//! get back without paying. [`predict_recoverability`] states that claim as a
//! strategy list, and [`attempt_recovery`] actually runs the strategies
//! against a stored attack image, measuring the byte-weighted fraction of
//! target content that comes back bit-exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackerKeySet, FileEnvelope, WrappedKeyFile, EnvelopeScheme, KEY_DUMP_PATH};
use crate::classify::Category;
use crate::crypto::{
    asym_decrypt, scan_key_material, sym_decrypt, unwrap_key, BlobProducer, CipherBlob,
    KeyMaterial, PrivateKey, SymKey,
};
use crate::image::AttackImage;
use crate::vfs::FileState;

// ==== strategies =============================================================

/// A recovery technique a victim (or their responder) can apply. Variants are
/// listed in the canonical attempt order: cheap filesystem techniques first,
/// then key-hunting, then the attacker's own keys (i.e. paying up).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStrategy {
    /// Restore target content from a surviving shadow snapshot.
    ShadowRestore,
    /// Read back metadata-deleted originals whose bytes were never wiped.
    Undelete,
    /// Carve key material out of the malware payload image and decrypt.
    PayloadKeyExtraction,
    /// Carve key material out of residue files left on the victim.
    ResidueKeyRecovery,
    /// Decrypt with the attacker's escrowed keys (models a paid ransom).
    AttackerKeyDecryption,
}

impl RecoveryStrategy {
    pub const ALL: [RecoveryStrategy; 5] = [
        RecoveryStrategy::ShadowRestore,
        RecoveryStrategy::Undelete,
        RecoveryStrategy::PayloadKeyExtraction,
        RecoveryStrategy::ResidueKeyRecovery,
        RecoveryStrategy::AttackerKeyDecryption,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryStrategy::ShadowRestore => "shadow_restore",
            RecoveryStrategy::Undelete => "undelete",
            RecoveryStrategy::PayloadKeyExtraction => "payload_key_extraction",
            RecoveryStrategy::ResidueKeyRecovery => "residue_key_recovery",
            RecoveryStrategy::AttackerKeyDecryption => "attacker_key_decryption",
        }
    }
}

impl fmt::Display for RecoveryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ==== prediction =============================================================

/// A category's recoverability claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub category: Category,
    /// Victim-side strategies expected to reach full recovery on their own.
    pub strategies: Vec<RecoveryStrategy>,
    /// Whether full recovery is expected to require the attacker's keys.
    pub ransom_required: bool,
    /// Whether leftover key residue, when the structure leaves any, can
    /// substitute for the listed strategies.
    pub residue_fallback: bool,
}

impl Prediction {
    /// The strategies to actually attempt when validating the claim: the
    /// claimed set plus the residue fallback where one is marked.
    pub fn strategy_set(&self) -> Vec<RecoveryStrategy> {
        let mut set = self.strategies.clone();
        if self.residue_fallback && !set.contains(&RecoveryStrategy::ResidueKeyRecovery) {
            set.push(RecoveryStrategy::ResidueKeyRecovery);
        }
        set.sort_unstable();
        set.dedup();
        set
    }
}

/// What each category claims about recovery without the attacker.
pub fn predict_recoverability(category: Category) -> Prediction {
    let (strategies, ransom_required, residue_fallback): (Vec<RecoveryStrategy>, bool, bool) =
        match category {
            // No encryption and no destructive overwrite behind the threats:
            // plain undeletion brings everything back.
            Category::Cat1 => (vec![RecoveryStrategy::Undelete], false, false),
            // Encryption without deletion: the originals (or their snapshot
            // copies) are still there.
            Category::Cat2 => {
                (vec![RecoveryStrategy::ShadowRestore, RecoveryStrategy::Undelete], false, false)
            }
            // Deletion is real, but the governing symmetric key is on the
            // victim: in the payload, or as residue when locally generated.
            Category::Cat3 => (vec![RecoveryStrategy::PayloadKeyExtraction], false, true),
            // Deletion with the governing secret off-victim: nothing works
            // without the attacker's key.
            Category::Cat4 => (vec![], true, false),
            // Hybrid deletion: same ransom dependence, except when sloppy key
            // handling leaves wrapped-chain secrets behind.
            Category::Cat5 => (vec![], true, true),
        };
    Prediction { category, strategies, ransom_required, residue_fallback }
}

// ==== attempt report =========================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileOutcome {
    /// Content recovered bit-exact against the pre-attack baseline.
    RecoveredExact,
    /// Some content recovered but it differs from the baseline.
    RecoveredStale,
    Unrecovered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileReport {
    pub path: String,
    pub outcome: FileOutcome,
    /// Strategy that produced the best outcome; `None` when the file never
    /// needed recovering (or nothing worked).
    pub strategy: Option<RecoveryStrategy>,
    /// Baseline size in bytes — the file's weight in the fraction.
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub scenario_id: String,
    pub strategies_attempted: Vec<RecoveryStrategy>,
    /// Strategies that produced at least one bit-exact recovery.
    pub strategies_succeeded: Vec<RecoveryStrategy>,
    pub files: Vec<FileReport>,
    pub recovered_bytes: u64,
    pub total_bytes: u64,
    /// Byte-weighted fraction of target content recovered bit-exact.
    pub fraction: f64,
}

impl RecoveryReport {
    pub fn complete(&self) -> bool {
        self.files.iter().all(|f| f.outcome == FileOutcome::RecoveredExact)
    }
}

// ==== attempt machinery ======================================================

/// Per-target working state during an attempt.
struct Pending<'a> {
    path: &'a str,
    baseline: &'a [u8],
    outcome: FileOutcome,
    strategy: Option<RecoveryStrategy>,
}

impl Pending<'_> {
    fn offer(&mut self, bytes: &[u8], strategy: RecoveryStrategy) -> bool {
        if self.outcome == FileOutcome::RecoveredExact {
            return false;
        }
        if bytes == self.baseline {
            self.outcome = FileOutcome::RecoveredExact;
            self.strategy = Some(strategy);
            true
        } else {
            if self.outcome == FileOutcome::Unrecovered {
                self.outcome = FileOutcome::RecoveredStale;
                self.strategy = Some(strategy);
            }
            false
        }
    }
}

/// Key material gathered by one strategy.
#[derive(Default)]
struct KeyPool {
    sym: BTreeMap<String, SymKey>,
    private: BTreeMap<String, PrivateKey>,
}

impl KeyPool {
    fn absorb(&mut self, material: KeyMaterial) -> bool {
        match material {
            KeyMaterial::Sym(k) => {
                self.sym.insert(k.key_id.0.clone(), k).is_none()
            }
            KeyMaterial::Private(k) => {
                self.private.insert(k.pair_id.0.clone(), k).is_none()
            }
            // Public halves cannot decrypt anything.
            KeyMaterial::Public(_) => false,
        }
    }

    fn is_empty(&self) -> bool {
        self.sym.is_empty() && self.private.is_empty()
    }

    fn try_unwrap(&self, bytes: &[u8], label: &str) -> Option<KeyMaterial> {
        let blob = CipherBlob {
            blob_id: label.to_string(),
            producer: BlobProducer::KeyWrap,
            bytes: bytes.to_vec(),
        };
        self.private.values().find_map(|key| unwrap_key(&blob, key).ok())
    }

    /// Walk wrapped-key containers left on the filesystem, unwrapping
    /// whatever the pool's private keys reach, until no new material turns
    /// up. This is what turns a master private key into the per-file chain.
    fn expand_via_containers(&mut self, image: &AttackImage) {
        loop {
            let mut grew = false;
            for entry in image.fs.all_entries() {
                if !entry.path.ends_with(".eky") || entry.state != FileState::Live {
                    continue;
                }
                let Ok(container) = WrappedKeyFile::decode(&entry.content) else {
                    continue;
                };
                if let Some(material) = self.try_unwrap(&container.blob.bytes, &entry.path) {
                    grew |= self.absorb(material);
                }
            }
            if !grew {
                break;
            }
        }
    }

    /// Decrypt one envelope if the pool reaches its key (directly, or by
    /// unwrapping the envelope's own wrapped per-file key).
    fn open_envelope(&self, envelope: &FileEnvelope) -> Option<Vec<u8>> {
        match envelope.scheme {
            EnvelopeScheme::Sym => {
                if let Some(key) = self.sym.get(&envelope.key_id) {
                    return sym_decrypt(key, &envelope.ciphertext).ok();
                }
                if !envelope.wrapped_key.is_empty() {
                    if let Some(KeyMaterial::Sym(key)) =
                        self.try_unwrap(&envelope.wrapped_key, &envelope.key_id)
                    {
                        if key.key_id.0 == envelope.key_id {
                            return sym_decrypt(&key, &envelope.ciphertext).ok();
                        }
                    }
                }
                None
            }
            EnvelopeScheme::Asym => {
                let key = self.private.get(&envelope.key_id)?;
                asym_decrypt(key, &envelope.ciphertext).ok()
            }
        }
    }
}

/// Read a target's envelope off the image filesystem, if one exists.
fn envelope_for<'a>(image: &'a AttackImage, target: &str) -> Option<FileEnvelope> {
    let enc_path = image.artifacts.ciphertext_map.get(target)?;
    let entry = image.fs.entry(enc_path)?;
    if entry.state != FileState::Live {
        return None;
    }
    FileEnvelope::decode(&entry.content).ok()
}

fn decrypt_pass(image: &AttackImage, pool: &KeyPool, pending: &mut [Pending<'_>], strategy: RecoveryStrategy) -> bool {
    if pool.is_empty() {
        return false;
    }
    let mut any = false;
    for p in pending.iter_mut() {
        if p.outcome == FileOutcome::RecoveredExact {
            continue;
        }
        if let Some(envelope) = envelope_for(image, p.path) {
            if let Some(plain) = pool.open_envelope(&envelope) {
                any |= p.offer(&plain, strategy);
            }
        }
    }
    any
}

// ==== the attempt itself =====================================================

/// Run the given strategies (in canonical order, whatever order they were
/// passed in) against a stored attack image. `attacker_keys` models paying
/// the ransom and is only consulted by
/// [`RecoveryStrategy::AttackerKeyDecryption`].
pub fn attempt_recovery(
    image: &AttackImage,
    strategies: &[RecoveryStrategy],
    attacker_keys: Option<&AttackerKeySet>,
) -> RecoveryReport {
    let mut attempted: Vec<RecoveryStrategy> =
        RecoveryStrategy::ALL.into_iter().filter(|s| strategies.contains(s)).collect();
    attempted.dedup();

    let empty: &[u8] = &[];
    let mut pending: Vec<Pending<'_>> = image
        .artifacts
        .targets
        .iter()
        .map(|path| Pending {
            path,
            baseline: image.baseline.get(path).map(Vec::as_slice).unwrap_or(empty),
            outcome: FileOutcome::Unrecovered,
            strategy: None,
        })
        .collect();

    // Targets the attack left untouched (or merely re-readable) count as
    // recovered before any strategy runs.
    for p in pending.iter_mut() {
        if let Some(entry) = image.fs.entry(p.path) {
            if entry.state == FileState::Live && entry.content == p.baseline {
                p.outcome = FileOutcome::RecoveredExact;
            }
        }
    }

    let mut succeeded = Vec::new();
    for strategy in attempted.clone() {
        let progressed = match strategy {
            RecoveryStrategy::ShadowRestore => {
                let mut any = false;
                let mut snapshots: Vec<_> = image.fs.snapshots().iter().collect();
                snapshots.sort_by_key(|s| std::cmp::Reverse(s.taken_at));
                for snap in snapshots {
                    for p in pending.iter_mut() {
                        if let Some(content) = snap.files.get(p.path) {
                            any |= p.offer(content, strategy);
                        }
                    }
                }
                any
            }
            RecoveryStrategy::Undelete => {
                let mut any = false;
                for p in pending.iter_mut() {
                    if let Some(entry) = image.fs.entry(p.path) {
                        if entry.state == FileState::MetadataDeleted {
                            any |= p.offer(&entry.content.clone(), strategy);
                        }
                    }
                }
                any
            }
            RecoveryStrategy::PayloadKeyExtraction => {
                let mut pool = KeyPool::default();
                for (_, material) in scan_key_material(&image.artifacts.payload_image) {
                    pool.absorb(material);
                }
                pool.expand_via_containers(image);
                decrypt_pass(image, &pool, &mut pending, strategy)
            }
            RecoveryStrategy::ResidueKeyRecovery => {
                let mut pool = KeyPool::default();
                if let Some(entry) = image.fs.entry(KEY_DUMP_PATH) {
                    for (_, material) in scan_key_material(&entry.content) {
                        pool.absorb(material);
                    }
                }
                pool.expand_via_containers(image);
                decrypt_pass(image, &pool, &mut pending, strategy)
            }
            RecoveryStrategy::AttackerKeyDecryption => {
                let mut pool = KeyPool::default();
                if let Some(keys) = attacker_keys {
                    for k in &keys.sym_keys {
                        pool.absorb(KeyMaterial::Sym(k.clone()));
                    }
                    for k in &keys.private_keys {
                        pool.absorb(KeyMaterial::Private(k.clone()));
                    }
                }
                pool.expand_via_containers(image);
                decrypt_pass(image, &pool, &mut pending, strategy)
            }
        };
        if progressed {
            succeeded.push(strategy);
        }
    }

    let files: Vec<FileReport> = pending
        .iter()
        .map(|p| FileReport {
            path: p.path.to_string(),
            outcome: p.outcome,
            strategy: p.strategy,
            size: p.baseline.len() as u64,
        })
        .collect();
    let total_bytes: u64 = files.iter().map(|f| f.size).sum();
    let recovered_bytes: u64 = files
        .iter()
        .filter(|f| f.outcome == FileOutcome::RecoveredExact)
        .map(|f| f.size)
        .sum();
    let all_exact = files.iter().all(|f| f.outcome == FileOutcome::RecoveredExact);
    // Byte-weighted; a zero-byte target set counts as fully recovered only
    // when every target is.
    let fraction = if total_bytes == 0 {
        if all_exact {
            1.0
        } else {
            0.0
        }
    } else {
        recovered_bytes as f64 / total_bytes as f64
    };

    RecoveryReport {
        scenario_id: image.artifacts.scenario_id.clone(),
        strategies_attempted: attempted,
        strategies_succeeded: succeeded,
        files,
        recovered_bytes,
        total_bytes,
        fraction,
    }
}
