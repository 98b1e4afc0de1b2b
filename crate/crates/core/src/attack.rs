//! The attack executor: drives one scenario against a virtual filesystem,
//! producing the execution trace, the attack artifacts (payload image,
//! ransom note, exfiltrated blobs, residue), and the attacker-side key
//! escrow that a paid-ransom decryptor would be built from.
//!
//! Everything here is deterministic in the scenario seed: two runs of the
//! same scenario against the same filesystem produce byte-identical traces
//! and artifacts, which is what the golden-fixture tests pin down.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c2::{C2Error, C2Message, C2Transport, KeyScheme};
use crate::crypto::{
    asym_encrypt, encode_key_material, sym_encrypt, wrap_key, AsymKeyPair, CipherBlob,
    CryptoError, KeyForge, KeyMaterial, PrivateKey, PublicKey, SymKey,
};
use crate::scenario::{
    compile_glob, match_targets, AttackScenario, EncryptionStructure, KeyKind, KeyProvenance,
    KeySource, RemnantDeletion,
};
use crate::trace::{attrs, TraceKind, TraceLog};
use crate::util::{hex_bytes, hex_bytes_list};
use crate::vfs::{DeleteMode, VfsError, VirtualFS};

use rand::RngCore;

/// Path of the note dropped at the end of every run.
pub const RANSOM_NOTE_PATH: &str = "RANSOM_NOTE.txt";
/// Path of the incomplete-erasure key dump left by residue-configured runs.
pub const KEY_DUMP_PATH: &str = "tmp/keydump.bin";
/// Path of the wrapped sub-key container written by three-tier runs.
pub const WRAPPED_KEY_PATH: &str = "wrapped_key.eky";
/// Suffix appended to a target path to name its ciphertext envelope.
pub const ENCRYPTED_SUFFIX: &str = ".enc";

/// Shell line recorded for the snapshot-deletion step.
pub const SHADOW_DELETE_CMD: &str = "vssadmin delete shadows /all /quiet";

#[derive(Debug, Error)]
pub enum AttackError {
    /// The scenario itself is unusable (bad glob, inconsistent options).
    #[error("scenario configuration: {0}")]
    Config(String),
    /// Key provenance requires a C2 channel but none was supplied.
    #[error("key provenance requires a c2 channel but none is configured")]
    C2Missing,
    #[error("c2 channel: {0}")]
    C2(#[from] C2Error),
    #[error("virtual filesystem: {0}")]
    Vfs(#[from] VfsError),
    #[error("cipher failure: {0}")]
    Crypto(#[from] CryptoError),
}

// ==== on-disk artifact formats ==============================================

/// Magic prefix of a ciphertext envelope file (`<path>.enc`).
pub const ENVELOPE_MAGIC: &[u8; 4] = b"RENC";
/// Magic prefix of a wrapped-key container file (`wrapped_key.eky`).
pub const EKY_MAGIC: &[u8; 4] = b"RKEY";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArtifactError {
    #[error("malformed envelope: {0}")]
    Envelope(String),
    #[error("malformed wrapped-key container: {0}")]
    WrappedKey(String),
}

/// Which cipher family decrypts an envelope's ciphertext.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeScheme {
    Sym,
    Asym,
}

impl EnvelopeScheme {
    fn tag(self) -> u8 {
        match self {
            EnvelopeScheme::Sym => 1,
            EnvelopeScheme::Asym => 2,
        }
    }
}

/// A ciphertext envelope, the content of every `<path>.enc` file.
///
/// Layout: `RENC | scheme u8 | key_id u16-len+bytes | wrapped_key
/// u32-len+bytes | ciphertext u32-len+bytes`. `key_id` names the key whose
/// material decrypts `ciphertext`; `wrapped_key` (empty for single-key
/// structures) carries that key wrapped under the structure's wrapping
/// public key, which is what makes hybrid envelopes self-contained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEnvelope {
    pub scheme: EnvelopeScheme,
    pub key_id: String,
    pub wrapped_key: Vec<u8>,
    pub ciphertext: Vec<u8>,
}

impl FileEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ENVELOPE_MAGIC);
        out.push(self.scheme.tag());
        out.extend_from_slice(&(self.key_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.key_id.as_bytes());
        out.extend_from_slice(&(self.wrapped_key.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.wrapped_key);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let mut c = Take { bytes, at: 0, what: "envelope" };
        let magic = c.take(4).map_err(ArtifactError::Envelope)?;
        if magic != ENVELOPE_MAGIC {
            return Err(ArtifactError::Envelope("missing RENC magic".into()));
        }
        let scheme = match c.take_u8().map_err(ArtifactError::Envelope)? {
            1 => EnvelopeScheme::Sym,
            2 => EnvelopeScheme::Asym,
            other => return Err(ArtifactError::Envelope(format!("unknown scheme tag {other}"))),
        };
        let key_id = c.take_str16().map_err(ArtifactError::Envelope)?;
        let wrapped_key = c.take_vec32().map_err(ArtifactError::Envelope)?;
        let ciphertext = c.take_vec32().map_err(ArtifactError::Envelope)?;
        c.finish().map_err(ArtifactError::Envelope)?;
        Ok(FileEnvelope { scheme, key_id, wrapped_key, ciphertext })
    }
}

/// Content of the three-tier wrapped-key file: the sub private key wrapped
/// under the master public key, with both endpoints named.
///
/// Layout: `RKEY | wrap_of u16-len+bytes | wrap_by u16-len+bytes |
/// blob_id u16-len+bytes | blob u32-len+bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrappedKeyFile {
    pub wrap_of: String,
    pub wrap_by: String,
    pub blob: CipherBlob,
}

impl WrappedKeyFile {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(EKY_MAGIC);
        for s in [&self.wrap_of, &self.wrap_by, &self.blob.blob_id] {
            out.extend_from_slice(&(s.len() as u16).to_be_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.blob.bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.blob.bytes);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let mut c = Take { bytes, at: 0, what: "wrapped-key container" };
        let magic = c.take(4).map_err(ArtifactError::WrappedKey)?;
        if magic != EKY_MAGIC {
            return Err(ArtifactError::WrappedKey("missing RKEY magic".into()));
        }
        let wrap_of = c.take_str16().map_err(ArtifactError::WrappedKey)?;
        let wrap_by = c.take_str16().map_err(ArtifactError::WrappedKey)?;
        let blob_id = c.take_str16().map_err(ArtifactError::WrappedKey)?;
        let blob_bytes = c.take_vec32().map_err(ArtifactError::WrappedKey)?;
        c.finish().map_err(ArtifactError::WrappedKey)?;
        Ok(WrappedKeyFile {
            wrap_of,
            wrap_by,
            blob: CipherBlob {
                blob_id,
                producer: crate::crypto::BlobProducer::KeyWrap,
                bytes: blob_bytes,
            },
        })
    }
}

/// Bounds-checked byte reader shared by the artifact decoders.
struct Take<'a> {
    bytes: &'a [u8],
    at: usize,
    what: &'static str,
}

impl<'a> Take<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.at + n > self.bytes.len() {
            return Err(format!(
                "{} truncated: wanted {n} octets at offset {}, have {}",
                self.what,
                self.at,
                self.bytes.len()
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn take_u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn take_str16(&mut self) -> Result<String, String> {
        let len = u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| format!("{}: string field is not UTF-8", self.what))
    }

    fn take_vec32(&mut self) -> Result<Vec<u8>, String> {
        let len = u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as usize;
        Ok(self.take(len)?.to_vec())
    }

    fn finish(self) -> Result<(), String> {
        if self.at != self.bytes.len() {
            return Err(format!("{}: {} trailing octets", self.what, self.bytes.len() - self.at));
        }
        Ok(())
    }
}

// ==== outcome types =========================================================

/// Location of one key-material record embedded in the payload image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadKeyOffset {
    pub key_id: String,
    pub offset: usize,
    pub len: usize,
}

/// Everything the run leaves behind besides the filesystem mutations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackArtifacts {
    pub scenario_id: String,
    /// The simulated malware binary: seeded filler, plus any embedded key
    /// material at the recorded offsets.
    #[serde(with = "hex_bytes")]
    pub payload_image: Vec<u8>,
    pub payload_key_offsets: Vec<PayloadKeyOffset>,
    pub ransom_note: String,
    /// Key-wrap blobs shipped to the C2 (empty when no channel was present).
    pub exfiltrated_blobs: Vec<CipherBlob>,
    /// Serialized key material left on the victim by residue-configured
    /// runs; mirrors the content of `tmp/keydump.bin`.
    #[serde(with = "hex_bytes_list")]
    pub victim_residue: Vec<Vec<u8>>,
    /// Original path -> envelope path, for every encrypted target.
    pub ciphertext_map: BTreeMap<String, String>,
    /// The matched target set, in processing order.
    pub targets: Vec<String>,
}

/// Keys the attacker side holds after the run: what a purchased decryptor
/// would be built from. For hybrid structures this is only the master
/// secret, so recovery has to walk the real unwrap chain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerKeySet {
    pub sym_keys: Vec<SymKey>,
    pub private_keys: Vec<PrivateKey>,
}

impl AttackerKeySet {
    pub fn is_empty(&self) -> bool {
        self.sym_keys.is_empty() && self.private_keys.is_empty()
    }

    /// Merge key material (e.g. a C2 endpoint's escrow) into the set.
    /// Public halves carry no decryption power and are dropped.
    pub fn merge_material(&mut self, materials: &[KeyMaterial]) {
        for m in materials {
            match m {
                KeyMaterial::Sym(k) => {
                    if !self.sym_keys.contains(k) {
                        self.sym_keys.push(k.clone());
                    }
                }
                KeyMaterial::Private(k) => {
                    if !self.private_keys.contains(k) {
                        self.private_keys.push(k.clone());
                    }
                }
                KeyMaterial::Public(_) => {}
            }
        }
    }
}

/// The full result of one executed scenario.
#[derive(Debug)]
pub struct AttackOutcome {
    pub trace: TraceLog,
    pub artifacts: AttackArtifacts,
    pub attacker_keys: AttackerKeySet,
}

/// Envelope path for a target path.
pub fn envelope_path(target: &str) -> String {
    format!("{target}{ENCRYPTED_SUFFIX}")
}

// ==== executor ==============================================================

struct Exec<'a, 'c> {
    scenario: &'a AttackScenario,
    trace: TraceLog,
    forge: KeyForge,
    payload: Vec<u8>,
    payload_key_offsets: Vec<PayloadKeyOffset>,
    c2: Option<&'c mut (dyn C2Transport + 'c)>,
    beaconed: bool,
    ct_count: u32,
    wrap_count: u32,
}

impl Exec<'_, '_> {
    fn next_ct_id(&mut self) -> String {
        let id = format!("ct{:04}", self.ct_count);
        self.ct_count += 1;
        id
    }

    fn next_wrap_id(&mut self) -> String {
        let id = format!("wr{:04}", self.wrap_count);
        self.wrap_count += 1;
        id
    }

    /// Push one serialized key-material record into the payload image and
    /// record its offset.
    fn embed_in_payload(&mut self, material: &KeyMaterial) -> usize {
        let encoded = encode_key_material(material);
        let offset = self.payload.len();
        self.payload_key_offsets.push(PayloadKeyOffset {
            key_id: material.key_id().0.clone(),
            offset,
            len: encoded.len(),
        });
        self.payload.extend_from_slice(&encoded);
        offset
    }

    /// One C2 exchange, preceded by a BEACON on first contact.
    fn c2_roundtrip(&mut self, msg: &C2Message) -> Result<C2Message, AttackError> {
        let transport = self.c2.as_deref_mut().ok_or(AttackError::C2Missing)?;
        if !self.beaconed {
            self.beaconed = true;
            let reply = transport
                .roundtrip(&C2Message::Beacon { sample_id: self.scenario.scenario_id.clone() })?;
            if reply != C2Message::Ack {
                return Err(AttackError::C2(C2Error::Protocol(
                    "beacon was not acknowledged".into(),
                )));
            }
        }
        Ok(transport.roundtrip(msg)?)
    }

    fn fetch_key(&mut self, scheme: KeyScheme) -> Result<KeyMaterial, AttackError> {
        let request = C2Message::KeyRequest {
            sample_id: self.scenario.scenario_id.clone(),
            scheme,
        };
        match self.c2_roundtrip(&request)? {
            C2Message::KeyResponse { material } => {
                let (decoded, consumed) = crate::crypto::decode_key_material(&material)?;
                if consumed != material.len() {
                    return Err(AttackError::C2(C2Error::Protocol(
                        "trailing octets after issued key material".into(),
                    )));
                }
                Ok(decoded)
            }
            _ => Err(AttackError::C2(C2Error::Protocol(
                "key request was not answered with a key response".into(),
            ))),
        }
    }

    /// Acquire a symmetric governing key per provenance.
    fn acquire_sym(&mut self, provenance: &KeyProvenance) -> Result<SymKey, AttackError> {
        match provenance.source {
            KeySource::LocalGeneration => {
                let key = self.forge.sym_key();
                self.trace.push(
                    TraceKind::KeyGen,
                    attrs(&[("key_id", &key.key_id.0), ("key_kind", "symmetric")]),
                );
                Ok(key)
            }
            KeySource::PayloadEmbedded => {
                let key = self.forge.sym_key();
                let offset = self.embed_in_payload(&KeyMaterial::Sym(key.clone()));
                self.trace.push(
                    TraceKind::EmbeddedKeyRead,
                    attrs(&[
                        ("key_id", &key.key_id.0),
                        ("key_kind", "symmetric"),
                        ("offset", &offset.to_string()),
                    ]),
                );
                Ok(key)
            }
            KeySource::C2Download => {
                let material = self.fetch_key(KeyScheme::Symmetric)?;
                let KeyMaterial::Sym(key) = material else {
                    return Err(AttackError::C2(C2Error::Protocol(
                        "asked for a symmetric key, got something else".into(),
                    )));
                };
                self.trace.push(
                    TraceKind::NetFetchKey,
                    attrs(&[("key_id", &key.key_id.0), ("key_kind", "symmetric")]),
                );
                Ok(key)
            }
        }
    }

    /// Acquire an asymmetric master per provenance. The private half is
    /// returned separately: `on_victim` when the pair was generated locally,
    /// `attacker` when the executor-side attacker knows it at all.
    fn acquire_pair(
        &mut self,
        provenance: &KeyProvenance,
    ) -> Result<(PublicKey, Option<PrivateKey>, Option<PrivateKey>), AttackError> {
        match provenance.source {
            KeySource::LocalGeneration => {
                let AsymKeyPair { public, private, .. } = self.forge.asym_pair();
                self.trace.push(
                    TraceKind::KeyGen,
                    attrs(&[("key_id", &public.pair_id.0), ("key_kind", "asymmetric")]),
                );
                // Generated on the victim; the ransom flow ships it to the
                // attacker, so both sides hold it.
                Ok((public, Some(private.clone()), Some(private)))
            }
            KeySource::PayloadEmbedded => {
                let AsymKeyPair { public, private, .. } = self.forge.asym_pair();
                let offset = self.embed_in_payload(&KeyMaterial::Public(public.clone()));
                self.trace.push(
                    TraceKind::EmbeddedKeyRead,
                    attrs(&[
                        ("key_id", &public.pair_id.0),
                        ("key_kind", "asymmetric"),
                        ("offset", &offset.to_string()),
                    ]),
                );
                // Only the public half ships in the payload.
                Ok((public, None, Some(private)))
            }
            KeySource::C2Download => {
                let material = self.fetch_key(KeyScheme::AsymmetricPublic)?;
                let KeyMaterial::Public(public) = material else {
                    return Err(AttackError::C2(C2Error::Protocol(
                        "asked for a public key, got something else".into(),
                    )));
                };
                self.trace.push(
                    TraceKind::NetFetchKey,
                    attrs(&[("key_id", &public.pair_id.0), ("key_kind", "asymmetric")]),
                );
                // The private half never leaves the C2 (merge its escrow to
                // obtain it).
                Ok((public, None, None))
            }
        }
    }
}

/// Run `scenario` against `fs`. A C2 transport is required only when the key
/// provenance downloads from one, but when present it also receives the
/// wrap-blob exfiltration of hybrid runs.
pub fn execute_attack(
    scenario: &AttackScenario,
    fs: &mut VirtualFS,
    c2: Option<&mut dyn C2Transport>,
) -> Result<AttackOutcome, AttackError> {
    let pattern = compile_glob(&scenario.target_glob).map_err(|e| AttackError::Config(e.to_string()))?;
    let targets = match_targets(fs, &pattern);
    // Key acquisition is lazy, so the channel is only required when some
    // target actually forces a download.
    if !targets.is_empty() && scenario.encryption.uses_c2_download() && c2.is_none() {
        return Err(AttackError::C2Missing);
    }

    let mut payload_rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed ^ 0x7061_796c_6f61_6431);
    let mut payload = vec![0u8; 256];
    payload_rng.fill_bytes(&mut payload);

    let mut exec = Exec {
        scenario,
        trace: TraceLog::new(&scenario.scenario_id),
        forge: KeyForge::new(scenario.rng_seed),
        payload,
        payload_key_offsets: Vec::new(),
        c2,
        beaconed: false,
        ct_count: 0,
        wrap_count: 0,
    };

    let mut attacker_keys = AttackerKeySet::default();
    let mut ciphertext_map = BTreeMap::new();
    // (blob, wrap_of, wrap_by) for every produced key wrap, in order.
    let mut wrap_blobs: Vec<(CipherBlob, String, String)> = Vec::new();
    let mut residue_materials: Vec<KeyMaterial> = Vec::new();

    // Key acquisition is lazy: a run that matched nothing touches no keys.
    if !targets.is_empty() {
        match &scenario.encryption {
            EncryptionStructure::NoEncryption => {}

            EncryptionStructure::SingleKey { kind: KeyKind::Symmetric, provenance } => {
                let key = exec.acquire_sym(provenance)?;
                attacker_keys.sym_keys.push(key.clone());
                if provenance.residue_left_on_victim {
                    residue_materials.push(KeyMaterial::Sym(key.clone()));
                }
                for path in &targets {
                    let content = fs.read_file(path)?.to_vec();
                    exec.trace.push(TraceKind::FileRead, attrs(&[("path", path)]));
                    let ciphertext = sym_encrypt(&key, &content)?;
                    let envelope = FileEnvelope {
                        scheme: EnvelopeScheme::Sym,
                        key_id: key.key_id.0.clone(),
                        wrapped_key: Vec::new(),
                        ciphertext,
                    };
                    write_envelope(&mut exec, fs, path, &envelope, &key.key_id.0, None)?;
                    ciphertext_map.insert(path.clone(), envelope_path(path));
                }
            }

            EncryptionStructure::SingleKey { kind: KeyKind::Asymmetric, provenance } => {
                let (public, on_victim, attacker_private) = exec.acquire_pair(provenance)?;
                if let Some(private) = attacker_private {
                    attacker_keys.private_keys.push(private);
                }
                if provenance.residue_left_on_victim {
                    // Residue captures what was locally present: the private
                    // half when generated here, otherwise just the public.
                    residue_materials.push(match on_victim {
                        Some(private) => KeyMaterial::Private(private),
                        None => KeyMaterial::Public(public.clone()),
                    });
                }
                for path in &targets {
                    let content = fs.read_file(path)?.to_vec();
                    exec.trace.push(TraceKind::FileRead, attrs(&[("path", path)]));
                    let ciphertext = asym_encrypt(&public, &content)?;
                    let envelope = FileEnvelope {
                        scheme: EnvelopeScheme::Asym,
                        key_id: public.pair_id.0.clone(),
                        wrapped_key: Vec::new(),
                        ciphertext,
                    };
                    write_envelope(&mut exec, fs, path, &envelope, &public.pair_id.0, None)?;
                    ciphertext_map.insert(path.clone(), envelope_path(path));
                }
            }

            EncryptionStructure::HybridPerFile { master_provenance } => {
                let (master_public, _on_victim, attacker_private) =
                    exec.acquire_pair(master_provenance)?;
                if let Some(private) = attacker_private {
                    attacker_keys.private_keys.push(private);
                }
                for path in &targets {
                    let file_key = exec.forge.sym_key();
                    exec.trace.push(
                        TraceKind::KeyGen,
                        attrs(&[("key_id", &file_key.key_id.0), ("key_kind", "symmetric")]),
                    );
                    if master_provenance.residue_left_on_victim {
                        residue_materials.push(KeyMaterial::Sym(file_key.clone()));
                    }
                    let content = fs.read_file(path)?.to_vec();
                    exec.trace.push(TraceKind::FileRead, attrs(&[("path", path)]));
                    let ciphertext = sym_encrypt(&file_key, &content)?;
                    let wrap_id = exec.next_wrap_id();
                    let wrap = wrap_key(
                        &KeyMaterial::Sym(file_key.clone()),
                        &master_public,
                        &wrap_id,
                    )?;
                    let envelope = FileEnvelope {
                        scheme: EnvelopeScheme::Sym,
                        key_id: file_key.key_id.0.clone(),
                        wrapped_key: wrap.bytes.clone(),
                        ciphertext,
                    };
                    write_envelope(
                        &mut exec,
                        fs,
                        path,
                        &envelope,
                        &file_key.key_id.0,
                        Some((&file_key.key_id.0, &master_public.pair_id.0)),
                    )?;
                    wrap_blobs.push((
                        wrap,
                        file_key.key_id.0.clone(),
                        master_public.pair_id.0.clone(),
                    ));
                    ciphertext_map.insert(path.clone(), envelope_path(path));
                }
            }

            EncryptionStructure::HybridThreeTier { master_provenance } => {
                let (master_public, _on_victim, attacker_private) =
                    exec.acquire_pair(master_provenance)?;
                if let Some(private) = attacker_private {
                    attacker_keys.private_keys.push(private);
                }
                let sub = exec.forge.asym_pair();
                exec.trace.push(
                    TraceKind::KeyGen,
                    attrs(&[
                        ("key_id", &sub.pair_id.0),
                        ("key_kind", "asymmetric"),
                        ("role", "sub"),
                    ]),
                );
                if master_provenance.residue_left_on_victim {
                    residue_materials.push(KeyMaterial::Private(sub.private.clone()));
                }
                for path in &targets {
                    let file_key = exec.forge.sym_key();
                    exec.trace.push(
                        TraceKind::KeyGen,
                        attrs(&[("key_id", &file_key.key_id.0), ("key_kind", "symmetric")]),
                    );
                    let content = fs.read_file(path)?.to_vec();
                    exec.trace.push(TraceKind::FileRead, attrs(&[("path", path)]));
                    let ciphertext = sym_encrypt(&file_key, &content)?;
                    let wrap_id = exec.next_wrap_id();
                    let wrap =
                        wrap_key(&KeyMaterial::Sym(file_key.clone()), &sub.public, &wrap_id)?;
                    let envelope = FileEnvelope {
                        scheme: EnvelopeScheme::Sym,
                        key_id: file_key.key_id.0.clone(),
                        wrapped_key: wrap.bytes.clone(),
                        ciphertext,
                    };
                    write_envelope(
                        &mut exec,
                        fs,
                        path,
                        &envelope,
                        &file_key.key_id.0,
                        Some((&file_key.key_id.0, &sub.pair_id.0)),
                    )?;
                    wrap_blobs.push((wrap, file_key.key_id.0.clone(), sub.pair_id.0.clone()));
                    ciphertext_map.insert(path.clone(), envelope_path(path));
                }
                // The sub private key exists only wrapped under the master:
                // the WannaCry-style key file.
                let eky_id = exec.next_wrap_id();
                let eky_wrap =
                    wrap_key(&KeyMaterial::Private(sub.private.clone()), &master_public, &eky_id)?;
                let container = WrappedKeyFile {
                    wrap_of: sub.pair_id.0.clone(),
                    wrap_by: master_public.pair_id.0.clone(),
                    blob: eky_wrap.clone(),
                };
                fs.write_file(WRAPPED_KEY_PATH, &container.encode())?;
                exec.trace.push(
                    TraceKind::FileWrite,
                    attrs(&[
                        ("path", WRAPPED_KEY_PATH),
                        ("wrap_of", &sub.pair_id.0),
                        ("wrap_by", &master_public.pair_id.0),
                        ("blob_id", &eky_wrap.blob_id),
                    ]),
                );
                wrap_blobs.push((eky_wrap, sub.pair_id.0.clone(), master_public.pair_id.0.clone()));
            }
        }
    }

    // Exfiltrate every key-wrap blob when a channel exists.
    let mut exfiltrated = Vec::new();
    if exec.c2.is_some() {
        for (blob, wrap_of, wrap_by) in &wrap_blobs {
            let reply = exec.c2_roundtrip(&C2Message::Exfil { blob: blob.clone() })?;
            if reply != C2Message::Ack {
                return Err(AttackError::C2(C2Error::Protocol(
                    "exfil was not acknowledged".into(),
                )));
            }
            exec.trace.push(
                TraceKind::NetExfil,
                attrs(&[
                    ("blob_id", &blob.blob_id),
                    ("wrap_of", wrap_of),
                    ("wrap_by", wrap_by),
                ]),
            );
            exfiltrated.push(blob.clone());
        }
    }

    // Incomplete-erasure residue dump.
    let mut victim_residue = Vec::new();
    if !residue_materials.is_empty() {
        let mut dump = Vec::new();
        let mut ids = Vec::new();
        for material in &residue_materials {
            let encoded = encode_key_material(material);
            dump.extend_from_slice(&encoded);
            victim_residue.push(encoded);
            ids.push(material.key_id().0.clone());
        }
        fs.write_file(KEY_DUMP_PATH, &dump)?;
        exec.trace.push(
            TraceKind::FileWrite,
            attrs(&[("path", KEY_DUMP_PATH), ("key_material", &ids.join(","))]),
        );
    }

    // Remnant deletion of the originals. A no-encryption run never destroys
    // content: an overwrite config degrades to a metadata-only delete (the
    // scareware fake-delete), keeping its files undelete-recoverable.
    let effective_delete = match (&scenario.encryption, scenario.remnant_deletion) {
        (_, RemnantDeletion::None) => None,
        (EncryptionStructure::NoEncryption, _) => Some(DeleteMode::MetadataOnly),
        (_, RemnantDeletion::MetadataOnly) => Some(DeleteMode::MetadataOnly),
        (_, RemnantDeletion::OverwriteRandom) => Some(DeleteMode::OverwriteRandom),
    };
    if let Some(mode) = effective_delete {
        let mut noise = ChaCha8Rng::seed_from_u64(scenario.rng_seed ^ 0x6e6f_6973_6530_3031);
        for path in &targets {
            fs.delete_file(path, mode, &mut noise)?;
            exec.trace.push(
                TraceKind::FileDelete,
                attrs(&[("path", path), ("delete_mode", &mode.to_string())]),
            );
        }
    }

    // Snapshot destruction.
    if scenario.delete_shadow_copies {
        exec.trace.push(TraceKind::ProcExec, attrs(&[("cmd", SHADOW_DELETE_CMD)]));
        let count = fs.delete_shadow_copies();
        exec.trace.push(TraceKind::ShadowDelete, attrs(&[("count", &count.to_string())]));
    }

    // Drop the note.
    let ransom_note = format!(
        "-- SIMULATED RANSOM NOTE --\n\
         scenario: {}\n\
         Your files were processed inside a contained laboratory filesystem.\n\
         This note is synthetic output from an attack-structure simulation;\n\
         no real data was touched and no payment channel exists.\n",
        scenario.scenario_id
    );
    fs.write_file(RANSOM_NOTE_PATH, ransom_note.as_bytes())?;
    exec.trace.push(TraceKind::NoteWrite, attrs(&[("path", RANSOM_NOTE_PATH)]));

    // Seal the payload image with trailing filler.
    let mut tail = vec![0u8; 128];
    payload_rng.fill_bytes(&mut tail);
    exec.payload.extend_from_slice(&tail);

    let artifacts = AttackArtifacts {
        scenario_id: scenario.scenario_id.clone(),
        payload_image: exec.payload,
        payload_key_offsets: exec.payload_key_offsets,
        ransom_note,
        exfiltrated_blobs: exfiltrated,
        victim_residue,
        ciphertext_map,
        targets,
    };

    Ok(AttackOutcome { trace: exec.trace, artifacts, attacker_keys })
}

/// Write one envelope file and emit its FILE_WRITE event.
fn write_envelope(
    exec: &mut Exec<'_, '_>,
    fs: &mut VirtualFS,
    target: &str,
    envelope: &FileEnvelope,
    enc_key_id: &str,
    wrap: Option<(&str, &str)>,
) -> Result<(), AttackError> {
    let out_path = envelope_path(target);
    fs.write_file(&out_path, &envelope.encode())?;
    let blob_id = exec.next_ct_id();
    let mut pairs = vec![
        ("path", out_path.as_str()),
        ("src", target),
        ("enc_key_id", enc_key_id),
        ("blob_id", blob_id.as_str()),
    ];
    if let Some((wrap_of, wrap_by)) = wrap {
        pairs.push(("wrap_of", wrap_of));
        pairs.push(("wrap_by", wrap_by));
    }
    exec.trace.push(TraceKind::FileWrite, attrs(&pairs));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c2::InProcC2;
    use crate::crypto::{sym_decrypt, unwrap_key};
    use crate::scenario::default_demo_files;
    use crate::trace::TraceKind as K;
    use crate::vfs::FileState;

    fn demo_fs() -> VirtualFS {
        let mut fs = VirtualFS::create(&default_demo_files()).unwrap();
        fs.take_shadow_snapshot();
        fs
    }

    fn scenario(encryption: EncryptionStructure) -> AttackScenario {
        AttackScenario {
            scenario_id: "unit".into(),
            encryption,
            delete_shadow_copies: true,
            remnant_deletion: RemnantDeletion::OverwriteRandom,
            target_glob: "docs/**/*".into(),
            rng_seed: 42,
        }
    }

    fn kinds(trace: &TraceLog) -> Vec<TraceKind> {
        trace.events.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn single_sym_localgen_full_shape() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::SingleKey {
            kind: KeyKind::Symmetric,
            provenance: KeyProvenance::new(KeySource::LocalGeneration),
        });
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        // 4 targets under docs/.
        assert_eq!(outcome.artifacts.targets.len(), 4);
        let ks = kinds(&outcome.trace);
        assert_eq!(ks[0], K::KeyGen);
        assert_eq!(ks.iter().filter(|k| **k == K::FileRead).count(), 4);
        assert_eq!(ks.iter().filter(|k| **k == K::FileDelete).count(), 4);
        assert!(ks.contains(&K::ProcExec) && ks.contains(&K::ShadowDelete));
        assert_eq!(*ks.last().unwrap(), K::NoteWrite);

        // Envelopes decrypt back to the original bytes with the escrow key.
        let key = &outcome.attacker_keys.sym_keys[0];
        let envelope =
            FileEnvelope::decode(fs.read_file("docs/notes.md.enc").unwrap()).unwrap();
        assert_eq!(envelope.scheme, EnvelopeScheme::Sym);
        assert!(envelope.wrapped_key.is_empty());
        let plain = sym_decrypt(key, &envelope.ciphertext).unwrap();
        assert!(!plain.is_empty());

        // Originals are overwritten, not just unlinked.
        assert_eq!(fs.entry("docs/notes.md").unwrap().state, FileState::Overwritten);
        // No residue without the residue flag.
        assert!(fs.entry(KEY_DUMP_PATH).is_none());
        assert!(outcome.artifacts.victim_residue.is_empty());
        // Note landed.
        assert!(fs.read_file(RANSOM_NOTE_PATH).is_ok());
    }

    #[test]
    fn no_encryption_overwrite_degrades_to_metadata_delete() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::NoEncryption);
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        // Files vanish from the listing but keep their bytes.
        let entry = fs.entry("docs/notes.md").unwrap();
        assert_eq!(entry.state, FileState::MetadataDeleted);
        for e in &outcome.trace.events {
            if e.kind == K::FileDelete {
                assert_eq!(e.attrs["delete_mode"], "metadata_only");
            }
        }
        // No key events at all.
        assert!(!kinds(&outcome.trace).iter().any(|k| matches!(
            k,
            K::KeyGen | K::EmbeddedKeyRead | K::NetFetchKey
        )));
        assert!(outcome.attacker_keys.is_empty());
    }

    #[test]
    fn c2_download_without_channel_aborts() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::SingleKey {
            kind: KeyKind::Symmetric,
            provenance: KeyProvenance::new(KeySource::C2Download),
        });
        assert!(matches!(execute_attack(&sc, &mut fs, None), Err(AttackError::C2Missing)));
    }

    #[test]
    fn c2_download_fetches_and_traces() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::SingleKey {
            kind: KeyKind::Symmetric,
            provenance: KeyProvenance::new(KeySource::C2Download),
        });
        let mut c2 = InProcC2::new(sc.rng_seed);
        let outcome = execute_attack(&sc, &mut fs, Some(&mut c2)).unwrap();
        assert!(kinds(&outcome.trace).contains(&K::NetFetchKey));
        // The issued key went straight into the attacker set too.
        assert_eq!(outcome.attacker_keys.sym_keys.len(), 1);
        assert!(outcome.attacker_keys.sym_keys[0].key_id.0.starts_with("c2-"));
        // No wraps in a single-key run, so nothing exfiltrated.
        assert!(outcome.artifacts.exfiltrated_blobs.is_empty());
    }

    #[test]
    fn hybrid_per_file_chain_decrypts_via_master() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::HybridPerFile {
            master_provenance: KeyProvenance::new(KeySource::PayloadEmbedded),
        });
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        // One per-file KEYGEN per target.
        let keygen = outcome.trace.events.iter().filter(|e| e.kind == K::KeyGen).count();
        assert_eq!(keygen, outcome.artifacts.targets.len());
        // Attacker holds only the master private key.
        assert!(outcome.attacker_keys.sym_keys.is_empty());
        assert_eq!(outcome.attacker_keys.private_keys.len(), 1);
        let master = &outcome.attacker_keys.private_keys[0];
        // Unwrap chain: envelope wrap -> per-file key -> plaintext.
        let envelope =
            FileEnvelope::decode(fs.read_file("docs/budget.xlsx.enc").unwrap()).unwrap();
        assert!(!envelope.wrapped_key.is_empty());
        let blob = CipherBlob {
            blob_id: "probe".into(),
            producer: crate::crypto::BlobProducer::KeyWrap,
            bytes: envelope.wrapped_key.clone(),
        };
        let KeyMaterial::Sym(file_key) = unwrap_key(&blob, master).unwrap() else {
            panic!("expected a symmetric per-file key");
        };
        assert_eq!(file_key.key_id.0, envelope.key_id);
        sym_decrypt(&file_key, &envelope.ciphertext).unwrap();
        // Payload embeds the master public key at the recorded offset.
        let off = &outcome.artifacts.payload_key_offsets[0];
        let (material, _) = crate::crypto::decode_key_material(
            &outcome.artifacts.payload_image[off.offset..],
        )
        .unwrap();
        assert!(matches!(material, KeyMaterial::Public(_)));
    }

    #[test]
    fn hybrid_exfiltrates_every_wrap_when_channel_present() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::HybridPerFile {
            master_provenance: KeyProvenance::new(KeySource::LocalGeneration),
        });
        let mut c2 = InProcC2::new(9);
        let outcome = execute_attack(&sc, &mut fs, Some(&mut c2)).unwrap();
        let n = outcome.artifacts.targets.len();
        assert_eq!(outcome.artifacts.exfiltrated_blobs.len(), n);
        assert_eq!(c2.state().received_blobs().len(), n);
        let exfil_events =
            outcome.trace.events.iter().filter(|e| e.kind == K::NetExfil).count();
        assert_eq!(exfil_events, n);
    }

    #[test]
    fn three_tier_writes_one_wrapped_key_file() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::HybridThreeTier {
            master_provenance: KeyProvenance::new(KeySource::PayloadEmbedded),
        });
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        let container = WrappedKeyFile::decode(fs.read_file(WRAPPED_KEY_PATH).unwrap()).unwrap();
        // Chain: master private unwraps the sub private, which unwraps a
        // per-file key, which decrypts the file.
        let master = &outcome.attacker_keys.private_keys[0];
        let KeyMaterial::Private(sub_private) = unwrap_key(&container.blob, master).unwrap()
        else {
            panic!("eky must wrap the sub private key");
        };
        assert_eq!(sub_private.pair_id.0, container.wrap_of);
        let envelope =
            FileEnvelope::decode(fs.read_file("docs/notes.md.enc").unwrap()).unwrap();
        let blob = CipherBlob {
            blob_id: "probe".into(),
            producer: crate::crypto::BlobProducer::KeyWrap,
            bytes: envelope.wrapped_key.clone(),
        };
        let KeyMaterial::Sym(file_key) = unwrap_key(&blob, &sub_private).unwrap() else {
            panic!("envelope must wrap a per-file key");
        };
        sym_decrypt(&file_key, &envelope.ciphertext).unwrap();
        // Exactly one eky write event.
        let eky_writes = outcome
            .trace
            .events
            .iter()
            .filter(|e| e.kind == K::FileWrite && e.attrs.get("path").map(String::as_str) == Some(WRAPPED_KEY_PATH))
            .count();
        assert_eq!(eky_writes, 1);
    }

    #[test]
    fn residue_dump_holds_the_governing_secret() {
        let mut fs = demo_fs();
        let sc = scenario(EncryptionStructure::SingleKey {
            kind: KeyKind::Symmetric,
            provenance: KeyProvenance::with_residue(KeySource::LocalGeneration),
        });
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        let dump = fs.read_file(KEY_DUMP_PATH).unwrap();
        let (material, consumed) = crate::crypto::decode_key_material(dump).unwrap();
        assert_eq!(consumed, dump.len());
        let KeyMaterial::Sym(key) = material else { panic!("dump must hold the sym key") };
        assert_eq!(key, outcome.attacker_keys.sym_keys[0]);
        assert_eq!(outcome.artifacts.victim_residue.len(), 1);
    }

    #[test]
    fn zero_target_run_touches_no_keys() {
        let mut fs = demo_fs();
        let mut sc = scenario(EncryptionStructure::SingleKey {
            kind: KeyKind::Symmetric,
            provenance: KeyProvenance::new(KeySource::C2Download),
        });
        sc.target_glob = "nonexistent/**/*".into();
        // No targets means no key fetch, so the missing channel is fine.
        let outcome = execute_attack(&sc, &mut fs, None).unwrap();
        assert!(outcome.artifacts.targets.is_empty());
        let ks = kinds(&outcome.trace);
        assert!(!ks.iter().any(|k| matches!(
            k,
            K::KeyGen | K::EmbeddedKeyRead | K::NetFetchKey | K::FileRead | K::FileDelete
        )));
        // Shadow deletion and the note still happen.
        assert!(ks.contains(&K::ShadowDelete));
        assert_eq!(*ks.last().unwrap(), K::NoteWrite);
    }

    #[test]
    fn envelope_codec_round_trips_and_rejects_damage() {
        let envelope = FileEnvelope {
            scheme: EnvelopeScheme::Asym,
            key_id: "kp0000".into(),
            wrapped_key: vec![1, 2, 3],
            ciphertext: vec![9; 64],
        };
        let bytes = envelope.encode();
        assert_eq!(FileEnvelope::decode(&bytes).unwrap(), envelope);
        assert!(FileEnvelope::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(FileEnvelope::decode(b"XXXX").is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(FileEnvelope::decode(&trailing).is_err());
    }

    #[test]
    fn wrapped_key_codec_round_trips() {
        let container = WrappedKeyFile {
            wrap_of: "kp0001".into(),
            wrap_by: "kp0000".into(),
            blob: CipherBlob {
                blob_id: "wr0004".into(),
                producer: crate::crypto::BlobProducer::KeyWrap,
                bytes: vec![5; 40],
            },
        };
        let bytes = container.encode();
        assert_eq!(WrappedKeyFile::decode(&bytes).unwrap(), container);
        assert!(WrappedKeyFile::decode(&bytes[..10]).is_err());
    }

    #[test]
    fn bad_glob_is_a_config_error() {
        let mut fs = demo_fs();
        let mut sc = scenario(EncryptionStructure::NoEncryption);
        sc.target_glob = "docs/[unclosed".into();
        assert!(matches!(execute_attack(&sc, &mut fs, None), Err(AttackError::Config(_))));
    }

    #[test]
    fn identical_seeds_reproduce_identical_traces() {
        let sc = scenario(EncryptionStructure::HybridThreeTier {
            master_provenance: KeyProvenance::new(KeySource::LocalGeneration),
        });
        let mut fs_a = demo_fs();
        let mut fs_b = demo_fs();
        let a = execute_attack(&sc, &mut fs_a, None).unwrap();
        let b = execute_attack(&sc, &mut fs_b, None).unwrap();
        assert_eq!(crate::trace::emit_trace(&a.trace), crate::trace::emit_trace(&b.trace));
        assert_eq!(a.artifacts.payload_image, b.artifacts.payload_image);
        assert_eq!(fs_a.read_file("docs/notes.md.enc").unwrap(), fs_b.read_file("docs/notes.md.enc").unwrap());
    }
}
