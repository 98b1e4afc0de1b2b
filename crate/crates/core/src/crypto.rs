//! Reference cryptography for the attack laboratory.
//!
//! Nothing here is production cryptography, on purpose: the laboratory needs
//! ciphers that are deterministic under a seed, fast at desk scale, and easy
//! to audit in fixtures. The symmetric cipher is a keystream XOR driven by a
//! seeded ChaCha8 stream keyed directly by the 32-octet key. The asymmetric
//! scheme is textbook modular exponentiation over a 64-bit modulus (two seeded
//! 32-bit primes, e = 65537). Both sit behind cipher traits so a real scheme
//! can be swapped in without touching the attack executor.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::hex_bytes;

/// Symmetric key length in octets.
pub const SYM_KEY_LEN: usize = 32;

/// Magic prefix of serialized key material. The payload-image scanner and the
/// unwrap path both key off this tag, so the simulator and the recovery side
/// agree on one encoding by construction.
pub const KEY_MATERIAL_MAGIC: &[u8; 4] = b"KMv1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    /// Key bytes have the wrong length or an inconsistent structure.
    #[error("invalid key: {0}")]
    InvalidKey(String),
    /// Message cannot be represented in the configured asymmetric domain.
    #[error("message too large for asymmetric domain: {0}")]
    MessageTooLarge(String),
    /// Ciphertext framing is damaged or does not match the key.
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
    /// A wrapped blob did not decrypt to well-formed key material.
    #[error("unwrap failed: {0}")]
    UnwrapFailed(String),
}

// ==== key types =============================================================

/// Identifier of a key or key pair; unique within one scenario run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(pub String);

impl std::fmt::Display for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for KeyId {
    fn from(s: &str) -> Self {
        KeyId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymKey {
    pub key_id: KeyId,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

impl SymKey {
    fn seed(&self) -> Result<[u8; 32], CryptoError> {
        <[u8; 32]>::try_from(self.bytes.as_slice()).map_err(|_| {
            CryptoError::InvalidKey(format!(
                "symmetric key must be {SYM_KEY_LEN} octets, got {}",
                self.bytes.len()
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    pub pair_id: KeyId,
    pub n: u64,
    pub e: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateKey {
    pub pair_id: KeyId,
    pub n: u64,
    pub d: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymKeyPair {
    pub pair_id: KeyId,
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// What produced a ciphertext blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobProducer {
    FileEncryption,
    KeyWrap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherBlob {
    pub blob_id: String,
    pub producer: BlobProducer,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

// ==== deterministic key generation ==========================================

/// Seeded key factory: allocates run-unique key ids and derives all key bytes
/// from one ChaCha8 stream, so identical seeds yield identical keys.
pub struct KeyForge {
    rng: ChaCha8Rng,
    next: u32,
    id_prefix: String,
}

impl KeyForge {
    pub fn new(seed: u64) -> Self {
        Self::prefixed(seed, "")
    }

    /// A forge whose key ids carry `prefix`, keeping ids from two independent
    /// forges (say, a victim-local one and a C2-side one) distinguishable.
    pub fn prefixed(seed: u64, prefix: &str) -> Self {
        KeyForge { rng: ChaCha8Rng::seed_from_u64(seed), next: 0, id_prefix: prefix.to_string() }
    }

    fn alloc_id(&mut self, tag: &str) -> KeyId {
        let id = KeyId(format!("{}{tag}{:04}", self.id_prefix, self.next));
        self.next += 1;
        id
    }

    /// Generate a fresh 32-octet symmetric key.
    pub fn sym_key(&mut self) -> SymKey {
        let id = self.alloc_id("sk");
        let mut bytes = vec![0u8; SYM_KEY_LEN];
        self.rng.fill_bytes(&mut bytes);
        SymKey { key_id: id, bytes }
    }

    /// Generate a fresh key pair over a 64-bit modulus.
    pub fn asym_pair(&mut self) -> AsymKeyPair {
        let id = self.alloc_id("kp");
        loop {
            let p = gen_prime_u32(&mut self.rng);
            let q = gen_prime_u32(&mut self.rng);
            if p == q {
                continue;
            }
            let n = u64::from(p) * u64::from(q);
            let phi = u64::from(p - 1) * u64::from(q - 1);
            let e = 65_537u64;
            let Some(d) = mod_inverse(e, phi) else { continue };
            return AsymKeyPair {
                pair_id: id.clone(),
                public: PublicKey { pair_id: id.clone(), n, e },
                private: PrivateKey { pair_id: id, n, d },
            };
        }
    }
}

fn gen_prime_u32(rng: &mut ChaCha8Rng) -> u32 {
    loop {
        // Force the top bit (keeps n above 2^62) and the low bit (odd).
        let candidate = rng.next_u32() | 0x8000_0001;
        if is_prime_u64(u64::from(candidate)) {
            return candidate;
        }
    }
}

/// Deterministic Miller-Rabin for u64: the first twelve prime bases are a
/// proven witness set for every 64-bit integer.
fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(m)) as u64
}

fn mod_pow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, modulus);
        }
        base = mul_mod(base, base, modulus);
        exp >>= 1;
    }
    acc
}

fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (i128::from(a), i128::from(m));
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None; // not coprime
    }
    let m = i128::from(m);
    Some(((old_s % m + m) % m) as u64)
}

// ==== symmetric cipher ======================================================

/// Symmetric cipher interface; the laboratory default is [`KeystreamXor`].
pub trait SymCipher {
    fn encrypt(&self, key: &SymKey, plaintext: &[u8]) -> Result<Vec<u8>, CryptoError>;
    fn decrypt(&self, key: &SymKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError>;
}

/// XOR with a ChaCha8 keystream keyed by the 32-octet key. Involutive, so
/// decrypt re-runs the same transform.
pub struct KeystreamXor;

impl KeystreamXor {
    fn keystream_apply(key: &SymKey, data: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let mut rng = ChaCha8Rng::from_seed(key.seed()?);
        let mut stream = vec![0u8; data.len()];
        rng.fill_bytes(&mut stream);
        Ok(data.iter().zip(stream).map(|(b, k)| b ^ k).collect())
    }
}

impl SymCipher for KeystreamXor {
    fn encrypt(&self, key: &SymKey, plaintext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Self::keystream_apply(key, plaintext)
    }

    fn decrypt(&self, key: &SymKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Self::keystream_apply(key, ciphertext)
    }
}

pub fn sym_encrypt(key: &SymKey, plaintext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    KeystreamXor.encrypt(key, plaintext)
}

pub fn sym_decrypt(key: &SymKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    KeystreamXor.decrypt(key, ciphertext)
}

// ==== asymmetric cipher =====================================================

/// Asymmetric cipher interface; the laboratory default is [`ModExp`].
pub trait AsymCipher {
    fn encrypt(&self, key: &PublicKey, message: &[u8]) -> Result<Vec<u8>, CryptoError>;
    fn decrypt(&self, key: &PrivateKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError>;
}

/// Textbook modular exponentiation with internal chunking.
///
/// Chunk framing (fixed format, relied on by fixtures):
///   u32 BE total message length, then one 8-octet BE block per chunk.
/// Chunk width is the largest k with 256^k <= n, i.e. 7 octets for the
/// default desk-scale modulus; a modulus too small for 1-octet chunks cannot
/// encrypt anything and reports `MessageTooLarge`.
pub struct ModExp;

fn chunk_width(n: u64) -> usize {
    ((64 - n.leading_zeros() as usize).saturating_sub(1)) / 8
}

impl AsymCipher for ModExp {
    fn encrypt(&self, key: &PublicKey, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let width = chunk_width(key.n);
        if width == 0 {
            return Err(CryptoError::MessageTooLarge(format!(
                "modulus {} below one-octet chunk domain",
                key.n
            )));
        }
        let len = u32::try_from(message.len()).map_err(|_| {
            CryptoError::MessageTooLarge(format!("message of {} octets exceeds frame", message.len()))
        })?;
        let mut out = Vec::with_capacity(4 + message.len() / width * 8 + 8);
        out.extend_from_slice(&len.to_be_bytes());
        for chunk in message.chunks(width) {
            let mut value = 0u64;
            for &b in chunk {
                value = value << 8 | u64::from(b);
            }
            debug_assert!(value < key.n, "chunk domain overflow must not occur");
            let block = mod_pow(value, key.e, key.n);
            out.extend_from_slice(&block.to_be_bytes());
        }
        Ok(out)
    }

    fn decrypt(&self, key: &PrivateKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let width = chunk_width(key.n);
        if width == 0 {
            return Err(CryptoError::InvalidKey(format!(
                "modulus {} below one-octet chunk domain",
                key.n
            )));
        }
        if ciphertext.len() < 4 {
            return Err(CryptoError::Malformed("ciphertext shorter than length frame".into()));
        }
        let len = u32::from_be_bytes(ciphertext[..4].try_into().unwrap()) as usize;
        let body = &ciphertext[4..];
        let blocks = len.div_ceil(width);
        if body.len() != blocks * 8 {
            return Err(CryptoError::Malformed(format!(
                "expected {} cipher blocks for {} octets, found {} body octets",
                blocks,
                len,
                body.len()
            )));
        }
        let mut message = Vec::with_capacity(len);
        for (i, block) in body.chunks(8).enumerate() {
            let c = u64::from_be_bytes(block.try_into().unwrap());
            let value = mod_pow(c, key.d, key.n);
            // Width of this chunk: the final one may be short. A value that
            // does not fit its chunk cannot come from a matching key.
            let this = if i == blocks - 1 { len - width * (blocks - 1) } else { width };
            if this < 8 && value >> (8 * this) != 0 {
                return Err(CryptoError::Malformed(format!(
                    "block {i} decrypts outside the chunk domain (key mismatch?)"
                )));
            }
            let bytes = value.to_be_bytes();
            message.extend_from_slice(&bytes[8 - this..]);
        }
        Ok(message)
    }
}

pub fn asym_encrypt(key: &PublicKey, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
    ModExp.encrypt(key, message)
}

pub fn asym_decrypt(key: &PrivateKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    ModExp.decrypt(key, ciphertext)
}

// ==== key material serialization ============================================

/// Key material in transportable form: what gets embedded in payload images,
/// wrapped into blobs, issued by the C2, and hunted by the recovery scanner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyMaterial {
    Sym(SymKey),
    Public(PublicKey),
    Private(PrivateKey),
}

impl KeyMaterial {
    pub fn key_id(&self) -> &KeyId {
        match self {
            KeyMaterial::Sym(k) => &k.key_id,
            KeyMaterial::Public(k) => &k.pair_id,
            KeyMaterial::Private(k) => &k.pair_id,
        }
    }

    fn kind_tag(&self) -> u8 {
        match self {
            KeyMaterial::Sym(_) => 1,
            KeyMaterial::Public(_) => 2,
            KeyMaterial::Private(_) => 3,
        }
    }
}

/// Encoding: `KMv1 | kind u8 | id_len u16 BE | id | payload_len u16 BE | payload`.
/// Payloads: sym = raw key octets; public = n,e as u64 BE; private = n,d as u64 BE.
pub fn encode_key_material(material: &KeyMaterial) -> Vec<u8> {
    let id = material.key_id().0.as_bytes();
    let payload: Vec<u8> = match material {
        KeyMaterial::Sym(k) => k.bytes.clone(),
        KeyMaterial::Public(k) => {
            let mut p = k.n.to_be_bytes().to_vec();
            p.extend_from_slice(&k.e.to_be_bytes());
            p
        }
        KeyMaterial::Private(k) => {
            let mut p = k.n.to_be_bytes().to_vec();
            p.extend_from_slice(&k.d.to_be_bytes());
            p
        }
    };
    let mut out = Vec::with_capacity(4 + 1 + 2 + id.len() + 2 + payload.len());
    out.extend_from_slice(KEY_MATERIAL_MAGIC);
    out.push(material.kind_tag());
    out.extend_from_slice(&(id.len() as u16).to_be_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decode one key-material record from the front of `bytes`; returns the
/// material and the number of octets consumed.
pub fn decode_key_material(bytes: &[u8]) -> Result<(KeyMaterial, usize), CryptoError> {
    let need = |n: usize| -> Result<(), CryptoError> {
        if bytes.len() < n {
            Err(CryptoError::Malformed(format!(
                "key material truncated: need {n} octets, have {}",
                bytes.len()
            )))
        } else {
            Ok(())
        }
    };
    need(4 + 1 + 2)?;
    if &bytes[..4] != KEY_MATERIAL_MAGIC {
        return Err(CryptoError::Malformed("missing key material magic".into()));
    }
    let kind = bytes[4];
    let id_len = u16::from_be_bytes([bytes[5], bytes[6]]) as usize;
    need(7 + id_len + 2)?;
    let id = std::str::from_utf8(&bytes[7..7 + id_len])
        .map_err(|_| CryptoError::Malformed("key id is not UTF-8".into()))?
        .to_string();
    let plen_at = 7 + id_len;
    let payload_len = u16::from_be_bytes([bytes[plen_at], bytes[plen_at + 1]]) as usize;
    let payload_at = plen_at + 2;
    need(payload_at + payload_len)?;
    let payload = &bytes[payload_at..payload_at + payload_len];
    let consumed = payload_at + payload_len;
    let u64_at = |off: usize| u64::from_be_bytes(payload[off..off + 8].try_into().unwrap());
    let material = match kind {
        1 => {
            if payload_len != SYM_KEY_LEN {
                return Err(CryptoError::Malformed(format!(
                    "symmetric payload must be {SYM_KEY_LEN} octets, got {payload_len}"
                )));
            }
            KeyMaterial::Sym(SymKey { key_id: KeyId(id), bytes: payload.to_vec() })
        }
        2 => {
            if payload_len != 16 {
                return Err(CryptoError::Malformed("public payload must be 16 octets".into()));
            }
            KeyMaterial::Public(PublicKey { pair_id: KeyId(id), n: u64_at(0), e: u64_at(8) })
        }
        3 => {
            if payload_len != 16 {
                return Err(CryptoError::Malformed("private payload must be 16 octets".into()));
            }
            KeyMaterial::Private(PrivateKey { pair_id: KeyId(id), n: u64_at(0), d: u64_at(8) })
        }
        other => return Err(CryptoError::Malformed(format!("unknown key kind tag {other}"))),
    };
    Ok((material, consumed))
}

/// Scan a haystack (e.g. a payload image) for serialized key material.
/// Returns every decodable record with its offset.
pub fn scan_key_material(haystack: &[u8]) -> Vec<(usize, KeyMaterial)> {
    let mut found = Vec::new();
    let mut at = 0;
    while at + KEY_MATERIAL_MAGIC.len() <= haystack.len() {
        if &haystack[at..at + 4] == KEY_MATERIAL_MAGIC {
            if let Ok((material, consumed)) = decode_key_material(&haystack[at..]) {
                found.push((at, material));
                at += consumed;
                continue;
            }
        }
        at += 1;
    }
    found
}

// ==== key wrapping ==========================================================

/// Wrap key material under a public key: the hybrid-structure building block.
pub fn wrap_key(
    material: &KeyMaterial,
    wrapping_key: &PublicKey,
    blob_id: &str,
) -> Result<CipherBlob, CryptoError> {
    let bytes = asym_encrypt(wrapping_key, &encode_key_material(material))?;
    Ok(CipherBlob { blob_id: blob_id.to_string(), producer: BlobProducer::KeyWrap, bytes })
}

/// Unwrap a blob with a private key. A wrong key is flagged by the key
/// material serialization check rather than by any cipher-level integrity.
pub fn unwrap_key(blob: &CipherBlob, key: &PrivateKey) -> Result<KeyMaterial, CryptoError> {
    let plain = asym_decrypt(key, &blob.bytes)
        .map_err(|e| CryptoError::UnwrapFailed(format!("blob {}: {e}", blob.blob_id)))?;
    let (material, consumed) = decode_key_material(&plain)
        .map_err(|e| CryptoError::UnwrapFailed(format!("blob {}: {e}", blob.blob_id)))?;
    if consumed != plain.len() {
        return Err(CryptoError::UnwrapFailed(format!(
            "blob {}: {} trailing octets after key material",
            blob.blob_id,
            plain.len() - consumed
        )));
    }
    Ok(material)
}
