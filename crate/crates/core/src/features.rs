//! Attack-structure feature vectors: six key-provenance flags split across
//! hybrid (hk_*) and single-key (sk_*) structures, the single-key cipher
//! kind, the two deletion flags, and whether key residue stays on the victim.

use serde::{Deserialize, Serialize};

use crate::scenario::{AttackScenario, EncryptionStructure, KeySource, RemnantDeletion};

/// Cipher kind of a single governing key; NotApplicable when the structure is
/// hybrid or keyless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkKind {
    Symmetric,
    Asymmetric,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureVector {
    /// Hybrid structure: key material downloaded from the C2.
    pub hk_c2: bool,
    /// Hybrid structure: key material embedded in the payload.
    pub hk_pemb: bool,
    /// Hybrid structure: key material generated on the victim.
    pub hk_localgen: bool,
    /// Single-key structure: governing key downloaded from the C2.
    pub sk_c2: bool,
    /// Single-key structure: governing key embedded in the payload.
    pub sk_pemb: bool,
    /// Single-key structure: governing key generated on the victim.
    pub sk_localgen: bool,
    pub sk_kind: SkKind,
    /// Volume shadow copies deleted.
    pub del_shadow_copies: bool,
    /// Original files overwritten with random data after encryption.
    pub overwrite_delete: bool,
    /// Secret key material remained discoverable on the victim after the run.
    pub key_residue_on_victim: bool,
}

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector {
            hk_c2: false,
            hk_pemb: false,
            hk_localgen: false,
            sk_c2: false,
            sk_pemb: false,
            sk_localgen: false,
            sk_kind: SkKind::NotApplicable,
            del_shadow_copies: false,
            overwrite_delete: false,
            key_residue_on_victim: false,
        }
    }
}

impl FeatureVector {
    pub fn any_hk(&self) -> bool {
        self.hk_c2 || self.hk_pemb || self.hk_localgen
    }

    pub fn any_sk(&self) -> bool {
        self.sk_c2 || self.sk_pemb || self.sk_localgen
    }

    pub fn any_keys(&self) -> bool {
        self.any_hk() || self.any_sk()
    }

    /// Short feature codes of every active flag, in canonical order.
    pub fn active_codes(&self) -> Vec<&'static str> {
        let mut codes = Vec::new();
        for (active, code) in [
            (self.hk_c2, "HKc2emb"),
            (self.hk_pemb, "HKPemb"),
            (self.hk_localgen, "HKlocalgen"),
            (self.sk_c2, "SKc2emb"),
            (self.sk_pemb, "SKPemb"),
            (self.sk_localgen, "SKlocalgen"),
            (self.del_shadow_copies, "delShdCpy"),
            (self.overwrite_delete, "ovrFile"),
        ] {
            if active {
                codes.push(code);
            }
        }
        codes
    }
}

/// The feature vector an attack configuration implies, given how many files
/// the target glob matched. This is the independent oracle the extraction
/// soundness tests compare trace-extracted vectors against.
///
/// Rules mirrored by the executor/extractor pair:
/// - Zero targets: no key machinery runs at all (lazy acquisition), so only
///   the shadow-deletion flag can be set.
/// - NoEncryption: deletion of originals is downgraded to a metadata-only
///   fake delete, so overwrite_delete is never set without encryption.
/// - Hybrid structures always generate sub/per-file keys locally, so
///   hk_localgen accompanies the master provenance flag.
pub fn implied_features(scenario: &AttackScenario, target_count: usize) -> FeatureVector {
    let mut v = FeatureVector { del_shadow_copies: scenario.delete_shadow_copies, ..Default::default() };
    if target_count == 0 {
        return v;
    }
    match &scenario.encryption {
        EncryptionStructure::NoEncryption => {}
        EncryptionStructure::SingleKey { kind, provenance } => {
            match provenance.source {
                KeySource::C2Download => v.sk_c2 = true,
                KeySource::PayloadEmbedded => v.sk_pemb = true,
                KeySource::LocalGeneration => v.sk_localgen = true,
            }
            v.sk_kind = match kind {
                crate::scenario::KeyKind::Symmetric => SkKind::Symmetric,
                crate::scenario::KeyKind::Asymmetric => SkKind::Asymmetric,
            };
            v.overwrite_delete = scenario.remnant_deletion == RemnantDeletion::OverwriteRandom;
            v.key_residue_on_victim = provenance.residue_left_on_victim;
        }
        EncryptionStructure::HybridPerFile { master_provenance }
        | EncryptionStructure::HybridThreeTier { master_provenance } => {
            match master_provenance.source {
                KeySource::C2Download => v.hk_c2 = true,
                KeySource::PayloadEmbedded => v.hk_pemb = true,
                KeySource::LocalGeneration => v.hk_localgen = true,
            }
            v.hk_localgen = true; // sub/per-file keys are always locally generated
            v.overwrite_delete = scenario.remnant_deletion == RemnantDeletion::OverwriteRandom;
            v.key_residue_on_victim = master_provenance.residue_left_on_victim;
        }
    }
    v
}

/// Enumerate every structurally valid feature vector: all combinations of
/// the six key flags, kinds, deletion flags and residue, restricted by the
/// invariant that `sk_kind` is `NotApplicable` exactly when no `sk_*` flag
/// is set. The exhaustive cross-check tests iterate this space.
pub fn enumerate_valid_vectors() -> Vec<FeatureVector> {
    let bools = [false, true];
    let mut out = Vec::new();
    for hk_c2 in bools {
        for hk_pemb in bools {
            for hk_localgen in bools {
                for sk_c2 in bools {
                    for sk_pemb in bools {
                        for sk_localgen in bools {
                            let any_sk = sk_c2 || sk_pemb || sk_localgen;
                            let kinds: &[SkKind] = if any_sk {
                                &[SkKind::Symmetric, SkKind::Asymmetric]
                            } else {
                                &[SkKind::NotApplicable]
                            };
                            for &sk_kind in kinds {
                                for del_shadow_copies in bools {
                                    for overwrite_delete in bools {
                                        for key_residue_on_victim in bools {
                                            out.push(FeatureVector {
                                                hk_c2,
                                                hk_pemb,
                                                hk_localgen,
                                                sk_c2,
                                                sk_pemb,
                                                sk_localgen,
                                                sk_kind,
                                                del_shadow_copies,
                                                overwrite_delete,
                                                key_residue_on_victim,
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
