//! Attack scenario configuration: which encryption structure runs, where its
//! keys come from, and which deletion structure follows. Scenarios are pure
//! data; the executor in [`crate::attack`] interprets them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vfs::{FileSpec, VirtualFS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario JSON malformed: {0}")]
    Json(String),
    #[error("unsupported scenario schema version {0:?} (expected \"v1\")")]
    UnsupportedVersion(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Where a key enters the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeySource {
    /// Fetched from the command-and-control endpoint at run time.
    C2Download,
    /// Carried inside the payload image.
    PayloadEmbedded,
    /// Generated on the victim host.
    LocalGeneration,
}

/// Key origin plus whether erasure of victim-side key material is incomplete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyProvenance {
    pub source: KeySource,
    /// Models incomplete key erasure: the secret material used on the victim
    /// stays discoverable after the run. Defaults to false.
    #[serde(default)]
    pub residue_left_on_victim: bool,
}

impl KeyProvenance {
    pub fn new(source: KeySource) -> Self {
        KeyProvenance { source, residue_left_on_victim: false }
    }

    pub fn with_residue(source: KeySource) -> Self {
        KeyProvenance { source, residue_left_on_victim: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Symmetric,
    Asymmetric,
}

/// The encryption half of the attack structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EncryptionStructure {
    /// Extortion without encryption (a ransom note is still written).
    NoEncryption,
    /// One governing key encrypts every target file.
    SingleKey { kind: KeyKind, provenance: KeyProvenance },
    /// Fresh symmetric key per file, each wrapped by the master public key.
    HybridPerFile { master_provenance: KeyProvenance },
    /// Master public key wraps a locally generated sub key pair whose public
    /// half wraps fresh per-file symmetric keys (three-tier chain).
    HybridThreeTier { master_provenance: KeyProvenance },
}

impl EncryptionStructure {
    pub fn is_hybrid(&self) -> bool {
        matches!(
            self,
            EncryptionStructure::HybridPerFile { .. } | EncryptionStructure::HybridThreeTier { .. }
        )
    }

    /// The provenance of the structure's governing/master key, if any.
    pub fn master_provenance(&self) -> Option<KeyProvenance> {
        match self {
            EncryptionStructure::NoEncryption => None,
            EncryptionStructure::SingleKey { provenance, .. } => Some(*provenance),
            EncryptionStructure::HybridPerFile { master_provenance }
            | EncryptionStructure::HybridThreeTier { master_provenance } => Some(*master_provenance),
        }
    }

    pub fn uses_c2_download(&self) -> bool {
        self.master_provenance().is_some_and(|p| p.source == KeySource::C2Download)
    }
}

/// What happens to the original files once ciphertext exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemnantDeletion {
    /// Originals left Live (an empty-threat structure).
    None,
    /// Originals deleted primitively; bytes stay recoverable.
    MetadataOnly,
    /// Originals overwritten with random octets, then deleted.
    OverwriteRandom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub scenario_id: String,
    pub encryption: EncryptionStructure,
    pub delete_shadow_copies: bool,
    pub remnant_deletion: RemnantDeletion,
    /// Glob over victim paths selecting the target files. `*`/`?` stay within
    /// a path segment; `**` crosses segments. An empty match set is legal.
    pub target_glob: String,
    pub rng_seed: u64,
}

// ==== scenario files (schema v1) ============================================

/// Initial file in a scenario document; contents are UTF-8 text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFileEntry {
    pub path: String,
    pub content: String,
}

/// On-disk scenario document: the scenario itself plus harness fields
/// describing the victim environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub version: String,
    #[serde(flatten)]
    pub scenario: AttackScenario,
    /// Initial victim files; a small built-in demo tree is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<Vec<ScenarioFileEntry>>,
    /// Take one shadow snapshot before the attack (the pre-existing restore
    /// point). Defaults to true.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub take_snapshot: Option<bool>,
    /// Seed for C2-side key issuance; defaults to rng_seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_seed: Option<u64>,
}

pub const SCENARIO_SCHEMA_VERSION: &str = "v1";

impl ScenarioDoc {
    pub fn new(scenario: AttackScenario) -> Self {
        ScenarioDoc {
            version: SCENARIO_SCHEMA_VERSION.to_string(),
            scenario,
            fs: None,
            take_snapshot: None,
            c2_seed: None,
        }
    }

    pub fn take_snapshot(&self) -> bool {
        self.take_snapshot.unwrap_or(true)
    }

    pub fn c2_seed(&self) -> u64 {
        self.c2_seed.unwrap_or(self.scenario.rng_seed)
    }

    /// Materialize the victim filesystem this document describes.
    pub fn build_fs(&self) -> Result<VirtualFS, ScenarioError> {
        let specs: Vec<FileSpec> = match &self.fs {
            Some(files) => files
                .iter()
                .map(|f| FileSpec { path: f.path.clone(), content: f.content.clone().into_bytes() })
                .collect(),
            None => default_demo_files(),
        };
        VirtualFS::create(&specs).map_err(|e| ScenarioError::Config(e.to_string()))
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario_json(text: &str) -> Result<ScenarioDoc, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
    if doc.version != SCENARIO_SCHEMA_VERSION {
        return Err(ScenarioError::UnsupportedVersion(doc.version));
    }
    compile_glob(&doc.scenario.target_glob)?;
    Ok(doc)
}

/// Compile a target glob, rejecting invalid syntax.
pub fn compile_glob(pattern: &str) -> Result<glob::Pattern, ScenarioError> {
    glob::Pattern::new(pattern)
        .map_err(|e| ScenarioError::Config(format!("invalid target glob {pattern:?}: {e}")))
}

/// Sorted Live paths matching the target glob.
pub fn match_targets(fs: &VirtualFS, pattern: &glob::Pattern) -> Vec<String> {
    let options = glob::MatchOptions {
        case_sensitive: true,
        require_literal_separator: true,
        require_literal_leading_dot: false,
    };
    fs.list_files()
        .into_iter()
        .filter(|p| pattern.matches_with(p, options))
        .map(str::to_string)
        .collect()
}

/// Built-in demo tree used when a scenario document names no files.
pub fn default_demo_files() -> Vec<FileSpec> {
    [
        ("docs/budget.xlsx", "quarterly budget workbook, 14 sheets"),
        ("docs/letters/offer.txt", "Dear Ms. Okafor, we are pleased to offer..."),
        ("docs/letters/renewal.txt", "Your lease renews on the first of the month."),
        ("docs/notes.md", "- rotate backups\n- call the dentist\n"),
        ("home/photos/cat.raw", "RAW\x00not-really-a-photo\x00tabby"),
        ("home/photos/dog.raw", "RAW\x00not-really-a-photo\x00terrier"),
        ("home/thesis.tex", "\\documentclass{article}\\begin{document}...\\end{document}"),
        ("srv/db/ledger.csv", "date,amount\n2024-01-03,120.00\n2024-01-09,-40.25\n"),
    ]
    .into_iter()
    .map(|(path, content)| FileSpec { path: path.into(), content: content.as_bytes().to_vec() })
    .collect()
}
