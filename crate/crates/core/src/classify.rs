//! The virulence classifier: a four-level decision tree over feature
//! vectors, with a rationale trail naming each branch taken.
//!
//! Two modes resolve the one genuinely ambiguous branch. At the final
//! single-key level, `Literal` grades purely on the key kind (symmetric
//! means extractable, hence CAT3). `KeyLocality` — the default — grades on
//! whether the symmetric key is actually obtainable from the victim side:
//! embedded in the payload, or generated locally with residue left behind.
//! A symmetric key that only ever existed at the C2 is as unrecoverable as
//! an asymmetric private key, so those samples grade CAT4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, SkKind};

/// The five virulence categories, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "CAT1")]
    Cat1,
    #[serde(rename = "CAT2")]
    Cat2,
    #[serde(rename = "CAT3")]
    Cat3,
    #[serde(rename = "CAT4")]
    Cat4,
    #[serde(rename = "CAT5")]
    Cat5,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Cat1, Category::Cat2, Category::Cat3, Category::Cat4, Category::Cat5];

    /// Ordinal severity index, 1..=5.
    pub fn index(self) -> u8 {
        match self {
            Category::Cat1 => 1,
            Category::Cat2 => 2,
            Category::Cat3 => 3,
            Category::Cat4 => 4,
            Category::Cat5 => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Cat1 => "CAT1",
            Category::Cat2 => "CAT2",
            Category::Cat3 => "CAT3",
            Category::Cat4 => "CAT4",
            Category::Cat5 => "CAT5",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fine-grained label for the no-key-structure category, determined by the
/// deletion flag combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cat1Sublabel {
    Scareware,
    ShadowDeleteOnly,
    OverwriteOnly,
    FullDeleteNoEncryption,
}

impl std::fmt::Display for Cat1Sublabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Cat1Sublabel::Scareware => "scareware",
            Cat1Sublabel::ShadowDeleteOnly => "shadow_delete_only",
            Cat1Sublabel::OverwriteOnly => "overwrite_only",
            Cat1Sublabel::FullDeleteNoEncryption => "full_delete_no_encryption",
        })
    }
}

/// Which reading of the final single-key branch to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    Literal,
    #[default]
    KeyLocality,
}

/// One branch decision in the classification walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationaleStep {
    /// Tree level identifier (level-1 .. level-4).
    pub rule: String,
    pub detail: String,
}

/// A classified vector: category, CAT1 sublabel when applicable, and the
/// branch-by-branch rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub category: Category,
    pub sublabel: Option<Cat1Sublabel>,
    pub mode: ClassifierMode,
    pub rationale: Vec<RationaleStep>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("invalid feature vector: {0}")]
    SkKindInconsistent(String),
}

/// Non-fatal validation findings; classification proceeds with these noted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationWarning {
    /// Both hybrid and single-key flags set; the tree tests the single-key
    /// branch first, so the sk side decides the category.
    MixedStructure,
}

/// Check structural validity of a vector.
///
/// Hard errors are `sk_kind` inconsistencies: the kind must be
/// `NotApplicable` exactly when no `sk_*` flag is set. Mixed hybrid/single
/// vectors are flagged as a warning but remain classifiable.
pub fn validate_features(v: &FeatureVector) -> Result<Vec<ValidationWarning>, ValidationError> {
    if v.any_sk() && v.sk_kind == SkKind::NotApplicable {
        return Err(ValidationError::SkKindInconsistent(
            "sk_* flag set but sk_kind is not_applicable".into(),
        ));
    }
    if !v.any_sk() && v.sk_kind != SkKind::NotApplicable {
        return Err(ValidationError::SkKindInconsistent(format!(
            "sk_kind is {:?} but no sk_* flag is set",
            v.sk_kind
        )));
    }
    let mut warnings = Vec::new();
    if v.any_hk() && v.any_sk() {
        warnings.push(ValidationWarning::MixedStructure);
    }
    Ok(warnings)
}

fn step(rationale: &mut Vec<RationaleStep>, rule: &str, detail: impl Into<String>) {
    rationale.push(RationaleStep { rule: rule.to_string(), detail: detail.into() });
}

/// Classify one feature vector.
///
/// The tree, in order:
/// 1. no key-structure flags at all → CAT1, sublabeled by the deletion
///    flag combination;
/// 2. no shadow-copy deletion and no overwrite deletion → CAT2;
/// 3. no single-key flags (hybrid structure with deletion) → CAT5;
/// 4. single-key with deletion → CAT3 or CAT4 per the mode's key-locality
///    reading.
pub fn classify(v: &FeatureVector, mode: ClassifierMode) -> Result<Classification, ValidationError> {
    let warnings = validate_features(v)?
        .into_iter()
        .map(|w| match w {
            ValidationWarning::MixedStructure => {
                "mixed hybrid/single-key flags; single-key branch decides".to_string()
            }
        })
        .collect::<Vec<_>>();
    let mut rationale = Vec::new();

    // Level 1: is there any key structure?
    if !v.any_keys() {
        step(&mut rationale, "level-1", "no key-structure flags set");
        let sublabel = match (v.del_shadow_copies, v.overwrite_delete) {
            (false, false) => Cat1Sublabel::Scareware,
            (true, false) => Cat1Sublabel::ShadowDeleteOnly,
            (false, true) => Cat1Sublabel::OverwriteOnly,
            (true, true) => Cat1Sublabel::FullDeleteNoEncryption,
        };
        step(
            &mut rationale,
            "level-1",
            format!(
                "sublabel {} from deletion flags (shadow={}, overwrite={})",
                sublabel, v.del_shadow_copies, v.overwrite_delete
            ),
        );
        return Ok(Classification {
            category: Category::Cat1,
            sublabel: Some(sublabel),
            mode,
            rationale,
            warnings,
        });
    }
    step(&mut rationale, "level-1", "key structure present");

    // Level 2: does it destroy recovery paths at all?
    if !v.del_shadow_copies && !v.overwrite_delete {
        step(&mut rationale, "level-2", "no shadow-copy or overwrite deletion");
        return Ok(Classification {
            category: Category::Cat2,
            sublabel: None,
            mode,
            rationale,
            warnings,
        });
    }
    step(&mut rationale, "level-2", "deletion behavior present");

    // Level 3: single-key flags? (tested before the hybrid conclusion, so a
    // mixed vector is graded by its single-key component)
    if !v.any_sk() {
        step(&mut rationale, "level-3", "hybrid key structure only");
        return Ok(Classification {
            category: Category::Cat5,
            sublabel: None,
            mode,
            rationale,
            warnings,
        });
    }
    step(&mut rationale, "level-3", "single-key structure present");

    // Level 4: the key-locality question.
    let symmetric = v.sk_kind == SkKind::Symmetric;
    let category = match mode {
        ClassifierMode::Literal => {
            step(
                &mut rationale,
                "level-4",
                format!("literal reading: key kind is {:?}", v.sk_kind),
            );
            if symmetric {
                Category::Cat3
            } else {
                Category::Cat4
            }
        }
        ClassifierMode::KeyLocality => {
            let on_victim = v.sk_pemb || (v.sk_localgen && v.key_residue_on_victim);
            step(
                &mut rationale,
                "level-4",
                format!(
                    "key-locality reading: kind {:?}, obtainable from victim side = {}",
                    v.sk_kind, on_victim
                ),
            );
            if symmetric && on_victim {
                Category::Cat3
            } else {
                Category::Cat4
            }
        }
    };
    Ok(Classification { category, sublabel: None, mode, rationale, warnings })
}
