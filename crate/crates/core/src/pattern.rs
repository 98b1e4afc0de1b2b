//! Independent category oracle: a flat row-predicate lookup over the
//! classification framework's category patterns, written separately from
//! the decision tree in [`crate::classify`] so the two can be cross-checked
//! against each other over the whole feature space.
//!
//! Each category is characterized by one row predicate; the rows partition
//! the valid vector space (checked by [`matching_rows`] returning exactly
//! one row everywhere, which the exhaustive tests assert).

use crate::classify::{Cat1Sublabel, Category, ClassifierMode};
use crate::features::{FeatureVector, SkKind};

fn any_key_flag(v: &FeatureVector) -> bool {
    v.hk_c2 || v.hk_pemb || v.hk_localgen || v.sk_c2 || v.sk_pemb || v.sk_localgen
}

fn any_single_key_flag(v: &FeatureVector) -> bool {
    v.sk_c2 || v.sk_pemb || v.sk_localgen
}

fn any_deletion(v: &FeatureVector) -> bool {
    v.del_shadow_copies || v.overwrite_delete
}

/// The CAT3 key condition: a symmetric single key that is — under the given
/// mode's reading — extractable without the attacker's cooperation.
fn symmetric_and_extractable(v: &FeatureVector, mode: ClassifierMode) -> bool {
    let symmetric = v.sk_kind == SkKind::Symmetric;
    match mode {
        ClassifierMode::Literal => symmetric,
        ClassifierMode::KeyLocality => {
            symmetric && (v.sk_pemb || (v.sk_localgen && v.key_residue_on_victim))
        }
    }
}

/// Row predicates, one per category:
/// - CAT1: no key-structure flags at all (any deletion combination).
/// - CAT2: some key structure, but neither deletion behavior.
/// - CAT3: single-key structure with deletion whose key satisfies the
///   symmetric-and-extractable condition.
/// - CAT4: single-key structure with deletion whose key does not.
/// - CAT5: hybrid-only key structure with deletion.
fn row_matches(category: Category, v: &FeatureVector, mode: ClassifierMode) -> bool {
    match category {
        Category::Cat1 => !any_key_flag(v),
        Category::Cat2 => any_key_flag(v) && !any_deletion(v),
        Category::Cat3 => {
            any_single_key_flag(v) && any_deletion(v) && symmetric_and_extractable(v, mode)
        }
        Category::Cat4 => {
            any_single_key_flag(v) && any_deletion(v) && !symmetric_and_extractable(v, mode)
        }
        Category::Cat5 => any_key_flag(v) && !any_single_key_flag(v) && any_deletion(v),
    }
}

/// Every category whose row predicate matches. On the valid vector space
/// this always has exactly one element; exposing the multiplicity lets the
/// exhaustive tests prove that partition property.
pub fn matching_rows(v: &FeatureVector, mode: ClassifierMode) -> Vec<Category> {
    Category::ALL.into_iter().filter(|c| row_matches(*c, v, mode)).collect()
}

/// Look up the category of a vector by row predicate (first match in
/// category order; unique on valid vectors).
pub fn pattern_category(v: &FeatureVector, mode: ClassifierMode) -> Category {
    Category::ALL
        .into_iter()
        .find(|c| row_matches(*c, v, mode))
        .expect("category rows cover the vector space")
}

/// CAT1 sublabel rows: the four no-key-structure deletion combinations.
pub fn pattern_cat1_sublabel(v: &FeatureVector) -> Option<Cat1Sublabel> {
    if any_key_flag(v) {
        return None;
    }
    Some(match (v.del_shadow_copies, v.overwrite_delete) {
        (false, false) => Cat1Sublabel::Scareware,
        (true, false) => Cat1Sublabel::ShadowDeleteOnly,
        (false, true) => Cat1Sublabel::OverwriteOnly,
        (true, true) => Cat1Sublabel::FullDeleteNoEncryption,
    })
}
