//! Reference corpus of real-world ransomware profiles.
//!
//! Each profile records a sample's published attack structure as a
//! [`FeatureVector`] together with its documented virulence category, so the
//! classifier can be checked against known ground truth and the corpus can be
//! summarized statistically.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify, validate_features, Category, ClassifierMode, ValidationError};
use crate::features::FeatureVector;

// ==== Errors =================================================================

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("sample {name}: invalid feature vector: {source}")]
    InvalidVector {
        name: String,
        #[source]
        source: ValidationError,
    },
}

// ==== Profiles ===============================================================

/// Operating system family the sample targeted.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Windows,
    Linux,
    #[serde(rename = "macos")]
    MacOs,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Windows, Platform::Linux, Platform::MacOs];
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::Windows => "Windows",
            Platform::Linux => "Linux",
            Platform::MacOs => "Mac OS",
        })
    }
}

/// One documented ransomware sample: identifying metadata, its attack
/// structure as a feature vector, and the category it is known to belong to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleProfile {
    pub name: String,
    pub year: u16,
    pub platform: Platform,
    /// Publicly reported ransom takings, where a figure is known.
    #[serde(default)]
    pub paid_ransom: Option<String>,
    pub expected_category: Category,
    pub features: FeatureVector,
    /// Why the feature vector is what it is, in structural terms.
    pub justification: String,
}

/// Parse a corpus from JSON and validate every profile's feature vector.
pub fn load_corpus(json: &str) -> Result<Vec<SampleProfile>, CorpusError> {
    let corpus: Vec<SampleProfile> = serde_json::from_str(json)?;
    for sample in &corpus {
        validate_features(&sample.features).map_err(|source| CorpusError::InvalidVector {
            name: sample.name.clone(),
            source,
        })?;
    }
    Ok(corpus)
}

/// The built-in 20-sample reference corpus.
pub fn builtin_corpus() -> Vec<SampleProfile> {
    load_corpus(include_str!("../fixtures/corpus.json"))
        .expect("built-in corpus fixture is well-formed")
}

// ==== Corpus classification ==================================================

/// Classification outcome for one corpus sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub name: String,
    pub expected: Category,
    pub predicted: Category,
    pub matches: bool,
    pub warnings: Vec<String>,
}

/// Outcome of classifying a whole corpus under one mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub mode: ClassifierMode,
    pub total: usize,
    pub matched: usize,
    pub samples: Vec<SampleReport>,
}

impl CorpusReport {
    pub fn all_match(&self) -> bool {
        self.matched == self.total
    }

    pub fn mismatches(&self) -> Vec<&SampleReport> {
        self.samples.iter().filter(|s| !s.matches).collect()
    }
}

/// Classify every sample and compare against its documented category.
pub fn classify_corpus(
    corpus: &[SampleProfile],
    mode: ClassifierMode,
) -> Result<CorpusReport, CorpusError> {
    let mut samples = Vec::with_capacity(corpus.len());
    for profile in corpus {
        let classification =
            classify(&profile.features, mode).map_err(|source| CorpusError::InvalidVector {
                name: profile.name.clone(),
                source,
            })?;
        let predicted = classification.category;
        samples.push(SampleReport {
            name: profile.name.clone(),
            expected: profile.expected_category,
            predicted,
            matches: predicted == profile.expected_category,
            warnings: classification.warnings,
        });
    }
    let matched = samples.iter().filter(|s| s.matches).count();
    Ok(CorpusReport { mode, total: corpus.len(), matched, samples })
}

// ==== Corpus statistics ======================================================

/// An exact fraction of the corpus. Comparisons cross-multiply so shares can
/// be checked without floating-point tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Share {
    pub num: usize,
    pub den: usize,
}

impl Share {
    pub fn as_f64(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Exact equality with `num/den` via cross-multiplication.
    pub fn eq_ratio(&self, num: usize, den: usize) -> bool {
        if (self.den == 0) != (den == 0) {
            return false;
        }
        (self.num as u128) * (den as u128) == (num as u128) * (self.den as u128)
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Descriptive statistics over a corpus: counts by category, platform, and
/// year of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    pub by_category: BTreeMap<Category, usize>,
    pub by_platform: BTreeMap<Platform, usize>,
    pub by_year: BTreeMap<u16, usize>,
}

impl CorpusStats {
    pub fn category_share(&self, category: Category) -> Share {
        Share { num: self.by_category.get(&category).copied().unwrap_or(0), den: self.total }
    }

    pub fn platform_share(&self, platform: Platform) -> Share {
        Share { num: self.by_platform.get(&platform).copied().unwrap_or(0), den: self.total }
    }
}

pub fn corpus_stats(corpus: &[SampleProfile]) -> CorpusStats {
    let mut by_category: BTreeMap<Category, usize> =
        Category::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut by_platform: BTreeMap<Platform, usize> =
        Platform::ALL.into_iter().map(|p| (p, 0)).collect();
    let mut by_year: BTreeMap<u16, usize> = BTreeMap::new();
    for sample in corpus {
        *by_category.entry(sample.expected_category).or_insert(0) += 1;
        *by_platform.entry(sample.platform).or_insert(0) += 1;
        *by_year.entry(sample.year).or_insert(0) += 1;
    }
    CorpusStats { total: corpus.len(), by_category, by_platform, by_year }
}
