//! Acceptance suite: the laboratory's seven top-level claims, one test per
//! criterion. Each test prints a single `[A#] ... PASS/FAIL` line (shown with
//! `--nocapture`) and carries its own tolerance, which is zero unless the
//! criterion itself says otherwise.
//!
//! A1  corpus regression: 20/20 expected labels under KeyLocality, < 1 s
//! A2  statistics reproduction: category, platform, and per-year tallies exact
//! A3  oracle equivalence: classifier == row-predicate oracle on the whole
//!     960-vector feature space, both modes, < 1 s
//! A4  recoverability claims: >= 200 seeded scenarios per category shape,
//!     zero counterexamples, < 30 s
//! A5  three-tier chain of custody + ablations, zero failures
//! A6  extraction soundness vs the config-implied vector + golden round-trips
//! A7  divergence ledger: mode disagreement is exactly the predicted 96 rows

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ransim_core::attack::{AttackerKeySet, FileEnvelope, WRAPPED_KEY_PATH};
use ransim_core::classify::{classify, validate_features, Category, ClassifierMode};
use ransim_core::corpus::{builtin_corpus, classify_corpus, corpus_stats, Platform};
use ransim_core::extract::extract_features;
use ransim_core::features::{enumerate_valid_vectors, implied_features, FeatureVector, SkKind};
use ransim_core::image::{run_scenario_doc, AttackImage};
use ransim_core::pattern::{matching_rows, pattern_cat1_sublabel, pattern_category};
use ransim_core::recover::{attempt_recovery, predict_recoverability, RecoveryStrategy};
use ransim_core::scenario::{
    compile_glob, match_targets, AttackScenario, EncryptionStructure, KeyKind, KeyProvenance,
    KeySource, RemnantDeletion, ScenarioDoc, ScenarioFileEntry,
};
use ransim_core::trace::{emit_trace, parse_trace, TraceKind};
use ransim_core::vfs::DeleteMode;

// ==== shared harness =========================================================

const NON_RANSOM: [RecoveryStrategy; 4] = [
    RecoveryStrategy::ShadowRestore,
    RecoveryStrategy::Undelete,
    RecoveryStrategy::PayloadKeyExtraction,
    RecoveryStrategy::ResidueKeyRecovery,
];

/// Print the criterion's verdict line, then fail the test on any violation.
fn verdict(tag: &str, what: &str, failures: Vec<String>, started: Instant) {
    let ms = started.elapsed().as_millis();
    let ok = failures.is_empty();
    println!("[{tag}] {what}: {} ({ms} ms)", if ok { "PASS" } else { "FAIL" });
    if !ok {
        let shown = failures.iter().take(5).cloned().collect::<Vec<_>>().join("\n  ");
        panic!("[{tag}] {} violation(s):\n  {shown}", failures.len());
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Printable-ASCII content of the given length.
fn text(rng: &mut ChaCha8Rng, len: usize) -> String {
    let mut buf = vec![0u8; len];
    rng.fill_bytes(&mut buf);
    buf.into_iter().map(|b| (b' ' + b % 95) as char).collect()
}

/// A small victim tree: `targets` files under docs/, `bystanders` under sys/.
fn random_tree(rng: &mut ChaCha8Rng, targets: usize, bystanders: usize) -> Vec<ScenarioFileEntry> {
    let mut files = Vec::new();
    for j in 0..targets {
        let len = 16 + (rng.next_u32() % 145) as usize;
        files.push(ScenarioFileEntry { path: format!("docs/f{j:02}.dat"), content: text(rng, len) });
    }
    for j in 0..bystanders {
        let len = 8 + (rng.next_u32() % 57) as usize;
        files.push(ScenarioFileEntry { path: format!("sys/s{j:02}.log"), content: text(rng, len) });
    }
    files
}

fn build_doc(
    id: String,
    seed: u64,
    files: Vec<ScenarioFileEntry>,
    glob: &str,
    encryption: EncryptionStructure,
    delete_shadow_copies: bool,
    remnant_deletion: RemnantDeletion,
) -> ScenarioDoc {
    let mut doc = ScenarioDoc::new(AttackScenario {
        scenario_id: id,
        encryption,
        delete_shadow_copies,
        remnant_deletion,
        target_glob: glob.to_string(),
        rng_seed: seed,
    });
    doc.fs = Some(files);
    doc
}

fn single(kind: KeyKind, source: KeySource, residue: bool) -> EncryptionStructure {
    let provenance =
        if residue { KeyProvenance::with_residue(source) } else { KeyProvenance::new(source) };
    EncryptionStructure::SingleKey { kind, provenance }
}

fn hybrid_per_file(source: KeySource, residue: bool) -> EncryptionStructure {
    let master_provenance =
        if residue { KeyProvenance::with_residue(source) } else { KeyProvenance::new(source) };
    EncryptionStructure::HybridPerFile { master_provenance }
}

fn hybrid_three_tier(source: KeySource, residue: bool) -> EncryptionStructure {
    let master_provenance =
        if residue { KeyProvenance::with_residue(source) } else { KeyProvenance::new(source) };
    EncryptionStructure::HybridThreeTier { master_provenance }
}

// ==== A1: corpus regression ==================================================

#[test]
fn a1_corpus_regression() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let corpus = builtin_corpus();
    let report = classify_corpus(&corpus, ClassifierMode::KeyLocality).expect("corpus classifies");
    if report.total != 20 {
        failures.push(format!("corpus has {} samples, want 20", report.total));
    }
    for miss in report.mismatches() {
        failures.push(format!(
            "{}: expected {}, predicted {}",
            miss.name, miss.expected, miss.predicted
        ));
    }
    if report.matched != report.total {
        failures.push(format!("{}/{} matched", report.matched, report.total));
    }
    if started.elapsed().as_secs_f64() >= 1.0 {
        failures.push(format!("runtime {:?} breaches the 1 s budget", started.elapsed()));
    }

    verdict("A1", "corpus regression 20/20 under KeyLocality", failures, started);
}

// ==== A2: statistics reproduction ============================================

#[test]
fn a2_statistics_reproduction() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let corpus = builtin_corpus();
    let stats = corpus_stats(&corpus);

    // Exact category shares, checked by integer cross-multiplication.
    for (category, percent) in [
        (Category::Cat1, 5),
        (Category::Cat2, 5),
        (Category::Cat3, 20),
        (Category::Cat4, 35),
        (Category::Cat5, 35),
    ] {
        let share = stats.category_share(category);
        if !share.eq_ratio(percent, 100) {
            failures.push(format!("{category} share {share} != {percent}%"));
        }
    }
    let windows = stats.platform_share(Platform::Windows);
    if !windows.eq_ratio(85, 100) {
        failures.push(format!("Windows share {windows} != 85%"));
    }

    let want_years: BTreeMap<u16, usize> =
        [(1989, 1), (2014, 2), (2015, 4), (2016, 8), (2017, 4), (2018, 1)].into_iter().collect();
    if stats.by_year != want_years {
        failures.push(format!("per-year histogram {:?} != {:?}", stats.by_year, want_years));
    }

    verdict("A2", "corpus statistics exact (35/35/85, year tally)", failures, started);
}

// ==== A3: oracle equivalence =================================================

#[test]
fn a3_oracle_equivalence() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let space = enumerate_valid_vectors();
    if space.len() != 960 {
        failures.push(format!("feature space has {} vectors, want 960", space.len()));
    }
    for v in &space {
        if let Err(e) = validate_features(v) {
            failures.push(format!("{v:?} rejected by validation: {e}"));
            continue;
        }
        for mode in [ClassifierMode::Literal, ClassifierMode::KeyLocality] {
            let got = classify(v, mode).expect("enumerated vector classifies").category;
            let want = pattern_category(v, mode);
            if got != want {
                failures.push(format!("{mode:?} {v:?}: classifier {got}, oracle {want}"));
            }
            // The category rows partition the space: exactly one row matches.
            let rows = matching_rows(v, mode);
            if rows.len() != 1 {
                failures.push(format!("{mode:?} {v:?}: {} oracle rows match", rows.len()));
            }
            let sublabel = classify(v, mode).expect("classifies").sublabel;
            if sublabel != pattern_cat1_sublabel(v) {
                failures.push(format!("{mode:?} {v:?}: sublabel drift"));
            }
        }
    }
    if started.elapsed().as_secs_f64() >= 1.0 {
        failures.push(format!("runtime {:?} breaches the 1 s budget", started.elapsed()));
    }

    verdict("A3", "classifier == row oracle on all 960 vectors, both modes", failures, started);
}

// ==== A4: recoverability claims ==============================================

/// What a category shape promises about the recovery fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Claim {
    /// Predicted victim-side strategies reach 1.0 with no attacker keys.
    FullWithoutRansom,
    /// Every non-ransom strategy yields 0.0; the attacker's keys yield 1.0.
    RansomGated,
    /// Residue alone reaches 1.0 with no attacker keys.
    ResidueBackdoor,
}

fn category_shape(category: Category, i: usize) -> (EncryptionStructure, bool, RemnantDeletion, Claim) {
    use KeyKind::{Asymmetric, Symmetric};
    use KeySource::{C2Download, LocalGeneration, PayloadEmbedded};
    use RemnantDeletion::{MetadataOnly, None as Keep, OverwriteRandom};

    match category {
        Category::Cat1 => {
            let (shadow, remnant) = [
                (false, Keep),
                (true, Keep),
                (false, OverwriteRandom),
                (true, OverwriteRandom),
                (false, MetadataOnly),
            ][i % 5];
            (EncryptionStructure::NoEncryption, shadow, remnant, Claim::FullWithoutRansom)
        }
        Category::Cat2 => {
            let encryption = [
                single(Symmetric, PayloadEmbedded, false),
                single(Symmetric, C2Download, false),
                single(Symmetric, LocalGeneration, false),
                single(Asymmetric, C2Download, false),
                single(Asymmetric, PayloadEmbedded, false),
                single(Asymmetric, LocalGeneration, false),
                hybrid_per_file(C2Download, false),
                hybrid_per_file(PayloadEmbedded, false),
                hybrid_per_file(LocalGeneration, false),
                hybrid_three_tier(C2Download, false),
                hybrid_three_tier(PayloadEmbedded, false),
                hybrid_three_tier(LocalGeneration, false),
            ][i % 12]
                .clone();
            let remnant = if (i / 12) % 2 == 0 { Keep } else { MetadataOnly };
            (encryption, false, remnant, Claim::FullWithoutRansom)
        }
        Category::Cat3 => {
            let encryption = [
                single(Symmetric, PayloadEmbedded, false),
                single(Symmetric, PayloadEmbedded, true),
                single(Symmetric, LocalGeneration, true),
            ][i % 3]
                .clone();
            let (shadow, remnant) = [
                (true, Keep),
                (false, OverwriteRandom),
                (true, OverwriteRandom),
                (true, MetadataOnly),
            ][(i / 3) % 4];
            (encryption, shadow, remnant, Claim::FullWithoutRansom)
        }
        Category::Cat4 => {
            let encryption = [
                single(Symmetric, C2Download, false),
                single(Asymmetric, C2Download, false),
                single(Asymmetric, PayloadEmbedded, false),
                single(Asymmetric, LocalGeneration, false),
                single(Symmetric, LocalGeneration, false),
            ][i % 5]
                .clone();
            (encryption, true, OverwriteRandom, Claim::RansomGated)
        }
        Category::Cat5 => {
            let source = [C2Download, PayloadEmbedded, LocalGeneration][i % 3];
            let residue = (i / 6) % 2 == 1;
            let encryption = if (i / 3) % 2 == 0 {
                hybrid_per_file(source, residue)
            } else {
                hybrid_three_tier(source, residue)
            };
            let claim = if residue { Claim::ResidueBackdoor } else { Claim::RansomGated };
            (encryption, true, OverwriteRandom, claim)
        }
    }
}

#[test]
fn a4_recoverability_claims() {
    const RUNS_PER_CATEGORY: usize = 200;
    let started = Instant::now();
    let mut failures = Vec::new();

    // The qualitative predictions behind the shapes.
    for (category, ransom) in [
        (Category::Cat1, false),
        (Category::Cat2, false),
        (Category::Cat3, false),
        (Category::Cat4, true),
        (Category::Cat5, true),
    ] {
        if predict_recoverability(category).ransom_required != ransom {
            failures.push(format!("{category}: ransom_required != {ransom}"));
        }
    }

    let mut runs = 0usize;
    for category in Category::ALL {
        for i in 0..RUNS_PER_CATEGORY {
            let seed = 0xA400_0000 + (category.index() as u64) * 0x1_0000 + i as u64;
            let mut rng = rng_for(seed);
            let targets = 1 + (rng.next_u32() % 5) as usize;
            let bystanders = (rng.next_u32() % 3) as usize;
            let tree = random_tree(&mut rng, targets, bystanders);
            let (encryption, shadow, remnant, claim) = category_shape(category, i);
            let doc = build_doc(
                format!("a4-{category}-{i}"),
                seed,
                tree,
                "docs/**",
                encryption,
                shadow,
                remnant,
            );
            let image = run_scenario_doc(&doc).expect("a4 scenario executes");
            runs += 1;

            let vector = extract_features(&image.trace).expect("a4 trace extracts");
            let got = classify(&vector, ClassifierMode::KeyLocality)
                .expect("a4 vector classifies")
                .category;
            if got != category {
                failures.push(format!("{}: classified {got}, shaped for {category}", doc.scenario.scenario_id));
                continue;
            }

            match claim {
                Claim::FullWithoutRansom => {
                    let strategies = predict_recoverability(category).strategy_set();
                    let report = attempt_recovery(&image, &strategies, None);
                    if report.fraction != 1.0 || !report.complete() {
                        failures.push(format!(
                            "{}: predicted strategies recovered {:.3}, want 1.0",
                            doc.scenario.scenario_id, report.fraction
                        ));
                    }
                }
                Claim::RansomGated => {
                    let free = attempt_recovery(&image, &NON_RANSOM, None);
                    if free.fraction != 0.0 {
                        failures.push(format!(
                            "{}: non-ransom strategies recovered {:.3}, want 0.0",
                            doc.scenario.scenario_id, free.fraction
                        ));
                    }
                    let paid = attempt_recovery(
                        &image,
                        &[RecoveryStrategy::AttackerKeyDecryption],
                        Some(&image.attacker_keys),
                    );
                    if paid.fraction != 1.0 {
                        failures.push(format!(
                            "{}: attacker keys recovered {:.3}, want 1.0",
                            doc.scenario.scenario_id, paid.fraction
                        ));
                    }
                }
                Claim::ResidueBackdoor => {
                    let report =
                        attempt_recovery(&image, &[RecoveryStrategy::ResidueKeyRecovery], None);
                    if report.fraction != 1.0 {
                        failures.push(format!(
                            "{}: residue recovery reached {:.3}, want 1.0",
                            doc.scenario.scenario_id, report.fraction
                        ));
                    }
                }
            }
        }
    }

    if runs < 5 * RUNS_PER_CATEGORY {
        failures.push(format!("only {runs} runs executed"));
    }
    if started.elapsed().as_secs_f64() >= 30.0 {
        failures.push(format!("runtime {:?} breaches the 30 s budget", started.elapsed()));
    }

    verdict(
        "A4",
        "recoverability claims over 200 seeded scenarios per category",
        failures,
        started,
    );
}

// ==== A5: three-tier chain of custody ========================================

/// Pull (master, sub, per-file key ids) out of a three-tier trace.
fn three_tier_roles(image: &AttackImage) -> Result<(String, String, BTreeSet<String>), String> {
    let mut master = None;
    let mut sub = None;
    let mut per_file = BTreeSet::new();
    for event in &image.trace.events {
        match event.kind {
            TraceKind::KeyGen | TraceKind::EmbeddedKeyRead | TraceKind::NetFetchKey => {
                let id = event.attrs.get("key_id").cloned().ok_or("acquisition without key_id")?;
                match event.attrs.get("key_kind").map(String::as_str) {
                    Some("asymmetric") => {
                        if event.attrs.get("role").map(String::as_str) == Some("sub") {
                            if sub.replace(id).is_some() {
                                return Err("two sub key pairs".into());
                            }
                        } else if master.replace(id).is_some() {
                            return Err("two master key pairs".into());
                        }
                    }
                    Some("symmetric") => {
                        per_file.insert(id);
                    }
                    other => return Err(format!("acquisition with kind {other:?}")),
                }
            }
            _ => {}
        }
    }
    Ok((master.ok_or("no master pair")?, sub.ok_or("no sub pair")?, per_file))
}

#[test]
fn a5_three_tier_chain_of_custody() {
    const RUNS: usize = 60;
    let started = Instant::now();
    let mut failures = Vec::new();

    for r in 0..RUNS {
        let source = [KeySource::PayloadEmbedded, KeySource::C2Download, KeySource::LocalGeneration]
            [r % 3];
        let seed = 0xA500_0000 + r as u64;
        let mut rng = rng_for(seed);
        let targets = 1 + (rng.next_u32() % 5) as usize;
        let tree = random_tree(&mut rng, targets, 1);
        let doc = build_doc(
            format!("a5-{r}"),
            seed,
            tree,
            "docs/**",
            hybrid_three_tier(source, false),
            true,
            RemnantDeletion::OverwriteRandom,
        );
        let image = run_scenario_doc(&doc).expect("a5 scenario executes");
        let id = &doc.scenario.scenario_id;

        // Custody shape: one per-file key per encrypted file, every envelope
        // wrapped by the sub pair, exactly one sub wrap under the master.
        let (master, sub, per_file) = match three_tier_roles(&image) {
            Ok(roles) => roles,
            Err(e) => {
                failures.push(format!("{id}: {e}"));
                continue;
            }
        };
        let encrypted = image.artifacts.ciphertext_map.len();
        if encrypted != targets {
            failures.push(format!("{id}: {encrypted} envelopes for {targets} targets"));
        }
        if per_file.len() != targets {
            failures.push(format!("{id}: {} per-file keys for {targets} files", per_file.len()));
        }
        let mut wrap_edges: BTreeSet<(String, String)> = BTreeSet::new();
        for event in &image.trace.events {
            if let (Some(of), Some(by)) = (event.attrs.get("wrap_of"), event.attrs.get("wrap_by")) {
                wrap_edges.insert((of.clone(), by.clone()));
            }
        }
        let under_master: Vec<_> = wrap_edges.iter().filter(|(_, by)| *by == master).collect();
        if under_master.len() != 1 || under_master[0].0 != sub {
            failures.push(format!("{id}: master wraps {under_master:?}, want exactly [sub]"));
        }
        for key in &per_file {
            if !wrap_edges.contains(&(key.clone(), sub.clone())) {
                failures.push(format!("{id}: per-file key {key} not wrapped by the sub pair"));
            }
        }

        // Intact chain: ransom-gated, and the master secret alone suffices.
        let free = attempt_recovery(&image, &NON_RANSOM, None);
        if free.fraction != 0.0 {
            failures.push(format!("{id}: non-ransom recovery {:.3}, want 0.0", free.fraction));
        }
        let paid = attempt_recovery(
            &image,
            &[RecoveryStrategy::AttackerKeyDecryption],
            Some(&image.attacker_keys),
        );
        if paid.fraction != 1.0 {
            failures.push(format!("{id}: intact chain recovery {:.3}, want 1.0", paid.fraction));
        }

        // Ablation 1: no attacker keys at all (the master link is missing).
        let keyless = attempt_recovery(
            &image,
            &[RecoveryStrategy::AttackerKeyDecryption],
            Some(&AttackerKeySet::default()),
        );
        if keyless.fraction != 0.0 {
            failures.push(format!("{id}: keyless chain recovery {:.3}, want 0.0", keyless.fraction));
        }

        // Ablation 2: destroy the wrapped sub-key container.
        let mut no_container = image.clone();
        let mut noise = rng_for(seed ^ 0xab1a_7e01);
        no_container
            .fs
            .delete_file(WRAPPED_KEY_PATH, DeleteMode::OverwriteRandom, &mut noise)
            .expect("container exists");
        let broken = attempt_recovery(
            &no_container,
            &[RecoveryStrategy::AttackerKeyDecryption],
            Some(&no_container.attacker_keys),
        );
        if broken.fraction != 0.0 {
            failures.push(format!(
                "{id}: recovery without the sub-key container {:.3}, want 0.0",
                broken.fraction
            ));
        }

        // Ablation 3: strip the per-file wrap out of every envelope.
        let mut no_wraps = image.clone();
        for envelope_path in image.artifacts.ciphertext_map.values() {
            let entry = no_wraps.fs.entry(envelope_path).expect("envelope exists");
            let mut envelope = FileEnvelope::decode(&entry.content).expect("envelope decodes");
            envelope.wrapped_key.clear();
            no_wraps.fs.write_file(envelope_path, &envelope.encode()).expect("rewrite envelope");
        }
        let unwrappable = attempt_recovery(
            &no_wraps,
            &[RecoveryStrategy::AttackerKeyDecryption],
            Some(&no_wraps.attacker_keys),
        );
        if unwrappable.fraction != 0.0 {
            failures.push(format!(
                "{id}: recovery without per-file wraps {:.3}, want 0.0",
                unwrappable.fraction
            ));
        }
    }

    verdict("A5", "three-tier chain of custody and link ablations", failures, started);
}

// ==== A6: extraction soundness ===============================================

#[test]
fn a6_extraction_soundness() {
    const RUNS: usize = 300;
    let started = Instant::now();
    let mut failures = Vec::new();

    for i in 0..RUNS {
        let seed = 0xA600_0000 + i as u64;
        let mut rng = rng_for(seed);
        let residue = rng.next_u32() % 2 == 1;
        let encryption = [
            EncryptionStructure::NoEncryption,
            single(KeyKind::Symmetric, KeySource::PayloadEmbedded, residue),
            single(KeyKind::Symmetric, KeySource::C2Download, residue),
            single(KeyKind::Symmetric, KeySource::LocalGeneration, residue),
            single(KeyKind::Asymmetric, KeySource::C2Download, residue),
            single(KeyKind::Asymmetric, KeySource::PayloadEmbedded, residue),
            single(KeyKind::Asymmetric, KeySource::LocalGeneration, residue),
            hybrid_per_file(KeySource::C2Download, residue),
            hybrid_three_tier(KeySource::PayloadEmbedded, residue),
            hybrid_three_tier(KeySource::LocalGeneration, residue),
        ][i % 10]
            .clone();
        let glob = ["docs/**", "**", "docs/*.dat", "none/**", "sys/**"][(i / 10) % 5];
        let delete_shadow_copies = rng.next_u32() % 2 == 1;
        let remnant = [RemnantDeletion::None, RemnantDeletion::MetadataOnly, RemnantDeletion::OverwriteRandom]
            [(rng.next_u32() % 3) as usize];
        let targets = 1 + (rng.next_u32() % 4) as usize;
        let bystanders = (rng.next_u32() % 3) as usize;
        let tree = random_tree(&mut rng, targets, bystanders);
        let doc = build_doc(
            format!("a6-{i}"),
            seed,
            tree,
            glob,
            encryption,
            delete_shadow_copies,
            remnant,
        );

        let pre_attack = doc.build_fs().expect("a6 tree builds");
        let pattern = compile_glob(glob).expect("a6 glob compiles");
        let matched = match_targets(&pre_attack, &pattern).len();
        let implied = implied_features(&doc.scenario, matched);

        let image = run_scenario_doc(&doc).expect("a6 scenario executes");
        let extracted = match extract_features(&image.trace) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{}: extraction failed: {e}", doc.scenario.scenario_id));
                continue;
            }
        };
        if extracted != implied {
            failures.push(format!(
                "{}: extracted {:?} != implied {:?}",
                doc.scenario.scenario_id, extracted, implied
            ));
        }
        if let Err(e) = validate_features(&extracted) {
            failures.push(format!("{}: invalid extracted vector: {e}", doc.scenario.scenario_id));
        }
    }

    // Golden traces survive a parse/emit round trip byte-for-byte.
    let data_dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut goldens = 0usize;
    for entry in std::fs::read_dir(&data_dir).expect("golden dir exists") {
        let path = entry.expect("dir entry").path();
        if path.extension().map(|e| e == "trace") != Some(true) {
            continue;
        }
        goldens += 1;
        let original = std::fs::read_to_string(&path).expect("golden reads");
        match parse_trace(&original) {
            Ok(log) => {
                if emit_trace(&log) != original {
                    failures.push(format!("{}: emit(parse(.)) drift", path.display()));
                }
            }
            Err(e) => failures.push(format!("{}: golden fails to parse: {e}", path.display())),
        }
    }
    if goldens < 5 {
        failures.push(format!("only {goldens} golden traces found"));
    }

    verdict(
        "A6",
        "extraction == config-implied vector on 300 runs + golden round-trips",
        failures,
        started,
    );
}

// ==== A7: divergence ledger ==================================================

/// The predicted Literal-vs-KeyLocality disagreement: a deleting single-key
/// symmetric structure whose key never verifiably sits on the victim.
fn predicted_divergent(v: &FeatureVector) -> bool {
    v.sk_kind == SkKind::Symmetric
        && (v.del_shadow_copies || v.overwrite_delete)
        && !(v.sk_pemb || (v.sk_localgen && v.key_residue_on_victim))
}

#[test]
fn a7_divergence_ledger() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let mut divergent = 0usize;
    let mut residue_true = 0usize;
    for v in enumerate_valid_vectors() {
        let literal = classify(&v, ClassifierMode::Literal).expect("classifies").category;
        let locality = classify(&v, ClassifierMode::KeyLocality).expect("classifies").category;
        let differs = literal != locality;
        if differs != predicted_divergent(&v) {
            failures.push(format!("{v:?}: differs={differs} but predicate says {}", !differs));
            continue;
        }
        if differs {
            divergent += 1;
            if v.key_residue_on_victim {
                residue_true += 1;
            }
            // Divergence always moves the same way: Literal credits the
            // symmetric key (CAT3), KeyLocality does not (CAT4).
            if literal != Category::Cat3 || locality != Category::Cat4 {
                failures.push(format!("{v:?}: diverges {literal} vs {locality}"));
            }
        }
    }
    if divergent != 96 {
        failures.push(format!("{divergent} divergent vectors, want 96"));
    }
    if residue_true != 24 || divergent - residue_true != 72 {
        failures.push(format!(
            "divergence split {residue_true} residue-true / {} residue-false, want 24/72",
            divergent - residue_true
        ));
    }

    // The corpus samples sitting in the divergence zone are exactly the two
    // symmetric C2-key families.
    let mut corpus_divergent: Vec<String> = builtin_corpus()
        .iter()
        .filter(|sample| predicted_divergent(&sample.features))
        .map(|sample| sample.name.clone())
        .collect();
    corpus_divergent.sort();
    if corpus_divergent != ["CryptoWall", "DMA-Locker"] {
        failures.push(format!("corpus divergence set {corpus_divergent:?}"));
    }

    verdict("A7", "mode divergence is exactly the 96 predicted vectors", failures, started);
}
