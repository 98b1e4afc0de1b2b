//! `ransim` — command-line front end for the attack-structure laboratory.
//!
//! Subcommands cover the whole pipeline: `simulate` runs a scenario document
//! against a fresh virtual filesystem and stores the resulting image,
//! `extract` turns a trace into a feature vector, `classify` maps a vector
//! (or trace) to its virulence category, `recover` validates recoverability
//! claims against a stored image, `corpus` reports on the built-in sample
//! corpus, and `c2 serve` runs the stream-socket key endpoint.
//!
//! Exit codes: 0 success, 2 validation/parse error, 3 recovery incomplete,
//! 4 attack aborted.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ransim_core::attack::{execute_attack, AttackError, AttackerKeySet};
use ransim_core::c2::{C2Server, C2Transport, TcpC2Client};
use ransim_core::classify::{classify, Category, Classification, ClassifierMode};
use ransim_core::corpus::{
    builtin_corpus, classify_corpus, corpus_stats, load_corpus, Platform, SampleProfile,
};
use ransim_core::extract::extract_features;
use ransim_core::features::FeatureVector;
use ransim_core::image::{
    capture_baseline, load_image, run_scenario_doc, store_image, AttackImage, TRACE_FILE,
};
use ransim_core::recover::{attempt_recovery, RecoveryStrategy};
use ransim_core::scenario::{parse_scenario_json, ScenarioDoc};
use ransim_core::trace::parse_trace;

const EXIT_INVALID: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_ABORTED: u8 = 4;

// ==== argument surface =======================================================

#[derive(Parser)]
#[command(
    name = "ransim",
    version,
    about = "Desk-scale laboratory for ransomware attack structures",
    propagate_version = true
)]
struct Cli {
    /// Report rendering for stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Table rows as printed: a symmetric single key is always CAT3.
    Literal,
    /// Key-locality reading: CAT3 needs the symmetric key on the victim.
    KeyLocality,
}

impl From<ModeArg> for ClassifierMode {
    fn from(mode: ModeArg) -> ClassifierMode {
        match mode {
            ModeArg::Literal => ClassifierMode::Literal,
            ModeArg::KeyLocality => ClassifierMode::KeyLocality,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario document and store the attack image.
    Simulate(SimulateArgs),
    /// Extract the feature vector from an execution trace.
    Extract(ExtractArgs),
    /// Classify a feature profile or trace into CAT1..CAT5.
    Classify(ClassifyArgs),
    /// Attempt recovery strategies against a stored attack image.
    Recover(RecoverArgs),
    /// Report on the built-in 20-sample corpus.
    Corpus(CorpusArgs),
    /// Command-and-control endpoint utilities.
    #[command(subcommand)]
    C2(C2Command),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario document (JSON, schema v1).
    #[arg(long)]
    scenario: PathBuf,
    /// Directory to store the attack image in.
    #[arg(long)]
    out: PathBuf,
    /// Override the document's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Key endpoint: "inproc", "none", or the host:port of a `c2 serve`.
    #[arg(long, default_value = "inproc")]
    c2: String,
}

#[derive(Args)]
struct ExtractArgs {
    /// Trace file; "-" reads stdin.
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Feature profile (JSON feature vector, or any document with a
    /// "features" field); "-" reads stdin.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Execution trace to extract and classify; "-" reads stdin.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::KeyLocality)]
    mode: ModeArg,
}

#[derive(Args)]
struct RecoverArgs {
    /// Stored attack image directory (from `simulate --out`).
    #[arg(long)]
    image: PathBuf,
    /// Comma-separated strategies, or "all": shadow_restore, undelete,
    /// payload_key_extraction, residue_key_recovery, attacker_key_decryption.
    #[arg(long)]
    strategies: String,
    /// Attacker key set (JSON; the stored image's attacker_keys.json models
    /// what paying the ransom buys).
    #[arg(long)]
    attacker_keys: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Re-classify every sample and compare with its expected category.
    #[arg(long)]
    verify: bool,
    /// Category and platform share statistics.
    #[arg(long)]
    stats: bool,
    /// Per-year sample histogram.
    #[arg(long)]
    by_year: bool,
    /// Write static plot data files (TSV) into this directory.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Classify an external corpus file instead of the built-in one.
    #[arg(long)]
    corpus_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::KeyLocality)]
    mode: ModeArg,
}

#[derive(Subcommand)]
enum C2Command {
    /// Run the stream-socket key endpoint until killed (or --max-runtime-secs).
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    /// Seed for the endpoint's key issuance.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop serving after this many seconds (default: run until killed).
    #[arg(long)]
    max_runtime_secs: Option<u64>,
}

// ==== entry point ============================================================

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ransim: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(cli.format, args),
        Command::Extract(args) => cmd_extract(cli.format, args),
        Command::Classify(args) => cmd_classify(cli.format, args),
        Command::Recover(args) => cmd_recover(cli.format, args),
        Command::Corpus(args) => cmd_corpus(cli.format, args),
        Command::C2(C2Command::Serve(args)) => cmd_c2_serve(args),
    }
}

/// Read a file argument, with "-" meaning stdin.
fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading stdin")?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn emit<T: Serialize>(format: Format, value: &T, text: String) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Text => print!("{text}"),
    }
    Ok(())
}

// ==== simulate ===============================================================

/// Mirror of the in-process pipeline for caller-supplied transports.
fn run_doc_with(
    doc: &ScenarioDoc,
    c2: Option<&mut dyn C2Transport>,
) -> Result<AttackImage, AttackError> {
    let mut fs = doc.build_fs().map_err(|e| AttackError::Config(e.to_string()))?;
    if doc.take_snapshot() {
        fs.take_shadow_snapshot();
    }
    let baseline = capture_baseline(&fs);
    let outcome = execute_attack(&doc.scenario, &mut fs, c2)?;
    Ok(AttackImage::from_outcome(baseline, fs, outcome))
}

#[derive(Serialize)]
struct SimulateSummary {
    scenario_id: String,
    out_dir: String,
    targets: usize,
    trace_events: usize,
    exfiltrated_blobs: usize,
    c2: String,
}

fn cmd_simulate(format: Format, args: &SimulateArgs) -> Result<u8> {
    let text = read_input(&args.scenario)?;
    let mut doc = parse_scenario_json(&text)
        .with_context(|| format!("scenario {}", args.scenario.display()))?;
    if let Some(seed) = args.seed {
        doc.scenario.rng_seed = seed;
    }

    let result = match args.c2.as_str() {
        "inproc" => run_scenario_doc(&doc),
        "none" => run_doc_with(&doc, None),
        addr => match TcpC2Client::connect(addr) {
            Ok(mut client) => run_doc_with(&doc, Some(&mut client)),
            Err(e) => Err(AttackError::C2(e)),
        },
    };
    let image = match result {
        Ok(image) => image,
        Err(AttackError::Config(e)) => bail!("invalid scenario: {e}"),
        Err(e) => {
            eprintln!("ransim: attack aborted: {e}");
            return Ok(EXIT_ABORTED);
        }
    };

    store_image(&image, &args.out)
        .with_context(|| format!("storing image in {}", args.out.display()))?;

    let summary = SimulateSummary {
        scenario_id: doc.scenario.scenario_id.clone(),
        out_dir: args.out.display().to_string(),
        targets: image.artifacts.targets.len(),
        trace_events: image.trace.events.len(),
        exfiltrated_blobs: image.artifacts.exfiltrated_blobs.len(),
        c2: args.c2.clone(),
    };
    let mut text = String::new();
    let _ = writeln!(text, "scenario       {}", summary.scenario_id);
    let _ = writeln!(text, "image          {}", summary.out_dir);
    let _ = writeln!(text, "targets        {}", summary.targets);
    let _ = writeln!(text, "trace events   {}", summary.trace_events);
    let _ = writeln!(text, "exfil blobs    {}", summary.exfiltrated_blobs);
    let _ = writeln!(text, "trace file     {}", args.out.join(TRACE_FILE).display());
    emit(format, &summary, text)?;
    Ok(0)
}

// ==== extract ================================================================

fn render_vector(v: &FeatureVector) -> String {
    let mut text = String::new();
    let flags = [
        ("hk_c2", v.hk_c2),
        ("hk_pemb", v.hk_pemb),
        ("hk_localgen", v.hk_localgen),
        ("sk_c2", v.sk_c2),
        ("sk_pemb", v.sk_pemb),
        ("sk_localgen", v.sk_localgen),
        ("del_shadow_copies", v.del_shadow_copies),
        ("overwrite_delete", v.overwrite_delete),
        ("key_residue_on_victim", v.key_residue_on_victim),
    ];
    for (name, value) in flags {
        let _ = writeln!(text, "{name:<22} {value}");
    }
    let _ = writeln!(text, "{:<22} {:?}", "sk_kind", v.sk_kind);
    let codes = v.active_codes();
    let _ = writeln!(
        text,
        "{:<22} {}",
        "active codes",
        if codes.is_empty() { "(none)".to_string() } else { codes.join(" ") }
    );
    text
}

fn cmd_extract(format: Format, args: &ExtractArgs) -> Result<u8> {
    let text = read_input(&args.trace)?;
    let log = parse_trace(&text).context("parsing trace")?;
    let vector = extract_features(&log).context("extracting features")?;
    emit(format, &vector, render_vector(&vector))?;
    Ok(0)
}

// ==== classify ===============================================================

fn render_classification(c: &Classification) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "{}", c.category);
    if let Some(sublabel) = c.sublabel {
        let _ = writeln!(text, "sublabel       {sublabel:?}");
    }
    let _ = writeln!(
        text,
        "mode           {}",
        match c.mode {
            ClassifierMode::Literal => "literal",
            ClassifierMode::KeyLocality => "key-locality",
        }
    );
    for warning in &c.warnings {
        let _ = writeln!(text, "warning        {warning}");
    }
    for step in &c.rationale {
        let _ = writeln!(text, "  {:<10} {}", step.rule, step.detail);
    }
    text
}

fn cmd_classify(format: Format, args: &ClassifyArgs) -> Result<u8> {
    let vector = match (&args.profile, &args.trace) {
        (Some(_), Some(_)) => bail!("pass either --profile or --trace, not both"),
        (None, None) => bail!("pass --profile or --trace"),
        (Some(profile), None) => {
            let text = read_input(profile)?;
            // Accept a bare feature vector or any document with a "features"
            // field (e.g. a corpus sample profile).
            #[derive(serde::Deserialize)]
            struct ProfileDoc {
                features: FeatureVector,
            }
            match serde_json::from_str::<ProfileDoc>(&text) {
                Ok(doc) => doc.features,
                Err(_) => serde_json::from_str::<FeatureVector>(&text)
                    .context("parsing feature profile")?,
            }
        }
        (None, Some(trace)) => {
            let text = read_input(trace)?;
            let log = parse_trace(&text).context("parsing trace")?;
            extract_features(&log).context("extracting features")?
        }
    };
    let classification = classify(&vector, args.mode.into()).context("classifying")?;
    emit(format, &classification, render_classification(&classification))?;
    Ok(0)
}

// ==== recover ================================================================

fn parse_strategies(spec: &str) -> Result<Vec<RecoveryStrategy>> {
    if spec.trim() == "all" {
        return Ok(RecoveryStrategy::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in spec.split(',') {
        let name = name.trim();
        let found = RecoveryStrategy::ALL
            .into_iter()
            .find(|s| s.as_str() == name)
            .with_context(|| format!("unknown strategy {name:?}"))?;
        out.push(found);
    }
    Ok(out)
}

fn cmd_recover(format: Format, args: &RecoverArgs) -> Result<u8> {
    let image = load_image(&args.image)
        .with_context(|| format!("loading image {}", args.image.display()))?;
    let strategies = parse_strategies(&args.strategies)?;
    let attacker_keys: Option<AttackerKeySet> = match &args.attacker_keys {
        Some(path) => Some(
            serde_json::from_str(&read_input(path)?)
                .with_context(|| format!("parsing attacker keys {}", path.display()))?,
        ),
        None => None,
    };

    let report = attempt_recovery(&image, &strategies, attacker_keys.as_ref());

    let mut text = String::new();
    let _ = writeln!(text, "scenario       {}", report.scenario_id);
    let _ = writeln!(
        text,
        "attempted      {}",
        report.strategies_attempted.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(
        text,
        "succeeded      {}",
        if report.strategies_succeeded.is_empty() {
            "(none)".to_string()
        } else {
            report.strategies_succeeded.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        }
    );
    for file in &report.files {
        let _ = writeln!(
            text,
            "  {:<28} {:<16} {:<24} {} B",
            file.path,
            format!("{:?}", file.outcome),
            file.strategy.map(|s| s.as_str()).unwrap_or("-"),
            file.size
        );
    }
    let _ = writeln!(
        text,
        "recovered      {} / {} bytes (fraction {:.3})",
        report.recovered_bytes, report.total_bytes, report.fraction
    );
    emit(format, &report, text)?;

    Ok(if report.fraction == 1.0 { 0 } else { EXIT_INCOMPLETE })
}

// ==== corpus =================================================================

#[derive(Serialize)]
struct CorpusOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    by_year: Option<serde_json::Value>,
}

fn cmd_corpus(format: Format, args: &CorpusArgs) -> Result<u8> {
    let corpus: Vec<SampleProfile> = match &args.corpus_file {
        Some(path) => load_corpus(&read_input(path)?)
            .with_context(|| format!("parsing corpus {}", path.display()))?,
        None => builtin_corpus(),
    };
    let run_verify = args.verify || (!args.stats && !args.by_year && args.plot_data.is_none());

    let mut code = 0u8;
    let mut text = String::new();
    let mut output = CorpusOutput { verify: None, stats: None, by_year: None };

    if run_verify {
        let report = classify_corpus(&corpus, args.mode.into()).context("classifying corpus")?;
        for sample in &report.samples {
            let _ = writeln!(
                text,
                "  {:<16} expected {}  predicted {}  {}",
                sample.name,
                sample.expected,
                sample.predicted,
                if sample.matches { "ok" } else { "MISMATCH" }
            );
        }
        let _ = writeln!(text, "verified       {}/{} matched", report.matched, report.total);
        if !report.all_match() {
            code = 1;
        }
        output.verify = Some(serde_json::to_value(&report)?);
    }

    let stats = corpus_stats(&corpus);
    if args.stats {
        for category in Category::ALL {
            let share = stats.category_share(category);
            let _ = writeln!(
                text,
                "  {category}         {:>2} samples  {share}  ({:.0}%)",
                stats.by_category.get(&category).copied().unwrap_or(0),
                share.as_f64() * 100.0
            );
        }
        for platform in Platform::ALL {
            let share = stats.platform_share(platform);
            let _ = writeln!(
                text,
                "  {:<12} {:>2} samples  {share}  ({:.0}%)",
                platform.to_string(),
                stats.by_platform.get(&platform).copied().unwrap_or(0),
                share.as_f64() * 100.0
            );
        }
        output.stats = Some(serde_json::to_value(&stats)?);
    }
    if args.by_year {
        for (year, count) in &stats.by_year {
            let _ = writeln!(text, "  {year}: {count}");
        }
        output.by_year = Some(serde_json::to_value(&stats.by_year)?);
    }

    if let Some(dir) = &args.plot_data {
        write_plot_data(&corpus, dir)?;
        let _ = writeln!(text, "plot data      {}", dir.display());
    }

    emit(format, &output, text)?;
    Ok(code)
}

/// Static plot data: per-year stacked category counts plus the two share
/// tables, as TSV files a plotting tool can consume directly.
fn write_plot_data(corpus: &[SampleProfile], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stats = corpus_stats(corpus);

    let mut by_year_cat = String::from("year\tCAT1\tCAT2\tCAT3\tCAT4\tCAT5\n");
    for year in stats.by_year.keys() {
        let mut row = vec![0usize; 5];
        for sample in corpus {
            if sample.year == *year {
                row[(sample.expected_category.index() - 1) as usize] += 1;
            }
        }
        let _ = writeln!(
            by_year_cat,
            "{year}\t{}\t{}\t{}\t{}\t{}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    std::fs::write(dir.join("categories_by_year.tsv"), by_year_cat)?;

    let mut categories = String::from("category\tcount\tshare\n");
    for category in Category::ALL {
        let share = stats.category_share(category);
        let _ = writeln!(
            categories,
            "{category}\t{}\t{:.4}",
            stats.by_category.get(&category).copied().unwrap_or(0),
            share.as_f64()
        );
    }
    std::fs::write(dir.join("category_totals.tsv"), categories)?;

    let mut platforms = String::from("platform\tcount\tshare\n");
    for platform in Platform::ALL {
        let share = stats.platform_share(platform);
        let _ = writeln!(
            platforms,
            "{platform}\t{}\t{:.4}",
            stats.by_platform.get(&platform).copied().unwrap_or(0),
            share.as_f64()
        );
    }
    std::fs::write(dir.join("platform_totals.tsv"), platforms)?;
    Ok(())
}

// ==== c2 serve ===============================================================

fn cmd_c2_serve(args: &ServeArgs) -> Result<u8> {
    let mut server = C2Server::spawn(&args.listen, args.seed)
        .with_context(|| format!("binding {}", args.listen))?;
    // The test harness (and shell scripts) parse this line for the port.
    println!("c2 listening on {}", server.local_addr());
    use std::io::Write as _;
    std::io::stdout().flush().ok();

    match args.max_runtime_secs {
        Some(secs) => std::thread::sleep(std::time::Duration::from_secs(secs)),
        None => loop {
            std::thread::sleep(std::time::Duration::from_secs(3600));
        },
    }

    server.shutdown();
    let (beacons, blobs) =
        server.with_state(|s| (s.beacon_count(), s.received_blobs().len()));
    println!("c2 served {beacons} beacon(s), received {blobs} exfil blob(s)");
    Ok(0)
}

// ==== sanity =================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use ransim_core::recover::predict_recoverability;

    #[test]
    fn strategy_spec_round_trips() {
        let all = parse_strategies("all").unwrap();
        assert_eq!(all, RecoveryStrategy::ALL.to_vec());
        let two = parse_strategies("undelete, shadow_restore").unwrap();
        assert_eq!(two, vec![RecoveryStrategy::Undelete, RecoveryStrategy::ShadowRestore]);
        assert!(parse_strategies("telepathy").is_err());
    }

    #[test]
    fn predictions_cover_every_category() {
        for category in Category::ALL {
            let p = predict_recoverability(category);
            assert_eq!(p.category, category);
        }
    }

    #[test]
    fn cli_args_parse() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
