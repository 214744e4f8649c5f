//! The `semloc` command line.
//!
//! ```text
//! semloc [--config FILE] [--seed N] [--threads N] [--cache-dir DIR]
//!        [--format text|csv|json] [--out PATH] <subcommand> [options]
//! ```
//!
//! | subcommand | does |
//! |---|---|
//! | `synth` | writes a seeded synthetic dataset and its manifest into `--out` |
//! | `extract` | extracts features of every listed cloud into the cache |
//! | `dict` | clusters the cached training features into a dictionary file |
//! | `describe` | writes the bag-of-words descriptors of one list as a table |
//! | `train` | fits dictionary + classifier (or the classifier alone from a table) |
//! | `classify` | labels clouds with a trained system |
//! | `evaluate` | scores predictions against truth, or a trained system on the test list |
//! | `sweep` | detector x feature x k x classifier grid, as csv plus a gnuplot `.dat` |
//!
//! Every successful run ends its standard output with one line
//! `summary {json}`. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numeric failure. The configuration format and its keys are documented in
//! [`crate::pipeline::ExperimentConfig`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bow::Dictionary;
use crate::error::Error;
use crate::features::FeatureKind;
use crate::pipeline::{
    self, cloud_list, descriptor_dim, extract_entries, fit_classifier, fit_dictionary, generate_synthetic_dataset,
    load_descriptors, save_descriptors, show_results, sweep, sweep_csv, sweep_dat, ClassifierKind, CloudEntry,
    DetectorKind, ExperimentConfig, ExtractionStats, OutputFormat, SceneSpec, SweepGrid, TrainedSystem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "semloc", version, about = "Bag-of-words semantic localization over RGB-D point clouds")]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for k-means, ESF sampling and the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Feature cache directory, overriding the configuration's `cache_dir`.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => OutputFormat::Text,
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ListChoice {
    Training,
    Test,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (PCD files + manifest.cfg) into --out.
    Synth(SynthArgs),
    /// Extract and cache the features of every training and test cloud.
    Extract,
    /// Build the dictionary from the training features and write it to --out.
    Dict,
    /// Compute bag-of-words descriptors of one cloud list and write them to --out.
    Describe(DescribeArgs),
    /// Train a system and write it to --out.
    Train(TrainArgs),
    /// Label clouds with a trained system.
    Classify(ClassifyArgs),
    /// Evaluate predictions or a trained system.
    Evaluate(EvaluateArgs),
    /// Run a parameter grid and write the accuracy table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    clouds_per_category: usize,
    #[arg(long, default_value_t = 3000)]
    points: usize,
    /// Positional noise standard deviation in meters.
    #[arg(long, default_value_t = 0.001)]
    noise: f64,
    /// Per-cloud placement variation.
    #[arg(long, default_value_t = 0.3)]
    jitter: f64,
    /// Fraction of each category listed under [training]; the rest go to [test].
    #[arg(long, default_value_t = 0.6)]
    split: f64,
}

#[derive(Debug, Args)]
struct DescribeArgs {
    /// Dictionary file from `dict`; not needed for ESF.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ListChoice::Training)]
    list: ListChoice,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Train only the classifier, from a descriptor table written by `describe`.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    /// Dictionary the descriptor table was computed with (local features only).
    #[arg(long, requires = "descriptors")]
    dictionary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Trained system from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Clouds to label; defaults to the configuration's test list.
    clouds: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// `path<TAB>label` predictions, as written by `classify --out`.
    #[arg(long, requires = "truth", conflicts_with = "model")]
    predictions: Option<PathBuf>,
    /// `path<TAB>label` ground truth.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Trained system to evaluate on the configuration's test list.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Precomputed test descriptors from `describe --list test`.
    #[arg(long, requires = "model")]
    descriptors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "uniform_sampling,harris3d")]
    detectors: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "pfh,pfhrgb,fpfh,shot,cshot")]
    features: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "svm,knn")]
    classifiers: Vec<String>,
    /// Gnuplot data file; defaults to --out with a `.dat` extension.
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type Outcome = std::result::Result<Value, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_USAGE;
        }
    };
    let command = command_name(&cli.command);
    match pool.install(|| dispatch(&cli)) {
        Ok(mut summary) => {
            if let Value::Object(map) = &mut summary {
                map.insert("command".into(), json!(command));
            }
            println!("summary {summary}");
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `semloc --help` for usage.");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_DATA
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::Extract => "extract",
        Command::Dict => "dict",
        Command::Describe(_) => "describe",
        Command::Train(_) => "train",
        Command::Classify(_) => "classify",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Extract => extract(cli),
        Command::Dict => dict(cli),
        Command::Describe(a) => describe(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Sweep(a) => run_sweep(cli, a),
    }
}

/// Reads `--config` and applies the global overrides.
fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| usage("this subcommand needs --config"))?;
    let mut config = ExperimentConfig::read(path)?;
    apply_overrides(cli, &mut config);
    Ok(config)
}

fn apply_overrides(cli: &Cli, config: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(dir) = &cli.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
}

fn out_path<'a>(cli: &'a Cli, default: &'a str) -> &'a Path {
    cli.out.as_deref().unwrap_or(Path::new(default))
}

fn write_text(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Run(Error::Io { path: path.to_path_buf(), source: e }))
}

fn extraction_json(s: &ExtractionStats) -> Value {
    json!({
        "clouds": s.clouds,
        "keypoints": s.keypoints,
        "features": s.features,
        "dropped": s.dropped,
        "non_finite": s.non_finite,
        "cache_hits": s.cache_hits,
        "cache_misses": s.cache_misses,
        "compute_seconds": s.normals_seconds + s.detect_seconds + s.describe_seconds,
        "wall_seconds": s.wall_seconds,
    })
}

fn print_extraction(title: &str, s: &ExtractionStats) {
    println!(
        "{title}: {} clouds, {} keypoints, {} features, {} dropped keypoints, {} non-finite points removed",
        s.clouds, s.keypoints, s.features, s.dropped, s.non_finite
    );
    println!("  cache: {} hits, {} misses", s.cache_hits, s.cache_misses);
    println!(
        "  seconds: load {:.3}, normals {:.3}, detection {:.3}, description {:.3}, wall {:.3}",
        s.load_seconds, s.normals_seconds, s.detect_seconds, s.describe_seconds, s.wall_seconds
    );
}

fn synth(cli: &Cli, a: &SynthArgs) -> Outcome {
    let out = cli.out.as_ref().ok_or_else(|| usage("synth needs --out DIR"))?;
    let spec = SceneSpec {
        noise_sigma: a.noise,
        points_per_cloud: a.points,
        clouds_per_category: a.clouds_per_category,
        jitter: a.jitter,
        ..SceneSpec::desk(cli.seed.unwrap_or(0))
    };
    let data = generate_synthetic_dataset(&spec, out, Some(a.split))?;
    println!("wrote {} training and {} test clouds to {}", data.training.len(), data.test.len(), out.display());
    println!("manifest: {}", data.manifest.display());
    Ok(json!({
        "manifest": data.manifest.display().to_string(),
        "training": data.training.len(),
        "test": data.test.len(),
        "categories": spec.categories.iter().map(|c| c.code.clone()).collect::<Vec<_>>(),
    }))
}

fn extract(cli: &Cli) -> Outcome {
    let config = load_config(cli)?;
    if config.cache_dir.is_none() {
        return Err(usage("extract stores features in the cache; set --cache-dir or `cache_dir`"));
    }
    let entries: Vec<CloudEntry> = config.training.iter().chain(&config.test).cloned().collect();
    if entries.is_empty() {
        return Err(Failure::Run(Error::InsufficientData("the configuration lists no clouds".into())));
    }
    let (_, stats) = extract_entries(&config, &entries)?;
    print_extraction("extracted", &stats);
    Ok(extraction_json(&stats))
}

fn dict(cli: &Cli) -> Outcome {
    let config = load_config(cli)?;
    if config.feature == FeatureKind::Esf {
        return Err(usage("ESF is a global descriptor and uses no dictionary"));
    }
    if config.training.is_empty() {
        return Err(Failure::Run(Error::InsufficientData("the training list is empty".into())));
    }
    let (sets, stats) = extract_entries(&config, &config.training)?;
    let t = Instant::now();
    let dictionary = fit_dictionary(&config, &sets)?.expect("local features have a dictionary");
    let seconds = t.elapsed().as_secs_f64();
    let out = out_path(cli, "dictionary.sldc");
    dictionary.save(out)?;
    print_extraction("training features", &stats);
    println!(
        "dictionary: k = {}, {} features, {} iterations, inertia {:.6}, {:.3} s -> {}",
        dictionary.k(),
        dictionary.trained_on,
        dictionary.iterations,
        dictionary.inertia,
        seconds,
        out.display()
    );
    Ok(json!({
        "dictionary": out.display().to_string(),
        "k": dictionary.k(),
        "features": dictionary.trained_on,
        "iterations": dictionary.iterations,
        "inertia": dictionary.inertia,
        "seconds": seconds,
        "extraction": extraction_json(&stats),
    }))
}

fn load_dictionary(config: &ExperimentConfig, path: Option<&Path>) -> std::result::Result<Option<Dictionary>, Failure> {
    match (config.feature, path) {
        (FeatureKind::Esf, None) => Ok(None),
        (FeatureKind::Esf, Some(_)) => Err(usage("ESF uses no dictionary")),
        (_, None) => Err(usage("--dictionary is required for local features")),
        (kind, Some(p)) => {
            let d = Dictionary::load(p)?;
            if d.kind != kind {
                return Err(Failure::Run(Error::KindMismatch {
                    expected: kind.to_string(),
                    found: d.kind.to_string(),
                }));
            }
            if d.k() != config.k() {
                return Err(Failure::Run(Error::Config(format!(
                    "dictionary has {} words but the configuration asks for k = {}",
                    d.k(),
                    config.k()
                ))));
            }
            Ok(Some(d))
        }
    }
}

fn describe(cli: &Cli, a: &DescribeArgs) -> Outcome {
    let config = load_config(cli)?;
    let dictionary = load_dictionary(&config, a.dictionary.as_deref())?;
    let entries = match a.list {
        ListChoice::Training => &config.training,
        ListChoice::Test => &config.test,
    };
    if entries.is_empty() {
        return Err(Failure::Run(Error::InsufficientData("the selected cloud list is empty".into())));
    }
    let (sets, stats) = extract_entries(&config, entries)?;
    let descriptors = sets
        .iter()
        .zip(entries)
        .map(|(s, e)| {
            let mut d = pipeline::describe_features(dictionary.as_ref(), s)?;
            d.label = Some(e.label.clone());
            Ok(d)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let out = out_path(cli, "descriptors.slbd");
    save_descriptors(out, &descriptors)?;
    let empty = descriptors.iter().filter(|d| d.empty).count();
    print_extraction("described clouds", &stats);
    println!(
        "{} descriptors of length {} ({} empty) -> {}",
        descriptors.len(),
        descriptor_dim(&config),
        empty,
        out.display()
    );
    Ok(json!({
        "descriptors": out.display().to_string(),
        "count": descriptors.len(),
        "dim": descriptor_dim(&config),
        "empty": empty,
        "extraction": extraction_json(&stats),
    }))
}

fn train(cli: &Cli, a: &TrainArgs) -> Outcome {
    let config = load_config(cli)?;
    let out = out_path(cli, "model.slts");
    let t = Instant::now();
    let (system, json_report) = match &a.descriptors {
        Some(table) => {
            let dictionary = load_dictionary(&config, a.dictionary.as_deref())?;
            let descriptors = load_descriptors(table)?;
            let labels = descriptors
                .iter()
                .map(|d| {
                    d.label.clone().ok_or_else(|| Error::Container(format!("{}: descriptor without label", d.source)))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            let classifier = fit_classifier(&config, &descriptors, &labels)?;
            let seconds = t.elapsed().as_secs_f64();
            println!("classifier: {} on {} descriptors, {:.3} s", config.classifier.name(), descriptors.len(), seconds);
            (
                TrainedSystem::new(&config, dictionary, classifier)?,
                json!({ "descriptors": descriptors.len(), "classifier_seconds": seconds }),
            )
        }
        None => {
            let (system, r) = pipeline::train(&config)?;
            print_extraction("training clouds", &r.extraction);
            println!(
                "  seconds: dictionary {:.3}, descriptors {:.3}, classifier {:.3}, total {:.3}",
                r.dictionary_seconds, r.describe_seconds, r.classifier_seconds, r.total_seconds
            );
            println!("  empty descriptors: {}", r.empty_descriptors);
            let report = json!({
                "extraction": extraction_json(&r.extraction),
                "empty_descriptors": r.empty_descriptors,
                "dictionary_seconds": r.dictionary_seconds,
                "classifier_seconds": r.classifier_seconds,
            });
            (system, report)
        }
    };
    system.save(out)?;
    println!("trained {} over {} classes -> {}", config.classifier.name(), system.classes().len(), out.display());
    let mut summary = json!({
        "model": out.display().to_string(),
        "classes": system.classes(),
        "fingerprint": system.fingerprint(),
        "seconds": t.elapsed().as_secs_f64(),
    });
    summary["report"] = json_report;
    Ok(summary)
}

/// Loads a trained system; a given `--config` must match its fingerprint.
fn load_system(cli: &Cli, path: &Path) -> std::result::Result<(TrainedSystem, Option<ExperimentConfig>), Failure> {
    let mut system = TrainedSystem::load(path)?;
    let config = match &cli.config {
        Some(_) => {
            let config = load_config(cli)?;
            system.check_compatible(&config)?;
            system.config.cache_dir = config.cache_dir.clone();
            Some(config)
        }
        None => None,
    };
    if let Some(dir) = &cli.cache_dir {
        system.config.cache_dir = Some(dir.clone());
    }
    Ok((system, config))
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Outcome {
    let (system, config) = load_system(cli, &a.model)?;
    let entries: Vec<CloudEntry> = if a.clouds.is_empty() {
        let config = config.ok_or_else(|| usage("give cloud paths or a --config with a [test] list"))?;
        config.test
    } else {
        a.clouds.iter().map(|p| CloudEntry { path: p.clone(), label: String::new() }).collect()
    };
    if entries.is_empty() {
        return Err(Failure::Run(Error::InsufficientData("no clouds to classify".into())));
    }
    let (sets, failed, stats) = pipeline::extract_entries_lenient(&system.config, &entries);
    for (i, e) in &failed {
        eprintln!("warning: skipping {}: {e}", entries[*i].path.display());
    }
    let mut rows = Vec::with_capacity(sets.len());
    for (i, set) in &sets {
        let r = system.classify_features(set)?;
        rows.push((entries[*i].path.clone(), r));
    }
    let listing: Vec<CloudEntry> = rows
        .iter()
        .map(|(p, r)| CloudEntry { path: std::path::absolute(p).unwrap_or_else(|_| p.clone()), label: r.label.clone() })
        .collect();
    match cli.format {
        Format::Text => print!("{}", cloud_list(&listing)),
        Format::Csv => {
            let mut s = String::from("path,label,empty");
            for c in system.classes() {
                write!(s, ",{c}").unwrap();
            }
            s.push('\n');
            for (p, r) in &rows {
                write!(s, "{},{},{}", p.display(), r.label, r.empty).unwrap();
                for v in &r.scores {
                    write!(s, ",{v:.6}").unwrap();
                }
                s.push('\n');
            }
            print!("{s}");
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|(p, r)| json!({"path": p.display().to_string(), "label": r.label, "empty": r.empty, "scores": r.scores}))
                .collect();
            println!("{}", serde_json::to_string_pretty(&items).expect("json"));
        }
    }
    if let Some(out) = &cli.out {
        write_text(out, &cloud_list(&listing))?;
    }
    Ok(json!({
        "classified": rows.len(),
        "skipped": failed.len(),
        "empty": rows.iter().filter(|(_, r)| r.empty).count(),
        "extraction": extraction_json(&stats),
    }))
}

/// Reads a `path<TAB>label` list (the `[test]` or `[training]` sections of a
/// configuration file are accepted too). Relative paths are taken relative to
/// the list's directory and every path is made absolute, so lists written from
/// different places can be joined.
fn read_labels(path: &Path) -> std::result::Result<Vec<(String, String)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('[') || t.contains('=') {
            continue;
        }
        let (p, l) = t
            .rsplit_once('\t')
            .or_else(|| t.rsplit_once(char::is_whitespace))
            .ok_or_else(|| Error::Config(format!("{}: line {}: expected `path<TAB>label`", path.display(), n + 1)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let full =
            std::path::absolute(base.join(p.trim())).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        out.push((full.display().to_string(), l.trim().to_string()));
    }
    Ok(out)
}

fn print_report(cli: &Cli, report: &crate::classify::EvaluationReport) -> std::result::Result<(), Failure> {
    let rendered = show_results(report, cli.format.into());
    print!("{rendered}");
    if let Some(out) = &cli.out {
        write_text(out, &rendered)?;
    }
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Outcome {
    if let (Some(pred), Some(truth)) = (&a.predictions, &a.truth) {
        let predicted = read_labels(pred)?;
        let truth_list = read_labels(truth)?;
        let truth_map: HashMap<&str, &str> = truth_list.iter().map(|(p, l)| (p.as_str(), l.as_str())).collect();
        let mut pairs = Vec::with_capacity(predicted.len());
        for (p, l) in &predicted {
            let t = truth_map
                .get(p.as_str())
                .ok_or_else(|| Error::Config(format!("{p} has a prediction but no ground truth")))?;
            pairs.push((l.as_str(), *t));
        }
        let mut classes: Vec<String> = pairs.iter().flat_map(|(p, t)| [p.to_string(), t.to_string()]).collect();
        classes.sort();
        classes.dedup();
        let preds: Vec<&str> = pairs.iter().map(|p| p.0).collect();
        let truths: Vec<&str> = pairs.iter().map(|p| p.1).collect();
        let report = crate::classify::evaluate(&preds, &truths, &classes)?;
        print_report(cli, &report)?;
        return Ok(json!({"accuracy": report.accuracy, "total": report.total(), "correct": report.correct()}));
    }
    let model = a.model.as_ref().ok_or_else(|| usage("evaluate needs --predictions and --truth, or --model"))?;
    let (system, config) = load_system(cli, model)?;
    let config = config.ok_or_else(|| usage("evaluate --model needs --config with a [test] list"))?;
    let (report, skipped, stats) = match &a.descriptors {
        Some(table) => {
            let descriptors = load_descriptors(table)?;
            let predictions = descriptors
                .iter()
                .map(|d| {
                    let r = system.classify_descriptor(d)?;
                    let truth = d
                        .label
                        .clone()
                        .ok_or_else(|| Error::Container(format!("{}: descriptor without label", d.source)))?;
                    Ok(pipeline::PredictionRecord {
                        path: PathBuf::from(&d.source),
                        truth,
                        predicted: r.label,
                        empty: r.empty,
                    })
                })
                .collect::<crate::Result<Vec<_>>>()?;
            (pipeline::evaluate_predictions(system.classes(), &predictions)?, 0, None)
        }
        None => {
            let outcome = pipeline::test(&system, &config.test)?;
            (outcome.report, outcome.skipped.len(), Some(outcome.extraction))
        }
    };
    print_report(cli, &report)?;
    let mut summary = json!({
        "accuracy": report.accuracy,
        "total": report.total(),
        "correct": report.correct(),
        "skipped": skipped,
    });
    if let Some(s) = stats {
        summary["extraction"] = extraction_json(&s);
    }
    Ok(summary)
}

fn parse_list<T: std::str::FromStr<Err = Error>>(values: &[String]) -> std::result::Result<Vec<T>, Failure> {
    values.iter().map(|v| v.trim().parse::<T>().map_err(|e| usage(e.to_string()))).collect()
}

fn run_sweep(cli: &Cli, a: &SweepArgs) -> Outcome {
    let config = load_config(cli)?;
    let grid = SweepGrid {
        detectors: parse_list::<DetectorKind>(&a.detectors)?,
        features: parse_list::<FeatureKind>(&a.features)?,
        ks: a.ks.clone(),
        classifiers: parse_list::<ClassifierKind>(&a.classifiers)?,
    };
    if grid.ks.contains(&0) {
        return Err(usage("dictionary sizes must be positive"));
    }
    let rows = sweep(&config, &grid)?;
    let csv = sweep_csv(&rows);
    match cli.format {
        Format::Csv => print!("{csv}"),
        Format::Text => {
            println!(
                "{:<17} {:<7} {:>5} {:<4} {:>9} {:>9} {:>9}",
                "detector", "feature", "k", "cls", "accuracy", "train_s", "test_s"
            );
            for r in &rows {
                println!(
                    "{:<17} {:<7} {:>5} {:<4} {:>9.4} {:>9.2} {:>9.2}",
                    r.detector,
                    r.feature.name(),
                    r.k,
                    r.classifier.name(),
                    r.accuracy,
                    r.train_seconds,
                    r.test_seconds
                );
            }
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({"detector": r.detector, "feature": r.feature.name(), "k": r.k, "classifier": r.classifier.name(),
                           "accuracy": r.accuracy, "train_seconds": r.train_seconds, "test_seconds": r.test_seconds})
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&items).expect("json"));
        }
    }
    let mut summary = json!({ "rows": rows.len() });
    if let Some(out) = &cli.out {
        write_text(out, &csv)?;
        summary["csv"] = json!(out.display().to_string());
    }
    if let Some(dat) = a.dat.clone().or_else(|| cli.out.as_ref().map(|o| o.with_extension("dat"))) {
        write_text(&dat, &sweep_dat(&rows))?;
        summary["dat"] = json!(dat.display().to_string());
    }
    let best = rows.iter().max_by(|x, y| x.accuracy.total_cmp(&y.accuracy)).expect("non-empty grid");
    summary["best"] = json!({"detector": best.detector, "feature": best.feature.name(), "k": best.k,
                             "classifier": best.classifier.name(), "accuracy": best.accuracy});
    Ok(summary)
}
