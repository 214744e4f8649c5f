//! Runs the `semloc` binary the way a script would.

use std::path::{Path, PathBuf};
use std::process::Command;

use semloc::bow::BowDescriptor;
use semloc::classify::EvaluationReport;
use semloc::pipeline::save_descriptors;
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    /// The JSON object of the `summary` line.
    fn summary(&self) -> Value {
        let line = self
            .stdout
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("summary "))
            .unwrap_or_else(|| panic!("no summary line in:\n{}", self.stdout));
        serde_json::from_str(line).unwrap()
    }

    /// Standard output without the summary line.
    fn body(&self) -> String {
        self.stdout.lines().filter(|l| !l.starts_with("summary ")).map(|l| format!("{l}\n")).collect()
    }

    fn ok(self) -> Self {
        assert_eq!(self.code, 0, "stdout:\n{}\nstderr:\n{}", self.stdout, self.stderr);
        self
    }
}

fn semloc<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_semloc")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small dataset (5 classes, 3 training and 3 test clouds each) plus a
/// configuration using a 12-word dictionary.
fn dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let run = semloc([
        "synth",
        "--out",
        s(&data),
        "--seed",
        "4",
        "--clouds-per-category",
        "6",
        "--points",
        "1500",
        "--split",
        "0.5",
    ])
    .ok();
    let summary = run.summary();
    assert_eq!(summary["command"], "synth");
    assert_eq!((summary["training"].as_u64(), summary["test"].as_u64()), (Some(15), Some(15)));
    let manifest = PathBuf::from(summary["manifest"].as_str().unwrap());
    let config = data.join("experiment.cfg");
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&config, format!("k = 12\n{text}")).unwrap();
    config
}

#[test]
fn extraction_is_cached_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let cache = dir.path().join("cache");
    let first = semloc(["extract", "--config", s(&config), "--cache-dir", s(&cache)]).ok().summary();
    assert_eq!(first["cache_misses"], 30);
    assert!(first["compute_seconds"].as_f64().unwrap() > 0.0);
    let second = semloc(["extract", "--config", s(&config), "--cache-dir", s(&cache)]).ok().summary();
    assert_eq!(second["cache_hits"], 30);
    assert_eq!(second["cache_misses"], 0);
    assert_eq!(second["compute_seconds"], 0.0);
    assert_eq!(first["features"], second["features"]);
    assert_eq!(first["keypoints"], second["keypoints"]);

    // without a cache there is nowhere to put the features
    assert_eq!(semloc(["extract", "--config", s(&config)]).code, 1);
}

#[test]
fn staged_commands_match_a_single_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let cache = dir.path().join("cache");
    let p = |name: &str| dir.path().join(name);
    let base = ["--config", s(&config), "--cache-dir", s(&cache), "--seed", "21"];

    semloc(["extract"].iter().chain(&base)).ok();
    let dict = semloc(["dict", "--out", s(&p("words.sldc"))].iter().chain(&base)).ok().summary();
    assert_eq!(dict["k"], 12);
    assert_eq!(dict["extraction"]["cache_hits"], 15);
    semloc(["describe", "--dictionary", s(&p("words.sldc")), "--out", s(&p("train.slbd"))].iter().chain(&base)).ok();
    semloc(
        ["describe", "--list", "test", "--dictionary", s(&p("words.sldc")), "--out", s(&p("test.slbd"))]
            .iter()
            .chain(&base),
    )
    .ok();
    semloc(
        [
            "train",
            "--descriptors",
            s(&p("train.slbd")),
            "--dictionary",
            s(&p("words.sldc")),
            "--out",
            s(&p("staged.slts")),
        ]
        .iter()
        .chain(&base),
    )
    .ok();
    let staged = semloc(
        ["evaluate", "--model", s(&p("staged.slts")), "--descriptors", s(&p("test.slbd")), "--format", "json"]
            .iter()
            .chain(&base),
    )
    .ok();

    semloc(["train", "--out", s(&p("single.slts"))].iter().chain(&base)).ok();
    let single = semloc(["evaluate", "--model", s(&p("single.slts")), "--format", "json"].iter().chain(&base)).ok();

    assert_eq!(std::fs::read(p("staged.slts")).unwrap(), std::fs::read(p("single.slts")).unwrap());
    assert_eq!(staged.body(), single.body());
    let report: EvaluationReport = serde_json::from_str(&single.body()).unwrap();
    assert_eq!(report.total(), 15);
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let model = |threads: &str| {
        let out = dir.path().join(format!("model-{threads}.slts"));
        semloc(["train", "--config", s(&config), "--threads", threads, "--out", s(&out)]).ok();
        let labels = semloc(["classify", "--config", s(&config), "--threads", threads, "--model", s(&out)]).ok().body();
        (std::fs::read(out).unwrap(), labels)
    };
    let one = model("1");
    assert_eq!(one, model("2"));
    assert_eq!(one.1.lines().count(), 15);
}

#[test]
fn predictions_round_trip_through_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let model = dir.path().join("m.slts");
    let preds = dir.path().join("predictions.tsv");
    semloc(["train", "--config", s(&config), "--out", s(&model)]).ok();
    let classified =
        semloc(["classify", "--config", s(&config), "--model", s(&model), "--out", s(&preds)]).ok().summary();
    assert_eq!(classified["classified"], 15);

    let from_files = semloc(["evaluate", "--predictions", s(&preds), "--truth", s(&config), "--format", "json"]).ok();
    let from_model = semloc(["evaluate", "--config", s(&config), "--model", s(&model), "--format", "json"]).ok();
    let a: EvaluationReport = serde_json::from_str(&from_files.body()).unwrap();
    let b: EvaluationReport = serde_json::from_str(&from_model.body()).unwrap();
    assert_eq!(a.confusion, b.confusion);
    assert_eq!(a.accuracy, b.accuracy);

    let perfect = semloc(["evaluate", "--predictions", s(&config), "--truth", s(&config)]).ok();
    assert!(perfect.stdout.contains("accuracy: 1.0000"), "{}", perfect.stdout);
    assert_eq!(perfect.summary()["accuracy"], 1.0);
}

#[test]
fn evaluation_formats() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let csv = semloc(["evaluate", "--predictions", s(&config), "--truth", s(&config), "--format", "csv"]).ok().body();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split(',').count() == 6), "{csv}");
    assert_eq!(lines[0], "true\\predicted,CR,HA,PO,SO,TR");

    let json = semloc(["evaluate", "--predictions", s(&config), "--truth", s(&config), "--format", "json"]).ok().body();
    let report: EvaluationReport = serde_json::from_str(&json).unwrap();
    let again: EvaluationReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, again);
    assert_eq!(report.classes.len(), 5);

    let out = dir.path().join("report.txt");
    semloc(["evaluate", "--predictions", s(&config), "--truth", s(&config), "--out", s(&out)]).ok();
    assert!(std::fs::read_to_string(out).unwrap().starts_with("accuracy: 1.0000"));
}

#[test]
fn sweep_writes_the_accuracy_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let table = dir.path().join("grid.csv");
    let run = semloc([
        "sweep",
        "--config",
        s(&config),
        "--cache-dir",
        s(&dir.path().join("cache")),
        "--detectors",
        "uniform_sampling,harris3d",
        "--features",
        "fpfh,shot",
        "--ks",
        "25,50",
        "--classifiers",
        "svm,knn",
        "--out",
        s(&table),
        "--format",
        "csv",
    ])
    .ok();
    assert_eq!(run.summary()["rows"], 16);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert_eq!(csv, run.body());
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("detector,feature,k,classifier,accuracy,train_seconds,test_seconds"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert_eq!(r.len(), 7);
        let accuracy: f64 = r[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&accuracy));
    }
    let dat = std::fs::read_to_string(dir.path().join("grid.dat")).unwrap();
    assert_eq!(dat.matches("# k accuracy").count(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let unknown = semloc(["frobnicate"]);
    assert_eq!(unknown.code, 1);
    assert!(unknown.stderr.contains("Usage"), "{}", unknown.stderr);
    assert_eq!(semloc(["train"]).code, 1, "missing --config");
    assert_eq!(semloc(["synth"]).code, 1, "missing --out");
    assert_eq!(semloc(["train", "--format", "xml", "--config", "x.cfg"]).code, 1);
    assert_eq!(semloc(["--help"]).code, 0);

    let missing = semloc(["train", "--config", s(&dir.path().join("nope.cfg"))]);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("nope.cfg"), "{}", missing.stderr);

    // a cloud that is not a PCD file: the error names the file and stage
    let bad = dir.path().join("bad.pcd");
    std::fs::write(&bad, "not a point cloud\n").unwrap();
    let other = dir.path().join("other.pcd");
    std::fs::write(&other, "not a point cloud\n").unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[training]\nbad.pcd\tCR\nother.pcd\tHA\n").unwrap();
    let broken = semloc(["train", "--config", s(&cfg)]);
    assert_eq!(broken.code, 2);
    assert!(broken.stderr.contains("bad.pcd") && broken.stderr.contains("load"), "{}", broken.stderr);

    // non-finite descriptors make the SVM solver fail numerically
    let esf = dir.path().join("esf.cfg");
    std::fs::write(&esf, "feature = esf\n[training]\nbad.pcd\tCR\nother.pcd\tHA\n").unwrap();
    let table = dir.path().join("nan.slbd");
    let row = |label: &str, v: f64| BowDescriptor {
        histogram: vec![v; 640],
        empty: false,
        source: format!("{label}.pcd"),
        label: Some(label.into()),
    };
    save_descriptors(&table, &[row("CR", f64::NAN), row("HA", 0.5), row("CR", 0.25)]).unwrap();
    let numeric =
        semloc(["train", "--config", s(&esf), "--descriptors", s(&table), "--out", s(&dir.path().join("m.slts"))]);
    assert_eq!(numeric.code, 3, "stdout:\n{}\nstderr:\n{}", numeric.stdout, numeric.stderr);
}
