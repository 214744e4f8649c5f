//! Drives the command-line interface in-process: synthesize, train, classify
//! and evaluate, exactly as the `semloc` binary would.
//!
//! ```text
//! cargo run --release --example cli_workflow
//! ```

use semloc::cli::run;

fn step(args: &[&str]) {
    println!("$ semloc {}", args.join(" "));
    let code = run(std::iter::once("semloc").chain(args.iter().copied()));
    println!("exit code {code}\n");
    if code != 0 {
        std::process::exit(code);
    }
}

fn main() {
    let dir = std::env::temp_dir().join("semloc-cli");
    let d = |name: &str| dir.join(name).display().to_string();
    let config = d("data/manifest.cfg");
    step(&["synth", "--out", &d("data"), "--seed", "3", "--clouds-per-category", "6", "--points", "2000"]);
    step(&["train", "--config", &config, "--cache-dir", &d("cache"), "--out", &d("model.slts")]);
    step(&[
        "classify",
        "--config",
        &config,
        "--cache-dir",
        &d("cache"),
        "--model",
        &d("model.slts"),
        "--out",
        &d("labels.tsv"),
    ]);
    step(&["evaluate", "--predictions", &d("labels.tsv"), "--truth", &config, "--format", "csv"]);
}
